"""Continuous-action reinforcement learning automata.

Each automaton owns a probability density over one real parameter range,
stored on a uniform grid. An action is drawn by inverting the (trapezoid)
cumulative distribution; a rewarded action adds a Gaussian bump around itself
to the density, which is then rescaled to unit area. A small discrete
reward/inaction automaton is included for completeness.
"""

from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ._backend import kernels

__all__ = [
    "ActionBounds",
    "DensityTable",
    "Automaton",
    "ReferenceWindow",
    "DiscreteAutomaton",
    "DEFAULT_RESOLUTION",
    "DEFAULT_WINDOW",
    "init_uniform",
    "select_action",
    "neighborhood",
    "update_density",
    "compute_beta",
    "push_cost",
    "discrete_lri_update",
    "density_to_csv",
    "write_density_csv",
]

DEFAULT_RESOLUTION = 256
DEFAULT_WINDOW = 25
_NORM_TOL = 1e-6


@dataclass(frozen=True)
class ActionBounds:
    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("action bounds must be finite")
        if not self.max > self.min:
            raise ValueError(f"need max > min, got [{self.min}, {self.max}]")

    @property
    def width(self) -> float:
        return self.max - self.min


@dataclass(frozen=True, eq=False)
class DensityTable:
    """Density samples at ``D + 1`` equally spaced points spanning the bounds."""

    bounds: ActionBounds
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size < 2:
            raise ValueError("density table needs at least two grid points")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def resolution(self) -> int:
        return self.values.size - 1

    @property
    def dx(self) -> float:
        return self.bounds.width / self.resolution

    @property
    def grid(self) -> np.ndarray:
        return self.bounds.min + np.arange(self.values.size) * self.dx

    def cdf(self) -> np.ndarray:
        """Cumulative integral at each grid point."""
        return kernels.cumulative(np.ascontiguousarray(self.values), self.dx)

    def integral(self) -> float:
        return float(self.cdf()[-1])

    def mode(self) -> float:
        """Grid point of highest density."""
        return float(self.grid[int(np.argmax(self.values))])


@dataclass(frozen=True)
class Automaton:
    density: DensityTable
    g_w: float
    g_h: float

    def __post_init__(self):
        if not (self.g_w > 0 and self.g_h > 0):
            raise ValueError("g_w and g_h must be positive")

    @property
    def bounds(self) -> ActionBounds:
        return self.density.bounds

    @property
    def sigma_n(self) -> float:
        """Neighborhood width, ``g_w * (x_max - x_min)``."""
        return self.g_w * self.bounds.width

    @property
    def lambda_n(self) -> float:
        """Neighborhood height, ``g_h / (x_max - x_min)``."""
        return self.g_h / self.bounds.width


def init_uniform(
    bounds: ActionBounds, resolution: int = DEFAULT_RESOLUTION, g_w: float = 0.02, g_h: float = 0.3
) -> Automaton:
    if resolution < 8:
        raise ValueError(f"grid resolution must be >= 8, got {resolution}")
    values = np.full(resolution + 1, 1.0 / bounds.width)
    return Automaton(DensityTable(bounds, values), g_w, g_h)


def select_action(a: Automaton, z: float) -> float:
    """Action whose cumulative probability equals ``z``.

    The cumulative integral is known at the grid points and interpolated
    linearly in between.
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z must lie in [0, 1], got {z}")
    dens = a.density
    total = dens.integral()
    if abs(total - 1.0) > _NORM_TOL:
        raise ValueError(f"density integrates to {total}, not 1")
    return float(kernels.invert_cdf(np.ascontiguousarray(dens.values), dens.bounds.min, dens.dx, z))


def neighborhood(a: Automaton, x, r: float):
    """Gaussian bump ``lambda * exp(-(x - r)^2 / (2 sigma^2))`` centred on action ``r``."""
    x = np.asarray(x, dtype=float)
    s = a.sigma_n
    out = a.lambda_n * np.exp(-((x - r) ** 2) / (2.0 * s * s))
    return float(out) if out.ndim == 0 else out


def update_density(a: Automaton, r: float, beta: float) -> Automaton:
    """Reinforce action ``r`` with strength ``beta`` and renormalize.

    ``beta == 0`` returns the automaton unchanged.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    b = a.bounds
    if not b.min <= r <= b.max:
        raise ValueError(f"action {r} outside [{b.min}, {b.max}]")
    if beta == 0.0:
        return a
    vals = np.array(a.density.values, dtype=float)
    kernels.reinforce(vals, b.min, a.density.dx, float(r), beta * a.lambda_n, a.sigma_n)
    return Automaton(DensityTable(b, vals), a.g_w, a.g_h)


class ReferenceWindow:
    """FIFO of the last ``m`` costs, supplying the median and minimum."""

    def __init__(self, m: int = DEFAULT_WINDOW, costs: Iterable[float] = ()):
        if m < 2:
            raise ValueError(f"window capacity must be >= 2, got {m}")
        self.m = m
        self._costs: deque[float] = deque(maxlen=m)
        for c in costs:
            push_cost(self, c)

    def __len__(self):
        return len(self._costs)

    @property
    def costs(self) -> list[float]:
        return list(self._costs)

    def median(self) -> float:
        return statistics.median(self._costs)

    def minimum(self) -> float:
        return min(self._costs)


def push_cost(w: ReferenceWindow, cost: float) -> ReferenceWindow:
    """Append ``cost``, evicting the oldest value beyond capacity. Mutates and returns ``w``."""
    if not (math.isfinite(cost) and cost >= 0):
        raise ValueError(f"cost must be finite and >= 0, got {cost}")
    w._costs.append(float(cost))
    return w


def compute_beta(w: ReferenceWindow, cost: float) -> float:
    """Reinforcement in [0, 1]: ``(J_med - J) / (J_med - J_min)`` clipped.

    The current cost is expected to be in the window already. With a flat
    window (median == minimum) any cost at or below the minimum gets 1.
    """
    if len(w) == 0:
        raise ValueError("reference window is empty")
    med = w.median()
    lo = w.minimum()
    if med == lo:
        return 1.0 if cost <= lo else 0.0
    beta = (med - cost) / (med - lo)
    return min(1.0, max(0.0, beta))


@dataclass(frozen=True, eq=False)
class DiscreteAutomaton:
    """Finite action set with reward/inaction learning rate ``theta``."""

    probs: np.ndarray
    theta: float

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size < 1 or np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must lie in [0, 1] and sum to 1")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, r: int, theta: float) -> "DiscreteAutomaton":
        return cls(np.full(r, 1.0 / r), theta)

    def choose(self, z: float) -> int:
        """Action index for a uniform draw ``z``."""
        idx = int(np.searchsorted(np.cumsum(self.probs), z, side="right"))
        return min(idx, self.probs.size - 1)


def discrete_lri_update(d: DiscreteAutomaton, chosen: int, beta: float) -> DiscreteAutomaton:
    """Linear reward/inaction step after action ``chosen`` earned ``beta``."""
    if not 0 <= chosen < d.probs.size:
        raise IndexError(f"action index {chosen} out of range for {d.probs.size} actions")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    step = d.theta * beta
    p = d.probs * (1.0 - step)
    # the chosen entry absorbs the rounding so the total stays 1
    p[chosen] = 0.0
    p[chosen] = 1.0 - p.sum()
    np.clip(p, 0.0, 1.0, out=p)
    return DiscreteAutomaton(p, d.theta)


def density_to_csv(dens: DensityTable) -> str:
    lines = ["x,f"]
    lines += [f"{x!r},{f!r}" for x, f in zip(dens.grid.tolist(), dens.values.tolist())]
    return "\n".join(lines) + "\n"


def write_density_csv(dens: DensityTable, directory, param: str, iteration: int) -> Path:
    """Write ``density_<param>_<iteration>.csv`` into ``directory``."""
    path = Path(directory) / f"density_{param}_{iteration}.csv"
    path.write_text(density_to_csv(dens))
    return path

