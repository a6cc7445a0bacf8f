"""Histogram fitting with a team of continuous-action automata.

One automaton per mixture parameter (prior, spread and mean of every class).
Every iteration each automaton draws an action, the joint action is scored by
the penalized histogram error, and the single resulting reinforcement updates
all densities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _backend
from .carla import (
    ActionBounds,
    DensityTable,
    ReferenceWindow,
    compute_beta,
    push_cost,
)
from .gmm import DEFAULT_OMEGA, CostConfig, Mixture, cost_j, mixture_from_dict, mixture_to_dict, thresholds
from .histogram import NormalizedHistogram

__all__ = [
    "SIGMA_FLOOR",
    "PARAM_KINDS",
    "LaConfig",
    "FitReport",
    "NonFiniteCostError",
    "action_to_mixture",
    "mixture_to_action",
    "param_names",
    "fit_la",
    "converge_iteration",
    "report_to_dict",
    "report_from_dict",
    "report_to_json",
    "trace_to_csv",
    "trace_from_csv",
]

SIGMA_FLOOR = 0.5
PARAM_KINDS = ("p", "sigma", "mu")
CONVERGE_RATIO = 1.05


class NonFiniteCostError(FloatingPointError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"non-finite cost {value!r} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class LaConfig:
    k: int = 4
    iterations: int = 2000
    g_w: float = 0.02
    g_h: float = 0.3
    omega: float = DEFAULT_OMEGA
    window_m: int = 25
    seed: int = 0
    resolution: int = 256
    bounds_p: tuple[float, float] = (0.0, 0.5)
    bounds_sigma: tuple[float, float] = (0.0, 128.0)
    bounds_mu: tuple[float, float] = (0.0, 255.0)
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least two classes")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.window_m < 2:
            raise ValueError("reference window must hold at least two costs")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")
        for b in (self.bounds_p, self.bounds_sigma, self.bounds_mu):
            ActionBounds(*b)

    def bounds(self) -> list[ActionBounds]:
        """Bounds in action-vector order: ``(p, sigma, mu)`` per class."""
        per_class = [ActionBounds(*self.bounds_p), ActionBounds(*self.bounds_sigma), ActionBounds(*self.bounds_mu)]
        return per_class * self.k


def param_names(k: int) -> list[str]:
    return [f"{kind}{i + 1}" for i in range(k) for kind in PARAM_KINDS]


def action_to_mixture(action: Sequence[float], sigma_floor: float = SIGMA_FLOOR) -> Mixture:
    """Map ``(p1, sigma1, mu1, p2, ...)`` to a mixture, flooring the spreads."""
    a = np.asarray(action, dtype=float).reshape(-1)
    if a.size % 3:
        raise ValueError("action vector length must be a multiple of 3")
    return Mixture.from_arrays(a[0::3], a[2::3], np.maximum(a[1::3], sigma_floor))


def mixture_to_action(mix: Mixture) -> np.ndarray:
    a = np.empty(3 * mix.k)
    a[0::3], a[1::3], a[2::3] = mix.p, mix.sigma, mix.mu
    return a


@dataclass
class FitReport:
    """Outcome of one fit; shared by the automata and the baseline fitters."""

    method: str
    mixture: Mixture
    final_J: float
    iterations_run: int
    iterations_to_converge: int
    trace: np.ndarray  # (iterations, 2): cost, running-best cost
    thresholds: list[int] | None = None
    flags: list[str] = field(default_factory=list)
    actions: np.ndarray | None = None
    density_modes: np.ndarray | None = None
    init: Mixture | None = None
    init_source: str | None = None
    loglik: np.ndarray | None = None
    surrogate: np.ndarray | None = None
    snapshots: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def converge_iteration(best: np.ndarray, final: float, ratio: float = CONVERGE_RATIO) -> int:
    """1-based index of the first running-best cost within ``ratio`` of ``final``."""
    hit = np.nonzero(best <= final * ratio)[0]
    return int(hit[0]) + 1 if hit.size else len(best)


def safe_thresholds(mix: Mixture) -> tuple[list[int] | None, str | None]:
    try:
        return thresholds(mix), None
    except ValueError as exc:
        return None, f"degenerate thresholds: {exc}"


def fit_la(
    hist: NormalizedHistogram,
    cfg: LaConfig | None = None,
    *,
    snapshot_iters: Sequence[int] = (),
    kernels=None,
) -> FitReport:
    """Fit a K-class mixture to ``hist`` with the automata team.

    Returns the best joint action ever evaluated. ``snapshot_iters`` lists
    iterations (0 = initial uniform state) at which copies of every density are
    kept in ``report.snapshots`` keyed by ``(param_name, iteration)``.
    ``kernels`` overrides the active compute backend.
    """
    cfg = cfg or LaConfig()
    kern = kernels or _backend.kernels
    bounds = cfg.bounds()
    n_auto = len(bounds)
    names = param_names(cfg.k)
    lo = np.array([b.min for b in bounds])
    width = np.array([b.width for b in bounds])
    dx = width / cfg.resolution
    sig_n = cfg.g_w * width
    lam_n = cfg.g_h / width
    dens = np.ascontiguousarray(np.repeat((1.0 / width)[:, None], cfg.resolution + 1, axis=1))

    # one stream per automaton; child i does not depend on how many are spawned
    streams = np.random.SeedSequence(cfg.seed).spawn(n_auto)
    z = np.ascontiguousarray(
        np.stack([np.random.Generator(np.random.PCG64(s)).random(cfg.iterations) for s in streams], axis=1)
    )

    h = np.ascontiguousarray(hist.bins, dtype=float)
    x = np.arange(h.size, dtype=np.int64)
    window = ReferenceWindow(cfg.window_m)
    trace = np.empty((cfg.iterations, 2))
    best_j = math.inf
    best_a = None
    snaps = {}
    wanted = set(int(i) for i in snapshot_iters)

    def snapshot(n):
        for k, name in enumerate(names):
            snaps[(name, n)] = DensityTable(bounds[k], dens[k].copy())

    if 0 in wanted:
        snapshot(0)

    for n in range(cfg.iterations):
        a = kern.select_team(dens, lo, dx, z[n])
        p = np.ascontiguousarray(a[0::3])
        sd = np.maximum(a[1::3], cfg.sigma_floor)
        mu = np.ascontiguousarray(a[2::3])
        j = kern.mixture_cost(p, mu, sd, h, x, cfg.omega)
        if not math.isfinite(j):
            raise NonFiniteCostError(n + 1, j)
        push_cost(window, j)
        beta = compute_beta(window, j)
        if beta > 0.0:
            kern.reinforce_team(dens, lo, dx, a, beta * lam_n, sig_n)
        if j < best_j:
            best_j, best_a = j, a
        trace[n, 0] = j
        trace[n, 1] = best_j
        if n + 1 in wanted:
            snapshot(n + 1)

    mix = action_to_mixture(best_a, cfg.sigma_floor)
    thr, problem = safe_thresholds(mix)
    modes = lo + np.argmax(dens, axis=1) * dx
    return FitReport(
        method="la",
        mixture=mix,
        final_J=float(best_j),
        iterations_run=cfg.iterations,
        iterations_to_converge=converge_iteration(trace[:, 1], best_j),
        trace=trace,
        thresholds=thr,
        flags=[problem] if problem else [],
        actions=np.array(best_a),
        density_modes=modes,
        snapshots=snaps,
        config={
            "k": cfg.k,
            "iterations": cfg.iterations,
            "g_w": cfg.g_w,
            "g_h": cfg.g_h,
            "omega": cfg.omega,
            "window_m": cfg.window_m,
            "seed": cfg.seed,
            "resolution": cfg.resolution,
        },
    )


def rescore(report: FitReport, hist: NormalizedHistogram, omega: float) -> float:
    return cost_j(report.mixture, hist, CostConfig(omega=omega))


def report_to_dict(report: FitReport) -> dict:
    d = {"method": report.method}
    d.update(mixture_to_dict(report.mixture, with_thresholds=False))
    d["thresholds"] = report.thresholds
    d["final_J"] = report.final_J
    d["iterations_run"] = report.iterations_run
    d["iterations_to_converge"] = report.iterations_to_converge
    d["flags"] = list(report.flags)
    if report.actions is not None:
        d["actions"] = dict(zip(param_names(report.mixture.k), report.actions.tolist()))
    if report.density_modes is not None:
        d["density_modes"] = dict(zip(param_names(report.mixture.k), report.density_modes.tolist()))
    if report.init is not None:
        d["init"] = mixture_to_dict(report.init, with_thresholds=False)["components"]
        d["init_source"] = report.init_source
    if report.config:
        d["config"] = report.config
    return d


def report_from_dict(d: dict) -> FitReport:
    mix = mixture_from_dict(d)
    k = mix.k
    names = param_names(k)
    return FitReport(
        method=d["method"],
        mixture=mix,
        final_J=float(d["final_J"]),
        iterations_run=int(d["iterations_run"]),
        iterations_to_converge=int(d["iterations_to_converge"]),
        trace=np.empty((0, 2)),
        thresholds=d.get("thresholds"),
        flags=list(d.get("flags", [])),
        actions=np.array([d["actions"][n] for n in names]) if "actions" in d else None,
        density_modes=np.array([d["density_modes"][n] for n in names]) if "density_modes" in d else None,
        init=mixture_from_dict(d["init"]) if "init" in d else None,
        init_source=d.get("init_source"),
        config=d.get("config", {}),
    )


def report_to_json(report: FitReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def trace_to_csv(report: FitReport) -> str:
    lines = ["iter,J,best_J"]
    lines += [f"{i + 1},{j!r},{b!r}" for i, (j, b) in enumerate(report.trace.tolist())]
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str) -> np.ndarray:
    rows = text.strip().splitlines()
    if not rows or rows[0].strip() != "iter,J,best_J":
        raise ValueError("expected header 'iter,J,best_J'")
    return np.array([[float(v) for v in r.split(",")[1:]] for r in rows[1:]]).reshape(-1, 2)


def write_report(report: FitReport, path) -> None:
    Path(path).write_text(report_to_json(report))
