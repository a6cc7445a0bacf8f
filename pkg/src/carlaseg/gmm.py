"""Gaussian mixtures over gray levels: density, penalized fit cost, thresholds."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .histogram import NormalizedHistogram

__all__ = [
    "GaussianComponent",
    "Mixture",
    "CostConfig",
    "DEFAULT_OMEGA",
    "mixture_pdf",
    "cost_j",
    "thresholds",
    "classify",
    "mixture_to_dict",
    "mixture_from_dict",
    "load_mixture_json",
]

DEFAULT_OMEGA = 0.01
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianComponent:
    p: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 0):
            raise ValueError(f"prior must be finite and >= 0, got {self.p}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mean must be finite, got {self.mu}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma}")


@dataclass(frozen=True)
class Mixture:
    """K weighted Gaussian components.

    The priors are *not* required to sum to one; the fitting cost penalizes the
    violation instead.
    """

    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("a mixture needs at least one component")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, p, mu, sigma) -> "Mixture":
        p, mu, sigma = (np.asarray(v, dtype=float).reshape(-1) for v in (p, mu, sigma))
        if not (p.size == mu.size == sigma.size):
            raise ValueError("p, mu and sigma must have equal length")
        return cls(tuple(GaussianComponent(float(a), float(b), float(c)) for a, b, c in zip(p, mu, sigma)))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def p(self) -> np.ndarray:
        return np.array([c.p for c in self.components])

    @property
    def mu(self) -> np.ndarray:
        return np.array([c.mu for c in self.components])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([c.sigma for c in self.components])

    def sorted_by_mu(self) -> "Mixture":
        order = np.argsort(self.mu, kind="stable")
        return Mixture(tuple(self.components[i] for i in order))


@dataclass(frozen=True)
class CostConfig:
    """Penalty weight and the evaluation points of the fitting cost."""

    omega: float = DEFAULT_OMEGA
    domain: np.ndarray = field(default_factory=lambda: np.arange(256))

    def __post_init__(self):
        if not (self.omega >= 0):
            raise ValueError("omega must be >= 0")
        dom = np.asarray(self.domain, dtype=np.int64).reshape(-1)
        if dom.size < 1:
            raise ValueError("cost domain needs at least one point")
        object.__setattr__(self, "domain", dom)


def component_pdfs(mix: Mixture, x) -> np.ndarray:
    """Unweighted component densities, shape ``(K, len(x))``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    mu = mix.mu[:, None]
    sd = mix.sigma[:, None]
    return np.exp(-((x - mu) ** 2) / (2.0 * sd * sd)) / (SQRT_2PI * sd)


def mixture_pdf(mix: Mixture, x):
    """Mixture density ``sum_i P_i N(x; mu_i, sigma_i)``; scalar in, scalar out."""
    scalar = np.ndim(x) == 0
    vals = (mix.p[:, None] * component_pdfs(mix, np.atleast_1d(x))).sum(axis=0)
    return float(vals[0]) if scalar else vals


def cost_j(mix: Mixture, hist: "NormalizedHistogram", cfg: CostConfig | None = None) -> float:
    """Mean squared histogram error plus ``omega * |sum(P) - 1|``."""
    cfg = cfg or CostConfig()
    x = cfg.domain
    resid = mixture_pdf(mix, x) - np.asarray(hist.bins)[x]
    return float(np.mean(resid * resid) + cfg.omega * abs(mix.p.sum() - 1.0))


def thresholds(mix: Mixture) -> list[int]:
    """Integer class boundaries between adjacent components (ascending mean order).

    ``T_i`` is the first integer in ``(mu_i, mu_{i+1}]`` where the upper
    component's weighted density reaches the lower one's; when the lower
    component dominates the whole interval the rounded midpoint is used.
    """
    if mix.k < 2:
        raise ValueError("thresholds need at least two components")
    srt = mix.sorted_by_mu()
    mu, sd, p = srt.mu, srt.sigma, srt.p
    if np.any(np.diff(mu) <= 1e-9):
        raise ValueError(f"duplicate component means {mu.tolist()}: class order is ambiguous")
    out = []
    for i in range(mix.k - 1):
        lo = math.floor(mu[i]) + 1
        hi = math.floor(mu[i + 1])
        t = None
        if hi >= lo:
            xs = np.arange(lo, hi + 1, dtype=float)
            lower = p[i] * np.exp(-((xs - mu[i]) ** 2) / (2 * sd[i] ** 2)) / sd[i]
            upper = p[i + 1] * np.exp(-((xs - mu[i + 1]) ** 2) / (2 * sd[i + 1] ** 2)) / sd[i + 1]
            hit = np.nonzero(upper >= lower)[0]
            if hit.size:
                t = int(xs[hit[0]])
        if t is None:
            t = int(math.floor((mu[i] + mu[i + 1]) / 2 + 0.5))
        out.append(t)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError(f"thresholds {out} are not strictly ascending (components too close)")
    return out


def classify(mix: Mixture, x) -> int:
    """Class index of gray level ``x``: number of thresholds ``<= x``."""
    return int(np.searchsorted(thresholds(mix), x, side="right"))


def _components_list(mix: Mixture) -> list[dict]:
    return [{"p": c.p, "mu": c.mu, "sigma": c.sigma} for c in mix.components]


def mixture_to_dict(mix: Mixture, with_thresholds: bool = True) -> dict:
    d = {"components": _components_list(mix), "sorted_by_mu": _components_list(mix.sorted_by_mu())}
    if with_thresholds and mix.k >= 2:
        try:
            d["thresholds"] = thresholds(mix)
        except ValueError:
            d["thresholds"] = None
    return d


def mixture_from_dict(d: dict) -> Mixture:
    comps = d["components"] if isinstance(d, dict) else d
    return Mixture(tuple(GaussianComponent(float(c["p"]), float(c["mu"]), float(c["sigma"])) for c in comps))


def load_mixture_json(path) -> Mixture:
    with open(path) as fh:
        return mixture_from_dict(json.load(fh))


def parse_components(spec: str) -> Mixture:
    """Parse ``"p,mu,sigma;p,mu,sigma;..."``."""
    comps: list[GaussianComponent] = []
    for chunk in (s.strip() for s in spec.split(";")):
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 3:
            raise ValueError(f"component {chunk!r} must be 'p,mu,sigma'")
        try:
            p, mu, sd = (float(v) for v in parts)
        except ValueError:
            raise ValueError(f"component {chunk!r} has a non-numeric field") from None
        comps.append(GaussianComponent(p, mu, sd))
    if not comps:
        raise ValueError("empty component list")
    return Mixture(tuple(comps))
