"""Reference fitters for the same histogram problem: binned EM and Levenberg-Marquardt."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gmm import DEFAULT_OMEGA, SQRT_2PI, CostConfig, Mixture, cost_j
from .histogram import NormalizedHistogram
from .segmenter import FitReport, mixture_to_action, safe_thresholds

__all__ = [
    "EmConfig",
    "LmConfig",
    "COLLAPSE_PRIOR",
    "default_init",
    "fit_em",
    "fit_lm",
    "lm_residuals",
    "lm_jacobian",
    "random_init",
]

COLLAPSE_PRIOR = 1e-12
_LOG_SQRT_2PI = math.log(SQRT_2PI)


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 2000
    tol: float = 1e-9
    sigma_floor: float = 1e-2
    init: Mixture | None = None
    omega: float = DEFAULT_OMEGA  # only for scoring the result

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be > 0")


@dataclass(frozen=True)
class LmConfig:
    max_iter: int = 2000
    damping_init: float = 1e-3
    damping_factor: float = 10.0
    step_tol: float = 1e-10
    omega: float = DEFAULT_OMEGA
    init: Mixture | None = None
    bounds_p: tuple[float, float] | None = None  # default (0, 0.5), or (0, 1) for one class
    bounds_sigma: tuple[float, float] = (0.5, 128.0)
    bounds_mu: tuple[float, float] = (0.0, 255.0)
    damping_max: float = 1e12

    def __post_init__(self):
        if not self.damping_init > 0:
            raise ValueError("damping_init must be > 0")
        if not self.damping_factor > 1:
            raise ValueError("damping_factor must be > 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def default_init(hist: NormalizedHistogram, k: int) -> Mixture:
    """Means at the (i + 0.5)/K quantiles of the histogram, equal priors, sigma = 64/K."""
    cdf = np.cumsum(hist.bins)
    qs = (np.arange(k) + 0.5) / k
    mu = np.searchsorted(cdf, qs, side="left").astype(float)
    mu = np.minimum(mu, 255.0)
    # keep means distinct so the classes stay ordered
    for i in range(1, k):
        if mu[i] <= mu[i - 1]:
            mu[i] = mu[i - 1] + 1.0
    return Mixture.from_arrays(np.full(k, 1.0 / k), mu, np.full(k, 128.0 / (2 * k)))


def _log_weighted(p, mu, sd, g):
    """``log(P_i) + log N(g; mu_i, sd_i)``, shape (K, G); -inf where P_i == 0."""
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    z = (g[None, :] - mu[:, None]) / sd[:, None]
    return logp[:, None] - 0.5 * z * z - np.log(sd)[:, None] - _LOG_SQRT_2PI


def _logsumexp0(a):
    m = a.max(axis=0)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return m_safe + np.log(np.exp(a - m_safe).sum(axis=0))


def fit_em(hist: NormalizedHistogram, k: int, cfg: EmConfig | None = None) -> FitReport:
    """Expectation-maximization on the binned gray levels, weighted by ``h(g)``.

    The trace holds the penalized histogram cost of each iterate; the weighted
    log-likelihood ``sum_g h(g) log p(g)`` of the initial state and every
    iterate goes to ``report.loglik``.
    """
    cfg = cfg or EmConfig()
    init = cfg.init if cfg.init is not None else default_init(hist, k)
    source = "user" if cfg.init is not None else "quantile"
    if init.k != k:
        raise ValueError(f"initial mixture has {init.k} components, expected {k}")
    g = np.arange(hist.bins.size, dtype=float)
    h = np.asarray(hist.bins)
    occupied = h > 0
    hg, gg = h[occupied], g[occupied]
    p = init.p.copy()
    mu = init.mu.copy()
    sd = np.maximum(init.sigma, cfg.sigma_floor)
    costcfg = CostConfig(omega=cfg.omega)
    frozen = np.zeros(k, dtype=bool)

    def loglik():
        return float(np.dot(hg, _logsumexp0(_log_weighted(p, mu, sd, gg))))

    lls = [loglik()]
    costs = []
    flags = []
    it = 0
    for it in range(1, cfg.max_iter + 1):
        lw = _log_weighted(p, mu, sd, gg)
        resp = np.exp(lw - _logsumexp0(lw)[None, :])
        w = resp * hg[None, :]
        p_new = w.sum(axis=1)
        newly = (p_new < COLLAPSE_PRIOR) & ~frozen
        if newly.any():
            frozen |= newly
            flags.append(f"component collapse at iteration {it}: {np.nonzero(newly)[0].tolist()}")
        live = ~frozen
        mu_new = mu.copy()
        var_new = sd * sd
        mu_new[live] = (w[live] @ gg) / p_new[live]
        dev = gg[None, :] - mu_new[live][:, None]
        var_new[live] = (w[live] * dev * dev).sum(axis=1) / p_new[live]
        p, mu = p_new, mu_new
        sd = np.sqrt(np.maximum(var_new, cfg.sigma_floor**2))
        lls.append(loglik())
        costs.append(cost_j(Mixture.from_arrays(p, mu, sd), hist, costcfg))
        if abs(lls[-1] - lls[-2]) < cfg.tol:
            break

    mix = Mixture.from_arrays(p, mu, sd)
    final = cost_j(mix, hist, costcfg)
    thr, problem = safe_thresholds(mix) if k >= 2 else (None, None)
    if problem:
        flags.append(problem)
    costs_arr = np.array(costs)
    trace = np.column_stack([costs_arr, np.minimum.accumulate(costs_arr)])
    return FitReport(
        method="em",
        mixture=mix,
        final_J=final,
        iterations_run=it,
        iterations_to_converge=it,
        trace=trace,
        thresholds=thr,
        flags=flags,
        init=init,
        init_source=source,
        loglik=np.array(lls),
        config={"max_iter": cfg.max_iter, "tol": cfg.tol, "sigma_floor": cfg.sigma_floor, "omega": cfg.omega},
    )


def _lm_bounds(cfg: LmConfig, k: int):
    bp = cfg.bounds_p if cfg.bounds_p is not None else ((0.0, 1.0) if k == 1 else (0.0, 0.5))
    lo = np.array([bp[0], cfg.bounds_sigma[0], cfg.bounds_mu[0]] * k)
    hi = np.array([bp[1], cfg.bounds_sigma[1], cfg.bounds_mu[1]] * k)
    return lo, hi


def lm_residuals(theta: np.ndarray, h: np.ndarray, omega: float) -> np.ndarray:
    """Residuals ``(p(x_j) - h_j)/sqrt(n)`` for every gray level plus ``sqrt(omega)(sum P - 1)``."""
    p, sd, mu = theta[0::3], theta[1::3], theta[2::3]
    x = np.arange(h.size, dtype=float)
    d = x[None, :] - mu[:, None]
    pdf = ((p / (SQRT_2PI * sd))[:, None] * np.exp(-d * d / (2.0 * sd[:, None] ** 2))).sum(axis=0)
    r = np.empty(h.size + 1)
    r[:-1] = (pdf - h) / math.sqrt(h.size)
    r[-1] = math.sqrt(omega) * (p.sum() - 1.0)
    return r


def lm_jacobian(theta: np.ndarray, n: int, omega: float) -> np.ndarray:
    """Analytic derivative of :func:`lm_residuals`, shape ``(n + 1, 3K)``."""
    p, sd, mu = theta[0::3], theta[1::3], theta[2::3]
    x = np.arange(n, dtype=float)
    d = x[None, :] - mu[:, None]
    comp = np.exp(-d * d / (2.0 * sd[:, None] ** 2)) / (SQRT_2PI * sd[:, None])
    weighted = p[:, None] * comp
    jac = np.zeros((n + 1, theta.size))
    s = math.sqrt(n)
    jac[:-1, 0::3] = comp.T / s
    jac[:-1, 1::3] = (weighted * (d * d / sd[:, None] ** 3 - 1.0 / sd[:, None])).T / s
    jac[:-1, 2::3] = (weighted * d / sd[:, None] ** 2).T / s
    jac[-1, 0::3] = math.sqrt(omega)
    return jac


def fit_lm(hist: NormalizedHistogram, k: int, cfg: LmConfig | None = None) -> FitReport:
    """Damped Gauss-Newton (Marquardt scaling) on the squared-penalty surrogate.

    Steps are clipped to the parameter box; a step is kept only if the
    surrogate decreases. ``report.surrogate`` lists the surrogate value after
    the start and each accepted step.
    """
    cfg = cfg or LmConfig()
    h = np.asarray(hist.bins, dtype=float)
    n = h.size
    if cfg.init is not None:
        init, source = cfg.init, "user"
    else:
        init, source = default_init(hist, k), "quantile"
    if init.k != k:
        raise ValueError(f"initial mixture has {init.k} components, expected {k}")
    lo, hi = _lm_bounds(cfg, k)
    theta = np.clip(mixture_to_action(init), lo, hi)
    r = lm_residuals(theta, h, cfg.omega)
    s_cur = float(r @ r)
    lam = cfg.damping_init
    accepted = [s_cur]
    costs = []
    flags = []
    costcfg = CostConfig(omega=cfg.omega)

    def as_mix(t):
        return Mixture.from_arrays(t[0::3], t[2::3], t[1::3])

    it = 0
    jac = lm_jacobian(theta, n, cfg.omega)
    for it in range(1, cfg.max_iter + 1):
        a = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(a).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))
        try:
            step = np.linalg.solve(a + lam * np.diag(diag), -grad)
        except np.linalg.LinAlgError:
            step = None
        done = False
        if step is not None and np.all(np.isfinite(step)):
            trial = np.clip(theta + step, lo, hi)
            moved = float(np.linalg.norm(trial - theta))
            if moved <= cfg.step_tol * (float(np.linalg.norm(theta)) + cfg.step_tol):
                done = True
            else:
                r_trial = lm_residuals(trial, h, cfg.omega)
                s_trial = float(r_trial @ r_trial)
                if s_trial < s_cur:
                    theta, r, s_cur = trial, r_trial, s_trial
                    jac = lm_jacobian(theta, n, cfg.omega)
                    accepted.append(s_cur)
                    lam /= cfg.damping_factor
                else:
                    lam *= cfg.damping_factor
        else:
            lam *= cfg.damping_factor
        costs.append(cost_j(as_mix(theta), hist, costcfg))
        if done:
            break
        if lam > cfg.damping_max:
            flags.append(f"stalled: damping exceeded {cfg.damping_max:g} at iteration {it}")
            break

    mix = as_mix(theta)
    final = cost_j(mix, hist, costcfg)
    thr, problem = safe_thresholds(mix) if k >= 2 else (None, None)
    if problem:
        flags.append(problem)
    costs_arr = np.array(costs)
    return FitReport(
        method="lm",
        mixture=mix,
        final_J=final,
        iterations_run=it,
        iterations_to_converge=it,
        trace=np.column_stack([costs_arr, np.minimum.accumulate(costs_arr)]),
        thresholds=thr,
        flags=flags,
        init=init,
        init_source=source,
        surrogate=np.array(accepted),
        config={
            "max_iter": cfg.max_iter,
            "damping_init": cfg.damping_init,
            "damping_factor": cfg.damping_factor,
            "step_tol": cfg.step_tol,
            "omega": cfg.omega,
        },
    )


def random_init(rng: np.random.Generator, k: int) -> Mixture:
    """Random starting mixture: sorted uniform means, spreads in [5, 30], priors near 1/K."""
    mu = np.sort(rng.uniform(0.0, 255.0, size=k))
    sd = rng.uniform(5.0, 30.0, size=k)
    w = rng.uniform(0.5, 1.5, size=k)
    return Mixture.from_arrays(w / w.sum(), mu, sd)
