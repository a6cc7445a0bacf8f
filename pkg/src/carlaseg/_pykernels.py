"""Numpy implementations of the optimizer's hot loops.

Same signatures and arithmetic order as the compiled ``_ckernels`` module; used
when the extension is unavailable or ``CARLASEG_PURE_PYTHON`` is set.
"""

import numpy as np

SQRT_2PI = 2.5066282746310002


def cumulative(f, dx):
    """Trapezoid running integral of grid samples ``f``; ``c[0] == 0``."""
    c = np.empty(f.shape[0])
    c[0] = 0.0
    np.cumsum(0.5 * (f[:-1] + f[1:]) * dx, out=c[1:])
    return c


def invert_cdf(f, lo, dx, z):
    c = cumulative(f, dx)
    d = f.shape[0] - 1
    target = z * c[d]
    i = int(np.searchsorted(c, target, side="right")) - 1
    if i < 0:
        i = 0
    elif i > d - 1:
        i = d - 1
    width = c[i + 1] - c[i]
    frac = (target - c[i]) / width if width > 0.0 else 0.0
    x = lo + (i + frac) * dx
    hi = lo + d * dx
    if x > hi:
        x = hi
    elif x < lo:
        x = lo
    return x


def reinforce(f, lo, dx, r, scale, sigma):
    """In place: ``f += scale * exp(-(x-r)^2 / 2 sigma^2)``, then rescale to unit area."""
    if scale == 0.0:
        return
    d = (lo + np.arange(f.shape[0]) * dx) - r
    f += scale * np.exp(-(d * d) / (2.0 * sigma * sigma))
    area = cumulative(f, dx)[-1]
    f *= 1.0 / area


def select_team(F, lo, dx, z):
    out = np.empty(F.shape[0])
    for k in range(F.shape[0]):
        out[k] = invert_cdf(F[k], lo[k], dx[k], z[k])
    return out


def reinforce_team(F, lo, dx, actions, scale, sigma):
    for k in range(F.shape[0]):
        reinforce(F[k], lo[k], dx[k], actions[k], scale[k], sigma[k])


def mixture_cost(p, mu, sigma, h, x, omega):
    """Mean squared error of the mixture density against ``h[x]`` plus the prior-sum penalty."""
    xs = x.astype(float)[None, :]
    d = xs - mu[:, None]
    coef = p / (SQRT_2PI * sigma)
    pdf = (coef[:, None] * np.exp(-(d * d) / (2.0 * sigma[:, None] * sigma[:, None]))).sum(axis=0)
    r = pdf - h[x]
    return float(np.sum(r * r) / x.shape[0] + omega * abs(p.sum() - 1.0))
