"""Deterministic numerical checks of the two convolution estimates.

These are intentionally dumb direct summations / enumerations: they exist to
verify inequalities independently of any sampling, so clarity beats speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import smoothed_norm

__all__ = [
    "ConvolutionCheckResult",
    "threshold_convolution_sum",
    "threshold_ratio_grid",
    "box_exit_fraction",
    "box_exit_sweep",
]


@dataclass(frozen=True)
class ConvolutionCheckResult:
    parameters: dict
    value: float
    normalized_ratio: float
    grid: list = field(default_factory=list)


def _box_points(center: np.ndarray, radius: int, d: int) -> np.ndarray:
    axes = [np.arange(c - radius, c + radius + 1, dtype=np.int64) for c in center]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def threshold_convolution_sum(d: int, alpha: float, R: float, x) -> float:
    """Direct double sum of the thresholded three-kernel convolution.

    Sums <a>^(-d-a) <a-b>^(-d-a) <b-x>^(-d-a) min{1, <a>/R} min{1, <x-b>/R}
    over ||a|| <= ||x||/4 and ||b - x|| <= ||x||/4 (a = 0 included; the
    smoothed norm keeps it finite).
    """
    if not alpha < 1:
        raise ValueError(f"requires alpha < 1, got {alpha}")
    if R < 1:
        raise ValueError(f"requires R >= 1, got {R}")
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    norm_x = int(np.max(np.abs(x)))
    if norm_x < R:
        raise ValueError(f"requires ||x|| >= R, got ||x||={norm_x}, R={R}")
    K = norm_x // 4
    ex = -(d + alpha)
    a = _box_points(np.zeros(d, dtype=np.int64), K, d)
    b = _box_points(x, K, d)
    fa = smoothed_norm(a) ** ex * np.minimum(1.0, smoothed_norm(a) / R)
    gb = smoothed_norm(b - x) ** ex * np.minimum(1.0, smoothed_norm(x - b) / R)
    total = 0.0
    chunk = max(1, 20_000_000 // max(len(b), 1))
    for lo in range(0, len(a), chunk):
        mid = smoothed_norm(a[lo:lo + chunk, None, :] - b[None, :, :]) ** ex
        total += float(np.einsum("i,ij,j->", fa[lo:lo + chunk], mid, gb))
    return total


def threshold_ratio_grid(d: int, alpha: float, R_values, x_multipliers) -> list[ConvolutionCheckResult]:
    """Sweep (R, ||x||) and report sum * R^(2 alpha) * <x>^(d + alpha)."""
    results = []
    for R in R_values:
        for mult in x_multipliers:
            x = np.zeros(d, dtype=np.int64)
            x[0] = int(mult * R)
            value = threshold_convolution_sum(d, alpha, R, x)
            ratio = value * R ** (2 * alpha) * float(smoothed_norm(x)) ** (d + alpha)
            results.append(ConvolutionCheckResult(
                parameters={"d": d, "alpha": alpha, "R": R, "x_norm": int(x[0])},
                value=value,
                normalized_ratio=ratio,
            ))
    return results


def box_exit_fraction(k: int, u, v) -> float:
    """Fraction of centres z in the dyadic box 2^(k-3) whose box of radius
    2^(k-2) contains u but not v, by exhaustive enumeration over z."""
    if k < 3:
        raise ValueError(f"requires k >= 3, got {k}")
    u = np.atleast_1d(np.asarray(u, dtype=np.int64))
    v = np.atleast_1d(np.asarray(v, dtype=np.int64))
    d = len(u)
    z = _box_points(np.zeros(d, dtype=np.int64), 2 ** (k - 3), d)
    q = 2 ** (k - 2)
    u_in = np.max(np.abs(u[None, :] - z), axis=-1) <= q
    v_in = np.max(np.abs(v[None, :] - z), axis=-1) <= q
    return float(np.mean(u_in & ~v_in))


def box_exit_sweep(d: int, k: int, v_radius: int | None = None):
    """All (u, v) pairs with u in the box 2^(k-2): fraction and bound ratio.

    Returns (u, v, fraction, bound) arrays where bound = min{1, <u-v>/2^k};
    the empirical constant is max(fraction / bound).
    """
    if d != 1:
        raise ValueError("sweep currently enumerates d = 1 only")
    if v_radius is None:
        v_radius = 2**k
    us = np.arange(-(2 ** (k - 2)), 2 ** (k - 2) + 1, dtype=np.int64)
    vs = np.arange(-v_radius, v_radius + 1, dtype=np.int64)
    zs = np.arange(-(2 ** (k - 3)), 2 ** (k - 3) + 1, dtype=np.int64)
    q = 2 ** (k - 2)
    frac = np.zeros((len(us), len(vs)))
    for z in zs:
        u_in = np.abs(us - z) <= q
        v_in = np.abs(vs - z) <= q
        frac += u_in[:, None] & ~v_in[None, :]
    frac /= len(zs)
    gap = np.maximum(2, np.abs(us[:, None] - vs[None, :]))
    bound = np.minimum(1.0, gap / 2.0**k)
    return us, vs, frac, bound
