"""Power-law kernel, edge-probability law, and the smoothed sup-norm.

Everything downstream (sampling, observables, analytic checks) goes through
this module, so the conventions are fixed here once: distances are measured
in the l-infinity norm, the kernel is the exact power law
J(x, y) = A * ||x - y||^(-d-alpha), and an edge between distinct x, y is open
with probability 1 - exp(-beta * J(x, y)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelSpec",
    "smoothed_norm",
    "sup_norm",
    "kernel_value",
    "edge_probability",
    "edge_probability_at_distance",
]

# Below this, 1 - exp(-t) loses all significant digits; use t itself.
_TINY_RATE = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Model parameters: dimension, decay exponent, amplitude, truncation.

    ``truncation`` is an optional maximum l-infinity edge length; edges longer
    than it get probability zero (finite-range surgery used to study the
    long-edge contribution, not needed for ordinary runs).
    """

    d: int
    alpha: float
    amplitude: float = 1.0
    truncation: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.d <= 3:
            raise ValueError(f"dimension must be in 1..3, got {self.d}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.truncation is not None and self.truncation < 1:
            raise ValueError(f"truncation must be >= 1 or None, got {self.truncation}")

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "alpha": self.alpha,
            "amplitude": self.amplitude,
            "truncation": self.truncation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        return cls(
            d=int(data["d"]),
            alpha=float(data["alpha"]),
            amplitude=float(data.get("amplitude", 1.0)),
            truncation=None if data.get("truncation") in (None, "none") else int(data["truncation"]),
        )


def sup_norm(x) -> np.ndarray:
    """l-infinity norm of a lattice vector or an (..., d) array of them."""
    x = np.asarray(x)
    if x.ndim == 0:
        return np.abs(x)
    return np.max(np.abs(x), axis=-1)


def smoothed_norm(x) -> np.ndarray:
    """max{2, ||x||_inf}; bounded away from zero so negative powers are safe."""
    return np.maximum(2, sup_norm(x))


def kernel_value(spec: KernelSpec, x, y) -> np.ndarray:
    """J(x, y) = A * ||x - y||_inf^(-d-alpha), and 0 on the diagonal."""
    r = sup_norm(np.asarray(x) - np.asarray(y))
    with np.errstate(divide="ignore"):
        val = spec.amplitude * np.where(r > 0, r, 1).astype(float) ** (-spec.d - spec.alpha)
    return np.where(r > 0, val, 0.0)


def _prob_from_rate(rate: np.ndarray) -> np.ndarray:
    # -expm1 is accurate everywhere, but for rates under ~1e-12 the linear
    # term is exact to double precision and avoids any cancellation concern.
    return np.where(rate < _TINY_RATE, rate, -np.expm1(-rate))


def edge_probability(spec: KernelSpec, beta: float, x, y) -> np.ndarray:
    """P(edge {x,y} open) = 1 - exp(-beta * J(x,y)), zero beyond truncation."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    p = _prob_from_rate(beta * kernel_value(spec, x, y))
    if spec.truncation is not None:
        r = sup_norm(np.asarray(x) - np.asarray(y))
        p = np.where(r > spec.truncation, 0.0, p)
    return p


def edge_probability_at_distance(spec: KernelSpec, beta: float, r) -> np.ndarray:
    """Vectorized edge probability as a function of l-infinity distance r >= 1."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    r = np.asarray(r, dtype=float)
    rate = beta * spec.amplitude * r ** (-spec.d - spec.alpha)
    p = _prob_from_rate(rate)
    if spec.truncation is not None:
        p = np.where(r > spec.truncation, 0.0, p)
    return p
