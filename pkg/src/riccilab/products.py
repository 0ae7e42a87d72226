"""Products of Einstein factors: the exactly solvable ODE reduction.

A factor with Ric = lam * g and unit-scale curvature norm rm_norm flows by
c_k(t) = c_k(0) - 2 lam_k t; norms scale as 1/c_k.  Factors are specified
abstractly, no underlying manifold is constructed.
"""

import math
from dataclasses import dataclass

from .errors import Extinction, NonPositiveMetric


@dataclass(frozen=True)
class EinsteinFactor:
    dim: int
    lam: float
    rm_norm: float
    c0: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise NonPositiveMetric(f"factor dimension must be >= 1, got {self.dim}")
        if self.c0 <= 0:
            raise NonPositiveMetric("initial scale must be positive")
        if self.rm_norm < 0:
            raise NonPositiveMetric("rm_norm must be nonnegative")


@dataclass(frozen=True)
class EinsteinProductState:
    factors: tuple
    scales: tuple
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "scales", tuple(float(c) for c in self.scales))
        if len(self.scales) != len(self.factors):
            raise NonPositiveMetric("one scale per factor required")
        if any(c <= 0 for c in self.scales):
            raise NonPositiveMetric("all scales must be positive")

    @property
    def dim(self):
        return sum(f.dim for f in self.factors)


def extinction_time(factors):
    """min c_k(0) / (2 lam_k) over shrinking factors; inf if none shrink."""
    times = [f.c0 / (2.0 * f.lam) for f in factors if f.lam > 0]
    return min(times) if times else math.inf


def product_norms(factors, scales):
    rm2 = sum((f.rm_norm / c) ** 2 for f, c in zip(factors, scales))
    ric2 = sum(f.dim * (f.lam / c) ** 2 for f, c in zip(factors, scales))
    return math.sqrt(rm2), math.sqrt(ric2)


def einstein_product_state(factors, t):
    """Closed-form flow state at time t with its curvature norms.

    Returns (state, norm_rm, norm_ric); nabla Ric vanishes identically for
    Einstein products, so no derivative norms are reported.
    """
    factors = tuple(factors)
    scales = []
    for f in factors:
        c = f.c0 - 2.0 * f.lam * t
        if c <= 0.0:
            raise Extinction(
                f"factor extinct at t = {extinction_time(factors):.12g}",
                extinction_time(factors))
        scales.append(c)
    state = EinsteinProductState(factors=factors, scales=tuple(scales), time=t)
    norm_rm, norm_ric = product_norms(factors, scales)
    return state, norm_rm, norm_ric
