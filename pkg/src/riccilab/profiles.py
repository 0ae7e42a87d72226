"""Curvature profiles over a 1D arclength base, and the curvature scale rho.

A profile bundles samplers for |Rm|, |Ric|, |nabla Ric|, |nabla^2 Ric| as
functions of arclength.  Ball sups are evaluated by dense sampling at the
profile's resolution plus endpoints; no interval arithmetic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainTooSmall

QUANTITIES = ("rm", "ric", "dric", "d2ric")


@dataclass(frozen=True)
class CurvatureProfile:
    """Nonnegative curvature samplers on an interval (possibly unbounded).

    closed=True means the domain boundary is the edge of the space (ball
    sups clamp there); closed=False marks a truncated view of a larger
    space, where a ball escaping the domain is an error.
    """

    n: int
    domain: tuple
    samplers: dict
    resolution: float
    closed: bool = True
    grid: np.ndarray = field(default=None, repr=False)
    grid_vals: dict = field(default=None, repr=False)

    @staticmethod
    def from_callables(n, rm, ric=None, dric=None, d2ric=None,
                       domain=(-math.inf, math.inf), resolution=0.01,
                       closed=True):
        zero = lambda s: np.zeros_like(np.asarray(s, dtype=float))
        samplers = {"rm": rm or zero, "ric": ric or zero,
                    "dric": dric or zero, "d2ric": d2ric or zero}
        return CurvatureProfile(n=n, domain=(float(domain[0]), float(domain[1])),
                                samplers=samplers, resolution=resolution,
                                closed=closed)

    @staticmethod
    def from_state(state, field_data, closed=True):
        """Grid-backed profile from a warped state and its curvature field."""
        s = state.arclength()
        vals = {"rm": np.asarray(field_data.norm_rm),
                "ric": np.asarray(field_data.norm_ric),
                "dric": (np.zeros_like(s) if field_data.norm_d_ric is None
                         else np.asarray(field_data.norm_d_ric)),
                "d2ric": (np.zeros_like(s) if field_data.norm_d2_ric is None
                          else np.asarray(field_data.norm_d2_ric))}
        samplers = {k: (lambda q: (lambda t: np.interp(t, s, vals[q])))(k)
                    for k in QUANTITIES}
        return CurvatureProfile(n=state.n, domain=(float(s[0]), float(s[-1])),
                                samplers=samplers,
                                resolution=float(np.min(np.diff(s))),
                                closed=closed, grid=s, grid_vals=vals)

    def ball_escapes(self, center, radius):
        return center - radius < self.domain[0] or center + radius > self.domain[1]

    def ball_sup(self, quantity, center, radius):
        """sup of a sampler over B(center, radius) clamped to the domain."""
        lo = max(center - radius, self.domain[0])
        hi = min(center + radius, self.domain[1])
        if hi < lo:
            raise DomainTooSmall(f"ball [{lo}, {hi}] misses the domain")
        if self.grid is not None:
            s = self.grid
            v = self.grid_vals[quantity]
            i0 = int(np.searchsorted(s, lo, side="left"))
            i1 = int(np.searchsorted(s, hi, side="right"))
            best = float(np.max(v[i0:i1])) if i1 > i0 else -math.inf
            for endpoint in (lo, hi):
                best = max(best, float(np.interp(endpoint, s, v)))
            return best
        count = max(33, int(math.ceil((hi - lo) / self.resolution)) + 1)
        pts = np.linspace(lo, hi, count)
        return float(np.max(self.samplers[quantity](pts)))


def scale_predicate(profile, s, rho):
    """All three ball-sup conditions of the second-order curvature scale."""
    n = profile.n
    if profile.ball_sup("rm", s, rho) > rho ** -2:
        return False
    if profile.ball_sup("dric", s, rho) > (n - 1) * rho ** -3:
        return False
    if profile.ball_sup("d2ric", s, rho) > (n - 1) * rho ** -4:
        return False
    return True


def curvature_scale(profile, s, rho_max=1e6, rel_tol=1e-9):
    """Largest rho with sup_B|Rm| <= rho^-2 and sup_B|nabla^m Ric| <= (n-1) rho^-(2+m).

    Found by geometric expansion plus bisection on the monotone predicate,
    capped at rho_max for flat regions.
    """
    lo = min(1e-6, rho_max)
    if not scale_predicate(profile, s, lo):
        # extreme curvature at the point itself; bisect down from lo
        hi = lo
        lo = 1e-300
    else:
        hi = lo
        while True:
            nxt = min(2.0 * hi, rho_max)
            if not profile.closed and profile.ball_escapes(s, nxt):
                if scale_predicate(profile, s,
                                   min(nxt, _domain_radius(profile, s))):
                    raise DomainTooSmall(
                        f"rho-ball at s={s:g} exits the domain before the "
                        "predicate fails")
            if scale_predicate(profile, s, nxt):
                hi = nxt
                if hi >= rho_max:
                    return rho_max
            else:
                lo = hi
                hi = nxt
                break
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if scale_predicate(profile, s, mid):
            lo = mid
        else:
            hi = mid
    return lo


def _domain_radius(profile, s):
    return max(min(s - profile.domain[0], profile.domain[1] - s), 0.0)


def measure_gamma(profile, samples=200, rho_max=1e6):
    """max |rho_x^-2 - rho_y^-2| over sampled pairs with d(x,y) < rho_x + rho_y."""
    lo, hi = profile.domain
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainTooSmall("gamma measurement needs a finite domain")
    pts = np.linspace(lo, hi, samples)
    rhos = np.array([curvature_scale(profile, float(s), rho_max=rho_max)
                     for s in pts])
    inv2 = rhos ** -2.0
    gamma = 0.0
    for i in range(samples):
        for j in range(i + 1, samples):
            if abs(pts[j] - pts[i]) < rhos[i] + rhos[j]:
                gamma = max(gamma, abs(inv2[i] - inv2[j]))
    return gamma
