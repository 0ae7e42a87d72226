"""Smooth transitions, per-ball cutoffs, and the glued cutoff chi.

The transition is a degree-7 smoothstep (C^3 at both ends).  Ball cutoffs
compose it with the scaled 1D distance surrogate f = sqrt(K) d + rbar/4,
giving phi = 1 on B(r/4), support inside B(r) and |d^m phi| <= C K^{m/2}.
chi is the ratio of inner to inner-plus-boundary cutoff sums.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import RadiusTooSmall, SeparationViolation

# Measured bound for |psi'|+|psi''|+|psi'''| of the degree-7 smoothstep on a
# width-1/12 transition.  Any C^3 transition of width h has max|f'''| >=
# 32/h^3 (bang-bang), i.e. >= 55296 here, so budgets below ~1e5 are
# unattainable; the glued-cutoff arguments only need some fixed constant.
TRANSITION_BUDGET = 1.0e5


def _smoothstep7(u):
    return u ** 4 * (35.0 - 84.0 * u + 70.0 * u ** 2 - 20.0 * u ** 3)


def _smoothstep7_d(u, m):
    if m == 1:
        return 140.0 * u ** 3 - 420.0 * u ** 4 + 420.0 * u ** 5 - 140.0 * u ** 6
    if m == 2:
        return 420.0 * u ** 2 - 1680.0 * u ** 3 + 2100.0 * u ** 4 - 840.0 * u ** 5
    if m == 3:
        return 840.0 * u - 5040.0 * u ** 2 + 8400.0 * u ** 3 - 4200.0 * u ** 4
    raise ValueError(m)


@dataclass(frozen=True)
class SmoothTransition:
    """C^3 profile: 1 on (-inf, a], 0 on [b, inf), monotone in between."""

    a: float
    b: float
    bounds: tuple = field(default=None)

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")
        if self.bounds is None:
            w = self.b - self.a
            u = np.linspace(0.0, 1.0, 20001)
            d = tuple(float(np.max(np.abs(_smoothstep7_d(u, m))) / w ** m)
                      for m in (1, 2, 3))
            object.__setattr__(self, "bounds", d)

    def __call__(self, s):
        u = np.clip((np.asarray(s, dtype=float) - self.a) / (self.b - self.a),
                    0.0, 1.0)
        return 1.0 - _smoothstep7(u)

    def deriv(self, s, m):
        s = np.asarray(s, dtype=float)
        u = (s - self.a) / (self.b - self.a)
        inside = (u > 0.0) & (u < 1.0)
        out = np.zeros_like(s)
        out[inside] = -_smoothstep7_d(u[inside], m) / (self.b - self.a) ** m
        return out


def smooth_transition(a, b):
    """Transition profile with measured derivative bounds (D1, D2, D3)."""
    return SmoothTransition(a=float(a), b=float(b))


@dataclass(frozen=True)
class Cutoff:
    """Grid-sampled cutoff with signed arclength-derivative samples."""

    s: np.ndarray
    chi: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    support: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("s", "chi", "d1", "d2", "d3"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def chi2(self):
        return self.chi * self.chi

    def derivative_bound_samples(self):
        return (float(np.max(np.abs(self.d1))), float(np.max(np.abs(self.d2))),
                float(np.max(np.abs(self.d3))))


def constant_cutoff(s, value=1.0):
    z = np.zeros_like(np.asarray(s, dtype=float))
    v = np.full_like(z, float(value))
    sup = (float(s[0]), float(s[-1])) if value > 0 else (0.0, 0.0)
    return Cutoff(s=s, chi=v, d1=z, d2=z, d3=z, support=sup,
                  meta={"kind": "constant"})


_BALL_TRANSITION = smooth_transition(0.25, 1.0 / 3.0)


def ball_cutoff(center, r, K, s, rbar=1.0):
    """Cutoff equal to 1 on B(center, r/4), supported inside B(center, r).

    phi = psi_hat((sqrt(K) d + rbar/4) / (sqrt(K) r + rbar)); derivative
    samples are exact chain-rule values, bounded by C K^{m/2}.
    """
    if r < rbar / np.sqrt(K):
        raise RadiusTooSmall(f"r = {r:g} < rbar/sqrt(K) = {rbar / np.sqrt(K):g}")
    s = np.asarray(s, dtype=float)
    rk = np.sqrt(K)
    scale = rk / (rk * r + rbar)
    d = np.abs(s - center)
    u = (rk * d + rbar / 4.0) / (rk * r + rbar)
    tr = _BALL_TRANSITION
    chi = tr(u)
    sign = np.sign(s - center)
    d1 = tr.deriv(u, 1) * scale * sign
    d2 = tr.deriv(u, 2) * scale ** 2
    d3 = tr.deriv(u, 3) * scale ** 3 * sign
    nz = np.nonzero(chi > 0.0)[0]
    support = ((float(s[nz[0]]), float(s[nz[-1]])) if nz.size
               else (float(center), float(center)))
    measured = tuple(tr.bounds[m - 1] * scale ** m for m in (1, 2, 3))
    return Cutoff(s=s, chi=chi, d1=d1, d2=d2, d3=d3, support=support,
                  meta={"kind": "ball", "center": float(center), "r": float(r),
                        "K": float(K), "rbar": float(rbar),
                        "deriv_bounds": measured})


def _intervals_intersect(a, b):
    return a[0] <= b[1] and b[0] <= a[1]


def build_chi(cover, omega, omega_hat, s=None):
    """Glued cutoff chi = (sum of inner ball cutoffs) / (sum of inner+boundary).

    Inner balls are those whose enlarged ball meets omega; their enlarged
    balls must sit inside omega_hat.  Boundary balls meet omega_hat but
    their enlarged balls miss omega.  chi is 1 on omega, supported in
    omega_hat, with |d^k chi| <= C(n, I, Gamma) K_i^{k/2} on each enlarged
    ball; the measured constant is reported in meta.
    """
    if s is None:
        s = cover.grid
    if s is None:
        raise SeparationViolation("no grid available to sample chi on")
    s = np.asarray(s, dtype=float)
    omega = (float(omega[0]), float(omega[1]))
    omega_hat = (float(omega_hat[0]), float(omega_hat[1]))
    if not (omega_hat[0] <= omega[0] and omega[1] <= omega_hat[1]):
        raise SeparationViolation("omega must sit inside omega_hat")

    inner, outer = [], []
    for b in cover.balls:
        hat = (b.center - 16.0 * b.r, b.center + 16.0 * b.r)
        ball = (b.center - b.r, b.center + b.r)
        if _intervals_intersect(hat, omega):
            if not (omega_hat[0] <= max(hat[0], cover.domain[0])
                    and min(hat[1], cover.domain[1]) <= omega_hat[1]):
                raise SeparationViolation(
                    f"enlarged ball at {b.center:g} meets omega but leaves "
                    f"omega_hat [{omega_hat[0]:g}, {omega_hat[1]:g}]")
            inner.append(b)
        elif _intervals_intersect(ball, omega_hat):
            outer.append(b)
    if not inner:
        raise SeparationViolation("no inner balls meet omega")

    def covered(lo, hi, balls):
        pts = s[(s >= lo) & (s <= hi)]
        if pts.size == 0:
            return True
        ok = np.zeros(pts.shape, dtype=bool)
        for b in balls:
            ok |= np.abs(pts - b.center) <= b.r
        return bool(np.all(ok))

    if not covered(*omega, inner):
        raise SeparationViolation("inner balls do not cover omega")

    def cutoff_sum(balls):
        tot = [np.zeros_like(s) for _ in range(4)]
        for b in balls:
            c = ball_cutoff(b.center, 16.0 * b.r, b.K, s, rbar=cover.rbar)
            tot[0] += c.chi
            tot[1] += c.d1
            tot[2] += c.d2
            tot[3] += c.d3
        return tot

    N, N1, N2, N3 = cutoff_sum(inner)
    O, O1, O2, O3 = cutoff_sum(outer)

    active = N > 0.0
    min_denominator = float(np.min((N + O)[active])) if np.any(active) else 1.0

    # Valid configurations have denominator >= 1 on the numerator support;
    # the clamp only acts in degenerate covers (e.g. a single ball, where
    # it reduces chi to that ball's cutoff).
    D = np.maximum(N + O, 1.0)
    clamped = (N + O) < 1.0
    D1 = np.where(clamped, 0.0, N1 + O1)
    D2 = np.where(clamped, 0.0, N2 + O2)
    D3 = np.where(clamped, 0.0, N3 + O3)

    chi = np.zeros_like(s)
    c1 = np.zeros_like(s)
    c2 = np.zeros_like(s)
    c3 = np.zeros_like(s)
    # where no boundary cutoff reaches, chi is identically 1 or equals N
    flat = active & (O == 0.0) & ~clamped
    chi[flat] = 1.0
    a = active & ~flat
    iD = 1.0 / D[a]
    # derivatives of 1/D
    g1 = -D1[a] * iD ** 2
    g2 = (2.0 * D1[a] ** 2 - D[a] * D2[a]) * iD ** 3
    g3 = (-6.0 * D1[a] ** 3 + 6.0 * D[a] * D1[a] * D2[a]
          - D[a] ** 2 * D3[a]) * iD ** 4
    chi[a] = N[a] / D[a]
    c1[a] = N1[a] * iD + N[a] * g1
    c2[a] = N2[a] * iD + 2.0 * N1[a] * g1 + N[a] * g2
    c3[a] = N3[a] * iD + 3.0 * N2[a] * g1 + 3.0 * N1[a] * g2 + N[a] * g3
    chi = np.clip(chi, 0.0, 1.0)

    nz = np.nonzero(chi > 0.0)[0]
    support = ((float(s[nz[0]]), float(s[nz[-1]])) if nz.size
               else (omega[0], omega[0]))

    # measured C with |d^k chi| <= C K_i^{k/2} over each enlarged ball
    measured_c = 0.0
    for b in cover.balls:
        mask = np.abs(s - b.center) <= 16.0 * b.r
        if not np.any(mask):
            continue
        for k, arr in ((1, c1), (2, c2), (3, c3)):
            bound = float(np.max(np.abs(arr[mask]))) / b.K ** (k / 2.0)
            measured_c = max(measured_c, bound)
    return Cutoff(s=s, chi=chi, d1=c1, d2=c2, d3=c3, support=support,
                  meta={"kind": "glued", "omega": omega, "omega_hat": omega_hat,
                        "inner_count": len(inner), "outer_count": len(outer),
                        "min_denominator": min_denominator,
                        "chi_bound_constant": measured_c})


def save_cutoff_csv(cutoff, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "chi", "d1", "d2", "d3"])
        for j in range(cutoff.s.size):
            w.writerow([j, f"{cutoff.chi[j]:.12g}", f"{cutoff.d1[j]:.12g}",
                        f"{cutoff.d2[j]:.12g}", f"{cutoff.d3[j]:.12g}"])
