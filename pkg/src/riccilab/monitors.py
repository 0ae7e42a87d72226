"""Monitors: doubling times, lifespan bounds, barriers, residuals.

All monitors are read-only over trajectories.  The bound formulas carry
their implicit constants as configuration with conservative defaults; a
calibration helper reports the largest constant consistent with a set of
measured runs.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverMismatch, SnapshotsTooSparse
from .warped import arclength_derivative

LN2_HALF = 0.5 * math.log(2.0)


@dataclass(frozen=True)
class MonitorConstants:
    """Configurable stand-ins for the implicit constants in the bounds."""

    c_n: float = 1.0 / 16.0
    c_slow_scale: float = 1.0      # c(n, Gamma) = c_slow_scale * c_n / (1 + Gamma)
    C1: float = 1.0
    C7: float = 1.0

    @property
    def alpha(self):
        return min(math.log(4.0 / 3.0) / 6.0, 0.125)

    def c_slow(self, gamma):
        return self.c_slow_scale * self.c_n / (1.0 + gamma)


@dataclass(frozen=True)
class LifespanBounds:
    hamilton: float
    improved: float
    slow_growth: float
    constants: dict

    def to_dict(self):
        fmt = lambda v: None if v is None else float(v)
        return {"hamilton": fmt(self.hamilton), "improved": fmt(self.improved),
                "slow_growth": fmt(self.slow_growth), "constants": self.constants}


def theoretical_lifespan_bounds(n, K, A, cover=None, constants=None):
    """Hamilton, relative-smallness, and slow-growth lifespan lower bounds.

    A = inf marks the Ricci-flat case and makes the improved bound infinite.
    The slow-growth bound needs a cover (for Gamma, I and max K_i).
    """
    constants = constants or MonitorConstants()
    hamilton = constants.c_n / K
    improved = math.inf if math.isinf(A) else constants.c_n * max(A, 1.0 / K)
    slow = None
    if cover is not None:
        kmax = max(b.K for b in cover.balls)
        slow = (constants.c_slow(cover.Gamma) / cover.I
                * (max(A, 1.0 / kmax) if not math.isinf(A) else math.inf))
    used = {"c_n": constants.c_n, "c_slow_scale": constants.c_slow_scale,
            "C1": constants.C1, "C7": constants.C7, "alpha": constants.alpha}
    return LifespanBounds(hamilton=hamilton, improved=improved,
                          slow_growth=slow, constants=used)


def calibrate_c_n(measurements):
    """Largest c_n keeping the improved bound below every measured T_d.

    measurements: iterable of (measured_td, K, A).
    """
    best = math.inf
    for td, K, A in measurements:
        denom = max(A, 1.0 / K)
        if denom > 0 and math.isfinite(denom):
            best = min(best, td / denom)
    return best


def _interp_crossing(ts, vals, target):
    """First time a nondecreasing series reaches target, linearly interpolated."""
    idx = np.nonzero(vals >= target)[0]
    if idx.size == 0:
        return None
    k = int(idx[0])
    if k == 0:
        return float(ts[0])
    v0, v1 = vals[k - 1], vals[k]
    if v1 == v0:
        return float(ts[k])
    frac = (target - v0) / (v1 - v0)
    return float(ts[k - 1] + frac * (ts[k] - ts[k - 1]))


def doubling_time(traj, factor=2.0):
    """First time sup|Rm| reaches factor times its initial value, or None."""
    if traj.t_fine is None or traj.t_fine.size < 2:
        return None
    target = factor * traj.sup_rm[0]
    running = np.maximum.accumulate(traj.sup_rm)
    return _interp_crossing(traj.t_fine, running, target)


def generalized_doubling_time(traj, cover, chi=None):
    """Largest T within the horizon satisfying the four per-ball conditions.

    Returns (T, binding) where binding is (condition, ball_index) for the
    first condition to reach its cap, or None if none binds in the horizon.
    """
    traj.require_cover(cover)
    ts = traj.t_fine
    horizon = float(ts[-1])
    best_t = math.inf
    binding = None
    Ks = np.array([b.K for b in cover.balls])
    caps = [("rm_cap", traj.ball_sup_rm, 2.0 * (1.0 + cover.Gamma) * Ks),
            ("int_ric", traj.int_ric, np.full(Ks.shape, LN2_HALF)),
            ("int_dric", traj.int_dric, np.sqrt(Ks)),
            ("int_d2ric", traj.int_d2ric, Ks)]
    for name, series, bound in caps:
        if series is None:
            raise CoverMismatch("trajectory lacks per-ball bookkeeping")
        for i in range(series.shape[1]):
            t_cross = _interp_crossing(ts, series[:, i], bound[i])
            if t_cross is not None and t_cross < best_t:
                best_t = t_cross
                binding = (name, i)
    if best_t > horizon or not math.isfinite(best_t):
        return horizon, None
    return best_t, binding


def equivalence_factor_at(first_snap, snap, kind):
    """max over nodes of the eigen-ratio between g(t) and g(0)."""
    if kind == "einstein":
        r = np.array(snap.state.scales) / np.array(first_snap.state.scales)
        return float(np.max(np.maximum(r, 1.0 / r)))
    s0, s1 = first_snap.state, snap.state
    rphi = (s1.phi / s0.phi) ** 2
    best = float(np.max(np.maximum(rphi, 1.0 / rphi)))
    mask = np.ones(s0.psi.size, dtype=bool)
    for j in s0.pole_nodes:
        mask[j] = False
    rpsi = (s1.psi[mask] / s0.psi[mask]) ** 2
    best = max(best, float(np.max(np.maximum(rpsi, 1.0 / rpsi))))
    return best


def equivalence_factor(traj, threshold=2.0):
    """Sup over snapshots of the metric eigen-ratio, and the first time it
    exceeds the threshold (snapshot resolution)."""
    first = traj.snapshots[0]
    sup = 1.0
    first_exceed = None
    for snap in traj.snapshots:
        f = equivalence_factor_at(first, snap, traj.kind)
        sup = max(sup, f)
        if first_exceed is None and f > threshold:
            first_exceed = snap.t
    return sup, first_exceed


@dataclass(frozen=True)
class BarrierSpec:
    lam: float
    m: int
    cover: object

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("barrier rate must be positive")
        if self.m not in (0, 1, 2):
            raise ValueError("m must be 0, 1 or 2")


def _deriv_norm_squared(snap, m):
    f = snap.field
    arr = (f.norm_ric, f.norm_d_ric, f.norm_d2_ric)[m]
    return np.asarray(arr) ** 2


def _barrier_weights(cover, s):
    """Per-ball cutoff values on the grid (rows: balls)."""
    from .cutoffs import ball_cutoff
    rows = [ball_cutoff(b.center, 16.0 * b.r, b.K, s, rbar=cover.rbar).chi
            for b in cover.balls]
    return np.vstack(rows)


def barrier_margin(traj, cover, spec, t_max=None,
                   lam_grid=None, _weights=None):
    """Margin of the glued barrier against |nabla^m Ric|^2 along the flow.

    Returns (worst_margin, max_feasible_lam): the margin for spec.lam, and
    the smallest rate on the logarithmic search grid with nonnegative
    margin (the measured stand-in for the implicit exponential rate).
    """
    traj.require_cover(cover)
    if spec.cover is not cover:
        raise CoverMismatch("barrier spec refers to a different cover")
    s = traj.initial_state.arclength()
    phis = _barrier_weights(cover, s) if _weights is None else _weights
    Ks = np.array([b.K for b in cover.balls])
    Ps = np.array([b.P for b in cover.balls])
    snaps = [sn for sn in traj.snapshots
             if t_max is None or sn.t <= t_max + 1e-12]

    def worst(lam):
        m_best = math.inf
        for sn in snaps:
            wts = Ks ** spec.m * Ps ** 2 * np.exp(lam * Ks * (sn.t - traj.snapshots[0].t))
            barrier = wts @ phis
            margin = barrier - _deriv_norm_squared(sn, spec.m)
            m_best = min(m_best, float(np.min(margin)))
        return m_best

    worst_margin = worst(spec.lam)
    if lam_grid is None:
        lam_grid = np.logspace(-3, 4, 57)
    max_feasible = None
    for lam in lam_grid:
        if worst(float(lam)) >= 0.0:
            max_feasible = float(lam)
            break
    return worst_margin, max_feasible


@dataclass(frozen=True)
class ResidualReport:
    max_positive: float
    max_abs: float
    pair_times: tuple
    pair_max_positive: tuple
    identity_max_positive: float = None

    def to_dict(self):
        return {"max_positive": self.max_positive, "max_abs": self.max_abs,
                "pair_times": list(self.pair_times),
                "pair_max_positive": list(self.pair_max_positive),
                "identity_max_positive": self.identity_max_positive}


def _chi_geometry(chi, state0, state_t, field_t):
    """chi derivatives with respect to g(t): |dchi|, covariant |Hess chi|."""
    chi_x = chi.d1 * state0.phi          # fixed coordinate derivative
    chi_s = chi_x / state_t.phi
    chi_ss = arclength_derivative(state_t, chi_s, odd_about_poles=True)
    n = state_t.n
    ang = np.empty_like(chi_s)
    mask = np.ones(chi_s.size, dtype=bool)
    for j in state_t.pole_nodes:
        mask[j] = False
        ang[j] = chi_ss[j]               # L'Hopital limit of H chi_s
    ang[mask] = field_t.psi_s[mask] / state_t.psi[mask] * chi_s[mask]
    hess = np.sqrt(chi_ss ** 2 + (n - 1) * ang ** 2)
    return np.abs(chi_s), hess, chi_ss, ang


def _laplacian_of(state_t, field_t, values):
    """Laplace-Beltrami of a radial function: f_ss + (n-1) H f_s."""
    f_s = arclength_derivative(state_t, values, odd_about_poles=True)
    f_ss = arclength_derivative(state_t, f_s, odd_about_poles=False)
    n = state_t.n
    out = np.empty_like(values)
    mask = np.ones(values.size, dtype=bool)
    for j in state_t.pole_nodes:
        mask[j] = False
        out[j] = n * f_ss[j]             # lim H f_s = f_ss at the pole
    out[mask] = (f_ss[mask] + (n - 1) * field_t.psi_s[mask]
                 / state_t.psi[mask] * f_s[mask])
    return out


def evolution_residuals(traj, chi=None, max_interval=0.05,
                        identity_constant=8.0, t_min=0.0):
    """Residuals of the pointwise curvature-growth inequalities.

    Global flow: d|Rm|/dt <= 6 |Rm||Ric| + 4 |nabla^2 Ric|.  Local flow:
    d|Rm|/dt <= 8 (chi |Hess chi| + |dchi|^2)|Ric| + 8 chi |dchi||nabla Ric|
    + 4 chi^2 |nabla^2 Ric| + 4 chi^2 |Rm||Ric|.  Time derivatives are
    centered differences of consecutive snapshots against the averaged
    right-hand side.  The m = 0 evolution identity is checked with the
    chi^2 Laplacian leading term and the norm-gradient surrogate for
    |nabla Rm|; its residual is reported separately.  Pairs before t_min
    are skipped: marginally smooth initial data passes through a short
    initial layer that no fixed snapshot cadence resolves.
    """
    snaps = [sn for sn in traj.snapshots if sn.t >= t_min]
    if len(snaps) < 2:
        raise SnapshotsTooSparse("need at least two snapshots")
    dts = np.diff([sn.t for sn in snaps])
    if float(np.max(dts)) > max_interval:
        raise SnapshotsTooSparse(
            f"snapshot interval {float(np.max(dts)):.3g} exceeds "
            f"{max_interval:g}")
    state0 = traj.initial_state
    chi_vals = None if chi is None else chi.chi

    def rhs(sn):
        f = sn.field
        if chi is None:
            return 6.0 * f.norm_rm * f.norm_ric + 4.0 * f.norm_d2_ric
        dchi, hess, _, _ = _chi_geometry(chi, state0, sn.state, f)
        c = chi_vals
        return (8.0 * (c * hess + dchi ** 2) * f.norm_ric
                + 8.0 * c * dchi * f.norm_d_ric
                + 4.0 * c ** 2 * f.norm_d2_ric
                + 4.0 * c ** 2 * f.norm_rm * f.norm_ric)

    def identity_rhs(sn):
        f = sn.field
        c = np.ones_like(f.norm_rm) if chi is None else chi_vals
        lap = _laplacian_of(sn.state, f, np.asarray(f.norm_rm))
        if chi is None:
            dchi = hess = np.zeros_like(f.norm_rm)
        else:
            dchi, hess, _, _ = _chi_geometry(chi, state0, sn.state, f)
        grad_rm = np.abs(arclength_derivative(sn.state, f.norm_rm,
                                              odd_about_poles=True))
        return (c ** 2 * lap
                + identity_constant * ((dchi ** 2 + c * hess) * f.norm_rm
                                       + c * dchi * grad_rm
                                       + c ** 2 * f.norm_rm ** 2))

    pair_times = []
    pair_max = []
    max_pos = 0.0
    max_abs = 0.0
    id_max_pos = 0.0
    prev = snaps[0]
    rhs_prev = rhs(prev)
    id_prev = identity_rhs(prev)
    for sn in snaps[1:]:
        dt = sn.t - prev.t
        dnorm = (np.asarray(sn.field.norm_rm) - np.asarray(prev.field.norm_rm)) / dt
        rhs_now = rhs(sn)
        resid = dnorm - 0.5 * (rhs_prev + rhs_now)
        id_now = identity_rhs(sn)
        id_resid = dnorm - 0.5 * (id_prev + id_now)
        pair_times.append(0.5 * (prev.t + sn.t))
        pair_max.append(float(np.max(resid)))
        max_pos = max(max_pos, float(np.max(resid)))
        max_abs = max(max_abs, float(np.max(np.abs(resid))))
        id_max_pos = max(id_max_pos, float(np.max(id_resid)))
        prev, rhs_prev, id_prev = sn, rhs_now, id_now
    return ResidualReport(max_positive=max_pos, max_abs=max_abs,
                          pair_times=tuple(pair_times),
                          pair_max_positive=tuple(pair_max),
                          identity_max_positive=id_max_pos)


def h_inf(alpha, beta, s_max=None):
    """Numeric infimum of ln(alpha e^{beta s} + 1)/s over (0, s_max].

    Uses h(alpha, beta)(s) = beta * h(alpha, 1)(beta s) and a log grid plus
    golden-section refinement.  The value always dominates
    alpha*beta/(alpha+1).
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha, beta must be positive")
    u_max = 1.0e4 if s_max is None else beta * s_max
    la = math.log(alpha)

    def f(u):
        return np.logaddexp(la + u, 0.0) / u

    grid = np.logspace(-8, math.log10(u_max), 4001)
    vals = f(grid)
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if b - a < 1e-14 * max(1.0, b):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    best = min(float(np.min(vals)), float(fc), float(fd))
    return beta * best
