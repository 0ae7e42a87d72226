"""Time integration of the Ricci flow (chi = 1) and the local Ricci flow.

Warped states advance by explicit RK4 on the reduced system

    dphi/dt = chi^2 (n-1) (psi_ss / psi) phi
    dpsi/dt = chi^2 (psi_ss - (n-2)(1 - psi_s^2)/psi)

with a diffusive CFL step.  Einstein products never touch the PDE solver;
their scales integrate the exact linear ODE dc_k/dt = -2 lam_k.  Per-step
bookkeeping accumulates the running sups and time integrals that the
generalized doubling time is defined by.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import BlowupDetected, CoverMismatch, DegenerateGrid
from .products import EinsteinProductState, extinction_time, product_norms
from .warped import CurvatureField, WarpedState

NEG_INF = -np.inf


@dataclass(frozen=True)
class FlowControls:
    t_end: float
    dt_safety: float = 0.5
    snapshot_interval: float = None
    stop_on_doubling: bool = False
    doubling_factor: float = 2.0
    rm_cap: float = math.inf
    extinction_proximity: float = 1e-7
    filter_sigma: float = 1.0
    pole_guard_width: float = None
    max_steps: int = 20_000_000
    pole_tol: float = 1e-3
    ode_steps: int = 4096

    def __post_init__(self):
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.snapshot_interval is None:
            object.__setattr__(self, "snapshot_interval", self.t_end / 50.0)


@dataclass(frozen=True)
class Snapshot:
    t: float
    state: object
    field: object


class FlowTrajectory:
    """Time-ordered snapshots plus per-step sup/integral bookkeeping."""

    def __init__(self, kind, initial_state, chi=None, cover=None):
        self.kind = kind
        self.initial_state = initial_state
        self.chi = chi
        self.cover = cover
        self.snapshots = []
        self.t_fine = None
        self.sup_rm = None
        self.ball_sup_rm = None     # (steps+1, nballs) running sups
        self.int_ric = None         # cumulative integrals, same shape
        self.int_dric = None
        self.int_d2ric = None
        self.stop_reason = None
        self.extinction = None

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    def snapshot_nearest(self, t):
        ts = self.times
        return self.snapshots[int(np.argmin(np.abs(ts - t)))]

    def require_cover(self, cover):
        if self.cover is not cover:
            raise CoverMismatch(
                "trajectory bookkeeping was not run against this cover")


def _ball_sups(values, idx_pairs, scratch):
    """Per-ball max over [lo, hi) index ranges via interleaved reduceat."""
    scratch[:-1] = values
    out = np.maximum.reduceat(scratch, idx_pairs)[::2]
    return out


def stability_dt(state, field_data, chi=None, dt_safety=1.0, t_remaining=None):
    """Diffusive CFL step: dt_safety * h_s^2 / (2 max(chi^2) (n-1) max(1, stiffness)).

    The stiffness estimate is h_s^2 times the largest sectional curvature
    magnitude; it takes over when the reaction terms, not diffusion, limit
    the step.  With chi identically zero the metric is static and the
    remaining time is returned.
    """
    h_s = float(np.min(state.phi)) * state.h
    if h_s <= 0.0:
        raise DegenerateGrid("non-positive arclength spacing")
    max_chi2 = 1.0 if chi is None else float(np.max(chi.chi2))
    if max_chi2 == 0.0:
        if t_remaining is None:
            return math.inf
        return dt_safety * t_remaining
    curv = max(float(np.max(np.abs(field_data.k_rad))),
               float(np.max(np.abs(field_data.k_sph))))
    stiffness = h_s * h_s * curv
    return dt_safety * h_s * h_s / (2.0 * max_chi2 * (state.n - 1)
                                    * max(1.0, stiffness))


def _check_state_arrays(phi, psi, pole_nodes, t):
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
        raise BlowupDetected(f"non-finite state at t = {t:.9g}", time=t)
    if np.min(phi) <= 0.0:
        raise BlowupDetected(f"phi collapsed at t = {t:.9g}", time=t)
    interior = np.ones(psi.size, dtype=bool)
    for j in pole_nodes:
        interior[j] = False
    if np.min(psi[interior], initial=np.inf) <= 0.0:
        raise BlowupDetected(
            f"psi reached zero away from a pole at t = {t:.9g} "
            "(neckpinch signal)", time=t)


class PoleGuard:
    """Pole regularization data: parity projection for psi and the even
    extrapolation slaving phi on [0, width] to its values on (width, 2.5 width].

    The fixed-x reduction is weakly parabolic; the pole couplings support a
    boundary mode whose accumulated growth over a run scales like
    exp(C t_end / width^2), so the guard width is a physical length.
    """

    def __init__(self, state, width):
        h_s = float(np.min(state.phi)) * state.h
        J = state.grid_size
        b = int(math.ceil(width / h_s))
        b = max(b, 8)
        m = int(math.ceil(2.5 * b))
        if J <= 2 * (m + 1):
            b = min(b, max(J // 6, 1))
            m = min(int(math.ceil(2.5 * b)), (J - 3) // 2)
        self.slave_b = b
        self.slave_m = m
        self.width = width
        if m > b >= 1:
            self.p_phi = _kernels.phi_extrapolation_rows(b, m)
        else:
            self.slave_b = 0
            self.p_phi = np.zeros((1, 1))
        self.p_odd = _kernels._P_ODD

    @staticmethod
    def for_state(state, controls):
        width = controls.pole_guard_width
        if width is None:
            width = 0.8 * math.sqrt(controls.t_end)
        return PoleGuard(state, width)


def step(state, chi, dt, filter_sigma=1.0, guard=None):
    """One RK4 step of d g/dt = -2 chi^2 Ric; chi=None means chi identically 1.

    A chi^2-weighted 8th-order grid-mode filter and the pole guard follow
    the stage update; they stabilize the pole-localized gauge mode and
    leave frozen nodes bit-identical (filter_sigma=0 disables the filter).
    """
    if guard is None:
        guard = PoleGuard(state, 0.3)
    chi2 = np.ones(state.grid_size) if chi is None else chi.chi2
    phi, psi = _kernels.flow_step(state.phi, state.psi, chi2, state.n, state.h,
                                  state.pole_left, state.pole_right, dt,
                                  filter_sigma, guard.p_odd, guard.p_phi,
                                  guard.slave_b, guard.slave_m)
    t = state.time + dt
    _check_state_arrays(phi, psi, state.pole_nodes, t)
    return state.with_fields(phi=phi, psi=psi, time=t)


def _field_from_arrays(state_n, phi, psi, h, pl, pr, want_derivatives):
    k_rad, k_sph, ric_a, ric_b, psi_s, _ = _kernels.curvature_core(
        phi, psi, state_n, h, pl, pr)
    n = state_n
    norm_rm = np.sqrt(4.0 * (n - 1) * k_rad**2 + 2.0 * (n - 1) * (n - 2) * k_sph**2)
    norm_ric = np.sqrt(ric_a**2 + (n - 1) * ric_b**2)
    d_ric = d2_ric = None
    if want_derivatives:
        d_ric, d2_ric = _kernels.ricci_derivative_norms(
            phi, psi, psi_s, ric_a, ric_b, n, h, pl, pr)
    return CurvatureField(k_rad=k_rad, k_sph=k_sph, ric_a=ric_a, ric_b=ric_b,
                          norm_rm=norm_rm, norm_ric=norm_ric,
                          norm_d_ric=d_ric, norm_d2_ric=d2_ric, psi_s=psi_s)


def run_flow(state, chi=None, controls=None, cover=None):
    """Integrate to t_end or a stop predicate; returns the trajectory.

    With a cover attached, per-ball running sups of |Rm| and trapezoid
    integrals of sup|Ric|, sup chi|nabla Ric|, sup chi^2|nabla^2 Ric| are
    accumulated every step.
    """
    if controls is None:
        raise ValueError("controls required")
    if isinstance(state, EinsteinProductState):
        return _run_flow_ode(state, controls)
    return _run_flow_pde(state, chi, controls, cover)


def _run_flow_pde(state, chi, controls, cover):
    traj = FlowTrajectory("warped", state, chi=chi, cover=cover)
    n = state.n
    h = state.h
    pl, pr = state.pole_left, state.pole_right
    s0 = state.arclength()
    if chi is not None and chi.s.size != s0.size:
        raise CoverMismatch("chi grid does not match the state grid")
    chi_vals = None if chi is None else chi.chi
    chi2 = np.ones(state.grid_size) if chi is None else chi.chi2

    track = cover is not None
    if track:
        ranges = cover.ball_node_ranges(s0)
        idx_pairs = np.array([i for pr_ in ranges for i in pr_], dtype=np.intp)
        nballs = len(ranges)
        scratch = np.full(state.grid_size + 1, NEG_INF)

    want_derivs = track
    guard = PoleGuard.for_state(state, controls)
    fld = _field_from_arrays(n, state.phi, state.psi, h, pl, pr, want_derivs)

    t = state.time
    times = [t]
    sup_rm = [float(np.max(fld.norm_rm))]
    sup_rm0 = sup_rm[0]
    if track:
        brm = _ball_sups(fld.norm_rm, idx_pairs, scratch).copy()
        ball_rm = [brm]
        iric = np.zeros(nballs)
        idric = np.zeros(nballs)
        id2ric = np.zeros(nballs)
        int_ric, int_dric, int_d2ric = [iric.copy()], [idric.copy()], [id2ric.copy()]
        ric_prev = _ball_sups(fld.norm_ric, idx_pairs, scratch).copy()
        dric_prev = _ball_sups(
            fld.norm_d_ric if chi is None else chi_vals * fld.norm_d_ric,
            idx_pairs, scratch).copy()
        d2ric_prev = _ball_sups(
            fld.norm_d2_ric if chi is None else chi2 * fld.norm_d2_ric,
            idx_pairs, scratch).copy()

    snap_every = controls.snapshot_interval
    next_snap = t + snap_every
    traj.snapshots.append(Snapshot(t, state, _field_from_arrays(
        n, state.phi, state.psi, h, pl, pr, True)))
    t_end = state.time + controls.t_end

    # hot loop on raw arrays; states are materialized only at snapshots
    phi = np.array(state.phi)
    psi = np.array(state.psi)
    interior = np.ones(state.grid_size, dtype=bool)
    for j in state.pole_nodes:
        interior[j] = False
    max_chi2 = 1.0 if chi is None else float(np.max(chi2))
    nd = 2.0 * max_chi2 * (n - 1)
    sigma = controls.filter_sigma

    def make_state(t_now, p, q):
        return state.with_fields(phi=p, psi=q, time=t_now)

    steps = 0
    while t < t_end - 1e-15:
        if max_chi2 == 0.0:
            dt_stab = controls.dt_safety * (t_end - t)
        else:
            h_s = float(np.min(phi)) * h
            if h_s <= 0.0:
                raise DegenerateGrid("non-positive arclength spacing")
            curv = max(float(np.max(np.abs(fld.k_rad))),
                       float(np.max(np.abs(fld.k_sph))))
            dt_stab = (controls.dt_safety * h_s * h_s
                       / (nd * max(1.0, h_s * h_s * curv)))
        dt = min(dt_stab, next_snap - t, t_end - t)
        if dt <= 0.0:
            dt = min(dt_stab, t_end - t)
        phi_new, psi_new = _kernels.flow_step(
            phi, psi, chi2, n, h, pl, pr, dt, sigma,
            guard.p_odd, guard.p_phi, guard.slave_b, guard.slave_m)
        bad = not (np.all(np.isfinite(phi_new)) and np.all(np.isfinite(psi_new)))
        if not bad:
            bad = (np.min(phi_new) <= 0.0
                   or np.min(psi_new[interior], initial=np.inf) <= 0.0)
        if bad:
            err = BlowupDetected(
                f"non-finite state or psi <= 0 away from a pole at "
                f"t = {t + dt:.9g} (neckpinch signal)", time=t + dt)
            err.last_good = traj.snapshots[-1]
            traj.stop_reason = "blowup"
            _finalize(traj, times, sup_rm,
                      (ball_rm, int_ric, int_dric, int_d2ric) if track else None)
            raise err
        phi, psi = phi_new, psi_new
        t = t + dt
        fld = _field_from_arrays(n, phi, psi, h, pl, pr, want_derivs)

        times.append(t)
        sup_rm.append(float(np.max(fld.norm_rm)))
        if track:
            brm = np.maximum(ball_rm[-1],
                             _ball_sups(fld.norm_rm, idx_pairs, scratch))
            ball_rm.append(brm)
            ric_now = _ball_sups(fld.norm_ric, idx_pairs, scratch).copy()
            dric_now = _ball_sups(
                fld.norm_d_ric if chi is None else chi_vals * fld.norm_d_ric,
                idx_pairs, scratch).copy()
            d2ric_now = _ball_sups(
                fld.norm_d2_ric if chi is None else chi2 * fld.norm_d2_ric,
                idx_pairs, scratch).copy()
            dt_half = 0.5 * (times[-1] - times[-2])
            iric = iric + dt_half * (ric_prev + ric_now)
            idric = idric + dt_half * (dric_prev + dric_now)
            id2ric = id2ric + dt_half * (d2ric_prev + d2ric_now)
            int_ric.append(iric.copy())
            int_dric.append(idric.copy())
            int_d2ric.append(id2ric.copy())
            ric_prev, dric_prev, d2ric_prev = ric_now, dric_now, d2ric_now

        if t >= next_snap - 1e-12:
            traj.snapshots.append(Snapshot(t, make_state(t, phi, psi),
                                           _field_from_arrays(
                n, phi, psi, h, pl, pr, True)))
            next_snap += snap_every

        if controls.stop_on_doubling and \
                sup_rm[-1] >= controls.doubling_factor * sup_rm0:
            traj.stop_reason = "doubling"
            break
        if sup_rm[-1] >= controls.rm_cap:
            traj.stop_reason = "rm-cap"
            break
        steps += 1
        if steps >= controls.max_steps:
            traj.stop_reason = "max-steps"
            break

    if traj.snapshots[-1].t < t - 1e-15:
        traj.snapshots.append(Snapshot(t, make_state(t, phi, psi),
                                       _field_from_arrays(
            n, phi, psi, h, pl, pr, True)))
    _finalize(traj, times, sup_rm,
              (ball_rm, int_ric, int_dric, int_d2ric) if track else None)
    return traj


def _finalize(traj, times, sup_rm, ball_data):
    traj.t_fine = np.asarray(times)
    traj.sup_rm = np.asarray(sup_rm)
    if ball_data is not None:
        ball_rm, int_ric, int_dric, int_d2ric = ball_data
        traj.ball_sup_rm = np.vstack(ball_rm)
        traj.int_ric = np.vstack(int_ric)
        traj.int_dric = np.vstack(int_dric)
        traj.int_d2ric = np.vstack(int_d2ric)


def _run_flow_ode(state, controls):
    """Einstein-product path: RK4 on dc_k/dt = -2 lam_k (exact for linear flow)."""
    traj = FlowTrajectory("einstein", state)
    factors = state.factors
    lams = np.array([f.lam for f in factors])
    c = np.array(state.scales, dtype=float)
    c0_min = float(np.min(c))
    lam_max = float(np.max(lams, initial=0.0))
    t_ext = extinction_time(factors)
    traj.extinction = t_ext

    t = state.time
    t_end = t + controls.t_end
    dt_base = controls.t_end / controls.ode_steps
    snap_every = controls.snapshot_interval
    next_snap = t + snap_every

    def norms(cv):
        return product_norms(factors, cv)

    def rk4(cv, dtv):
        # constant right-hand side; all four stages coincide
        k = -2.0 * lams
        return cv + dtv / 6.0 * (k + 2.0 * k + 2.0 * k + k)

    times = [t]
    rm, ric = norms(c)
    sup_rm = [rm]
    int_ric = [0.0]
    traj.snapshots.append(Snapshot(t, state, (rm, ric)))

    while t < t_end - 1e-18:
        dt = min(dt_base, t_end - t, next_snap - t)
        if lam_max > 0.0:
            # approach extinction geometrically, never step across it
            dt = min(dt, 0.45 * float(np.min(c)) / (2.0 * lam_max))
        c_new = rk4(c, dt)
        t += dt
        c = c_new
        rm_new, ric_new = norms(c)
        times.append(t)
        sup_rm.append(rm_new)
        int_ric.append(int_ric[-1] + 0.5 * dt * (ric + ric_new))
        ric = ric_new
        if t >= next_snap - 1e-15:
            traj.snapshots.append(Snapshot(
                t, EinsteinProductState(factors=factors, scales=tuple(c), time=t),
                (rm_new, ric_new)))
            next_snap += snap_every
        if lam_max > 0.0 and \
                float(np.min(c)) <= controls.extinction_proximity * c0_min:
            traj.stop_reason = "extinction-proximity"
            break
        if controls.stop_on_doubling and rm_new >= controls.doubling_factor * sup_rm[0]:
            traj.stop_reason = "doubling"
            break

    if traj.snapshots[-1].t < t - 1e-18:
        traj.snapshots.append(Snapshot(
            t, EinsteinProductState(factors=factors, scales=tuple(c), time=t),
            (sup_rm[-1], ric)))
    traj.t_fine = np.asarray(times)
    traj.sup_rm = np.asarray(sup_rm)
    traj.int_ric = np.asarray(int_ric)[:, None]
    traj.ball_sup_rm = np.maximum.accumulate(traj.sup_rm)[:, None]
    traj.int_dric = np.zeros_like(traj.int_ric)
    traj.int_d2ric = np.zeros_like(traj.int_ric)
    return traj


@dataclass(frozen=True)
class ExhaustionReport:
    deltas: tuple
    nonincreasing: bool
    converged: bool
    tolerance: float
    probe: tuple
    runs: tuple
    note: str = ("deltas are sups of metric-coefficient differences against "
                 "the largest-domain run; a numerical Cauchy check, not a "
                 "convergence proof")

    def to_dict(self):
        return {"deltas": list(self.deltas), "nonincreasing": self.nonincreasing,
                "converged": self.converged, "tolerance": self.tolerance,
                "probe": list(self.probe), "runs": [dict(r) for r in self.runs],
                "note": self.note}


def run_exhaustion(state, omegas, controls, cover, omega_hats=None,
                   probe=None, conv_tol=1e-3):
    """Local flows on nested cutoff domains, compared on a fixed probe set.

    delta_j is the sup over probe nodes and common snapshot times of the
    metric-coefficient difference between run j and the last run.
    """
    from .cutoffs import build_chi
    s = state.arclength()
    if omega_hats is None:
        margin = 2.0 * max(16.0 * b.r for b in cover.balls) + 0.5
        omega_hats = [(max(o[0] - margin, cover.domain[0]),
                       min(o[1] + margin, cover.domain[1])) for o in omegas]
    if probe is None:
        probe = tuple(omegas[0])
    probe_mask = (s >= probe[0]) & (s <= probe[1])

    runs = []
    trajs = []
    for om, om_hat in zip(omegas, omega_hats):
        chi = build_chi(cover, om, om_hat, s=s)
        traj = run_flow(state, chi=chi, controls=controls, cover=None)
        trajs.append(traj)
        runs.append({"omega": list(om), "omega_hat": list(om_hat),
                     "chi_support": list(chi.support),
                     "stop_reason": traj.stop_reason})

    ref = trajs[-1]
    deltas = []
    for traj in trajs[:-1]:
        m = min(len(traj.snapshots), len(ref.snapshots))
        worst = 0.0
        for a, b in zip(traj.snapshots[:m], ref.snapshots[:m]):
            dphi = float(np.max(np.abs(a.state.phi[probe_mask]
                                       - b.state.phi[probe_mask])))
            dpsi = float(np.max(np.abs(a.state.psi[probe_mask]
                                       - b.state.psi[probe_mask])))
            worst = max(worst, dphi, dpsi)
        deltas.append(worst)
    noninc = all(deltas[i] >= deltas[i + 1] - 1e-15
                 for i in range(len(deltas) - 1))
    converged = bool(deltas and deltas[-1] <= conv_tol)
    return ExhaustionReport(deltas=tuple(deltas), nonincreasing=noninc,
                            converged=converged, tolerance=conv_tol,
                            probe=tuple(probe), runs=tuple(runs))


def save_trajectory_csv(traj, path):
    """Snapshot time series: t, sup|Rm|, sup|Ric|, sup|dRic|, sup|d2Ric|, eq factor."""
    import csv
    from .monitors import equivalence_factor_at
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "supRm", "supRic", "supDRic", "supD2Ric",
                    "equivalenceFactor"])
        first = traj.snapshots[0]
        for snap in traj.snapshots:
            if traj.kind == "einstein":
                rm, ric = snap.field
                sup = [rm, ric, 0.0, 0.0]
            else:
                f = snap.field
                sup = [float(np.max(f.norm_rm)), float(np.max(f.norm_ric)),
                       float(np.max(f.norm_d_ric)), float(np.max(f.norm_d2_ric))]
            eq = equivalence_factor_at(first, snap, traj.kind)
            w.writerow([f"{snap.t:.12g}"] + [f"{v:.12g}" for v in sup]
                       + [f"{eq:.12g}"])
