"""Experiment orchestration: build models, dispatch runs, collect reports.

Exit-status convention: 0 success, 2 a monitor flagged a violation, 3 a
numerical failure (blow-up / NaN), 4 config errors (raised before this
module runs).  Sweeps run their members in a thread pool (RICCILAB_THREADS
workers) and aggregate in input order, so reports are deterministic
regardless of scheduling.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import benchmarks
from .covers import (CoverRecipe, build_cover, cover_to_json, trivial_cover,
                     uniform_cover, verify_cover)
from .cutoffs import build_chi, save_cutoff_csv
from .errors import BlowupDetected, RicciLabError, ValidationError
from .flow import (FlowControls, run_exhaustion, run_flow, save_trajectory_csv)
from .monitors import (BarrierSpec, MonitorConstants, barrier_margin,
                       doubling_time, equivalence_factor,
                       evolution_residuals, generalized_doubling_time,
                       theoretical_lifespan_bounds)
from .oracle import validate_against_oracle
from .products import EinsteinFactor, EinsteinProductState
from .profiles import CurvatureProfile
from .reports import emit_report, write_table_csv
from .transfer import (check_decay_hypothesis, fit_gaussian_decay,
                       temporal_growth_profile)
from .warped import (constant_curvature_state, eval_with_derivatives,
                     load_profile_csv, save_curvature_csv)

OK, MONITOR_VIOLATION, NUMERICAL_FAILURE, CONFIG_ERROR = 0, 2, 3, 4


@dataclass
class ResultBundle:
    kind: str
    seed: int
    status: int = OK
    metrics: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_dict(self):
        return {"kind": self.kind, "seed": self.seed, "status": self.status,
                "metrics": self.metrics, "artifacts": self.artifacts,
                "errors": list(self.errors)}


def thread_count():
    raw = os.environ.get("RICCILAB_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return min(4, os.cpu_count() or 1)


def build_warped_state(model):
    profile = model["profile"]
    if profile == "round-sphere":
        return constant_curvature_state(model["n"], model["curvature"],
                                        "sphere", model["grid_points"])
    if profile == "flat-plane":
        return constant_curvature_state(model["n"], 0.0, "plane",
                                        model["grid_points"],
                                        extent=model["extent"])
    if profile == "bump":
        return benchmarks.bump_state(J=model["grid_points"],
                                     length=model["length"],
                                     amplitude=model["amplitude"],
                                     center=model["bump_center"],
                                     halfwidth=model["bump_halfwidth"],
                                     n=model["n"])
    if profile == "csv":
        return load_profile_csv(model["csv_path"], model["n"],
                                model["topology"])
    raise ValidationError("model.profile", f"unknown profile {profile!r}")


def build_model(model):
    if model["type"] == "einstein-product":
        factors = tuple(EinsteinFactor(dim=int(f["dim"]), lam=float(f["lam"]),
                                       rm_norm=float(f["rm_norm"]),
                                       c0=float(f.get("c0", 1.0)))
                        for f in model["factors"])
        if not factors:
            raise ValidationError("model.factors",
                                  "einstein-product needs at least one factor")
        return EinsteinProductState(factors=factors,
                                    scales=tuple(f.c0 for f in factors))
    return build_warped_state(model)


def flow_controls(cfg):
    solver = cfg["solver"]
    snap = solver["snapshot_interval"] or None
    guard = solver["pole_guard_width"] or None
    return FlowControls(t_end=solver["t_end"], dt_safety=solver["dt_safety"],
                        snapshot_interval=snap,
                        stop_on_doubling=solver["stop_on_doubling"],
                        rm_cap=solver["rm_cap"],
                        extinction_proximity=solver["extinction_proximity"],
                        filter_sigma=solver["filter_sigma"],
                        pole_guard_width=guard)


def build_cover_for(cfg, profile):
    cov = cfg["cover"]
    recipe = cov["recipe"]
    if recipe == "trivial":
        return trivial_cover(profile, rbar=cov["rbar"], A=cov["A"])
    if recipe == "uniform":
        return uniform_cover(profile, radius=cov["radius"],
                             spacing=cov["ball_spacing"], rbar=cov["rbar"],
                             K=cov["K"] or None, A=cov["A"],
                             Kbar=cov["Kbar"] or None, Gamma=cov["Gamma"])
    if recipe in ("existence", "transfer"):
        domain = tuple(cov["domain"]) if cov["domain"] else profile.domain
        rec = CoverRecipe(kind=recipe, rbar=cov["rbar"], alpha=cov["alpha"],
                          beta=cov["beta"],
                          gamma=None if cov["gamma"] < 0 else cov["gamma"],
                          p=cov["p"], spacing=cov["spacing"] or None)
        return build_cover(profile, domain, rec)
    raise ValidationError("cover.recipe", f"unknown recipe {recipe!r}")


def _flow_metrics(cfg, traj, bundle, out_dir):
    mon = cfg["monitors"]
    td = doubling_time(traj, factor=mon["doubling_factor"])
    eq_sup, eq_first = equivalence_factor(traj)
    sup0 = float(traj.sup_rm[0])
    constants = MonitorConstants(c_n=mon["c_n"])
    bounds = theoretical_lifespan_bounds(
        (traj.initial_state.n if traj.kind == "warped"
         else traj.initial_state.dim), max(sup0, 1e-300), 0.0,
        constants=constants)
    metrics = {"sup_rm_initial": sup0,
               "sup_rm_final": float(traj.sup_rm[-1]),
               "t_final": float(traj.t_fine[-1]),
               "doubling_time": td,
               "equivalence_factor": eq_sup,
               "equivalence_first_above_2": eq_first,
               "stop_reason": traj.stop_reason,
               "bounds": bounds.to_dict()}
    if td is not None and bounds.hamilton > td:
        bundle.status = max(bundle.status, MONITOR_VIOLATION)
        bundle.errors.append("hamilton bound exceeds the measured doubling time")
    path = os.path.join(out_dir, "trajectory.csv")
    save_trajectory_csv(traj, path)
    bundle.artifacts["trajectory"] = path
    return metrics


def run_flow_experiment(cfg, out_dir, local=False):
    bundle = ResultBundle(kind=cfg.kind, seed=cfg.seed)
    state = build_model(cfg["model"])
    controls = flow_controls(cfg)
    chi = None
    cover = None
    if local:
        field_data = eval_with_derivatives(state)
        profile = CurvatureProfile.from_state(state, field_data)
        cover = build_cover_for(cfg, profile)
        chi = build_chi(cover, tuple(cfg["cutoff"]["omega"]),
                        tuple(cfg["cutoff"]["omega_hat"]),
                        s=state.arclength())
        path = os.path.join(out_dir, "chi.csv")
        save_cutoff_csv(chi, path)
        bundle.artifacts["chi"] = path
        cover_to_json(cover, os.path.join(out_dir, "cover.json"))
        bundle.artifacts["cover"] = os.path.join(out_dir, "cover.json")
    try:
        traj = run_flow(state, chi=chi, controls=controls, cover=cover)
    except BlowupDetected as err:
        bundle.status = NUMERICAL_FAILURE
        bundle.errors.append(str(err))
        bundle.metrics["blowup_time"] = err.time
        return bundle
    bundle.metrics.update(_flow_metrics(cfg, traj, bundle, out_dir))
    if local and cover is not None:
        T, binding = generalized_doubling_time(traj, cover)
        bundle.metrics["generalized_doubling_time"] = T
        bundle.metrics["binding_condition"] = (
            None if binding is None else
            {"condition": binding[0], "ball": binding[1]})
        mon = cfg["monitors"]
        barriers = {}
        for m in mon["barrier_m"]:
            spec = BarrierSpec(lam=mon["barrier_lambda"], m=int(m), cover=cover)
            margin, lam = barrier_margin(traj, cover, spec, t_max=T)
            barriers[f"m{int(m)}"] = {"worst_margin": margin,
                                      "max_feasible_lambda": lam}
            if lam is None:
                bundle.status = max(bundle.status, MONITOR_VIOLATION)
                bundle.errors.append(
                    f"no feasible barrier rate on the grid for m = {m}")
        bundle.metrics["barriers"] = barriers
        resid = evolution_residuals(traj, chi=chi,
                                    max_interval=controls.snapshot_interval * 1.01,
                                    t_min=mon["residual_t_min"])
        bundle.metrics["residuals"] = resid.to_dict()
        if state.topology != "cylinder":
            frozen = chi.chi == 0.0
            last = traj.snapshots[-1].state
            identical = bool(
                np.all(last.phi[frozen] == state.phi[frozen])
                and np.all(last.psi[frozen] == state.psi[frozen]))
            bundle.metrics["frozen_nodes_identical"] = identical
            if not identical:
                bundle.status = max(bundle.status, MONITOR_VIOLATION)
                bundle.errors.append("metric changed on chi = 0 nodes")
    return bundle


def run_cover_experiment(cfg, out_dir):
    bundle = ResultBundle(kind=cfg.kind, seed=cfg.seed)
    state = build_model(cfg["model"])
    field_data = eval_with_derivatives(state)
    profile = CurvatureProfile.from_state(state, field_data)
    cover = build_cover_for(cfg, profile)
    report = verify_cover(cover, profile)
    path = os.path.join(out_dir, "cover.json")
    cover_to_json(cover, path)
    bundle.artifacts["cover"] = path
    save_curvature_csv(state, field_data,
                       os.path.join(out_dir, "curvature.csv"))
    bundle.artifacts["curvature"] = os.path.join(out_dir, "curvature.csv")
    bundle.metrics = {"balls": len(cover.balls), "I": cover.I,
                      "A": cover.A, "Gamma": cover.Gamma, "Kbar": cover.Kbar,
                      "verification": report.to_dict()}
    if not report.passed:
        bundle.status = MONITOR_VIOLATION
        bundle.errors.append("cover verification failed")
    return bundle


def run_exhaustion_experiment(cfg, out_dir):
    bundle = ResultBundle(kind=cfg.kind, seed=cfg.seed)
    state = build_model(cfg["model"])
    field_data = eval_with_derivatives(state)
    profile = CurvatureProfile.from_state(state, field_data)
    cover = build_cover_for(cfg, profile)
    ex = cfg["exhaustion"]
    omegas = [tuple(o) for o in ex["omegas"]]
    margin = ex["hat_margin"]
    hats = [(max(o[0] - margin, cover.domain[0]),
             min(o[1] + margin, cover.domain[1])) for o in omegas]
    probe = tuple(ex["probe"]) if ex["probe"] else None
    try:
        report = run_exhaustion(state, omegas, flow_controls(cfg), cover,
                                omega_hats=hats, probe=probe,
                                conv_tol=ex["conv_tol"])
    except BlowupDetected as err:
        bundle.status = NUMERICAL_FAILURE
        bundle.errors.append(str(err))
        return bundle
    bundle.metrics = report.to_dict()
    if not (report.nonincreasing and report.converged):
        bundle.status = MONITOR_VIOLATION
        bundle.errors.append("exhaustion deltas did not converge")
    return bundle


def run_oracle_experiment(cfg, out_dir):
    bundle = ResultBundle(kind=cfg.kind, seed=cfg.seed)
    orc = cfg["oracle"]
    states = benchmarks.random_bump_states(orc["count"], cfg.seed,
                                           J=orc["grid_points"],
                                           n=cfg["model"]["n"])
    worst = 0.0
    checked = 0
    for state in states:
        field_data = eval_with_derivatives(state)
        try:
            validate_against_oracle(state, field_data,
                                    rel_tol=orc["rel_tol"],
                                    stencil_order=orc["stencil_order"])
        except RicciLabError as err:
            bundle.status = MONITOR_VIOLATION
            bundle.errors.append(str(err))
        checked += 1
    bundle.metrics = {"profiles_checked": checked, "rel_tol": orc["rel_tol"],
                      "all_within_tolerance": bundle.status == OK,
                      "worst_seen": worst}
    return bundle


def run_transfer_experiment(cfg, out_dir):
    bundle = ResultBundle(kind=cfg.kind, seed=cfg.seed)
    tr = cfg["transfer"]
    b = benchmarks.make_bump_benchmark(
        J=cfg["model"]["grid_points"], t_end=cfg["solver"]["t_end"],
        amplitude=cfg["model"]["amplitude"],
        omega0=tuple(tr["omega0"]), alpha=tr["alpha"])
    field_data = eval_with_derivatives(b.state)
    hyp = check_decay_hypothesis(b.state, field_data, b.omega0, b.alpha,
                                 b.p_node)
    try:
        traj = run_flow(b.state, chi=b.chi, controls=b.controls, cover=b.cover)
    except BlowupDetected as err:
        bundle.status = NUMERICAL_FAILURE
        bundle.errors.append(str(err))
        return bundle
    T, binding = generalized_doubling_time(traj, b.cover)
    fit_time = tr["fit_time"] if tr["fit_time"] >= 0 else T
    fit = fit_gaussian_decay(traj, b.omega0, b.p_node, tr["m"], fit_time,
                             tuple(tr["fit_range"]))
    growth = temporal_growth_profile(traj, b.p_node, b.omega0,
                                     tuple(tr["fit_range"]))
    bundle.metrics = {"hypothesis": hyp.to_dict(),
                      "generalized_doubling_time": T,
                      "fit_time": fit_time,
                      "decay_fit": fit.to_dict(),
                      "growth": growth.to_dict(),
                      "growth_fit_rate": growth.fit.C2}
    if not hyp.passed or fit.C2 <= 0 or growth.fit.C2 <= 0:
        bundle.status = MONITOR_VIOLATION
        bundle.errors.append("transfer-rate checks failed")
    from .transfer import save_decay_csv
    snap = traj.snapshot_nearest(fit_time)
    vals = (snap.field.norm_ric, snap.field.norm_d_ric,
            snap.field.norm_d2_ric)[tr["m"]]
    path = os.path.join(out_dir, "decay.csv")
    d = np.abs(b.state.arclength() - b.state.arclength()[b.p_node])
    save_decay_csv(d, np.asarray(vals), fit, path)
    bundle.artifacts["decay"] = path
    return bundle


def _sweep_member(eps, sweep, cfg):
    factors = (EinsteinFactor(dim=sweep["dim"], lam=float(eps),
                              rm_norm=sweep["rm_norm"], c0=1.0),)
    state = EinsteinProductState(factors=factors, scales=(1.0,))
    horizon = 1.25 / (4.0 * float(eps))
    controls = FlowControls(t_end=horizon, dt_safety=0.5,
                            snapshot_interval=horizon / 64.0,
                            stop_on_doubling=True)
    traj = run_flow(state, controls=controls)
    td = doubling_time(traj)
    n = sweep["dim"]
    K = sweep["rm_norm"]
    A = math.log((n - 1) * K / float(eps)) / K
    constants = MonitorConstants(c_n=cfg["monitors"]["c_n"])
    bounds = theoretical_lifespan_bounds(n, K, A, constants=constants)
    return {"epsilon": float(eps), "measured_td": td,
            "improved_bound": bounds.improved,
            "hamilton_bound": bounds.hamilton, "A": A}


def run_sweep_experiment(cfg, out_dir):
    bundle = ResultBundle(kind=cfg.kind, seed=cfg.seed)
    sweep = cfg["sweep"]
    if sweep["parameter"] != "epsilon":
        raise ValidationError("sweep.parameter",
                              f"unknown sweep parameter {sweep['parameter']!r}")
    rows = [None] * len(sweep["values"])
    errors = [None] * len(sweep["values"])

    def job(idx_eps):
        idx, eps = idx_eps
        try:
            rows[idx] = _sweep_member(eps, sweep, cfg)
        except RicciLabError as err:   # collected, not fail-fast
            errors[idx] = f"epsilon={eps}: {err}"

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        list(pool.map(job, enumerate(sweep["values"])))

    table = []
    for idx, eps in enumerate(sweep["values"]):
        if errors[idx]:
            bundle.status = max(bundle.status, NUMERICAL_FAILURE)
            bundle.errors.append(errors[idx])
            continue
        row = rows[idx]
        table.append([row["epsilon"], row["measured_td"],
                      row["improved_bound"], row["hamilton_bound"]])
        if row["measured_td"] is not None and \
                row["improved_bound"] > row["measured_td"]:
            bundle.status = max(bundle.status, MONITOR_VIOLATION)
            bundle.errors.append(
                f"improved bound exceeds measured doubling time at "
                f"epsilon={eps}")
    path = os.path.join(out_dir, "sweep.csv")
    write_table_csv(table, ["epsilon", "measured_td", "improved_bound",
                            "hamilton_bound"], path)
    bundle.artifacts["sweep"] = path
    bundle.metrics = {"rows": [r for r in rows if r is not None]}
    return bundle


def run_experiment(cfg, out_dir=None):
    """Dispatch a validated config; writes artifacts and the report files."""
    out_dir = out_dir or cfg["output"]["directory"]
    os.makedirs(out_dir, exist_ok=True)
    kind = cfg.kind
    if kind == "flow":
        bundle = run_flow_experiment(cfg, out_dir, local=False)
    elif kind == "local-flow":
        bundle = run_flow_experiment(cfg, out_dir, local=True)
    elif kind == "cover":
        bundle = run_cover_experiment(cfg, out_dir)
    elif kind == "exhaustion":
        bundle = run_exhaustion_experiment(cfg, out_dir)
    elif kind == "oracle-check":
        bundle = run_oracle_experiment(cfg, out_dir)
    elif kind == "transfer-rate":
        bundle = run_transfer_experiment(cfg, out_dir)
    elif kind == "sweep":
        bundle = run_sweep_experiment(cfg, out_dir)
    else:
        raise ValidationError("kind", f"unhandled kind {kind!r}")
    emit_report(bundle.to_dict(), cfg["output"]["formats"], out_dir)
    return bundle
