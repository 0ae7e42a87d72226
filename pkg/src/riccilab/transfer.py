"""Gaussian spatial-decay analysis: hypothesis checks, fits, temporal growth.

Decay is fitted by least squares on ln(value/(1+d)^{2+m}) against (1+d)^2;
slope = -C2, intercept = ln C1.  Values below the floor are treated as
satisfying any Gaussian bound (vacuous pass) and excluded from fits.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import AllBelowFloor, InsufficientSamples

FIT_FLOOR = 1e-14


@dataclass(frozen=True)
class DecayFit:
    m: int
    C1: float
    C2: float
    r_squared: float
    fit_range: tuple
    samples: int

    def to_dict(self):
        return {"m": self.m, "C1": self.C1, "C2": self.C2,
                "r_squared": self.r_squared, "fit_range": list(self.fit_range),
                "samples": self.samples}


@dataclass(frozen=True)
class HypothesisReport:
    passed: bool
    worst_node: int
    worst_margin: float
    rm_margin: float
    details: dict

    def to_dict(self):
        return {"passed": self.passed, "worst_node": self.worst_node,
                "worst_margin": self.worst_margin, "rm_margin": self.rm_margin,
                "details": self.details}


def _distances(state, p_node):
    s = state.arclength()
    return np.abs(s - s[p_node])


def check_decay_hypothesis(state, field, omega0, alpha, p_node):
    """Margins of |Rm| <= (1+d)^2 and |nabla^m Ric| <= (1+d)^{2+m} e^{-a(1+d)^2}
    at every node outside omega0."""
    d = _distances(state, p_node)
    s = state.arclength()
    outside = (s < omega0[0]) | (s > omega0[1])
    one_d = 1.0 + d
    details = {}
    worst = (math.inf, -1)
    rm_margin = float(np.min((one_d ** 2 - field.norm_rm)[outside]))
    fields = (field.norm_ric, field.norm_d_ric, field.norm_d2_ric)
    for m, vals in enumerate(fields):
        bound = one_d ** (2 + m) * np.exp(-alpha * one_d ** 2)
        margin = bound - np.asarray(vals)
        margin_out = margin[outside]
        idx_out = np.nonzero(outside)[0]
        k = int(np.argmin(margin_out))
        details[f"m{m}"] = {"margin": float(margin_out[k]),
                            "worst_node": int(idx_out[k])}
        if margin_out[k] < worst[0]:
            worst = (float(margin_out[k]), int(idx_out[k]))
    passed = bool(worst[0] >= 0.0 and rm_margin >= 0.0)
    return HypothesisReport(passed=passed, worst_node=worst[1],
                            worst_margin=worst[0], rm_margin=rm_margin,
                            details=details)


def _log_linear_fit(one_d, vals, m, fit_range, floor=FIT_FLOOR):
    usable = (vals > floor)
    d = one_d - 1.0
    usable &= (d >= fit_range[0]) & (d <= fit_range[1])
    n_usable = int(np.count_nonzero(usable))
    if n_usable == 0:
        raise AllBelowFloor(
            "no values above the floor in the fitting range; decay holds "
            "vacuously")
    if n_usable < 8:
        raise InsufficientSamples(
            f"only {n_usable} usable nodes in the fitting range")
    z = one_d[usable] ** 2
    y = np.log(vals[usable] / one_d[usable] ** (2 + m))
    A = np.vstack([z, np.ones_like(z)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return DecayFit(m=m, C1=float(np.exp(coef[1])), C2=float(-coef[0]),
                    r_squared=float(r2),
                    fit_range=(float(fit_range[0]), float(fit_range[1])),
                    samples=n_usable)


def fit_values_gaussian(d, vals, m, fit_range, floor=FIT_FLOOR):
    """Fit C1 (1+d)^{2+m} exp(-C2 (1+d)^2) to raw per-node values."""
    return _log_linear_fit(1.0 + np.asarray(d, dtype=float),
                           np.asarray(vals, dtype=float), m, fit_range,
                           floor=floor)


def fit_gaussian_decay(traj, omega0, p_node, m, t, fit_range, floor=FIT_FLOOR):
    """DecayFit of |nabla^m Ric| at the snapshot nearest to t.

    Nodes inside omega0, outside the fitting range, or below the floor are
    excluded.
    """
    snap = traj.snapshot_nearest(t)
    state = snap.state
    d = _distances(state, p_node)
    s = traj.initial_state.arclength()
    vals = np.asarray((snap.field.norm_ric, snap.field.norm_d_ric,
                       snap.field.norm_d2_ric)[m])
    inside0 = (s >= omega0[0]) & (s <= omega0[1])
    vals = np.where(inside0, 0.0, vals)
    return _log_linear_fit(1.0 + d, vals, m, fit_range, floor=floor)


@dataclass(frozen=True)
class GrowthProfile:
    g: np.ndarray
    d: np.ndarray
    rm_change: np.ndarray
    fit: DecayFit

    def to_dict(self):
        return {"fit": None if self.fit is None else self.fit.to_dict(),
                "max_growth": float(np.max(self.g)),
                "max_rm_change": float(np.max(self.rm_change))}


def temporal_growth_profile(traj, p_node, omega0, fit_range, floor=FIT_FLOOR):
    """G(x) = sup_t |ln(g(x,t)/g(x,0))| with a Gaussian fit outside omega0.

    Also reports sup_t | |Rm|(x,t) - |Rm|(x,0) | per node.  Static nodes
    contribute G = 0 exactly and fall below the log-fit floor.
    """
    first = traj.snapshots[0]
    state0 = first.state
    J = state0.grid_size
    g = np.zeros(J)
    rm_change = np.zeros(J)
    mask = np.ones(J, dtype=bool)
    for j in state0.pole_nodes:
        mask[j] = False
    rm0 = np.asarray(first.field.norm_rm)
    for snap in traj.snapshots[1:]:
        lphi = np.abs(np.log(snap.state.phi / state0.phi)) * 2.0
        g = np.maximum(g, lphi)
        lpsi = np.abs(np.log(snap.state.psi[mask] / state0.psi[mask])) * 2.0
        g[mask] = np.maximum(g[mask], lpsi)
        rm_change = np.maximum(
            rm_change, np.abs(np.asarray(snap.field.norm_rm) - rm0))
    d = _distances(state0, p_node)
    s = state0.arclength()
    vals = np.where((s >= omega0[0]) & (s <= omega0[1]), 0.0, g)
    fit = None
    err = None
    try:
        fit = _log_linear_fit(1.0 + d, vals, -2, fit_range, floor=floor)
    except AllBelowFloor:
        raise
    return GrowthProfile(g=g, d=d, rm_change=rm_change, fit=fit)


def save_decay_csv(d, values, fit, path):
    """Per-node (d, value, fitted) triples for plotting."""
    one_d = 1.0 + np.asarray(d)
    fitted = fit.C1 * one_d ** (2 + fit.m) * np.exp(-fit.C2 * one_d ** 2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "value", "fitted"])
        for a, b, c in zip(d, values, fitted):
            w.writerow([f"{a:.12g}", f"{b:.12g}", f"{c:.12g}"])
