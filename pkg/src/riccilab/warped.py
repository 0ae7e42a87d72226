"""Rotationally symmetric metrics g = phi^2 dx^2 + psi^2 g_{S^{n-1}} on a 1D grid."""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import (NonPositiveMetric, PoleRegularityViolation,
                     UnsupportedTopology)

TOPOLOGIES = ("sphere", "plane", "cylinder")


def _readonly(a):
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WarpedState:
    """Immutable snapshot of the reduced metric on a fixed uniform x-grid.

    Poles: sphere has them at both ends, plane at the left end, cylinder has
    none.  At poles psi is exactly 0 and the one-sided arclength derivative
    is +1 (left) / -1 (right).
    """

    n: int
    topology: str
    x: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise UnsupportedTopology(f"unknown topology {self.topology!r}")
        if self.n < 3:
            raise NonPositiveMetric(f"ambient dimension must be >= 3, got {self.n}")
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "phi", _readonly(self.phi))
        object.__setattr__(self, "psi", _readonly(self.psi))
        J = self.x.size
        if J < 9:
            raise NonPositiveMetric(f"need at least 9 grid nodes, got {J}")
        if self.phi.size != J or self.psi.size != J:
            raise NonPositiveMetric("phi/psi must match the grid size")
        dx = np.diff(self.x)
        if dx.min() <= 0 or not np.allclose(dx, dx[0], rtol=1e-9, atol=0.0):
            raise NonPositiveMetric("grid must be strictly increasing and uniform")
        if np.min(self.phi) <= 0.0:
            raise NonPositiveMetric("phi must be positive everywhere")
        interior = np.ones(J, dtype=bool)
        for j in self.pole_nodes:
            if self.psi[j] != 0.0:
                raise PoleRegularityViolation(
                    f"psi must vanish exactly at pole node {j}, got {self.psi[j]!r}")
            interior[j] = False
        if np.min(self.psi[interior], initial=np.inf) <= 0.0:
            raise NonPositiveMetric("psi must be positive at non-pole nodes")

    @property
    def pole_nodes(self):
        if self.topology == "sphere":
            return (0, self.x.size - 1)
        if self.topology == "plane":
            return (0,)
        return ()

    @property
    def pole_left(self):
        return self.topology in ("sphere", "plane")

    @property
    def pole_right(self):
        return self.topology == "sphere"

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    @property
    def grid_size(self):
        return int(self.x.size)

    def arclength(self):
        """Cumulative arclength of this state's metric along the grid."""
        mid = 0.5 * (self.phi[1:] + self.phi[:-1]) * np.diff(self.x)
        return np.concatenate(([0.0], np.cumsum(mid)))

    def with_fields(self, phi=None, psi=None, time=None):
        return replace(self,
                       phi=self.phi if phi is None else phi,
                       psi=self.psi if psi is None else psi,
                       time=self.time if time is None else time)


@dataclass(frozen=True)
class CurvatureField:
    """Per-node curvature data; derivative norms are filled by a second pass."""

    k_rad: np.ndarray
    k_sph: np.ndarray
    ric_a: np.ndarray
    ric_b: np.ndarray
    norm_rm: np.ndarray
    norm_ric: np.ndarray
    norm_d_ric: np.ndarray = None
    norm_d2_ric: np.ndarray = None
    psi_s: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("k_rad", "k_sph", "ric_a", "ric_b", "norm_rm", "norm_ric",
                     "norm_d_ric", "norm_d2_ric", "psi_s"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _readonly(val))


def stencil_order(state):
    """8th-order stencils on pole-bearing states, 4th-order otherwise."""
    if (state.pole_left or state.pole_right) and state.grid_size >= 13:
        return 8
    return 4


def arclength_derivative(state, f, odd_about_poles=False):
    """d f / ds on the state's grid; reflection at poles per parity."""
    refl = _kernels.BC_ODD if odd_about_poles else _kernels.BC_EVEN
    bl = refl if state.pole_left else _kernels.BC_ONESIDED
    br = refl if state.pole_right else _kernels.BC_ONESIDED
    return _kernels.deriv_x(np.asarray(f, dtype=np.float64), state.h, bl, br,
                            stencil_order(state)) / state.phi


def check_pole_regularity(state, tol=1e-3):
    """Raise PoleRegularityViolation if psi_s != +/-1 or psi_ss != 0 at a pole."""
    if not state.pole_left and not state.pole_right:
        return
    psi_s = arclength_derivative(state, state.psi, odd_about_poles=True)
    psi_ss = arclength_derivative(state, psi_s, odd_about_poles=False)
    scale = max(1.0, float(np.max(np.abs(psi_ss))))
    if state.pole_left:
        if abs(psi_s[0] - 1.0) > tol:
            raise PoleRegularityViolation(
                f"psi_s at left pole is {psi_s[0]:.6g}, expected 1")
        if abs(psi_ss[0]) > tol * scale:
            raise PoleRegularityViolation(
                f"psi_ss at left pole is {psi_ss[0]:.6g}, expected 0")
    if state.pole_right:
        j = state.grid_size - 1
        if abs(psi_s[j] + 1.0) > tol:
            raise PoleRegularityViolation(
                f"psi_s at right pole is {psi_s[j]:.6g}, expected -1")
        if abs(psi_ss[j]) > tol * scale:
            raise PoleRegularityViolation(
                f"psi_ss at right pole is {psi_ss[j]:.6g}, expected 0")


def eval_warped_geometry(state, pole_tol=1e-3, validate=True):
    """Curvature of a warped state: sectional curvatures, frame Ricci, norms.

    Derivative norms (|nabla Ric|, |nabla^2 Ric|) are left unset; see
    ricci_covariant_derivatives.
    """
    if validate:
        check_pole_regularity(state, tol=pole_tol)
    k_rad, k_sph, ric_a, ric_b, psi_s, _ = _kernels.curvature_core(
        state.phi, state.psi, state.n, state.h,
        state.pole_left, state.pole_right)
    n = state.n
    norm_rm = np.sqrt(4.0 * (n - 1) * k_rad**2 + 2.0 * (n - 1) * (n - 2) * k_sph**2)
    norm_ric = np.sqrt(ric_a**2 + (n - 1) * ric_b**2)
    return CurvatureField(k_rad=k_rad, k_sph=k_sph, ric_a=ric_a, ric_b=ric_b,
                          norm_rm=norm_rm, norm_ric=norm_ric, psi_s=psi_s)


def ricci_covariant_derivatives(state, field, oracle_check=False,
                                oracle_tol=1e-4):
    """Fill |nabla Ric| and |nabla^2 Ric| by frame covariant-derivative passes.

    With oracle_check=True the result is compared against the brute-force
    coordinate oracle at a few interior nodes; disagreement beyond
    oracle_tol (relative) raises OracleMismatch.
    """
    d_ric, d2_ric = _kernels.ricci_derivative_norms(
        state.phi, state.psi, field.psi_s, field.ric_a, field.ric_b,
        state.n, state.h, state.pole_left, state.pole_right)
    out = CurvatureField(k_rad=field.k_rad, k_sph=field.k_sph,
                         ric_a=field.ric_a, ric_b=field.ric_b,
                         norm_rm=field.norm_rm, norm_ric=field.norm_ric,
                         norm_d_ric=d_ric, norm_d2_ric=d2_ric,
                         psi_s=field.psi_s)
    if oracle_check:
        from .oracle import validate_against_oracle
        validate_against_oracle(state, out, rel_tol=oracle_tol)
    return out


def eval_with_derivatives(state, pole_tol=1e-3, validate=True):
    field = eval_warped_geometry(state, pole_tol=pole_tol, validate=validate)
    return ricci_covariant_derivatives(state, field)


def constant_curvature_state(n, k, topology, J, extent=10.0):
    """Exact round-sphere or flat-plane profile sampled on J nodes."""
    if k < 0:
        raise UnsupportedTopology("hyperbolic profiles are deliberately excluded")
    if topology == "sphere":
        if k <= 0:
            raise UnsupportedTopology("sphere topology needs k > 0")
        rk = np.sqrt(k)
        x = np.linspace(0.0, np.pi / rk, J)
        psi = np.sin(rk * x) / rk
        psi[0] = 0.0
        psi[-1] = 0.0
    elif topology == "plane":
        if k != 0:
            raise UnsupportedTopology("plane topology needs k = 0")
        x = np.linspace(0.0, extent, J)
        psi = x.copy()
    else:
        raise UnsupportedTopology(
            f"constant_curvature_state supports sphere/plane, got {topology!r}")
    phi = np.ones(J)
    return WarpedState(n=n, topology=topology, x=x, phi=phi, psi=psi)


def scale_metric(state, c):
    """Replace g by c*g: phi -> sqrt(c) phi, psi -> sqrt(c) psi."""
    rc = np.sqrt(c)
    return state.with_fields(phi=rc * state.phi, psi=rc * state.psi)


def load_profile_csv(path, n, topology):
    """Load a profile fixture with columns x, phi, psi."""
    xs, phis, psis = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            xs.append(float(row["x"]))
            phis.append(float(row["phi"]))
            psis.append(float(row["psi"]))
    return WarpedState(n=n, topology=topology,
                       x=np.array(xs), phi=np.array(phis), psi=np.array(psis))


def save_profile_csv(state, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "phi", "psi"])
        for j in range(state.grid_size):
            w.writerow([f"{state.x[j]:.12g}", f"{state.phi[j]:.12g}",
                        f"{state.psi[j]:.12g}"])


def save_curvature_csv(state, field, path):
    """Curvature dump: node, s, kRad, kSph, normRm, normRic, normDRic, normD2Ric."""
    s = state.arclength()
    dr = field.norm_d_ric
    d2r = field.norm_d2_ric
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "s", "kRad", "kSph", "normRm", "normRic",
                    "normDRic", "normD2Ric"])
        for j in range(state.grid_size):
            w.writerow([j, f"{s[j]:.12g}", f"{field.k_rad[j]:.12g}",
                        f"{field.k_sph[j]:.12g}", f"{field.norm_rm[j]:.12g}",
                        f"{field.norm_ric[j]:.12g}",
                        "" if dr is None else f"{dr[j]:.12g}",
                        "" if d2r is None else f"{d2r[j]:.12g}"])
