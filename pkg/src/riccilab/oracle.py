"""Brute-force coordinate oracle for warped-product curvature.

Builds the full n-dimensional metric phi^2 dx^2 + psi^2 (round sphere chart)
and computes Christoffel symbols, Rm, Ric, nabla Ric and nabla^2 Ric by
nested central finite differences of the metric components.  x-direction
steps are grid-aligned (no interpolation of phi/psi); angle steps are taken
about the equator of the chart.  Everything is evaluated pointwise; this is
deliberately slow and independent of the fast-path frame formulas.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OracleMismatch, SingularChart

_STENCILS = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12)),
    6: ((-3, -2, -1, 1, 2, 3),
        (-1.0 / 60, 9.0 / 60, -45.0 / 60, 45.0 / 60, -9.0 / 60, 1.0 / 60)),
}


@dataclass(frozen=True)
class OracleValues:
    norm_rm: float
    norm_ric: float
    norm_d_ric: float
    norm_d2_ric: float


class _WarpedChart:
    """Pointwise tensor evaluation on an integer offset lattice.

    Offsets are (jx, a_1, ..., a_{n-1}); x = grid node j0 + jx, angle_k =
    pi/2 + a_k * dtheta.  Each derivative level is memoized.
    """

    def __init__(self, state, j0, order, dtheta):
        self.state = state
        self.n = state.n
        self.j0 = j0
        self.order = order
        self.dtheta = dtheta
        self.offsets, self.weights = _STENCILS[order]
        self.steps = [state.h] + [dtheta] * (self.n - 1)
        self._cache = {}

    def _point(self, off):
        j = self.j0 + off[0]
        return j, [np.pi / 2 + a * self.dtheta for a in off[1:]]

    def metric(self, off):
        key = ("g", off)
        if key in self._cache:
            return self._cache[key]
        j, angles = self._point(off)
        phi = self.state.phi[j]
        psi = self.state.psi[j]
        g = np.zeros((self.n, self.n))
        g[0, 0] = phi * phi
        w = psi * psi
        for k in range(1, self.n):
            g[k, k] = w
            if k < self.n - 1:
                w = w * np.sin(angles[k - 1]) ** 2
        self._cache[key] = g
        return g

    def _diff(self, fn, off, axis):
        step = self.steps[axis]
        acc = None
        for o, wgt in zip(self.offsets, self.weights):
            shifted = list(off)
            shifted[axis] += o
            val = fn(tuple(shifted))
            acc = wgt * val if acc is None else acc + wgt * val
        return acc / step

    def christoffel(self, off):
        key = ("G", off)
        if key in self._cache:
            return self._cache[key]
        g = self.metric(off)
        ginv = np.linalg.inv(g)
        dg = np.stack([self._diff(self.metric, off, a) for a in range(self.n)])
        gam = 0.5 * (np.einsum("ad,bdc->abc", ginv, dg)
                     + np.einsum("ad,cbd->abc", ginv, dg)
                     - np.einsum("ad,dbc->abc", ginv, dg))
        self._cache[key] = gam
        return gam

    def riemann_low(self, off):
        """R_{abcd} with R^a_{bcd} = d_c Gam^a_{db} - d_d Gam^a_{cb} + ..."""
        key = ("Rm", off)
        if key in self._cache:
            return self._cache[key]
        gam = self.christoffel(off)
        dgam = np.stack([self._diff(self.christoffel, off, a)
                         for a in range(self.n)])
        r_up = (np.einsum("cadb->abcd", dgam)
                - np.einsum("dacb->abcd", dgam)
                + np.einsum("ace,edb->abcd", gam, gam)
                - np.einsum("ade,ecb->abcd", gam, gam))
        rm = np.einsum("ae,ebcd->abcd", self.metric(off), r_up)
        self._cache[key] = rm
        return rm

    def ricci(self, off):
        key = ("Ric", off)
        if key in self._cache:
            return self._cache[key]
        g = self.metric(off)
        ginv = np.linalg.inv(g)
        ric = np.einsum("ae,abed->bd", ginv, self.riemann_low(off))
        self._cache[key] = ric
        return ric

    def nabla_ric(self, off):
        key = ("dRic", off)
        if key in self._cache:
            return self._cache[key]
        ric = self.ricci(off)
        gam = self.christoffel(off)
        dric = np.stack([self._diff(self.ricci, off, a) for a in range(self.n)])
        out = (dric - np.einsum("eab,ec->abc", gam, ric)
               - np.einsum("eac,be->abc", gam, ric))
        self._cache[key] = out
        return out

    def nabla2_ric(self, off):
        t = self.nabla_ric(off)
        gam = self.christoffel(off)
        dt = np.stack([self._diff(self.nabla_ric, off, a) for a in range(self.n)])
        return (dt - np.einsum("eab,ecd->abcd", gam, t)
                - np.einsum("eac,bed->abcd", gam, t)
                - np.einsum("ead,bce->abcd", gam, t))

    def norms(self):
        off = (0,) * self.n
        g = self.metric(off)
        gi = np.linalg.inv(g)
        rm = self.riemann_low(off)
        ric = self.ricci(off)
        t1 = self.nabla_ric(off)
        t2 = self.nabla2_ric(off)
        rm2 = np.einsum("abcd,efgh,ae,bf,cg,dh->", rm, rm, gi, gi, gi, gi)
        ric2 = np.einsum("ab,cd,ac,bd->", ric, ric, gi, gi)
        d1 = np.einsum("abc,def,ad,be,cf->", t1, t1, gi, gi, gi)
        d2 = np.einsum("abcd,efgh,ae,bf,cg,dh->", t2, t2, gi, gi, gi, gi)
        return OracleValues(norm_rm=float(np.sqrt(max(rm2, 0.0))),
                            norm_ric=float(np.sqrt(max(ric2, 0.0))),
                            norm_d_ric=float(np.sqrt(max(d1, 0.0))),
                            norm_d2_ric=float(np.sqrt(max(d2, 0.0))))


def _snap_node(state, sample_point):
    if isinstance(sample_point, (int, np.integer)):
        return int(sample_point)
    return int(np.argmin(np.abs(state.x - float(sample_point))))


def oracle_reach(order):
    # four nested derivative levels: Gam, Rm, nabla Ric, nabla^2 Ric
    return 4 * (order // 2)


def oracle_curvature_grid(state, sample_point, stencil_order=4, dtheta=0.02):
    """Frame-invariant curvature norms at one grid node, by the full chart.

    The x-stencil reads phi/psi at neighboring grid nodes; the window must
    stay inside the grid and clear of poles and chart singularities.
    """
    if state.n > 4:
        raise SingularChart("oracle chart is implemented for n <= 4")
    if stencil_order not in _STENCILS:
        raise SingularChart(f"stencil order must be one of {sorted(_STENCILS)}")
    j0 = _snap_node(state, sample_point)
    reach = oracle_reach(stencil_order)
    lo, hi = j0 - reach, j0 + reach
    if lo < 0 or hi > state.grid_size - 1:
        raise SingularChart(
            f"sample node {j0} needs nodes [{lo}, {hi}] inside the grid")
    for p in state.pole_nodes:
        if lo <= p <= hi:
            raise SingularChart(
                f"sample node {j0} is within the guard band of pole node {p}")
    if reach * dtheta > 1.0:
        raise SingularChart("angle window reaches the chart singularity")
    chart = _WarpedChart(state, j0, stencil_order, dtheta)
    return chart.norms()


def validate_against_oracle(state, field, rel_tol=1e-4, nodes=None,
                            stencil_order=4):
    """Compare fast-path norms with the oracle; raise OracleMismatch on failure."""
    if nodes is None:
        reach = oracle_reach(stencil_order)
        lo = reach
        hi = state.grid_size - 1 - reach
        if state.pole_left:
            lo = reach + 1
        if state.pole_right:
            hi = state.grid_size - reach - 2
        nodes = [lo + (hi - lo) * k // 4 for k in (1, 2, 3)]
    for j in nodes:
        o = oracle_curvature_grid(state, j, stencil_order=stencil_order)
        scale = max(1.0, o.norm_rm)
        pairs = (("normRm", field.norm_rm[j], o.norm_rm),
                 ("normRic", field.norm_ric[j], o.norm_ric),
                 ("normDRic", field.norm_d_ric[j], o.norm_d_ric),
                 ("normD2Ric", field.norm_d2_ric[j], o.norm_d2_ric))
        for name, fast, ref in pairs:
            if fast is None:
                continue
            err = abs(float(fast) - ref) / max(abs(ref), 1e-6 * scale)
            if err > rel_tol:
                raise OracleMismatch(
                    f"{name} at node {j}: fast {float(fast):.10g} vs oracle "
                    f"{ref:.10g} (rel err {err:.3g} > {rel_tol:g})")
