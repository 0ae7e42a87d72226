"""Good covers: greedy constructions, quantitative constants, verification.

A cover is a list of balls B_i = B(center_i, r_i) with enlarged balls
B_hat_i of radius 16 r_i, per-ball curvature caps K_i and Ricci-smallness
factors P_i, plus the global constants (rbar, A, Kbar, Gamma, I).  Two
construction recipes are implemented:

  existence  radii from the second-order curvature scale, r_i = min(rho/16, 1),
             shrink factor L = 17 sqrt(1+gamma), K_i = max((1+gamma) rbar^2/r_i^2, 1),
             A = alpha/(1024 (1+gamma) rbar^2), Gamma = 256 (1+gamma) gamma rbar^2.
  transfer   K(s) = 64 rbar^2 (1+d(s,p))^2, r = rbar/sqrt(K), shrink factor 3,
             A = alpha/(2000 rbar^2), Gamma = (16 (2+sqrt 2)^15 + 1024) rbar^2,
             Kbar = 0.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageFailure, NonPositiveMetric
from .profiles import curvature_scale

VARIANTS = ("assumption1", "assumption2")


def p_factor(n, K, A, Kbar, variant):
    if variant == "assumption1":
        return (n - 1.0) * K * math.exp(A * (Kbar - K))
    return (n - 1.0) * K * math.exp(-A * K)


@dataclass(frozen=True)
class Ball:
    center: float
    r: float
    K: float
    P: float

    @property
    def hat(self):
        return (self.center - 16.0 * self.r, self.center + 16.0 * self.r)

    @property
    def interval(self):
        return (self.center - self.r, self.center + self.r)


@dataclass(frozen=True)
class GoodCover:
    n: int
    balls: tuple
    rbar: float
    A: float
    Kbar: float
    Gamma: float
    I: int
    variant: str
    domain: tuple
    shrink: float
    grid: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        if self.variant not in VARIANTS:
            raise NonPositiveMetric(f"unknown cover variant {self.variant!r}")
        if self.Gamma < 0 or self.A < 0 or self.rbar <= 0:
            raise NonPositiveMetric("cover constants must be nonnegative, rbar > 0")
        for b in self.balls:
            if b.K < max(self.rbar ** 2 / b.r ** 2, 1.0) - 1e-9:
                raise NonPositiveMetric(
                    f"K = {b.K:g} below max(rbar^2/r^2, 1) for ball at {b.center:g}")
            expected = p_factor(self.n, b.K, self.A, self.Kbar, self.variant)
            if not math.isclose(b.P, expected, rel_tol=1e-9):
                raise NonPositiveMetric(
                    f"P = {b.P:g} does not match the {self.variant} formula "
                    f"{expected:g} for ball at {b.center:g}")
        centers = [b.center for b in self.balls]
        order = np.argsort(centers)
        for a, bidx in zip(order[:-1], order[1:]):
            ba, bb = self.balls[a], self.balls[bidx]
            gap = bb.center - ba.center
            if gap + 1e-12 < (ba.r + bb.r) / self.shrink:
                raise NonPositiveMetric(
                    f"shrunken balls at {ba.center:g}, {bb.center:g} overlap")

    def ball_node_ranges(self, s):
        """[lo, hi) node index ranges of each enlarged ball on grid s."""
        s = np.asarray(s)
        out = []
        for b in self.balls:
            lo = int(np.searchsorted(s, b.hat[0], side="left"))
            hi = int(np.searchsorted(s, b.hat[1], side="right"))
            out.append((lo, max(hi, lo + 1)))
        return out


def intersection_count(balls, domain=None):
    """Max number of enlarged balls containing a common point (endpoint sweep)."""
    events = []
    for b in balls:
        lo, hi = b.hat
        if domain is not None:
            lo, hi = max(lo, domain[0]), min(hi, domain[1])
            if hi < lo:
                continue
        events.append((lo, 1))
        events.append((hi, -1))
    events.sort(key=lambda e: (e[0], -e[1]))
    best = cur = 0
    for _, delta in events:
        cur += delta
        best = max(best, cur)
    return best


@dataclass(frozen=True)
class CoverRecipe:
    kind: str                       # "existence" | "transfer"
    rbar: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = None             # existence; measured from rho if None
    p: float = 0.0                  # transfer base point
    spacing: float = None           # candidate spacing; profile resolution if None
    rho_max: float = 1e6


def _greedy_centers(candidates, radii, shrink):
    # left-to-right sweep; clearing the last accepted ball implies clearing
    # all earlier ones (their pairwise gaps already exceed the shrunken radii)
    accepted = []
    for s, r in zip(candidates, radii):
        if accepted:
            c, rc = accepted[-1]
            if abs(s - c) < (r + rc) / shrink:
                continue
        accepted.append((float(s), float(r)))
    return accepted


def _check_coverage(points, accepted):
    centers = np.array([c for c, _ in accepted])
    radii = np.array([r for _, r in accepted])
    for spt in points:
        if not np.any(np.abs(spt - centers) <= radii):
            raise CoverageFailure(
                f"greedy selection left {spt:g} uncovered", float(spt))


def build_cover(profile, domain, recipe):
    """Greedy maximal cover of the domain per the chosen recipe."""
    lo, hi = float(domain[0]), float(domain[1])
    spacing = recipe.spacing or profile.resolution
    count = int(math.floor((hi - lo) / spacing)) + 1
    candidates = np.linspace(lo, hi, count)
    n = profile.n
    rbar = recipe.rbar

    if recipe.kind == "existence":
        from .profiles import measure_gamma
        gamma = recipe.gamma
        if gamma is None:
            gamma = measure_gamma(profile, rho_max=recipe.rho_max)
        L = 17.0 * math.sqrt(1.0 + gamma)
        rhos = np.array([curvature_scale(profile, float(s),
                                         rho_max=recipe.rho_max)
                         for s in candidates])
        radii = np.minimum(rhos / 16.0, 1.0)
        accepted = _greedy_centers(candidates, radii, L)
        _check_coverage(candidates, accepted)
        A = recipe.alpha / (1024.0 * (1.0 + gamma) * rbar ** 2)
        Gamma = 256.0 * (1.0 + gamma) * gamma * rbar ** 2
        Kbar = max(recipe.beta / A, recipe.alpha / (4.0 * A))
        variant = "assumption1"
        shrink = L
        balls = []
        for c, r in accepted:
            K = max((1.0 + gamma) * rbar ** 2 / r ** 2, 1.0)
            balls.append(Ball(center=float(c), r=float(r), K=float(K),
                              P=p_factor(n, K, A, Kbar, variant)))
    elif recipe.kind == "transfer":
        K_of = lambda s: 64.0 * rbar ** 2 * (1.0 + abs(s - recipe.p)) ** 2
        radii = np.array([rbar / math.sqrt(K_of(s)) for s in candidates])
        accepted = _greedy_centers(candidates, radii, 3.0)
        _check_coverage(candidates, accepted)
        A = recipe.alpha / (2000.0 * rbar ** 2)
        Gamma = (16.0 * (2.0 + math.sqrt(2.0)) ** 15 + 1024.0) * rbar ** 2
        Kbar = 0.0
        variant = "assumption1"
        shrink = 3.0
        balls = []
        for c, r in accepted:
            K = K_of(c)
            balls.append(Ball(center=float(c), r=float(r), K=float(K),
                              P=p_factor(n, K, A, Kbar, variant)))
    else:
        raise NonPositiveMetric(f"unknown cover recipe {recipe.kind!r}")

    I = intersection_count(balls, domain=(lo, hi))
    return GoodCover(n=n, balls=tuple(balls), rbar=rbar, A=A, Kbar=Kbar,
                     Gamma=Gamma, I=I, variant=variant, domain=(lo, hi),
                     shrink=shrink, grid=profile.grid)


def trivial_cover(profile, rbar=1.0, A=1.0):
    """Single ball covering the whole (finite) domain; Gamma = 0.

    K is the measured sup of |Rm| (at least max(rbar^2/r^2, 1)); Kbar is
    back-solved so the P formula reproduces the measured Ricci sups.
    """
    lo, hi = profile.domain
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise NonPositiveMetric("trivial cover needs a finite domain")
    center = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    n = profile.n
    K = max(profile.ball_sup("rm", center, r), rbar ** 2 / r ** 2, 1.0)
    P_needed = max(profile.ball_sup("ric", center, 16 * r),
                   profile.ball_sup("dric", center, 16 * r) / math.sqrt(K),
                   profile.ball_sup("d2ric", center, 16 * r) / K,
                   1e-300)
    Kbar = K + math.log(P_needed / ((n - 1.0) * K)) / A
    ball = Ball(center=center, r=r, K=K,
                P=p_factor(n, K, A, Kbar, "assumption1"))
    return GoodCover(n=n, balls=(ball,), rbar=rbar, A=A, Kbar=Kbar, Gamma=0.0,
                     I=1, variant="assumption1", domain=(lo, hi), shrink=17.0,
                     grid=profile.grid)


def uniform_cover(profile, radius, spacing, rbar=1.0, K=None, A=1.0,
                  Kbar=None, Gamma=1.0, variant="assumption1"):
    """Uniform-radius cover of a finite domain (fixture-style construction)."""
    lo, hi = profile.domain
    centers = np.arange(lo, hi + spacing / 2.0, spacing)
    n = profile.n
    if K is None:
        K = max(max(profile.ball_sup("rm", float(c), 16 * radius)
                    for c in centers) * 1.5,
                rbar ** 2 / radius ** 2, 1.0)
    if Kbar is None:
        Kbar = K
    balls = tuple(Ball(center=float(c), r=float(radius), K=float(K),
                       P=p_factor(n, K, A, Kbar, variant))
                  for c in centers)
    I = intersection_count(balls, domain=(lo, hi))
    shrink = max(17.0, 2.0 * radius / spacing + 1.0)
    return GoodCover(n=n, balls=balls, rbar=rbar, A=A, Kbar=Kbar, Gamma=Gamma,
                     I=I, variant=variant, domain=(lo, hi), shrink=shrink,
                     grid=profile.grid)


@dataclass(frozen=True)
class AssumptionReport:
    items: dict
    uniform_ricci_bound: float

    @property
    def passed(self):
        return all(entry["passed"] for entry in self.items.values())

    def to_dict(self):
        return {"items": self.items, "passed": self.passed,
                "uniform_ricci_bound": self.uniform_ricci_bound}


def verify_cover(cover, profile, variant=None):
    """Check cover items (a)-(e) with numeric margins; violations are entries."""
    variant = variant or cover.variant
    lo, hi = cover.domain
    items = {}

    # (a) coverage of the domain
    pts = np.linspace(lo, hi, max(501, int((hi - lo) / profile.resolution) + 1))
    centers = np.array([b.center for b in cover.balls])
    radii = np.array([b.r for b in cover.balls])
    slack = np.array([np.max(radii - np.abs(s - centers)) for s in pts])
    worst = int(np.argmin(slack))
    items["a_coverage"] = {"passed": bool(slack[worst] >= 0.0),
                           "margin": float(slack[worst]),
                           "worst_point": float(pts[worst])}

    # (b) curvature caps and the K floor
    worst_b = (math.inf, None)
    floor_ok = True
    for b in cover.balls:
        sup = profile.ball_sup("rm", b.center, 16.0 * b.r)
        margin = b.K - sup
        if margin < worst_b[0]:
            worst_b = (margin, b.center)
        if b.K < max(cover.rbar ** 2 / b.r ** 2, 1.0) - 1e-9:
            floor_ok = False
    items["b_curvature_cap"] = {"passed": bool(worst_b[0] >= 0.0 and floor_ok),
                                "margin": float(worst_b[0]),
                                "worst_ball": worst_b[1],
                                "k_floor_ok": floor_ok}

    # (c) Ricci smallness sup_{B_hat} |nabla^m Ric| <= K^{m/2} P
    for m, key in enumerate(("ric", "dric", "d2ric")):
        worst_c = (math.inf, None)
        for b in cover.balls:
            sup = profile.ball_sup(key, b.center, 16.0 * b.r)
            bound = b.K ** (m / 2.0) * b.P
            margin = bound - sup
            if margin < worst_c[0]:
                worst_c = (margin, b.center)
        items[f"c_ricci_m{m}"] = {"passed": bool(worst_c[0] >= 0.0),
                                  "margin": float(worst_c[0]),
                                  "worst_ball": worst_c[1]}

    # (d) adjacency jumps between intersecting enlarged balls
    cap = cover.Gamma if variant == "assumption1" else \
        cover.Gamma * min(1.0 / cover.A, 1.0) if cover.A > 0 else cover.Gamma
    order = np.argsort(centers)
    worst_d = (math.inf, None)
    sorted_balls = [cover.balls[i] for i in order]
    for i, bi in enumerate(sorted_balls):
        for bj in sorted_balls[i + 1:]:
            if bj.center - 16.0 * bj.r > bi.center + 16.0 * bi.r:
                break
            m = min(bi.K + cap - bj.K, bj.K + cap - bi.K)
            if m < worst_d[0]:
                worst_d = (m, (bi.center, bj.center))
    items["d_adjacency"] = {"passed": bool(worst_d[0] >= 0.0 or worst_d[1] is None),
                            "margin": (None if worst_d[1] is None
                                       else float(worst_d[0])),
                            "worst_pair": worst_d[1]}

    # (e) intersection multiplicity
    count = intersection_count(cover.balls, domain=cover.domain)
    items["e_intersections"] = {"passed": bool(count <= cover.I),
                                "computed": int(count),
                                "declared": int(cover.I)}

    bound = ((cover.n - 1.0) / cover.A * math.exp(cover.A * cover.Kbar - 1.0)
             if cover.A > 0 else math.inf)
    return AssumptionReport(items=items, uniform_ricci_bound=bound)


def cover_to_json(cover, path=None):
    data = {"n": cover.n,
            "balls": [{"center": b.center, "r": b.r, "K": b.K, "P": b.P}
                      for b in cover.balls],
            "constants": {"rbar": cover.rbar, "A": cover.A, "Kbar": cover.Kbar,
                          "Gamma": cover.Gamma, "I": cover.I,
                          "variant": cover.variant, "shrink": cover.shrink,
                          "domain": list(cover.domain)}}
    if path is not None:
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
    return data


def cover_from_json(data):
    c = data["constants"]
    balls = tuple(Ball(center=b["center"], r=b["r"], K=b["K"], P=b["P"])
                  for b in data["balls"])
    return GoodCover(n=data["n"], balls=balls, rbar=c["rbar"], A=c["A"],
                     Kbar=c["Kbar"], Gamma=c["Gamma"], I=c["I"],
                     variant=c["variant"], domain=tuple(c["domain"]),
                     shrink=c["shrink"])
