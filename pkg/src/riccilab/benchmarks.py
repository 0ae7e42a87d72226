"""Reference experiment fixtures: the bump-on-flat local-flow benchmark.

A compactly supported warp bump rides on a flat plane profile: psi = s +
amplitude * m((s - center)/halfwidth) with the C-infinity mollifier
m(u) = exp(1 - 1/(1-u^2)).  Curvature is exactly zero outside the bump
support, the pole at s = 0 keeps exact regularity, and the local flow is
driven by a glued cutoff that equals 1 on the inner domain.
"""

import math
from dataclasses import dataclass

import numpy as np

from .covers import uniform_cover
from .cutoffs import build_chi
from .flow import FlowControls
from .profiles import CurvatureProfile
from .warped import WarpedState, eval_with_derivatives


def mollifier(u):
    """exp(1 - 1/(1-u^2)) inside |u|<1: C-infinity, compactly supported."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


def bump_state(J=481, length=12.0, amplitude=5e-5, center=1.5,
               halfwidth=0.5, n=3):
    """Plane profile with a compact warp bump; flat outside the support."""
    x = np.linspace(0.0, length, J)
    psi = x + amplitude * mollifier((x - center) / halfwidth)
    psi[0] = 0.0
    return WarpedState(n=n, topology="plane", x=x, phi=np.ones(J), psi=psi)


@dataclass(frozen=True)
class BumpBenchmark:
    state: object
    profile: object
    cover: object
    chi: object
    controls: object
    omega: tuple
    omega_hat: tuple
    omega0: tuple
    p_node: int
    alpha: float


def make_bump_benchmark(J=481, t_end=1.2, amplitude=5e-5, snapshot_interval=0.01,
                        omega=(0.0, 8.0), omega_hat=(0.0, 10.7),
                        omega0=(0.0, 3.0), alpha=0.1,
                        ball_radius=0.08, ball_spacing=0.15, rbar=0.05,
                        K=256.0, Kbar=256.0, A=1.0, Gamma=1.0):
    """Bump-on-flat benchmark: state, cover, glued cutoff and flow controls.

    Cover constants are chosen so the Ricci-smallness items hold with
    margin for the default amplitude; the pole guard width stays clear of
    the bump support so the slaved region is exactly flat initially.
    """
    state = bump_state(J=J, amplitude=amplitude)
    field = eval_with_derivatives(state)
    profile = CurvatureProfile.from_state(state, field)
    cover = uniform_cover(profile, radius=ball_radius, spacing=ball_spacing,
                          rbar=rbar, K=K, A=A, Kbar=Kbar, Gamma=Gamma)
    chi = build_chi(cover, omega, omega_hat, s=state.arclength())
    controls = FlowControls(t_end=t_end, dt_safety=0.5,
                            snapshot_interval=snapshot_interval,
                            pole_guard_width=0.4)
    return BumpBenchmark(state=state, profile=profile, cover=cover, chi=chi,
                         controls=controls, omega=omega, omega_hat=omega_hat,
                         omega0=omega0, p_node=0, alpha=alpha)


def random_bump_states(count, seed, J=601, domain=(1.0, 7.0), n=3,
                       vary_phi=True):
    """Randomized smooth warp bumps on a pole-free annulus, for oracle checks."""
    rng = np.random.default_rng(seed)
    lo, hi = domain
    states = []
    for _ in range(count):
        x = np.linspace(lo, hi, J)
        psi = x.astype(float).copy()
        for _ in range(rng.integers(1, 3)):
            amp = rng.uniform(0.03, 0.08)
            c = rng.uniform(lo + 1.5, hi - 1.5)
            w = rng.uniform(0.8, 1.5)
            psi = psi + amp * np.exp(-((x - c) / w) ** 2)
        phi = np.ones(J)
        if vary_phi and rng.random() < 0.5:
            amp = rng.uniform(0.02, 0.05)
            c = rng.uniform(lo + 1.5, hi - 1.5)
            w = rng.uniform(0.9, 1.4)
            phi = phi + amp * np.exp(-((x - c) / w) ** 2)
        states.append(WarpedState(n=n, topology="cylinder", x=x, phi=phi,
                                  psi=psi))
    return states


def shrinking_sphere_controls(t_end=0.2, snapshot_interval=0.001):
    return FlowControls(t_end=t_end, dt_safety=0.5,
                        snapshot_interval=snapshot_interval)
