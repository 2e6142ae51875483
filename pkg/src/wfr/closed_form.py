"""Exact analytic transport distances and geodesics for special endpoint pairs.

Covers the three cases with known closed forms: a measure collapsing to zero,
proportional rescaling of a fixed measure, and a pair of single atoms.  These
values are the ground truth against which the grid solver is validated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import GridMeasure, PotentialField, SpaceTimePath


def dist_to_zero(m0: float) -> float:
    """Distance from a measure of mass m0 to the zero measure: 2*sqrt(m0)."""
    if m0 < 0:
        raise ValueError("mass must be nonnegative")
    return 2.0 * math.sqrt(m0)


def dist_proportional(m0: float, lam: float) -> float:
    """Distance from rho to lam*rho when mass(rho)=m0: 2*sqrt(m0)*|1-sqrt(lam)|."""
    if m0 < 0 or lam < 0:
        raise ValueError("mass and scale must be nonnegative")
    return 2.0 * math.sqrt(m0) * abs(1.0 - math.sqrt(lam))


def squeeze_path(rho0: GridMeasure, nt: int) -> SpaceTimePath:
    """Optimal path from rho0 to zero: rho_t=(1-t)^2 rho0, u_t=-2/(1-t).

    The pointwise energy |u_t|^2 d rho_t = 4 m0 is constant in time, so every
    step energy equals 4*mass(rho0) and the total energy is exactly 4*m0.
    The potential at t=1 is reported as 0 (the measure there is zero).
    """
    if nt < 1:
        raise ValueError("nt must be >= 1")
    times = np.linspace(0.0, 1.0, nt + 1)
    shape = rho0.shape
    dim = rho0.dim
    frames = []
    for t in times:
        rho_t = rho0.scaled((1.0 - t) ** 2)
        u_val = -2.0 / (1.0 - t) if t < 1.0 else 0.0
        pot = PotentialField(np.full(shape, u_val), np.zeros(shape + (dim,)))
        frames.append((rho_t, pot))
    step_energy = np.full(nt, 4.0 * rho0.mass)
    return SpaceTimePath(times, tuple(frames), step_energy)


# ---------------------------------------------------------------------------
# single-atom pairs


@dataclass(frozen=True)
class DiracPairProblem:
    """Endpoints k0*delta_{x0}, k1*delta_{x1} with separation xi = |x0-x1|."""

    k0: float
    k1: float
    xi: float

    def __post_init__(self):
        if self.k0 < 0 or self.k1 < 0 or self.xi < 0:
            raise ValueError("charges and separation must be nonnegative")


@dataclass(frozen=True)
class DiracGeodesic:
    """Optimal single-atom geodesic data.

    The transported charge follows k_t = a(t-b)^2 + c; ``gamma0``/``gamma1``
    are the endpoint charges actually transported (the rest is created or
    destroyed in place).  ``strategy`` is "transport", "stationary", or
    "mixed" at the threshold separation pi where both cost the same.
    """

    a: float
    b: float
    c: float
    gamma0: float
    gamma1: float
    strategy: str
    xi: float

    def has_trajectory(self) -> bool:
        return self.c > 0.0


def _transport_coeffs(k0: float, k1: float, xi: float):
    """Coefficients (a, b, c) of the transport solution k_t = a(t-b)^2 + c."""
    cos_half = math.cos(xi / 2.0)
    root = math.sqrt(k0 * k1)
    a = k0 + k1 - 2.0 * cos_half * root
    if a <= 0.0:
        # only for k0 == k1 with xi == 0: the constant solution
        return 0.0, 0.5, k0
    b = (k0 - cos_half * root) / a
    c = k0 * k1 * math.sin(xi / 2.0) ** 2 / a
    return a, b, c


def transport_energy(p: DiracPairProblem) -> float:
    """Energy 4a of the pure-transport solution; defined for xi < 2*pi.

    This is the distance squared only for xi <= pi; on (pi, 2*pi) the
    stationary strategy is cheaper and this value is exposed for study only.
    """
    if p.xi >= 2.0 * math.pi:
        raise ValueError("transport solution requires xi < 2*pi")
    a, _, _ = _transport_coeffs(p.k0, p.k1, p.xi)
    return 4.0 * a


def stationary_energy(p: DiracPairProblem) -> float:
    """Energy 4(k0+k1) of killing one atom in place and growing the other."""
    return 4.0 * (p.k0 + p.k1)


def split_energy(p: DiracPairProblem, gamma0: float, gamma1: float) -> float:
    """Energy of transporting charges (gamma0, gamma1) and handling the rest
    stationarily: 4(k0+k1) - 8 cos(xi/2) sqrt(gamma0*gamma1)."""
    if not (0.0 <= gamma0 <= p.k0 and 0.0 <= gamma1 <= p.k1):
        raise ValueError("transported charges must lie in [0, k]")
    return 4.0 * (p.k0 + p.k1) - 8.0 * math.cos(p.xi / 2.0) * math.sqrt(gamma0 * gamma1)


def dirac_distance(p: DiracPairProblem) -> tuple[float, DiracGeodesic]:
    """Squared distance between two single atoms, with the optimal geodesic.

    d^2 = 4(k0 + k1 - 2 cos(xi_bar/2) sqrt(k0 k1)) with xi_bar = min(xi, pi).
    Below the threshold separation pi all charge is transported; above it the
    optimum is purely stationary; exactly at pi every split has equal cost and
    the full-transport representative is returned with strategy "mixed".
    """
    xi_bar = min(p.xi, math.pi)
    root = math.sqrt(p.k0 * p.k1)
    d2 = 4.0 * (p.k0 + p.k1 - 2.0 * math.cos(xi_bar / 2.0) * root)

    if p.xi < math.pi:
        strategy = "transport"
    elif p.xi > math.pi:
        strategy = "stationary"
    else:
        strategy = "mixed"

    if strategy == "stationary" or root == 0.0:
        geo = DiracGeodesic(0.0, 0.0, 0.0, 0.0, 0.0, strategy, p.xi)
    else:
        a, b, c = _transport_coeffs(p.k0, p.k1, xi_bar)
        geo = DiracGeodesic(a, b, c, p.k0, p.k1, strategy, p.xi)
    return d2, geo


def dirac_geodesic_eval(geo: DiracGeodesic, t: float) -> tuple[float, float]:
    """Charge and arc position of the transported atom at time t in [0, 1].

    Returns (k, s) with k = a(t-b)^2 + c and s the distance travelled along
    the segment from x0 to x1, so x_t = x0 + (x1-x0) * s / xi.
    """
    if not geo.has_trajectory():
        raise ValueError("geodesic has no transport component to evaluate")
    k = geo.a * (t - geo.b) ** 2 + geo.c
    w = math.sqrt(geo.a / geo.c)
    s = 2.0 * (math.atan((t - geo.b) * w) + math.atan(geo.b * w))
    return k, s


def dirac_geodesic_rates(geo: DiracGeodesic, t: float) -> tuple[float, float]:
    """Time derivatives (d log k / dt, ds/dt) of the transported atom at t."""
    if not geo.has_trajectory():
        raise ValueError("geodesic has no transport component to evaluate")
    k = geo.a * (t - geo.b) ** 2 + geo.c
    dlogk = 2.0 * geo.a * (t - geo.b) / k
    ds = 2.0 * math.sqrt(geo.a * geo.c) / k
    return dlogk, ds


def w2_vs_d_gap(xi: float) -> float:
    """Gap W2^2 - d^2 = xi^2 - (8 - 8 cos(xi/2)) for unit charges, 0 < xi < pi."""
    if not 0.0 < xi < math.pi:
        raise ValueError("gap formula requires 0 < xi < pi")
    return xi * xi - (8.0 - 8.0 * math.cos(xi / 2.0))
