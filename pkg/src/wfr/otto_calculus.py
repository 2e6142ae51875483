"""Trajectory geodesics and second-order calculus on the metric structure.

Particles follow x' = grad u(t, x), (log k)' = u(t, x); the driving potential
itself evolves by the Hamilton-Jacobi law du/dt = -(|u|^2 + |grad u|^2)/2
coupled to the non-conservative continuity equation.  The module also
evaluates the closed-form Hessian of internal energies and its
finite-difference cross-check along that evolution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grids import GridMeasure, PotentialField, discrete_gradient

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# particle integration


@dataclass(frozen=True)
class ParticleState:
    """Positions (n, d) and positive charges (n,) at a given time."""

    x: np.ndarray
    k: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        k = np.atleast_1d(np.asarray(self.k, dtype=float))
        if x.shape[0] != k.shape[0]:
            raise ValueError("one charge per particle required")
        keep = k > 0
        if not np.all(keep):
            logger.info("dropping %d zero-charge particles", int((~keep).sum()))
            x, k = x[keep], k[keep]
        if np.any(k <= 0):
            raise ValueError("charges must be positive")
        x = x.copy()
        k = k.copy()
        x.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "k", k)


@dataclass(frozen=True)
class ParticleTrajectory:
    """Sampled particle states plus potential samples along the paths."""

    times: np.ndarray  # (m,)
    x: np.ndarray  # (m, n, d)
    k: np.ndarray  # (m, n)
    u: np.ndarray  # (m, n)
    grad_u: np.ndarray  # (m, n, d)

    def state(self, j: int) -> ParticleState:
        return ParticleState(self.x[j], self.k[j], float(self.times[j]))


def integrate_particles(
    init: ParticleState,
    u: Callable[[float, np.ndarray], np.ndarray],
    grad_u: Callable[[float, np.ndarray], np.ndarray],
    t_end: float,
    dt: float,
    bounds: tuple | None = None,
) -> ParticleTrajectory:
    """Integrate x' = grad_u(t, x), (log k)' = u(t, x) with classical RK4.

    ``u(t, x)`` maps an (n, d) position block to (n,) values; ``grad_u`` to
    (n, d).  ``bounds`` is an optional ((lo, ...), (hi, ...)) bounding box;
    leaving it raises a RuntimeError.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t0 = init.time
    n_steps = max(1, int(round((t_end - t0) / dt)))
    dt = (t_end - t0) / n_steps

    x = init.x.copy()
    logk = np.log(init.k)
    times = [t0]
    xs, ks = [x.copy()], [np.exp(logk)]
    us = [np.asarray(u(t0, x), dtype=float)]
    gs = [np.asarray(grad_u(t0, x), dtype=float)]

    def check_bounds(pos):
        if bounds is None:
            return
        lo, hi = bounds
        if np.any(pos < np.asarray(lo)) or np.any(pos > np.asarray(hi)):
            raise RuntimeError("particle trajectory left the bounding box")

    t = t0
    for _ in range(n_steps):
        k1x, k1l = grad_u(t, x), u(t, x)
        k2x = grad_u(t + dt / 2, x + dt / 2 * k1x)
        k2l = u(t + dt / 2, x + dt / 2 * k1x)
        k3x = grad_u(t + dt / 2, x + dt / 2 * k2x)
        k3l = u(t + dt / 2, x + dt / 2 * k2x)
        k4x = grad_u(t + dt, x + dt * k3x)
        k4l = u(t + dt, x + dt * k3x)
        x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        logk = logk + dt / 6 * (k1l + 2 * k2l + 2 * k3l + k4l)
        t += dt
        check_bounds(x)
        times.append(t)
        xs.append(x.copy())
        ks.append(np.exp(logk))
        us.append(np.asarray(u(t, x), dtype=float))
        gs.append(np.asarray(grad_u(t, x), dtype=float))

    return ParticleTrajectory(
        np.asarray(times), np.asarray(xs), np.asarray(ks), np.asarray(us), np.asarray(gs)
    )


def particle_energy(traj: ParticleTrajectory) -> tuple[np.ndarray, float]:
    """Per-particle energies int k (|d log k/dt|^2 + |x'|^2) dt and their sum.

    Uses the sampled potential values (u = d log k/dt, grad u = x' along the
    flow) with trapezoidal quadrature in time.
    """
    integrand = traj.k * (traj.u**2 + np.sum(traj.grad_u**2, axis=-1))
    per = np.trapezoid(integrand, traj.times, axis=0)
    return per, float(per.sum())


# ---------------------------------------------------------------------------
# Hamilton-Jacobi geodesic system on the grid


def metric_speed_sq(rho: GridMeasure, pot: PotentialField) -> float:
    """Squared field norm int (|u|^2 + |grad u|^2) d rho."""
    dens = rho.values
    val = dens * (pot.u**2 + np.sum(pot.grad_u**2, axis=-1))
    return float(val.sum() * rho.cell_volume)


def _div_flux(dens: np.ndarray, u: np.ndarray, spacing) -> np.ndarray:
    """div(rho grad u) in flux form, zero flux through the domain boundary."""
    out = np.zeros_like(dens)
    for a in range(dens.ndim):
        hi = [slice(None)] * dens.ndim
        lo = [slice(None)] * dens.ndim
        hi[a] = slice(1, None)
        lo[a] = slice(None, -1)
        hi, lo = tuple(hi), tuple(lo)
        h = spacing[a]
        flux = 0.5 * (dens[hi] + dens[lo]) * (u[hi] - u[lo]) / h
        out[lo] -= flux / h
        out[hi] += flux / h
    return out


def _hj_rhs(dens: np.ndarray, u: np.ndarray, spacing):
    grad = discrete_gradient(u, spacing)
    drho = -_div_flux(dens, u, spacing) + dens * u
    du = -0.5 * (u**2 + np.sum(grad**2, axis=-1))
    return drho, du


def hj_geodesic_step(
    rho: GridMeasure, pot: PotentialField, dt: float
) -> tuple[GridMeasure, PotentialField]:
    """One Heun (explicit RK2) step of the geodesic system.

    d rho/dt = -div(rho grad u) + rho u,  du/dt = -(|u|^2 + |grad u|^2)/2,
    with no-flux boundary.  The returned field carries the centered-difference
    gradient of the updated u.  Negative dt integrates backwards.
    """
    dens, u = rho.values, pot.u
    spacing = rho.spacing
    gmax = float(np.max(np.abs(pot.grad_u)))
    if gmax > 0 and abs(dt) > 0.5 * min(spacing) / gmax:
        raise RuntimeError(
            f"time step {dt} violates the transport stability bound "
            f"{0.5 * min(spacing) / gmax}"
        )
    d1r, d1u = _hj_rhs(dens, u, spacing)
    d2r, d2u = _hj_rhs(dens + dt * d1r, u + dt * d1u, spacing)
    dens_new = dens + dt / 2 * (d1r + d2r)
    u_new = u + dt / 2 * (d1u + d2u)
    if not (np.all(np.isfinite(dens_new)) and np.all(np.isfinite(u_new))):
        raise RuntimeError("Hamilton-Jacobi step blew up (pre-caustic horizon exceeded)")
    dens_new = np.maximum(dens_new, 0.0)
    return rho.with_values(dens_new), PotentialField.from_u(u_new, spacing)


def hj_evolve(
    rho: GridMeasure, pot: PotentialField, t_end: float, dt: float
) -> tuple[GridMeasure, PotentialField]:
    """Repeatedly apply hj_geodesic_step up to |t_end| (sign gives direction)."""
    n = max(1, int(round(abs(t_end) / abs(dt))))
    step = t_end / n
    for _ in range(n):
        rho, pot = hj_geodesic_step(rho, pot, step)
    return rho, pot


def _field_interpolator(rho: GridMeasure, values: np.ndarray):
    axes = rho.axes()
    clipped_axes = [(ax[0], ax[-1]) for ax in axes]
    itp = RegularGridInterpolator(axes, values, bounds_error=False, fill_value=None)

    def f(pts):
        pts = np.clip(
            pts,
            [lo for lo, _ in clipped_axes],
            [hi for _, hi in clipped_axes],
        )
        return itp(pts)

    return f


def direction_invariance_check(
    rho: GridMeasure,
    pot: PotentialField,
    t_end: float,
    dt: float,
    n_samples: int = 64,
    eps_rel: float = 1e-8,
) -> float:
    """Max angular drift of grad u / |grad u| along characteristics x' = grad u.

    Along the Hamilton-Jacobi evolution the normalized gradient is conserved
    on each characteristic; the returned deviation (radians) should vanish at
    second order in dt for smooth fields.  Characteristics that enter the
    region |grad u| < eps_rel * max|grad u| are skipped (and counted in a
    logged event).
    """
    gmag0 = np.sqrt(np.sum(pot.grad_u**2, axis=-1))
    eps = eps_rel * float(gmag0.max())
    # seed characteristics at the cells with the strongest field
    flat = np.argsort(gmag0.ravel())[::-1][:n_samples]
    idx = np.unravel_index(flat, rho.shape)
    centers = rho.axes()
    pts = np.stack([centers[a][idx[a]] for a in range(rho.dim)], axis=-1).astype(float)
    keep = gmag0[idx] >= eps
    pts = pts[keep]
    if len(pts) == 0:
        raise ValueError("no sample points with |grad u| above threshold")

    def grad_at(rho_f, pot_f, p):
        comps = [_field_interpolator(rho_f, pot_f.grad_u[..., a])(p) for a in range(rho.dim)]
        return np.stack(comps, axis=-1)

    g0 = grad_at(rho, pot, pts)
    dir0 = g0 / np.linalg.norm(g0, axis=-1, keepdims=True)

    n_steps = max(1, int(round(t_end / dt)))
    step = t_end / n_steps
    max_dev = 0.0
    skipped = 0
    alive = np.ones(len(pts), dtype=bool)
    for _ in range(n_steps):
        g_here = grad_at(rho, pot, pts)
        rho_next, pot_next = hj_geodesic_step(rho, pot, step)
        pred = pts + step * g_here
        g_pred = grad_at(rho_next, pot_next, pred)
        pts = pts + step / 2 * (g_here + g_pred)
        rho, pot = rho_next, pot_next

        g = grad_at(rho, pot, pts)
        mag = np.linalg.norm(g, axis=-1)
        newly_dead = alive & (mag < eps)
        skipped += int(newly_dead.sum())
        alive &= ~newly_dead
        if not alive.any():
            break
        cosang = np.sum(g[alive] * dir0[alive], axis=-1) / mag[alive]
        dev = float(np.max(np.arccos(np.clip(cosang, -1.0, 1.0))))
        max_dev = max(max_dev, dev)
    if skipped:
        logger.info("direction check skipped %d stalled characteristics", skipped)
    return max_dev


# ---------------------------------------------------------------------------
# internal-energy Hessian


@dataclass(frozen=True)
class InternalEnergySpec:
    """Internal energy density E with its first two derivatives."""

    name: str
    E: Callable[[np.ndarray], np.ndarray]
    dE: Callable[[np.ndarray], np.ndarray]
    d2E: Callable[[np.ndarray], np.ndarray]

    def P(self, r):
        return self.dE(r) * r - self.E(r)

    def P2(self, r):
        return self.d2E(r) * r**2 - self.dE(r) * r + self.E(r)

    def Q(self, r):
        return self.dE(r) * r

    def Q2(self, r):
        return self.d2E(r) * r**2 + self.dE(r) * r

    def total(self, rho: GridMeasure) -> float:
        """The functional value int E(rho) dx."""
        return float(np.sum(self.E(rho.values)) * rho.cell_volume)


def quadratic_energy() -> InternalEnergySpec:
    return InternalEnergySpec("quadratic", lambda r: r**2 / 2, lambda r: r, lambda r: np.ones_like(r))


def cubic_energy() -> InternalEnergySpec:
    return InternalEnergySpec("cubic", lambda r: r**3, lambda r: 3 * r**2, lambda r: 6 * r)


def boltzmann_energy() -> InternalEnergySpec:
    return InternalEnergySpec(
        "boltzmann",
        lambda r: r * np.log(r) - r,
        lambda r: np.log(r),
        lambda r: 1.0 / r,
    )


def _second_derivative(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Centered second difference with mirror (zero-slope) ghost cells."""
    up = np.concatenate(
        [
            np.take(u, [0], axis=axis),
            u,
            np.take(u, [-1], axis=axis),
        ],
        axis=axis,
    )
    n = u.shape[axis]
    hi = np.take(up, range(2, n + 2), axis=axis)
    mid = np.take(up, range(1, n + 1), axis=axis)
    lo = np.take(up, range(0, n), axis=axis)
    return (hi - 2 * mid + lo) / h**2


def hessian_internal_energy(
    rho: GridMeasure, pot: PotentialField, spec: InternalEnergySpec
) -> float:
    """Closed-form Hessian quadratic form of the internal energy at (rho, u).

    Evaluates int { P G2(u) + P2 (Lap u)^2 - (2 P2 + P) u Lap u
    + (Q2 - Q/2 - P2) |grad u|^2 + (Q2 - Q/2) u^2 } dx with
    G2(u) = sum of squared second derivatives, using centered stencils with
    zero-slope ghost closure at the no-flux boundary.
    """
    r = rho.values
    u = pot.u
    spacing = rho.spacing
    dim = rho.dim

    d2 = [_second_derivative(u, a, spacing[a]) for a in range(dim)]
    lap = sum(d2)
    gamma2 = sum(d**2 for d in d2)
    if dim == 2:
        dxy = discrete_gradient(discrete_gradient(u, spacing)[..., 0], spacing)[..., 1]
        gamma2 = gamma2 + 2 * dxy**2
    grad_sq = np.sum(pot.grad_u**2, axis=-1)

    P, P2, Q, Q2 = spec.P(r), spec.P2(r), spec.Q(r), spec.Q2(r)
    integrand = (
        P * gamma2
        + P2 * lap**2
        - (2 * P2 + P) * u * lap
        + (Q2 - 0.5 * Q - P2) * grad_sq
        + (Q2 - 0.5 * Q) * u**2
    )
    return float(integrand.sum() * rho.cell_volume)


def hessian_finite_difference(
    rho: GridMeasure,
    pot: PotentialField,
    spec: InternalEnergySpec,
    dt: float = 1e-3,
    substeps: int = 8,
) -> float:
    """Second difference of the functional along the geodesic evolution.

    Oracle (E(rho_{+dt}) - 2 E(rho_0) + E(rho_{-dt})) / dt^2 with the two
    neighbor states produced by forward/backward Hamilton-Jacobi evolution.
    """
    rho_p, _ = hj_evolve(rho, pot, dt, dt / substeps)
    rho_m, _ = hj_evolve(rho, pot, -dt, dt / substeps)
    e0 = spec.total(rho)
    return (spec.total(rho_p) - 2 * e0 + spec.total(rho_m)) / dt**2
