"""Core measure and field containers on uniform rectilinear grids.

Densities are stored cell-centered; a measure's mass is ``sum(values) * cell_volume``.
All containers are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when two grid quantities with incompatible layouts are combined."""


def _as_tuple(x, n=None, kind=float):
    t = tuple(kind(v) for v in (x if isinstance(x, Iterable) else (x,)))
    if n is not None and len(t) != n:
        raise ValueError(f"expected {n} entries, got {len(t)}")
    return t


@dataclass(frozen=True)
class GridMeasure:
    """Nonnegative density sampled on a uniform 1D or 2D grid."""

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        shape = _as_tuple(self.shape, kind=int)
        dim = len(shape)
        if dim not in (1, 2):
            raise ValueError(f"only 1D and 2D grids are supported, got dim={dim}")
        spacing = _as_tuple(self.spacing, dim)
        origin = _as_tuple(self.origin, dim)
        if any(n < 1 for n in shape) or any(h <= 0 for h in spacing):
            raise ValueError("shape entries must be >= 1 and spacing positive")
        vals = np.asarray(self.values, dtype=float).reshape(shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if vals.min() < 0:
            raise ValueError(f"density values must be nonnegative, min={vals.min()}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_mass", float(vals.sum() * self.cell_volume))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def mass(self) -> float:
        return self._mass

    def axes(self) -> list[np.ndarray]:
        """Cell-center coordinates along each axis."""
        return [
            self.origin[a] + (np.arange(self.shape[a]) + 0.5) * self.spacing[a]
            for a in range(self.dim)
        ]

    def same_grid(self, other: "GridMeasure") -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.spacing, other.spacing, rtol=1e-12, atol=0.0)
            and np.allclose(self.origin, other.origin, rtol=1e-12, atol=1e-12)
        )

    def require_same_grid(self, other: "GridMeasure") -> None:
        if not self.same_grid(other):
            raise GridMismatchError(
                f"grid mismatch: {self.shape}/{self.spacing}/{self.origin} vs "
                f"{other.shape}/{other.spacing}/{other.origin}"
            )

    def with_values(self, values: np.ndarray) -> "GridMeasure":
        return GridMeasure(self.shape, self.spacing, self.origin, values)

    def zeros_like(self) -> "GridMeasure":
        return self.with_values(np.zeros(self.shape))

    def scaled(self, factor: float) -> "GridMeasure":
        return self.with_values(self.values * float(factor))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "shape": list(self.shape),
            "spacing": list(self.spacing),
            "origin": list(self.origin),
            "values": [float(v) for v in self.values.ravel(order="C")],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridMeasure":
        shape = tuple(int(n) for n in d["shape"])
        if int(d.get("dim", len(shape))) != len(shape):
            raise ValueError("inconsistent dim/shape in grid measure record")
        vals = np.asarray(d["values"], dtype=float).reshape(shape, order="C")
        return cls(shape, tuple(d["spacing"]), tuple(d["origin"]), vals)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "GridMeasure":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class DiracMeasure:
    """Finite list of (position, charge) atoms."""

    atoms: tuple[tuple[tuple[float, ...], float], ...]

    def __post_init__(self):
        norm = []
        for pos, k in self.atoms:
            pos = _as_tuple(pos)
            k = float(k)
            if k < 0:
                raise ValueError(f"atom charge must be nonnegative, got {k}")
            norm.append((pos, k))
        object.__setattr__(self, "atoms", tuple(norm))

    @property
    def mass(self) -> float:
        return sum(k for _, k in self.atoms)

    def normalized(self) -> "DiracMeasure":
        """Drop zero-charge atoms."""
        return DiracMeasure(tuple((p, k) for p, k in self.atoms if k > 0))

    def rasterize(self, like: GridMeasure, sigma: float | None = None) -> GridMeasure:
        """Gaussian-blob rasterization on the grid of ``like``.

        Each atom becomes a discrete Gaussian of width ``sigma`` (default twice
        the cell spacing), renormalized so the cell sum reproduces the charge.
        """
        if sigma is None:
            sigma = 2.0 * max(like.spacing)
        vals = np.zeros(like.shape)
        axes = like.axes()
        for pos, k in self.atoms:
            if k == 0.0:
                continue
            if len(pos) != like.dim:
                raise GridMismatchError("atom dimension does not match grid")
            bump = np.exp(-((axes[0] - pos[0]) ** 2) / (2 * sigma**2))
            if like.dim == 2:
                bump = bump[:, None] * np.exp(
                    -((axes[1] - pos[1]) ** 2) / (2 * sigma**2)
                )
            total = bump.sum() * like.cell_volume
            if total <= 0:
                raise ValueError("atom rasterizes to zero mass (outside the grid?)")
            vals += k * bump / total
        return like.with_values(vals)

    def to_dict(self) -> dict:
        return {"atoms": [{"x": list(p), "k": k} for p, k in self.atoms]}

    @classmethod
    def from_dict(cls, d: dict) -> "DiracMeasure":
        return cls(tuple((tuple(a["x"]), float(a["k"])) for a in d["atoms"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "DiracMeasure":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PotentialField:
    """Driving potential couple (u, grad u) sampled on a grid.

    ``grad_u`` is independent data with shape ``(*shape, dim)``; it need not be
    the discrete gradient of ``u``.  ``check_consistency`` asserts it is, for
    fields meant to represent smooth collocated potentials.
    """

    u: np.ndarray
    grad_u: np.ndarray
    layout: str = "collocated"

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        g = np.asarray(self.grad_u, dtype=float)
        if g.shape[:-1] != u.shape or g.shape[-1] != u.ndim:
            raise ValueError(
                f"grad_u shape {g.shape} incompatible with u shape {u.shape}"
            )
        if self.layout not in ("collocated", "staggered"):
            raise ValueError(f"unknown layout {self.layout!r}")
        u = u.copy()
        g = g.copy()
        u.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "grad_u", g)

    @property
    def dim(self) -> int:
        return self.u.ndim

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "PotentialField":
        shape = tuple(shape)
        return cls(np.zeros(shape), np.zeros(shape + (len(shape),)))

    @classmethod
    def from_u(cls, u: np.ndarray, spacing: Sequence[float]) -> "PotentialField":
        """Build a collocated field with grad_u = centered differences of u."""
        u = np.asarray(u, dtype=float)
        return cls(u, discrete_gradient(u, spacing))

    def check_consistency(self, spacing: Sequence[float], tol: float) -> bool:
        """True if grad_u matches the centered-difference gradient of u."""
        if self.layout != "collocated":
            return False
        err = np.max(np.abs(self.grad_u - discrete_gradient(self.u, spacing)))
        return bool(err <= tol)


def discrete_gradient(u: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Centered-difference gradient, one-sided at the boundary."""
    u = np.asarray(u, dtype=float)
    g = np.empty(u.shape + (u.ndim,))
    for a in range(u.ndim):
        g[..., a] = np.gradient(u, spacing[a], axis=a, edge_order=2)
    return g


@dataclass(frozen=True)
class SpaceTimePath:
    """Time-indexed sequence of (density, potential) frames with step energies.

    ``times`` has N+1 increasing entries from 0 to 1; ``step_energy[j]`` is the
    squared field norm on interval j, so the total path energy is
    ``sum(step_energy * diff(times))``.
    """

    times: np.ndarray
    frames: tuple[tuple[GridMeasure, PotentialField], ...]
    step_energy: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        e = np.asarray(self.step_energy, dtype=float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing with >= 2 entries")
        if len(self.frames) != len(t):
            raise ValueError("one frame per time is required")
        if len(e) != len(t) - 1:
            raise ValueError("one step energy per interval is required")
        if e.min() < -1e-12:
            raise ValueError("step energies must be nonnegative")
        t = t.copy()
        e = np.maximum(e, 0.0).copy()
        t.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "step_energy", e)

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.step_energy * np.diff(self.times)))

    def masses(self) -> np.ndarray:
        return np.array([rho.mass for rho, _ in self.frames])

    def save(self, directory: str | Path) -> None:
        """Serialize as a directory of frame JSONs plus an index file."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for j, (rho, pot) in enumerate(self.frames):
            rec = rho.to_dict()
            rec["u"] = [float(v) for v in pot.u.ravel(order="C")]
            rec["grad_u"] = [float(v) for v in pot.grad_u.ravel(order="C")]
            rec["layout"] = pot.layout
            (directory / f"frame_{j:04d}.json").write_text(json.dumps(rec))
        index = {
            "times": [float(t) for t in self.times],
            "step_energy": [float(e) for e in self.step_energy],
            "frames": [f"frame_{j:04d}.json" for j in range(len(self.frames))],
        }
        (directory / "index.json").write_text(json.dumps(index))

    @classmethod
    def load(cls, directory: str | Path) -> "SpaceTimePath":
        directory = Path(directory)
        index = json.loads((directory / "index.json").read_text())
        frames = []
        for name in index["frames"]:
            rec = json.loads((directory / name).read_text())
            rho = GridMeasure.from_dict(rec)
            shape = rho.shape
            u = np.asarray(rec["u"], dtype=float).reshape(shape)
            g = np.asarray(rec["grad_u"], dtype=float).reshape(shape + (rho.dim,))
            frames.append((rho, PotentialField(u, g, rec.get("layout", "collocated"))))
        return cls(np.asarray(index["times"]), tuple(frames), np.asarray(index["step_energy"]))


def uniform_grid(shape, extent, origin=None) -> GridMeasure:
    """Zero measure on a grid covering a box of the given extent."""
    shape = _as_tuple(shape, kind=int)
    extent = _as_tuple(extent, len(shape))
    origin = _as_tuple(origin, len(shape)) if origin is not None else (0.0,) * len(shape)
    spacing = tuple(L / n for L, n in zip(extent, shape))
    return GridMeasure(shape, spacing, origin, np.zeros(shape))


def gaussian_blob(like: GridMeasure, center, mass: float, sigma: float | None = None) -> GridMeasure:
    """Single Gaussian blob of prescribed mass, normalized on the grid."""
    center = _as_tuple(center, like.dim)
    return DiracMeasure(((center, float(mass)),)).rasterize(like, sigma=sigma)
