"""Core 3D grid types and resampling.

A volume is a flat scalar array in x-fastest order together with its grid
geometry: shape ``(nx, ny, nz)`` and voxel spacing ``(sx, sy, sz)`` in mm.
The flat layout maps to a ``[z, y, x]``-indexed numpy view via
``data.reshape(nz, ny, nx)``, which is what ``.grid`` returns.

Arrays are marked read-only on construction; operations return new objects.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import ceil, prod

import numpy as np

from .errors import DegenerateInputError, GeometryError


class VolumeKind(enum.Enum):
    INTENSITY = "intensity"
    DISTANCE = "distance"
    PROBABILITY = "probability"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _check_geometry(shape, spacing) -> None:
    if len(shape) != 3 or any(int(n) != n or n < 1 for n in shape):
        raise GeometryError(f"shape must be three positive integers, got {shape!r}")
    if len(spacing) != 3 or any(not (s > 0) for s in spacing):
        raise GeometryError(f"spacing must be three positive numbers, got {spacing!r}")


@dataclass(frozen=True)
class Volume:
    """A scalar 3D grid. ``data`` is flat, x fastest."""

    data: np.ndarray
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    kind: VolumeKind = VolumeKind.INTENSITY
    # Affine carried opaquely through file I/O, never interpreted.
    affine: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_geometry(self.shape, self.spacing)
        data = np.asarray(self.data)
        if data.ndim != 1:
            data = data.ravel()
        if data.size != prod(self.shape):
            raise GeometryError(
                f"data length {data.size} does not match shape {self.shape}"
            )
        if self.kind is VolumeKind.PROBABILITY:
            if data.size and (data.min() < 0 or data.max() > 1):
                raise ValueError("probability volume has values outside [0, 1]")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def grid(self) -> np.ndarray:
        """Read-only view indexed ``[z, y, x]``."""
        nx, ny, nz = self.shape
        return self.data.reshape(nz, ny, nx)

    @classmethod
    def from_grid(cls, grid_zyx: np.ndarray, spacing, kind=VolumeKind.INTENSITY,
                  affine=None) -> "Volume":
        nz, ny, nx = grid_zyx.shape
        return cls(np.asarray(grid_zyx).ravel(), (nx, ny, nz), tuple(spacing),
                   kind, affine)


@dataclass(frozen=True)
class Mask:
    """A binary 3D grid sharing Volume geometry."""

    data: np.ndarray
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_geometry(self.shape, self.spacing)
        data = np.asarray(self.data)
        if data.ndim != 1:
            data = data.ravel()
        if data.size != prod(self.shape):
            raise GeometryError(
                f"data length {data.size} does not match shape {self.shape}"
            )
        if not np.isin(data, (0, 1)).all():
            raise ValueError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "data", _freeze(data.astype(np.uint8)))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def grid(self) -> np.ndarray:
        nx, ny, nz = self.shape
        return self.data.reshape(nz, ny, nx)

    @classmethod
    def from_grid(cls, grid_zyx: np.ndarray, spacing, affine=None) -> "Mask":
        nz, ny, nx = grid_zyx.shape
        return cls(np.asarray(grid_zyx).ravel(), (nx, ny, nz), tuple(spacing), affine)

    def count(self) -> int:
        return int(self.data.sum())


def require_same_geometry(a, b) -> None:
    """Raise GeometryError unless a and b share shape and spacing."""
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not np.allclose(a.spacing, b.spacing, rtol=1e-5, atol=0.0):
        raise GeometryError(f"spacing mismatch: {a.spacing} vs {b.spacing}")


def normalize_intensities(v: Volume) -> Volume:
    """Affine-map intensities to [0, 1] via (x - min) / (max - min)."""
    lo = float(v.data.min())
    hi = float(v.data.max())
    if hi == lo:
        raise DegenerateInputError("degenerate intensity range: volume is constant")
    out = (v.data.astype(np.float64) - lo) / (hi - lo)
    return Volume(out, v.shape, v.spacing, VolumeKind.INTENSITY, v.affine)


def downsample2(v: Volume) -> Volume:
    """Halve each dimension by averaging 2x2x2 blocks.

    Output shape is ceil(shape / 2) and spacing doubles. Partial blocks at
    odd borders average only the voxels present, so no data is discarded.
    """
    nx, ny, nz = v.shape
    if min(nx, ny, nz) < 2:
        raise GeometryError(f"every dimension must be >= 2 to downsample, got {v.shape}")
    g = v.grid.astype(np.float64)
    oz, oy, ox = ceil(nz / 2), ceil(ny / 2), ceil(nx / 2)
    total = np.zeros((oz, oy, ox))
    count = np.zeros((oz, oy, ox))
    for dz in range(2):
        for dy in range(2):
            for dx in range(2):
                part = g[dz::2, dy::2, dx::2]
                sz, sy, sx = part.shape
                total[:sz, :sy, :sx] += part
                count[:sz, :sy, :sx] += 1
    out = total / count
    spacing = tuple(2 * s for s in v.spacing)
    return Volume.from_grid(out, spacing, v.kind, v.affine)


def downsample2_mask(m: Mask) -> Mask:
    """Block-mean downsample a mask, then re-binarize at 0.5."""
    v = Volume(m.data.astype(np.float64), m.shape, m.spacing, VolumeKind.INTENSITY)
    d = downsample2(v)
    return Mask((d.data >= 0.5).astype(np.uint8), d.shape, d.spacing, m.affine)


def _upsample_axis_coords(n_src: int, n_dst: int):
    # Target index i samples source coordinate i/2, clamped at the top edge.
    src = np.arange(n_dst) * 0.5
    src = np.minimum(src, n_src - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    frac = src - i0
    return i0, i1, frac


def upsample2_trilinear(v: Volume, target_shape) -> Volume:
    """Interpolate onto a doubled grid; spacing halves.

    Each target dimension must be 2*d - 1 or 2*d for source dimension d.
    Source grid points coincide with even target indices and keep their
    values exactly.
    """
    target_shape = tuple(int(n) for n in target_shape)
    if len(target_shape) != 3:
        raise GeometryError(f"target_shape must have three entries, got {target_shape!r}")
    for d, t in zip(v.shape, target_shape):
        if t not in (2 * d - 1, 2 * d):
            raise GeometryError(
                f"target dim {t} inconsistent with doubling of source dim {d}"
            )
    out = v.grid.astype(np.float64)
    # One linear-interpolation pass per axis; grid axes are (z, y, x).
    for axis, (n_src, n_dst) in enumerate(zip(v.shape[::-1], target_shape[::-1])):
        i0, i1, frac = _upsample_axis_coords(n_src, n_dst)
        lo = np.take(out, i0, axis=axis)
        hi = np.take(out, i1, axis=axis)
        w = frac.reshape([-1 if a == axis else 1 for a in range(3)])
        out = lo * (1.0 - w) + hi * w
    spacing = tuple(s / 2 for s in v.spacing)
    return Volume.from_grid(out, spacing, v.kind, v.affine)
