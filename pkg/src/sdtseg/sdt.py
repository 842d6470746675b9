"""Exact Euclidean signed distance transform and mask recovery.

The transform follows the zero-boundary convention: boundary voxels of the
mask (foreground voxels with a 6-connected background neighbor, the grid
border counting as background) carry exactly 0, other voxels carry the
Euclidean distance to that boundary set, positive inside and negative
outside. Distances are in voxel units unless a per-axis sampling is given.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from .errors import DegenerateInputError
from .volume import Mask, Volume, VolumeKind, _check_geometry, _freeze

_INF = np.inf


@dataclass(frozen=True)
class SDTVolume:
    """Signed distances per voxel; same layout conventions as Volume."""

    data: np.ndarray
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_geometry(self.shape, self.spacing)
        data = np.asarray(self.data, dtype=np.float64).ravel()
        if data.size != prod(self.shape):
            raise ValueError(f"data length {data.size} does not match shape {self.shape}")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def grid(self) -> np.ndarray:
        nx, ny, nz = self.shape
        return self.data.reshape(nz, ny, nx)

    def to_volume(self) -> Volume:
        return Volume(self.data, self.shape, self.spacing, VolumeKind.DISTANCE,
                      self.affine)

    @classmethod
    def from_volume(cls, v: Volume) -> "SDTVolume":
        return cls(v.data, v.shape, v.spacing, v.affine)


def _dt1d_sq(f: np.ndarray, step: float) -> np.ndarray:
    """1D squared distance transform under lower-envelope parabolas.

    Given per-position parabola offsets f[q], returns
    d[x] = min_q (step*(x-q))^2 + f[q]. Exact: with step 1 and integer f the
    outputs are integer-valued floats.
    """
    n = f.shape[0]
    fl = f.tolist()
    inf = float("inf")
    sites = [i for i in range(n) if fl[i] != inf]
    if not sites:
        return np.full(n, _INF)
    step2 = step * step
    m = len(sites)
    v = [0] * m           # parabola sites on the lower envelope
    z = [0.0] * (m + 1)   # envelope breakpoints
    k = 0
    v[0] = sites[0]
    z[0] = -inf
    z[1] = inf
    for q in sites[1:]:
        gq = fl[q] + step2 * q * q
        while True:
            vk = v[k]
            s = (gq - (fl[vk] + step2 * vk * vk)) / (2.0 * step2 * (q - vk))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = inf
    out = [0.0] * n
    k = 0
    for x in range(n):
        while z[k + 1] < x:
            k += 1
        dx = step * (x - v[k])
        out[x] = dx * dx + fl[v[k]]
    return np.asarray(out)


def _edt_sq_grid(fg: np.ndarray, sampling=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Exact squared EDT to the True voxels of fg (indexed [z, y, x]).

    sampling is (sx, sy, sz) physical step per axis. Three separable passes;
    results are exact, and integer-valued when sampling is all ones.
    """
    if not fg.any():
        raise DegenerateInputError("no foreground: mask has no 1-voxels")
    sx, sy, sz = sampling
    d = np.where(fg, 0.0, _INF)
    nz, ny, nx = d.shape
    for iz in range(nz):
        for iy in range(ny):
            line = d[iz, iy, :]
            if np.isfinite(line).any():
                d[iz, iy, :] = _dt1d_sq(line, sx)
    for iz in range(nz):
        for ix in range(nx):
            d[iz, :, ix] = _dt1d_sq(d[iz, :, ix], sy)
    for iy in range(ny):
        for ix in range(nx):
            d[:, iy, ix] = _dt1d_sq(d[:, iy, ix], sz)
    return d


def edt_squared(foreground: Mask) -> Volume:
    """Squared Euclidean distance (voxel units) to the nearest 1-voxel."""
    d = _edt_sq_grid(foreground.grid.astype(bool))
    return Volume.from_grid(d, foreground.spacing, VolumeKind.DISTANCE,
                            foreground.affine)


def boundary_voxels(mask: Mask) -> Mask:
    """Foreground voxels with at least one 6-connected background neighbor.

    Voxels on the grid border count as adjacent to background.
    """
    g = mask.grid.astype(bool)
    padded = np.pad(g, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1, 1:-1] & padded[2:, 1:-1, 1:-1]
        & padded[1:-1, :-2, 1:-1] & padded[1:-1, 2:, 1:-1]
        & padded[1:-1, 1:-1, :-2] & padded[1:-1, 1:-1, 2:]
    )
    return Mask.from_grid((g & ~interior).astype(np.uint8), mask.spacing, mask.affine)


def signed_distance(mask: Mask) -> SDTVolume:
    """Signed Euclidean distance to the mask's boundary voxel set.

    Positive inside the mask, negative outside, exactly zero on boundary
    voxels, so thresholding at zero recovers the mask.
    """
    g = mask.grid.astype(bool)
    if not g.any() or g.all():
        raise DegenerateInputError("degenerate mask: needs both 1- and 0-voxels")
    bd = boundary_voxels(mask).grid.astype(bool)
    dist = np.sqrt(_edt_sq_grid(bd))
    signed = np.where(g, dist, -dist)
    return SDTVolume(signed.ravel(), mask.shape, mask.spacing, mask.affine)


def threshold_to_mask(s, tau: float = 0.0) -> Mask:
    """Binarize at tau: 1 where value >= tau, else 0.

    Accepts an SDTVolume or any real-valued Volume (e.g. an upsampled
    prediction). Raising tau shrinks the recovered mask, which is the
    adjustable-inclusion knob of the recovery step.
    """
    out = (s.data >= tau).astype(np.uint8)
    return Mask(out, s.shape, s.spacing, getattr(s, "affine", None))
