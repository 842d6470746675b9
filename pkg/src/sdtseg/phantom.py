"""Synthetic phantoms with analytic ground truth.

A phantom is a primitive (sphere, ellipsoid, or two-blob) rasterized by
voxel-center inclusion, plus a two-level intensity image with Gaussian
noise clipped to [0, 1]. Everything is deterministic under the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .volume import Mask, Volume, VolumeKind

PRIMITIVES = ("sphere", "ellipsoid", "two-blob")


@dataclass(frozen=True)
class PhantomSpec:
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    primitive: str = "sphere"
    centers: tuple = ()         # one (x, y, z) per blob, voxel coordinates
    radii: tuple = ()           # sphere/two-blob: scalar each; ellipsoid: (rx, ry, rz)
    fg_mean: float = 0.8
    bg_mean: float = 0.2
    noise_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.primitive not in PRIMITIVES:
            raise ConfigError(f"unknown primitive {self.primitive!r}")
        n_blobs = 2 if self.primitive == "two-blob" else 1
        if len(self.centers) != n_blobs or len(self.radii) != n_blobs:
            raise ConfigError(
                f"{self.primitive} needs {n_blobs} center(s) and radii, got "
                f"{len(self.centers)} and {len(self.radii)}"
            )
        for center, radius in zip(self.centers, self.radii):
            r = np.broadcast_to(np.asarray(radius, dtype=float), (3,))
            if (r <= 0).any():
                raise ConfigError("radii must be positive")
            c = np.asarray(center, dtype=float)
            lo = c - r
            hi = c + r
            dims = np.asarray(self.shape, dtype=float)
            if (lo < 2).any() or (hi > dims - 3).any():
                raise ConfigError(
                    f"primitive at {center} with radii {radius} does not fit "
                    f"inside {self.shape} with a 2-voxel margin"
                )


def _inside(spec: PhantomSpec) -> np.ndarray:
    nx, ny, nz = spec.shape
    zz, yy, xx = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx),
                             indexing="ij")
    inside = np.zeros((nz, ny, nx), dtype=bool)
    for center, radius in zip(spec.centers, spec.radii):
        cx, cy, cz = center
        rx, ry, rz = np.broadcast_to(np.asarray(radius, dtype=float), (3,))
        inside |= ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 \
            + ((zz - cz) / rz) ** 2 <= 1.0
    return inside


def generate(spec: PhantomSpec) -> tuple[Volume, Mask]:
    """Rasterize the primitive and synthesize its intensity image."""
    inside = _inside(spec)
    rng = np.random.default_rng(spec.seed)
    img = np.where(inside, spec.fg_mean, spec.bg_mean)
    if spec.noise_std > 0:
        img = img + rng.normal(0.0, spec.noise_std, size=inside.shape)
    img = np.clip(img, 0.0, 1.0)
    vol = Volume.from_grid(img, spec.spacing, VolumeKind.INTENSITY)
    mask = Mask.from_grid(inside.astype(np.uint8), spec.spacing)
    return vol, mask


def corrupt_rater(truth: Mask, p: float, q: float, seed: int) -> Mask:
    """Simulate a rater with sensitivity p and specificity q.

    Each foreground voxel survives with probability p; each background
    voxel flips on with probability 1 - q, independently.
    """
    if not (0 < p <= 1) or not (0 < q <= 1):
        raise ConfigError(f"p and q must lie in (0, 1], got p={p}, q={q}")
    rng = np.random.default_rng(seed)
    g = truth.grid.astype(bool)
    u = rng.random(g.shape)
    noisy = np.where(g, u < p, u >= q)
    return Mask.from_grid(noisy.astype(np.uint8), truth.spacing, truth.affine)
