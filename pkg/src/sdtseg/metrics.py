"""Overlap and surface-distance metrics between binary masks.

Surfaces are the 6-connected boundary voxel sets (grid border counts as
background); distances are Euclidean in millimeters using the voxel spacing.
ASSD is the mean of the pooled symmetric distance list; HD95 is the larger
of the two directed 95th percentiles, with percentiles linearly
interpolated between order statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .sdt import _edt_sq_grid, boundary_voxels
from .volume import Mask, require_same_geometry


@dataclass(frozen=True)
class MetricsReport:
    dsc: float
    assd_mm: float
    hd95_mm: float
    n_surface_pred: int
    n_surface_ref: int


def dice(a: Mask, b: Mask) -> float:
    """2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""
    require_same_geometry(a, b)
    ga = a.grid.astype(bool)
    gb = b.grid.astype(bool)
    denom = int(ga.sum()) + int(gb.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((ga & gb).sum()) / denom


def surface_distances(a: Mask, b: Mask) -> tuple[np.ndarray, np.ndarray]:
    """Directed nearest-surface distances in mm, both directions.

    Returns (distances from each boundary voxel of a to the boundary of b,
    and vice versa).
    """
    require_same_geometry(a, b)
    if not a.data.any() or not b.data.any():
        raise DegenerateInputError("undefined surface distance: empty mask")
    surf_a = boundary_voxels(a).grid.astype(bool)
    surf_b = boundary_voxels(b).grid.astype(bool)
    d_to_b = np.sqrt(_edt_sq_grid(surf_b, sampling=a.spacing))
    d_to_a = np.sqrt(_edt_sq_grid(surf_a, sampling=a.spacing))
    return d_to_b[surf_a], d_to_a[surf_b]


def assd(a: Mask, b: Mask) -> float:
    ab, ba = surface_distances(a, b)
    # summed per direction first, so the result is exactly symmetric in (a, b)
    return float((ab.sum() + ba.sum()) / (ab.size + ba.size))


def hd95(a: Mask, b: Mask) -> float:
    ab, ba = surface_distances(a, b)
    return max(float(np.percentile(ab, 95)), float(np.percentile(ba, 95)))


def evaluate_pair(pred: Mask, ref: Mask) -> MetricsReport:
    """All three metrics for one (prediction, reference) pair."""
    ab, ba = surface_distances(pred, ref)
    return MetricsReport(
        dsc=dice(pred, ref),
        assd_mm=float((ab.sum() + ba.sum()) / (ab.size + ba.size)),
        hd95_mm=max(float(np.percentile(ab, 95)), float(np.percentile(ba, 95))),
        n_surface_pred=int(ab.size),
        n_surface_ref=int(ba.size),
    )
