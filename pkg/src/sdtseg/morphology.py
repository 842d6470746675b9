"""Mask post-processing: component filtering and hole filling.

Foreground uses 26-connectivity and background 6-connectivity by default,
the complementary pair that avoids topological paradoxes.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DegenerateInputError
from .volume import Mask

_STRUCTS = {
    6: ndimage.generate_binary_structure(3, 1),
    26: ndimage.generate_binary_structure(3, 3),
}


def _structure(connectivity: int) -> np.ndarray:
    if connectivity not in _STRUCTS:
        raise ConfigError(f"connectivity must be 6 or 26, got {connectivity}")
    return _STRUCTS[connectivity]


def largest_component(m: Mask, connectivity: int = 26) -> Mask:
    """Keep only the largest connected foreground component.

    Equal-sized components are broken toward the one containing the lowest
    flat index, so the result is deterministic.
    """
    g = m.grid.astype(bool)
    if not g.any():
        raise DegenerateInputError("empty mask: no components to keep")
    labels, n = ndimage.label(g, structure=_structure(connectivity))
    if n == 1:
        return m
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    candidates = np.flatnonzero(sizes == sizes.max())
    if len(candidates) == 1:
        best = int(candidates[0])
    else:
        flat = labels.ravel()
        best = int(flat[np.isin(flat, candidates).argmax()])
    keep = labels == best
    return Mask.from_grid(keep.astype(np.uint8), m.spacing, m.affine)


def fill_holes(m: Mask, connectivity: int = 6) -> Mask:
    """Fill background cavities not connected to the grid border.

    Background connectivity defaults to 6; all original foreground is
    preserved.
    """
    g = m.grid.astype(bool)
    bg = ~g
    labels, n = ndimage.label(bg, structure=_structure(connectivity))
    if n == 0:
        return m
    border_labels = np.unique(np.concatenate([
        labels[0, :, :].ravel(), labels[-1, :, :].ravel(),
        labels[:, 0, :].ravel(), labels[:, -1, :].ravel(),
        labels[:, :, 0].ravel(), labels[:, :, -1].ravel(),
    ]))
    outside = np.isin(labels, border_labels[border_labels > 0])
    filled = g | (bg & ~outside)
    return Mask.from_grid(filled.astype(np.uint8), m.spacing, m.affine)
