"""Shared helpers: random grids and brute-force oracles.

The oracles here deliberately avoid the library's own algorithms: distance
scans are O(n^2) over explicit coordinate lists, connectivity uses BFS
flood fill. Tests compare the fast implementations against these.
"""

from collections import deque

import numpy as np

from sdtseg.volume import Mask


def random_mask(rng, shape, p=0.5, nondegenerate=False):
    """Random binary mask with foreground probability p; shape is (nx, ny, nz)."""
    nx, ny, nz = shape
    while True:
        g = (rng.random((nz, ny, nx)) < p).astype(np.uint8)
        if not nondegenerate:
            return Mask.from_grid(g, (1.0, 1.0, 1.0))
        if g.any() and not g.all():
            return Mask.from_grid(g, (1.0, 1.0, 1.0))


def sphere_mask(n, radius, center=None, spacing=(1.0, 1.0, 1.0)):
    if center is None:
        center = ((n - 1) / 2.0,) * 3
    cx, cy, cz = center
    zz, yy, xx = np.meshgrid(*[np.arange(n)] * 3, indexing="ij")
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 + (zz - cz) ** 2 <= radius ** 2
    return Mask.from_grid(inside.astype(np.uint8), spacing)


def brute_sq_distance_to_set(sites_grid, sampling=(1.0, 1.0, 1.0)):
    """Squared distance from every voxel to the nearest True voxel, O(n*k) scan."""
    nz, ny, nx = sites_grid.shape
    sx, sy, sz = sampling
    sites = np.argwhere(sites_grid)  # (k, 3) in (z, y, x)
    zz, yy, xx = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx),
                             indexing="ij")
    coords = np.stack([zz.ravel(), yy.ravel(), xx.ravel()], axis=1)
    scale = np.array([sz, sy, sx])
    diff = (coords[:, None, :] - sites[None, :, :]) * scale
    d2 = (diff ** 2).sum(axis=2).min(axis=1)
    return d2.reshape(nz, ny, nx)


def brute_boundary(mask_grid):
    """Foreground voxels with a 6-neighbor that is background or off-grid."""
    g = mask_grid.astype(bool)
    nz, ny, nx = g.shape
    out = np.zeros_like(g)
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if not g[z, y, x]:
                    continue
                for dz, dy, dx in ((1, 0, 0), (-1, 0, 0), (0, 1, 0),
                                   (0, -1, 0), (0, 0, 1), (0, 0, -1)):
                    zz, yy, xx = z + dz, y + dy, x + dx
                    if not (0 <= zz < nz and 0 <= yy < ny and 0 <= xx < nx):
                        out[z, y, x] = True
                        break
                    if not g[zz, yy, xx]:
                        out[z, y, x] = True
                        break
    return out


def _neighbors(connectivity):
    offs = []
    for dz in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dz == dy == dx == 0:
                    continue
                if connectivity == 6 and abs(dz) + abs(dy) + abs(dx) != 1:
                    continue
                offs.append((dz, dy, dx))
    return offs


def flood_components(grid, connectivity):
    """BFS connected-component labeling of the True voxels."""
    g = grid.astype(bool)
    nz, ny, nx = g.shape
    labels = np.zeros(g.shape, dtype=np.int32)
    offs = _neighbors(connectivity)
    current = 0
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if not g[z, y, x] or labels[z, y, x]:
                    continue
                current += 1
                queue = deque([(z, y, x)])
                labels[z, y, x] = current
                while queue:
                    cz, cy, cx = queue.popleft()
                    for dz, dy, dx in offs:
                        zz, yy, xx = cz + dz, cy + dy, cx + dx
                        if 0 <= zz < nz and 0 <= yy < ny and 0 <= xx < nx \
                                and g[zz, yy, xx] and not labels[zz, yy, xx]:
                            labels[zz, yy, xx] = current
                            queue.append((zz, yy, xx))
    return labels, current
