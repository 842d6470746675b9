import numpy as np
import pytest

from sdtseg.errors import DegenerateInputError, GeometryError
from sdtseg.volume import (Mask, Volume, VolumeKind, downsample2, downsample2_mask,
                           normalize_intensities, upsample2_trilinear)


def test_volume_invariants():
    with pytest.raises(GeometryError):
        Volume(np.zeros(7), (2, 2, 2), (1, 1, 1))
    with pytest.raises(GeometryError):
        Volume(np.zeros(8), (2, 2, 2), (1, 0, 1))
    with pytest.raises(ValueError):
        Volume(np.array([0.5, 1.5] * 4), (2, 2, 2), (1, 1, 1), VolumeKind.PROBABILITY)
    with pytest.raises(ValueError):
        Mask(np.array([0, 2] * 4), (2, 2, 2), (1, 1, 1))


def test_volume_data_read_only():
    v = Volume(np.zeros(8), (2, 2, 2), (1, 1, 1))
    with pytest.raises(ValueError):
        v.data[0] = 1.0


def test_grid_layout_x_fastest():
    # flat index = x + nx*y + nx*ny*z
    data = np.arange(24, dtype=float)
    v = Volume(data, (2, 3, 4), (1, 1, 1))
    assert v.grid.shape == (4, 3, 2)
    assert v.grid[0, 0, 1] == 1
    assert v.grid[0, 1, 0] == 2
    assert v.grid[1, 0, 0] == 6


def test_normalize_endpoints():
    v = Volume(np.array([2.0, 4.0, 6.0] * 4), (3, 2, 2), (1, 1, 1))
    n = normalize_intensities(v)
    assert sorted(set(n.data.tolist())) == [0.0, 0.5, 1.0]


def test_normalize_identity_on_unit_range():
    rng = np.random.default_rng(0)
    data = rng.random(27)
    data[0], data[1] = 0.0, 1.0
    v = Volume(data, (3, 3, 3), (1, 1, 1))
    assert np.array_equal(normalize_intensities(v).data, data)


def test_normalize_derived_values():
    v = Volume(np.array([-1.0, 0.0, 3.0] * 4), (3, 2, 2), (1, 1, 1))
    out = normalize_intensities(v)
    assert np.allclose(sorted(set(out.data.tolist())), [0.0, 0.25, 1.0])


def test_normalize_idempotent():
    rng = np.random.default_rng(1)
    v = Volume(rng.normal(3, 10, size=4 ** 3), (4, 4, 4), (1, 1, 1))
    once = normalize_intensities(v)
    twice = normalize_intensities(once)
    assert np.array_equal(once.data, twice.data)


def test_normalize_constant_raises():
    v = Volume(np.full(8, 3.0), (2, 2, 2), (1, 1, 1))
    with pytest.raises(DegenerateInputError, match="degenerate intensity range"):
        normalize_intensities(v)


def test_downsample_block_mean():
    g = np.zeros((2, 2, 2))
    g[1, :, :] = 8.0
    d = downsample2(Volume.from_grid(g, (1, 1, 1)))
    assert d.shape == (1, 1, 1)
    assert d.data[0] == 4.0


def test_downsample_constant():
    v = Volume(np.full(5 * 6 * 7, 2.5), (5, 6, 7), (1, 1, 1))
    d = downsample2(v)
    assert d.shape == (3, 3, 4)
    assert np.all(d.data == 2.5)


def test_downsample_geometry():
    v = Volume(np.zeros(5 * 4 * 4), (5, 4, 4), (1.0, 1.0, 1.0))
    d = downsample2(v)
    assert d.shape == (3, 2, 2)
    assert d.spacing == (2.0, 2.0, 2.0)
    with pytest.raises(GeometryError):
        downsample2(Volume(np.zeros(4), (1, 2, 2), (1, 1, 1)))


def test_downsample_preserves_mean_even_dims():
    rng = np.random.default_rng(2)
    v = Volume(rng.random(8 * 6 * 4), (8, 6, 4), (1, 1, 1))
    d = downsample2(v)
    assert abs(d.data.mean() - v.data.mean()) <= 1e-5 * abs(v.data.mean())


def test_downsample_mask_rebinarized():
    g = np.zeros((4, 4, 4), dtype=np.uint8)
    g[:2] = 1  # half the block rows
    m = downsample2_mask(Mask.from_grid(g, (1, 1, 1)))
    assert set(np.unique(m.data)) <= {0, 1}
    # blocks straddling the half boundary have mean 0.5 and binarize to 1
    assert m.grid[0].all() and not m.grid[1].any()


def test_upsample_ramp_midpoints():
    v = Volume(np.array([0.0, 2.0]), (2, 1, 1), (1, 1, 1))
    u = upsample2_trilinear(v, (3, 1, 1))
    assert np.array_equal(u.data, [0.0, 1.0, 2.0])
    assert u.spacing == (0.5, 0.5, 0.5)


def test_upsample_constant():
    v = Volume(np.full(27, 1.5), (3, 3, 3), (1, 1, 1))
    u = upsample2_trilinear(v, (6, 5, 6))
    assert np.all(u.data == 1.5)
    assert u.shape == (6, 5, 6)


def test_upsample_preserves_source_points():
    rng = np.random.default_rng(3)
    v = Volume(rng.random(4 ** 3), (4, 4, 4), (2, 2, 2))
    u = upsample2_trilinear(v, (8, 8, 8))
    assert np.array_equal(u.grid[::2, ::2, ::2], v.grid)


def test_upsample_convex_range():
    rng = np.random.default_rng(4)
    v = Volume(rng.normal(size=5 * 4 * 3), (5, 4, 3), (1, 1, 1))
    u = upsample2_trilinear(v, (9, 8, 5))
    assert u.data.min() >= v.data.min() - 1e-12
    assert u.data.max() <= v.data.max() + 1e-12


def test_upsample_rejects_bad_target():
    v = Volume(np.zeros(27), (3, 3, 3), (1, 1, 1))
    with pytest.raises(GeometryError):
        upsample2_trilinear(v, (7, 6, 6))


def test_down_then_up_linear_field():
    # Block-mean sampling sits half an input voxel above the grid the
    # upsampler reads it on, so a linear ramp comes back shifted by half a
    # voxel times its slope in the interior (exactly), not reproduced.
    nx = 8
    ramp = np.tile(np.arange(nx, dtype=float), (4, 4, 1))
    v = Volume.from_grid(ramp, (1, 1, 1))
    u = upsample2_trilinear(downsample2(v), v.shape)
    interior = u.grid[:, :, : nx - 1]
    assert np.allclose(interior, ramp[:, :, : nx - 1] + 0.5)
