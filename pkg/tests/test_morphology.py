import numpy as np
import pytest

from conftest import flood_components, random_mask, sphere_mask
from sdtseg.errors import DegenerateInputError
from sdtseg.morphology import fill_holes, largest_component
from sdtseg.volume import Mask


def test_single_component_unchanged():
    m = sphere_mask(12, 4)
    assert np.array_equal(largest_component(m).data, m.data)


def test_blob_removed_against_flood_fill():
    g = sphere_mask(16, 5).grid.copy()
    g[1, 1, 1] = g[1, 1, 2] = g[1, 2, 1] = 1  # 3-voxel satellite
    m = Mask.from_grid(g, (1, 1, 1))
    out = largest_component(m)
    labels, n = flood_components(g, 26)
    sizes = [(labels == k).sum() for k in range(1, n + 1)]
    expected = labels == (int(np.argmax(sizes)) + 1)
    assert np.array_equal(out.grid.astype(bool), expected)
    assert out.count() == m.count() - 3


def test_equal_components_tie_break_lowest_flat_index():
    g = np.zeros((5, 5, 5), dtype=np.uint8)
    g[0, 0, 0] = 1
    g[4, 4, 4] = 1
    out = largest_component(Mask.from_grid(g, (1, 1, 1)))
    assert out.grid[0, 0, 0] == 1 and out.grid[4, 4, 4] == 0


def test_largest_component_empty_raises():
    with pytest.raises(DegenerateInputError):
        largest_component(Mask(np.zeros(8, dtype=np.uint8), (2, 2, 2), (1, 1, 1)))


def test_connectivity_6_vs_26():
    g = np.zeros((4, 4, 4), dtype=np.uint8)
    g[0, 0, 0] = 1
    g[1, 1, 1] = 1  # diagonal touch: one component at 26, two at 6
    g[3, 3, 3] = 1
    m = Mask.from_grid(g, (1, 1, 1))
    assert largest_component(m, connectivity=26).count() == 2
    assert largest_component(m, connectivity=6).count() == 1


def test_hollow_cube_becomes_solid():
    g = np.zeros((9, 9, 9), dtype=np.uint8)
    g[2:7, 2:7, 2:7] = 1
    g[3:6, 3:6, 3:6] = 0
    out = fill_holes(Mask.from_grid(g, (1, 1, 1)))
    assert out.count() == 5 ** 3
    assert out.grid[4, 4, 4] == 1


def test_solid_mask_unchanged():
    m = sphere_mask(12, 4)
    assert np.array_equal(fill_holes(m).data, m.data)


def test_tunnel_to_border_not_filled():
    g = np.zeros((9, 9, 9), dtype=np.uint8)
    g[2:7, 2:7, 2:7] = 1
    g[3:6, 3:6, 3:6] = 0      # cavity
    g[4, 4, 0:4] = 0          # tunnel from cavity to the x=0 face
    m = Mask.from_grid(g, (1, 1, 1))
    out = fill_holes(m)
    # the cavity drains through the tunnel, so nothing may change
    assert np.array_equal(out.data, m.data)


def test_fill_holes_empty_mask():
    m = Mask(np.zeros(27, dtype=np.uint8), (3, 3, 3), (1, 1, 1))
    assert fill_holes(m).count() == 0


def test_fill_holes_against_flood_fill_oracle():
    rng = np.random.default_rng(21)
    for _ in range(30):
        m = random_mask(rng, (6, 6, 6), p=0.55)
        out = fill_holes(m)
        bg = ~m.grid.astype(bool)
        labels, n = flood_components(bg, 6)
        border = set()
        for k in range(1, n + 1):
            comp = labels == k
            if comp[0].any() or comp[-1].any() or comp[:, 0].any() \
                    or comp[:, -1].any() or comp[:, :, 0].any() or comp[:, :, -1].any():
                border.add(k)
        expected = m.grid.astype(bool) | (bg & ~np.isin(labels, sorted(border)))
        assert np.array_equal(out.grid.astype(bool), expected)


def test_properties_idempotence_and_monotonicity():
    rng = np.random.default_rng(22)
    for _ in range(60):
        m = random_mask(rng, (6, 5, 7), p=0.5, nondegenerate=True)
        if not m.data.any():
            continue
        lc = largest_component(m)
        assert np.array_equal(largest_component(lc).data, lc.data)
        assert np.all(lc.data <= m.data)  # never adds
        fh = fill_holes(m)
        assert np.array_equal(fill_holes(fh).data, fh.data)
        assert np.all(fh.data >= m.data)  # never removes
        combo = fill_holes(largest_component(m))
        again = fill_holes(largest_component(combo))
        assert np.array_equal(combo.data, again.data)
