import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_partition
from oracles import brute_force_bpt, mask_area, mask_border, mask_centroid, mask_contact, mask_perimeter, masks_of, node_masks
from hiersal.exceptions import DimensionError, RangeError
from hiersal.hierarchy import (
    Partition,
    UcmHierarchy,
    build_bpt,
    extract_partition_stack,
    geometric_targets,
    initial_partition,
    is_nested,
    ucm_partition,
)
from hiersal.imgcore import rgb_to_lab


def random_lab(rng, h, w):
    return rgb_to_lab(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def check_descriptors(p: Partition):
    """Every stored region descriptor equals its pixel-mask recomputation."""
    masks = masks_of(p.labels)
    assert p.area.sum() == p.labels.size
    for i, m in enumerate(masks):
        r = p.region(i)
        assert r.area == mask_area(m)
        np.testing.assert_allclose(r.centroid, mask_centroid(m), rtol=1e-12)
        assert r.perimeter == mask_perimeter(m)
        assert r.border_len == mask_border(m) <= r.perimeter
        expected = {j: mask_contact(m, masks[j]) for j in range(len(masks)) if j != i}
        assert r.neighbor_contact == {j: c for j, c in expected.items() if c}
    assert np.array_equal(p.contact_matrix(), p.contact_matrix().T)


class TestInitialPartition:
    def test_per_pixel(self):
        p = initial_partition(np.zeros((2, 2, 3)), "per-pixel")
        assert p.n_regions == 4

    def test_uniform_flat_zone(self):
        assert initial_partition(np.zeros((2, 2, 3)), "flat-zones").n_regions == 1

    def test_two_halves(self):
        lab = np.zeros((4, 4, 3))
        lab[:, 2:] = [50, 10, -10]
        p = initial_partition(lab)
        assert p.n_regions == 2
        assert sorted(p.area.tolist()) == [8, 8]

    def test_flat_zones_are_connected_components(self):
        lab = np.zeros((3, 3, 3))
        lab[1, 1] = 1.0
        lab[0, 1] = lab[1, 0] = lab[1, 2] = lab[2, 1] = 2.0
        p = initial_partition(lab)
        # Corners share a colour and so do the arms, but none of them touch.
        assert p.n_regions == 9

    def test_descriptors(self, rng):
        for _ in range(5):
            labels = random_partition(rng, 8, 9)
            check_descriptors(Partition(labels, random_lab(rng, *labels.shape)))


class TestBpt:
    def test_single_region(self):
        h = build_bpt(initial_partition(np.zeros((3, 3, 3))))
        assert h.n_leaves == 1 and len(h.merges) == 0 and h.n_nodes == 1

    def test_near_identical_pair_merges_first(self):
        lab = np.zeros((1, 3, 3))
        lab[0, 0] = [50, 0, 0]
        lab[0, 1] = [50.5, 0, 0]
        lab[0, 2] = [90, 40, 40]
        h = build_bpt(initial_partition(lab))
        assert tuple(h.merges[0]) == (0, 1, 3)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        lab = random_lab(rng, 6, 6)
        p0 = initial_partition(lab, "per-pixel")
        h = build_bpt(p0)
        assert [tuple(m) for m in h.merges.tolist()] == brute_force_bpt(p0.labels, lab)

    def test_structure(self, rng):
        h = build_bpt(initial_partition(random_lab(rng, 7, 5), "per-pixel"))
        assert len(h.merges) == h.n_leaves - 1
        children = h.merges[:, :2].ravel()
        assert np.unique(children).size == children.size
        assert h.area[h.root] == 35
        assert (h.merges[:, 0] < h.merges[:, 1]).all()
        assert (h.merges[:, 2] == np.arange(h.n_leaves, h.n_nodes)).all()

    def test_node_descriptors_are_exact(self, rng):
        lab = random_lab(rng, 6, 7)
        h = build_bpt(initial_partition(lab, "per-pixel"))
        for node, m in enumerate(node_masks(h)):
            assert h.area[node] == mask_area(m)
            assert h.perimeter[node] == mask_perimeter(m)
            assert h.border_len[node] == mask_border(m)
            np.testing.assert_allclose(h.sum_lab[node], lab[m].sum(axis=0), rtol=1e-12, atol=1e-9)

    def test_partition_at(self, rng):
        lab = random_lab(rng, 6, 6)
        p0 = initial_partition(lab, "per-pixel")
        h = build_bpt(p0)
        assert np.array_equal(h.partition_at(36).labels, p0.labels)
        assert h.partition_at(1).n_regions == 1
        for n in (30, 17, 5):
            p = h.partition_at(n)
            assert p.n_regions == n
            check_descriptors(p)
        for bad in (0, 37):
            with pytest.raises(RangeError):
                h.partition_at(bad)

    def test_partition_regions_are_tree_nodes(self, rng):
        h = build_bpt(initial_partition(random_lab(rng, 6, 6), "per-pixel"))
        masks = node_masks(h)
        p = h.partition_at(9)
        for i, node in enumerate(p.node_ids):
            assert np.array_equal(p.labels == i, masks[node])

    def test_fig1_region_counts_nest(self, rng):
        h = build_bpt(initial_partition(random_lab(rng, 20, 20), "per-pixel"))
        stack = extract_partition_stack(h, targets=[300, 100, 30, 10, 3])
        assert [p.n_regions for p in stack] == [300, 100, 30, 10, 3]
        for fine, coarse in zip(stack, stack[1:]):
            assert is_nested(fine, coarse)

    def test_truncate(self, rng):
        h = build_bpt(initial_partition(random_lab(rng, 6, 6), "per-pixel"))
        t = h.truncate(10)
        assert t.n_leaves == 10 and len(t.merges) == 9
        for n in (10, 4, 1):
            a, b = h.partition_at(n).labels, t.partition_at(n).labels
            assert is_nested(Partition(a), Partition(b)) and is_nested(Partition(b), Partition(a))


class TestSchedule:
    def test_default_targets(self):
        assert geometric_targets(6, 100, 3) == [100, 50, 25, 12, 6, 3]

    def test_duplicates_dropped(self):
        assert geometric_targets(5, 3, 2) == [3, 2]

    def test_bad_arguments(self):
        with pytest.raises(RangeError):
            geometric_targets(1, 100, 3)
        with pytest.raises(RangeError):
            geometric_targets(4, 3, 100)

    def test_stack_clamps_to_leaves(self, rng):
        h = build_bpt(initial_partition(random_lab(rng, 5, 5), "per-pixel"))
        assert [p.n_regions for p in extract_partition_stack(h)] == [25, 12, 6, 3]


def nested_blocks(size=16):
    """Three-level label maps (16, 4 and 2 regions) and their contour strengths."""
    ys, xs = np.mgrid[0:size, 0:size]
    levels = [
        (ys // 4) * 4 + xs // 4,
        (ys // 8) * 2 + xs // 8,
        xs // 8,
    ]
    return levels, (0.3, 0.6, 1.0)


def image_ucm(size=16):
    levels, strength = nested_blocks(size)
    ucm = np.zeros((size, size))
    for lbl, s in zip(levels, strength):
        right = np.zeros_like(ucm, bool)
        right[:, :-1] = lbl[:, :-1] != lbl[:, 1:]
        down = np.zeros_like(ucm, bool)
        down[:-1] = lbl[:-1] != lbl[1:]
        ucm[right | down] = s
    return ucm


def grid_ucm(size=16):
    levels, strength = nested_blocks(size)
    g = np.zeros((2 * size + 1, 2 * size + 1))
    for lbl, s in zip(levels, strength):
        hd = lbl[:, :-1] != lbl[:, 1:]
        vd = lbl[:-1] != lbl[1:]
        g[1:-1:2, 2:-1:2][hd] = s
        g[2:-1:2, 1:-1:2][vd] = s
    return g


class TestUcm:
    @pytest.mark.parametrize("make", [image_ucm, grid_ucm])
    def test_counts(self, make):
        u = UcmHierarchy(make(), image_shape=(16, 16))
        assert ucm_partition(make(), 0.0, image_shape=(16, 16)).n_regions == 16
        assert u.partition(0.5).n_regions == 4
        assert u.partition(0.8).n_regions == 2
        assert u.partition(1.01).n_regions == 1

    def test_grid_matches_block_labels(self):
        levels, _ = nested_blocks()
        p = ucm_partition(grid_ucm(), 0.5, image_shape=(16, 16))
        assert is_nested(p, Partition(levels[1])) and is_nested(Partition(levels[1]), p)

    @pytest.mark.parametrize("make", [image_ucm, grid_ucm])
    def test_nesting(self, make):
        u = UcmHierarchy(make(), image_shape=(16, 16))
        ts = [0.0, 0.2, 0.3, 0.45, 0.6, 0.9, 1.0, 1.5]
        parts = [u.partition(t) for t in ts]
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                assert is_nested(parts[i], parts[j])
                assert parts[i].n_regions >= parts[j].n_regions

    @given(st.integers(0, 2**32 - 1))
    def test_random_ucm_nesting(self, seed):
        rng = np.random.default_rng(seed)
        ucm = rng.choice([0.0, 0.0, 0.2, 0.5, 0.7, 1.0], size=(7, 8))
        u = UcmHierarchy(ucm)
        parts = [u.partition(t) for t in (0.0, 0.3, 0.6, 0.8, 2.0)]
        for fine, coarse in zip(parts, parts[1:]):
            assert is_nested(fine, coarse)
        assert parts[-1].n_regions == 1

    def test_stack_from_ucm(self):
        u = UcmHierarchy(grid_ucm(), image_shape=(16, 16))
        stack = extract_partition_stack(u, targets=[16, 4, 2])
        assert [p.n_regions for p in stack] == [16, 4, 2]

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            UcmHierarchy(np.zeros((5, 5)), image_shape=(4, 4))

    def test_threshold_range(self):
        with pytest.raises(RangeError):
            ucm_partition(image_ucm(), -0.1)
