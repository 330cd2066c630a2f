import numpy as np
import pytest

from gridnav.waypoint_select import (
    Superpixel,
    frontier_mask,
    goal_waypoint,
    select_fbe_waypoint,
    select_orp_waypoint,
    select_pixel_waypoint,
    select_superpixel_waypoint,
    slic_partition,
)
from helpers import (
    oracle_fbe,
    oracle_frontier_cells,
    oracle_orp,
    oracle_pixel,
    oracle_superpixel,
)


def random_map(rng, max_side=16):
    height = int(rng.integers(4, max_side + 1))
    width = int(rng.integers(4, max_side + 1))
    navigable = rng.random((height, width)) < 0.8
    if not navigable.any():
        navigable[0, 0] = True
    values = np.round(rng.random((height, width)), 3)  # rounded to force ties
    explored = rng.random((height, width)) < 0.5
    return values, navigable, explored


class TestSlicPartition:
    def test_uniform_map_seed_geometry(self):
        navigable = np.ones((96, 96), dtype=bool)
        sps = slic_partition(np.zeros((96, 96)), navigable, region_size=48)
        assert len(sps) == 4
        sizes = sorted(len(sp.cells) for sp in sps)
        assert sum(sizes) == 96 * 96
        assert sizes[0] >= 96 * 96 // 4 - 200  # near-square quarters

    def test_single_navigable_cell(self):
        navigable = np.zeros((8, 8), dtype=bool)
        navigable[3, 4] = True
        sps = slic_partition(np.zeros((8, 8)), navigable, region_size=4)
        assert len(sps) == 1
        assert sps[0].cells == [(3, 4)]

    def test_no_navigable_cells_rejected(self):
        with pytest.raises(ValueError):
            slic_partition(np.zeros((4, 4)), np.zeros((4, 4), dtype=bool), 4)

    def test_region_size_validated(self):
        with pytest.raises(ValueError):
            slic_partition(np.zeros((4, 4)), np.ones((4, 4), dtype=bool), 1)

    def test_partition_covers_navigable_exactly_once(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            values, navigable, _ = random_map(rng)
            sps = slic_partition(values, navigable, region_size=5)
            seen = set()
            for sp in sps:
                for cell in sp.cells:
                    assert cell not in seen
                    seen.add(cell)
            assert seen == {tuple(c) for c in np.argwhere(navigable)}

    def test_clusters_connected(self):
        rng = np.random.default_rng(43)
        values, navigable, _ = random_map(rng)
        for sp in slic_partition(values, navigable, region_size=5):
            cells = set(sp.cells)
            stack = [sp.cells[0]]
            reached = {sp.cells[0]}
            while stack:
                r, c = stack.pop()
                for nxt in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if nxt in cells and nxt not in reached:
                        reached.add(nxt)
                        stack.append(nxt)
            assert reached == cells

    def test_value_edge_alignment(self):
        # Two-valued map split left/right with region_size = half-width:
        # the cluster boundary lands on the value edge.
        values = np.zeros((16, 16))
        values[:, 8:] = 1.0
        navigable = np.ones((16, 16), dtype=bool)
        sps = slic_partition(values, navigable, region_size=8, compactness=1.0)
        for sp in sps:
            cols = {c for _, c in sp.cells}
            assert not (cols & set(range(8)) and cols & set(range(8, 16)))


class TestSelection:
    def make(self, id_, cells, mean):
        rows = [r for r, _ in cells]
        cols = [c for _, c in cells]
        return Superpixel(id=id_, cells=cells, mean_value=mean,
                          centroid=(sum(rows) / len(rows), sum(cols) / len(cols)))

    def test_argmax_mean(self):
        a = self.make(0, [(0, 0), (0, 1)], 0.9)
        b = self.make(1, [(5, 5)], 0.2)
        assert select_superpixel_waypoint([a, b]).cell == (0, 0)

    def test_tie_breaks_to_lower_id(self):
        a = self.make(0, [(0, 0)], 0.5)
        b = self.make(1, [(5, 5)], 0.5)
        assert select_superpixel_waypoint([b, a]).cell == (0, 0)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            select_superpixel_waypoint([])

    def test_affine_rescale_invariance(self):
        rng = np.random.default_rng(47)
        sps = [self.make(i, [(i, j) for j in range(3)], float(rng.random()))
               for i in range(5)]
        base = select_superpixel_waypoint(sps).cell
        scaled = [Superpixel(sp.id, sp.cells, 0.2 + 3.0 * sp.mean_value,
                             sp.centroid) for sp in sps]
        assert select_superpixel_waypoint(scaled).cell == base


class TestFrontier:
    def test_single_frontier_cell(self):
        navigable = np.ones((4, 4), dtype=bool)
        explored = np.zeros((4, 4), dtype=bool)
        explored[0, 0] = True
        wp = select_fbe_waypoint(np.zeros((4, 4)), explored, navigable)
        assert wp.cell == (0, 0)

    def test_higher_value_frontier_wins(self):
        navigable = np.ones((1, 4), dtype=bool)
        explored = np.array([[True, True, False, False]])
        values = np.array([[0.3, 0.7, 0.0, 0.0]])
        wp = select_fbe_waypoint(values, explored, navigable)
        assert wp.cell == (0, 1)

    def test_fully_explored_returns_none(self):
        navigable = np.ones((3, 3), dtype=bool)
        explored = np.ones((3, 3), dtype=bool)
        assert select_fbe_waypoint(np.zeros((3, 3)), explored, navigable) is None

    def test_frontier_mask_matches_oracle(self):
        rng = np.random.default_rng(53)
        for _ in range(20):
            _, navigable, explored = random_map(rng, max_side=10)
            mask = frontier_mask(explored, navigable)
            assert {tuple(c) for c in np.argwhere(mask)} == \
                set(oracle_frontier_cells(explored, navigable))


class TestPixel:
    def test_unique_max(self):
        values = np.zeros((3, 3))
        values[2, 1] = 0.9
        assert select_pixel_waypoint(values, np.ones((3, 3), bool)).cell == (2, 1)

    def test_all_equal_first_navigable(self):
        navigable = np.ones((3, 3), dtype=bool)
        navigable[0, 0] = False
        wp = select_pixel_waypoint(np.full((3, 3), 0.5), navigable)
        assert wp.cell == (0, 1)


class TestGoalWaypoint:
    def test_two_by_two_centroid_snap(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[4:6, 4:6] = True
        wp = goal_waypoint(mask, np.ones((10, 10), dtype=bool))
        assert wp.cell == (4, 4)  # centroid (4.5, 4.5), row-major snap

    def test_single_cell(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[7, 2] = True
        assert goal_waypoint(mask, np.ones((10, 10), bool)).cell == (7, 2)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            goal_waypoint(np.zeros((4, 4), dtype=bool), np.ones((4, 4), bool))

    def test_snaps_to_navigable(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[5, 5] = True
        navigable = np.zeros((10, 10), dtype=bool)
        navigable[5, 7] = True
        navigable[1, 1] = True
        assert goal_waypoint(mask, navigable).cell == (5, 7)


def test_all_strategies_match_brute_force_oracles():
    # 50 random maps at most 16x16: exact agreement with exhaustive scans.
    rng = np.random.default_rng(59)
    for _ in range(50):
        values, navigable, explored = random_map(rng)
        assert select_pixel_waypoint(values, navigable).cell == \
            oracle_pixel(values, navigable)
        wp = select_fbe_waypoint(values, explored, navigable)
        expected = oracle_fbe(values, explored, navigable)
        assert (wp.cell if wp else None) == expected
        sps = slic_partition(values, navigable, region_size=5)
        assert select_superpixel_waypoint(sps).cell == \
            oracle_superpixel(sps, values)
        assert select_orp_waypoint(sps, values).cell == oracle_orp(sps, values)
