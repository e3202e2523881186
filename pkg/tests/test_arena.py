import math

import numpy as np
import pytest

from swarmchoice.arena import (
    ConfigError,
    OutOfArenaError,
    WorldConfig,
    ZONE_A,
    ZONE_B,
    build_world,
    ground_color_at,
    tile_index,
    zone_broadcast_mask,
    zone_broadcasts_at,
)


class TestWorldConfig:
    def test_defaults_valid(self):
        WorldConfig()

    @pytest.mark.parametrize(
        "kw",
        [
            {"arena_width": 0.0},
            {"arena_height": -1.0},
            {"nest_width": 4.0},  # must be < arena_width
            {"nest_width": 0.0},
            {"fill_ratio_a": 1.5},
            {"fill_ratio_b": -0.1},
            {"tile_size": 0.0},
            {"dt": 0.0},
            {"timeout": 100.05},  # not a multiple of dt
            {"comm_range": 0.0},
            {"beacon_count_per_zone": 0},
        ],
    )
    def test_invalid_configs_rejected(self, kw):
        with pytest.raises(ConfigError):
            WorldConfig(**kw)


class TestZoneLayout:
    def test_paper_geometry(self, default_world):
        # U=4, V=4, nest 2 wide: A=[3,4], Nest=[1,3], B=[0,1], light on the A side
        w = default_world
        assert (w.zone_a.x0, w.zone_a.x1) == (3.0, 4.0)
        assert (w.nest.x0, w.nest.x1) == (1.0, 3.0)
        assert (w.zone_b.x0, w.zone_b.x1) == (0.0, 1.0)
        assert w.zone_a.height == w.zone_b.height == 4.0
        assert tuple(w.light_pos) == (4.0, 2.0)

    def test_zones_partition_arena(self, default_world):
        w = default_world
        assert w.zone_b.area + w.nest.area + w.zone_a.area == pytest.approx(16.0)
        assert w.zone_a.area == w.zone_b.area
        # no gaps/overlaps along x
        assert w.zone_b.x1 == w.nest.x0 and w.nest.x1 == w.zone_a.x0

    def test_membership_halfopen(self, default_world):
        w = default_world
        assert w.zone_label_at(3.0, 1.0) == ZONE_A
        assert w.zone_label_at(1.0, 1.0) is None
        assert w.zone_label_at(0.999, 1.0) == ZONE_B
        assert w.zone_label_at(2.0, 2.0) is None


class TestTiles:
    def test_all_white_when_ratio_one(self):
        world = build_world(WorldConfig(fill_ratio_a=1.0, rng_seed=7))
        assert world.tiles[ZONE_A].min() == 1

    def test_all_black_when_ratio_zero(self):
        world = build_world(WorldConfig(fill_ratio_b=0.0, rng_seed=7))
        assert world.tiles[ZONE_B].max() == 0

    def test_white_fraction_within_binomial_interval(self):
        # Oracle: count generated tiles; bound = 99% normal-approx binomial CI.
        world = build_world(WorldConfig(fill_ratio_a=0.9, tile_size=0.1, rng_seed=123))
        grid = world.tiles[ZONE_A]
        n = grid.size
        frac = grid.mean()
        eps = 2.576 * math.sqrt(0.9 * 0.1 / n)
        assert abs(frac - 0.9) <= eps

    def test_regeneration_bit_identical(self):
        a = build_world(WorldConfig(rng_seed=99))
        b = build_world(WorldConfig(rng_seed=99))
        assert np.array_equal(a.tiles[ZONE_A], b.tiles[ZONE_A])
        assert np.array_equal(a.tiles[ZONE_B], b.tiles[ZONE_B])

    def test_different_seed_differs(self):
        a = build_world(WorldConfig(rng_seed=1))
        b = build_world(WorldConfig(rng_seed=2))
        assert not np.array_equal(a.tiles[ZONE_A], b.tiles[ZONE_A])

    def test_grid_shape_covers_zone(self, default_world):
        # 1m x 4m zone at 0.1m tiles
        assert default_world.tiles[ZONE_A].shape == (10, 40)


class TestGroundColor:
    def test_nest_center_has_no_tile(self, default_world):
        assert ground_color_at(default_world, 2.0, 2.0) is None

    def test_all_white_zone(self):
        world = build_world(WorldConfig(fill_ratio_a=1.0, rng_seed=3))
        assert ground_color_at(world, 3.5, 1.7) == 1

    def test_known_black_tile(self):
        # Oracle: read the generated grid directly, then query that tile's center.
        world = build_world(WorldConfig(rng_seed=123))
        grid = world.tiles[ZONE_B]
        cols, rows = np.nonzero(grid == 0)
        col, row = int(cols[0]), int(rows[0])
        x = world.zone_b.x0 + (col + 0.5) * world.config.tile_size
        y = world.zone_b.y0 + (row + 0.5) * world.config.tile_size
        assert ground_color_at(world, x, y) == 0
        assert tile_index(world, ZONE_B, x, y) == (col, row)

    def test_out_of_bounds_raises(self, default_world):
        with pytest.raises(OutOfArenaError):
            ground_color_at(default_world, 4.5, 2.0)

    def test_arena_edge_clips_to_last_tile(self, default_world):
        assert ground_color_at(default_world, 4.0, 4.0) in (0, 1)


class TestBeacons:
    def test_five_per_zone_on_boundaries(self, default_world):
        beacons = default_world.beacons
        assert len(beacons) == 10
        a = [b for b in beacons if b.zone_label == ZONE_A]
        b_ = [b for b in beacons if b.zone_label == ZONE_B]
        assert len(a) == len(b_) == 5
        assert all(bc.x == 3.0 for bc in a)
        assert all(bc.x == 1.0 for bc in b_)
        # evenly spaced strip centers
        assert sorted(bc.y for bc in a) == pytest.approx([0.4, 1.2, 2.0, 2.8, 3.6])

    def test_at_beacon_position(self, default_world):
        bc = next(b for b in default_world.beacons if b.zone_label == ZONE_A)
        assert zone_broadcasts_at(default_world, bc.x, bc.y) == {ZONE_A}

    def test_nest_center_silent(self, default_world):
        assert zone_broadcasts_at(default_world, 2.0, 2.0) == set()

    def test_boundary_midway_between_beacons(self, default_world):
        # Oracle: midpoint of the first two zone-A beacons sits 0.4 m from each,
        # well under the default range.
        y_mid = (0.4 + 1.2) / 2.0
        assert math.hypot(0.0, 1.2 - y_mid) < default_world.config.beacon_range
        assert zone_broadcasts_at(default_world, 3.0, y_mid) == {ZONE_A}

    def test_zone_coverage_total(self, default_world, rng):
        # 1e4 random interior points of zone A all hear exactly {A}.
        pts = rng.uniform([3.0, 0.0], [4.0, 4.0], size=(10_000, 2))
        poses = np.column_stack([pts, np.zeros(len(pts))])
        mask = zone_broadcast_mask(default_world, poses)
        assert np.all(mask == 1)

    def test_nest_interior_silent_everywhere(self, default_world, rng):
        pts = rng.uniform([1.001, 0.0], [2.999, 4.0], size=(10_000, 2))
        poses = np.column_stack([pts, np.zeros(len(pts))])
        assert np.all(zone_broadcast_mask(default_world, poses) == 0)

    def test_mask_matches_point_queries(self, default_world, rng):
        pts = rng.uniform([0.0, 0.0], [4.0, 4.0], size=(300, 2))
        poses = np.column_stack([pts, np.zeros(len(pts))])
        mask = zone_broadcast_mask(default_world, poses)
        for (x, y), m in zip(pts, mask):
            labels = zone_broadcasts_at(default_world, x, y)
            expect = (1 if ZONE_A in labels else 0) | (2 if ZONE_B in labels else 0)
            assert m == expect

    def test_zone_oracle_flag(self):
        world = build_world(WorldConfig(zone_oracle=True))
        assert zone_broadcasts_at(world, 3.7, 0.01) == {ZONE_A}
        assert zone_broadcasts_at(world, 2.0, 2.0) == set()
        poses = np.array([[3.7, 0.01, 0.0], [2.0, 2.0, 0.0], [0.2, 3.9, 0.0]])
        assert zone_broadcast_mask(world, poses).tolist() == [1, 0, 2]
