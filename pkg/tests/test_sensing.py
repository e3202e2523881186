import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmchoice.arena import WorldConfig, ZONE_A, build_world, ground_color_at
from swarmchoice.sensing import (
    GROUND_OFFSET_FRAC,
    SENSOR_BEARINGS,
    neighbor_graph,
    proximity_all,
    read_ground,
    read_light,
    read_proximity,
)

R_BODY = WorldConfig().robot_radius


def pose(x, y, heading=0.0):
    return np.array([x, y, heading])


class TestGround:
    def test_all_white_region(self):
        world = build_world(WorldConfig(fill_ratio_a=1.0, rng_seed=5))
        values, in_zone = read_ground(world, pose(3.5, 2.0, 0.3))
        assert values.tolist() == [1.0, 1.0, 1.0, 1.0]
        assert in_zone

    def test_nest_not_in_zone(self, default_world):
        values, in_zone = read_ground(default_world, pose(2.0, 2.0))
        assert values.tolist() == [0.0, 0.0, 0.0, 0.0]
        assert not in_zone

    def test_straddling_boundary_mixed(self, default_world):
        # Front offset in zone A, the rest in the Nest: flag false, front real.
        off = GROUND_OFFSET_FRAC * R_BODY
        p = pose(3.0 - off / 2.0, 2.0, 0.0)
        values, in_zone = read_ground(default_world, p)
        assert not in_zone
        front = ground_color_at(default_world, p[0] + off, 2.0)
        assert values[0] == front

    def test_offsets_match_per_point_lookups(self, default_world, rng):
        # Oracle: direct per-offset grid reads with explicit trig.
        off = GROUND_OFFSET_FRAC * R_BODY
        for _ in range(50):
            x = rng.uniform(3.2, 3.8)
            y = rng.uniform(0.3, 3.7)
            h = rng.uniform(0, 2 * math.pi)
            values, in_zone = read_ground(default_world, pose(x, y, h))
            assert in_zone
            expected = []
            for dx, dy in [(off, 0.0), (-off, 0.0), (0.0, off), (0.0, -off)]:
                wx = x + dx * math.cos(h) - dy * math.sin(h)
                wy = y + dx * math.sin(h) + dy * math.cos(h)
                expected.append(ground_color_at(default_world, wx, wy))
            assert values.tolist() == expected


def proximity_oracle(world, poses, i):
    """Independent cone-assignment oracle using explicit per-candidate trig."""
    cfg = world.config
    x, y, h = poses[i]
    readings = [0.0] * 8
    candidates = []
    for j, (xj, yj, _) in enumerate(poses):
        if j == i:
            continue
        dist = math.hypot(xj - x, yj - y)
        gap = dist - 2 * cfg.robot_radius
        if gap < cfg.prox_range:
            candidates.append((math.atan2(yj - y, xj - x), gap))
    walls = [
        (math.pi, x - cfg.robot_radius),
        (0.0, cfg.arena_width - x - cfg.robot_radius),
        (-math.pi / 2, y - cfg.robot_radius),
        (math.pi / 2, cfg.arena_height - y - cfg.robot_radius),
    ]
    for bearing, gap in walls:
        if gap < cfg.prox_range:
            candidates.append((bearing, gap))
    for bearing, gap in candidates:
        rel = bearing - h
        while rel <= -math.pi:
            rel += 2 * math.pi
        while rel > math.pi:
            rel -= 2 * math.pi
        k = math.floor((rel + math.pi / 8) / (math.pi / 4)) % 8
        reading = min(max(1.0 - gap / cfg.prox_range, 0.0), 1.0)
        readings[k] = max(readings[k], reading)
    return readings


class TestProximity:
    def test_isolated_robot_all_zero(self, default_world):
        poses = np.array([[2.0, 2.0, 0.7]])
        assert read_proximity(default_world, poses, 0).tolist() == [0.0] * 8

    def test_dead_ahead_half_range(self, default_world):
        gap = default_world.config.prox_range / 2.0
        poses = np.array([[2.0, 2.0, 0.0], [2.0 + 2 * R_BODY + gap, 2.0, 0.0]])
        prox = read_proximity(default_world, poses, 0)
        assert prox[0] == pytest.approx(0.5, abs=1e-12)
        assert prox[4] == 0.0
        assert prox[1:4].tolist() == [0.0] * 3

    def test_wall_touch_reads_one(self, default_world):
        poses = np.array([[R_BODY, 2.0, math.pi]])  # facing the west wall, touching
        prox = read_proximity(default_world, poses, 0)
        assert prox[0] == pytest.approx(1.0)

    def test_matches_geometric_oracle(self, default_world, rng):
        for _ in range(40):
            n = rng.integers(2, 7)
            poses = np.column_stack(
                [
                    rng.uniform(0.2, 3.8, n),
                    rng.uniform(0.2, 3.8, n),
                    rng.uniform(0, 2 * math.pi, n),
                ]
            )
            for i in range(n):
                got = read_proximity(default_world, poses, i)
                expect = proximity_oracle(default_world, poses, i)
                np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_monotone_in_distance(self, default_world):
        readings = []
        for gap_frac in (0.1, 0.3, 0.5, 0.7, 0.9, 1.1):
            gap = gap_frac * default_world.config.prox_range
            poses = np.array([[1.0, 2.0, 0.0], [1.0 + 2 * R_BODY + gap, 2.0, 0.0]])
            readings.append(read_proximity(default_world, poses, 0)[0])
        assert all(a >= b for a, b in zip(readings, readings[1:]))


class TestLight:
    def test_inverse_square_facing(self, default_world):
        # I=1, x=2, sensor facing the light
        assert read_light(default_world, pose(2.0, 2.0, 0.0))[0] == pytest.approx(0.25, rel=1e-12)

    def test_facing_away_is_zero(self, default_world):
        assert read_light(default_world, pose(2.0, 2.0, math.pi))[0] == 0.0

    def test_sixty_degrees_off(self, default_world):
        # I=1, x=1, sensor at 60 degrees off the light bearing
        got = read_light(default_world, pose(3.0, 2.0, math.pi / 3))[0]
        assert got == pytest.approx(0.5, rel=1e-12)

    def test_degenerate_at_light_clamped(self, default_world):
        vals = read_light(default_world, pose(4.0, 2.0, 0.0))
        assert np.isfinite(vals).all()

    def test_rotation_recovers_bearing(self, default_world, rng):
        # argmax sensor's world bearing stays within one sensor spacing of the
        # true light bearing, for any robot heading.
        for _ in range(60):
            x, y = rng.uniform(0.3, 3.7, 2)
            h = rng.uniform(0, 2 * math.pi)
            vals = read_light(default_world, pose(x, y, h))
            k = int(np.argmax(vals))
            world_bearing = h + SENSOR_BEARINGS[k]
            true_bearing = math.atan2(2.0 - y, 4.0 - x)
            diff = (world_bearing - true_bearing + math.pi) % (2 * math.pi) - math.pi
            assert abs(diff) <= math.pi / 8 + 1e-9


class TestNeighborGraph:
    def test_boundary_inclusive(self):
        poses = np.array([[0.0, 0.0, 0.0], [0.8, 0.0, 0.0]])
        g = neighbor_graph(poses, 0.8)
        assert g.neighbors(0) == {1}

    def test_just_outside_excluded(self):
        poses = np.array([[0.0, 0.0, 0.0], [0.8 + 1e-9, 0.0, 0.0]])
        g = neighbor_graph(poses, 0.8)
        assert g.neighbors(0) == set()

    def test_line_topology(self):
        # Oracle: pairwise distances of a 3-robot line spaced 0.9 R.
        r = 0.8
        poses = np.array([[0.0, 0.0, 0.0], [0.9 * r, 0.0, 0.0], [1.8 * r, 0.0, 0.0]])
        g = neighbor_graph(poses, r)
        assert g.neighbors(0) == {1}
        assert g.neighbors(1) == {0, 2}
        assert g.neighbors(2) == {1}

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(0, 4, allow_nan=False, allow_infinity=False),
                st.floats(0, 4, allow_nan=False, allow_infinity=False),
            ),
            min_size=2,
            max_size=12,
        ),
        st.floats(0.1, 2.0),
    )
    def test_symmetric_irreflexive(self, pts, comm_range):
        poses = np.array([[x, y, 0.0] for x, y in pts])
        adj = neighbor_graph(poses, comm_range).adjacency
        assert not adj.diagonal().any()
        assert np.array_equal(adj, adj.T)

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            neighbor_graph(np.zeros((2, 3)), 0.0)


class TestBatchConsistency:
    def test_proximity_batch_equals_per_robot(self, default_world, rng):
        n = 8
        poses = np.column_stack(
            [rng.uniform(0.2, 3.8, n), rng.uniform(0.2, 3.8, n), rng.uniform(0, 2 * math.pi, n)]
        )
        batch = proximity_all(default_world, poses)
        for i in range(n):
            np.testing.assert_array_equal(batch[i], read_proximity(default_world, poses, i))
