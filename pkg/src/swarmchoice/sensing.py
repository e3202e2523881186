"""Sensor models (ground, proximity, light) and the communication graph.

All sensor functions are pure over a pose snapshot.  Bearings are
body-frame angles; sensor k (of 8) points at k * 45 degrees, k = 0 being
straight ahead.  Each proximity/light sensor owns the half-open 45-degree
cone centered on its bearing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arena import World, ZONE_A, ZONE_B

N_GROUND = 4
N_RING = 8  # proximity and light sensors

SENSOR_BEARINGS = np.arange(N_RING) * (2.0 * np.pi / N_RING)
SENSOR_COS = np.cos(SENSOR_BEARINGS)
SENSOR_SIN = np.sin(SENSOR_BEARINGS)

# Ground sensor offsets (front/back/left/right), as a fraction of the radius.
GROUND_OFFSET_FRAC = 0.7
_GROUND_DIRS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@dataclass
class SensorReadings:
    ground: np.ndarray  # (4,) values in {0, 1}
    ground_in_zone: bool  # all four offsets landed on quality tiles
    proximity: np.ndarray  # (8,) values in [0, 1]
    light: np.ndarray  # (8,) values >= 0


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


def _cone_index(rel_bearing):
    """Sensor owning a body-frame bearing: half-open cones [-22.5, 22.5) deg."""
    return np.floor((rel_bearing + np.pi / N_RING) / (2.0 * np.pi / N_RING)).astype(int) % N_RING


def ground_points(poses: np.ndarray, radius: float) -> np.ndarray:
    """World positions of the 4 ground sensors for every pose, shape (N, 4, 2)."""
    poses = np.atleast_2d(poses)
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    rot = np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)  # (N,2,2)
    offsets = GROUND_OFFSET_FRAC * radius * _GROUND_DIRS  # (4,2)
    world_off = np.einsum("nij,kj->nki", rot, offsets)
    return poses[:, None, :2] + world_off


def ground_all(world: World, poses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ground readings for all robots: (N,4) colours and (N,) in-zone flags.

    Offsets landing in the Nest (no tiles) read 0 and clear the flag.
    """
    pts = ground_points(poses, world.config.robot_radius)
    x, y = pts[..., 0], pts[..., 1]
    readings = np.zeros(x.shape, dtype=np.float64)
    tiled = np.zeros(x.shape, dtype=bool)
    for label in (ZONE_A, ZONE_B):
        rect = world.zone_rect(label)
        if label == ZONE_A:
            inside = x >= rect.x0
        else:
            inside = x < rect.x1
        if not inside.any():
            continue
        grid = world.tiles[label]
        t = world.config.tile_size
        col = np.minimum(((x - rect.x0) / t).astype(int), grid.shape[0] - 1)
        row = np.minimum((np.maximum(y - rect.y0, 0.0) / t).astype(int), grid.shape[1] - 1)
        col = np.clip(col, 0, grid.shape[0] - 1)
        readings = np.where(inside, grid[col, row], readings)
        tiled |= inside
    return readings, tiled.all(axis=1)


def read_ground(world: World, pose) -> tuple[np.ndarray, bool]:
    """Four ground lookups at body-frame offsets; returns (values, in_zone)."""
    readings, in_zone = ground_all(world, np.asarray(pose, dtype=float).reshape(1, 3))
    return readings[0], bool(in_zone[0])


def _pairwise(poses: np.ndarray):
    xy = poses[:, :2]
    d = xy[None, :, :] - xy[:, None, :]  # d[i, j] = p_j - p_i
    dist = np.hypot(d[..., 0], d[..., 1])
    return d, dist


def proximity_all(world: World, poses: np.ndarray, pair_cache=None) -> np.ndarray:
    """Proximity readings for all robots, shape (N, 8).

    Each sensor reports 1 - gap/prox_range for the nearest obstacle surface
    (robot or wall) whose direction falls in its cone; 0 if none in range.
    """
    cfg = world.config
    n = len(poses)
    r, d_max = cfg.robot_radius, cfg.prox_range
    heading = poses[:, 2]
    readings = np.zeros((n, 8))

    if n > 1:
        d, dist = pair_cache if pair_cache is not None else _pairwise(poses)
        gap = dist - 2.0 * r
        cand = (gap < d_max) & ~np.eye(n, dtype=bool)
        if cand.any():
            ii, jj = np.nonzero(cand)
            bearing = np.arctan2(d[ii, jj, 1], d[ii, jj, 0])
            k = _cone_index(wrap_angle(bearing - heading[ii]))
            vals = np.clip(1.0 - gap[ii, jj] / d_max, 0.0, 1.0)
            np.maximum.at(readings, (ii, k), vals)

    # Walls: nearest surface point along the outward normal.
    x, y = poses[:, 0], poses[:, 1]
    wall_gap = np.stack([x - r, cfg.arena_width - x - r, y - r, cfg.arena_height - y - r], axis=1)
    wall_bearing = np.array([np.pi, 0.0, -np.pi / 2.0, np.pi / 2.0])
    cand = wall_gap < d_max
    if cand.any():
        ii, ww = np.nonzero(cand)
        k = _cone_index(wrap_angle(wall_bearing[ww] - heading[ii]))
        vals = np.clip(1.0 - wall_gap[ii, ww] / d_max, 0.0, 1.0)
        np.maximum.at(readings, (ii, k), vals)
    return readings


def read_proximity(world: World, all_poses: np.ndarray, robot_id: int) -> np.ndarray:
    return proximity_all(world, np.asarray(all_poses, dtype=float))[robot_id]


def light_all(world: World, poses: np.ndarray) -> np.ndarray:
    """Light readings for all robots, shape (N, 8).

    Intensity follows an inverse-square law of the distance to the light,
    foreshortened by the cosine between each sensor's facing and the light
    bearing (negative cosines clamp to zero) so the ring encodes direction.
    """
    cfg = world.config
    to_light = world.light_pos[None, :] - poses[:, :2]
    x = np.hypot(to_light[:, 0], to_light[:, 1])
    x = np.maximum(x, cfg.robot_radius)  # degenerate: robot at the light
    base = (cfg.light_intensity / x) ** 2
    light_bearing = np.arctan2(to_light[:, 1], to_light[:, 0])
    facing = poses[:, 2, None] + SENSOR_BEARINGS[None, :]
    cos_off = np.cos(facing - light_bearing[:, None])
    return base[:, None] * np.maximum(cos_off, 0.0)


def read_light(world: World, pose) -> np.ndarray:
    return light_all(world, np.asarray(pose, dtype=float).reshape(1, 3))[0]


class NeighborGraph:
    """Symmetric, irreflexive adjacency over robot ids (edge iff dist <= R)."""

    def __init__(self, adjacency: np.ndarray):
        self.adjacency = adjacency

    def neighbors(self, robot_id: int) -> set[int]:
        return set(np.nonzero(self.adjacency[robot_id])[0].tolist())

    def __len__(self) -> int:
        return len(self.adjacency)


def neighbor_adjacency(poses: np.ndarray, comm_range: float, dist: np.ndarray | None = None) -> np.ndarray:
    if dist is None:
        _, dist = _pairwise(np.asarray(poses, dtype=float))
    adj = dist <= comm_range
    np.fill_diagonal(adj, False)
    return adj


def neighbor_graph(all_poses: np.ndarray, comm_range: float) -> NeighborGraph:
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    return NeighborGraph(neighbor_adjacency(np.asarray(all_poses, dtype=float), comm_range))
