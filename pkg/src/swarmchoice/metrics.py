"""Run metrics: avoidance time, conflicts, stagnation and movement grids.

The spatial grids bin the arena into fixed-size cells.  Stagnation
accumulates the time a robot spends in one cell beyond a threshold; the
movement grid keeps the running mean of per-step displacement vectors,
binned by the cell the step started in.  Both can be restricted to a
window given as percentages of the run length; the stagnation residence
tracker always runs over the whole run so that adjacent windows add up
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trajlog import TrajectoryReader

STAGNATION_TIME = "time"  # accumulate seconds beyond the threshold
STAGNATION_EVENTS = "events"  # count threshold crossings instead


@dataclass
class MetricsParams:
    cell_size: float = 0.2
    stagnation_threshold: float = 1.0  # seconds a robot may sit in one cell
    stagnation_mode: str = STAGNATION_TIME

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.stagnation_threshold < 0:
            raise ValueError("stagnation_threshold must be >= 0")
        if self.stagnation_mode not in (STAGNATION_TIME, STAGNATION_EVENTS):
            raise ValueError("stagnation_mode must be 'time' or 'events'")


def grid_shape(width: float, height: float, cell_size: float) -> tuple[int, int]:
    return math.ceil(width / cell_size - 1e-9), math.ceil(height / cell_size - 1e-9)


def window_bounds(window: tuple[float, float], steps: int) -> tuple[int, int]:
    """Half-open step-index range covered by a [start%, end%] window."""
    lo = int(math.floor(window[0] * steps / 100.0 + 1e-9))
    hi = int(math.floor(window[1] * steps / 100.0 + 1e-9))
    return max(lo, 0), min(hi, steps)


class MetricsAccumulator:
    """Owned by a single run loop (or a replay); never shared."""

    def __init__(self, n_robots: int, width: float, height: float, dt: float, params: MetricsParams):
        self.n = n_robots
        self.dt = dt
        self.params = params
        self.shape = grid_shape(width, height, params.cell_size)
        self._ny = self.shape[1]
        self.ca_time = np.zeros(n_robots)
        self.stagnation = np.zeros(self.shape)
        self.move_sum = np.zeros((*self.shape, 2))
        self.move_count = np.zeros(self.shape, dtype=np.int64)
        self._cell = np.zeros(n_robots, dtype=np.int64)
        self._residence = np.zeros(n_robots)
        self._started = False

    def _flat_cells(self, poses: np.ndarray) -> np.ndarray:
        c = self.params.cell_size
        ix = np.minimum((poses[:, 0] / c).astype(np.int64), self.shape[0] - 1)
        iy = np.minimum((poses[:, 1] / c).astype(np.int64), self.shape[1] - 1)
        return np.maximum(ix, 0) * self._ny + np.maximum(iy, 0)

    def start(self, initial_poses: np.ndarray) -> None:
        self._cell = self._flat_cells(initial_poses)
        self._residence[:] = 0.0
        self._started = True

    def accumulate_ca_time(self, ca_flags: np.ndarray) -> None:
        self.ca_time += self.dt * ca_flags

    def accumulate_movement(self, prev_poses: np.ndarray, new_poses: np.ndarray, in_window: bool) -> None:
        if not in_window:
            return
        cells = self._flat_cells(prev_poses)
        disp = new_poses[:, :2] - prev_poses[:, :2]
        np.add.at(self.move_sum.reshape(-1, 2), cells, disp)
        np.add.at(self.move_count.reshape(-1), cells, 1)

    def accumulate_stagnation(self, new_poses: np.ndarray, in_window: bool) -> None:
        cells = self._flat_cells(new_poses)
        same = cells == self._cell
        self._residence = np.where(same, self._residence + self.dt, 0.0)
        if in_window:
            thresh = self.params.stagnation_threshold
            over = same & (self._residence > thresh)
            if self.params.stagnation_mode == STAGNATION_TIME:
                if over.any():
                    np.add.at(self.stagnation.reshape(-1), cells[over], self.dt)
            else:
                crossed = over & (self._residence - self.dt <= thresh)
                if crossed.any():
                    np.add.at(self.stagnation.reshape(-1), cells[crossed], 1.0)
        self._cell = cells

    def step(self, prev_poses: np.ndarray, new_poses: np.ndarray, ca_flags: np.ndarray, in_window: bool) -> None:
        if not self._started:
            raise RuntimeError("call start() with the initial poses first")
        self.accumulate_ca_time(ca_flags)
        self.accumulate_movement(prev_poses, new_poses, in_window)
        self.accumulate_stagnation(new_poses, in_window)

    def movement_mean(self) -> np.ndarray:
        count = np.maximum(self.move_count, 1)[..., None]
        return np.where(self.move_count[..., None] > 0, self.move_sum / count, 0.0)

    def finalize_and_normalize(self, norm_const: float = 1.0) -> dict:
        """Serializable snapshot; stagnation divided by the given constant."""
        if norm_const == 0:
            raise ValueError("normalization constant must be nonzero")
        mean_move = self.movement_mean()
        return {
            "grid_cell_size": self.params.cell_size,
            "grid_shape": list(self.shape),
            "stagnation_threshold": self.params.stagnation_threshold,
            "stagnation_mode": self.params.stagnation_mode,
            "stagnation_normalization": norm_const,
            "ca_time_per_robot": self.ca_time.tolist(),
            "mean_ca_time": float(np.mean(self.ca_time)),
            "stagnation_grid": (self.stagnation / norm_const).reshape(-1).tolist(),
            "movement_mean_dx": mean_move[..., 0].reshape(-1).tolist(),
            "movement_mean_dy": mean_move[..., 1].reshape(-1).tolist(),
            "movement_count": self.move_count.reshape(-1).tolist(),
        }


def replay(
    path,
    width: float,
    height: float,
    params: MetricsParams,
    window: tuple[float, float] = (0.0, 100.0),
) -> MetricsAccumulator:
    """Recompute the accumulator from a trajectory log, windowed by run length."""
    reader = TrajectoryReader(path)
    lo, hi = window_bounds(window, reader.steps)
    acc = MetricsAccumulator(reader.n, width, height, reader.dt, params)
    prev = None
    for step_idx, (poses, flags) in enumerate(reader, start=-1):
        if prev is None:
            acc.start(poses)
        else:
            acc.step(prev, poses, flags.astype(np.float64), lo <= step_idx < hi)
        prev = poses.copy()
    return acc
