"""Deterministic tick loop: sensing, strategy steps, message bus, motion.

Tick order: build the neighbor graph, deliver last tick's messages, sense,
step every robot's strategy in id order, apply the avoidance override,
integrate motion, accumulate metrics, check convergence.  Messages sent
during tick t reach every robot within communication range of the sender
at tick t, at tick t+1.  Everything is a pure function of (config,
strategy, seed).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .arena import ConfigError, World, ZONE_A, ZONE_B, build_world, zone_broadcast_mask
from .behaviors import control_all, integrate_and_resolve
from .config import SimConfig
from .metrics import MetricsAccumulator
from .sensing import _pairwise, ground_all, light_all, proximity_all
from .strategies import (
    DOL,
    HONEYBEE,
    SAMPLE as SAMPLE_STATE,
    STRATEGIES,
    UNDECIDED,
    dol_tick,
    honeybee_tick,
    init_robot,
    stigmergy_tick,
    uses_stigmergy,
)
from .trajlog import TrajectoryWriter
from .vstig import StigStore

NO_WINNER = "none"

_OPINION_CODE = {UNDECIDED: 0, ZONE_A: 1, ZONE_B: 2}
_CODE_OPINION = {v: k for k, v in _OPINION_CODE.items()}

PLACEMENT_ATTEMPTS = 100_000


class PlacementError(RuntimeError):
    """Raised when N robots cannot be placed overlap-free in the Nest."""


@dataclass(frozen=True)
class TickFrame:
    """Immutable snapshot of one step: poses plus in-flight message count."""

    tick: int
    poses: np.ndarray
    in_flight: int


@dataclass
class RunResult:
    converged: bool
    winner: str
    convergence_time: float
    ticks: int
    metrics: dict

    def to_json_dict(self, config: SimConfig, strategy: str, seed: int, trajectory: str | None = None) -> dict:
        return {
            "schema_version": 1,
            "strategy": strategy,
            "seed": seed,
            "n_robots": config.n_robots,
            "comm_range": config.world.comm_range,
            "config": config.to_dict(),
            "converged": self.converged,
            "winner": self.winner,
            "convergence_time": self.convergence_time,
            "ticks": self.ticks,
            "trajectory": trajectory,
            "metrics": self.metrics,
        }


def _hex_lattice(x0, x1, y0, y1, spacing):
    pts = []
    col_pitch = spacing * math.sqrt(3.0) / 2.0
    n_cols = int((x1 - x0) / col_pitch) + 1
    for col in range(n_cols):
        x = x0 + col * col_pitch
        if x > x1 + 1e-12:
            break
        y = y0 + (spacing / 2.0 if col % 2 else 0.0)
        while y <= y1 + 1e-12:
            pts.append((x, y))
            y += spacing
    return pts


def place_robots(world: World, n: int, rng: np.random.Generator) -> np.ndarray:
    """Overlap-free initial poses: Gaussian in the Nest, lattice fallback.

    Centers are constrained to the Nest rectangle (bodies may overhang the
    zone boundaries, which are not walls).  Dense swarms that defeat
    rejection sampling fall back to a jittered hexagonal lattice around the
    Nest center.
    """
    cfg = world.config
    r = cfg.robot_radius
    x0 = max(world.nest.x0, r)
    x1 = min(world.nest.x1, cfg.arena_width - r)
    y0, y1 = r, cfg.arena_height - r
    if x1 <= x0 or y1 <= y0:
        raise PlacementError("nest too small for the robot radius")
    cx, cy = world.nest.center
    sx, sy = world.nest.width / 4.0, world.nest.height / 4.0
    min_d = 2.0 * r

    placed = np.empty((0, 2))
    for _ in range(PLACEMENT_ATTEMPTS):
        if len(placed) >= n:
            break
        x = rng.normal(cx, sx)
        y = rng.normal(cy, sy)
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            continue
        if len(placed) and np.min(np.hypot(placed[:, 0] - x, placed[:, 1] - y)) < min_d:
            continue
        placed = np.vstack([placed, [x, y]])

    if len(placed) < n:
        # Binary-search the widest lattice spacing that still fits n sites.
        lo, hi = min_d, max(x1 - x0, y1 - y0) + min_d
        if len(_hex_lattice(x0, x1, y0, y1, lo)) < n:
            raise PlacementError(f"cannot place {n} robots in the nest")
        for _ in range(40):
            mid = (lo + hi) / 2.0
            if len(_hex_lattice(x0, x1, y0, y1, mid)) >= n:
                lo = mid
            else:
                hi = mid
        pts = np.array(_hex_lattice(x0, x1, y0, y1, lo))
        order = np.lexsort((pts[:, 1], pts[:, 0], np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)))
        pts = pts[order[:n]]
        jitter = min(0.45 * (lo - min_d), 0.01)
        if jitter > 0:
            pts = pts + rng.uniform(-jitter, jitter, pts.shape)
        placed = np.clip(pts, [x0, y0], [x1, y1])

    headings = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([placed[:n], headings])


class Simulation:
    """One seeded run; all mutable state lives here."""

    def __init__(self, config: SimConfig, strategy: str, seed: int):
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}; pick one of {', '.join(STRATEGIES)}")
        if config.n_robots < 2:
            raise ConfigError("need at least 2 robots")
        if strategy == DOL and config.n_robots < 3:
            raise ConfigError("division of labor needs at least 3 robots")
        self.config = config
        self.strategy = strategy
        self.seed = seed
        # The run seed owns all randomness: tiles first, placement second.
        self.world = build_world(dataclasses.replace(config.world, rng_seed=seed))
        self.robots = [init_robot(strategy, i, config.n_robots) for i in range(config.n_robots)]
        self.stores = [StigStore(i) for i in range(config.n_robots)] if uses_stigmergy(strategy) else None
        rng = np.random.default_rng([seed, 1])
        self.poses = place_robots(self.world, config.n_robots, rng)
        self.tick = 0
        self.max_ticks = config.world.ticks
        self.converged_tick: int | None = None
        self._pending: list[list] = [[] for _ in range(config.n_robots)]
        self._requests = np.zeros(config.n_robots, dtype=np.int64)
        self._last_ca = np.zeros(config.n_robots, dtype=bool)
        self._ground_zero = np.zeros((config.n_robots, 4))
        self._in_zone_zero = np.zeros(config.n_robots, dtype=bool)
        self._opinions = np.array([_OPINION_CODE[r.opinion] for r in self.robots], dtype=np.int8)
        self.messages_sent = 0
        self.messages_delivered = 0
        self.acc = MetricsAccumulator(
            config.n_robots, config.world.arena_width, config.world.arena_height, config.world.dt, config.metrics
        )
        self.acc.start(self.poses)
        self._trajectory: TrajectoryWriter | None = None

    def record_trajectory(self, path) -> None:
        self._trajectory = TrajectoryWriter(path, self.config.n_robots, self.config.world.dt)
        self._trajectory.append(self.poses, np.zeros(self.config.n_robots, dtype=np.uint8))

    def frame(self) -> TickFrame:
        return TickFrame(self.tick, self.poses.copy(), sum(len(m) for m in self._pending))

    def step(self) -> None:
        cfg = self.config
        world = self.world
        dt = cfg.world.dt
        poses = self.poses

        pair_cache = _pairwise(poses)
        adjacency = pair_cache[1] <= cfg.world.comm_range
        np.fill_diagonal(adjacency, False)

        inboxes, self._pending = self._pending, [[] for _ in range(cfg.n_robots)]
        if self.stores is not None:
            for rid, inbox in enumerate(inboxes):
                store = self.stores[rid]
                for entry in inbox:
                    store.on_receive(entry)
                self.messages_delivered += len(inbox)

        prox = proximity_all(world, poses, pair_cache)
        light = light_all(world, poses)
        zones = zone_broadcast_mask(world, poses)
        # Ground sensing only matters to robots currently in a sampling state.
        ground = self._ground_zero
        in_zone = self._in_zone_zero
        sampling = [i for i, r in enumerate(self.robots) if r.fsm == SAMPLE_STATE]
        if sampling:
            g, z = ground_all(world, poses[sampling])
            ground = ground.copy()
            in_zone = in_zone.copy()
            ground[sampling] = g
            in_zone[sampling] = z

        outgoing: list[list] = []
        requests = self._requests
        sparams = cfg.strategy
        last_ca = self._last_ca
        if self.strategy == HONEYBEE:
            for i, state in enumerate(self.robots):
                req, outbox = honeybee_tick(
                    state, int(zones[i]), ground[i], bool(in_zone[i]), inboxes[i], sparams, dt, bool(last_ca[i])
                )
                requests[i] = req
                outgoing.append(outbox)
                self._opinions[i] = _OPINION_CODE[state.opinion]
            self.messages_delivered += sum(len(b) for b in inboxes)
        else:
            tick_fn = stigmergy_tick if self.strategy != DOL else dol_tick
            for i, state in enumerate(self.robots):
                requests[i] = tick_fn(
                    state, int(zones[i]), ground[i], bool(in_zone[i]), self.stores[i], sparams, dt, bool(last_ca[i])
                )
                self._opinions[i] = _OPINION_CODE[state.opinion]
            outgoing = [store.drain() for store in self.stores]

        body_vel, ca = control_all(requests, prox, light, cfg.control)
        self._last_ca = ca
        new_poses = integrate_and_resolve(poses, body_vel, dt, world, cfg.control)

        self.acc.step(poses, new_poses, ca.astype(np.float64), in_window=True)

        # Queue this tick's broadcasts for next-tick delivery to the robots
        # that are in range right now.
        for sender, batch in enumerate(outgoing):
            if not batch:
                continue
            self.messages_sent += len(batch)
            for receiver in np.nonzero(adjacency[sender])[0]:
                self._pending[receiver].extend(batch)

        self.poses = new_poses
        self.tick += 1
        if self._trajectory is not None:
            self._trajectory.append(new_poses, ca.astype(np.uint8))
        if self.converged_tick is None and self._check_convergence() != NO_WINNER:
            self.converged_tick = self.tick

    def _check_convergence(self) -> str:
        first = self._opinions[0]
        if first == 0 or not (self._opinions == first).all():
            return NO_WINNER
        return _CODE_OPINION[int(first)]

    def detect_convergence(self) -> str:
        return self._check_convergence()

    def run(self) -> RunResult:
        try:
            while self.tick < self.max_ticks and self.converged_tick is None:
                self.step()
        finally:
            if self._trajectory is not None:
                self._trajectory.close()
        return self.result()

    def result(self) -> RunResult:
        cfg = self.config
        converged = self.converged_tick is not None
        conflicts = [s.conflict_count for s in self.stores] if self.stores else [0] * cfg.n_robots
        metrics = self.acc.finalize_and_normalize(1.0)
        metrics.update(
            {
                "window": [0.0, 100.0],
                "conflicts_per_robot": conflicts,
                "mean_conflicts": float(np.mean(conflicts)),
                "messages_sent": self.messages_sent,
                "messages_delivered": self.messages_delivered,
            }
        )
        return RunResult(
            converged=converged,
            winner=self._check_convergence() if converged else NO_WINNER,
            convergence_time=(self.converged_tick * cfg.world.dt) if converged else cfg.world.timeout,
            ticks=self.tick,
            metrics=metrics,
        )


def init_run(config: SimConfig, strategy: str, seed: int) -> Simulation:
    return Simulation(config, strategy, seed)


def step(sim: Simulation) -> Simulation:
    sim.step()
    return sim


def detect_convergence(sim: Simulation) -> str:
    return sim.detect_convergence()


def run(config: SimConfig, strategy: str, seed: int, trajectory_path=None) -> RunResult:
    sim = Simulation(config, strategy, seed)
    if trajectory_path is not None:
        sim.record_trajectory(trajectory_path)
    return sim.run()
