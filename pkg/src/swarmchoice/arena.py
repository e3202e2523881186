"""Static world model: arena rectangle, zones, tiled ground, light, beacons.

The arena is split along x into three vertical bands: zone B on the left,
the Nest in the middle, zone A on the right (the light sits past zone A's
far edge).  Each zone's floor is a seeded Bernoulli tiling of white/black
tiles whose white fraction is the zone quality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ZONE_A = "A"
ZONE_B = "B"

# Tile colours.
BLACK = 0
WHITE = 1


class ConfigError(ValueError):
    """Raised for invalid world or run configuration."""


class OutOfArenaError(ValueError):
    """Raised when a queried point lies outside the arena."""


@dataclass
class WorldConfig:
    """All world-level tunables.  Distances in meters, times in seconds."""

    arena_width: float = 4.0
    arena_height: float = 4.0
    nest_width: float = 2.0
    fill_ratio_a: float = 0.9
    fill_ratio_b: float = 0.1
    tile_size: float = 0.1
    light_pos: tuple[float, float] | None = None  # default: (arena_width, arena_height / 2)
    light_intensity: float = 1.0
    beacon_count_per_zone: int = 5
    beacon_range: float = 1.2
    comm_range: float = 0.8
    robot_radius: float = math.sqrt(0.045 / math.pi)  # 0.045 m^2 footprint
    max_speed: float = 0.3
    prox_range: float = 0.25
    dt: float = 0.1
    timeout: float = 6000.0
    rng_seed: int = 1
    # Replace beacon broadcasts with exact geometric zone membership (debugging aid).
    zone_oracle: bool = False

    def __post_init__(self):
        if self.light_pos is None:
            self.light_pos = (self.arena_width, self.arena_height / 2.0)
        self.validate()

    def validate(self) -> None:
        if self.arena_width <= 0 or self.arena_height <= 0:
            raise ConfigError("arena dimensions must be positive")
        if not 0 < self.nest_width < self.arena_width:
            raise ConfigError("nest_width must be in (0, arena_width)")
        for name in ("fill_ratio_a", "fill_ratio_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.tile_size <= 0:
            raise ConfigError("tile_size must be positive")
        if self.beacon_count_per_zone < 1:
            raise ConfigError("beacon_count_per_zone must be >= 1")
        if self.beacon_range <= 0 or self.comm_range <= 0:
            raise ConfigError("beacon_range and comm_range must be positive")
        if self.robot_radius <= 0:
            raise ConfigError("robot_radius must be positive")
        if self.max_speed < 0 or self.prox_range <= 0:
            raise ConfigError("max_speed must be >= 0 and prox_range > 0")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.timeout < 0:
            raise ConfigError("timeout must be >= 0")
        n_ticks = self.timeout / self.dt
        if abs(n_ticks - round(n_ticks)) > 1e-9:
            raise ConfigError("timeout must be an integer multiple of dt")

    @property
    def zone_width(self) -> float:
        return (self.arena_width - self.nest_width) / 2.0

    @property
    def ticks(self) -> int:
        return int(round(self.timeout / self.dt))


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class Beacon:
    """Zone broadcaster sitting on its zone's Nest-side boundary.

    Broadcasts are range-limited and directional: only points on the zone
    side of the boundary line receive them (``inward`` is the sign of the
    zone relative to the beacon's x).  A circular broadcast wide enough to
    cover the whole zone would also cover most of the Nest, which must
    stay broadcast-free.
    """

    x: float
    y: float
    zone_label: str
    range: float
    inward: float  # +1: zone lies at x >= beacon x, -1: x <= beacon x

    def reaches(self, px: float, py: float) -> bool:
        if (px - self.x) * self.inward < 0:
            return False
        return (px - self.x) ** 2 + (py - self.y) ** 2 <= self.range**2


@dataclass
class World:
    """Immutable after build_world; safe to share across run workers."""

    config: WorldConfig
    zone_a: Rect
    zone_b: Rect
    nest: Rect
    tiles: dict[str, np.ndarray]  # per zone, uint8 [col, row], col along x
    beacons: list[Beacon]
    light_pos: np.ndarray = field(default_factory=lambda: np.zeros(2))
    # Beacon columns (x, y, inward, is_zone_a) for the vectorized mask path.
    beacon_cols: np.ndarray | None = None

    @property
    def bounds(self) -> Rect:
        return Rect(0.0, 0.0, self.config.arena_width, self.config.arena_height)

    def zone_rect(self, label: str) -> Rect:
        return self.zone_a if label == ZONE_A else self.zone_b

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.config.arena_width and 0.0 <= y <= self.config.arena_height

    def zone_label_at(self, x: float, y: float) -> str | None:
        """Exact geometric membership; half-open at shared boundaries."""
        if x >= self.zone_a.x0:
            return ZONE_A
        if x < self.zone_b.x1:
            return ZONE_B
        return None


def _make_tiles(rng: np.random.Generator, rect: Rect, fill_ratio: float, tile_size: float) -> np.ndarray:
    # Edge tiles are clipped to the zone rectangle; they still get one draw each.
    n_cols = max(1, math.ceil(rect.width / tile_size - 1e-9))
    n_rows = max(1, math.ceil(rect.height / tile_size - 1e-9))
    return (rng.random((n_cols, n_rows)) < fill_ratio).astype(np.uint8)


def _make_beacons(config: WorldConfig, zone: Rect, label: str) -> list[Beacon]:
    # Evenly spaced along the Nest-side boundary (strip centers).
    n = config.beacon_count_per_zone
    x = zone.x0 if label == ZONE_A else zone.x1
    inward = 1.0 if label == ZONE_A else -1.0
    step = zone.height / n
    return [
        Beacon(x=x, y=(k + 0.5) * step + zone.y0, zone_label=label, range=config.beacon_range, inward=inward)
        for k in range(n)
    ]


def build_world(config: WorldConfig) -> World:
    """Build the static world: zone rectangles, seeded tiles, beacons."""
    config.validate()
    u, v = config.arena_width, config.arena_height
    zw = config.zone_width
    zone_b = Rect(0.0, 0.0, zw, v)
    nest = Rect(zw, 0.0, zw + config.nest_width, v)
    zone_a = Rect(zw + config.nest_width, 0.0, u, v)

    rng = np.random.default_rng(config.rng_seed)
    tiles = {
        ZONE_A: _make_tiles(rng, zone_a, config.fill_ratio_a, config.tile_size),
        ZONE_B: _make_tiles(rng, zone_b, config.fill_ratio_b, config.tile_size),
    }
    beacons = _make_beacons(config, zone_a, ZONE_A) + _make_beacons(config, zone_b, ZONE_B)
    beacon_cols = np.array([[b.x, b.y, b.inward, 1.0 if b.zone_label == ZONE_A else 0.0] for b in beacons])
    return World(
        config=config,
        zone_a=zone_a,
        zone_b=zone_b,
        nest=nest,
        tiles=tiles,
        beacons=beacons,
        light_pos=np.asarray(config.light_pos, dtype=float),
        beacon_cols=beacon_cols,
    )


def tile_index(world: World, label: str, x: float, y: float) -> tuple[int, int]:
    """Tile (col, row) containing a point of the given zone; edge points clip inward."""
    rect = world.zone_rect(label)
    t = world.config.tile_size
    grid = world.tiles[label]
    col = min(int((x - rect.x0) / t), grid.shape[0] - 1)
    row = min(int((y - rect.y0) / t), grid.shape[1] - 1)
    return col, row


def ground_color_at(world: World, x: float, y: float) -> int | None:
    """Tile colour under a point: 0/1 in zone A or B, None in the Nest."""
    if not world.contains(x, y):
        raise OutOfArenaError(f"point ({x}, {y}) outside arena")
    label = world.zone_label_at(x, y)
    if label is None:
        return None
    col, row = tile_index(world, label, x, y)
    return int(world.tiles[label][col, row])


def zone_broadcasts_at(world: World, x: float, y: float) -> set[str]:
    """Labels of all beacons reaching a point; empty set means Nest."""
    if world.config.zone_oracle:
        label = world.zone_label_at(x, y)
        return set() if label is None else {label}
    return {b.zone_label for b in world.beacons if b.reaches(x, y)}


def zone_broadcast_mask(world: World, poses: np.ndarray) -> np.ndarray:
    """Vectorized zone_broadcasts_at: bitmask per robot (bit0 = A, bit1 = B)."""
    x, y = poses[:, 0], poses[:, 1]
    if world.config.zone_oracle:
        mask = (x >= world.zone_a.x0).astype(np.uint8)
        mask |= ((x < world.zone_b.x1).astype(np.uint8)) << 1
        return mask
    cols = world.beacon_cols
    if cols is None:
        cols = np.array([[b.x, b.y, b.inward, 1.0 if b.zone_label == ZONE_A else 0.0] for b in world.beacons])
    dx = x[:, None] - cols[None, :, 0]
    dy = y[:, None] - cols[None, :, 1]
    hit = (dx * cols[None, :, 2] >= 0) & (dx * dx + dy * dy <= world.config.beacon_range**2)
    is_a = cols[:, 3] > 0
    mask = (hit[:, is_a].any(axis=1)).astype(np.uint8)
    mask |= (hit[:, ~is_a].any(axis=1)).astype(np.uint8) << 1
    return mask
