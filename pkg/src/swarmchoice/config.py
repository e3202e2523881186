"""Run configuration: world, control, strategy and metrics tunables.

Config files are plain text, one ``key = value`` pair per line, ``#``
comments allowed.  Keys are the flat union of all tunable field names (see
README for the schema); ``max_speed`` feeds both the world and the
controller caps, and the avoidance/taxis speeds follow it unless set
explicitly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .arena import ConfigError, WorldConfig
from .behaviors import ControlParams
from .metrics import MetricsParams
from .strategies import StrategyParams

_SECTIONS = ("world", "control", "strategy", "metrics")


@dataclass
class SimConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    control: ControlParams = field(default_factory=ControlParams)
    strategy: StrategyParams = field(default_factory=StrategyParams)
    metrics: MetricsParams = field(default_factory=MetricsParams)
    n_robots: int = 12

    def __post_init__(self):
        if self.n_robots < 2:
            raise ConfigError("n_robots must be >= 2")
        # One speed authority: the controller cap mirrors the world's.
        if abs(self.control.max_speed - self.world.max_speed) > 1e-12:
            raise ConfigError("control.max_speed must equal world.max_speed")

    def to_dict(self) -> dict:
        out = {}
        for section in _SECTIONS:
            cfg = getattr(self, section)
            d = dataclasses.asdict(cfg)
            if "light_pos" in d:
                d["light_pos"] = list(d["light_pos"])
            out[section] = d
        out["n_robots"] = self.n_robots
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        world = dict(data.get("world", {}))
        if world.get("light_pos") is not None:
            world["light_pos"] = tuple(world["light_pos"])
        return cls(
            world=WorldConfig(**world),
            control=ControlParams(**data.get("control", {})),
            strategy=StrategyParams(**data.get("strategy", {})),
            metrics=MetricsParams(**data.get("metrics", {})),
            n_robots=int(data.get("n_robots", 12)),
        )


def _field_types(cls) -> dict[str, type]:
    return {f.name: f.type for f in dataclasses.fields(cls)}


_KEY_SECTION: dict[str, str] = {}
for _section, _cls in zip(_SECTIONS, (WorldConfig, ControlParams, StrategyParams, MetricsParams)):
    for _f in dataclasses.fields(_cls):
        # max_speed intentionally appears in world and control; world wins here
        # and build_config copies it over.
        _KEY_SECTION.setdefault(_f.name, _section)
_KEY_SECTION["n_robots"] = ""


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key == "light_pos":
        parts = [p for p in raw.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ConfigError(f"light_pos wants two numbers, got {raw!r}")
        return (float(parts[0]), float(parts[1]))
    if key in ("ca_gate", "stagnation_mode"):
        return raw
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        if any(c in raw for c in ".eE") and not raw.lstrip("+-").isdigit():
            return float(raw)
        return int(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a flat override dict."""
    overrides: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _KEY_SECTION:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        overrides[key] = _coerce(key, raw)
    return overrides


def build_config(overrides: dict) -> SimConfig:
    """SimConfig from flat overrides (file and/or CLI), defaults elsewhere."""
    by_section: dict[str, dict] = {s: {} for s in _SECTIONS}
    n_robots = 12
    for key, value in overrides.items():
        if key not in _KEY_SECTION:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "n_robots":
            n_robots = int(value)
        else:
            by_section[_KEY_SECTION[key]][key] = value
    world_kw = by_section["world"]
    control_kw = by_section["control"]
    if "max_speed" in world_kw:
        control_kw["max_speed"] = world_kw["max_speed"]
        # Unless pinned explicitly, the behavior speeds track the cap.
        control_kw.setdefault("avoid_speed", world_kw["max_speed"])
        control_kw.setdefault("taxis_speed", world_kw["max_speed"])
    return SimConfig(
        world=WorldConfig(**world_kw),
        control=ControlParams(**control_kw),
        strategy=StrategyParams(**by_section["strategy"]),
        metrics=MetricsParams(**by_section["metrics"]),
        n_robots=n_robots,
    )


def load_config(path: str | Path | None, cli_overrides: dict | None = None) -> SimConfig:
    overrides: dict = {}
    if path is not None:
        overrides.update(parse_config_text(Path(path).read_text()))
    if cli_overrides:
        overrides.update({k: v for k, v in cli_overrides.items() if v is not None})
    return build_config(overrides)
