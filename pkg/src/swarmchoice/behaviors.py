"""Low-level controllers and kinematic integration.

Controllers return body-frame velocity commands; the integrator rotates
them into the world frame using each robot's current heading.  Collision
avoidance always overrides the requested taxis/diffusion command when it
fires.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .arena import ConfigError, World
from .sensing import SENSOR_COS, SENSOR_SIN

log = logging.getLogger(__name__)

# Control requests a strategy can make; avoidance is applied on top.
DIFFUSE = 0
PHOTOTAXIS = 1
ANTIPHOTOTAXIS = 2
SIDESTEP = 3  # one-tick 90-degree detour: full speed to the body's left


@dataclass
class ControlParams:
    avoid_speed: float = 0.3  # m/s, speed of the avoidance kick
    taxis_speed: float = 0.3  # m/s
    max_speed: float = 0.3  # m/s, diffusion speed and global cap
    avoid_norm_min: float = 0.6  # obstacle-vector norm needed to trigger avoidance
    avoid_cone_half: float = math.pi / 4.0  # radians, obstacle-bearing gate
    ca_gate: str = "ahead"  # "ahead": trigger when obstacle in front cone; "outside": the complement
    resolve_iters: int = 64

    def __post_init__(self):
        if min(self.avoid_speed, self.taxis_speed, self.max_speed) < 0:
            raise ConfigError("speeds must be >= 0")
        if self.avoid_speed > self.max_speed + 1e-12 or self.taxis_speed > self.max_speed + 1e-12:
            raise ConfigError("avoid_speed and taxis_speed must not exceed max_speed")
        if self.avoid_norm_min <= 0 or self.avoid_cone_half <= 0:
            raise ConfigError("avoidance thresholds must be positive")
        if self.ca_gate not in ("ahead", "outside"):
            raise ConfigError("ca_gate must be 'ahead' or 'outside'")


@dataclass
class ControlOutput:
    velocity: np.ndarray  # (2,) body frame, |v| <= max_speed
    ca_active: bool = False


def obstacle_vector(proximity: np.ndarray) -> np.ndarray:
    """Weighted sum of sensor directions; the norm carries the trigger test."""
    p = np.asarray(proximity, dtype=float)
    return np.array([np.sum(p * SENSOR_COS), np.sum(p * SENSOR_SIN)])


def _ca_fires(norm: float, angle: float, params: ControlParams) -> bool:
    if norm < params.avoid_norm_min:
        return False
    ahead = abs(angle) <= params.avoid_cone_half
    return ahead if params.ca_gate == "ahead" else not ahead


def collision_avoidance(proximity: np.ndarray, params: ControlParams) -> ControlOutput | None:
    """Avoidance kick opposite the obstacle vector, or None to pass through."""
    v_o = obstacle_vector(proximity)
    norm = float(np.hypot(v_o[0], v_o[1]))
    if norm == 0.0:
        return None
    angle = math.atan2(v_o[1], v_o[0])
    if not _ca_fires(norm, angle, params):
        return None
    return ControlOutput(velocity=-params.avoid_speed * v_o / norm, ca_active=True)


def taxis(light: np.ndarray, mode: int, params: ControlParams) -> ControlOutput:
    """Move along (PHOTOTAXIS) or against (ANTIPHOTOTAXIS) the light vector."""
    li = np.asarray(light, dtype=float)
    v_l = np.array([np.sum(li * SENSOR_COS), np.sum(li * SENSOR_SIN)])
    norm = float(np.hypot(v_l[0], v_l[1]))
    if norm == 0.0:
        return diffusion(params)
    sign = 1.0 if mode == PHOTOTAXIS else -1.0
    return ControlOutput(velocity=sign * params.taxis_speed * v_l / norm)


def diffusion(params: ControlParams) -> ControlOutput:
    """Full speed straight ahead; redirection comes from collisions."""
    return ControlOutput(velocity=np.array([params.max_speed, 0.0]))


def sidestep(params: ControlParams) -> ControlOutput:
    """Full speed to the body's left.

    Issued once to start a detour: two deadlocked robots facing away from
    each other after avoidance kicks sidestep in opposite world directions,
    which is what breaks symmetric head-on standoffs.
    """
    return ControlOutput(velocity=np.array([0.0, params.max_speed]))


def resolve_control(request: int, proximity: np.ndarray, light: np.ndarray, params: ControlParams) -> ControlOutput:
    """Requested behavior with the avoidance override applied."""
    ca = collision_avoidance(proximity, params)
    if ca is not None:
        return ca
    if request == DIFFUSE:
        return diffusion(params)
    if request == SIDESTEP:
        return sidestep(params)
    return taxis(light, request, params)


def control_all(
    requests: np.ndarray, prox: np.ndarray, light: np.ndarray, params: ControlParams
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized resolve_control: body velocities (N,2) and ca flags (N,)."""
    n = len(requests)
    vo_x = np.sum(prox * SENSOR_COS, axis=1)
    vo_y = np.sum(prox * SENSOR_SIN, axis=1)
    vo_norm = np.hypot(vo_x, vo_y)
    vo_ang = np.arctan2(vo_y, vo_x)
    ahead = np.abs(vo_ang) <= params.avoid_cone_half
    gate = ahead if params.ca_gate == "ahead" else ~ahead
    ca = (vo_norm >= params.avoid_norm_min) & gate

    vl_x = np.sum(light * SENSOR_COS, axis=1)
    vl_y = np.sum(light * SENSOR_SIN, axis=1)
    vl_norm = np.hypot(vl_x, vl_y)

    vel = np.zeros((n, 2))
    vel[:, 0] = params.max_speed  # diffusion default
    stepping = requests == SIDESTEP
    vel[stepping, 0] = 0.0
    vel[stepping, 1] = params.max_speed

    has_light = vl_norm > 0.0
    safe_l = np.where(has_light, vl_norm, 1.0)
    for mode, sign in ((PHOTOTAXIS, 1.0), (ANTIPHOTOTAXIS, -1.0)):
        sel = (requests == mode) & has_light
        vel[sel, 0] = sign * params.taxis_speed * vl_x[sel] / safe_l[sel]
        vel[sel, 1] = sign * params.taxis_speed * vl_y[sel] / safe_l[sel]

    safe_o = np.where(ca, vo_norm, 1.0)
    vel[ca, 0] = -params.avoid_speed * vo_x[ca] / safe_o[ca]
    vel[ca, 1] = -params.avoid_speed * vo_y[ca] / safe_o[ca]
    return vel, ca


def _as_velocity_array(all_controls) -> np.ndarray:
    if isinstance(all_controls, np.ndarray):
        return all_controls
    return np.array([c.velocity for c in all_controls], dtype=float)


def integrate_and_resolve(
    all_poses: np.ndarray,
    all_controls,
    dt: float,
    world: World,
    params: ControlParams | None = None,
) -> np.ndarray:
    """Advance poses one step and project out disk/wall overlaps.

    Overlap resolution splits each penetration equally along the contact
    normal, sweeping pairs in id order until clean (or the iteration cap).
    Returns new (N, 3) poses; headings follow the commanded motion.
    """
    params = params or ControlParams(max_speed=world.config.max_speed)
    poses = np.asarray(all_poses, dtype=float)
    body_vel = _as_velocity_array(all_controls)
    n = len(poses)
    r = world.config.robot_radius
    u, v = world.config.arena_width, world.config.arena_height

    speed = np.hypot(body_vel[:, 0], body_vel[:, 1])
    cap = params.max_speed + 1e-12
    scale = np.where(speed > cap, np.where(speed > 0, cap / np.maximum(speed, 1e-300), 1.0), 1.0)
    body_vel = body_vel * scale[:, None]

    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    wx = c * body_vel[:, 0] - s * body_vel[:, 1]
    wy = s * body_vel[:, 0] + c * body_vel[:, 1]

    out = poses.copy()
    out[:, 0] += wx * dt
    out[:, 1] += wy * dt
    moving = np.hypot(wx, wy) > 1e-12
    out[moving, 2] = np.arctan2(wy[moving], wx[moving])

    _clamp_walls(out, r, u, v)
    if n > 1:
        _resolve_pairs(out, r, u, v, params.resolve_iters)
    return out


def _clamp_walls(poses: np.ndarray, r: float, u: float, v: float) -> None:
    np.clip(poses[:, 0], r, u - r, out=poses[:, 0])
    np.clip(poses[:, 1], r, v - r, out=poses[:, 1])


_upper_pairs_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _upper_pairs_cache:
        _upper_pairs_cache[n] = np.triu_indices(n, k=1)
    return _upper_pairs_cache[n]


def _scan_pairs(xy: np.ndarray, iu, threshold: float) -> list[tuple[int, int]]:
    dx = xy[iu[0], 0] - xy[iu[1], 0]
    dy = xy[iu[0], 1] - xy[iu[1], 1]
    hit = np.flatnonzero(dx * dx + dy * dy < threshold * threshold)
    return list(zip(iu[0][hit].tolist(), iu[1][hit].tolist()))


def _resolve_pairs(poses: np.ndarray, r: float, u: float, v: float, max_iters: int) -> None:
    d = 2.0 * r
    dlim = d - 1e-12
    dlim2 = dlim * dlim
    xy = poses[:, :2]
    iu = _upper_pairs(len(poses))
    # Watch set: overlaps plus a margin for push chains; verification rescans
    # extend it if a chain escaped the margin.
    pairs = _scan_pairs(xy, iu, dlim + 0.03)
    if not pairs:
        return
    x_lo, x_hi, y_lo, y_hi = r, u - r, r, v - r
    xs = xy[:, 0].tolist()
    ys = xy[:, 1].tolist()
    for _ in range(max_iters):
        pushed = False
        for i, j in pairs:
            dx = xs[j] - xs[i]
            dy = ys[j] - ys[i]
            cur2 = dx * dx + dy * dy
            if cur2 >= dlim2:
                continue
            pushed = True
            cur = math.sqrt(cur2)
            if cur < 1e-12:
                # Coincident centers: deterministic fallback direction.
                nx, ny = 1.0, 0.0
                push = d / 2.0
            else:
                nx, ny = dx / cur, dy / cur
                push = (d - cur) / 2.0
            xs[i] = min(max(xs[i] - nx * push, x_lo), x_hi)
            ys[i] = min(max(ys[i] - ny * push, y_lo), y_hi)
            xs[j] = min(max(xs[j] + nx * push, x_lo), x_hi)
            ys[j] = min(max(ys[j] + ny * push, y_lo), y_hi)
        if not pushed:
            xy[:, 0] = xs
            xy[:, 1] = ys
            missed = [p for p in _scan_pairs(xy, iu, dlim) if p not in set(pairs)]
            if not missed:
                return
            pairs = pairs + missed
    xy[:, 0] = xs
    xy[:, 1] = ys
    worst = min(math.hypot(xs[j] - xs[i], ys[j] - ys[i]) for i, j in pairs)
    if worst < d - 1e-6:
        log.warning("overlap resolution incomplete: min pair distance %.3e < %.3e", worst, d)
