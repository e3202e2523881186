"""Per-robot decision strategies: honeybee, stigmergy, division of labor.

Each strategy is a per-robot state machine stepped once per tick.  A tick
sees only the robot's own state, its perception (zone broadcasts, ground
readings) and its inbox, and returns a movement request; collision
avoidance is layered on top by the engine.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .arena import ZONE_A, ZONE_B
from .behaviors import ANTIPHOTOTAXIS, DIFFUSE, PHOTOTAXIS, SIDESTEP
from .vstig import KEY_AGG_A, KEY_AGG_B, StigStore

log = logging.getLogger(__name__)

# FSM states.
GO_TO_ZONE = "go_to_zone"
SAMPLE = "sample"
RETURN = "return"
ADVERTISE = "advertise"
NETWORK = "network"

UNDECIDED = "undecided"

SAMPLER_A = "sampler_A"
SAMPLER_B = "sampler_B"
NETWORKER = "networker"

# Zone broadcast bitmask bits.
BIT_A = 1
BIT_B = 2

HONEYBEE = "honeybee"
STIGMERGY = "stigmergy"
DOL = "dol"

# Legal fsm transitions, used by the trace validator in the tests.
CYCLE_EDGES = frozenset(
    [(GO_TO_ZONE, SAMPLE), (SAMPLE, RETURN), (RETURN, ADVERTISE), (ADVERTISE, GO_TO_ZONE)]
)
FSM_EDGES = {
    HONEYBEE: CYCLE_EDGES,
    STIGMERGY: CYCLE_EDGES,
    DOL: frozenset([(GO_TO_ZONE, SAMPLE)]),
}


@dataclass
class StrategyParams:
    samples_per_trip: int = 10  # S_T
    sample_period: float = 1.0  # seconds between ground samples
    advertise_base: float = 30.0  # honeybee: advertise time = base * avg_bel
    advertise_const: float = 10.0  # stigmergy: fixed advertise time
    belief_weight: float = 0.3  # blend weight of a fresh belief into the aggregate
    collect_frac: float = 0.2  # tail fraction of the advertise phase that collects beliefs
    escape_after: int = 60  # avoidance events before detouring
    escape_time: float = 1.0  # seconds to diffuse after the detour turn
    watchdog: float = 600.0  # log robots stuck travelling longer than this

    def __post_init__(self):
        if self.samples_per_trip < 1:
            raise ValueError("samples_per_trip must be >= 1")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if not 0.0 < self.belief_weight <= 1.0:
            raise ValueError("belief_weight must be in (0, 1]")
        if not 0.0 <= self.collect_frac <= 1.0:
            raise ValueError("collect_frac must be in [0, 1]")


@dataclass(frozen=True)
class BeliefMessage:
    sender: int
    zone: str
    avg_bel: float


@dataclass
class RobotState:
    id: int
    zone: str  # current assignment; fixed for dol samplers, "" for networkers
    role: str = ""
    fsm: str = GO_TO_ZONE
    samples_taken: int = 0
    bel: float = 0.0  # last ground sample
    bel_sum: float = 0.0
    avg_bel: float = 0.0
    advertise_timer: float = 0.0
    advertise_total: float = 0.0
    sample_cooldown: float = 0.0
    opinion: str = UNDECIDED
    heard: dict[int, BeliefMessage] = field(default_factory=dict)
    ca_count: int = 0  # avoidance events since the last detour/reset
    detour_timer: float = 0.0
    time_in_state: float = 0.0
    stuck_logged: bool = False


def other_zone(zone: str) -> str:
    return ZONE_B if zone == ZONE_A else ZONE_A


def zone_bit(zone: str) -> int:
    return BIT_A if zone == ZONE_A else BIT_B


def travel_request(zone: str) -> int:
    """Toward the zone: the light sits past zone A."""
    return PHOTOTAXIS if zone == ZONE_A else ANTIPHOTOTAXIS


def return_request(zone: str) -> int:
    return ANTIPHOTOTAXIS if zone == ZONE_A else PHOTOTAXIS


def agg_key(zone: str) -> str:
    return KEY_AGG_A if zone == ZONE_A else KEY_AGG_B


def _enter(state: RobotState, fsm: str) -> None:
    state.fsm = fsm
    state.time_in_state = 0.0
    state.stuck_logged = False


def sample_tick(state: RobotState, ground: np.ndarray, in_zone: bool, params: StrategyParams, dt: float) -> bool:
    """Take at most one sample per period; True once the trip's batch is full.

    Samples only count while all ground sensors sit on quality tiles, so
    beacon fringes and boundary straddling never record spurious zeros.
    """
    state.sample_cooldown -= dt
    if state.sample_cooldown > 0 or not in_zone:
        return False
    state.bel = float(np.mean(ground))
    state.bel_sum += state.bel
    state.samples_taken += 1
    state.sample_cooldown = params.sample_period
    if state.samples_taken >= params.samples_per_trip:
        state.avg_bel = state.bel_sum / params.samples_per_trip
        return True
    return False


def honeybee_aggregate(state: RobotState, messages) -> tuple[float, float]:
    """Split heard beliefs by assignment and average each side (own included)."""
    same_sum, same_n, other_sum, other_n = 0.0, 0, 0.0, 0
    for m in messages:
        if m.zone == state.zone:
            same_sum += m.avg_bel
            same_n += 1
        else:
            other_sum += m.avg_bel
            other_n += 1
    agg_same = (same_sum + state.avg_bel) / (same_n + 1)
    agg_other = other_sum / other_n if other_n else 0.0
    return agg_same, agg_other


def honeybee_decide(state: RobotState, agg_same: float, agg_other: float) -> None:
    """Strictly better evidence for the other zone flips the assignment."""
    if agg_other > agg_same:
        state.zone = other_zone(state.zone)
    state.opinion = state.zone


def _watchdog(state: RobotState, params: StrategyParams, dt: float) -> None:
    state.time_in_state += dt
    if state.time_in_state > params.watchdog and not state.stuck_logged:
        state.stuck_logged = True
        log.warning("robot %d stuck in %s for %.0f s", state.id, state.fsm, state.time_in_state)


def _steered(state: RobotState, request: int, params: StrategyParams, dt: float) -> int:
    """Movement request with the stuck-escape detour applied.

    The avoidance kick is exactly anti-parallel to the obstacle vector, so
    symmetric standoffs (opposing taxis robots, wall/corner bounce cycles)
    can repeat without progress.  After enough avoidance events the robot
    turns 90 degrees and diffuses briefly; deadlocked pairs face away from
    each other by then, so the same-side turn displaces them in opposite
    world directions.
    """
    if state.detour_timer > 0:
        state.detour_timer -= dt
        return DIFFUSE
    if state.ca_count >= params.escape_after:
        state.ca_count = 0
        state.detour_timer = params.escape_time
        return SIDESTEP
    return request


def _sampling_request(state: RobotState, zones: int, params: StrategyParams, dt: float) -> int:
    # CA shoves can eject a sampler from its zone; steer it back.
    if zones & zone_bit(state.zone):
        return _steered(state, DIFFUSE, params, dt)
    return _steered(state, travel_request(state.zone), params, dt)


def _nest_request(state: RobotState, zones: int, params: StrategyParams, dt: float) -> int:
    # Keep advertisers and networkers inside the Nest.
    if zones & BIT_A:
        return _steered(state, ANTIPHOTOTAXIS, params, dt)
    if zones & BIT_B:
        return _steered(state, PHOTOTAXIS, params, dt)
    return _steered(state, DIFFUSE, params, dt)


def honeybee_tick(
    state: RobotState,
    zones: int,
    ground: np.ndarray,
    in_zone: bool,
    inbox: list[BeliefMessage],
    params: StrategyParams,
    dt: float,
    ca_last: bool = False,
) -> tuple[int, list[BeliefMessage]]:
    """One step of the broadcast-based cycle; returns (request, outbox)."""
    outbox: list[BeliefMessage] = []
    if ca_last:
        state.ca_count += 1
    if state.fsm == GO_TO_ZONE:
        if zones & zone_bit(state.zone):
            _enter(state, SAMPLE)
            state.samples_taken = 0
            state.bel_sum = 0.0
            state.sample_cooldown = 0.0
        else:
            _watchdog(state, params, dt)
            return _steered(state, travel_request(state.zone), params, dt), outbox
    if state.fsm == SAMPLE:
        request = _sampling_request(state, zones, params, dt)
        if sample_tick(state, ground, in_zone, params, dt):
            _enter(state, RETURN)
        return request, outbox
    if state.fsm == RETURN:
        if zones == 0:
            _enter(state, ADVERTISE)
            state.advertise_total = params.advertise_base * state.avg_bel
            state.advertise_timer = state.advertise_total
            state.heard.clear()
        else:
            _watchdog(state, params, dt)
            return _steered(state, return_request(state.zone), params, dt), outbox
    # ADVERTISE: diffuse in the Nest, broadcast every tick, collect near the end.
    outbox.append(BeliefMessage(state.id, state.zone, state.avg_bel))
    if state.advertise_timer <= params.collect_frac * state.advertise_total:
        for m in inbox:
            state.heard[m.sender] = m
    state.advertise_timer -= dt
    if state.advertise_timer <= 0:
        agg_same, agg_other = honeybee_aggregate(state, state.heard.values())
        honeybee_decide(state, agg_same, agg_other)
        _enter(state, GO_TO_ZONE)
    return _nest_request(state, zones, params, dt), outbox


def stigmergy_tick(
    state: RobotState,
    zones: int,
    ground: np.ndarray,
    in_zone: bool,
    store: StigStore,
    params: StrategyParams,
    dt: float,
    ca_last: bool = False,
) -> int:
    """Honeybee cycle over the shared tuple space instead of belief broadcasts.

    The advertise phase has constant length: its only purpose is mixing for
    entry synchronization, so quality-proportional advertising buys nothing.
    """
    if ca_last:
        state.ca_count += 1
    if state.fsm == GO_TO_ZONE:
        if zones & zone_bit(state.zone):
            _enter(state, SAMPLE)
            state.samples_taken = 0
            state.bel_sum = 0.0
            state.sample_cooldown = 0.0
        else:
            _watchdog(state, params, dt)
            return _steered(state, travel_request(state.zone), params, dt)
    if state.fsm == SAMPLE:
        request = _sampling_request(state, zones, params, dt)
        if sample_tick(state, ground, in_zone, params, dt):
            _enter(state, RETURN)
        return request
    if state.fsm == RETURN:
        if zones == 0:
            _enter(state, ADVERTISE)
            state.advertise_total = params.advertise_const
            state.advertise_timer = state.advertise_total
            store.update_belief(agg_key(state.zone), state.avg_bel, params.belief_weight)
        else:
            _watchdog(state, params, dt)
            return _steered(state, return_request(state.zone), params, dt)
    # Poll both aggregates while mixing: each read broadcasts, which is what
    # makes the constant-length advertise phase synchronize the stores.
    a_value = store.get(KEY_AGG_A)
    b_value = store.get(KEY_AGG_B)
    state.advertise_timer -= dt
    if state.advertise_timer <= 0:
        own, other = (a_value, b_value) if state.zone == ZONE_A else (b_value, a_value)
        if other > own:
            state.zone = other_zone(state.zone)
        state.opinion = state.zone
        _enter(state, GO_TO_ZONE)
    return _nest_request(state, zones, params, dt)


def _track_best_zone(state: RobotState, a_value: float, b_value: float) -> None:
    if a_value > b_value:
        state.opinion = ZONE_A
    elif b_value > a_value:
        state.opinion = ZONE_B
    # tie: no evidence either way, keep the previous opinion


def dol_tick(
    state: RobotState,
    zones: int,
    ground: np.ndarray,
    in_zone: bool,
    store: StigStore,
    params: StrategyParams,
    dt: float,
    ca_last: bool = False,
) -> int:
    """Fixed-role step: samplers live in their zone, networkers in the Nest."""
    if ca_last:
        state.ca_count += 1
    if state.role == NETWORKER:
        _track_best_zone(state, store.get(KEY_AGG_A), store.get(KEY_AGG_B))
        return _nest_request(state, zones, params, dt)
    if state.fsm == GO_TO_ZONE:
        if zones & zone_bit(state.zone):
            _enter(state, SAMPLE)
            state.samples_taken = 0
            state.bel_sum = 0.0
            state.sample_cooldown = 0.0
        else:
            _watchdog(state, params, dt)
            return _steered(state, travel_request(state.zone), params, dt)
    request = _sampling_request(state, zones, params, dt)
    if sample_tick(state, ground, in_zone, params, dt):
        _track_best_zone(state, store.get(KEY_AGG_A), store.get(KEY_AGG_B))
        store.update_belief(agg_key(state.zone), state.avg_bel, params.belief_weight)
        state.samples_taken = 0
        state.bel_sum = 0.0
    return request


def init_robot(strategy: str, robot_id: int, n_robots: int) -> RobotState:
    """Initial assignment: even/odd ids split A/B; dol assigns thirds by id."""
    if strategy == DOL:
        third = robot_id % 3
        if third == 0:
            return RobotState(id=robot_id, zone=ZONE_A, role=SAMPLER_A, fsm=GO_TO_ZONE)
        if third == 1:
            return RobotState(id=robot_id, zone=ZONE_B, role=SAMPLER_B, fsm=GO_TO_ZONE)
        return RobotState(id=robot_id, zone="", role=NETWORKER, fsm=NETWORK)
    zone = ZONE_A if robot_id % 2 == 0 else ZONE_B
    return RobotState(id=robot_id, zone=zone, fsm=GO_TO_ZONE, opinion=zone)


def uses_stigmergy(strategy: str) -> bool:
    return strategy in (STIGMERGY, DOL)


STRATEGIES = (HONEYBEE, STIGMERGY, DOL)
