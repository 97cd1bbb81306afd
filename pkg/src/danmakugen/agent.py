"""Deterministic dodging agent scoring danmaku playability.

Bullets are deterministic, so the agent plans against known future positions:
a depth-limited best-first search maximizes the minimum clearance along the
action path (a widest-path search, so the first horizon-deep pop is optimal),
falling back to the deepest surviving prefix when no full-horizon path lives.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import codec, simulation
from .simulation import SimConfig, SimTrace

_SQ2 = 1.0 / math.sqrt(2.0)

# unit action directions at default speed 4; action 0 is "stay" and ties
# resolve toward earlier actions
ACTION_DIRECTIONS: tuple[tuple[float, float], ...] = (
    (0.0, 0.0),
    (1.0, 0.0), (_SQ2, _SQ2), (0.0, 1.0), (-_SQ2, _SQ2),
    (-1.0, 0.0), (-_SQ2, -_SQ2), (0.0, -1.0), (_SQ2, -_SQ2),
)
ACTIONS: tuple[tuple[float, float], ...] = tuple(
    (4.0 * dx, 4.0 * dy) for dx, dy in ACTION_DIRECTIONS
)


def action_moves(config: "AgentConfig") -> np.ndarray:
    """(9, 2) per-action displacement at the configured move speed."""
    return np.array(ACTION_DIRECTIONS) * config.move_speed

_EMPTY = np.empty((0, len(simulation.FRAME_FIELDS)))


@dataclass(frozen=True)
class AgentConfig:
    move_speed: float = 4.0
    hit_radius: float = 3.0
    horizon: int = 30
    start: tuple[float, float] = (192.0, 400.0)
    max_expansions: int = 4000


@dataclass(frozen=True)
class PlayabilityReport:
    survived_frames: int
    t_total: int
    survival_ratio: float
    min_clearance: float

    def as_dict(self) -> dict:
        return {
            "survived_frames": self.survived_frames,
            "t_total": self.t_total,
            "survival_ratio": self.survival_ratio,
            "min_clearance": self.min_clearance,
        }


def clearance(pos: tuple[float, float], bullets: np.ndarray, hit_radius: float) -> float:
    """Distance to the nearest collision boundary; positive means alive."""
    if bullets.shape[0] == 0:
        return math.inf
    dx = bullets[:, 0] - pos[0]
    dy = bullets[:, 1] - pos[1]
    dist = np.sqrt(dx * dx + dy * dy) - bullets[:, 2] - hit_radius
    return float(dist.min())


def _child_clearances(x: float, y: float, moves: np.ndarray, bullets: np.ndarray,
                      hit_radius: float):
    """Positions and clearances of all 9 action children at once."""
    nx = x + moves[:, 0]
    ny = y + moves[:, 1]
    if bullets.shape[0] == 0:
        return nx, ny, np.full(len(ACTION_DIRECTIONS), math.inf)
    dx = bullets[None, :, 0] - nx[:, None]
    dy = bullets[None, :, 1] - ny[:, None]
    per_bullet = np.sqrt(dx * dx + dy * dy) - bullets[None, :, 2]
    return nx, ny, per_bullet.min(axis=1) - hit_radius


def _plan(pos: tuple[float, float], bullets_ahead, config: AgentConfig,
          sim_config: SimConfig) -> int:
    """Widest-path best-first over the depth-H action tree.

    bullets_ahead(d) must give the bullet array at d frames in the future
    (d in 1..horizon). Returns the first action of the best surviving path;
    if none survives the horizon, the action reaching the greatest depth.
    Priority is the path's minimum clearance (non-increasing along paths),
    so the first horizon-deep pop carries the maximal minimum clearance.
    """
    horizon = config.horizon
    w, h = float(sim_config.screen_w), float(sim_config.screen_h)
    moves = action_moves(config)
    heap: list[tuple[float, int, int, float, float, int]] = []
    counter = 0
    # fallback: deepest survived prefix, then widest clearance, then earliest
    best_depth, best_clear, best_action = -1, -math.inf, 0

    def expand(x: float, y: float, depth: int, path_c: float, first: int | None):
        nonlocal counter, best_depth, best_clear, best_action
        nx, ny, cs = _child_clearances(x, y, moves, bullets_ahead(depth + 1), config.hit_radius)
        for action in range(len(ACTION_DIRECTIONS)):
            if nx[action] < 0.0 or nx[action] > w or ny[action] < 0.0 or ny[action] > h:
                continue
            c = min(path_c, float(cs[action]))
            if c <= 0.0:
                continue
            root = action if first is None else first
            if (depth + 1, c) > (best_depth, best_clear):
                best_depth, best_clear, best_action = depth + 1, c, root
            heapq.heappush(heap, (-c, -(depth + 1), counter, float(nx[action]), float(ny[action]), root))
            counter += 1

    expand(pos[0], pos[1], 0, math.inf, None)
    expansions = 0
    while heap:
        neg_c, neg_d, _, x, y, first = heapq.heappop(heap)
        depth = -neg_d
        if depth == horizon:
            return first
        expansions += 1
        if expansions > config.max_expansions:
            break
        expand(x, y, depth, -neg_c, first)
    return best_action


def plan_step(player: tuple[float, float], frame: int, trace: SimTrace,
              config: AgentConfig = AgentConfig()) -> int:
    """Plan one action index against the recorded bullet trajectories."""
    if trace.frames is None:
        raise ValueError("trace has no recorded frames; rerun simulation with record_frames")

    def bullets_ahead(d: int) -> np.ndarray:
        t = frame + d
        return trace.frames[t] if t < trace.t_total else _EMPTY

    return _plan(player, bullets_ahead, config, trace.config)


def _survival_run(frames: list[np.ndarray], t_total: int, config: AgentConfig,
                  sim_config: SimConfig) -> PlayabilityReport:
    pos = config.start
    moves = action_moves(config)
    survived = 0
    min_clear = math.inf

    def bullets_at(t: int) -> np.ndarray:
        return frames[t] if t < t_total else _EMPTY

    for frame in range(t_total):
        c = clearance(pos, bullets_at(frame), config.hit_radius)
        min_clear = min(min_clear, c)
        if c <= 0.0:
            break
        survived += 1

        def bullets_ahead(d: int, _f=frame) -> np.ndarray:
            return bullets_at(_f + d)

        action = _plan(pos, bullets_ahead, config, sim_config)
        dx, dy = moves[action]
        pos = (
            min(max(pos[0] + dx, 0.0), float(sim_config.screen_w)),
            min(max(pos[1] + dy, 0.0), float(sim_config.screen_h)),
        )
    ratio = survived / t_total if t_total else 1.0
    if math.isinf(min_clear):
        min_clear = float(sim_config.screen_w + sim_config.screen_h)
    return PlayabilityReport(survived, t_total, ratio, min_clear)


def playability(seq: np.ndarray, config: AgentConfig = AgentConfig(),
                sim_config: SimConfig = simulation.DEFAULT_CONFIG) -> PlayabilityReport:
    """Co-simulate the agent against a parametric sequence."""
    trace = simulation.run(seq, sim_config, record_frames=True)
    return _survival_run(trace.frames, trace.t_total, config, sim_config)


def playability_program(program, config: AgentConfig = AgentConfig(),
                        sim_config: SimConfig = simulation.DEFAULT_CONFIG) -> PlayabilityReport:
    """Co-simulate against a live program: aimed templates read the agent's
    position at each spawn frame, so the trace depends on the agent's path.

    Planning propagates only the currently live bullets; events not yet
    emitted are unknown to the planner by construction.
    """
    from . import templates

    events = list(templates.iter_events(program, aim_fn=None, max_events=codec.SEQUENCE_LENGTH))
    # replay frame-by-frame, re-aiming aimed templates at the live agent
    template = templates.get_template(program.template_id)
    params = template.validate_params(program.params)
    rng = np.random.default_rng(np.random.SeedSequence(program.seed))
    last_frame = events[-1][0]

    field = simulation._Field()
    pos = config.start
    moves = action_moves(config)
    survived = 0
    min_clear = math.inf
    emitted = 0
    t = 0
    t_cap = sim_config.t_max
    while t < t_cap and (emitted < codec.SEQUENCE_LENGTH or field.count > 0):
        if t <= last_frame and emitted < codec.SEQUENCE_LENGTH:
            frame_events = template.emit(t, params, rng, pos)
            keep = frame_events[: codec.SEQUENCE_LENGTH - emitted]
            if keep:
                field.spawn_events(keep, sim_config.emitter)
                emitted += len(keep)
        snapshot = field.snapshot()
        c = clearance(pos, snapshot, config.hit_radius)
        min_clear = min(min_clear, c)
        if c <= 0.0:
            t += 1
            break
        survived += 1

        horizon_frames = _propagate(field, config.horizon, sim_config)

        def bullets_ahead(d: int) -> np.ndarray:
            return horizon_frames[d - 1]

        action = _plan(pos, bullets_ahead, config, sim_config)
        dx, dy = moves[action]
        pos = (
            min(max(pos[0] + dx, 0.0), float(sim_config.screen_w)),
            min(max(pos[1] + dy, 0.0), float(sim_config.screen_h)),
        )
        field.advance()
        field.despawn(sim_config)
        t += 1
    t_total = t if t > 0 else 1
    ratio = survived / t_total
    if math.isinf(min_clear):
        min_clear = float(sim_config.screen_w + sim_config.screen_h)
    return PlayabilityReport(survived, t_total, ratio, min_clear)


def _propagate(field: simulation._Field, steps: int, sim_config: SimConfig) -> list[np.ndarray]:
    """Roll the current bullet field forward without mutating it."""
    ghost = simulation._Field()
    for name in ghost.__slots__:
        setattr(ghost, name, getattr(field, name).copy())
    frames = []
    for _ in range(steps):
        ghost.advance()
        ghost.despawn(sim_config)
        frames.append(ghost.snapshot())
    return frames
