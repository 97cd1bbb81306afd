"""Danmaku shooting-rule templates and program unrolling.

A program is a template id plus a parameter vector; unrolling replays the
template frame by frame, assigns inter-shot gaps, and normalizes the first
64 bullet-builder calls into a parametric sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import codec
from .codec import ShotEvent

TWO_PI = 2.0 * math.pi

# aim target for metric runs: screen bottom-center (agent runs pass a live position)
DEFAULT_AIM = (192.0, 448.0)

STALL_LIMIT = 3600


class TemplateStallError(RuntimeError):
    pass


@dataclass(frozen=True)
class DanmakuTemplate:
    """A shooting rule: emit() returns the bullet-builder calls of one frame."""

    template_id: str
    param_names: tuple[str, ...]
    low: np.ndarray
    high: np.ndarray
    emit: Callable[[int, np.ndarray, np.random.Generator, tuple[float, float]], list[ShotEvent]]

    @property
    def arity(self) -> int:
        return len(self.param_names)

    def validate_params(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.arity,):
            raise ValueError(
                f"template {self.template_id} takes {self.arity} parameters, got {params.shape}"
            )
        if np.any(params < self.low) or np.any(params > self.high):
            raise ValueError(f"parameters outside bounds for template {self.template_id}")
        return params


@dataclass
class DanmakuProgram:
    template_id: str
    params: np.ndarray
    seed: int

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)


def _wrap(angle: float) -> float:
    return angle % TWO_PI


def _count(value: float) -> int:
    return max(1, int(math.floor(value + 0.5)))


def _shot(angle, speed, radius, dx=0.0, dy=0.0, accel=0.0, ang_vel=0.0) -> ShotEvent:
    return ShotEvent(0, dx, dy, _wrap(angle), speed, accel, ang_vel, radius)


def _ring_burst(t, p, rng, aim):
    count, period, speed, radius, phase = p
    n, per = _count(count), _count(period)
    if t % per:
        return []
    return [_shot(phase + TWO_PI * k / n, speed, radius) for k in range(n)]


def _fan_volley(t, p, rng, aim):
    count, spread, period, speed, radius, center = p
    n, per = _count(count), _count(period)
    if t % per:
        return []
    if n == 1:
        return [_shot(center, speed, radius)]
    return [_shot(center + spread * (k / (n - 1) - 0.5), speed, radius) for k in range(n)]


def _spiral(t, p, rng, aim):
    arms, step, period, speed, radius, curl = p
    n, per = _count(arms), _count(period)
    if t % per:
        return []
    base = step * (t // per)
    return [_shot(base + TWO_PI * k / n, speed, radius, ang_vel=curl) for k in range(n)]


def _aimed_stream(t, p, rng, aim):
    period, speed, volley, radius, jitter = p
    per, n = _count(period), _count(volley)
    if t % per:
        return []
    angle = math.atan2(aim[1] - 120.0, aim[0] - 192.0)
    return [_shot(angle + jitter * rng.uniform(-1.0, 1.0), speed, radius) for _ in range(n)]


def _random_spray(t, p, rng, aim):
    period, burst, speed_lo, speed_span, radius_lo, radius_span = p
    per, n = _count(period), _count(burst)
    if t % per:
        return []
    shots = []
    for _ in range(n):
        shots.append(_shot(
            rng.uniform(0.0, TWO_PI),
            speed_lo + rng.uniform(0.0, speed_span),
            radius_lo + rng.uniform(0.0, radius_span),
            dx=rng.uniform(-24.0, 24.0),
            dy=rng.uniform(-24.0, 24.0),
            ang_vel=rng.uniform(-0.05, 0.05),
        ))
    return shots


def _rotating_multiarm(t, p, rng, aim):
    arms, rot, period, speed, radius, accel = p
    n, per = _count(arms), _count(period)
    if t % per:
        return []
    base = rot * t
    return [_shot(base + TWO_PI * k / n, speed, radius, accel=accel) for k in range(n)]


def _template(template_id, names, low, high, emit) -> DanmakuTemplate:
    return DanmakuTemplate(template_id, tuple(names),
                           np.array(low, dtype=np.float64),
                           np.array(high, dtype=np.float64), emit)


TEMPLATES: dict[str, DanmakuTemplate] = {
    t.template_id: t
    for t in (
        _template("ring_burst",
                  ("count", "period", "speed", "radius", "phase"),
                  [6.0, 8.0, 1.5, 4.0, 0.0], [14.0, 24.0, 4.0, 10.0, TWO_PI - 1e-9],
                  _ring_burst),
        _template("fan_volley",
                  ("count", "spread", "period", "speed", "radius", "center"),
                  [3.0, 0.4, 6.0, 2.0, 2.0, 0.0], [7.0, 1.6, 18.0, 5.0, 6.0, TWO_PI - 1e-9],
                  _fan_volley),
        _template("spiral",
                  ("arms", "step", "period", "speed", "radius", "curl"),
                  [1.0, 0.08, 1.0, 1.5, 2.0, -0.04], [2.0, 0.5, 4.0, 3.5, 6.0, 0.04],
                  _spiral),
        _template("aimed_stream",
                  ("period", "speed", "volley", "radius", "jitter"),
                  [1.0, 2.5, 1.0, 2.0, 0.0], [8.0, 6.0, 3.0, 5.0, 0.25],
                  _aimed_stream),
        _template("random_spray",
                  ("period", "burst", "speed_lo", "speed_span", "radius_lo", "radius_span"),
                  [1.0, 1.0, 0.8, 0.5, 2.0, 1.0], [5.0, 4.0, 2.0, 2.5, 6.0, 8.0],
                  _random_spray),
        _template("rotating_multiarm",
                  ("arms", "rot", "period", "speed", "radius", "accel"),
                  [3.0, 0.02, 2.0, 1.0, 2.0, 0.0], [8.0, 0.12, 6.0, 3.0, 6.0, 0.04],
                  _rotating_multiarm),
    )
}

FAMILY_ORDER = tuple(TEMPLATES)


def get_template(template_id: str) -> DanmakuTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise ValueError(f"unknown template id {template_id!r}") from None


def iter_events(program: DanmakuProgram, aim_fn: Callable[[int], tuple[float, float]] | None = None,
                max_events: int = codec.SEQUENCE_LENGTH):
    """Yield (frame, event) pairs in emission order until max_events calls."""
    template = get_template(program.template_id)
    params = template.validate_params(program.params)
    rng = np.random.default_rng(np.random.SeedSequence(program.seed))
    emitted = 0
    t = 0
    while emitted < max_events:
        if t > STALL_LIMIT:
            raise TemplateStallError(
                f"template {program.template_id} emitted {emitted} < {max_events} events "
                f"within {STALL_LIMIT} frames"
            )
        aim = aim_fn(t) if aim_fn is not None else DEFAULT_AIM
        for event in template.emit(t, params, rng, aim):
            yield t, event
            emitted += 1
            if emitted >= max_events:
                return
        t += 1


def unroll(program: DanmakuProgram, aim: tuple[float, float] | None = None) -> np.ndarray:
    """Expand a program into the normalized 64x8 parametric sequence.

    Gaps between consecutive builder calls become the itv feature (0 inside a
    frame, clipped at the 60-frame cap); the first event's itv is 0.
    """
    aim_fn = (lambda t: aim) if aim is not None else None
    events: list[ShotEvent] = []
    prev_frame = None
    for frame, event in iter_events(program, aim_fn):
        event.itv = 0 if prev_frame is None else min(codec.ITV_CAP, frame - prev_frame)
        prev_frame = frame
        events.append(event)
    return codec.events_to_sequence(events)
