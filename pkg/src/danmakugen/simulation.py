"""Deterministic frame-stepped bullet simulation.

Frame semantics: at frame t, due bullets spawn, the frame snapshot is taken
(momentum sum, coverage marks, optional recorded frame), then dynamics step
and off-field bullets despawn. A bullet is on screen when its center lies in
[0, W) x [0, H); it despawns once its center reaches the despawn margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import codec


@dataclass(frozen=True)
class SimConfig:
    screen_w: int = 384
    screen_h: int = 448
    emitter: tuple[float, float] = (192.0, 120.0)
    margin: float = 32.0
    cell: int = 8
    t_max: int = 3600
    hit_radius: float = 3.0

    def __post_init__(self):
        if self.screen_w % self.cell or self.screen_h % self.cell:
            raise ValueError(
                f"screen {self.screen_w}x{self.screen_h} not divisible by cell size {self.cell}"
            )

    @property
    def grid_rows(self) -> int:
        return self.screen_h // self.cell

    @property
    def grid_cols(self) -> int:
        return self.screen_w // self.cell


DEFAULT_CONFIG = SimConfig()

# column order of recorded frame arrays
FRAME_FIELDS = ("x", "y", "radius", "speed", "weight")


@dataclass
class BulletState:
    x: float
    y: float
    angle: float
    speed: float
    accel: float
    ang_vel: float
    radius: float
    weight: float


def spawn(event: codec.ShotEvent, emitter: tuple[float, float] = DEFAULT_CONFIG.emitter) -> BulletState:
    codec.validate_event(event)
    return BulletState(
        x=emitter[0] + event.spawn_dx,
        y=emitter[1] + event.spawn_dy,
        angle=event.angle,
        speed=event.speed,
        accel=event.accel,
        ang_vel=event.ang_vel,
        radius=event.radius,
        weight=event.radius / 8.0,
    )


def step_frame(b: BulletState) -> BulletState:
    angle = b.angle + b.ang_vel
    speed = max(0.0, b.speed + b.accel)
    return BulletState(
        x=b.x + speed * math.cos(angle),
        y=b.y + speed * math.sin(angle),
        angle=angle,
        speed=speed,
        accel=b.accel,
        ang_vel=b.ang_vel,
        radius=b.radius,
        weight=b.weight,
    )


@dataclass
class SimTrace:
    l_emitted: int
    t_shoot: int
    t_total: int
    momentum: np.ndarray
    covered: np.ndarray
    config: SimConfig
    frames: list[np.ndarray] | None = None

    def covered_count(self) -> int:
        return int(self.covered.sum())


class _Field:
    """Dense per-bullet state arrays with vectorized frame updates."""

    __slots__ = ("x", "y", "angle", "speed", "accel", "ang_vel", "radius", "weight")

    def __init__(self):
        for name in self.__slots__:
            setattr(self, name, np.empty(0))

    @property
    def count(self) -> int:
        return self.x.size

    def spawn_events(self, events: list[codec.ShotEvent], emitter: tuple[float, float]) -> None:
        ex, ey = emitter
        self.x = np.append(self.x, [ex + e.spawn_dx for e in events])
        self.y = np.append(self.y, [ey + e.spawn_dy for e in events])
        self.angle = np.append(self.angle, [e.angle for e in events])
        self.speed = np.append(self.speed, [e.speed for e in events])
        self.accel = np.append(self.accel, [e.accel for e in events])
        self.ang_vel = np.append(self.ang_vel, [e.ang_vel for e in events])
        self.radius = np.append(self.radius, [e.radius for e in events])
        self.weight = np.append(self.weight, [e.radius / 8.0 for e in events])

    def advance(self) -> None:
        self.angle = self.angle + self.ang_vel
        self.speed = np.maximum(0.0, self.speed + self.accel)
        self.x = self.x + self.speed * np.cos(self.angle)
        self.y = self.y + self.speed * np.sin(self.angle)

    def despawn(self, config: SimConfig) -> None:
        m = config.margin
        alive = (
            (self.x > -m) & (self.x < config.screen_w + m)
            & (self.y > -m) & (self.y < config.screen_h + m)
        )
        if not alive.all():
            for name in self.__slots__:
                setattr(self, name, getattr(self, name)[alive])

    def snapshot(self) -> np.ndarray:
        return np.column_stack((self.x, self.y, self.radius, self.speed, self.weight))


def mark_coverage(covered: np.ndarray, x: np.ndarray, y: np.ndarray, radius: np.ndarray,
                  cell: int) -> None:
    """Mark every grid cell whose rectangle the bullet discs intersect.

    Works on flat position/radius arrays, so frames can be batched: cell
    candidates come from each disc's bounding box, membership from the
    clamped-point distance test.
    """
    if x.size == 0:
        return
    rows, cols = covered.shape
    j0 = np.floor((x - radius) / cell).astype(np.int64)
    j1 = np.floor((x + radius) / cell).astype(np.int64)
    i0 = np.floor((y - radius) / cell).astype(np.int64)
    i1 = np.floor((y + radius) / cell).astype(np.int64)
    span = int(max((j1 - j0).max(), (i1 - i0).max())) + 1
    offs = np.arange(span)
    ci = i0[:, None, None] + offs[None, :, None]
    cj = j0[:, None, None] + offs[None, None, :]
    valid = (ci >= 0) & (ci < rows) & (ci <= i1[:, None, None]) \
        & (cj >= 0) & (cj < cols) & (cj <= j1[:, None, None])
    x0 = cj * cell
    y0 = ci * cell
    bx = x[:, None, None]
    by = y[:, None, None]
    nx = np.clip(bx, x0, x0 + cell)
    ny = np.clip(by, y0, y0 + cell)
    r = radius[:, None, None]
    hit = ((nx - bx) ** 2 + (ny - by) ** 2 <= r * r) & valid
    if hit.any():
        covered.flat[(ci * cols + cj)[hit]] = True


_CHUNK_FRAMES = 64


class _FrameAccumulator:
    """Buffers per-frame bullet state references and reduces them in chunks,
    keeping the per-frame loop to a handful of array ops."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.covered = np.zeros((config.grid_rows, config.grid_cols), dtype=bool)
        self.momentum: list[float] = []
        self._xs: list[np.ndarray] = []
        self._ys: list[np.ndarray] = []
        self._radii: list[np.ndarray] = []
        self._speeds: list[np.ndarray] = []
        self._weights: list[np.ndarray] = []

    def push(self, field: _Field) -> None:
        self._xs.append(field.x)
        self._ys.append(field.y)
        self._radii.append(field.radius)
        self._speeds.append(field.speed)
        self._weights.append(field.weight)
        if len(self._xs) >= _CHUNK_FRAMES:
            self.flush()

    def flush(self) -> None:
        if not self._xs:
            return
        cfg = self.config
        counts = [a.size for a in self._xs]
        x = np.concatenate(self._xs)
        y = np.concatenate(self._ys)
        if x.size:
            radius = np.concatenate(self._radii)
            speed = np.concatenate(self._speeds)
            weight = np.concatenate(self._weights)
            on = (x >= 0) & (x < cfg.screen_w) & (y >= 0) & (y < cfg.screen_h)
            contrib = np.where(on, weight * speed, 0.0)
            bounds = np.cumsum([0] + counts)
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                self.momentum.append(float(np.add.reduce(contrib[lo:hi])))
            mark_coverage(self.covered, x, y, radius, cfg.cell)
        else:
            self.momentum.extend([0.0] * len(counts))
        self._xs.clear()
        self._ys.clear()
        self._radii.clear()
        self._speeds.clear()
        self._weights.clear()


def run(seq: np.ndarray, config: SimConfig = DEFAULT_CONFIG, record_frames: bool = False) -> SimTrace:
    """Simulate a parametric sequence until the screen clears (or t_max)."""
    return run_events(codec.sequence_to_events(seq), config, record_frames)


def run_events(events: list[codec.ShotEvent], config: SimConfig = DEFAULT_CONFIG,
               record_frames: bool = False) -> SimTrace:
    """Simulate an explicit bullet-builder call list (itv gaps set the schedule)."""
    gaps = [e.itv for e in events]
    spawn_frames = np.cumsum(gaps)
    t_shoot = min(max(1, int(spawn_frames[-1])), config.t_max)

    field = _Field()
    acc = _FrameAccumulator(config)
    frames: list[np.ndarray] | None = [] if record_frames else None

    t = 0
    next_event = 0
    n_events = len(events)
    while t < config.t_max and (next_event < n_events or field.count > 0):
        if next_event < n_events and spawn_frames[next_event] == t:
            stop = next_event
            while stop < n_events and spawn_frames[stop] == t:
                stop += 1
            field.spawn_events(events[next_event:stop], config.emitter)
            next_event = stop
        acc.push(field)
        if frames is not None:
            frames.append(field.snapshot())
        field.advance()
        field.despawn(config)
        t += 1
    acc.flush()

    return SimTrace(
        l_emitted=next_event,
        t_shoot=t_shoot,
        t_total=t,
        momentum=np.array(acc.momentum),
        covered=acc.covered,
        config=config,
        frames=frames,
    )


def trace_summary(trace: SimTrace, include_momentum: bool = False) -> dict:
    summary = {
        "L": trace.l_emitted,
        "T_shoot": trace.t_shoot,
        "T_total": trace.t_total,
        "covered_cells": trace.covered_count(),
        "r": trace.config.grid_rows,
        "c": trace.config.grid_cols,
    }
    if include_momentum:
        summary["momentum_sum_per_frame"] = [float(v) for v in trace.momentum]
    return summary
