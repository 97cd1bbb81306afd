"""Shot-event feature schema and conversion to normalized parametric sequences.

A danmaku is a sequence of bullet-builder calls. Each call is one ShotEvent
with 8 physical features; a full danmaku is 64 such events, stored row-wise
in [0, 1] so logistic generator heads can emit them directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SEQUENCE_LENGTH = 64
FEATURE_DIM = 8
ITV_CAP = 60

FEATURE_NAMES = ("itv", "spawn_dx", "spawn_dy", "angle", "speed", "accel", "ang_vel", "radius")
FEATURE_LOW = np.array([0.0, -64.0, -64.0, 0.0, 0.0, -0.1, -0.2, 2.0])
FEATURE_HIGH = np.array([60.0, 64.0, 64.0, 2.0 * math.pi, 6.0, 0.1, 0.2, 16.0])
_SPAN = FEATURE_HIGH - FEATURE_LOW

_ROW_TOLERANCE = 1e-9


@dataclass
class ShotEvent:
    """One bullet-builder call; itv is the frame gap since the previous call."""

    itv: int
    spawn_dx: float
    spawn_dy: float
    angle: float
    speed: float
    accel: float
    ang_vel: float
    radius: float

    def as_array(self) -> np.ndarray:
        return np.array([self.itv, self.spawn_dx, self.spawn_dy, self.angle,
                         self.speed, self.accel, self.ang_vel, self.radius])


def validate_event(event: ShotEvent) -> None:
    raw = event.as_array()
    for name, value, lo, hi in zip(FEATURE_NAMES, raw, FEATURE_LOW, FEATURE_HIGH):
        if not (lo <= value <= hi):
            raise ValueError(f"shot event field {name}={value!r} outside [{lo}, {hi}]")


def normalize(event: ShotEvent) -> np.ndarray:
    """Affine map of each field onto [0, 1] using the declared ranges."""
    validate_event(event)
    return (event.as_array() - FEATURE_LOW) / _SPAN


def denormalize(row: np.ndarray) -> ShotEvent:
    """Inverse of normalize; itv rounds half-up to a whole frame count."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (FEATURE_DIM,):
        raise ValueError(f"expected a row of {FEATURE_DIM} features, got shape {row.shape}")
    if np.any(row < -_ROW_TOLERANCE) or np.any(row > 1.0 + _ROW_TOLERANCE):
        bad = int(np.argmax((row < -_ROW_TOLERANCE) | (row > 1.0 + _ROW_TOLERANCE)))
        raise ValueError(f"feature {FEATURE_NAMES[bad]}={row[bad]!r} outside [0, 1]")
    row = np.clip(row, 0.0, 1.0)
    raw = FEATURE_LOW + row * _SPAN
    itv = int(math.floor(raw[0] + 0.5))
    return ShotEvent(itv, *raw[1:])


def events_to_sequence(events: list[ShotEvent]) -> np.ndarray:
    """Normalize exactly SEQUENCE_LENGTH events into an L x d matrix."""
    if len(events) != SEQUENCE_LENGTH:
        raise ValueError(f"expected {SEQUENCE_LENGTH} events, got {len(events)}")
    if events[0].itv != 0:
        raise ValueError("first event of a sequence must have itv == 0")
    return np.stack([normalize(e) for e in events])


def sequence_to_events(seq: np.ndarray) -> list[ShotEvent]:
    seq = validate_sequence(seq)
    return [denormalize(row) for row in seq]


def validate_sequence(seq: np.ndarray) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.float64)
    if seq.shape != (SEQUENCE_LENGTH, FEATURE_DIM):
        raise ValueError(
            f"parametric sequence must be {SEQUENCE_LENGTH}x{FEATURE_DIM}, got {seq.shape}"
        )
    if np.any(seq < -_ROW_TOLERANCE) or np.any(seq > 1.0 + _ROW_TOLERANCE):
        raise ValueError("parametric sequence entries must lie in [0, 1]")
    return np.clip(seq, 0.0, 1.0)


def shooting_duration(seq: np.ndarray) -> int:
    """Frame index of the final builder call: the sum of denormalized itv gaps."""
    return sum(e.itv for e in sequence_to_events(seq))


def save_sequence(path, seq: np.ndarray) -> None:
    seq = validate_sequence(seq)
    payload = {
        "version": 1,
        "length": SEQUENCE_LENGTH,
        "dims": FEATURE_DIM,
        "features": [[float(v) for v in row] for row in seq],
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")) + "\n")


def load_sequence(path) -> np.ndarray:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != 1:
        raise ValueError(f"{path}: unsupported sequence file version {payload.get('version')}")
    if payload.get("length") != SEQUENCE_LENGTH or payload.get("dims") != FEATURE_DIM:
        raise ValueError(f"{path}: wrong sequence dimensions in header")
    return validate_sequence(np.array(payload["features"], dtype=np.float64))
