"""Frame rendering to binary P6 PPM files; bullets drawn as filled discs with
radius-coded colors."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import codec
from .simulation import SimTrace

BACKGROUND = (10, 12, 24)


def radius_color(radius: float) -> tuple[int, int, int]:
    t = (radius - codec.FEATURE_LOW[7]) / (codec.FEATURE_HIGH[7] - codec.FEATURE_LOW[7])
    return (int(round(70 + 185 * t)), int(round(200 - 130 * t)), int(round(255 - 140 * t)))


def draw_frame(bullets: np.ndarray, width: int, height: int) -> np.ndarray:
    """Rasterize one frame; a pixel (col, row) is lit when within a disc."""
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    for x, y, radius in bullets[:, :3]:
        col0 = max(0, int(np.ceil(x - radius)))
        col1 = min(width - 1, int(np.floor(x + radius)))
        row0 = max(0, int(np.ceil(y - radius)))
        row1 = min(height - 1, int(np.floor(y + radius)))
        if col0 > col1 or row0 > row1:
            continue
        cols = np.arange(col0, col1 + 1)
        rows = np.arange(row0, row1 + 1)
        mask = (cols[None, :] - x) ** 2 + (rows[:, None] - y) ** 2 <= radius * radius
        img[row0 : row1 + 1, col0 : col1 + 1][mask] = radius_color(radius)
    return img


def write_ppm(path, img: np.ndarray) -> None:
    height, width, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary PPM file")
    parts = raw.split(b"\n", 3)
    width, height = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width, 3)


def render_frames(trace: SimTrace, stride: int, out_dir) -> list[Path]:
    """Write every stride-th frame of a recorded trace as frame_NNNNNN.ppm."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if trace.frames is None:
        raise ValueError("trace has no recorded frames; rerun simulation with record_frames")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(0, trace.t_total, stride):
        img = draw_frame(trace.frames[t], trace.config.screen_w, trace.config.screen_h)
        path = out / f"frame_{t:06d}.ppm"
        write_ppm(path, img)
        paths.append(path)
    return paths
