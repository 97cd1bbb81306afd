"""Synthetic training corpus: program sampling, Gaussian parameter augmentation,
and batch loading for the GAN trainers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import codec, templates
from .templates import DanmakuProgram

AUGMENT_SCALE = 0.05


@dataclass
class CorpusManifest:
    seed: int
    programs: list[DanmakuProgram]

    @property
    def count(self) -> int:
        return len(self.programs)


def build_corpus(count: int, seed: int) -> CorpusManifest:
    """Deterministically sample programs round-robin across the template families."""
    if count < 1:
        raise ValueError(f"corpus count must be >= 1, got {count}")
    programs = []
    for i in range(count):
        template = templates.get_template(templates.FAMILY_ORDER[i % len(templates.FAMILY_ORDER)])
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        params = rng.uniform(template.low, template.high)
        program_seed = int(rng.integers(0, 2**31 - 1))
        programs.append(DanmakuProgram(template.template_id, params, program_seed))
    return CorpusManifest(seed=seed, programs=programs)


def augment(params: np.ndarray, low: np.ndarray, high: np.ndarray,
            rng: np.random.Generator, scale: float = AUGMENT_SCALE) -> np.ndarray:
    """Gaussian mutation with std proportional to each component's magnitude,
    clamped back into the template bounds."""
    if scale < 0:
        raise ValueError(f"augment scale must be >= 0, got {scale}")
    params = np.asarray(params, dtype=np.float64)
    noise = rng.standard_normal(params.shape) * (scale * np.abs(params))
    return np.clip(params + noise, low, high)


def load_batch(manifest: CorpusManifest, batch_size: int, rng: np.random.Generator,
               scale: float = AUGMENT_SCALE) -> np.ndarray:
    """Sample programs uniformly with replacement, mutate parameters, unroll.

    Returns a (batch, 64, 8) array of normalized sequences.
    """
    if manifest.count == 0:
        raise ValueError("cannot load a batch from an empty corpus")
    picks = rng.integers(0, manifest.count, size=batch_size)
    batch = np.empty((batch_size, codec.SEQUENCE_LENGTH, codec.FEATURE_DIM))
    for row, pick in enumerate(picks):
        program = manifest.programs[pick]
        template = templates.get_template(program.template_id)
        mutated = augment(program.params, template.low, template.high, rng, scale)
        batch[row] = templates.unroll(DanmakuProgram(program.template_id, mutated, program.seed))
    return batch


def save_corpus(manifest: CorpusManifest, out_dir) -> list[Path]:
    """Write manifest.json plus one pre-unrolled, un-augmented sequence per program."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": 1,
        "seed": manifest.seed,
        "count": manifest.count,
        "programs": [
            {"template_id": p.template_id, "params": [float(v) for v in p.params], "seed": p.seed}
            for p in manifest.programs
        ],
    }
    paths = [out / "manifest.json"]
    paths[0].write_text(json.dumps(payload, indent=1) + "\n")
    for i, program in enumerate(manifest.programs):
        seq_path = out / f"seq_{i:04d}.json"
        codec.save_sequence(seq_path, templates.unroll(program))
        paths.append(seq_path)
    return paths


def load_corpus(path) -> CorpusManifest:
    root = Path(path)
    manifest_path = root / "manifest.json" if root.is_dir() else root
    payload = json.loads(manifest_path.read_text())
    if payload.get("version") != 1:
        raise ValueError(f"{manifest_path}: unsupported corpus version {payload.get('version')}")
    programs = [
        DanmakuProgram(entry["template_id"], np.array(entry["params"]), int(entry["seed"]))
        for entry in payload["programs"]
    ]
    return CorpusManifest(seed=int(payload["seed"]), programs=programs)
