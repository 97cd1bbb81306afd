"""Training loops for the three GANs, the periodic evaluation protocol, and
training-curve artifacts (CSV + SVG).

Every run is determined by (corpus seed, train seed, config): batch sampling
and noise draws come from one sequential stream, while each evaluation uses
its own stream keyed by iteration so the evaluation cadence cannot perturb
training. Evaluation never mutates weights.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import checkpoint, corpus, metrics, models, simulation
from .autodiff import Tensor
from .metrics import METRIC_NAMES
from .optim import Adam, GradientError, RMSprop

DEFAULT_LEARNING_RATES = {"dcgan": 2e-4, "psgan": 2e-4, "timegan": 2e-3}

# substream tags for the per-purpose RNGs
_INIT_STREAM = 0
_TRAIN_STREAM = 1
_EVAL_STREAM = 2


class TrainingAbort(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: str
    batch_size: int = 12
    learning_rate: float | None = None
    iterations: int = 5000
    pretrain_iterations: int = 5000
    supervised_iterations: int = 500
    eval_every: int = 20
    eval_samples: int = 30
    seed: int = 0
    augment_scale: float = corpus.AUGMENT_SCALE
    supervised_weight: float = 1.0
    embedder_supervised_weight: float = 0.1
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    rmsprop_decay: float = 0.9
    workers: int = 1

    def __post_init__(self):
        if self.model not in models.ARCHITECTURES:
            raise ValueError(f"unknown model {self.model!r}")
        if self.batch_size < 1 or self.iterations < 0 or self.eval_every < 1:
            raise ValueError("counts must be positive")

    def resolved_lr(self) -> float:
        return self.learning_rate if self.learning_rate is not None else DEFAULT_LEARNING_RATES[self.model]

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "batch_size": self.batch_size,
            "learning_rate": self.resolved_lr(),
            "iterations": self.iterations,
            "pretrain_iterations": self.pretrain_iterations,
            "supervised_iterations": self.supervised_iterations,
            "eval_every": self.eval_every,
            "eval_samples": self.eval_samples,
            "seed": self.seed,
            "augment_scale": self.augment_scale,
            "supervised_weight": self.supervised_weight,
            "embedder_supervised_weight": self.embedder_supervised_weight,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "rmsprop_decay": self.rmsprop_decay,
        }


@dataclass
class TrainLogRow:
    iteration: int
    means: dict[str, float]
    stds: dict[str, float]
    js: dict[str, float]
    g_loss: float
    d_loss: float
    samples: dict[str, list[float]]
    failed: int = 0
    wall_clock: float = 0.0

    def as_dict(self) -> dict:
        # wall clock stays out of artifacts so reruns are byte-identical
        return {
            "iteration": self.iteration,
            "means": self.means,
            "stds": self.stds,
            "js": self.js,
            "g_loss": self.g_loss,
            "d_loss": self.d_loss,
            "samples": self.samples,
            "failed": self.failed,
        }


@dataclass
class TrainLog:
    model: str
    config: dict
    baseline: dict[str, list[float]]
    rows: list[TrainLogRow] = field(default_factory=list)
    phase_history: dict[str, list[float]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "version": 1,
            "model": self.model,
            "config": self.config,
            "baseline": self.baseline,
            "rows": [row.as_dict() for row in self.rows],
            "phase_history": self.phase_history,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=1) + "\n")

    def write_csv(self, path) -> None:
        lines = ["iter,sf_mean,sf_std,mm_mean,mm_std,cov_mean,cov_std,g_loss,d_loss"]
        for row in self.rows:
            cells = [str(row.iteration)]
            for name in METRIC_NAMES:
                cells.append(repr(row.means[name]))
                cells.append(repr(row.stds[name]))
            cells.append(repr(row.g_loss))
            cells.append(repr(row.d_loss))
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n")


def load_log_json(path) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != 1:
        raise ValueError(f"{path}: unsupported train log version {payload.get('version')}")
    return payload


# ---------------------------------------------------------------------------
# metric evaluation (pure given sequences; optionally fanned out to workers)
# ---------------------------------------------------------------------------

def _metric_worker(seq: np.ndarray, config: simulation.SimConfig):
    try:
        rep = metrics.report(simulation.run(seq, config))
        return (rep.sf, rep.mm, rep.cov)
    except Exception:
        return None


def batch_metric_samples(seqs, config: simulation.SimConfig = simulation.DEFAULT_CONFIG,
                         workers: int = 1) -> tuple[dict[str, list[float]], int]:
    """Simulate and score a batch of sequences; returns per-metric value lists
    and the number of failed samples. Results keep input order."""
    items = [np.asarray(s, dtype=np.float64) for s in seqs]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_metric_worker, items, repeat(config)))
    else:
        results = [_metric_worker(s, config) for s in items]
    values = {name: [] for name in METRIC_NAMES}
    failed = 0
    for res in results:
        if res is None:
            failed += 1
            continue
        for name, v in zip(METRIC_NAMES, res):
            values[name].append(float(v))
    return values, failed


def corpus_metric_samples(manifest: corpus.CorpusManifest,
                          config: simulation.SimConfig = simulation.DEFAULT_CONFIG,
                          workers: int = 1) -> dict[str, list[float]]:
    """Metric samples over the un-augmented corpus (the real-data baseline)."""
    from . import templates
    seqs = [templates.unroll(p) for p in manifest.programs]
    values, failed = batch_metric_samples(seqs, config, workers)
    if failed:
        raise RuntimeError(f"{failed} corpus programs failed to simulate")
    return values


def evaluate_model(model, iteration: int, config: TrainConfig,
                   baseline: dict[str, list[float]] | None,
                   sim_config: simulation.SimConfig = simulation.DEFAULT_CONFIG,
                   n: int | None = None) -> TrainLogRow:
    """Generate n fresh samples, simulate, and aggregate the three metrics.

    The sampling stream is keyed by (seed, iteration), independent of the
    training stream.
    """
    n = n if n is not None else config.eval_samples
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _EVAL_STREAM, iteration]))
    start = time.perf_counter()
    seqs = model.sample_sequences(rng, n)
    values, failed = batch_metric_samples(seqs, sim_config, config.workers)
    means = {name: float(np.mean(values[name])) for name in METRIC_NAMES}
    stds = {name: float(np.std(values[name])) for name in METRIC_NAMES}
    js = {}
    if baseline is not None:
        js = {name: metrics.js_divergence(baseline[name], values[name]) for name in METRIC_NAMES}
    return TrainLogRow(
        iteration=iteration, means=means, stds=stds, js=js,
        g_loss=float("nan"), d_loss=float("nan"),
        samples=values, failed=failed, wall_clock=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------

def _check_losses(phase: str, iteration: int, **losses: float) -> None:
    for name, value in losses.items():
        if not np.isfinite(value):
            raise TrainingAbort(f"non-finite {name}={value} in {phase} at iteration {iteration}")


def _sample_noise(model, rng: np.random.Generator, batch: int) -> Tensor:
    if isinstance(model, models.Dcgan):
        return model.generator.sample_latent(rng, batch)
    return model.generator.noise.sample(rng, batch) if isinstance(model, models.Psgan) \
        else model.noise.sample(rng, batch)


def _train_adversarial(model, manifest, config: TrainConfig, log: TrainLog,
                       rng_train: np.random.Generator, baseline, sim_config) -> None:
    lr = config.resolved_lr()
    opt_g = Adam(model.generator.named_parameters(), lr, config.adam_beta1, config.adam_beta2)
    opt_d = Adam(model.discriminator.named_parameters(), lr, config.adam_beta1, config.adam_beta2)
    batch = config.batch_size
    ones = np.ones(batch)
    d_labels = np.concatenate([np.ones(batch), np.zeros(batch)])
    for it in range(1, config.iterations + 1):
        start = time.perf_counter()
        real_values = corpus.load_batch(manifest, batch, rng_train, config.augment_scale)

        # discriminator step: one pass over 12 real + 12 fresh frozen-generator fakes
        noise_d = _sample_noise(model, rng_train, batch)
        with ad.no_grad():
            fake_values = model.generator(noise_d).values
        model.zero_grad()
        scores = model.discriminator(Tensor(np.concatenate([real_values, fake_values])))
        loss_d = ad.binary_cross_entropy(scores, d_labels)
        loss_d.backward()
        opt_d.step()

        # generator step on fresh fakes
        noise_g = _sample_noise(model, rng_train, batch)
        model.zero_grad()
        fake = model.generator(noise_g)
        loss_g = ad.binary_cross_entropy(model.discriminator(fake), ones)
        loss_g.backward()
        opt_g.step()

        d_val, g_val = loss_d.item(), loss_g.item()
        _check_losses("adversarial training", it, d_loss=d_val, g_loss=g_val)
        if it % config.eval_every == 0:
            row = evaluate_model(model, it, config, baseline, sim_config)
            row.g_loss, row.d_loss = g_val, d_val
            row.wall_clock += time.perf_counter() - start
            log.rows.append(row)


def _train_timegan(model: models.Timegan, manifest, config: TrainConfig, log: TrainLog,
                   rng_train: np.random.Generator, baseline, sim_config) -> None:
    lr = config.resolved_lr()
    decay = config.rmsprop_decay
    batch = config.batch_size
    eta = config.supervised_weight
    lam = config.embedder_supervised_weight
    recon_history: list[float] = []
    supervised_history: list[float] = []
    joint_g: list[float] = []
    joint_d: list[float] = []
    log.phase_history = {
        "reconstruction": recon_history,
        "supervised": supervised_history,
        "joint_g": joint_g,
        "joint_d": joint_d,
    }

    def load() -> Tensor:
        return Tensor(corpus.load_batch(manifest, batch, rng_train, config.augment_scale))

    # phase 1: autoencoder pretraining
    opt_ae = RMSprop(model.embedder.named_parameters() + model.reconstructor.named_parameters(),
                     lr, decay)
    for it in range(1, config.pretrain_iterations + 1):
        x = load()
        model.zero_grad()
        loss = ad.mse(model.reconstructor(model.embedder(x)), x)
        loss.backward()
        opt_ae.step()
        value = loss.item()
        _check_losses("timegan pretrain phase", it, reconstruction=value)
        recon_history.append(value)

    # phase 2: supervisor on real latent one-step-ahead prediction
    opt_s = RMSprop(model.supervisor.named_parameters(), lr, decay)
    for it in range(1, config.supervised_iterations + 1):
        x = load()
        with ad.no_grad():
            latents = model.embedder(x).values
        h = Tensor(latents)
        model.zero_grad()
        loss = ad.mse(model.supervisor(h)[:, :-1, :], h[:, 1:, :])
        loss.backward()
        opt_s.step()
        value = loss.item()
        _check_losses("timegan supervised phase", it, supervised=value)
        supervised_history.append(value)

    # phase 3: joint adversarial training in latent space
    opt_g = RMSprop(model.generator.named_parameters() + model.supervisor.named_parameters()
                    + model.noise.named_parameters(), lr, decay)
    opt_e = RMSprop(model.embedder.named_parameters() + model.reconstructor.named_parameters(),
                    lr, decay)
    opt_d = RMSprop(model.discriminator.named_parameters(), lr, decay)
    ones = np.ones(batch * model.config.seq_len)
    d_labels = np.concatenate([ones, np.zeros(batch * model.config.seq_len)])

    def scores(latents: Tensor) -> Tensor:
        out = model.discriminator(latents)
        return ad.reshape(out, (out.values.shape[0] * out.values.shape[1],))

    for it in range(1, config.iterations + 1):
        start = time.perf_counter()
        x = load()

        # discriminator: one pass over detached real + fake latent sequences
        with ad.no_grad():
            h_real = model.embedder(x).values
            h_fake = model.generate_latents(model.noise.sample(rng_train, batch)).values
        model.zero_grad()
        loss_d = ad.binary_cross_entropy(scores(Tensor(np.concatenate([h_real, h_fake]))), d_labels)
        loss_d.backward()
        opt_d.step()

        # generator + supervisor: adversarial plus supervised consistency
        model.zero_grad()
        h_hat = model.generate_latents(model.noise.sample(rng_train, batch))
        adv = ad.binary_cross_entropy(scores(h_hat), ones)
        h = Tensor(h_real)
        sup = ad.mse(model.supervisor(h)[:, :-1, :], h[:, 1:, :])
        loss_g = ad.add(adv, ad.mul(sup, eta))
        loss_g.backward()
        opt_g.step()

        # embedder/reconstructor: reconstruction plus supervised regularizer
        model.zero_grad()
        h_live = model.embedder(x)
        rec = ad.mse(model.reconstructor(h_live), x)
        sup_e = ad.mse(model.supervisor(h_live)[:, :-1, :], h_live[:, 1:, :])
        loss_e = ad.add(rec, ad.mul(sup_e, lam))
        loss_e.backward()
        opt_e.step()

        d_val, g_val, e_val = loss_d.item(), loss_g.item(), loss_e.item()
        _check_losses("timegan joint phase", it, d_loss=d_val, g_loss=g_val, e_loss=e_val)
        joint_g.append(g_val)
        joint_d.append(d_val)
        if it % config.eval_every == 0:
            row = evaluate_model(model, it, config, baseline, sim_config)
            row.g_loss, row.d_loss = g_val, d_val
            row.wall_clock += time.perf_counter() - start
            log.rows.append(row)


def train(manifest: corpus.CorpusManifest, config: TrainConfig, out_dir=None,
          sim_config: simulation.SimConfig = simulation.DEFAULT_CONFIG):
    """Train one model on a corpus; optionally writes checkpoint + logs to out_dir.

    Returns (model, TrainLog).
    """
    rng_init = np.random.default_rng(np.random.SeedSequence([config.seed, _INIT_STREAM]))
    rng_train = np.random.default_rng(np.random.SeedSequence([config.seed, _TRAIN_STREAM]))
    model = models.build_model(config.model, rng_init)
    baseline = corpus_metric_samples(manifest, sim_config, config.workers)
    log = TrainLog(model=config.model, config=config.as_dict(), baseline=baseline)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    try:
        if config.model == "timegan":
            _train_timegan(model, manifest, config, log, rng_train, baseline, sim_config)
        else:
            _train_adversarial(model, manifest, config, log, rng_train, baseline, sim_config)
    except (TrainingAbort, GradientError):
        if out is not None:
            checkpoint.save(out / "diagnostics.dgck", config.model, config.seed, -1,
                            [(n, p.values) for n, p in model.named_parameters()])
        raise

    if out is not None:
        checkpoint.save(out / "checkpoint.dgck", config.model, config.seed, config.iterations,
                        [(n, p.values) for n, p in model.named_parameters()])
        log.write_csv(out / "train_log.csv")
        log.write_json(out / "train_log.json")
    return model, log


def load_model(ckpt_path):
    """Rebuild a model skeleton from a checkpoint header and load its weights."""
    header, values = checkpoint.load(ckpt_path)
    model = models.build_model(header["arch"], np.random.default_rng(0))
    model.load_values(values)
    return model, header


# ---------------------------------------------------------------------------
# curves: per-metric CSV + SVG with mean line, std band and real baseline
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _svg_chart(title: str, xs: list[float], means: list[float], stds: list[float],
               baseline_value: float, path) -> None:
    width, height = 640, 400
    ml, mr, mt, mb = 60, 20, 36, 44
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    lows = [m - s for m, s in zip(means, stds)] + [baseline_value]
    highs = [m + s for m, s in zip(means, stds)] + [baseline_value]
    y_lo, y_hi = min(lows), max(highs)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(v):
        return ml + (v - x_lo) / (x_hi - x_lo) * (width - ml - mr)

    def sy(v):
        return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
    ]
    band = [f"{_fmt(sx(x))},{_fmt(sy(m + s))}" for x, m, s in zip(xs, means, stds)]
    band += [f"{_fmt(sx(x))},{_fmt(sy(m - s))}" for x, m, s in zip(reversed(xs), reversed(means), reversed(stds))]
    parts.append(f'<polygon points="{" ".join(band)}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>')
    line = " ".join(f"{_fmt(sx(x))},{_fmt(sy(m))}" for x, m in zip(xs, means))
    parts.append(f'<polyline points="{line}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    by = _fmt(sy(baseline_value))
    parts.append(f'<line x1="{_fmt(sx(x_lo))}" y1="{by}" x2="{_fmt(sx(x_hi))}" y2="{by}" '
                 f'stroke="#d62728" stroke-width="1.5" stroke-dasharray="6,4"/>')
    # axes with min/max tick labels
    parts.append(f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>')
    for v in (x_lo, x_hi):
        parts.append(f'<text x="{_fmt(sx(v))}" y="{height - mb + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{v:.6g}</text>')
    for v in (y_lo, y_hi):
        parts.append(f'<text x="{ml - 6}" y="{_fmt(sy(v))}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{v:.6g}</text>')
    parts.append(f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">iteration</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def emit_curves(log_payload: dict, baseline: dict[str, list[float]], out_dir) -> list[Path]:
    """Write curves.csv plus one SVG per metric from a train-log payload."""
    rows = log_payload["rows"]
    if not rows:
        raise ValueError("train log has no evaluation rows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["iteration,metric,mean,std,js_vs_real"]
    paths = [out / "curves.csv"]
    for name in METRIC_NAMES:
        xs = [float(r["iteration"]) for r in rows]
        means = [float(r["means"][name]) for r in rows]
        stds = [float(r["stds"][name]) for r in rows]
        for r, m, s in zip(rows, means, stds):
            js = metrics.js_divergence(baseline[name], r["samples"][name])
            lines.append(f'{r["iteration"]},{name},{m!r},{s!r},{js!r}')
        baseline_value = float(np.mean(baseline[name]))
        svg_path = out / f"curve_{name}.svg"
        _svg_chart(f"{name} during training (band: +/-1 std; dashed: real corpus mean)",
                   xs, means, stds, baseline_value, svg_path)
        paths.append(svg_path)
    paths[0].write_text("\n".join(lines) + "\n")
    return paths


def write_baseline(path, samples: dict[str, list[float]]) -> None:
    payload = {
        "version": 1,
        "count": len(samples[METRIC_NAMES[0]]),
        "metrics": {name: samples[name] for name in METRIC_NAMES},
        "means": {name: float(np.mean(samples[name])) for name in METRIC_NAMES},
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_baseline(path) -> dict[str, list[float]]:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != 1:
        raise ValueError(f"{path}: unsupported baseline version {payload.get('version')}")
    return {name: [float(v) for v in payload["metrics"][name]] for name in METRIC_NAMES}
