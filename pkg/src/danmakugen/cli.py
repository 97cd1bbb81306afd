"""Command-line entry point: corpus building, encoding, simulation, training,
generation, evaluation, rendering, curves and agent runs.

Exit codes: 0 success, 1 validation error, 2 runtime failure. Errors print as
one machine-parseable JSON line on stderr. Commands with an output directory
also write a run_manifest.json sufficient to replay the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, agent, codec, corpus, metrics, render, simulation, templates, training


class ValidationError(ValueError):
    pass


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"input file not found: {p}")
    return p


def _require_dir(path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise ValidationError(f"input directory not found: {p}")
    return p


def _write_manifest(out_dir: Path, subcommand: str, args: argparse.Namespace,
                    outputs: list[str]) -> None:
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "tool": "danmakugen",
        "version": __version__,
        "subcommand": subcommand,
        "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        "seeds": {k: v for k, v in flags.items() if "seed" in k},
        "outputs": outputs,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def _load_sequences_dir(path: Path) -> list[np.ndarray]:
    files = sorted(path.glob("seq_*.json"))
    if not files:
        raise ValidationError(f"no seq_*.json files in {path}")
    return [codec.load_sequence(f) for f in files]


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def cmd_corpus_build(args) -> int:
    manifest = corpus.build_corpus(args.count, args.seed)
    out = Path(args.out)
    written = corpus.save_corpus(manifest, out)
    _write_manifest(out, "corpus build", args, [p.name for p in written])
    print(f"wrote corpus of {manifest.count} programs to {out}")
    return 0


def cmd_encode(args) -> int:
    payload = json.loads(_require_file(args.infile).read_text())
    program = templates.DanmakuProgram(
        payload["template_id"], np.array(payload["params"], dtype=np.float64), int(payload["seed"])
    )
    seq = templates.unroll(program)
    codec.save_sequence(args.out, seq)
    print(f"encoded {program.template_id} program to {args.out}")
    return 0


def cmd_decode(args) -> int:
    seq = codec.load_sequence(_require_file(args.infile))
    events = codec.sequence_to_events(seq)
    payload = {
        "version": 1,
        "events": [
            {
                "itv": e.itv, "spawn_dx": e.spawn_dx, "spawn_dy": e.spawn_dy,
                "angle": e.angle, "speed": e.speed, "accel": e.accel,
                "ang_vel": e.ang_vel, "radius": e.radius,
            }
            for e in events
        ],
    }
    Path(args.out).write_text(json.dumps(payload, indent=1) + "\n")
    print(f"decoded {len(events)} shot events to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    seq = codec.load_sequence(_require_file(args.infile))
    trace = simulation.run(seq)
    rep = metrics.report(trace)
    Path(args.report).write_text(json.dumps(rep.as_dict(), indent=1) + "\n")
    if args.trace:
        Path(args.trace).write_text(
            json.dumps(simulation.trace_summary(trace, include_momentum=True), indent=1) + "\n"
        )
    print(f"sf={rep.sf:.4g} mm={rep.mm:.4g} cov={rep.cov:.4g}")
    return 0


def cmd_render(args) -> int:
    seq = codec.load_sequence(_require_file(args.infile))
    trace = simulation.run(seq, record_frames=True)
    out = Path(args.out)
    paths = render.render_frames(trace, args.stride, out)
    _write_manifest(out, "render", args, [p.name for p in paths])
    print(f"wrote {len(paths)} frames to {out}")
    return 0


def cmd_train(args) -> int:
    manifest = corpus.load_corpus(_require_dir(args.data))
    config = training.TrainConfig(
        model=args.model,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        iterations=args.iters,
        pretrain_iterations=args.pretrain_iters,
        supervised_iterations=args.supervised_iters,
        eval_every=args.eval_every,
        eval_samples=args.eval_samples,
        seed=args.seed,
        workers=args.workers,
    )
    out = Path(args.out)
    training.train(manifest, config, out)
    _write_manifest(out, "train", args, ["checkpoint.dgck", "train_log.csv", "train_log.json"])
    print(f"trained {args.model} for {args.iters} iterations; artifacts in {out}")
    return 0


def cmd_generate(args) -> int:
    model, header = training.load_model(_require_file(args.ckpt))
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    seqs = model.sample_sequences(rng, args.count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i, seq in enumerate(seqs):
        name = f"seq_{i:04d}.json"
        codec.save_sequence(out / name, seq)
        names.append(name)
    _write_manifest(out, "generate", args, names)
    print(f"generated {args.count} sequences from {header['arch']} checkpoint into {out}")
    return 0


def cmd_evaluate(args) -> int:
    real_seqs = _load_sequences_dir(_require_dir(args.real))
    real_values, real_failed = training.batch_metric_samples(real_seqs, workers=args.workers)
    if real_failed:
        raise RuntimeError(f"{real_failed} real sequences failed to simulate")
    if args.gen is None:
        training.write_baseline(args.out, real_values)
        print(f"wrote baseline metric samples ({len(real_seqs)} sequences) to {args.out}")
        return 0
    gen_seqs = _load_sequences_dir(_require_dir(args.gen))
    gen_values, gen_failed = training.batch_metric_samples(gen_seqs, workers=args.workers)
    if gen_failed:
        raise RuntimeError(f"{gen_failed} generated sequences failed to simulate")
    rows = metrics.compare_populations(real_values, gen_values)
    lines = ["metric,js_value,n_a,n_b"]
    lines += [f'{r["metric"]},{r["js_value"]!r},{r["n_a"]},{r["n_b"]}' for r in rows]
    Path(args.out).write_text("\n".join(lines) + "\n")
    for r in rows:
        print(f'{r["metric"]}: js={r["js_value"]:.4g} (n_a={r["n_a"]}, n_b={r["n_b"]})')
    return 0


def cmd_curves(args) -> int:
    payload = training.load_log_json(_require_file(args.log))
    baseline = training.load_baseline(_require_file(args.baseline))
    out = Path(args.out)
    paths = training.emit_curves(payload, baseline, out)
    _write_manifest(out, "curves", args, [p.name for p in paths])
    print(f"wrote {len(paths)} curve artifacts to {out}")
    return 0


def cmd_agent(args) -> int:
    seq = codec.load_sequence(_require_file(args.infile))
    report = agent.playability(seq)
    Path(args.report).write_text(json.dumps(report.as_dict(), indent=1) + "\n")
    print(f"survival_ratio={report.survival_ratio:.4g} "
          f"({report.survived_frames}/{report.t_total} frames)")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="danmakugen",
        description="danmaku generation, simulation and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_corpus = sub.add_parser("corpus", help="corpus management")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command", required=True)
    p_build = corpus_sub.add_parser("build", help="build a synthetic danmaku corpus")
    p_build.add_argument("--count", type=int, default=34)
    p_build.add_argument("--seed", type=int, required=True)
    p_build.add_argument("--out", required=True)
    p_build.set_defaults(func=cmd_corpus_build)

    p_encode = sub.add_parser("encode", help="unroll a program JSON into a sequence JSON")
    p_encode.add_argument("--in", dest="infile", required=True)
    p_encode.add_argument("--out", required=True)
    p_encode.set_defaults(func=cmd_encode)

    p_decode = sub.add_parser("decode", help="expand a sequence JSON into physical shot events")
    p_decode.add_argument("--in", dest="infile", required=True)
    p_decode.add_argument("--out", required=True)
    p_decode.set_defaults(func=cmd_decode)

    p_sim = sub.add_parser("simulate", help="simulate a sequence and report metrics")
    p_sim.add_argument("--in", dest="infile", required=True)
    p_sim.add_argument("--report", required=True)
    p_sim.add_argument("--trace", default=None, help="optional trace summary JSON")
    p_sim.set_defaults(func=cmd_simulate)

    p_render = sub.add_parser("render", help="render simulation frames to PPM images")
    p_render.add_argument("--in", dest="infile", required=True)
    p_render.add_argument("--out", required=True)
    p_render.add_argument("--stride", type=int, default=30)
    p_render.set_defaults(func=cmd_render)

    p_train = sub.add_parser("train", help="train a GAN on a corpus directory")
    p_train.add_argument("--model", choices=["dcgan", "psgan", "timegan"], required=True)
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--iters", type=int, default=5000)
    p_train.add_argument("--pretrain-iters", type=int, default=5000)
    p_train.add_argument("--supervised-iters", type=int, default=500)
    p_train.add_argument("--batch-size", type=int, default=12)
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--eval-every", type=int, default=20)
    p_train.add_argument("--eval-samples", type=int, default=30)
    p_train.add_argument("--seed", type=int, required=True)
    p_train.add_argument("--workers", type=int, default=1)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=cmd_train)

    p_gen = sub.add_parser("generate", help="sample sequences from a checkpoint")
    p_gen.add_argument("--ckpt", required=True)
    p_gen.add_argument("--count", type=int, default=30)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_generate)

    p_eval = sub.add_parser("evaluate", help="score sequence populations; with --gen, "
                                             "compare real vs generated")
    p_eval.add_argument("--real", required=True)
    p_eval.add_argument("--gen", default=None)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.set_defaults(func=cmd_evaluate)

    p_curves = sub.add_parser("curves", help="emit training curve CSV + SVG charts")
    p_curves.add_argument("--log", required=True)
    p_curves.add_argument("--baseline", required=True)
    p_curves.add_argument("--out", required=True)
    p_curves.set_defaults(func=cmd_curves)

    p_agent = sub.add_parser("agent", help="run the dodging agent over a sequence")
    p_agent.add_argument("--in", dest="infile", required=True)
    p_agent.add_argument("--report", required=True)
    p_agent.set_defaults(func=cmd_agent)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValidationError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "validation", "detail": str(exc)}), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - single CLI failure boundary
        print(json.dumps({"error": "runtime", "detail": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
