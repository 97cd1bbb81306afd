#!/usr/bin/env python3
"""Render real-corpus danmakus next to generated ones as PPM frame strips.

Either point --ckpt at a trained checkpoint or let the script do a short
training run first.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from danmakugen import corpus, render, simulation, templates, training


def render_sequence(seq, out_dir, stride):
    trace = simulation.run(seq, record_frames=True)
    return render.render_frames(trace, stride, out_dir)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/renders")
    parser.add_argument("--ckpt", default=None, help="checkpoint to sample; trains psgan briefly if omitted")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--count", type=int, default=4)
    parser.add_argument("--stride", type=int, default=20)
    parser.add_argument("--train-iters", type=int, default=500)
    args = parser.parse_args()

    root = Path(args.out)
    manifest = corpus.build_corpus(args.count, args.seed)
    for i, program in enumerate(manifest.programs):
        paths = render_sequence(templates.unroll(program), root / f"real_{i:02d}", args.stride)
        print(f"real_{i:02d} ({program.template_id}): {len(paths)} frames")

    if args.ckpt is not None:
        model, header = training.load_model(args.ckpt)
        print(f"loaded {header['arch']} checkpoint (iteration {header['iteration']})")
    else:
        print(f"training psgan for {args.train_iters} iterations...")
        cfg = training.TrainConfig(model="psgan", iterations=args.train_iters,
                                   eval_every=max(20, args.train_iters), seed=args.seed)
        model, _ = training.train(corpus.build_corpus(34, args.seed), cfg)

    seqs = model.sample_sequences(np.random.default_rng(args.seed), args.count)
    for i, seq in enumerate(seqs):
        paths = render_sequence(seq, root / f"generated_{i:02d}", args.stride)
        print(f"generated_{i:02d}: {len(paths)} frames")
    print(f"frames under {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
