#!/usr/bin/env python3
"""Train all three GAN variants on a fresh synthetic corpus and emit curves.

At --scale 1.0 this reproduces the full schedule (5,000 adversarial
iterations; TimeGAN 5,000 pretrain + 500 supervised + 5,000 joint) with
30-sample evaluations every 20 iterations. Use --scale 0.1 for a desk-scale
smoke run.
"""

import argparse
import sys
import time
from pathlib import Path

from danmakugen import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/experiment")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--count", type=int, default=34)
    parser.add_argument("--scale", type=float, default=1.0,
                        help="schedule multiplier (1.0 = full 5,000-iteration runs)")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    root = Path(args.out)
    corpus_dir = root / "corpus"
    iters = max(1, round(5000 * args.scale))
    pretrain = max(1, round(5000 * args.scale))
    supervised = max(1, round(500 * args.scale))

    steps = [["corpus", "build", "--count", str(args.count), "--seed", str(args.seed),
              "--out", str(corpus_dir)]]
    for model in ("dcgan", "psgan", "timegan"):
        steps.append([
            "train", "--model", model, "--data", str(corpus_dir),
            "--iters", str(iters), "--pretrain-iters", str(pretrain),
            "--supervised-iters", str(supervised),
            "--seed", str(args.seed), "--workers", str(args.workers),
            "--out", str(root / model),
        ])
    steps.append(["evaluate", "--real", str(corpus_dir), "--out", str(root / "baseline.json"),
                  "--workers", str(args.workers)])
    for model in ("dcgan", "psgan", "timegan"):
        steps.append(["curves", "--log", str(root / model / "train_log.json"),
                      "--baseline", str(root / "baseline.json"),
                      "--out", str(root / model / "curves")])
        steps.append(["generate", "--ckpt", str(root / model / "checkpoint.dgck"),
                      "--count", "30", "--seed", str(args.seed + 1),
                      "--out", str(root / model / "samples")])
        steps.append(["evaluate", "--real", str(corpus_dir),
                      "--gen", str(root / model / "samples"),
                      "--out", str(root / model / "js_vs_real.csv"),
                      "--workers", str(args.workers)])

    start = time.perf_counter()
    for argv in steps:
        print("danmakugen " + " ".join(argv))
        code = cli.main(argv)
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code
    print(f"done in {time.perf_counter() - start:.0f}s; artifacts under {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
