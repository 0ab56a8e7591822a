#!/usr/bin/env python3
"""End-to-end walkthrough of the toolchain on a synthetic corpus.

Generates a fixture corpus with silver turning-point labels, pretrains the
turning-point network on them, compares a few training-free summarizers,
trains a supervised model on top of the pretrained checkpoint, and finishes
with a small cross-validation run.  Every stage goes through the same CLI
entry points as the installed `screensum` command and writes a manifest.json,
so two runs of this script with the same seed can be diffed directory
against directory.
"""

import argparse
import json
import sys
from pathlib import Path

from screensum import cli


def step(title, argv):
    print(f"\n== {title}")
    print("   screensum " + " ".join(argv))
    rc = cli.run(argv)
    if rc != 0:
        print(f"step failed with exit code {rc}", file=sys.stderr)
        sys.exit(rc)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="pipeline_out", help="work directory")
    ap.add_argument("--episodes", type=int, default=8)
    ap.add_argument("--scenes", type=int, default=24)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = str(out / "synth" / "corpus.jsonl")
    embeddings = str(out / "synth" / "embeddings.bin")
    silver = str(out / "synth" / "silver_tps.jsonl")
    tp_ckpt = str(out / "pretrain" / "checkpoints" / "tpnet.ckpt")

    # keep the networks small so the whole walkthrough stays under a minute
    net_cfg = out / "net.json"
    net_cfg.write_text(
        json.dumps(
            {"hidden": 16, "attn_hidden": 16, "epochs": 80, "lr": 0.005, "dropout": 0.0}
        )
    )

    step(
        "generate synthetic corpus",
        [
            "synth",
            "--episodes", str(args.episodes),
            "--scenes", str(args.scenes),
            "--dim", str(args.dim),
            "--seed", str(args.seed),
            "--out", str(out / "synth"),
        ],
    )
    step(
        "pretrain turning-point network on silver labels",
        [
            "pretrain-tp",
            "--corpus", corpus,
            "--embeddings", embeddings,
            "--silver-labels", silver,
            "--config", str(net_cfg),
            "--seed", str(args.seed),
            "--out", str(out / "pretrain"),
        ],
    )
    for algo in ("lead", "textrank-tfidf", "textrank-neural"):
        step(
            f"summarize with {algo}",
            [
                "summarize",
                "--corpus", corpus,
                "--embeddings", embeddings,
                "--algo", algo,
                "--seed", str(args.seed),
                "--out", str(out / f"summarize_{algo}"),
            ],
        )
    step(
        "train supervised model with latent turning points",
        [
            "train",
            "--corpus", corpus,
            "--embeddings", embeddings,
            "--model", "summer",
            "--pretrained", tp_ckpt,
            "--config", str(net_cfg),
            "--fold-spec", f"{args.episodes - 2}:0",
            "--seed", str(args.seed),
            "--out", str(out / "train"),
        ],
    )
    step(
        "cross-validate a training-free algorithm",
        [
            "cv",
            "--corpus", corpus,
            "--embeddings", embeddings,
            "--algo", "scenesum",
            "--folds", "4",
            "--seed", str(args.seed),
            "--out", str(out / "cv"),
        ],
    )

    report = json.loads((out / "train" / "report.json").read_text())
    print("\npipeline finished")
    print(f"  supervised test F1: {report['test_f1']:.2f}")
    print(f"  outputs under: {out}")


if __name__ == "__main__":
    main()
