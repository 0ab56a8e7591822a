"""Command-line front end.

Seven subcommands cover the whole experiment loop:

  synth        write a small synthetic corpus with embeddings and silver labels
  summarize    run one selection algorithm over a corpus, dump the selections
  pretrain-tp  fit the turning-point network on silver label sets
  train        fit a supervised extractor, optionally warm-started
  evaluate     score one algorithm on a labeled corpus
  cv           k-fold cross-validation with per-fold training
  sweep        re-evaluate while varying one hyperparameter

Every run writes ``manifest.json`` next to its outputs: the resolved
configuration, the seed, and sha256 digests of every input and output
file.  Re-running a subcommand with the same inputs and configuration
reproduces each output byte for byte; workers default to one so that
holds even for parallel-capable commands.

Output layout under ``--out``: ``manifest.json``, plus ``report.json``
and ``report.txt`` where applicable, plus ``summaries/``,
``checkpoints/`` and ``logs/`` subdirectories as needed.
"""

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import numcore as nc
from ._util import canonical_json, sha256_file
from .config import DEFAULTS, ConfigError, ExperimentConfig
from .corpus import (
    CorpusError,
    load_corpus,
    load_silver_tps,
    split_folds,
    synth_corpus,
    write_corpus,
    write_silver_tps,
)
from .embedding import (
    EmbeddingFileError,
    build_tfidf,
    load_embeddings,
    write_embeddings,
)
from .evaluation import (
    BASELINE_ALGOS,
    SUPERVISED_ALGOS,
    UNSUPERVISED_ALGOS,
    _NEEDS_STORE,
    _carve_dev,
    cross_validate,
    evaluate_corpus,
    summarize_episode,
)
from .metrics import f1_selection
from .summarizers import MODEL_KINDS, load_result, save_result, train
from .tpnet import TpNetParams, predict_tp_scenes, pretrain_step

SUMMARIZE_ALGOS = UNSUPERVISED_ALGOS + BASELINE_ALGOS
EVAL_ALGOS = SUMMARIZE_ALGOS + ("oracle",) + SUPERVISED_ALGOS
SWEEP_PARAMS = ("lambda1", "ratio", "edge_threshold", "tp_threshold")


# ---------------------------------------------------------------------------
# parser


def _add_run_flags(p, corpus=True, embeddings=False, silver=False):
    if corpus:
        p.add_argument("--corpus", metavar="FILE",
                       help="corpus file, one episode per line")
    if embeddings:
        p.add_argument("--embeddings", metavar="FILE",
                       help="sentence-embedding file aligned with the corpus")
    if silver:
        p.add_argument("--silver-labels", metavar="FILE",
                       help="silver turning-point label file")
    p.add_argument("--config", metavar="FILE",
                   help="JSON config file; command-line flags override it")
    p.add_argument("--out", dest="out_dir", metavar="DIR",
                   help="output directory for the manifest and artifacts")
    p.add_argument("--seed", type=int,
                   help=f"RNG seed (default {DEFAULTS.seed})")


def _add_algo_flags(p):
    p.add_argument("--lambda1", type=float,
                   help="weight on incoming (earlier-scene) edges in directed "
                        f"centrality (default {DEFAULTS.lambda1})")
    p.add_argument("--ratio", type=float,
                   help="summary length as a fraction of scene count "
                        f"(default {DEFAULTS.ratio})")
    p.add_argument("--threshold", dest="edge_threshold", type=float,
                   help="similarity-graph edge pruning threshold "
                        f"(default {DEFAULTS.edge_threshold})")
    p.add_argument("--tp-threshold", type=float,
                   help="posterior cutoff for predicted turning-point scenes "
                        f"(default {DEFAULTS.tp_threshold})")
    p.add_argument("--tp-checkpoint", metavar="FILE",
                   help="pretrained turning-point checkpoint "
                        "(required by summer-unsup)")
    p.add_argument("--charscore-union", action="store_true", default=None,
                   help="audit form of character scores: any main-cast "
                        "speaker counts the whole scene")
    p.add_argument("--power-iteration", action="store_true", default=None,
                   help="rank tf*idf graph nodes by stationary weight "
                        "instead of degree")


def _add_train_flags(p):
    p.add_argument("--no-reg", action="store_true",
                   help="drop both turning-point regularizers from the loss")
    p.add_argument("--fixed-tps", choices=("none", "prior", "onehot"),
                   help="pin the turning-point posterior instead of learning "
                        f"it (default {DEFAULTS.fixed_tps})")
    p.add_argument("--epochs", type=int,
                   help=f"training epochs (default {DEFAULTS.epochs})")
    p.add_argument("--lr", type=float,
                   help=f"learning rate (default {DEFAULTS.lr})")
    p.add_argument("--dev-fraction", type=float,
                   help="fraction of training episodes held out for early "
                        f"stopping (default {DEFAULTS.dev_fraction})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="screensum",
        description="Narrative-structure-aware extractive screenplay "
                    "summarization.",
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND")

    p = sub.add_parser("synth", help="write a synthetic fixture corpus")
    p.add_argument("--episodes", type=int, default=4,
                   help="number of episodes (default 4)")
    p.add_argument("--scenes", type=int, default=40,
                   help="scenes per episode (default 40)")
    p.add_argument("--dim", type=int, default=16,
                   help="embedding width (default 16)")
    _add_run_flags(p, corpus=False)

    p = sub.add_parser("summarize",
                       help="select summary scenes with one algorithm")
    p.add_argument("--algo", choices=SUMMARIZE_ALGOS,
                   help="selection algorithm")
    _add_algo_flags(p)
    _add_run_flags(p, embeddings=True)

    p = sub.add_parser("pretrain-tp",
                       help="fit the turning-point network on silver labels")
    p.add_argument("--epochs", type=int,
                   help=f"training epochs (default {DEFAULTS.epochs})")
    p.add_argument("--lr", type=float,
                   help=f"learning rate (default {DEFAULTS.lr})")
    p.add_argument("--out-checkpoint", metavar="FILE",
                   help="checkpoint path "
                        "(default checkpoints/tpnet.ckpt under --out)")
    _add_run_flags(p, embeddings=True, silver=True)

    p = sub.add_parser("train", help="fit a supervised extractor")
    p.add_argument("--model", choices=MODEL_KINDS, help="model kind to fit")
    p.add_argument("--pretrained", dest="tp_checkpoint", metavar="FILE",
                   help="turning-point checkpoint for warm starting "
                        "(summer only)")
    p.add_argument("--fold-spec", metavar="K:I",
                   help="hold out fold I of a deterministic K-fold split "
                        "as the test set")
    p.add_argument("--ratio", type=float,
                   help="summary length as a fraction of scene count "
                        f"(default {DEFAULTS.ratio})")
    _add_train_flags(p)
    _add_run_flags(p, embeddings=True)

    p = sub.add_parser("evaluate",
                       help="score one algorithm on a labeled corpus")
    p.add_argument("--algo", choices=EVAL_ALGOS, help="algorithm to score")
    p.add_argument("--model-checkpoint", metavar="DIR",
                   help="directory written by the train subcommand "
                        "(required by sup-* algorithms)")
    _add_algo_flags(p)
    _add_run_flags(p, embeddings=True)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("--algo", choices=EVAL_ALGOS, help="algorithm to score")
    p.add_argument("--folds", type=int,
                   help=f"number of folds (default {DEFAULTS.folds})")
    p.add_argument("--jobs", type=int,
                   help="worker processes for folds "
                        f"(default {DEFAULTS.jobs})")
    _add_algo_flags(p)
    _add_train_flags(p)
    _add_run_flags(p, embeddings=True)

    p = sub.add_parser("sweep",
                       help="re-evaluate while varying one hyperparameter")
    p.add_argument("--algo", choices=SUMMARIZE_ALGOS + ("oracle",),
                   help="algorithm to score at each value")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS,
                   help="hyperparameter to vary")
    p.add_argument("--values", required=True, metavar="SPEC",
                   help="start:stop:step (inclusive) or a comma-separated "
                        "list")
    _add_algo_flags(p)
    _add_run_flags(p, embeddings=True)

    return parser


# ---------------------------------------------------------------------------
# config resolution and manifest plumbing

_FLAG_KEYS = (
    "corpus", "embeddings", "silver_labels", "tp_checkpoint",
    "model_checkpoint", "out_dir", "algo", "model", "ratio", "lambda1",
    "edge_threshold", "charscore_union", "power_iteration", "tp_threshold",
    "fixed_tps", "fold_spec", "epochs", "lr", "dev_fraction", "folds",
    "seed", "jobs",
)


def resolve_config(args):
    """Defaults, then the config file, then explicit flags."""
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    for key in _FLAG_KEYS:
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "no_reg", False):
        overrides["regularizers"] = False
    cfg = cfg.merged(overrides)
    cfg.validate()
    return cfg


def _need(value, what, flag):
    if value is None:
        raise ConfigError(f"no {what} given ({flag})")
    return value


def write_manifest(out_dir, command, cfg, inputs, outputs):
    """Record the resolved config and input/output digests for one run.

    The stored config drops ``out_dir`` so manifests from relocated but
    otherwise identical runs compare equal.
    """
    cfg_dict = cfg.to_dict()
    cfg_dict["out_dir"] = None
    manifest = {
        "command": command,
        "config": cfg_dict,
        "seed": cfg.seed,
        "inputs": {
            name: {"path": path, "sha256": sha256_file(path)}
            for name, path in sorted(inputs.items())
        },
        "outputs": {
            os.path.relpath(path, out_dir): sha256_file(path)
            for path in sorted(outputs)
        },
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(manifest))
    return path


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")


def _write_report_files(out_dir, json_payload, text):
    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(json_payload))
    txt_path = os.path.join(out_dir, "report.txt")
    if not text.endswith("\n"):
        text += "\n"
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return [json_path, txt_path]


def _load_inputs(cfg, need_store):
    """Load corpus (+ aligned embeddings when the algorithm needs them)."""
    corpus = load_corpus(_need(cfg.corpus, "corpus file", "--corpus"))
    store = None
    if need_store:
        path = _need(cfg.embeddings, "embedding file", "--embeddings")
        store = load_embeddings(path, corpus)
    return corpus, store


def _eval_setup(cfg):
    """Spec plus loaded inputs for evaluate/cv/sweep-style commands."""
    tp_state = None
    if cfg.tp_checkpoint:
        tp_state = nc.load_tensors(cfg.tp_checkpoint)
    spec = cfg.algo_spec(tp_state)
    spec.validate()
    corpus, store = _load_inputs(cfg, spec.algo in _NEEDS_STORE)
    inputs = {"corpus": cfg.corpus}
    if store is not None:
        inputs["embeddings"] = cfg.embeddings
    if tp_state is not None:
        inputs["tp_checkpoint"] = cfg.tp_checkpoint
    return spec, corpus, store, inputs


def _checkpoint_inputs(ckpt_dir, stem="model"):
    inputs = {}
    for name in (f"{stem}.json", f"{stem}.ckpt", f"{stem}_tpnet.ckpt"):
        path = os.path.join(ckpt_dir, name)
        if os.path.exists(path):
            inputs[f"model_checkpoint/{name}"] = path
    return inputs


def _parse_values(text):
    """Sweep values: ``start:stop:step`` (inclusive) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(
                f"bad value range {text!r} (want start:stop:step)")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("sweep step must be positive")
        if stop < start:
            raise ConfigError("sweep range is empty")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    values = [float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ConfigError(f"no sweep values in {text!r}")
    return values


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, cfg):
    out_dir = _need(cfg.out_dir, "output directory", "--out")
    os.makedirs(out_dir, exist_ok=True)
    corpus, store, silver = synth_corpus(args.episodes, args.scenes,
                                         args.dim, seed=cfg.seed)
    corpus_path = os.path.join(out_dir, "corpus.jsonl")
    emb_path = os.path.join(out_dir, "embeddings.bin")
    silver_path = os.path.join(out_dir, "silver_tps.jsonl")
    write_corpus(corpus, corpus_path)
    write_embeddings(store, corpus, emb_path)
    write_silver_tps(silver, silver_path)
    write_manifest(out_dir, "synth", cfg, {},
                   [corpus_path, emb_path, silver_path])
    print(f"wrote {len(corpus)} episodes x {args.scenes} scenes "
          f"(dim {args.dim}) to {out_dir}")
    return 0


def cmd_summarize(args, cfg):
    out_dir = _need(cfg.out_dir, "output directory", "--out")
    _need(cfg.algo, "algorithm", "--algo")
    spec, corpus, store, inputs = _eval_setup(cfg)
    tfidf = build_tfidf(corpus) if spec.algo == "textrank-tfidf" else None
    rows = []
    for ep in corpus:
        selection, posterior = summarize_episode(spec, ep, store=store,
                                                 tfidf=tfidf)
        row = {
            "episode_id": ep.episode_id,
            "selected": list(selection.selected),
            "m": selection.m,
        }
        if selection.scores is not None:
            row["scores"] = [float(s) for s in selection.scores]
        if posterior is not None:
            row["tp_scenes"] = [
                list(s) for s in predict_tp_scenes(posterior,
                                                   spec.tp_threshold)
            ]
        rows.append(row)
    os.makedirs(os.path.join(out_dir, "summaries"), exist_ok=True)
    sel_path = os.path.join(out_dir, "summaries", "selections.jsonl")
    _write_jsonl(sel_path, rows)
    write_manifest(out_dir, "summarize", cfg, inputs, [sel_path])
    print(f"summarized {len(rows)} episodes with {spec.algo} -> {sel_path}")
    return 0


def cmd_pretrain_tp(args, cfg):
    out_dir = _need(cfg.out_dir, "output directory", "--out")
    corpus, store = _load_inputs(cfg, need_store=True)
    silver_path = _need(cfg.silver_labels, "silver label file",
                        "--silver-labels")
    silver = load_silver_tps(silver_path, corpus)
    labeled = [ep for ep in corpus if ep.episode_id in silver]
    if not labeled:
        raise ConfigError("no episode in the corpus has silver labels")

    rng = np.random.default_rng(cfg.seed)
    net = TpNetParams.init(rng, store.dim, cfg.hidden, cfg.attn_hidden)
    opt = nc.Adam(net.tensors(), nc.AdamConfig(lr=cfg.lr))
    mats = {ep.episode_id: store.episode_matrices(ep) for ep in labeled}
    log = []
    for epoch in range(cfg.epochs):
        losses = [
            pretrain_step(net, opt, mats[ep.episode_id],
                          silver[ep.episode_id], cfg.tau,
                          cfg.window_fraction)
            for ep in labeled
        ]
        log.append({"epoch": epoch, "loss": float(np.mean(losses))})

    ckpt_path = args.out_checkpoint or os.path.join(out_dir, "checkpoints",
                                                    "tpnet.ckpt")
    os.makedirs(os.path.dirname(ckpt_path) or ".", exist_ok=True)
    nc.save_tensors(ckpt_path, dict(net.named()))
    os.makedirs(os.path.join(out_dir, "logs"), exist_ok=True)
    log_path = os.path.join(out_dir, "logs", "pretrain_log.jsonl")
    _write_jsonl(log_path, log)
    inputs = {"corpus": cfg.corpus, "embeddings": cfg.embeddings,
              "silver_labels": silver_path}
    write_manifest(out_dir, "pretrain-tp", cfg, inputs,
                   [ckpt_path, log_path])
    last = log[-1]["loss"] if log else float("nan")
    print(f"pretrained on {len(labeled)} episodes for {cfg.epochs} epochs "
          f"(final loss {last:.4f}) -> {ckpt_path}")
    return 0


def cmd_train(args, cfg):
    out_dir = _need(cfg.out_dir, "output directory", "--out")
    kind = _need(cfg.model, "model kind", "--model")
    corpus, store = _load_inputs(cfg, need_store=True)
    pretrained = None
    if cfg.tp_checkpoint:
        pretrained = nc.load_tensors(cfg.tp_checkpoint)

    if cfg.fold_spec:
        k, fold_index = cfg.parse_fold_spec()
        split = split_folds(corpus, k, cfg.seed)
        test_ids = split.test_ids(fold_index)
        train_ids = split.train_ids(fold_index)
    else:
        fold_index = 0
        test_ids = ()
        train_ids = tuple(ep.episode_id for ep in corpus)
    rng = np.random.default_rng((cfg.seed, fold_index))
    fit_ids, dev_ids = _carve_dev(train_ids, cfg.dev_fraction, rng)

    result = train(
        [corpus.by_id(e) for e in fit_ids],
        [corpus.by_id(e) for e in dev_ids],
        store,
        kind,
        cfg.train_config(),
        pretrained_state=pretrained,
        regularizers=cfg.regularizers,
        fixed_tps=cfg.fixed_tps,
    )

    ckpt_dir = os.path.join(out_dir, "checkpoints")
    paths = save_result(result, ckpt_dir)
    os.makedirs(os.path.join(out_dir, "logs"), exist_ok=True)
    log_path = os.path.join(out_dir, "logs", "train_log.jsonl")
    _write_jsonl(log_path, result.log)

    test_f1 = None
    if test_ids:
        model = result.build()
        scores = []
        for episode_id in test_ids:
            ep = corpus.by_id(episode_id)
            selection, _ = model.select(ep, store)
            scores.append(f1_selection(selection.selected,
                                       ep.gold_indices()))
        test_f1 = float(np.mean(scores))

    report = {
        "kind": kind,
        "fixed_tps": cfg.fixed_tps,
        "regularizers": cfg.regularizers,
        "best_epoch": result.best_epoch,
        "best_dev_f1": result.best_dev_f1,
        "train_episodes": list(fit_ids),
        "dev_episodes": list(dev_ids),
        "test_episodes": list(test_ids),
        "test_f1": test_f1,
    }
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(report))

    inputs = {"corpus": cfg.corpus, "embeddings": cfg.embeddings}
    if cfg.tp_checkpoint:
        inputs["tp_checkpoint"] = cfg.tp_checkpoint
    write_manifest(out_dir, "train", cfg, inputs,
                   paths + [log_path, report_path])
    dev_txt = "-" if result.best_dev_f1 is None else f"{result.best_dev_f1:.2f}"
    test_txt = "-" if test_f1 is None else f"{test_f1:.2f}"
    print(f"trained {kind} (best epoch {result.best_epoch}, "
          f"dev F1 {dev_txt}, test F1 {test_txt}) -> {ckpt_dir}")
    return 0


def _load_model_for(spec, cfg):
    ckpt_dir = _need(cfg.model_checkpoint, "trained model directory",
                     "--model-checkpoint")
    result = load_result(ckpt_dir)
    if result.kind != spec.kind():
        raise ConfigError(
            f"checkpoint holds a {result.kind} model but --algo asks "
            f"for {spec.algo}"
        )
    result = dataclasses.replace(
        result, config=dataclasses.replace(result.config, ratio=spec.ratio))
    return result.build(), _checkpoint_inputs(ckpt_dir)


def cmd_evaluate(args, cfg):
    out_dir = _need(cfg.out_dir, "output directory", "--out")
    _need(cfg.algo, "algorithm", "--algo")
    spec, corpus, store, inputs = _eval_setup(cfg)
    model = None
    if spec.algo in SUPERVISED_ALGOS:
        model, ckpt_inputs = _load_model_for(spec, cfg)
        inputs.update(ckpt_inputs)
    report = evaluate_corpus(spec, corpus, store=store, model=model)
    os.makedirs(out_dir, exist_ok=True)
    paths = _write_report_files(out_dir, report.to_json_dict(),
                                report.to_text_table())
    write_manifest(out_dir, "evaluate", cfg, inputs, paths)
    print(report.to_text_table())
    return 1 if report.failed_folds else 0


def cmd_cv(args, cfg):
    out_dir = _need(cfg.out_dir, "output directory", "--out")
    _need(cfg.algo, "algorithm", "--algo")
    spec, corpus, store, inputs = _eval_setup(cfg)
    report = cross_validate(spec, corpus, store=store, k=cfg.folds,
                            seed=cfg.seed, jobs=cfg.jobs)
    os.makedirs(out_dir, exist_ok=True)
    paths = _write_report_files(out_dir, report.to_json_dict(),
                                report.to_text_table())
    write_manifest(out_dir, "cv", cfg, inputs, paths)
    print(report.to_text_table())
    if report.failed_folds:
        print(f"error: {len(report.failed_folds)} of {cfg.folds} folds "
              "failed", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args, cfg):
    out_dir = _need(cfg.out_dir, "output directory", "--out")
    _need(cfg.algo, "algorithm", "--algo")
    if cfg.algo in SUPERVISED_ALGOS:
        raise ConfigError(
            "sweep supports baseline and unsupervised algorithms only")
    values = _parse_values(args.values)
    spec, corpus, store, inputs = _eval_setup(cfg)

    rows = []
    for value in values:
        cfg_v = cfg.merged({args.param: value})
        spec_v = cfg_v.algo_spec(spec.tp_state)
        report = evaluate_corpus(spec_v, corpus, store=store)
        rows.append({
            "value": value,
            "macro_f1": report.macro_f1,
            "micro_f1": report.micro_f1,
        })
    peak = max(rows, key=lambda r: r["macro_f1"])

    payload = {
        "algo": cfg.algo,
        "param": args.param,
        "rows": rows,
        "peak": {"value": peak["value"], "macro_f1": peak["macro_f1"]},
    }
    lines = [f"algorithm: {cfg.algo}",
             f"{args.param:>14}{'macro F1':>12}{'micro F1':>12}"]
    for row in rows:
        lines.append(f"{row['value']:>14.4g}{row['macro_f1']:>12.2f}"
                     f"{row['micro_f1']:>12.2f}")
    lines.append(f"peak macro F1 {peak['macro_f1']:.2f} at "
                 f"{args.param} = {peak['value']:g}")
    text = "\n".join(lines)

    os.makedirs(out_dir, exist_ok=True)
    paths = _write_report_files(out_dir, payload, text)
    write_manifest(out_dir, "sweep", cfg, inputs, paths)
    print(text)
    return 0


# ---------------------------------------------------------------------------
# entry point

_HANDLERS = {
    "synth": cmd_synth,
    "summarize": cmd_summarize,
    "pretrain-tp": cmd_pretrain_tp,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
    "sweep": cmd_sweep,
}


def run(argv=None):
    """Parse arguments and execute one subcommand; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _HANDLERS[args.command](args, cfg)
    except (ConfigError, CorpusError, EmbeddingFileError, nc.CheckpointError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
