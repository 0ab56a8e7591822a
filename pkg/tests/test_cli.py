"""End-to-end CLI tests: every subcommand, config precedence, manifests."""

import json
import os

import numpy as np
import pytest

from screensum import numcore as nc
from screensum._util import sha256_file
from screensum.cli import _parse_values, build_parser, resolve_config, run
from screensum.config import ConfigError, ExperimentConfig
from screensum.corpus import load_corpus, load_silver_tps
from screensum.embedding import load_embeddings
from screensum.evaluation import _episode_seed
from screensum.graphsum import baseline
from screensum.summarizers import load_result
from screensum.tpnet import TpNetParams

TINY_NET = {"hidden": 4, "attn_hidden": 4, "epochs": 2, "dropout": 0.0}


def cli(*argv):
    return run([str(a) for a in argv])


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh]


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_cfg(directory, **extra):
    path = os.path.join(directory, "cfg.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({**TINY_NET, **extra}, fh)
    return path


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fix")
    assert cli("synth", "--episodes", 6, "--scenes", 12, "--dim", 8,
               "--seed", 21, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def tp_ckpt(fixture_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("pre")
    cfg = write_cfg(str(out))
    assert cli("pretrain-tp",
               "--corpus", fixture_dir / "corpus.jsonl",
               "--embeddings", fixture_dir / "embeddings.bin",
               "--silver-labels", fixture_dir / "silver_tps.jsonl",
               "--config", cfg, "--out", out) == 0
    return out / "checkpoints" / "tpnet.ckpt"


@pytest.fixture(scope="module")
def model_dir(fixture_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    cfg = write_cfg(str(out))
    assert cli("train", "--model", "summarunner",
               "--corpus", fixture_dir / "corpus.jsonl",
               "--embeddings", fixture_dir / "embeddings.bin",
               "--config", cfg, "--out", out) == 0
    return out


class TestParsing:
    def test_range_values(self):
        values = _parse_values("0.1:0.9:0.1")
        assert values == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

    def test_comma_values(self):
        assert _parse_values("0.5, 0.25,1") == [0.5, 0.25, 1.0]

    def test_bad_ranges(self):
        with pytest.raises(ConfigError):
            _parse_values("0.1:0.9:0")
        with pytest.raises(ConfigError):
            _parse_values("0.9:0.1:0.1")
        with pytest.raises(ConfigError):
            _parse_values("0.1:0.9")

    def test_unknown_algo_rejected_at_parse(self):
        with pytest.raises(SystemExit):
            cli("summarize", "--algo", "wat", "--out", "x")

    def test_supervised_rejected_by_summarize_parser(self):
        with pytest.raises(SystemExit):
            cli("summarize", "--algo", "sup-summer", "--out", "x")

    def test_help_documents_defaults(self, capsys):
        with pytest.raises(SystemExit):
            cli("summarize", "--help")
        text = " ".join(capsys.readouterr().out.split())
        assert "default 0.7" in text  # lambda1
        assert "default 0.3" in text  # ratio
        assert "default 0.2" in text  # edge threshold


class TestConfigResolution:
    def test_flags_override_file(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"lambda1": 0.4, "ratio": 0.5}))
        args = build_parser().parse_args(
            ["summarize", "--config", str(cfg_path), "--ratio", "0.2"])
        cfg = resolve_config(args)
        assert cfg.lambda1 == 0.4
        assert cfg.ratio == 0.2
        assert cfg.edge_threshold == ExperimentConfig().edge_threshold

    def test_no_reg_flag_sets_regularizers_false(self):
        args = build_parser().parse_args(["train", "--no-reg"])
        assert resolve_config(args).regularizers is False

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"lambda": 0.4}))
        assert cli("summarize", "--config", cfg_path, "--out", "x") == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_invalid_value_exits_2(self, capsys):
        assert cli("summarize", "--algo", "lead", "--ratio", "1.5",
                   "--out", "x") == 2
        assert "ratio" in capsys.readouterr().err

    def test_missing_out_dir_exits_2(self, fixture_dir, capsys):
        assert cli("summarize", "--algo", "lead",
                   "--corpus", fixture_dir / "corpus.jsonl") == 2
        assert "--out" in capsys.readouterr().err


class TestSynth:
    def test_fixture_files_load_back(self, fixture_dir):
        corpus = load_corpus(fixture_dir / "corpus.jsonl")
        assert len(corpus) == 6
        store = load_embeddings(fixture_dir / "embeddings.bin", corpus)
        assert store.dim == 8
        silver = load_silver_tps(fixture_dir / "silver_tps.jsonl", corpus)
        assert set(silver) == {ep.episode_id for ep in corpus}

    def test_manifest_hashes_match_files(self, fixture_dir):
        manifest = read_json(fixture_dir / "manifest.json")
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 21
        assert manifest["config"]["out_dir"] is None
        assert sorted(manifest["outputs"]) == [
            "corpus.jsonl", "embeddings.bin", "silver_tps.jsonl"]
        for rel, digest in manifest["outputs"].items():
            assert sha256_file(str(fixture_dir / rel)) == digest

    def test_rerun_is_hash_identical(self, fixture_dir, tmp_path):
        assert cli("synth", "--episodes", 6, "--scenes", 12, "--dim", 8,
                   "--seed", 21, "--out", tmp_path) == 0
        first = (fixture_dir / "manifest.json").read_bytes()
        again = (tmp_path / "manifest.json").read_bytes()
        assert first == again

    def test_different_seed_changes_outputs(self, fixture_dir, tmp_path):
        assert cli("synth", "--episodes", 6, "--scenes", 12, "--dim", 8,
                   "--seed", 22, "--out", tmp_path) == 0
        a = read_json(fixture_dir / "manifest.json")["outputs"]
        b = read_json(tmp_path / "manifest.json")["outputs"]
        assert a != b


class TestSummarize:
    def test_lead_matches_baseline(self, fixture_dir, tmp_path):
        assert cli("summarize", "--algo", "lead",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--out", tmp_path) == 0
        rows = read_jsonl(tmp_path / "summaries" / "selections.jsonl")
        corpus = load_corpus(fixture_dir / "corpus.jsonl")
        assert len(rows) == len(corpus)
        for row, ep in zip(rows, corpus):
            expected = baseline("lead", len(ep.scenes), 0.3)
            assert row["episode_id"] == ep.episode_id
            assert row["selected"] == list(expected.selected)
            assert row["m"] == expected.m

    def test_mixed_uses_per_episode_seeds(self, fixture_dir, tmp_path):
        assert cli("summarize", "--algo", "mixed", "--seed", 9,
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--out", tmp_path) == 0
        rows = read_jsonl(tmp_path / "summaries" / "selections.jsonl")
        corpus = load_corpus(fixture_dir / "corpus.jsonl")
        for row, ep in zip(rows, corpus):
            expected = baseline("mixed", len(ep.scenes), 0.3,
                                seed=_episode_seed(9, ep.episode_id))
            assert row["selected"] == list(expected.selected)

    def test_rerun_is_hash_identical(self, fixture_dir, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            assert cli("summarize", "--algo", "textrank-neural",
                       "--corpus", fixture_dir / "corpus.jsonl",
                       "--embeddings", fixture_dir / "embeddings.bin",
                       "--out", out) == 0
        a = (out_a / "summaries" / "selections.jsonl").read_bytes()
        b = (out_b / "summaries" / "selections.jsonl").read_bytes()
        assert a == b
        assert (out_a / "manifest.json").read_bytes() == \
            (out_b / "manifest.json").read_bytes()

    def test_summer_unsup_demands_checkpoint(self, fixture_dir, tmp_path,
                                             capsys):
        assert cli("summarize", "--algo", "summer-unsup",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--out", tmp_path) == 2
        assert "--tp-checkpoint" in capsys.readouterr().err

    def test_summer_unsup_emits_tp_scenes(self, fixture_dir, tp_ckpt,
                                          tmp_path):
        assert cli("summarize", "--algo", "summer-unsup",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--tp-checkpoint", tp_ckpt, "--out", tmp_path) == 0
        rows = read_jsonl(tmp_path / "summaries" / "selections.jsonl")
        assert all(len(row["tp_scenes"]) == 5 for row in rows)
        manifest = read_json(tmp_path / "manifest.json")
        assert "tp_checkpoint" in manifest["inputs"]

    def test_manifest_input_hashes(self, fixture_dir, tmp_path):
        corpus_path = fixture_dir / "corpus.jsonl"
        assert cli("summarize", "--algo", "last", "--corpus", corpus_path,
                   "--out", tmp_path) == 0
        manifest = read_json(tmp_path / "manifest.json")
        entry = manifest["inputs"]["corpus"]
        assert entry["sha256"] == sha256_file(str(corpus_path))


class TestPretrainTp:
    def test_checkpoint_and_log(self, fixture_dir, tp_ckpt):
        state = nc.load_tensors(str(tp_ckpt))
        assert any(name.startswith("tpnet.encoder.") for name in state)
        log = read_jsonl(tp_ckpt.parent.parent / "logs" /
                         "pretrain_log.jsonl")
        assert [row["epoch"] for row in log] == [0, 1]
        assert all(np.isfinite(row["loss"]) for row in log)

    def test_missing_silver_file_exits_2(self, fixture_dir, tmp_path,
                                         capsys):
        assert cli("pretrain-tp",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--out", tmp_path) == 2
        assert "--silver-labels" in capsys.readouterr().err


class TestTrain:
    def test_report_and_checkpoint(self, fixture_dir, model_dir):
        report = read_json(model_dir / "report.json")
        assert report["kind"] == "summarunner"
        assert report["test_episodes"] == []
        assert report["test_f1"] is None
        assert len(report["train_episodes"]) == 5
        assert len(report["dev_episodes"]) == 1
        result = load_result(str(model_dir / "checkpoints"))
        assert result.kind == "summarunner"
        log = read_jsonl(model_dir / "logs" / "train_log.jsonl")
        assert len(log) == TINY_NET["epochs"]

    def test_fold_spec_holds_out_test_set(self, fixture_dir, tmp_path):
        cfg = write_cfg(str(tmp_path))
        assert cli("train", "--model", "scenesum", "--fold-spec", "3:1",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--config", cfg, "--out", tmp_path) == 0
        report = read_json(tmp_path / "report.json")
        assert len(report["test_episodes"]) == 2
        assert report["test_f1"] is not None
        overlap = set(report["test_episodes"]) & (
            set(report["train_episodes"]) | set(report["dev_episodes"]))
        assert not overlap

    def test_rerun_checkpoint_bit_identical(self, fixture_dir, model_dir,
                                            tmp_path):
        cfg = write_cfg(str(tmp_path))
        assert cli("train", "--model", "summarunner",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--config", cfg, "--out", tmp_path) == 0
        first = (model_dir / "checkpoints" / "model.ckpt").read_bytes()
        again = (tmp_path / "checkpoints" / "model.ckpt").read_bytes()
        assert first == again

    def test_bad_fold_spec_exits_2(self, fixture_dir, capsys):
        assert cli("train", "--model", "summer", "--fold-spec", "3",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--out", "x") == 2
        assert "fold" in capsys.readouterr().err


class TestEvaluate:
    def test_oracle_scores_100(self, fixture_dir, tmp_path):
        assert cli("evaluate", "--algo", "oracle",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--out", tmp_path) == 0
        report = read_json(tmp_path / "report.json")
        assert report["macro_f1"] == 100.0
        assert report["micro_f1"] == 100.0
        text = (tmp_path / "report.txt").read_text()
        assert "algorithm: oracle" in text

    def test_supervised_needs_checkpoint(self, fixture_dir, tmp_path,
                                         capsys):
        assert cli("evaluate", "--algo", "sup-summarunner",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--out", tmp_path) == 2
        assert "--model-checkpoint" in capsys.readouterr().err

    def test_supervised_with_trained_model(self, fixture_dir, model_dir,
                                           tmp_path):
        assert cli("evaluate", "--algo", "sup-summarunner",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--model-checkpoint", model_dir / "checkpoints",
                   "--out", tmp_path) == 0
        report = read_json(tmp_path / "report.json")
        assert report["macro_f1"] is not None
        manifest = read_json(tmp_path / "manifest.json")
        assert "model_checkpoint/model.ckpt" in manifest["inputs"]

    def test_kind_mismatch_exits_2(self, fixture_dir, model_dir, tmp_path,
                                   capsys):
        assert cli("evaluate", "--algo", "sup-scenesum",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--model-checkpoint", model_dir / "checkpoints",
                   "--out", tmp_path) == 2
        err = capsys.readouterr().err
        assert "summarunner" in err and "sup-scenesum" in err


class TestCv:
    def test_unsupervised_cv_report(self, fixture_dir, tmp_path):
        assert cli("cv", "--algo", "scenesum", "--folds", 3,
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--out", tmp_path) == 0
        report = read_json(tmp_path / "report.json")
        assert len(report["folds"]) == 3
        assert all(f["error"] is None for f in report["folds"])

    def test_parallel_report_matches_serial(self, fixture_dir, tmp_path):
        out_1 = tmp_path / "serial"
        out_2 = tmp_path / "parallel"
        for out, jobs in ((out_1, 1), (out_2, 2)):
            assert cli("cv", "--algo", "lead", "--folds", 3,
                       "--jobs", jobs,
                       "--corpus", fixture_dir / "corpus.jsonl",
                       "--out", out) == 0
        a = read_json(out_1 / "report.json")
        b = read_json(out_2 / "report.json")
        assert a == b

    def test_failed_folds_exit_1(self, fixture_dir, tmp_path, capsys):
        # a checkpoint built for 5-wide embeddings cannot score the
        # 8-wide fixture store, so every fold errors out
        bad_net = TpNetParams.init(np.random.default_rng(0), embed_dim=5,
                                   hidden=4, attn_hidden=4)
        bad_ckpt = tmp_path / "bad.ckpt"
        nc.save_tensors(str(bad_ckpt), dict(bad_net.named()))
        assert cli("cv", "--algo", "summer-unsup", "--folds", 3,
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--tp-checkpoint", bad_ckpt, "--out", tmp_path) == 1
        report = read_json(tmp_path / "report.json")
        assert all(f["error"] is not None for f in report["folds"])
        assert "FAILED" in (tmp_path / "report.txt").read_text()
        assert "folds" in capsys.readouterr().err


class TestSweep:
    def test_nine_rows_and_peak(self, fixture_dir, tmp_path):
        assert cli("sweep", "--algo", "textrank-neural",
                   "--param", "lambda1", "--values", "0.1:0.9:0.1",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--embeddings", fixture_dir / "embeddings.bin",
                   "--out", tmp_path) == 0
        report = read_json(tmp_path / "report.json")
        assert [row["value"] for row in report["rows"]] == \
            [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        best = max(row["macro_f1"] for row in report["rows"])
        assert report["peak"]["macro_f1"] == best
        assert "peak macro F1" in (tmp_path / "report.txt").read_text()

    def test_ratio_sweep_changes_selection_size(self, fixture_dir,
                                                tmp_path):
        assert cli("sweep", "--algo", "lead", "--param", "ratio",
                   "--values", "0.1,0.5",
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--out", tmp_path) == 0
        rows = read_json(tmp_path / "report.json")["rows"]
        assert len(rows) == 2
        assert all(np.isfinite(row["macro_f1"]) for row in rows)

    def test_supervised_sweep_rejected(self, fixture_dir, tmp_path,
                                       capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"algo": "sup-summer"}))
        assert cli("sweep", "--param", "ratio", "--values", "0.1,0.2",
                   "--config", cfg_path,
                   "--corpus", fixture_dir / "corpus.jsonl",
                   "--out", tmp_path) == 2
        assert "sweep supports" in capsys.readouterr().err
