import json

import numpy as np
import pytest
from screensum.corpus import Corpus, CorpusError, load_corpus, synth_corpus, write_corpus
from screensum.embedding import load_embeddings

import embed_export
from embed_export import (
    EncoderError,
    ExportError,
    HashEncoder,
    export,
    load_encoder,
    manifest_path,
    register_encoder,
)
from embed_export.exporter import run


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    episodes, _, _ = synth_corpus(3, 8, 6, seed=5)
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    write_corpus(Corpus(tuple(episodes)), path)
    return path


class TestHashEncoder:
    def test_rows_are_unit_norm_float32(self):
        enc = HashEncoder(16)
        out = enc.encode(["The tide came in.", "Nobody spoke."])
        assert out.shape == (2, 16)
        assert out.dtype == np.float32
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-6)

    def test_tokenless_sentence_maps_to_zero(self):
        out = HashEncoder(8).encode(["?!?"])
        assert not out.any()

    def test_deterministic_across_instances_and_batching(self):
        sents = ["one small step", "for a summarizer", "one small step"]
        a = HashEncoder(32).encode(sents)
        b = np.concatenate([HashEncoder(32).encode([s]) for s in sents])
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a[0], a[2])

    def test_ids(self):
        assert load_encoder("hash-64").dim == 64
        with pytest.raises(EncoderError):
            load_encoder("hash-0")
        with pytest.raises(EncoderError, match="unknown encoder"):
            load_encoder("shrug-3000")

    def test_use_encoder_reports_missing_runtime(self):
        try:
            import tensorflow_hub  # noqa: F401
        except ImportError:
            with pytest.raises(EncoderError, match="tensorflow_hub"):
                load_encoder("use-512")
        else:
            pytest.skip("tensorflow_hub installed; load path untestable offline")


class TestExport:
    def test_round_trip_through_primary_loader(self, corpus_file, tmp_path):
        out = tmp_path / "emb.bin"
        manifest = export(str(corpus_file), "hash-12", str(out), batch_size=5)
        corpus = load_corpus(corpus_file)
        store = load_embeddings(out, corpus)
        assert store.dim == manifest.dim == 12
        assert len(store) == sum(len(ep.scenes) for ep in corpus)
        assert manifest.sentence_count == sum(
            len(s.sentences) for ep in corpus for s in ep.scenes
        )
        assert manifest.preprocessing == "verbatim"

    def test_manifest_written_alongside(self, corpus_file, tmp_path):
        out = tmp_path / "emb.bin"
        manifest = export(str(corpus_file), "hash-12", str(out))
        on_disk = json.loads((tmp_path / manifest_path("emb.bin")).read_text())
        assert on_disk["encoder_id"] == "hash-12"
        assert on_disk["dim"] == manifest.dim
        assert on_disk["corpus_hash"] == manifest.corpus_hash
        assert on_disk["sentence_count"] == manifest.sentence_count
        assert on_disk["created_utc"] == manifest.created_utc
        assert not list(tmp_path.glob("*.tmp"))

    def test_repeat_export_is_bitwise_stable(self, corpus_file, tmp_path):
        first = export(str(corpus_file), "hash-12", str(tmp_path / "a.bin"),
                       batch_size=64)
        second = export(str(corpus_file), "hash-12", str(tmp_path / "b.bin"),
                        batch_size=3)
        assert first.corpus_hash == second.corpus_hash
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_empty_sentence_rejected_with_line_number(self, tmp_path):
        episodes, _, _ = synth_corpus(2, 4, 6, seed=1)
        path = tmp_path / "corpus.jsonl"
        write_corpus(Corpus(tuple(episodes)), path)
        lines = path.read_text().splitlines()
        record = json.loads(lines[1])
        record["scenes"][2]["sentences"][0] = "   "
        # blank separator line shifts the record to file line 3
        path.write_text(lines[0] + "\n\n" + json.dumps(record) + "\n")
        with pytest.raises(ExportError, match=r"line 3") as err:
            export(str(path), "hash-8", str(tmp_path / "emb.bin"))
        assert "empty" in str(err.value)
        assert not (tmp_path / "emb.bin").exists()

    def test_encoder_output_width_is_checked(self, corpus_file, tmp_path):
        class Liar:
            encoder_id = "liar"
            dim = 9

            def encode(self, sentences):
                return np.zeros((len(sentences), 4), dtype=np.float32)

        register_encoder("liar", Liar)
        with pytest.raises(ExportError, match="declared dim 9"):
            export(str(corpus_file), "liar", str(tmp_path / "emb.bin"))

    def test_bad_batch_size(self, corpus_file, tmp_path):
        with pytest.raises(ExportError, match="batch_size"):
            export(str(corpus_file), "hash-8", str(tmp_path / "emb.bin"),
                   batch_size=0)

    def test_unparseable_corpus_propagates_loader_error(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(CorpusError, match="line 1"):
            export(str(path), "hash-8", str(tmp_path / "emb.bin"))


class TestCli:
    def test_success(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "emb.bin"
        rc = run(["--corpus", str(corpus_file), "--encoder", "hash-16",
                  "--out", str(out), "--batch-size", "7"])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "dim 16" in printed
        assert out.exists()
        assert (tmp_path / manifest_path("emb.bin")).exists()

    def test_unknown_encoder_exits_2(self, corpus_file, tmp_path, capsys):
        rc = run(["--corpus", str(corpus_file), "--encoder", "nope",
                  "--out", str(tmp_path / "emb.bin")])
        assert rc == 2
        assert "error: unknown encoder" in capsys.readouterr().err
