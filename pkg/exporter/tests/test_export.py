"""Exporter contract: format fidelity, pooling, determinism, loader acceptance."""

import json
from pathlib import Path

import numpy as np
import pytest

from outseq_export.backends import MODEL_DIMS, UnknownModel, resolve_model
from outseq_export.cli import main
from outseq_export.corpus_reader import read_corpus
from outseq_export.export import ExportJob, export_contextual, export_static
from outseq_export.subword import split_subwords

# The acceptance check drives the primary toolkit's loader over our output.
from outseq.corpus import BioLabel, O_LABEL, TokenizedSentence, write_column_file
from outseq.features import load_embeddings


def build_corpus(path: Path, n_sentences=50, seed=3) -> list[TokenizedSentence]:
    rng = np.random.default_rng(seed)
    words = [
        "patients", "reported", "rash", "hypertension", "fatigue", "baseline",
        "blood-pressure", "survival", "diarrhea", "the", "of", "was",
    ]
    sentences = []
    for idx in range(n_sentences):
        n = int(rng.integers(3, 10))
        toks = [words[int(rng.integers(len(words)))] for _ in range(n)]
        labels = [O_LABEL] * n
        if n > 4:
            labels[2] = BioLabel("B", "AdverseEvents")
        sentences.append(
            TokenizedSentence(toks, ["NN"] * n, labels, doc_id=f"d{idx // 10}", sent_index=idx % 10)
        )
    write_column_file(sentences, path)
    return sentences


class TestSubwords:
    def test_short_token_single_piece(self):
        assert split_subwords("rash") == ["rash"]

    def test_long_token_multiple_pieces(self):
        pieces = split_subwords("hypertension")
        assert pieces[0] == "hype"
        assert all(p.startswith("##") for p in pieces[1:])
        assert "".join(p.removeprefix("##") for p in pieces) == "hypertension"


class TestBackends:
    def test_catalog_dims(self):
        assert resolve_model("bioelmo").dim == 3072
        assert resolve_model("bioflair").dim == 7672
        assert resolve_model("biobert").dim == 768

    def test_hash_dim_identifiers(self):
        assert resolve_model("hash4").dim == 4

    def test_unknown_model(self):
        with pytest.raises(UnknownModel):
            resolve_model("made-up-model")

    def test_piece_vectors_stable(self):
        b = resolve_model("hash8")
        np.testing.assert_array_equal(b.piece_vector("rash"), b.piece_vector("rash"))

    def test_layer_changes_vectors(self):
        a = resolve_model("hash8", layer=-1)
        b = resolve_model("hash8", layer=3)
        assert not np.array_equal(a.piece_vector("rash"), b.piece_vector("rash"))

    def test_context_sensitivity(self):
        b = resolve_model("hash8")
        one = b.contextual_piece_vectors(["rash", "was", "mild"])
        two = b.contextual_piece_vectors(["rash", "got", "worse"])
        assert not np.allclose(one[0], two[0])


class TestStaticExport:
    def test_header_counts_vocab_and_dim(self, tmp_path):
        corpus = tmp_path / "c.col"
        sents = [
            TokenizedSentence(["a", "bb", "a"], ["NN"] * 3, [O_LABEL] * 3, "d", 0),
            TokenizedSentence(["ccc"], ["NN"], [O_LABEL], "d", 1),
        ]
        write_column_file(sents, corpus)
        out = tmp_path / "v.txt"
        export_static(ExportJob(corpus=corpus, model="hash4", mode="static", out=out))
        assert out.read_text().splitlines()[0] == "3 4"

    def test_loader_reads_static_export(self, tmp_path):
        corpus = tmp_path / "c.col"
        build_corpus(corpus, n_sentences=10)
        out = tmp_path / "v.txt"
        export_static(ExportJob(corpus=corpus, model="hash16", mode="static", out=out))
        store = load_embeddings(out, "static")
        assert store.dim == 16
        assert "rash" in store.vectors
        # unseen words are simply absent; the consumer falls back to UNK
        assert "zzz" not in store.vectors


class TestContextualExport:
    def test_one_vector_per_token(self, tmp_path):
        corpus = tmp_path / "c.col"
        sents = [TokenizedSentence(["a", "b", "c", "d", "e", "f"], ["NN"] * 6, [O_LABEL] * 6, "d", 0)]
        write_column_file(sents, corpus)
        out = tmp_path / "c.jsonl"
        export_contextual(ExportJob(corpus=corpus, model="hash8", mode="contextual", out=out))
        record = json.loads(out.read_text().splitlines()[0])
        assert record["key"] == "d:0"
        assert len(record["vectors"]) == 6

    def test_pooling_modes_differ_on_multipiece_tokens(self, tmp_path):
        corpus = tmp_path / "c.col"
        sents = [TokenizedSentence(["hypertension"], ["NN"], [O_LABEL], "d", 0)]
        write_column_file(sents, corpus)
        mean_out = tmp_path / "mean.jsonl"
        first_out = tmp_path / "first.jsonl"
        export_contextual(ExportJob(corpus=corpus, model="hash8", mode="contextual",
                                    out=mean_out, pooling="mean"))
        export_contextual(ExportJob(corpus=corpus, model="hash8", mode="contextual",
                                    out=first_out, pooling="first"))
        a = json.loads(mean_out.read_text())["vectors"][0]
        b = json.loads(first_out.read_text())["vectors"][0]
        assert a != b

    def test_bioelmo_declares_3072(self, tmp_path):
        corpus = tmp_path / "c.col"
        sents = [TokenizedSentence(["rash", "seen"], ["NN"] * 2, [O_LABEL] * 2, "d", 0)]
        write_column_file(sents, corpus)
        out = tmp_path / "c.jsonl"
        export_contextual(ExportJob(corpus=corpus, model="bioelmo", mode="contextual", out=out))
        store = load_embeddings(out, "contextual")
        assert store.dim == 3072

    def test_every_sentence_key_exactly_once(self, tmp_path):
        corpus = tmp_path / "c.col"
        build_corpus(corpus, n_sentences=25)
        out = tmp_path / "c.jsonl"
        export_contextual(ExportJob(corpus=corpus, model="hash8", mode="contextual", out=out))
        keys = [json.loads(line)["key"] for line in out.read_text().splitlines()]
        expected = [s.key for s in read_corpus(corpus)]
        assert keys == expected
        assert len(keys) == len(set(keys)) == 25


class TestAcceptance:
    def test_exported_files_pass_the_loader_on_fifty_sentences(self, tmp_path):
        corpus = tmp_path / "c.col"
        sentences = build_corpus(corpus, n_sentences=50)
        ctx_out = tmp_path / "ctx.jsonl"
        export_contextual(
            ExportJob(corpus=corpus, model="pubmed-w2v", mode="contextual", out=ctx_out)
        )
        store = load_embeddings(ctx_out, "contextual")  # raises on any mismatch
        store.validate_coverage(sentences)
        assert store.dim == MODEL_DIMS["pubmed-w2v"]

        static_out = tmp_path / "static.txt"
        export_static(ExportJob(corpus=corpus, model="pubmed-w2v", mode="static", out=static_out))
        static_store = load_embeddings(static_out, "static")
        assert static_store.dim == MODEL_DIMS["pubmed-w2v"]
        print("ACCEPTANCE exporter contract: PASS (50 sentences, loader clean)")

    def test_exports_deterministic_across_runs(self, tmp_path):
        corpus = tmp_path / "c.col"
        build_corpus(corpus, n_sentences=50)
        for mode, name in (("contextual", "c{}.jsonl"), ("static", "s{}.txt")):
            out1 = tmp_path / name.format(1)
            out2 = tmp_path / name.format(2)
            for out in (out1, out2):
                job = ExportJob(corpus=corpus, model="hash32", mode=mode, out=out)
                (export_contextual if mode == "contextual" else export_static)(job)
            assert out1.read_bytes() == out2.read_bytes()
        print("ACCEPTANCE exporter determinism: PASS (bit-identical reruns)")


class TestDrivesPrimaryTraining:
    def test_exported_vectors_train_the_tagger(self, tmp_path):
        from outseq.corpus import CorpusSplit, read_column_file
        from outseq.training import ModelConfig, TrainConfig, train

        train_col = tmp_path / "train.col"
        dev_col = tmp_path / "dev.col"
        sentences = build_corpus(tmp_path / "all.col", n_sentences=30)
        write_column_file(sentences[:24], train_col)
        write_column_file(sentences[24:], dev_col)
        train_vecs = tmp_path / "train.jsonl"
        dev_vecs = tmp_path / "dev.jsonl"
        export_contextual(ExportJob(corpus=train_col, model="hash16", mode="contextual", out=train_vecs))
        export_contextual(ExportJob(corpus=dev_col, model="hash16", mode="contextual", out=dev_vecs))
        split = CorpusSplit(
            train=read_column_file(train_col), dev=read_column_file(dev_col), test=[], seed=0
        )
        model, log = train(
            split,
            load_embeddings(train_vecs, "contextual"),
            ModelConfig(encoder="linear", head="softmax", hidden_size=8, pos_dim=4),
            TrainConfig(loss="none", undersample_percent=0, learning_rate=0.1,
                        batch_size=8, epochs=2, optimizer="sgd", seed=1),
            dev_store=load_embeddings(dev_vecs, "contextual"),
        )
        assert len(log) == 2


class TestCli:
    def test_cli_round_trip(self, tmp_path, capsys):
        corpus = tmp_path / "c.col"
        build_corpus(corpus, n_sentences=5)
        out = tmp_path / "v.jsonl"
        code = main([
            "--corpus", str(corpus), "--model", "hash8", "--mode", "contextual",
            "--pooling", "first", "--out", str(out),
        ])
        assert code == 0
        assert "wrote 5 sentences" in capsys.readouterr().out
        load_embeddings(out, "contextual")

    def test_cli_unknown_model_fails(self, tmp_path, capsys):
        corpus = tmp_path / "c.col"
        build_corpus(corpus, n_sentences=2)
        code = main([
            "--corpus", str(corpus), "--model", "nope", "--mode", "static",
            "--out", str(tmp_path / "v.txt"),
        ])
        assert code == 1
        assert "unknown model" in capsys.readouterr().err

    def test_list_models(self, capsys):
        assert main(["--list-models"]) == 0
        out = capsys.readouterr().out
        assert "bioelmo\t3072" in out
