"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -s`` to see the line per criterion.
"""

import os
import time

import numpy as np
import pytest

from outseq.annotate import (
    AnnotationDirective,
    ShareDirective,
    expand_contiguous,
    parse_abstract,
)
from outseq.corpus import abstract_to_sentences, compute_stats, split_corpus, to_bio
from outseq.corpus import extract_runs
from outseq.evaluate import strict_metrics
from outseq.features import apply_pca, fit_pca, reconstruct_pca
from outseq.tagger import (
    crf_log_partition,
    predict,
    sentence_loss_and_grads,
    viterbi,
)
from outseq.training import (
    ModelConfig,
    TrainConfig,
    class_balanced_weight,
    compute_label_weights,
    focal_scale,
    train,
)
from outseq.tagger import LabelVocabulary

from helpers import (
    brute_force_log_partition,
    brute_force_viterbi,
    build_separable_corpus,
    finite_difference_grads,
    make_sentence,
    random_annotated_abstract,
    random_bio_labels,
    relative_error,
    span_over,
    tokens_with_offsets,
)
from test_tagger import random_crf_setup, tiny_model
from test_training import corpus_with_counts


def report(name: str, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: PASS{suffix}")


def test_parser_suite():
    t0 = time.perf_counter()
    ab = parse_abstract("patients reported <P 38>rash</> after dosing")
    assert [s.text for s in ab.spans] == ["rash"]
    assert ab.spans[0].domains[0].symbol == "P38"

    ab = parse_abstract("<P 25, 28>quality of sleep</>")
    assert [d.symbol for d in ab.spans[0].domains] == ["P25", "P28"]

    ab = parse_abstract("evaluate <P 0>(S2)right heart size and <P 0>function</>")
    assert [s.text for s in ab.spans] == ["right heart size", "right heart function"]
    assert all(d.symbol == "P0" for s in ab.spans for d in s.domains)

    ab = parse_abstract("<P 0>(E2)systolic and <P 0>diastolic blood pressure</>")
    assert [s.text for s in ab.spans] == [
        "systolic blood pressure",
        "diastolic blood pressure",
    ]

    start = expand_contiguous(
        [["right", "heart", "size"], ["function"]],
        AnnotationDirective(ab.spans[0].domains, ShareDirective("Start", 2)),
    )
    assert [s.text for s in start] == ["right heart size", "right heart function"]
    end = expand_contiguous(
        [["systolic"], ["diastolic", "blood", "pressure"]],
        AnnotationDirective(ab.spans[0].domains, ShareDirective("End", 2)),
    )
    assert [s.text for s in end] == [
        "systolic blood pressure",
        "diastolic blood pressure",
    ]

    rng = np.random.default_rng(515151)
    failures = 0
    for _ in range(1000):
        raw, plain, expected = random_annotated_abstract(rng)
        parsed = parse_abstract(raw)
        got = [(s.text, tuple(d.symbol for d in s.domains)) for s in parsed.spans]
        if parsed.plain_text != plain or got != expected:
            failures += 1
    elapsed = time.perf_counter() - t0
    assert failures == 0
    assert elapsed < 10.0
    report("parser suite", f"1000 round-trips, {elapsed:.2f}s")


def test_bio_round_trip_ten_thousand():
    rng = np.random.default_rng(424242)
    types = ["Physiological", "Death", "LifeImpact", "ResourceUse", "AdverseEvents"]
    failures = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 16))
        words = [f"w{i}" for i in range(n)]
        labels = random_bio_labels(rng, n, types)
        runs, _ = extract_runs(labels)
        spans = [span_over(words, s, e, t) for s, e, t in runs]
        if to_bio(tokens_with_offsets(words), spans) != labels:
            failures += 1
    assert failures == 0
    report("BIO round-trip", "10000 sequences, 0 failures")


def test_crf_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    agree = 0
    for _ in range(200):
        e, trans = random_crf_setup(rng)
        assert abs(crf_log_partition(e, trans) - brute_force_log_partition(e, trans)) < 1e-8
        if viterbi(e, trans) == brute_force_viterbi(e, trans):
            agree += 1
    elapsed = time.perf_counter() - t0
    assert agree == 200
    assert elapsed < 30.0
    report("CRF oracle equivalence", f"200/200 instances, {elapsed:.2f}s")


def test_gradient_checks_twenty_seeds():
    # linear encoder + softmax head + POS table; BiLSTM encoder + beta-weighted
    # CRF head + POS table: every trainable tensor against central differences.
    checked = {}
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        for encoder_kind, head_kind in (("linear", "softmax"), ("bilstm", "crf")):
            model = tiny_model(encoder_kind, head_kind, seed)
            n = 4
            word = rng.normal(size=(n, 3))
            pos_idx = rng.integers(0, 3, size=n)
            gold = rng.integers(0, 3, size=n)
            beta = rng.uniform(0.4, 1.6, size=3)

            def compute():
                feats = np.concatenate(
                    [word, model.pos_table.vectors[pos_idx]], axis=1
                )
                kw = {"crf_beta": beta} if head_kind == "crf" else {"weights": beta}
                return sentence_loss_and_grads(model, feats, pos_idx, gold, **kw)

            params = model.tensors()
            _, analytic = compute()
            numeric = finite_difference_grads(lambda: compute()[0], params)
            for name in params:
                err = relative_error(analytic[name], numeric[name])
                assert err < 1e-4, f"{encoder_kind}/{head_kind}/{name} seed {seed}: {err}"
                checked[f"{encoder_kind}/{head_kind}/{name}"] = max(
                    checked.get(f"{encoder_kind}/{head_kind}/{name}", 0.0), err
                )
    worst = max(checked.values())
    report("gradient checks", f"20 seeds x {len(checked)} tensors, worst rel err {worst:.2e}")


def test_loss_arithmetic():
    import mpmath

    vocab = LabelVocabulary(labels=("O", "B-Death"))
    w = compute_label_weights(corpus_with_counts({"B-Death": 4, "O": 9}), vocab, "iil2")
    assert w.values[vocab.index("B-Death")] == 0.5

    assert abs(focal_scale(0.9, 2.0, 1.0) - 0.01) < 1e-15

    mpmath.mp.dps = 60
    beta = (mpmath.mpf(100) - 1) / 100
    oracle = float((1 - beta) / (1 - beta ** 10))
    assert abs(class_balanced_weight(100, 10) - oracle) < 1e-9
    report("loss arithmetic", f"IIL2=0.5, focal=0.01, CB={oracle:.6f}")


def test_strict_evaluator_worked_examples():
    # 3 of 4 phrases fully detected, nothing spurious
    gold = [["B-X", "O", "B-X", "I-X", "O", "B-X", "O", "B-X"]]
    pred = [["B-X", "O", "B-X", "I-X", "O", "B-X", "O", "O"]]
    m = strict_metrics(gold, pred).to_json_dict()
    assert (m["precision"], m["recall"]) == (100.0, 75.0)

    # 2 of 4 tokens of one long phrase: zero credit both ways
    gold = [["O", "B-X", "I-X", "I-X", "I-X", "O"]]
    pred = [["O", "B-X", "I-X", "O", "O", "O"]]
    m = strict_metrics(gold, pred).to_json_dict()
    assert (m["precision"], m["recall"]) == (0.0, 0.0)

    # 1 of 2 phrases detected
    gold = [["B-X", "I-X", "I-X", "O", "B-X", "I-X", "O"]]
    pred = [["B-X", "I-X", "I-X", "O", "B-X", "O", "O"]]
    m = strict_metrics(gold, pred).to_json_dict()
    assert m["recall"] == 50.0
    report("strict evaluator", "worked examples exact to 1 decimal")


def test_pca_contracts():
    rng = np.random.default_rng(7)
    sample = rng.normal(size=(300, 40))
    t = fit_pca(sample, 20)
    assert np.abs(t.components.T @ t.components - np.eye(20)).max() < 1e-8

    basis = np.linalg.qr(rng.normal(size=(5, 2)))[0]
    plane = rng.normal(size=(80, 2)) @ basis.T + rng.normal(size=5)
    t2 = fit_pca(plane, 2)
    recon = reconstruct_pca(t2, apply_pca(t2, plane))
    assert np.abs(recon - plane).max() < 1e-6

    t0 = time.perf_counter()
    big = rng.normal(size=(1600, 3072))
    t3 = fit_pca(big)
    assert t3.out_dim == 1536
    assert apply_pca(t3, big[:4]).shape == (4, 1536)
    elapsed = time.perf_counter() - t0
    report("PCA", f"orthonormal, rank-2 exact, 3072->1536 in {elapsed:.1f}s")


def test_end_to_end_synthetic_training():
    sentences, store = build_separable_corpus(500, seed=7)
    split = split_corpus(sentences, seed=3)
    mc = ModelConfig(encoder="bilstm", head="crf", hidden_size=16, pos_dim=4)
    tc = TrainConfig(
        loss="iil2", undersample_percent=50, learning_rate=0.01,
        batch_size=32, epochs=16, optimizer="adam", seed=5, weighted_crf=False,
    )
    t0 = time.perf_counter()
    model, log = train(split, store, mc, tc)
    elapsed = time.perf_counter() - t0
    assert tc.epochs <= 30
    assert elapsed < 120.0

    correct = total = 0
    preds = []
    for s in split.dev:
        p = predict(s, model, store)
        preds.append([str(x) for x in p])
        for g, q in zip(s.labels, p):
            total += 1
            correct += g == q
    accuracy = correct / total
    gold = [[str(lab) for lab in s.labels] for s in split.dev]
    strict = strict_metrics(gold, preds).f1
    assert accuracy >= 0.99
    assert strict >= 0.95

    _, log_b = train(split, store, mc, tc)
    rows_a = [r.csv_row().rsplit(",", 1)[0] for r in log]  # wall-clock column varies
    rows_b = [r.csv_row().rsplit(",", 1)[0] for r in log_b]
    assert rows_a == rows_b
    report(
        "end-to-end synthetic",
        f"acc {accuracy:.4f}, strict F1 {strict:.4f}, {elapsed:.0f}s, logs identical",
    )


def test_dataset_statistics_split_protocol():
    from outseq.corpus import O_LABEL

    dummy = [make_sentence(["w"], [O_LABEL]) for _ in range(5193)]
    split = split_corpus(dummy, seed=13)
    sizes = (len(split.train), len(split.dev), len(split.test))
    assert sizes == (3895, 779, 519)
    big = [make_sentence(["w"], [O_LABEL]) for _ in range(40092)]
    split_big = split_corpus(big, seed=13)
    assert (len(split_big.train), len(split_big.dev), len(split_big.test)) == (
        30069, 6014, 4009,
    )
    report("dataset statistics (split protocol)", "5193->3895/779/519, 40092->30069/6014/4009")


def test_dataset_statistics_ebm_comet_release():
    data_dir = os.environ.get("OUTSEQ_EBM_COMET_DIR")
    if not data_dir:
        pytest.skip(
            "EBM-COMET release not present; set OUTSEQ_EBM_COMET_DIR to the "
            "directory of annotated abstracts to run the Table-4 comparison"
        )
    from pathlib import Path

    sentences = []
    for path in sorted(Path(data_dir).glob("*.txt")):
        ab = parse_abstract(path.read_text(encoding="utf-8"), doc_id=path.stem)
        sentences.extend(abstract_to_sentences(ab))
    n = len(sentences)
    split = split_corpus(sentences, seed=13)
    stats = compute_stats(split)
    expected_tokens = {"train": 20.6, "dev": 21.5, "test": 21.2}
    divergences = {
        part: round(stats.avg_tokens[part] - expected_tokens[part], 2)
        for part in expected_tokens
    }
    assert n == 5193, f"sentence count {n} != 5193"
    for part, delta in divergences.items():
        assert abs(delta) <= 0.5, f"{part} avg tokens off by {delta}"
    report("dataset statistics (EBM-COMET)", f"divergences {divergences}")
