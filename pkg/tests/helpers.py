"""Shared fixtures: random corpora, gradient checking, brute-force CRF oracles."""

from __future__ import annotations

import itertools

import numpy as np

from outseq.annotate import OutcomeSpan
from outseq.corpus import BioLabel, O_LABEL, TokenizedSentence
from outseq.features import EmbeddingStore
from outseq.taxonomy import OutcomeDomain
from outseq.textutil import Token

DOMAIN_FOR_TYPE = {
    "Physiological": "P0",
    "Death": "P1",
    "LifeImpact": "P25",
    "ResourceUse": "P34",
    "AdverseEvents": "P38",
}

WORD_POOL = [
    "patients", "reported", "treatment", "baseline", "outcome", "levels",
    "serum", "plasma", "reduction", "increase", "weekly", "After", "dosage",
    "renal", "cardiac", "The", "study", "groups", "versus", "placebo",
    "observed", "change", "mean", "total", "clinical",
]


def tokens_with_offsets(words: list[str]) -> list[Token]:
    toks = []
    pos = 0
    for w in words:
        toks.append(Token(w, pos, pos + len(w)))
        pos += len(w) + 1
    return toks


def span_over(words: list[str], start: int, end: int, otype: str) -> OutcomeSpan:
    """Gold span covering word indices [start, end) of a single-space-joined sentence."""
    toks = tokens_with_offsets(words)
    a, b = toks[start].start, toks[end - 1].end
    dom = OutcomeDomain.from_symbol(DOMAIN_FOR_TYPE[otype])
    return OutcomeSpan(text=" ".join(words[start:end]), char_offsets=((a, b),), domains=(dom,))


def random_bio_labels(rng: np.random.Generator, length: int, types) -> list[BioLabel]:
    labels: list[BioLabel] = []
    while len(labels) < length:
        if rng.random() < 0.35:
            t = types[int(rng.integers(len(types)))]
            run = min(int(rng.integers(1, 4)), length - len(labels))
            labels.append(BioLabel("B", t))
            labels.extend(BioLabel("I", t) for _ in range(run - 1))
        else:
            labels.append(O_LABEL)
    return labels


def random_annotated_abstract(rng: np.random.Generator):
    """Plain words with simple tags re-inserted; returns (raw, plain, expected spans)."""
    n_words = int(rng.integers(8, 30))
    words = [WORD_POOL[int(rng.integers(len(WORD_POOL)))] for _ in range(n_words)]
    expected = []
    raw_parts = []
    i = 0
    while i < n_words:
        if rng.random() < 0.25 and i + 1 < n_words:
            span_len = min(int(rng.integers(1, 4)), n_words - i)
            n_dom = int(rng.integers(1, 3))
            symbols = sorted({int(rng.integers(0, 39)) for _ in range(n_dom)})
            tag = "<P " + ", ".join(str(s) for s in symbols) + ">"
            raw_parts.append(tag + " ".join(words[i : i + span_len]) + "</>")
            expected.append(
                (" ".join(words[i : i + span_len]), tuple(f"P{s}" for s in symbols))
            )
            i += span_len
        else:
            raw_parts.append(words[i])
            i += 1
    raw = " ".join(raw_parts)
    plain = " ".join(words)
    return raw, plain, expected


def make_sentence(words, labels, doc_id="d", sent_index=0, pos=None) -> TokenizedSentence:
    return TokenizedSentence(
        tokens=list(words),
        pos_tags=pos if pos is not None else ["NN"] * len(words),
        labels=list(labels),
        doc_id=doc_id,
        sent_index=sent_index,
    )


# ---------------------------------------------------------------------------
# Synthetic separable corpus: three outcome types with disjoint 20-word
# vocabularies, each split into phrase-initial and phrase-internal halves, and
# one-hot word vectors. A bag-of-words linear model can hit 100% by lookup.
# ---------------------------------------------------------------------------

def build_separable_corpus(n_sentences=500, seed=7):
    rng = np.random.default_rng(seed)
    types = ("Physiological", "Death", "AdverseEvents")
    begin_vocab = {t: [f"{t[:4].lower()}B{k}" for k in range(10)] for t in types}
    inside_vocab = {t: [f"{t[:4].lower()}I{k}" for k in range(10)] for t in types}
    filler = [f"fill{k}" for k in range(20)]
    sentences = []
    for idx in range(n_sentences):
        words: list[str] = []
        labels: list[BioLabel] = []
        n_chunks = int(rng.integers(3, 7))
        for _ in range(n_chunks):
            if rng.random() < 0.45:
                t = types[int(rng.integers(3))]
                run = int(rng.integers(1, 4))
                words.append(begin_vocab[t][int(rng.integers(10))])
                labels.append(BioLabel("B", t))
                for _ in range(run - 1):
                    words.append(inside_vocab[t][int(rng.integers(10))])
                    labels.append(BioLabel("I", t))
            else:
                run = int(rng.integers(1, 4))
                picks = rng.integers(0, 20, size=run)
                words.extend(filler[p] for p in picks)
                labels.extend([O_LABEL] * run)
        sentences.append(make_sentence(words, labels, doc_id="synth", sent_index=idx))
    vocab = sorted(
        w
        for pool in (filler, *begin_vocab.values(), *inside_vocab.values())
        for w in pool
    )
    dim = len(vocab)
    vectors = {w: np.eye(dim)[i] for i, w in enumerate(vocab)}
    store = EmbeddingStore(mode="static", dim=dim, vectors=vectors, unk=np.zeros(dim))
    return sentences, store


# ---------------------------------------------------------------------------
# Brute-force CRF oracles (exhaustive path enumeration)
# ---------------------------------------------------------------------------

def brute_force_paths(emissions: np.ndarray, transitions: np.ndarray):
    """Scores of every label path, with the paths in lexicographic order."""
    n, L = emissions.shape
    trans = transitions[:L, :L]
    bos = transitions[L, :L]
    eos = transitions[:L, L + 1]
    paths = []
    scores = []
    for path in itertools.product(range(L), repeat=n):
        s = bos[path[0]] + eos[path[-1]] + sum(emissions[t, y] for t, y in enumerate(path))
        s += sum(trans[path[t - 1], path[t]] for t in range(1, n))
        paths.append(path)
        scores.append(s)
    return paths, np.asarray(scores)


def brute_force_log_partition(emissions, transitions) -> float:
    _, scores = brute_force_paths(emissions, transitions)
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_force_viterbi(emissions, transitions):
    paths, scores = brute_force_paths(emissions, transitions)
    return list(paths[int(np.argmax(scores))])


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def finite_difference_grads(loss_fn, arrays: dict[str, np.ndarray], eps=1e-5):
    """Central differences for every entry of every array, perturbing in place."""
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            if not np.isfinite(orig):
                continue
            flat[i] = orig + eps
            hi = loss_fn()
            flat[i] = orig - eps
            lo = loss_fn()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads[name] = g
    return grads


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(np.asarray(a).ravel())
    nb = np.linalg.norm(np.asarray(b).ravel())
    diff = np.linalg.norm((np.asarray(a) - np.asarray(b)).ravel())
    return diff / max(na + nb, 1e-12)
