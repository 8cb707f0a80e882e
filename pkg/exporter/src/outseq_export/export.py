"""Export jobs: corpus in, embedding file out, in the toolkit's exact formats."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import HashBackend, resolve_model
from .corpus_reader import read_corpus
from .subword import split_subwords

POOLING_MODES = ("mean", "first")


@dataclass(frozen=True)
class ExportJob:
    corpus: str | Path
    model: str
    mode: str  # "static" | "contextual"
    out: str | Path
    pooling: str = "mean"
    layer: int = -1

    def __post_init__(self):
        if self.mode not in ("static", "contextual"):
            raise ValueError(f"mode must be static or contextual, got {self.mode!r}")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")


def _format_float(x: float) -> str:
    return format(float(x), ".6g")


def _pool(piece_vectors: np.ndarray, spans: list[tuple[int, int]], pooling: str) -> np.ndarray:
    rows = []
    for a, b in spans:
        block = piece_vectors[a:b]
        rows.append(block[0] if pooling == "first" else block.mean(axis=0))
    return np.stack(rows)


def export_static(job: ExportJob) -> int:
    """One vector per corpus vocabulary word; returns the vocabulary size.

    Words are embedded by mean-pooling their subword pieces, so the file is a
    plain word2vec-style table over exactly the words the corpus contains.
    """
    sentences = read_corpus(job.corpus)
    backend = resolve_model(job.model, job.layer)
    vocab = sorted({tok for sent in sentences for tok in sent.tokens})
    with open(job.out, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {backend.dim}\n")
        for word in vocab:
            pieces = split_subwords(word)
            mat = np.stack([backend.piece_vector(p) for p in pieces])
            vec = mat[0] if job.pooling == "first" else mat.mean(axis=0)
            fh.write(word + " " + " ".join(_format_float(x) for x in vec) + "\n")
    return len(vocab)


def export_contextual(job: ExportJob) -> int:
    """One JSONL record per sentence, one pooled vector per corpus token.

    Returns the number of records written; every corpus sentence key appears
    exactly once and in corpus order.
    """
    sentences = read_corpus(job.corpus)
    backend = resolve_model(job.model, job.layer)
    seen: set[str] = set()
    with open(job.out, "w", encoding="utf-8") as fh:
        for sent in sentences:
            if sent.key in seen:
                raise ValueError(f"duplicate sentence key {sent.key!r} in corpus")
            seen.add(sent.key)
            pieces: list[str] = []
            spans: list[tuple[int, int]] = []
            for tok in sent.tokens:
                sub = split_subwords(tok)
                spans.append((len(pieces), len(pieces) + len(sub)))
                pieces.extend(sub)
            piece_vectors = backend.contextual_piece_vectors(pieces)
            pooled = _pool(piece_vectors, spans, job.pooling)
            record = {
                "key": sent.key,
                "tokens": list(sent.tokens),
                "vectors": [[float(_format_float(x)) for x in row] for row in pooled],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(sentences)


def run_job(job: ExportJob) -> int:
    if job.mode == "static":
        return export_static(job)
    return export_contextual(job)
