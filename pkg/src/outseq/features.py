"""Per-token feature vectors: frozen word embeddings, trainable POS embeddings, PCA."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import TokenizedSentence


class DimensionMismatch(ValueError):
    pass


class MissingSentenceKey(KeyError):
    pass


class TokenCountMismatch(ValueError):
    pass


class TargetDimTooLarge(ValueError):
    pass


UNK_TOKENS = ("<unk>", "UNK")


@dataclass
class EmbeddingStore:
    """Fixed word vectors, either a vocabulary map or per-sentence token vectors.

    Static mode looks words up by surface form with an UNK fallback; contextual
    mode indexes by ``doc_id:sent_index`` and position, so it must cover every
    corpus sentence with exactly one vector per token.
    """

    mode: str  # "static" | "contextual"
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    unk: np.ndarray | None = None
    sentences: dict[str, np.ndarray] = field(default_factory=dict)
    oov_count: int = 0

    def lookup_word(self, word: str) -> np.ndarray:
        vec = self.vectors.get(word)
        if vec is None:
            vec = self.vectors.get(word.lower())
        if vec is None:
            self.oov_count += 1
            vec = self.unk
        return vec

    def sentence_matrix(self, key: str, n_tokens: int) -> np.ndarray:
        mat = self.sentences.get(key)
        if mat is None:
            raise MissingSentenceKey(f"no vectors for sentence {key!r}")
        if mat.shape[0] != n_tokens:
            raise TokenCountMismatch(
                f"sentence {key!r}: {mat.shape[0]} vectors for {n_tokens} tokens"
            )
        return mat

    def validate_coverage(self, sentences: list[TokenizedSentence]) -> None:
        if self.mode != "contextual":
            return
        for sent in sentences:
            self.sentence_matrix(sent.key, len(sent))


def load_embeddings(path: str | Path, mode: str) -> EmbeddingStore:
    """Read a static text embedding file or a contextual JSONL file."""
    if mode == "static":
        return _load_static(path)
    if mode == "contextual":
        return _load_contextual(path)
    raise ValueError(f"mode must be 'static' or 'contextual', got {mode!r}")


def _load_static(path: str | Path) -> EmbeddingStore:
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DimensionMismatch("header line must be '<vocab_size> <dim>'")
        vocab_size, dim = int(header[0]), int(header[1])
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) == 1 and parts[0] == "":
                continue
            if len(parts) != dim + 1:
                raise DimensionMismatch(
                    f"line {lineno}: expected {dim} values, got {len(parts) - 1}"
                )
            vectors[parts[0]] = np.asarray(parts[1:], dtype=np.float64)
    if len(vectors) != vocab_size:
        warnings.warn(
            f"header declares {vocab_size} words but file holds {len(vectors)}",
            stacklevel=2,
        )
    unk = None
    for tok in UNK_TOKENS:
        if tok in vectors:
            unk = vectors[tok]
            break
    if unk is None:
        unk = np.mean(np.stack(list(vectors.values())), axis=0) if vectors else np.zeros(dim)
    return EmbeddingStore(mode="static", dim=dim, vectors=vectors, unk=unk)


def _load_contextual(path: str | Path) -> EmbeddingStore:
    sentences: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            key = rec["key"]
            tokens = rec["tokens"]
            mat = np.asarray(rec["vectors"], dtype=np.float64)
            if mat.ndim != 2:
                raise DimensionMismatch(f"line {lineno}: vectors must be a 2-D list")
            if mat.shape[0] != len(tokens):
                raise TokenCountMismatch(
                    f"line {lineno}: {mat.shape[0]} vectors for {len(tokens)} tokens"
                )
            if dim is None:
                dim = mat.shape[1]
            elif mat.shape[1] != dim:
                raise DimensionMismatch(
                    f"line {lineno}: vector length {mat.shape[1]} != {dim}"
                )
            if key in sentences:
                raise ValueError(f"line {lineno}: duplicate sentence key {key!r}")
            sentences[key] = mat
    if dim is None:
        raise DimensionMismatch("contextual file holds no records")
    return EmbeddingStore(mode="contextual", dim=dim, sentences=sentences)


def write_static_embeddings(vectors: dict[str, np.ndarray], path: str | Path) -> None:
    """Write the classic text layout: header line, then one `word v1 .. vD` row each."""
    words = list(vectors)
    dim = len(next(iter(vectors.values()))) if words else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {dim}\n")
        for w in words:
            vals = " ".join(format(float(x), ".6g") for x in vectors[w])
            fh.write(f"{w} {vals}\n")


# ---------------------------------------------------------------------------
# Trainable POS embedding table
# ---------------------------------------------------------------------------

@dataclass
class PosEmbeddingTable:
    """One trainable vector per POS tag plus a final UNK row."""

    tags: tuple[str, ...]
    vectors: np.ndarray  # (len(tags) + 1, dim)

    @classmethod
    def create(cls, tags, dim: int = 32, seed: int = 0, scale: float = 0.1) -> "PosEmbeddingTable":
        rng = np.random.default_rng(seed)
        vectors = rng.uniform(-scale, scale, size=(len(tags) + 1, dim))
        return cls(tags=tuple(tags), vectors=vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            return len(self.tags)

    def indices(self, tags) -> np.ndarray:
        return np.asarray([self.index(t) for t in tags], dtype=np.int64)


# ---------------------------------------------------------------------------
# PCA reduction for oversized embeddings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaTransform:
    mean: np.ndarray                     # (d_in,)
    components: np.ndarray               # (d_in, d_out), orthonormal columns
    explained_variance_ratio: np.ndarray  # (d_out,), non-increasing

    @property
    def in_dim(self) -> int:
        return self.components.shape[0]

    @property
    def out_dim(self) -> int:
        return self.components.shape[1]


def default_target_dim(d_in: int) -> int:
    """Halved dimensionality used for oversized embeddings."""
    return math.ceil(d_in / 2)


def fit_pca(sample: np.ndarray, target_dim: int | None = None) -> PcaTransform:
    """Mean-center the sample and keep the top principal directions via SVD."""
    sample = np.asarray(sample, dtype=np.float64)
    n, d = sample.shape
    if target_dim is None:
        target_dim = default_target_dim(d)
    if target_dim > d:
        raise TargetDimTooLarge(f"target dim {target_dim} exceeds input dim {d}")
    if n < target_dim:
        raise TargetDimTooLarge(f"sample of {n} vectors cannot support {target_dim} components")
    mean = sample.mean(axis=0)
    centered = sample - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = (s ** 2) / max(n - 1, 1)
    total = var.sum()
    ratios = var[:target_dim] / total if total > 0 else np.zeros(target_dim)
    components = vt[:target_dim].T
    return PcaTransform(mean=mean, components=components, explained_variance_ratio=ratios)


def apply_pca(transform: PcaTransform, vectors: np.ndarray) -> np.ndarray:
    """Project vectors (single or stacked) onto the fitted principal directions."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.shape[-1] != transform.in_dim:
        raise DimensionMismatch(
            f"vector length {arr.shape[-1]} != transform input dim {transform.in_dim}"
        )
    return (arr - transform.mean) @ transform.components


def reconstruct_pca(transform: PcaTransform, projected: np.ndarray) -> np.ndarray:
    return np.asarray(projected) @ transform.components.T + transform.mean


# ---------------------------------------------------------------------------
# Feature assembly
# ---------------------------------------------------------------------------

def word_vectors(sentence: TokenizedSentence, store: EmbeddingStore) -> np.ndarray:
    """Word-vector matrix (n, d) for a sentence, before any PCA."""
    if store.mode == "static":
        return np.stack([store.lookup_word(tok) for tok in sentence.tokens])
    return store.sentence_matrix(sentence.key, len(sentence))


def token_features(
    sentence: TokenizedSentence,
    store: EmbeddingStore,
    pos_table: PosEmbeddingTable,
    pca: PcaTransform | None = None,
) -> np.ndarray:
    """Concatenate each token's word vector (PCA-reduced if configured) and POS vector."""
    words = word_vectors(sentence, store)
    if pca is not None:
        words = apply_pca(pca, words)
    pos_idx = pos_table.indices(sentence.pos_tags)
    pos = pos_table.vectors[pos_idx]
    return np.concatenate([words, pos], axis=1)
