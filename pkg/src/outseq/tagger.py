"""Token tagger: linear or BiLSTM encoder, softmax or linear-chain CRF head.

The encoder maps each token's feature vector to a hidden state; the head turns
hidden states into per-label scores and either normalizes them per position
(softmax) or over whole label sequences (CRF, forward algorithm in log space).
All gradients are computed analytically in numpy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .corpus import BioLabel, TokenizedSentence, repair_bio, COMET_TYPES, NLP_REV_TYPES
from .features import (
    DimensionMismatch,
    EmbeddingStore,
    PcaTransform,
    PosEmbeddingTable,
    token_features,
)

MODEL_FORMAT_VERSION = 1


class NonFiniteScore(ValueError):
    pass


class DivergedLoss(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Label vocabulary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelVocabulary:
    """Label strings with O first, then B-/I- pairs per outcome type."""

    labels: tuple[str, ...]
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index.update({lab: i for i, lab in enumerate(self.labels)})

    @classmethod
    def for_types(cls, types: Sequence[str]) -> "LabelVocabulary":
        labels = ("O",) + tuple(f"{p}-{t}" for t in types for p in ("B", "I"))
        return cls(labels=labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str | BioLabel) -> int:
        return self._index[str(label)]

    def bio(self, idx: int) -> BioLabel:
        return BioLabel.parse(self.labels[idx])

    def encode(self, labels: Sequence[BioLabel]) -> np.ndarray:
        return np.asarray([self.index(lab) for lab in labels], dtype=np.int64)


def types_from_sentences(sentences: Sequence[TokenizedSentence]) -> tuple[str, ...]:
    """Outcome types present in gold labels, in a canonical order."""
    seen = {lab.otype for s in sentences for lab in s.labels if lab.otype}
    for canonical in (COMET_TYPES, NLP_REV_TYPES):
        if seen and seen <= set(canonical):
            return tuple(t for t in canonical if t in seen)
    return tuple(sorted(seen))


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LinearEncoder:
    """Per-position affine map with an optional tanh, as configured."""

    weight: np.ndarray  # (h, f)
    bias: np.ndarray    # (h,)
    activation: str = "identity"  # "identity" | "tanh"

    @classmethod
    def create(cls, in_dim: int, hidden: int, seed: int = 0,
               activation: str = "identity", scale: float = 0.1) -> "LinearEncoder":
        rng = np.random.default_rng(seed)
        return cls(
            weight=rng.uniform(-scale, scale, size=(hidden, in_dim)),
            bias=rng.uniform(-scale, scale, size=hidden),
            activation=activation,
        )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.weight.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {"enc_weight": self.weight, "enc_bias": self.bias}

    def forward(self, feats: np.ndarray):
        pre = feats @ self.weight.T + self.bias
        hidden = np.tanh(pre) if self.activation == "tanh" else pre
        return hidden, (feats, hidden)

    def backward(self, cache, d_hidden: np.ndarray):
        feats, hidden = cache
        d_pre = d_hidden * (1.0 - hidden ** 2) if self.activation == "tanh" else d_hidden
        grads = {
            "enc_weight": d_pre.T @ feats,
            "enc_bias": d_pre.sum(axis=0),
        }
        return grads, d_pre @ self.weight


def _lstm_forward(x, wx, wh, b):
    n = x.shape[0]
    k = wh.shape[1]
    gates = np.zeros((n, 4 * k))
    cs = np.zeros((n, k))
    hs = np.zeros((n, k))
    pre_x = x @ wx.T + b
    h = np.zeros(k)
    c = np.zeros(k)
    for t in range(n):
        z = pre_x[t] + wh @ h
        i = _sigmoid(z[:k])
        f = _sigmoid(z[k : 2 * k])
        o = _sigmoid(z[2 * k : 3 * k])
        g = np.tanh(z[3 * k :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t] = np.concatenate([i, f, o, g])
        cs[t] = c
        hs[t] = h
    return hs, (x, gates, cs, hs)


def _lstm_backward(wx, wh, cache, d_hs):
    x, gates, cs, hs = cache
    n, k = hs.shape
    d_wx = np.zeros_like(wx)
    d_wh = np.zeros_like(wh)
    d_b = np.zeros(4 * k)
    d_x = np.zeros_like(x)
    dh_next = np.zeros(k)
    dc_next = np.zeros(k)
    for t in range(n - 1, -1, -1):
        i = gates[t, :k]
        f = gates[t, k : 2 * k]
        o = gates[t, 2 * k : 3 * k]
        g = gates[t, 3 * k :]
        c = cs[t]
        c_prev = cs[t - 1] if t > 0 else np.zeros(k)
        h_prev = hs[t - 1] if t > 0 else np.zeros(k)
        tc = np.tanh(c)
        dh = d_hs[t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc ** 2) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g ** 2)]
        )
        d_wx += np.outer(dz, x[t])
        d_wh += np.outer(dz, h_prev)
        d_b += dz
        d_x[t] = wx.T @ dz
        dh_next = wh.T @ dz
    return d_wx, d_wh, d_b, d_x


@dataclass
class BiLstmEncoder:
    """Single-layer bidirectional LSTM; forward and backward halves concatenated."""

    fw_wx: np.ndarray  # (4k, f)
    fw_wh: np.ndarray  # (4k, k)
    fw_b: np.ndarray   # (4k,)
    bw_wx: np.ndarray
    bw_wh: np.ndarray
    bw_b: np.ndarray

    @classmethod
    def create(cls, in_dim: int, hidden: int, seed: int = 0, scale: float = 0.1) -> "BiLstmEncoder":
        if hidden % 2 != 0:
            raise ValueError("BiLSTM hidden size must be even")
        k = hidden // 2
        rng = np.random.default_rng(seed)
        def u(*shape):
            return rng.uniform(-scale, scale, size=shape)
        return cls(
            fw_wx=u(4 * k, in_dim), fw_wh=u(4 * k, k), fw_b=u(4 * k),
            bw_wx=u(4 * k, in_dim), bw_wh=u(4 * k, k), bw_b=u(4 * k),
        )

    @property
    def in_dim(self) -> int:
        return self.fw_wx.shape[1]

    @property
    def hidden_dim(self) -> int:
        return 2 * self.fw_wh.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "enc_fw_wx": self.fw_wx, "enc_fw_wh": self.fw_wh, "enc_fw_b": self.fw_b,
            "enc_bw_wx": self.bw_wx, "enc_bw_wh": self.bw_wh, "enc_bw_b": self.bw_b,
        }

    def forward(self, feats: np.ndarray):
        h_fw, cache_fw = _lstm_forward(feats, self.fw_wx, self.fw_wh, self.fw_b)
        h_bw_rev, cache_bw = _lstm_forward(feats[::-1], self.bw_wx, self.bw_wh, self.bw_b)
        hidden = np.concatenate([h_fw, h_bw_rev[::-1]], axis=1)
        return hidden, (cache_fw, cache_bw)

    def backward(self, cache, d_hidden: np.ndarray):
        cache_fw, cache_bw = cache
        k = self.fw_wh.shape[1]
        d_fw = d_hidden[:, :k]
        d_bw = d_hidden[:, k:][::-1]
        dwx_f, dwh_f, db_f, dx_f = _lstm_backward(self.fw_wx, self.fw_wh, cache_fw, d_fw)
        dwx_b, dwh_b, db_b, dx_b = _lstm_backward(self.bw_wx, self.bw_wh, cache_bw, d_bw)
        grads = {
            "enc_fw_wx": dwx_f, "enc_fw_wh": dwh_f, "enc_fw_b": db_f,
            "enc_bw_wx": dwx_b, "enc_bw_wh": dwh_b, "enc_bw_b": db_b,
        }
        return grads, dx_f + dx_b[::-1]


def encode(feats: np.ndarray, encoder) -> np.ndarray:
    if feats.ndim != 2 or feats.shape[1] != encoder.in_dim:
        raise DimensionMismatch(
            f"features of dim {feats.shape[-1] if feats.ndim else '?'} "
            f"fed to a {encoder.in_dim}-dim encoder"
        )
    hidden, _ = encoder.forward(feats)
    return hidden


# ---------------------------------------------------------------------------
# Heads
# ---------------------------------------------------------------------------

@dataclass
class SoftmaxHead:
    weight: np.ndarray  # (L, h)
    bias: np.ndarray    # (L,)

    kind = "softmax"

    @classmethod
    def create(cls, n_labels: int, hidden: int, seed: int = 0, scale: float = 0.1) -> "SoftmaxHead":
        rng = np.random.default_rng(seed)
        return cls(
            weight=rng.uniform(-scale, scale, size=(n_labels, hidden)),
            bias=rng.uniform(-scale, scale, size=n_labels),
        )

    def tensors(self) -> dict[str, np.ndarray]:
        return {"head_weight": self.weight, "head_bias": self.bias}


@dataclass
class CrfHead:
    weight: np.ndarray       # (L, h)
    bias: np.ndarray         # (L,)
    transitions: np.ndarray  # (L+2, L+2); row L = from-BOS, column L+1 = to-EOS

    kind = "crf"

    @classmethod
    def create(cls, n_labels: int, hidden: int, seed: int = 0, scale: float = 0.1) -> "CrfHead":
        rng = np.random.default_rng(seed)
        trans = rng.uniform(-scale, scale, size=(n_labels + 2, n_labels + 2))
        trans[:, n_labels] = -np.inf      # nothing transitions into BOS
        trans[n_labels + 1, :] = -np.inf  # nothing leaves EOS
        return cls(
            weight=rng.uniform(-scale, scale, size=(n_labels, hidden)),
            bias=rng.uniform(-scale, scale, size=n_labels),
            transitions=trans,
        )

    @property
    def n_labels(self) -> int:
        return self.weight.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "head_weight": self.weight,
            "head_bias": self.bias,
            "head_transitions": self.transitions,
        }


def emissions(hidden: np.ndarray, head) -> np.ndarray:
    """Per-position label scores, not normalized."""
    return hidden @ head.weight.T + head.bias


def emissions_backward(head, hidden: np.ndarray, d_emissions: np.ndarray):
    grads = {
        "head_weight": d_emissions.T @ hidden,
        "head_bias": d_emissions.sum(axis=0),
    }
    return grads, d_emissions @ head.weight


# ---------------------------------------------------------------------------
# CRF machinery (log space throughout)
# ---------------------------------------------------------------------------

def _crf_pieces(transitions: np.ndarray, n_labels: int):
    return (
        transitions[:n_labels, :n_labels],
        transitions[n_labels, :n_labels],
        transitions[:n_labels, n_labels + 1],
    )


def _check_finite(emissions_: np.ndarray) -> None:
    if not np.isfinite(emissions_).all():
        raise NonFiniteScore("emission scores must be finite")


def _crf_forward_messages(e: np.ndarray, transitions: np.ndarray):
    n, L = e.shape
    trans, bos, eos = _crf_pieces(transitions, L)
    alpha = np.zeros((n, L))
    alpha[0] = bos + e[0]
    for t in range(1, n):
        alpha[t] = e[t] + logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    log_z = float(logsumexp(alpha[-1] + eos))
    return log_z, alpha


def _crf_backward_messages(e: np.ndarray, transitions: np.ndarray):
    n, L = e.shape
    trans, _, eos = _crf_pieces(transitions, L)
    beta = np.zeros((n, L))
    beta[-1] = eos
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(trans + (e[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def crf_log_partition(emissions_: np.ndarray, transitions: np.ndarray) -> float:
    """log of the sum over all label paths, by the forward recursion."""
    _check_finite(emissions_)
    log_z, _ = _crf_forward_messages(emissions_, transitions)
    return log_z


def crf_marginals(emissions_: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    """Per-position label probabilities from forward-backward messages."""
    _check_finite(emissions_)
    log_z, alpha = _crf_forward_messages(emissions_, transitions)
    beta = _crf_backward_messages(emissions_, transitions)
    return np.exp(alpha + beta - log_z)


def _normalize_beta(beta, n: int, n_labels: int) -> np.ndarray | None:
    if beta is None:
        return None
    arr = np.asarray(beta, dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == n_labels:
        return np.broadcast_to(arr, (n, n_labels)).copy()
    if arr.ndim == 1 and arr.shape[0] == n:
        return np.broadcast_to(arr[:, None], (n, n_labels)).copy()
    if arr.shape == (n, n_labels):
        return arr
    raise ValueError(f"weight array of shape {arr.shape} fits neither labels nor positions")


def crf_nll(
    emissions_: np.ndarray,
    transitions: np.ndarray,
    gold: np.ndarray,
    beta=None,
):
    """Weighted CRF negative log-likelihood with exact gradients.

    ``beta`` scales emission scores per label (or per position); the gold path
    score and the partition use the same scaled emissions, so the result stays
    a proper sequence NLL over the modified potentials.
    """
    _check_finite(emissions_)
    n, L = emissions_.shape
    gold = np.asarray(gold, dtype=np.int64)
    scale = _normalize_beta(beta, n, L)
    e = emissions_ if scale is None else emissions_ * scale
    trans, bos, eos = _crf_pieces(transitions, L)
    log_z, alpha = _crf_forward_messages(e, transitions)
    bwd = _crf_backward_messages(e, transitions)
    unary = np.exp(alpha + bwd - log_z)

    gold_score = bos[gold[0]] + eos[gold[-1]] + e[np.arange(n), gold].sum()
    gold_score += sum(trans[gold[t - 1], gold[t]] for t in range(1, n))
    loss = log_z - float(gold_score)

    d_scaled = unary.copy()
    d_scaled[np.arange(n), gold] -= 1.0
    d_emissions = d_scaled if scale is None else d_scaled * scale

    d_trans = np.zeros_like(transitions)
    for t in range(1, n):
        pair = np.exp(alpha[t - 1][:, None] + trans + (e[t] + bwd[t])[None, :] - log_z)
        d_trans[:L, :L] += pair
        d_trans[gold[t - 1], gold[t]] -= 1.0
    d_trans[L, :L] += unary[0]
    d_trans[L, gold[0]] -= 1.0
    d_trans[:L, L + 1] += unary[-1]
    d_trans[gold[-1], L + 1] -= 1.0
    return loss, d_emissions, d_trans


def viterbi(emissions_: np.ndarray, transitions: np.ndarray) -> list[int]:
    """Highest-scoring label path; ties resolve to the lower label index."""
    _check_finite(emissions_)
    n, L = emissions_.shape
    trans, bos, eos = _crf_pieces(transitions, L)
    delta = bos + emissions_[0]
    backptr = np.zeros((n, L), dtype=np.int64)
    for t in range(1, n):
        scores = delta[:, None] + trans
        backptr[t] = np.argmax(scores, axis=0)
        delta = emissions_[t] + np.max(scores, axis=0)
    last = int(np.argmax(delta + eos))
    path = [last]
    for t in range(n - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    return path[::-1]


# ---------------------------------------------------------------------------
# Softmax loss (token-wise, cost-sensitive)
# ---------------------------------------------------------------------------

def softmax_probs(emissions_: np.ndarray) -> np.ndarray:
    shifted = emissions_ - emissions_.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def softmax_nll(
    emissions_: np.ndarray,
    gold: np.ndarray,
    weights: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    focal: tuple[np.ndarray, float] | None = None,
):
    """Token-summed weighted NLL and its emission gradient.

    ``weights`` is a per-label scale applied to each token's term via its gold
    label; ``focal`` is ``(alpha_per_label, lambda)`` and modulates each term
    by ``alpha * (1 - p_gold)**lambda`` with the gradient taken through the
    modulation factor as well. ``mask`` drops positions from the loss.
    """
    _check_finite(emissions_)
    n, L = emissions_.shape
    gold = np.asarray(gold, dtype=np.int64)
    p = softmax_probs(emissions_)
    pg = np.clip(p[np.arange(n), gold], 1e-300, 1.0)
    log_pg = np.log(pg)
    onehot = np.zeros_like(p)
    onehot[np.arange(n), gold] = 1.0

    if focal is not None:
        alpha, lam = focal
        a = np.asarray(alpha, dtype=np.float64)[gold]
        if lam == 0:
            loss_i = -a * log_pg
            d_emissions = a[:, None] * (p - onehot)
        else:
            u = 1.0 - pg
            loss_i = -a * u ** lam * log_pg
            with np.errstate(divide="ignore", invalid="ignore"):
                d_pg = np.where(
                    u > 0.0,
                    a * lam * u ** (lam - 1) * log_pg - a * u ** lam / pg,
                    0.0,
                )
            d_emissions = (d_pg * pg)[:, None] * (onehot - p)
    else:
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)[gold]
        loss_i = -w * log_pg
        d_emissions = w[:, None] * (p - onehot)

    if mask is not None:
        keep = np.asarray(mask, dtype=bool)
        loss_i = loss_i * keep
        d_emissions = d_emissions * keep[:, None]
    return float(loss_i.sum()), d_emissions


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------

@dataclass
class TaggerModel:
    labels: LabelVocabulary
    encoder: LinearEncoder | BiLstmEncoder
    head: SoftmaxHead | CrfHead
    pos_table: PosEmbeddingTable
    pca: PcaTransform | None = None
    feature_meta: dict = field(default_factory=dict)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.encoder.tensors())
        out.update(self.head.tensors())
        out["pos_vectors"] = self.pos_table.vectors
        return out

    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": MODEL_FORMAT_VERSION,
            "labels": list(self.labels.labels),
            "encoder": "bilstm" if isinstance(self.encoder, BiLstmEncoder) else "linear",
            "activation": getattr(self.encoder, "activation", "identity"),
            "head": self.head.kind,
            "pos_tags": list(self.pos_table.tags),
            "has_pca": self.pca is not None,
            "feature_meta": self.feature_meta,
        }
        arrays = dict(self.tensors())
        if self.pca is not None:
            arrays["pca_mean"] = self.pca.mean
            arrays["pca_components"] = self.pca.components
            arrays["pca_evr"] = self.pca.explained_variance_ratio
        np.savez(path, meta=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "TaggerModel":
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["meta"]))
        if meta["format_version"] != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {meta['format_version']}")
        labels = LabelVocabulary(labels=tuple(meta["labels"]))
        n_labels = len(labels)
        if meta["encoder"] == "linear":
            encoder = LinearEncoder(
                weight=data["enc_weight"], bias=data["enc_bias"],
                activation=meta["activation"],
            )
        else:
            encoder = BiLstmEncoder(
                fw_wx=data["enc_fw_wx"], fw_wh=data["enc_fw_wh"], fw_b=data["enc_fw_b"],
                bw_wx=data["enc_bw_wx"], bw_wh=data["enc_bw_wh"], bw_b=data["enc_bw_b"],
            )
        if meta["head"] == "softmax":
            head = SoftmaxHead(weight=data["head_weight"], bias=data["head_bias"])
        else:
            head = CrfHead(
                weight=data["head_weight"], bias=data["head_bias"],
                transitions=data["head_transitions"],
            )
        if head.weight.shape[0] != n_labels:
            raise ValueError(
                f"head covers {head.weight.shape[0]} labels, vocabulary has {n_labels}"
            )
        if isinstance(head, CrfHead) and head.transitions.shape != (n_labels + 2, n_labels + 2):
            raise ValueError("transition matrix shape does not match the label vocabulary")
        if head.weight.shape[1] != encoder.hidden_dim:
            raise ValueError("head hidden size does not match the encoder")
        pos_table = PosEmbeddingTable(tags=tuple(meta["pos_tags"]), vectors=data["pos_vectors"])
        pca = None
        if meta["has_pca"]:
            pca = PcaTransform(
                mean=data["pca_mean"],
                components=data["pca_components"],
                explained_variance_ratio=data["pca_evr"],
            )
        return cls(
            labels=labels, encoder=encoder, head=head,
            pos_table=pos_table, pca=pca, feature_meta=meta["feature_meta"],
        )


def decode_indices(model: TaggerModel, feats: np.ndarray) -> list[int]:
    hidden = encode(feats, model.encoder)
    scores = emissions(hidden, model.head)
    if model.head.kind == "crf":
        return viterbi(scores, model.head.transitions)
    return [int(i) for i in np.argmax(scores, axis=1)]


def predict(
    sentence: TokenizedSentence,
    model: TaggerModel,
    store: EmbeddingStore,
) -> list[BioLabel]:
    """Label one sentence; the raw decode is BIO-repaired before use."""
    feats = token_features(sentence, store, model.pos_table, model.pca)
    idxs = decode_indices(model, feats)
    labels = [model.labels.bio(i) for i in idxs]
    repaired, _ = repair_bio(labels)
    return repaired


def sentence_loss_and_grads(
    model: TaggerModel,
    feats: np.ndarray,
    pos_idx: np.ndarray,
    gold: np.ndarray,
    *,
    weights: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    focal: tuple[np.ndarray, float] | None = None,
    crf_beta=None,
):
    """Loss for one sentence plus gradients for every trainable tensor.

    The word-embedding part of the feature gradient is discarded (vectors are
    frozen); the POS part is scattered into the table rows used here.
    """
    if feats.shape[1] != model.encoder.in_dim:
        raise DimensionMismatch(
            f"features of dim {feats.shape[1]} fed to a {model.encoder.in_dim}-dim encoder"
        )
    hidden, enc_cache = model.encoder.forward(feats)
    scores = emissions(hidden, model.head)
    if model.head.kind == "crf":
        if focal is not None:
            alpha, lam = focal
            margs = crf_marginals(scores, model.head.transitions)
            pg = np.clip(margs[np.arange(len(gold)), gold], 1e-12, 1.0)
            token_scale = np.asarray(alpha)[gold] * (1.0 - pg) ** lam
            scale_2d = np.broadcast_to(token_scale[:, None], scores.shape).copy()
            loss, d_scores, d_trans = crf_nll(
                scores, model.head.transitions, gold, beta=scale_2d
            )
        else:
            loss, d_scores, d_trans = crf_nll(
                scores, model.head.transitions, gold, beta=crf_beta
            )
    else:
        loss, d_scores = softmax_nll(scores, gold, weights=weights, mask=mask, focal=focal)
        d_trans = None

    head_grads, d_hidden = emissions_backward(model.head, hidden, d_scores)
    if d_trans is not None:
        head_grads["head_transitions"] = d_trans
    enc_grads, d_feats = model.encoder.backward(enc_cache, d_hidden)

    pos_dim = model.pos_table.dim
    d_pos_vectors = np.zeros_like(model.pos_table.vectors)
    np.add.at(d_pos_vectors, pos_idx, d_feats[:, -pos_dim:])

    grads = {**enc_grads, **head_grads, "pos_vectors": d_pos_vectors}
    return loss, grads
