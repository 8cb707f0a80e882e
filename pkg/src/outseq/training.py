"""Cost-sensitive losses, majority-class undersampling and the training loop."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import CorpusSplit, TokenizedSentence
from .evaluate import strict_metrics, token_metrics
from .features import (
    EmbeddingStore,
    PcaTransform,
    PosEmbeddingTable,
    fit_pca,
    token_features,
    word_vectors,
)
from .tagger import (
    BiLstmEncoder,
    CrfHead,
    DivergedLoss,
    LabelVocabulary,
    LinearEncoder,
    SoftmaxHead,
    TaggerModel,
    predict,
    sentence_loss_and_grads,
    types_from_sentences,
)

LOSS_SCHEMES = ("none", "iil1", "iil2", "class_balanced", "focal")


class EmptyTrainingSplit(ValueError):
    pass


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Label weights
# ---------------------------------------------------------------------------

@dataclass
class LabelWeights:
    scheme: str
    values: np.ndarray  # per label index
    counts: np.ndarray


def class_balanced_weight(total: int, n_y: int) -> float:
    """Weight (1 - beta) / (1 - beta**n_y) with beta = (N - 1) / N.

    The denominator is the effective number of samples for the label, so the
    weight is its reciprocal scaled to 1/N for very frequent labels.
    """
    beta = (total - 1) / total
    return (1.0 - beta) / (1.0 - beta ** n_y)


def compute_label_weights(
    sentences: Sequence[TokenizedSentence],
    vocab: LabelVocabulary,
    scheme: str,
) -> LabelWeights:
    """Per-label loss weights from token-level gold-label counts."""
    if scheme not in LOSS_SCHEMES:
        raise ValueError(f"unknown loss scheme {scheme!r}; pick one of {LOSS_SCHEMES}")
    if not sentences:
        raise EmptyTrainingSplit("cannot compute label weights on an empty split")
    counts = np.zeros(len(vocab), dtype=np.int64)
    for sent in sentences:
        for lab in sent.labels:
            counts[vocab.index(lab)] += 1
    values = np.ones(len(vocab), dtype=np.float64)
    absent = [vocab.labels[i] for i in np.nonzero(counts == 0)[0]]
    if absent and scheme != "none":
        warnings.warn(f"labels never seen in training get weight 1: {absent}", stacklevel=2)
    total = int(counts.sum())
    for i, n_y in enumerate(counts):
        if n_y == 0:
            continue
        if scheme == "iil1" or scheme == "focal":
            values[i] = 1.0 / n_y
        elif scheme == "iil2":
            values[i] = 1.0 / np.sqrt(n_y)
        elif scheme == "class_balanced":
            values[i] = class_balanced_weight(total, int(n_y))
        # "none" keeps 1.0
    return LabelWeights(scheme=scheme, values=values, counts=counts)


def focal_scale(p_y: float, lam: float = 2.0, alpha_y: float = 1.0) -> float:
    """Modulation factor ``alpha * (1 - P)**lambda`` for one token's loss term."""
    if not 0.0 < p_y <= 1.0:
        raise DomainError(f"P_y must lie in (0, 1], got {p_y}")
    if lam < 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")
    return alpha_y * (1.0 - p_y) ** lam


@dataclass(frozen=True)
class FocalConfig:
    lam: float = 2.0
    alpha: np.ndarray | None = None  # per-label, 1/N_y

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("focusing parameter must be non-negative")


# ---------------------------------------------------------------------------
# Undersampling
# ---------------------------------------------------------------------------

@dataclass
class TrainInstance:
    """A training sentence plus its per-token loss mask (softmax undersampling)."""

    sentence: TokenizedSentence
    loss_mask: np.ndarray


def undersample(
    sentences: Sequence[TokenizedSentence],
    percent: float,
    seed: int,
    head_kind: str,
) -> list[TrainInstance]:
    """Reduce the O-class contribution by roughly ``percent`` percent.

    Softmax head: mask that share of O-labeled tokens out of the loss sum
    (they still feed the encoder). CRF head: drop sentences with no outcome
    phrase until the corpus O-token count has fallen by that share, or all
    such sentences are gone. B/I tokens are never masked or removed.
    """
    if not 0 <= percent <= 100:
        raise ValueError(f"percent must be in [0, 100], got {percent}")
    rng = np.random.default_rng(seed)
    instances = [
        TrainInstance(sentence=s, loss_mask=np.ones(len(s), dtype=bool)) for s in sentences
    ]
    if percent == 0:
        return instances
    if head_kind == "softmax":
        o_positions = [
            (i, j)
            for i, s in enumerate(sentences)
            for j, lab in enumerate(s.labels)
            if lab.tag == "O"
        ]
        k = int(np.floor(percent / 100.0 * len(o_positions) + 0.5))
        for idx in rng.choice(len(o_positions), size=k, replace=False):
            i, j = o_positions[idx]
            instances[i].loss_mask[j] = False
        return instances
    # CRF: whole sentences only
    total_o = sum(1 for s in sentences for lab in s.labels if lab.tag == "O")
    target = percent / 100.0 * total_o
    all_o_idx = [i for i, s in enumerate(sentences) if s.n_phrases() == 0]
    rng.shuffle(all_o_idx)
    dropped: set[int] = set()
    removed = 0
    for i in all_o_idx:
        if removed >= target:
            break
        dropped.add(i)
        removed += len(sentences[i])
    return [inst for i, inst in enumerate(instances) if i not in dropped]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    loss: str = "iil2"
    undersample_percent: float = 50.0
    learning_rate: float = 0.1
    batch_size: int = 300
    epochs: int = 60
    optimizer: str = "sgd"  # "sgd" | "adam"
    seed: int = 0
    patience: int | None = None  # early stopping on dev macro F1; None = fixed epochs
    focal_lambda: float = 2.0
    weighted_crf: bool = True  # apply the per-label scaling inside the CRF loss


def contextual_preset(seed: int = 0) -> TrainConfig:
    """Settings used for the frozen-contextual runs fed by the embedding exporter."""
    return TrainConfig(
        loss="iil2",
        undersample_percent=100.0,
        learning_rate=1e-5,
        batch_size=32,
        epochs=10,
        optimizer="adam",
        seed=seed,
    )


@dataclass
class ModelConfig:
    encoder: str = "bilstm"  # "linear" | "bilstm"
    head: str = "crf"        # "softmax" | "crf"
    hidden_size: int = 200
    activation: str = "identity"
    pos_dim: int = 32
    init_scale: float = 0.1
    use_pca: bool = False
    pca_dim: int | None = None  # None = half the embedding width


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    dev_token_macro_f1: float
    dev_strict_f1: float
    seconds: float

    def csv_row(self) -> str:
        return (
            f"{self.epoch},{self.train_loss:.10f},"
            f"{self.dev_token_macro_f1:.4f},{self.dev_strict_f1:.4f},{self.seconds:.3f}"
        )


LOG_HEADER = "epoch,train_loss,dev_token_macro_f1,dev_strict_f1,seconds"


def write_training_log(log: Sequence[EpochLog], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LOG_HEADER + "\n")
        for row in log:
            fh.write(row.csv_row() + "\n")


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, p in params.items():
            g = grads.get(name)
            if g is not None:
                p -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return Sgd(config.learning_rate)
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def build_model(
    n_feature_dim: int,
    vocab: LabelVocabulary,
    pos_table: PosEmbeddingTable,
    model_config: ModelConfig,
    seed: int,
    pca: PcaTransform | None = None,
    feature_meta: dict | None = None,
) -> TaggerModel:
    seeds = np.random.SeedSequence(seed).spawn(2)
    enc_seed = int(seeds[0].generate_state(1)[0])
    head_seed = int(seeds[1].generate_state(1)[0])
    if model_config.encoder == "linear":
        encoder = LinearEncoder.create(
            n_feature_dim, model_config.hidden_size, seed=enc_seed,
            activation=model_config.activation, scale=model_config.init_scale,
        )
    elif model_config.encoder == "bilstm":
        encoder = BiLstmEncoder.create(
            n_feature_dim, model_config.hidden_size, seed=enc_seed,
            scale=model_config.init_scale,
        )
    else:
        raise ValueError(f"unknown encoder kind {model_config.encoder!r}")
    if model_config.head == "softmax":
        head = SoftmaxHead.create(
            len(vocab), model_config.hidden_size, seed=head_seed, scale=model_config.init_scale
        )
    elif model_config.head == "crf":
        head = CrfHead.create(
            len(vocab), model_config.hidden_size, seed=head_seed, scale=model_config.init_scale
        )
    else:
        raise ValueError(f"unknown head kind {model_config.head!r}")
    return TaggerModel(
        labels=vocab, encoder=encoder, head=head, pos_table=pos_table,
        pca=pca, feature_meta=feature_meta or {},
    )


def evaluate_dev(model: TaggerModel, dev: Sequence[TokenizedSentence], store: EmbeddingStore):
    gold = [[str(lab) for lab in s.labels] for s in dev]
    pred = [[str(lab) for lab in predict(s, model, store)] for s in dev]
    tok = token_metrics(gold, pred)
    strict = strict_metrics(gold, pred)
    return tok.macro_f1, strict.f1


def train(
    split: CorpusSplit,
    store: EmbeddingStore,
    model_config: ModelConfig,
    config: TrainConfig,
    types: tuple[str, ...] | None = None,
    dev_store: EmbeddingStore | None = None,
) -> tuple[TaggerModel, list[EpochLog]]:
    """Mini-batch training with per-epoch dev scoring; returns the dev-best model.

    Deterministic under ``config.seed``: initialization, undersampling and
    every epoch's shuffle derive from it. ``types`` pins the outcome-type set
    (e.g. a dataset's full canonical list); by default it is discovered from
    the gold labels. Contextual stores are keyed per corpus file, so the dev
    split may need its own store (``dev_store`` defaults to ``store``).
    """
    if not split.train:
        raise EmptyTrainingSplit("training split is empty")
    if dev_store is None:
        dev_store = store
    store.validate_coverage(split.train)
    dev_store.validate_coverage(split.dev)
    if types is None:
        types = types_from_sentences(split.train + split.dev + split.test)
    vocab = LabelVocabulary.for_types(types)

    pos_tags = sorted({t for s in split.train for t in s.pos_tags})
    seeds = np.random.SeedSequence(config.seed).spawn(4)
    pos_seed = int(seeds[0].generate_state(1)[0])
    model_seed = int(seeds[1].generate_state(1)[0])
    sample_seed = int(seeds[2].generate_state(1)[0])
    shuffle_rng = np.random.default_rng(seeds[3])
    pos_table = PosEmbeddingTable.create(
        pos_tags, dim=model_config.pos_dim, seed=pos_seed, scale=model_config.init_scale
    )

    pca = None
    word_dim = store.dim
    if model_config.use_pca:
        sample = np.concatenate([word_vectors(s, store) for s in split.train], axis=0)
        pca = fit_pca(sample, model_config.pca_dim)
        word_dim = pca.out_dim
    feature_dim = word_dim + model_config.pos_dim

    feature_meta = {
        "mode": store.mode,
        "word_dim": store.dim,
        "pca_dim": word_dim if pca is not None else None,
        "pos_dim": model_config.pos_dim,
    }
    model = build_model(
        feature_dim, vocab, pos_table, model_config, model_seed, pca, feature_meta
    )

    weights = compute_label_weights(split.train, vocab, config.loss)
    focal = None
    loss_weights: np.ndarray | None = None
    crf_beta: np.ndarray | None = None
    if config.loss == "focal":
        focal = (weights.values, config.focal_lambda)
    elif config.loss != "none":
        if model_config.head == "crf":
            crf_beta = weights.values if config.weighted_crf else None
        else:
            loss_weights = weights.values

    instances = undersample(
        split.train, config.undersample_percent, sample_seed, model_config.head
    )

    def sentence_denominator(inst: TrainInstance, gold: np.ndarray) -> float:
        # Weighted-mean reduction: softmax batches divide by the summed token
        # weights (plain token count under focal), CRF batches by sentence count.
        if model_config.head == "crf":
            return 1.0
        kept = inst.loss_mask
        if focal is not None or loss_weights is None:
            return float(kept.sum())
        return float(loss_weights[gold[kept]].sum())

    params = model.tensors()
    optimizer = make_optimizer(config)
    log: list[EpochLog] = []
    best_f1 = -1.0
    best_state: dict[str, np.ndarray] | None = None
    epochs_since_best = 0

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(instances))
        loss_sum = 0.0
        denom_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            batch_grads: dict[str, np.ndarray] = {}
            batch_loss = 0.0
            batch_denom = 0.0
            for idx in batch:
                inst = instances[idx]
                sent = inst.sentence
                feats = token_features(sent, store, model.pos_table, model.pca)
                pos_idx = model.pos_table.indices(sent.pos_tags)
                gold = vocab.encode(sent.labels)
                loss, grads = sentence_loss_and_grads(
                    model, feats, pos_idx, gold,
                    weights=loss_weights,
                    mask=inst.loss_mask if model_config.head == "softmax" else None,
                    focal=focal,
                    crf_beta=crf_beta,
                )
                batch_loss += loss
                batch_denom += sentence_denominator(inst, gold)
                for name, g in grads.items():
                    if name in batch_grads:
                        batch_grads[name] += g
                    else:
                        batch_grads[name] = g.copy()
            if not np.isfinite(batch_loss):
                raise DivergedLoss(
                    f"non-finite loss at epoch {epoch}: {batch_loss!r}; "
                    f"lr={config.learning_rate}, loss scheme={config.loss}"
                )
            scale = 1.0 / max(batch_denom, 1e-12)
            for g in batch_grads.values():
                g *= scale
            optimizer.step(params, batch_grads)
            loss_sum += batch_loss
            denom_sum += batch_denom
        train_loss = loss_sum / max(denom_sum, 1e-12)
        dev_f1, dev_strict = evaluate_dev(model, split.dev, dev_store) if split.dev else (0.0, 0.0)
        log.append(
            EpochLog(
                epoch=epoch,
                train_loss=train_loss,
                dev_token_macro_f1=dev_f1,
                dev_strict_f1=dev_strict,
                seconds=time.perf_counter() - t0,
            )
        )
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_state = {k: v.copy() for k, v in params.items()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if config.patience is not None and epochs_since_best >= config.patience:
                break

    if best_state is not None:
        for name, value in best_state.items():
            params[name][...] = value
    return model, log
