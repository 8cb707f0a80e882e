"""Token-level and strict full-phrase scoring for outcome extraction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import BioLabel, TokenizedSentence, extract_runs

LENGTH_BUCKETS = 10  # phrase lengths 1..10; longer phrases pool into a tail bucket

# Published strict full-phrase scores of the best fine-tuned model on each
# dataset, kept as regression context for comparing runs (not a target this
# toolkit's frozen-embedding models are expected to hit).
PUBLISHED_STRICT_REFERENCE = {
    "ebm-comet": {"precision": 60.8, "recall": 81.3, "specificity": 98.0, "f1": 69.6},
    "ebm-nlp-rev": {"precision": 53.7, "recall": 51.2, "specificity": 99.2, "f1": 52.4},
}


class LengthMismatch(ValueError):
    pass


def _as_bio(seq) -> list[BioLabel]:
    return [lab if isinstance(lab, BioLabel) else BioLabel.parse(lab) for lab in seq]


def _check_aligned(gold_seqs, pred_seqs) -> None:
    if len(gold_seqs) != len(pred_seqs):
        raise LengthMismatch(
            f"{len(gold_seqs)} gold sequences vs {len(pred_seqs)} predicted"
        )
    for i, (g, p) in enumerate(zip(gold_seqs, pred_seqs)):
        if len(g) != len(p):
            raise LengthMismatch(f"sequence {i}: {len(g)} gold labels vs {len(p)} predicted")


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


# ---------------------------------------------------------------------------
# Token-level metrics
# ---------------------------------------------------------------------------

@dataclass
class TokenMetrics:
    per_label: dict[str, dict[str, float]]  # label -> {precision, recall, f1, support}
    macro_f1: float
    confusion: dict[str, dict[str, int]]    # gold -> predicted -> count

    def to_json_dict(self) -> dict:
        return {
            "per_label": self.per_label,
            "macro_f1": round(self.macro_f1 * 100, 1),
            "confusion": self.confusion,
        }


def token_metrics(gold_seqs, pred_seqs, include_o: bool = False) -> TokenMetrics:
    """Per-BIO-tag precision/recall/F1 with a macro average over non-O tags."""
    _check_aligned(gold_seqs, pred_seqs)
    confusion: dict[str, dict[str, int]] = {}
    tags: set[str] = set()
    for g_seq, p_seq in zip(gold_seqs, pred_seqs):
        for g, p in zip(_as_bio(g_seq), _as_bio(p_seq)):
            gs, ps = str(g), str(p)
            confusion.setdefault(gs, {}).setdefault(ps, 0)
            confusion[gs][ps] += 1
            tags.add(gs)
            tags.add(ps)
    scored = sorted(t for t in tags if include_o or t != "O")
    per_label: dict[str, dict[str, float]] = {}
    f1s = []
    for tag in scored:
        tp = confusion.get(tag, {}).get(tag, 0)
        fn = sum(confusion.get(tag, {}).values()) - tp
        fp = sum(row.get(tag, 0) for g, row in confusion.items() if g != tag)
        p = _ratio(tp, tp + fp)
        r = _ratio(tp, tp + fn)
        f = _f1(p, r)
        per_label[tag] = {"precision": p, "recall": r, "f1": f, "support": tp + fn}
        f1s.append(f)
    macro = sum(f1s) / len(f1s) if f1s else 0.0
    return TokenMetrics(per_label=per_label, macro_f1=macro, confusion=confusion)


def micro_token_f1(gold_seqs, pred_seqs) -> float:
    """Micro-averaged F1 over non-O tokens; the relaxed baseline strict scoring lowers."""
    _check_aligned(gold_seqs, pred_seqs)
    tp = fp = fn = 0
    for g_seq, p_seq in zip(gold_seqs, pred_seqs):
        for g, p in zip(_as_bio(g_seq), _as_bio(p_seq)):
            gs, ps = str(g), str(p)
            if gs != "O" and gs == ps:
                tp += 1
            else:
                if ps != "O":
                    fp += 1
                if gs != "O":
                    fn += 1
    return _f1(_ratio(tp, tp + fp), _ratio(tp, tp + fn))


# ---------------------------------------------------------------------------
# Strict full-phrase metrics
# ---------------------------------------------------------------------------

@dataclass
class StrictMetrics:
    tp: int
    fp: int
    fn: int
    tn_tokens: int
    fp_tokens: int
    precision: float
    recall: float
    specificity: float
    f1: float

    def to_json_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn_tokens": self.tn_tokens,
            "fp_tokens": self.fp_tokens,
            "precision": round(self.precision * 100, 1),
            "recall": round(self.recall * 100, 1),
            "specificity": round(self.specificity * 100, 1),
            "f1": round(self.f1 * 100, 1),
        }


def strict_metrics(gold_seqs, pred_seqs, match_types: bool = True) -> StrictMetrics:
    """Exact-match phrase scoring.

    A gold phrase counts as detected only when every one of its tokens carries
    the right predicted label (boundaries and type); partially detected
    phrases are false negatives, and any predicted phrase without an exact
    gold twin is a false positive. Specificity is token-level: gold-O tokens
    predicted O over all gold-O tokens.
    """
    _check_aligned(gold_seqs, pred_seqs)
    tp = fp = fn = tn = fpt = 0
    for g_seq, p_seq in zip(gold_seqs, pred_seqs):
        g_labels = _as_bio(g_seq)
        p_labels = _as_bio(p_seq)
        g_runs, _ = extract_runs(g_labels)
        p_runs, _ = extract_runs(p_labels)
        if not match_types:
            g_runs = [(s, e, None) for s, e, _ in g_runs]
            p_runs = [(s, e, None) for s, e, _ in p_runs]
        g_set = set(g_runs)
        p_set = set(p_runs)
        tp += len(g_set & p_set)
        fp += len(p_set - g_set)
        fn += len(g_set - p_set)
        for g, p in zip(g_labels, p_labels):
            if g.tag == "O":
                if p.tag == "O":
                    tn += 1
                else:
                    fpt += 1
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    specificity = _ratio(tn, tn + fpt)
    return StrictMetrics(
        tp=tp, fp=fp, fn=fn, tn_tokens=tn, fp_tokens=fpt,
        precision=precision, recall=recall, specificity=specificity,
        f1=_f1(precision, recall),
    )


# ---------------------------------------------------------------------------
# Accuracy by phrase length
# ---------------------------------------------------------------------------

@dataclass
class LengthAccuracy:
    correct: dict[int, int] = field(default_factory=dict)  # length -> exact matches
    total: dict[int, int] = field(default_factory=dict)
    tail_correct: int = 0
    tail_total: int = 0

    def accuracy(self, length: int) -> float | None:
        t = self.total.get(length, 0)
        return self.correct.get(length, 0) / t if t else None

    def to_json_dict(self) -> dict:
        return {
            "by_length": [
                {
                    "length": x,
                    "total": self.total.get(x, 0),
                    "accuracy": self.accuracy(x),
                }
                for x in range(1, LENGTH_BUCKETS + 1)
            ],
            "tail": {
                "total": self.tail_total,
                "accuracy": self.tail_correct / self.tail_total if self.tail_total else None,
            },
        }


def length_accuracy(gold_seqs, pred_seqs) -> LengthAccuracy:
    """Share of gold phrases of each word length 1..10 that were exactly matched."""
    _check_aligned(gold_seqs, pred_seqs)
    acc = LengthAccuracy()
    for g_seq, p_seq in zip(gold_seqs, pred_seqs):
        g_runs, _ = extract_runs(_as_bio(g_seq))
        p_runs, _ = extract_runs(_as_bio(p_seq))
        p_set = set(p_runs)
        for s, e, t in g_runs:
            length = e - s
            hit = (s, e, t) in p_set
            if length <= LENGTH_BUCKETS:
                acc.total[length] = acc.total.get(length, 0) + 1
                if hit:
                    acc.correct[length] = acc.correct.get(length, 0) + 1
            else:
                acc.tail_total += 1
                if hit:
                    acc.tail_correct += 1
    return acc


# ---------------------------------------------------------------------------
# Full report
# ---------------------------------------------------------------------------

def evaluation_report(gold_seqs, pred_seqs) -> dict:
    return {
        "token": token_metrics(gold_seqs, pred_seqs).to_json_dict(),
        "strict": strict_metrics(gold_seqs, pred_seqs).to_json_dict(),
        "length_accuracy": length_accuracy(gold_seqs, pred_seqs).to_json_dict(),
    }


def format_report(report: dict) -> str:
    lines = ["token-level (per label):"]
    for tag, m in report["token"]["per_label"].items():
        lines.append(
            f"  {tag:24s} P {m['precision'] * 100:5.1f}  R {m['recall'] * 100:5.1f}  "
            f"F1 {m['f1'] * 100:5.1f}  (n={m['support']})"
        )
    lines.append(f"  macro F1 (non-O): {report['token']['macro_f1']:.1f}")
    s = report["strict"]
    lines.append("strict full-phrase:")
    lines.append(
        f"  P {s['precision']:.1f}  R {s['recall']:.1f}  "
        f"S {s['specificity']:.1f}  F1 {s['f1']:.1f}  "
        f"(TP {s['tp']}, FP {s['fp']}, FN {s['fn']})"
    )
    lines.append("accuracy by phrase length:")
    for row in report["length_accuracy"]["by_length"]:
        shown = "-" if row["accuracy"] is None else f"{row['accuracy']:.2f}"
        lines.append(f"  len {row['length']:2d}: {shown}  (n={row['total']})")
    tail = report["length_accuracy"]["tail"]
    shown = "-" if tail["accuracy"] is None else f"{tail['accuracy']:.2f}"
    lines.append(f"  len>10: {shown}  (n={tail['total']})")
    return "\n".join(lines)


def error_dump(
    sentences: Sequence[TokenizedSentence], pred_seqs: Sequence[Sequence[BioLabel]]
) -> str:
    """Per-sentence gold vs predicted phrases, with misses and spurious hits marked."""
    out = []
    for sent, pred in zip(sentences, pred_seqs):
        g_runs, _ = extract_runs(sent.labels)
        p_runs, _ = extract_runs(_as_bio(pred))
        if not g_runs and not p_runs:
            continue
        out.append(" ".join(sent.tokens))
        p_set = set(p_runs)
        g_set = set(g_runs)
        for s, e, t in g_runs:
            mark = "ok  " if (s, e, t) in p_set else "MISS"
            out.append(f"  [{mark}] gold {t}: {' '.join(sent.tokens[s:e])}")
        for s, e, t in p_runs:
            if (s, e, t) not in g_set:
                out.append(f"  [SPUR] pred {t}: {' '.join(sent.tokens[s:e])}")
        out.append("")
    return "\n".join(out)


def write_report_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
