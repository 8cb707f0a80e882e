"""Corpus layer: BIO conversion, column-file IO, splits and dataset statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .annotate import AnnotatedAbstract, OutcomeSpan
from .textutil import Token, split_sentences, tokenize

COMET_TYPES = ("Physiological", "Death", "LifeImpact", "ResourceUse", "AdverseEvents")
NLP_REV_TYPES = ("Physical", "Pain", "Mental", "Mortality", "AdverseEffects", "Other")


class OverlappingSpans(ValueError):
    pass


class SpanTokenMisalignment(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


class RaggedRow(ValueError):
    pass


class EmptySentenceBlock(ValueError):
    pass


@dataclass(frozen=True)
class BioLabel:
    """One BIO tag; ``otype`` (the outcome type) is present iff tag is B or I."""

    tag: str
    otype: str | None = None

    def __post_init__(self):
        if self.tag not in ("B", "I", "O"):
            raise ValueError(f"tag must be B, I or O, got {self.tag!r}")
        if (self.otype is None) != (self.tag == "O"):
            raise ValueError("otype is required for B/I and forbidden for O")

    def __str__(self) -> str:
        return self.tag if self.tag == "O" else f"{self.tag}-{self.otype}"

    @classmethod
    def parse(cls, text: str) -> "BioLabel":
        if text == "O":
            return O_LABEL
        if len(text) > 2 and text[0] in "BI" and text[1] == "-":
            return cls(text[0], text[2:])
        raise ValueError(f"cannot parse BIO label {text!r}")


O_LABEL = BioLabel("O")


@dataclass
class TokenizedSentence:
    """Tokens, POS tags and BIO labels of one sentence, all the same length."""

    tokens: list[str]
    pos_tags: list[str]
    labels: list[BioLabel]
    doc_id: str = ""
    sent_index: int = 0

    def __post_init__(self):
        n = len(self.tokens)
        if n < 1:
            raise ValueError("a sentence needs at least one token")
        if len(self.pos_tags) != n or len(self.labels) != n:
            raise ValueError("tokens, pos_tags and labels must have equal length")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def key(self) -> str:
        return f"{self.doc_id}:{self.sent_index}"

    def n_phrases(self) -> int:
        return sum(1 for lab in self.labels if lab.tag == "B")


@dataclass
class CorpusSplit:
    train: list[TokenizedSentence]
    dev: list[TokenizedSentence]
    test: list[TokenizedSentence]
    seed: int

    def parts(self) -> dict[str, list[TokenizedSentence]]:
        return {"train": self.train, "dev": self.dev, "test": self.test}


def is_bio_valid(labels: Sequence[BioLabel]) -> bool:
    prev = O_LABEL
    for lab in labels:
        if lab.tag == "I" and (prev.tag == "O" or prev.otype != lab.otype):
            return False
        prev = lab
    return True


def repair_bio(labels: Sequence[BioLabel]) -> tuple[list[BioLabel], int]:
    """Turn orphan I-X labels into B-X; returns the repaired sequence and a repair count."""
    repaired: list[BioLabel] = []
    fixes = 0
    prev = O_LABEL
    for lab in labels:
        if lab.tag == "I" and (prev.tag == "O" or prev.otype != lab.otype):
            lab = BioLabel("B", lab.otype)
            fixes += 1
        repaired.append(lab)
        prev = lab
    return repaired, fixes


def _span_token_indices(span: OutcomeSpan, tokens: Sequence[Token]) -> list[int]:
    """Token indices covered by the span's char ranges; boundaries must align."""
    idxs: list[int] = []
    for rs, re_ in span.char_offsets:
        for i, t in enumerate(tokens):
            if t.end <= rs or t.start >= re_:
                continue
            if t.start < rs or t.end > re_:
                raise SpanTokenMisalignment(
                    f"span range ({rs},{re_}) cuts through token {t.text!r} at ({t.start},{t.end})"
                )
            idxs.append(i)
    return idxs


def to_bio(tokens: Sequence[Token], spans: Sequence[OutcomeSpan]) -> list[BioLabel]:
    """Label sentence tokens from gold spans.

    Contiguous (single-range) spans own their tokens outright: two of them
    overlapping is an error. Multi-range spans, produced by shared-word
    expansion, label only tokens not already claimed; every maximal run of
    fresh tokens starts with B.
    """
    labels: list[BioLabel] = [O_LABEL] * len(tokens)
    claimed: set[int] = set()
    simple = [s for s in spans if len(s.char_offsets) == 1]
    shared = [s for s in spans if len(s.char_offsets) > 1]
    simple.sort(key=lambda s: s.char_offsets[0][0])
    shared.sort(key=lambda s: s.char_offsets[0][0])
    for span in simple + shared:
        idxs = _span_token_indices(span, tokens)
        if not idxs:
            raise SpanTokenMisalignment(f"span {span.text!r} covers no sentence token")
        fresh = [i for i in idxs if i not in claimed]
        if len(span.char_offsets) == 1 and len(fresh) != len(idxs):
            raise OverlappingSpans(f"span {span.text!r} overlaps an earlier span")
        if not fresh:
            raise OverlappingSpans(f"span {span.text!r} is fully covered by earlier spans")
        run_start = True
        prev = None
        for i in fresh:
            if prev is not None and i != prev + 1:
                run_start = True
            labels[i] = BioLabel("B" if run_start else "I", span.otype)
            run_start = False
            prev = i
        claimed.update(idxs)
    return labels


def extract_runs(labels: Sequence[BioLabel]) -> tuple[list[tuple[int, int, str]], int]:
    """Maximal B-I.. runs as ``(start, end, otype)``; orphan I labels are repaired first."""
    fixed, fixes = repair_bio(labels)
    runs: list[tuple[int, int, str]] = []
    start = None
    otype = None
    for i, lab in enumerate(fixed):
        if lab.tag == "B":
            if start is not None:
                runs.append((start, i, otype))
            start, otype = i, lab.otype
        elif lab.tag == "O":
            if start is not None:
                runs.append((start, i, otype))
            start, otype = None, None
    if start is not None:
        runs.append((start, len(fixed), otype))
    return runs, fixes


def spans_from_bio(tokens: Sequence[str], labels: Sequence[BioLabel]) -> list[tuple[str, str]]:
    """Phrases with their outcome type; exact inverse of ``to_bio`` for contiguous spans."""
    runs, _ = extract_runs(labels)
    return [(" ".join(tokens[s:e]), t) for s, e, t in runs]


def _half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_corpus(
    sentences: Sequence[TokenizedSentence],
    seed: int,
    ratios: tuple[float, float, float] = (0.75, 0.15, 0.10),
) -> CorpusSplit:
    """Deterministic shuffle under ``seed``, then a contiguous train/dev/test partition.

    Dev and test sizes are the rounded ratio shares; train takes the remainder,
    so all three stay within one sentence of the exact products.
    """
    if not sentences:
        raise EmptyCorpus("no sentences to split")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    n = len(sentences)
    order = np.random.default_rng(seed).permutation(n)
    n_dev = _half_up(n * ratios[1])
    n_test = _half_up(n * ratios[2])
    n_train = n - n_dev - n_test
    if n_train < 0:
        raise ValueError("ratios leave no room for a training partition")
    shuffled = [sentences[i] for i in order]
    return CorpusSplit(
        train=shuffled[:n_train],
        dev=shuffled[n_train : n_train + n_dev],
        test=shuffled[n_train + n_dev :],
        seed=seed,
    )


@dataclass
class CorpusStats:
    """Per-split dataset statistics, rounded the way the summary table reports them."""

    n_sentences: dict[str, int]
    n_with_outcomes: dict[str, int]
    avg_tokens: dict[str, float]
    avg_phrases: dict[str, float]
    label_histogram: dict[str, dict[str, int]]

    def to_json_dict(self) -> dict:
        return {
            "n_sentences": self.n_sentences,
            "n_sentences_with_outcomes": self.n_with_outcomes,
            "avg_tokens_per_sentence": self.avg_tokens,
            "avg_outcome_phrases_per_sentence": self.avg_phrases,
            "label_histogram": self.label_histogram,
        }

    def format_table(self) -> str:
        parts = [p for p in ("train", "dev", "test") if p in self.n_sentences]
        rows = [
            ("sentences", [str(self.n_sentences[p]) for p in parts]),
            ("with outcome phrases", [str(self.n_with_outcomes[p]) for p in parts]),
            ("avg tokens/sentence", [f"{self.avg_tokens[p]:.1f}" for p in parts]),
            ("avg phrases/sentence", [f"{self.avg_phrases[p]:.2f}" for p in parts]),
        ]
        head = f"{'':24s}" + "".join(f"{p:>10s}" for p in parts)
        lines = [head]
        for name, cells in rows:
            lines.append(f"{name:24s}" + "".join(f"{c:>10s}" for c in cells))
        lines.append("")
        lines.append("label histogram (all splits):")
        merged: dict[str, int] = {}
        for hist in self.label_histogram.values():
            for lab, cnt in hist.items():
                merged[lab] = merged.get(lab, 0) + cnt
        for lab in sorted(merged):
            lines.append(f"  {lab:24s}{merged[lab]:>10d}")
        return "\n".join(lines)


def compute_stats(split: CorpusSplit) -> CorpusStats:
    n_sentences: dict[str, int] = {}
    n_with: dict[str, int] = {}
    avg_tokens: dict[str, float] = {}
    avg_phrases: dict[str, float] = {}
    hist: dict[str, dict[str, int]] = {}
    for name, sents in split.parts().items():
        n_sentences[name] = len(sents)
        n_with[name] = sum(1 for s in sents if s.n_phrases() > 0)
        tok_total = sum(len(s) for s in sents)
        phrase_total = sum(s.n_phrases() for s in sents)
        avg_tokens[name] = round(tok_total / len(sents), 1) if sents else 0.0
        avg_phrases[name] = round(phrase_total / len(sents), 2) if sents else 0.0
        h: dict[str, int] = {}
        for s in sents:
            for lab in s.labels:
                key = str(lab)
                h[key] = h.get(key, 0) + 1
        hist[name] = h
    return CorpusStats(n_sentences, n_with, avg_tokens, avg_phrases, hist)


# ---------------------------------------------------------------------------
# Column file format: `token<TAB>pos<TAB>label`, blank line between sentences,
# `-DOC- <id>` introduces a document.
# ---------------------------------------------------------------------------

def read_column_file(path: str | Path) -> list[TokenizedSentence]:
    """Read a column corpus; sentence indices count per document across the file.

    The counters continue over repeated ``-DOC-`` blocks, so a sentence's
    ``doc_id:sent_index`` key is a deterministic function of the file. Anything
    keyed to these sentences (contextual embedding exports in particular) must
    be derived from the same file.
    """
    sentences: list[TokenizedSentence] = []
    cur: list[tuple[str, str, str]] = []
    doc_id = ""
    doc_counts: dict[str, int] = {}

    def flush():
        nonlocal cur
        if cur:
            idx = doc_counts.get(doc_id, 0)
            doc_counts[doc_id] = idx + 1
            sentences.append(
                TokenizedSentence(
                    tokens=[c[0] for c in cur],
                    pos_tags=[c[1] for c in cur],
                    labels=[BioLabel.parse(c[2]) for c in cur],
                    doc_id=doc_id,
                    sent_index=idx,
                )
            )
            cur = []

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.startswith("-DOC- "):
                flush()
                doc_id = line[len("-DOC- ") :]
            elif line == "":
                if not cur:
                    raise EmptySentenceBlock(f"empty sentence block at line {lineno}")
                flush()
            else:
                cols = line.split("\t")
                if len(cols) != 3:
                    raise RaggedRow(f"line {lineno}: expected 3 tab-separated columns, got {len(cols)}")
                cur.append((cols[0], cols[1], cols[2]))
    flush()
    return sentences


def write_column_file(sentences: Iterable[TokenizedSentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        last_doc: str | None = None
        for sent in sentences:
            if sent.doc_id != last_doc:
                if sent.doc_id:
                    fh.write(f"-DOC- {sent.doc_id}\n")
                last_doc = sent.doc_id
            for tok, pos, lab in zip(sent.tokens, sent.pos_tags, sent.labels):
                fh.write(f"{tok}\t{pos}\t{lab}\n")
            fh.write("\n")


# ---------------------------------------------------------------------------
# Fallback POS tagging: coarse suffix/lexicon rules, used when no POS column
# is supplied. Keeps the pipeline runnable without an external tagger.
# ---------------------------------------------------------------------------

_POS_LEXICON = {
    **{w: "DT" for w in ("the", "a", "an", "this", "that", "these", "those", "each", "every", "no")},
    **{w: "IN" for w in (
        "of", "in", "on", "at", "for", "with", "by", "to", "from", "during",
        "after", "before", "between", "among", "versus", "vs", "within", "without",
        "under", "over", "than", "as", "into", "per",
    )},
    **{w: "CC" for w in ("and", "or", "but", "nor", "plus")},
    **{w: "PRP" for w in ("we", "they", "it", "he", "she", "i", "you", "who", "which", "that")},
    **{w: "MD" for w in ("may", "might", "can", "could", "will", "would", "should", "must", "shall")},
    **{w: "VB" for w in (
        "is", "are", "was", "were", "be", "been", "being",
        "has", "have", "had", "do", "does", "did",
    )},
}

FALLBACK_TAGSET = (
    "NN", "NNS", "VB", "VBD", "VBG", "VBN", "JJ", "RB",
    "DT", "IN", "CC", "PRP", "MD", "CD", "PUNCT",
)


def fallback_pos_tag(token: str) -> str:
    low = token.lower()
    if low in _POS_LEXICON:
        return _POS_LEXICON[low]
    if any(c.isdigit() for c in token) and not any(c.isalpha() for c in token):
        return "CD"
    if not any(c.isalnum() for c in token):
        return "PUNCT"
    if low.endswith("ly"):
        return "RB"
    if low.endswith("ing") and len(low) > 4:
        return "VBG"
    if low.endswith("ed") and len(low) > 3:
        return "VBD"
    if low.endswith(("al", "ous", "ive", "ic", "able", "ible", "ful", "less")) and len(low) > 4:
        return "JJ"
    if low.endswith("s") and not low.endswith(("ss", "us", "is")) and len(low) > 3:
        return "NNS"
    return "NN"


def pos_tag_tokens(tokens: Sequence[str], lexicon: dict[str, str] | None = None) -> list[str]:
    """Tag tokens via an optional external lexicon, falling back to the rule tagger."""
    tags = []
    for tok in tokens:
        if lexicon is not None and tok in lexicon:
            tags.append(lexicon[tok])
        elif lexicon is not None and tok.lower() in lexicon:
            tags.append(lexicon[tok.lower()])
        else:
            tags.append(fallback_pos_tag(tok))
    return tags


# ---------------------------------------------------------------------------
# Abstract -> sentences
# ---------------------------------------------------------------------------

def _merge_ranges_for_spans(
    ranges: list[tuple[int, int]], spans: Sequence[OutcomeSpan]
) -> list[tuple[int, int]]:
    """Merge sentence ranges so no span straddles a boundary."""
    changed = True
    ranges = list(ranges)
    while changed:
        changed = False
        for span in spans:
            lo = span.char_offsets[0][0]
            hi = span.char_offsets[-1][1]
            first = last = None
            for k, (s, e) in enumerate(ranges):
                if s < hi and e > lo:
                    if first is None:
                        first = k
                    last = k
            if first is not None and last is not None and last > first:
                merged = (ranges[first][0], ranges[last][1])
                ranges = ranges[:first] + [merged] + ranges[last + 1 :]
                changed = True
                break
    return ranges


def abstract_to_sentences(
    abstract: AnnotatedAbstract, pos_lexicon: dict[str, str] | None = None
) -> list[TokenizedSentence]:
    """Sentence-split an abstract and convert its gold spans to BIO labels."""
    plain = abstract.plain_text
    ranges = split_sentences(plain)
    ranges = _merge_ranges_for_spans(ranges, abstract.spans)
    out: list[TokenizedSentence] = []
    for k, (s, e) in enumerate(ranges):
        toks = tokenize(plain[s:e], base=s)
        if not toks:
            continue
        in_sent = [
            sp
            for sp in abstract.spans
            if sp.char_offsets[0][0] >= s and sp.char_offsets[-1][1] <= e
        ]
        labels = to_bio(toks, in_sent)
        texts = [t.text for t in toks]
        out.append(
            TokenizedSentence(
                tokens=texts,
                pos_tags=pos_tag_tokens(texts, pos_lexicon),
                labels=labels,
                doc_id=abstract.id,
                sent_index=len(out),
            )
        )
    return out


def write_stats_json(stats: CorpusStats, path: str | Path) -> None:
    Path(path).write_text(json.dumps(stats.to_json_dict(), indent=2), encoding="utf-8")
