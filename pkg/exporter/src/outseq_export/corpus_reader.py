"""Minimal reader for the toolkit's column corpus format.

Only the token column and the document/sentence bookkeeping are needed here;
POS tags and labels pass through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class CorpusSentence:
    tokens: tuple[str, ...]
    doc_id: str
    sent_index: int

    @property
    def key(self) -> str:
        return f"{self.doc_id}:{self.sent_index}"


def read_corpus(path: str | Path) -> list[CorpusSentence]:
    """Sentence indices count per document across the file (cumulative over
    repeated ``-DOC-`` blocks), matching how the consumer keys its sentences."""
    sentences: list[CorpusSentence] = []
    tokens: list[str] = []
    doc_id = ""
    doc_counts: dict[str, int] = {}

    def flush():
        nonlocal tokens
        if tokens:
            idx = doc_counts.get(doc_id, 0)
            doc_counts[doc_id] = idx + 1
            sentences.append(CorpusSentence(tuple(tokens), doc_id, idx))
            tokens = []

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.startswith("-DOC- "):
                flush()
                doc_id = line[len("-DOC- ") :]
            elif line == "":
                flush()
            else:
                cols = line.split("\t")
                if not cols[0]:
                    raise ValueError(f"{path}:{lineno}: empty token column")
                tokens.append(cols[0])
    flush()
    if not sentences:
        raise ValueError(f"{path}: corpus holds no sentences")
    return sentences
