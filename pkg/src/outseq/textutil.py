"""Tokenization and sentence splitting shared by the annotation parser and corpus layers."""

from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True)
class Token:
    """A token with its character range ``[start, end)`` in the source text."""

    text: str
    start: int
    end: int


# Numbers with internal separators stay whole (1.5, 1,200); words keep internal
# hyphens and apostrophes (blood-pressure, patient's); anything else is a
# single-character token.
_TOKEN_RE = re.compile(r"\d+(?:[.,]\d+)+|\w+(?:[-']\w+)*|\S")

# Lowercased; a trailing period after one of these never ends a sentence.
_ABBREVIATIONS = {
    "vs.", "v.", "e.g.", "i.e.", "etc.", "cf.", "ca.", "al.", "et.",
    "fig.", "figs.", "no.", "nos.", "dr.", "mr.", "mrs.", "ms.",
    "approx.", "resp.", "spp.", "min.", "max.", "inc.",
}

_SENTENCE_END = {".", "?", "!"}


def tokenize(text: str, base: int = 0) -> list[Token]:
    """Split ``text`` into tokens; offsets are shifted by ``base``."""
    return [
        Token(m.group(0), base + m.start(), base + m.end())
        for m in _TOKEN_RE.finditer(text)
    ]


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends."""
    return " ".join(text.split())


def _preceding_word(text: str, idx: int) -> str:
    """The word ending at ``idx`` inclusive of the punctuation char there."""
    j = idx
    while j > 0 and not text[j - 1].isspace():
        j -= 1
    return text[j : idx + 1]


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Rule-based sentence splitting; returns trimmed ``(start, end)`` ranges.

    Splits after ``.``, ``?`` or ``!`` when followed by whitespace and an
    uppercase letter or digit, skipping abbreviations, single-initial periods
    (``J.``) and any terminator inside parentheses or brackets.
    """
    bounds: list[int] = []
    depth = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth = max(0, depth - 1)
        elif ch in _SENTENCE_END and depth == 0:
            j = i + 1
            while j < n and text[j] in "\"')]":
                j += 1
            if j < n and not text[j].isspace():
                continue
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k < n and not (text[k].isupper() or text[k].isdigit()):
                continue
            if ch == ".":
                word = _preceding_word(text, i).lower()
                if word in _ABBREVIATIONS:
                    continue
                if len(word) == 2 and word[0].isalpha():
                    continue
            bounds.append(j)

    ranges: list[tuple[int, int]] = []
    start = 0
    for b in bounds + [n]:
        s, e = start, b
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if e > s:
            ranges.append((s, e))
        start = b
    return ranges
