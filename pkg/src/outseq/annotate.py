"""Parser for inline outcome annotations in clinical-trial abstracts.

An annotated span is wrapped as ``<P 38>rash</>``; a span carrying several
domains lists them comma-separated (``<P 25, 28>``). Contiguous outcomes that
share words add a marker after the opening tag and separate the segments with
inner opening tags:

    ``<P 0>(S2)right heart size and <P 0>function</>``

expands to the two spans "right heart size" and "right heart function"
(``S#`` shares the first ``#`` words of the first segment; ``E#`` shares the
last ``#`` words of the final segment). Stripping every tag and marker from
the raw text, with whitespace collapsed, yields the plain text that all span
offsets refer to.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, replace

from .taxonomy import OutcomeDomain, UnknownDomainSymbol
from .textutil import Token, tokenize

CONNECTIVES = frozenset({"and", "or", ",", ";", "/"})

_OPEN_TAG_RE = re.compile(r"<P\s*(\d+(?:\s*,\s*\d+)*)\s*>")
_SHARE_RE = re.compile(r"\(\s*([SE])\s*(-?\d+)\s*\)")
# A parenthesis group counts as a share-marker attempt (rather than span text)
# only when S/E is followed by something count-like.
_SHARE_ATTEMPT_RE = re.compile(r"\(\s*[SE]\s*[-\d)]")


class AnnotationWarning(UserWarning):
    """Non-fatal oddity in an annotation (duplicate domains, unusual combos)."""


class AnnotationError(ValueError):
    """Base for malformed-annotation errors; carries line/column in the raw text."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnbalancedTag(AnnotationError):
    pass


class NestedTag(AnnotationError):
    pass


class MalformedTag(AnnotationError):
    pass


class MalformedShareDirective(AnnotationError):
    pass


class SingleSegmentDirective(AnnotationError):
    pass


class ShareCountExceedsSegment(AnnotationError):
    pass


@dataclass(frozen=True)
class ShareDirective:
    direction: str  # "Start" | "End"
    count: int

    def __post_init__(self):
        if self.direction not in ("Start", "End"):
            raise MalformedShareDirective(f"direction must be Start or End, got {self.direction!r}")
        if self.count < 1:
            raise MalformedShareDirective(f"share count must be positive, got {self.count}")


@dataclass(frozen=True)
class AnnotationDirective:
    """Domains plus an optional word-sharing marker, as read from an opening tag."""

    domains: tuple[OutcomeDomain, ...]
    share: ShareDirective | None = None


@dataclass(frozen=True)
class OutcomeSpan:
    """A gold outcome phrase over the plain text.

    ``char_offsets`` holds one ``(start, end)`` range per contiguous block;
    spans produced by share expansion have more than one. ``text`` is the
    space-joined content of those blocks.
    """

    text: str
    char_offsets: tuple[tuple[int, int], ...]
    domains: tuple[OutcomeDomain, ...]
    sentence_index: int | None = None

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self.text.split())

    @property
    def otype(self) -> str:
        """Core area used for BIO typing: that of the first listed domain."""
        return self.domains[0].core_area


@dataclass(frozen=True)
class AnnotatedAbstract:
    id: str
    raw_text: str
    plain_text: str
    spans: tuple[OutcomeSpan, ...]

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "plain_text": self.plain_text,
            "spans": [
                {
                    "text": s.text,
                    "offsets": [list(r) for r in s.char_offsets],
                    "domains": [d.symbol for d in s.domains],
                }
                for s in self.spans
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_json_dict(cls, data: dict, raw_text: str = "") -> "AnnotatedAbstract":
        spans = tuple(
            OutcomeSpan(
                text=s["text"],
                char_offsets=tuple((int(a), int(b)) for a, b in s["offsets"]),
                domains=tuple(OutcomeDomain.from_symbol(d) for d in s["domains"]),
            )
            for s in data["spans"]
        )
        return cls(id=data["id"], raw_text=raw_text, plain_text=data["plain_text"], spans=spans)


def _line_col(text: str, idx: int) -> tuple[int, int]:
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col


def strip_connectives(segment: list) -> list:
    """Drop a single leading and/or trailing connective token from a segment.

    Applied only to segments inside a shared-span directive; identity when the
    boundary tokens are not connectives. Accepts strings or ``Token`` items.
    """
    def word(item) -> str:
        return item.text if isinstance(item, Token) else item

    out = list(segment)
    if out and word(out[0]).lower() in CONNECTIVES:
        out = out[1:]
    if out and word(out[-1]).lower() in CONNECTIVES:
        out = out[:-1]
    return out


def _merge_ranges(tokens: list[Token]) -> tuple[tuple[int, int], ...]:
    """Collapse token offsets into contiguous ``(start, end)`` blocks.

    Tokens at most one character apart sit in the same block; the gap is the
    single space of the normalized plain text.
    """
    ranges: list[list[int]] = []
    for t in tokens:
        if ranges and t.start - ranges[-1][1] <= 1:
            ranges[-1][1] = t.end
        else:
            ranges.append([t.start, t.end])
    return tuple((a, b) for a, b in ranges)


def _span_from_tokens(tokens: list[Token], plain: str, domains: tuple[OutcomeDomain, ...]) -> OutcomeSpan:
    offsets = _merge_ranges(tokens)
    text = " ".join(plain[a:b] for a, b in offsets)
    return OutcomeSpan(text=text, char_offsets=offsets, domains=domains)


def _expand_token_segments(
    segments: list[list[Token]],
    share: ShareDirective,
    domains: tuple[OutcomeDomain, ...],
    plain: str,
    where: tuple[int | None, int | None] = (None, None),
) -> list[OutcomeSpan]:
    if len(segments) < 2:
        raise SingleSegmentDirective(
            "share directive needs at least two segments", *where
        )
    if share.direction == "Start":
        donor = segments[0]
        if share.count > len(donor):
            raise ShareCountExceedsSegment(
                f"S{share.count} exceeds the {len(donor)}-word first segment", *where
            )
        shared = donor[: share.count]
        built = [segments[0]] + [shared + seg for seg in segments[1:]]
    else:
        donor = segments[-1]
        if share.count > len(donor):
            raise ShareCountExceedsSegment(
                f"E{share.count} exceeds the {len(donor)}-word final segment", *where
            )
        shared = donor[len(donor) - share.count :]
        built = [seg + shared for seg in segments[:-1]] + [segments[-1]]
    return [_span_from_tokens(toks, plain, domains) for toks in built]


def expand_contiguous(segments: list, directive: AnnotationDirective) -> list[OutcomeSpan]:
    """Expand shared-word segments into full spans.

    ``segments`` may hold lists of plain word strings (offsets are then
    synthesized as if the segments were laid out space-separated) or lists of
    ``Token`` items carrying real offsets.
    """
    if directive.share is None:
        raise MalformedShareDirective("directive carries no share marker")
    token_segments: list[list[Token]] = []
    cursor = 0
    pieces: list[str] = []
    for seg in segments:
        toks: list[Token] = []
        for item in seg:
            if isinstance(item, Token):
                toks.append(item)
            else:
                toks.append(Token(item, cursor, cursor + len(item)))
                pieces.append(item)
                cursor += len(item) + 1
        token_segments.append(toks)
    plain = " ".join(pieces) if pieces else ""
    if any(isinstance(item, Token) for seg in segments for item in seg):
        # Real tokens refer to a caller-side plain text we do not have here;
        # rebuild a long-enough buffer so slicing stays valid.
        size = max((t.end for seg in token_segments for t in seg), default=0)
        buf = [" "] * size
        for seg in token_segments:
            for t in seg:
                buf[t.start : t.end] = list(t.text)
        plain = "".join(buf)
    return _expand_token_segments(token_segments, directive.share, directive.domains, plain)


def _parse_domains(symbol_text: str, where: tuple[int, int]) -> tuple[OutcomeDomain, ...]:
    domains: list[OutcomeDomain] = []
    for part in symbol_text.split(","):
        try:
            dom = OutcomeDomain.from_symbol(part)
        except UnknownDomainSymbol as exc:
            raise UnknownDomainSymbol(
                f"{exc} (line {where[0]}, column {where[1]})"
            ) from None
        if dom in domains:
            warnings.warn(
                f"duplicate domain {dom.symbol} in one tag", AnnotationWarning, stacklevel=3
            )
        else:
            domains.append(dom)
    return tuple(domains)


class _PlainBuilder:
    """Accumulates plain text with whitespace collapsed to single spaces."""

    def __init__(self) -> None:
        self.chars: list[str] = []
        self._pending = False

    def feed(self, ch: str) -> int | None:
        """Feed one content char; returns its index in the plain text, or None for whitespace."""
        if ch.isspace():
            if self.chars:
                self._pending = True
            return None
        if self._pending:
            self.chars.append(" ")
            self._pending = False
        self.chars.append(ch)
        return len(self.chars) - 1

    def text(self) -> str:
        return "".join(self.chars)


class _Annotation:
    """Mutable state for the currently open annotation."""

    def __init__(self, directive: AnnotationDirective, where: tuple[int, int]):
        self.directive = directive
        self.where = where
        self.segments: list[tuple[int | None, int | None]] = []
        self.cur_start: int | None = None
        self.cur_end: int | None = None

    def push_segment(self) -> None:
        self.segments.append((self.cur_start, self.cur_end))
        self.cur_start = None
        self.cur_end = None

    def saw_char(self, idx: int) -> None:
        if self.cur_start is None:
            self.cur_start = idx
        self.cur_end = idx + 1


def parse_abstract(raw: str, doc_id: str = "") -> AnnotatedAbstract:
    """Parse one annotated abstract into plain text plus gold outcome spans."""
    builder = _PlainBuilder()
    spans: list[OutcomeSpan] = []
    open_ann: _Annotation | None = None

    def read_tag(idx: int) -> tuple[tuple[OutcomeDomain, ...], ShareDirective | None, int]:
        """Parse the opening tag at ``idx``; returns (domains, share, next index)."""
        where = _line_col(raw, idx)
        m = _OPEN_TAG_RE.match(raw, idx)
        if not m:
            raise MalformedTag("malformed opening tag", *where)
        domains = _parse_domains(m.group(1), where)
        j = m.end()
        ws = re.match(r"\s*", raw[j:]).end()
        share = None
        if _SHARE_ATTEMPT_RE.match(raw, j + ws):
            sm = _SHARE_RE.match(raw, j + ws)
            if not sm:
                raise MalformedShareDirective("unreadable share marker", *_line_col(raw, j + ws))
            count = int(sm.group(2))
            if count < 1:
                raise MalformedShareDirective(
                    f"share count must be positive, got {count}", *_line_col(raw, j + ws)
                )
            share = ShareDirective("Start" if sm.group(1) == "S" else "End", count)
            j = sm.end()
            # whitespace already consumed between tag and marker stays dropped
        return domains, share, j

    def finish_annotation(where: tuple[int, int]) -> None:
        assert open_ann is not None
        open_ann.push_segment()
        plain = builder.text()
        seg_tokens: list[list[Token]] = []
        for s, e in open_ann.segments:
            toks = tokenize(plain[s:e], base=s) if s is not None else []
            seg_tokens.append(toks)
        if open_ann.directive.share is not None:
            seg_tokens = [strip_connectives(t) for t in seg_tokens]
            if any(not t for t in seg_tokens):
                raise MalformedTag("empty segment inside shared annotation", *open_ann.where)
            spans.extend(
                _expand_token_segments(
                    seg_tokens,
                    open_ann.directive.share,
                    open_ann.directive.domains,
                    plain,
                    open_ann.where,
                )
            )
        else:
            toks = seg_tokens[0]
            if not toks:
                raise MalformedTag("annotation encloses no text", *open_ann.where)
            spans.append(_span_from_tokens(toks, plain, open_ann.directive.domains))

    i = 0
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch == "<":
            if raw.startswith("</>", i):
                if open_ann is None:
                    raise UnbalancedTag("closing tag without an open annotation", *_line_col(raw, i))
                finish_annotation(_line_col(raw, i))
                open_ann = None
                i += 3
                continue
            if raw.startswith("</", i):
                raise MalformedTag("malformed closing tag", *_line_col(raw, i))
            if re.match(r"<P[\s\d]", raw[i : i + 3]) or raw[i:] == "<P":
                where = _line_col(raw, i)
                domains, share, j = read_tag(i)
                if open_ann is None:
                    if len(domains) > 1 and share is not None:
                        warnings.warn(
                            "share marker combined with a multi-domain tag",
                            AnnotationWarning,
                            stacklevel=2,
                        )
                    open_ann = _Annotation(AnnotationDirective(domains, share), where)
                else:
                    if open_ann.directive.share is None:
                        raise NestedTag("tags may not nest", *where)
                    if share is not None:
                        raise MalformedShareDirective(
                            "share marker on an inner segment tag", *where
                        )
                    if set(domains) != set(open_ann.directive.domains):
                        warnings.warn(
                            "inner segment tag lists different domains; "
                            "the leading tag's domains apply",
                            AnnotationWarning,
                            stacklevel=2,
                        )
                    open_ann.push_segment()
                i = j
                continue
            # a lone '<' (e.g. "p<0.05") is ordinary text
        idx = builder.feed(ch)
        if idx is not None and open_ann is not None:
            open_ann.saw_char(idx)
        i += 1

    if open_ann is not None:
        raise UnbalancedTag("annotation opened but never closed", *open_ann.where)

    return AnnotatedAbstract(
        id=doc_id, raw_text=raw, plain_text=builder.text(), spans=tuple(spans)
    )


def strip_annotation_markup(raw: str) -> str:
    """Plain text of an annotated abstract: tags and markers removed, whitespace collapsed."""
    return parse_abstract(raw).plain_text


def assign_sentence_indices(
    abstract: AnnotatedAbstract, sentence_ranges: list[tuple[int, int]]
) -> AnnotatedAbstract:
    """Fill each span's sentence index from the given plain-text sentence ranges."""
    new_spans = []
    for span in abstract.spans:
        first = span.char_offsets[0][0]
        idx = None
        for k, (s, e) in enumerate(sentence_ranges):
            if s <= first < e:
                idx = k
                break
        new_spans.append(replace(span, sentence_index=idx))
    return replace(abstract, spans=tuple(new_spans))
