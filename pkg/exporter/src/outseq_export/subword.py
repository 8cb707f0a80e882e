"""Deterministic wordpiece-style splitting used for subword pooling."""

from __future__ import annotations

_PIECE_LEN = 4


def split_subwords(token: str) -> list[str]:
    """Split a token into pieces; continuations carry the usual ## prefix.

    Short tokens stay whole, longer ones break every few characters, so
    multi-piece tokens exist in any realistic corpus and the two pooling
    modes genuinely differ on them.
    """
    low = token.lower()
    if len(low) <= _PIECE_LEN:
        return [low]
    pieces = [low[:_PIECE_LEN]]
    for start in range(_PIECE_LEN, len(low), _PIECE_LEN):
        pieces.append("##" + low[start : start + _PIECE_LEN])
    return pieces
