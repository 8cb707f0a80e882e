"""Deterministic embedding backends and the model-width catalogue.

Model identifiers map to their published vector widths. In this build every
identifier is served by a hash-seeded feature backend: each subword piece gets
a fixed pseudo-random vector derived from sha256(model:layer:piece), and
contextual vectors blend in the neighboring pieces so the same token embeds
differently in different sentences. A backend that runs the actual pretrained
network can replace `resolve_model` wholesale; everything downstream only
needs `piece_vector` / `contextual_piece_vectors` at a declared width.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

# Published widths of the extracted representations.
MODEL_DIMS = {
    "bert": 768,
    "biobert": 768,
    "scibert": 768,
    "clinicalbert": 768,
    "bio-clinicalbert": 768,
    "discharge-summary-bert": 768,
    "elmo": 3072,
    "bioelmo": 3072,
    "bioflair": 7672,
    "pubmed-w2v": 200,
}

_HASH_ID = re.compile(r"^hash(\d+)$")

_CONTEXT_WINDOW = 2
_CONTEXT_WEIGHT = 0.5


class UnknownModel(ValueError):
    pass


@dataclass(frozen=True)
class HashBackend:
    """Seeded per-piece vectors; context mixing makes the contextual variant."""

    model: str
    dim: int
    layer: int = -1

    def piece_vector(self, piece: str) -> np.ndarray:
        digest = hashlib.sha256(
            f"{self.model}:{self.layer}:{piece}".encode("utf-8")
        ).digest()
        seed = int.from_bytes(digest[:8], "little")
        return np.random.default_rng(seed).standard_normal(self.dim)

    def contextual_piece_vectors(self, pieces: list[str]) -> np.ndarray:
        base = np.stack([self.piece_vector(p) for p in pieces])
        out = base.copy()
        n = len(pieces)
        for i in range(n):
            lo = max(0, i - _CONTEXT_WINDOW)
            hi = min(n, i + _CONTEXT_WINDOW + 1)
            neighbors = [j for j in range(lo, hi) if j != i]
            if neighbors:
                out[i] = base[i] + _CONTEXT_WEIGHT * base[neighbors].mean(axis=0)
        return out


def resolve_model(identifier: str, layer: int = -1) -> HashBackend:
    """Look the identifier up in the catalogue; `hash<d>` gives any width."""
    name = identifier.lower()
    m = _HASH_ID.match(name)
    if m:
        return HashBackend(model=name, dim=int(m.group(1)), layer=layer)
    if name in MODEL_DIMS:
        return HashBackend(model=name, dim=MODEL_DIMS[name], layer=layer)
    known = ", ".join(sorted(MODEL_DIMS))
    raise UnknownModel(f"unknown model {identifier!r}; known: {known}, or hash<dim>")
