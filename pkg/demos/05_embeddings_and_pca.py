"""Embedding files and PCA halving of oversized vectors.

Shows the static text format, the contextual JSONL format, and how a PCA
transform fitted on training vectors halves their width while keeping the
dominant directions.

Run: python3 demos/05_embeddings_and_pca.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from outseq import apply_pca, fit_pca, load_embeddings
from outseq.features import default_target_dim, reconstruct_pca, write_static_embeddings

rng = np.random.default_rng(0)

with tempfile.TemporaryDirectory() as tmp:
    static_path = Path(tmp) / "vectors.txt"
    write_static_embeddings(
        {w: rng.normal(size=4) for w in ("rash", "fatigue", "survival")}, static_path
    )
    print("--- static text format (header, then one row per word):")
    print(static_path.read_text())
    store = load_embeddings(static_path, "static")
    print(f"loaded {len(store.vectors)} words at d={store.dim}; "
          f"unknown words fall back to the vocabulary mean\n")

    ctx_path = Path(tmp) / "vectors.jsonl"
    record = {
        "key": "doc0:0",
        "tokens": ["rash", "was", "mild"],
        "vectors": [[round(x, 3) for x in rng.normal(size=4)] for _ in range(3)],
    }
    ctx_path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    print("--- contextual JSONL format (one record per sentence, one vector per token):")
    print(ctx_path.read_text())
    ctx = load_embeddings(ctx_path, "contextual")
    print(f"sentence doc0:0 -> matrix {ctx.sentence_matrix('doc0:0', 3).shape}\n")

# An oversized embedding: 64 dims of which only 6 carry real variance.
latent = rng.normal(size=(500, 6))
mixing = rng.normal(size=(6, 64))
sample = latent @ mixing + 0.01 * rng.normal(size=(500, 64))

target = default_target_dim(64)
transform = fit_pca(sample, target)
print(f"--- PCA: 64 -> {target} dims (the default is the ceiling of half)")
print("top explained-variance ratios:",
      np.round(transform.explained_variance_ratio[:8], 4))
projected = apply_pca(transform, sample)
recon = reconstruct_pca(transform, projected)
err = np.abs(recon - sample).max()
print(f"projected shape {projected.shape}; max reconstruction error {err:.4f} "
      f"(small because the data is nearly rank-6)")
