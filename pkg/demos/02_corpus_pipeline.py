"""From annotated abstracts to a BIO column corpus with splits and statistics.

Run: python3 demos/02_corpus_pipeline.py
"""

import tempfile
from pathlib import Path

from outseq import (
    abstract_to_sentences,
    compute_stats,
    parse_abstract,
    read_column_file,
    spans_from_bio,
    split_corpus,
    write_column_file,
)

ABSTRACTS = [
    "Patients reported <P 38>rash</> after dosing. Follow-up visits were weekly.",
    "We measured <P 0>(E2)systolic and <P 0>diastolic blood pressure</> at baseline. "
    "Mean <P 1>survival</> improved in the treated arm.",
    "No adverse events occurred. The primary endpoint was <P 30>global quality of life</>.",
]

sentences = []
for k, raw in enumerate(ABSTRACTS):
    abstract = parse_abstract(raw, doc_id=f"doc{k}")
    sentences.extend(abstract_to_sentences(abstract))

print(f"{len(ABSTRACTS)} abstracts -> {len(sentences)} sentences\n")
for sent in sentences:
    pairs = "  ".join(f"{tok}/{lab}" for tok, lab in zip(sent.tokens, sent.labels))
    print(f"[{sent.key}] {pairs}")
    phrases = spans_from_bio(sent.tokens, sent.labels)
    if phrases:
        print(f"   gold phrases: {phrases}")
print()

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "corpus.col"
    write_column_file(sentences, path)
    print(f"--- column format written to {path.name} (token<TAB>pos<TAB>label):")
    print("\n".join(path.read_text().splitlines()[:8]))
    print("...\n")
    back = read_column_file(path)
    assert len(back) == len(sentences)

split = split_corpus(sentences, seed=13)
print("--- a 75/15/10 split of the sentences (seed 13):")
print({name: len(part) for name, part in split.parts().items()})
print()
print(compute_stats(split).format_table())
