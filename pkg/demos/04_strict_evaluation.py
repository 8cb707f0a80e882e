"""Why strict full-phrase scoring is harsher than token-level scoring.

A phrase only counts when every one of its tokens is labeled correctly, so
partial detections earn nothing; specificity stays high because non-outcome
tokens are counted one by one.

Run: python3 demos/04_strict_evaluation.py
"""

from outseq.evaluate import (
    format_report,
    evaluation_report,
    length_accuracy,
    micro_token_f1,
    strict_metrics,
    token_metrics,
)

CASES = [
    (
        "three of four phrases fully detected, nothing spurious",
        [["B-X", "O", "B-X", "I-X", "O", "B-X", "O", "B-X"]],
        [["B-X", "O", "B-X", "I-X", "O", "B-X", "O", "O"]],
    ),
    (
        "half the tokens of one four-word phrase: zero strict credit",
        [["O", "B-X", "I-X", "I-X", "I-X", "O"]],
        [["O", "B-X", "I-X", "O", "O", "O"]],
    ),
    (
        "one of two phrases detected",
        [["B-X", "I-X", "I-X", "O", "B-X", "I-X", "O"]],
        [["B-X", "I-X", "I-X", "O", "B-X", "O", "O"]],
    ),
]

for title, gold, pred in CASES:
    strict = strict_metrics(gold, pred).to_json_dict()
    tokens = token_metrics(gold, pred)
    print(f"--- {title}")
    print(f"    strict:  P {strict['precision']:5.1f}  R {strict['recall']:5.1f}  F1 {strict['f1']:5.1f}")
    print(f"    tokens:  macro F1 {tokens.macro_f1 * 100:5.1f}  micro F1 {micro_token_f1(gold, pred) * 100:5.1f}")
    print()

print("--- accuracy by phrase length (longer phrases are harder to match exactly)")
gold = [
    ["B-X"], ["B-X"], ["B-X", "I-X"], ["B-X", "I-X"],
    ["B-X", "I-X", "I-X"], ["B-X", "I-X", "I-X", "I-X"],
]
pred = [
    ["B-X"], ["B-X"], ["B-X", "I-X"], ["B-X", "O"],
    ["B-X", "I-X", "O"], ["B-X", "I-X", "I-X", "I-X"],
]
acc = length_accuracy(gold, pred)
for row in acc.to_json_dict()["by_length"]:
    if row["total"]:
        print(f"    length {row['length']}: {row['accuracy']:.2f} of {row['total']}")

print("\n--- the combined report the `eval` command prints")
print(format_report(evaluation_report(gold, pred)))
