"""Walk through the inline annotation notation and what the parser makes of it.

Run: python3 demos/01_parse_annotations.py
"""

from outseq import parse_abstract

EXAMPLES = [
    (
        "simple annotation, one domain",
        "Patients reported <P 38>rash</> after dosing.",
    ),
    (
        "one span carrying two domains",
        "We assessed <P 25, 28>quality of sleep</> at week 12.",
    ),
    (
        "contiguous spans sharing their first two words (S2)",
        "The objective was to evaluate <P 0>(S2)right heart size and <P 0>function</>.",
    ),
    (
        "contiguous spans sharing their last two words (E2)",
        "We measured <P 0>(E2)systolic and <P 0>diastolic blood pressure</> daily.",
    ),
]

for title, raw in EXAMPLES:
    print(f"--- {title}")
    print(f"raw:   {raw}")
    abstract = parse_abstract(raw, doc_id="demo")
    print(f"plain: {abstract.plain_text}")
    for span in abstract.spans:
        domains = ", ".join(d.symbol for d in span.domains)
        ranges = ", ".join(f"[{a},{b})" for a, b in span.char_offsets)
        print(f"  span {span.text!r}  domains: {domains}  core area: {span.otype}  at {ranges}")
    print()

print("--- the same abstract as the JSON the `parse` command writes")
print(parse_abstract(EXAMPLES[2][1], doc_id="demo").to_json())
