#!/usr/bin/env python3
"""Cut a retrieved chain down to the facts the model actually needs.

Retrieval deliberately over-fetches (two junk hops past the answer). The
mock model is confident (peaked next-token row) only when the prompt holds
exactly the right facts; any shorter or longer prefix leaves it guessing
uniformly. Pruning measures that uncertainty per prefix and keeps the
minimum.
"""

from kgedit import Triple, build_edit_prompt, default_template, prune, validate_chain
from kgedit.pruning import editing_entropy
from kgedit.scoring import MockTable, TokenDist, make_mock_scorer

QUESTION = (
    "Which city is the capital of the country where the author of "
    "Harry Potter held citizenship?"
)

retrieved = validate_chain(
    [
        Triple("Harry Potter", "author", "Stephen King"),
        Triple("Stephen King", "citizen of", "United States"),
        Triple("United States", "capital", "Boston"),
        # junk the wide retrieval dragged in
        Triple("Boston", "located in", "Massachusetts"),
        Triple("Massachusetts", "part of", "New England"),
    ]
)

template = default_template()
rows = {}
for length in range(1, retrieved.hop_count + 1):
    prompt = build_edit_prompt(template, QUESTION, retrieved.prefix(length))
    if length == 3:  # everything needed, nothing more
        rows[prompt] = TokenDist({"Boston": 0.97, "London": 0.01, "Paris": 0.01, "Rome": 0.01})
    else:
        rows[prompt] = TokenDist({"Boston": 0.25, "London": 0.25, "Paris": 0.25, "Rome": 0.25})

scorer = make_mock_scorer(MockTable(rows=rows), vocabulary=["Boston", "London", "Paris", "Rome"])

print(f"Question: {QUESTION}")
print(f"Retrieved {retrieved.hop_count} facts (two of them redundant).\n")
print("Normalized next-token entropy per prefix:")
for length in range(1, retrieved.hop_count + 1):
    value = editing_entropy(scorer, QUESTION, retrieved.prefix(length), template)
    bar = "#" * round(40 * value)
    print(f"  first {length} fact(s): {value:.4f} {bar}")

report = prune(scorer, QUESTION, retrieved, template)
print(f"\nSelected prefix length: {report.selected_length}")
print("Surviving facts:")
for link in report.selected_chain:
    print(f"  ({link.head}, {link.relation}, {link.tail})")
