#!/usr/bin/env python3
"""Steer a frozen model with facts in its prompt and judge the answer.

The editing prompt places demonstrations, the retrieved facts, and the
question ahead of the model. A mock generator plays the model: it knows the
updated answer only for the exact prompt carrying the right facts. The
judge accepts the target (or an alias) within the first ten generated
tokens, case-insensitively.
"""

from kgedit import (
    MockGenerator,
    Triple,
    answer_with_edit,
    build_edit_prompt,
    check_edited_answer,
    default_template,
    validate_chain,
)

QUESTION = (
    "Which city is the capital of the country where the author of "
    "Harry Potter held citizenship?"
)

facts = validate_chain(
    [
        Triple("Harry Potter", "author", "Stephen King"),
        Triple("Stephen King", "citizen of", "United States"),
        Triple("United States", "capital", "Boston"),
    ]
)

template = default_template()
prompt = build_edit_prompt(template, QUESTION, facts)
print("=== editing prompt ===")
print(prompt)
print("======================\n")

backend = MockGenerator({prompt: "Boston, of course"}, max_new_tokens=10)
outcome = answer_with_edit(backend, template, QUESTION, facts, target="Boston")
print(f"generated: {outcome.generated!r}")
print(f"matched the edited answer: {outcome.matched} (via {outcome.matched_alias!r})\n")

print("The judge tolerates case and aliases, but only inside the token window:")
print(" ", check_edited_answer("the answer is boston", "Boston"), "<- case-folded hit")
print(" ", check_edited_answer("USA.", "United States", aliases=["USA"]), "<- alias hit")
late = " ".join(["hmm"] * 10 + ["Boston"])
print(" ", check_edited_answer(late, "Boston"), "<- answer arrived after ten tokens")
