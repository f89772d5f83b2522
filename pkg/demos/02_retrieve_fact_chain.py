#!/usr/bin/env python3
"""Retrieve the fact chain that shares the most information with a question.

A deterministic mock scorer stands in for the language model: relations that
belong to the gold chain become more probable once the question enters the
context (ratio +2 per hop), distractor relations become less probable
(ratio -1). Beam search follows the ratio trail; the exhaustive enumerator
confirms it found the global optimum.
"""

from kgedit import (
    Edit,
    RetrievalConfig,
    Triple,
    beam_search_retrieve,
    build_edited_kg,
    exhaustive_retrieve,
    make_mock_scorer,
    validate_chain,
)
from kgedit.retrieval import conditional_context, unconditional_context
from kgedit.scoring import MockTable

QUESTION = (
    "Which city is the capital of the country where the author of "
    "Harry Potter held citizenship?"
)

kg = build_edited_kg(
    [
        Triple("Harry Potter", "author", "J. K. Rowling"),
        Triple("Stephen King", "citizen of", "United States"),
        Triple("United States", "capital", "Washington, D.C."),
        Triple("J. K. Rowling", "citizen of", "United Kingdom"),
        Triple("United Kingdom", "capital", "London"),
        # distractor edges the search has to reject
        Triple("Harry Potter", "genre", "fantasy"),
        Triple("Stephen King", "wrote", "Misery"),
        Triple("United States", "anthem", "The Star-Spangled Banner"),
    ],
    [
        Edit("Harry Potter", "author", "Stephen King", old_tail="J. K. Rowling"),
        Edit("United States", "capital", "Boston", old_tail="Washington, D.C."),
    ],
)

gold = validate_chain(
    [
        Triple("Harry Potter", "author", "Stephen King"),
        Triple("Stephen King", "citizen of", "United States"),
        Triple("United States", "capital", "Boston"),
    ]
)

table: dict[tuple[str, str], float] = {}
for k, link in enumerate(gold):
    prefix = gold.links[:k]
    cond = conditional_context(QUESTION, prefix, link.head)
    uncond = unconditional_context(prefix, link.head)
    for relation, _tail, _ in kg.outgoing(link.head):
        if relation == link.relation:
            table[(cond, relation)], table[(uncond, relation)] = 0.8, 0.2
        else:
            table[(cond, relation)], table[(uncond, relation)] = 0.2, 0.4

scorer = make_mock_scorer(MockTable(table), vocabulary=["Boston", "London"])

print(f"Question: {QUESTION}\n")
result = beam_search_retrieve(
    kg, scorer, QUESTION, "Harry Potter", RetrievalConfig(hops=3, beam_width=2)
)
print("Beam search (width 2) retrieved:")
for link, edited in zip(result.chain, result.edited_members):
    flag = "  [edited]" if edited else ""
    print(f"  ({link.head}, {link.relation}, {link.tail}){flag}")
print(f"cumulative log ratio: {result.log_ratio:+.3f}")
print(f"objective value rho*log2(rho): {result.mi_score:.3f}\n")

oracle = exhaustive_retrieve(kg, scorer, QUESTION, "Harry Potter", 3)
same = oracle.chain.links == result.chain.links
print(f"Exhaustive enumeration agrees with the beam: {same}")
print(f"Answer entity: {result.chain.links[-1].tail}")
