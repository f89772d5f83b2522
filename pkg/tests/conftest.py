"""Shared fixtures: the worked 3-hop example and mock-scorer helpers."""

from __future__ import annotations

import pytest

from kgedit.kgstore import Edit, FactChain, Triple, build_edited_kg
from kgedit.retrieval import conditional_context, unconditional_context
from kgedit.scoring import MockScorer, MockTable, make_mock_scorer

QUESTION = (
    "Which city is the capital of the country where the author of "
    "Harry Potter held citizenship?"
)

BASE_TRIPLES = [
    Triple("Harry Potter", "author", "J. K. Rowling"),
    Triple("Stephen King", "citizen of", "United States"),
    Triple("United States", "capital", "Washington, D.C."),
    Triple("J. K. Rowling", "citizen of", "United Kingdom"),
    Triple("United Kingdom", "capital", "London"),
]

# extra facts a broad external KG would contribute; they branch the search
DISTRACTOR_TRIPLES = [
    Triple("Harry Potter", "genre", "fantasy"),
    Triple("Stephen King", "wrote", "Misery"),
    Triple("United States", "anthem", "The Star-Spangled Banner"),
    Triple("fantasy", "popular in", "United Kingdom"),
    Triple("Misery", "language", "English"),
]

EDITS = [
    Edit("Harry Potter", "author", "Stephen King", old_tail="J. K. Rowling"),
    Edit("United States", "capital", "Boston", old_tail="Washington, D.C."),
]

GOLD_CHAIN = FactChain(
    (
        Triple("Harry Potter", "author", "Stephen King"),
        Triple("Stephen King", "citizen of", "United States"),
        Triple("United States", "capital", "Boston"),
    )
)


@pytest.fixture
def worked_kg():
    """The example KG (bank facts + distractors) with both edits applied."""
    return build_edited_kg(BASE_TRIPLES + DISTRACTOR_TRIPLES, EDITS)


def gold_ratio_table(
    kg,
    question: str,
    gold_chain: FactChain,
    gold_probs: tuple[float, float] = (0.8, 0.2),
    distractor_probs: tuple[float, float] = (0.2, 0.4),
) -> MockTable:
    """Table granting each gold relation ratio +2 and every sibling ratio -1.

    Entries cover the contexts along the gold prefix only; everything else
    falls back to the epsilon floor, where the ratio cancels to 0.
    """
    continuations: dict[tuple[str, str], float] = {}
    for k, link in enumerate(gold_chain):
        prefix = gold_chain.links[:k]
        cond_ctx = conditional_context(question, prefix, link.head)
        uncond_ctx = unconditional_context(prefix, link.head)
        for relation, _tail, _edited in kg.outgoing(link.head):
            cond_p, uncond_p = (
                gold_probs if relation == link.relation else distractor_probs
            )
            continuations[(cond_ctx, relation)] = cond_p
            continuations[(uncond_ctx, relation)] = uncond_p
    return MockTable(continuations)


@pytest.fixture
def worked_scorer(worked_kg) -> MockScorer:
    table = gold_ratio_table(worked_kg, QUESTION, GOLD_CHAIN)
    return make_mock_scorer(table, vocabulary=["Boston", "London", "other"])


class CountingScorer:
    """Wraps a scorer and counts calls, for call-budget assertions."""

    def __init__(self, inner):
        self.inner = inner
        self.sequence_calls = 0
        self.dist_calls = 0

    def sequence_logprob(self, context: str, continuation: str) -> float:
        self.sequence_calls += 1
        return self.inner.sequence_logprob(context, continuation)

    def next_token_dist(self, context: str):
        self.dist_calls += 1
        return self.inner.next_token_dist(context)
