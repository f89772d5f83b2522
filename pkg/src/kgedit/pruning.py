"""Redundant-fact pruning driven by next-token uncertainty.

A retrieved chain is cut down to the leading prefix under which the model
answers with the least uncertainty: every prefix is rendered through the
editing template, the next-token distribution is measured, and the prefix
with minimal normalized Shannon entropy wins (shortest on ties).
"""

from __future__ import annotations

from dataclasses import dataclass

from .editing import PromptTemplate, build_edit_prompt, default_template
from .errors import ValidationError
from .infotheory import shannon_entropy
from .kgstore import FactChain
from .scoring import Scorer, TokenDist


@dataclass(frozen=True)
class PrefixSet:
    """The leading sub-chains of a retrieved chain, lengths 1..hop_count."""

    prefixes: tuple[FactChain, ...]

    def __post_init__(self):
        if not self.prefixes:
            raise ValidationError("prefix set is empty")
        for i, prefix in enumerate(self.prefixes, start=1):
            if prefix.hop_count != i:
                raise ValidationError(
                    f"prefix {i} has {prefix.hop_count} links, expected {i}"
                )
            if prefix.links != self.prefixes[-1].links[:i]:
                raise ValidationError(f"prefix {i} is not a prefix of the chain")


def prefix_sets(chain: FactChain) -> PrefixSet:
    """All leading prefixes of ``chain``, shortest first."""
    return PrefixSet(tuple(chain.prefix(i) for i in range(1, chain.hop_count + 1)))


def normalized_entropy(dist: TokenDist) -> float:
    """Shannon entropy of a next-token distribution, scaled to [0, 1].

    The normalizer is the entropy of the uniform distribution over the same
    outcome count (= log2 of the count), with a positive tail mass counting
    as one outcome. Single-outcome distributions have zero entropy by
    convention.
    """
    count = dist.outcome_count
    if count <= 1:
        return 0.0
    h = shannon_entropy(dist)
    h_max = shannon_entropy([1.0 / count] * count)
    return min(1.0, max(0.0, h / h_max))


def editing_entropy(
    scorer: Scorer,
    question: str,
    facts: FactChain,
    template: PromptTemplate | None = None,
) -> float:
    """Normalized next-token entropy under the editing prompt for ``facts``."""
    if facts is None or len(facts) == 0:
        raise ValidationError("facts chain is empty")
    template = template if template is not None else default_template()
    prompt = build_edit_prompt(template, question, facts)
    return normalized_entropy(scorer.next_token_dist(prompt))


@dataclass(frozen=True)
class PruneReport:
    """Per-prefix entropies and the selected minimal-uncertainty prefix."""

    entropies: tuple[tuple[int, float], ...]
    selected_length: int
    selected_chain: FactChain

    def to_record(self) -> dict:
        return {
            "entropies": [[length, value] for length, value in self.entropies],
            "selected_length": self.selected_length,
            "selected_chain": [
                {"head": t.head, "relation": t.relation, "tail": t.tail}
                for t in self.selected_chain
            ],
        }


def prune(
    scorer: Scorer,
    question: str,
    chain: FactChain,
    template: PromptTemplate | None = None,
) -> PruneReport:
    """Keep the prefix with minimal editing uncertainty (shortest on ties).

    Issues exactly ``chain.hop_count`` next-token-distribution calls, one
    per prefix.
    """
    template = template if template is not None else default_template()
    measurements = []
    for prefix in prefix_sets(chain).prefixes:
        value = editing_entropy(scorer, question, prefix, template)
        measurements.append((prefix.hop_count, value))
    # min() keeps the first of equal values, which is the shortest prefix
    selected_length = min(measurements, key=lambda m: m[1])[0]
    return PruneReport(
        entropies=tuple(measurements),
        selected_length=selected_length,
        selected_chain=chain.prefix(selected_length),
    )
