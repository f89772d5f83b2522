"""Fact-chain retrieval: beam search over the edited KG, ranked by how much
more probable a relation sequence becomes once the question is in context.

Each hop scores candidate relations twice — once conditioned on the question
and once without it — and accumulates the log2 ratio of the two. Candidates
are ranked by that cumulative log ratio (a monotone proxy for the ratio
itself); the shared-information objective value rho*log2(rho) is reported on
the winning chain. An exhaustive enumerator with identical arithmetic serves
as the testing oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import OracleError, RetrievalError, ValidationError
from .kgstore import EditedKG, FactChain, Triple, normalize_label
from .scoring import Scorer, verbalize_fact


@dataclass(frozen=True)
class RetrievalConfig:
    """Search-shape parameters.

    ``hops`` is the number of expansion rounds; ``beam_width`` the number of
    candidates kept per round. ``include_question_prior`` adds log2 p(question
    | start entity) to the final score — a per-question constant, off by
    default since it cannot change the ranking.
    """

    hops: int
    beam_width: int = 2
    max_relations_per_hop: int = 64
    include_question_prior: bool = False

    def __post_init__(self):
        if self.hops < 1:
            raise ValidationError(f"hops must be >= 1, got {self.hops}")
        if self.beam_width < 1:
            raise ValidationError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.max_relations_per_hop < 1:
            raise ValidationError(
                f"max_relations_per_hop must be >= 1, got {self.max_relations_per_hop}"
            )


@dataclass(frozen=True)
class PathCandidate:
    """A path under construction with its cumulative scores."""

    links: tuple[Triple, ...] = ()
    cum_logp_cond: float = 0.0
    cum_logp_uncond: float = 0.0
    per_hop_cond: tuple[float, ...] = ()
    per_hop_uncond: tuple[float, ...] = ()
    dead_end: bool = False

    @property
    def cum_log_ratio(self) -> float:
        return self.cum_logp_cond - self.cum_logp_uncond

    @property
    def sort_key(self):
        """Orders by descending ratio, then lexicographic (relation, tail)."""
        return (
            -self.cum_log_ratio,
            tuple((t.relation, t.tail) for t in self.links),
        )


def mi_score(log_ratio: float) -> float:
    """The objective value rho * log2(rho) for rho = 2**log_ratio.

    Defined as 0 in the rho -> 0 limit.
    """
    if not math.isfinite(log_ratio):
        raise ValidationError(f"log_ratio must be finite, got {log_ratio}")
    rho = 2.0**log_ratio
    if rho == 0.0:
        return 0.0
    return rho * log_ratio


@dataclass(frozen=True)
class ScoredSubgraph:
    """A retrieved chain with its score and per-hop diagnostics."""

    chain: FactChain
    log_ratio: float
    mi_score: float
    edited_members: tuple[bool, ...]
    per_hop_cond: tuple[float, ...]
    per_hop_uncond: tuple[float, ...]
    dead_end: bool = False
    question: str = ""

    def __post_init__(self):
        if abs(self.mi_score - mi_score(self.log_ratio)) > 1e-9:
            raise ValidationError(
                f"mi_score {self.mi_score} inconsistent with log_ratio {self.log_ratio}"
            )
        if len(self.edited_members) != self.chain.hop_count:
            raise ValidationError("edited_members length differs from chain length")

    def to_record(self) -> dict:
        """Serializable form matching the retrieved-subgraph output contract."""
        return {
            "question": self.question,
            "chain": [
                {"head": t.head, "relation": t.relation, "tail": t.tail, "edited": e}
                for t, e in zip(self.chain, self.edited_members)
            ],
            "log_ratio": self.log_ratio,
            "mi_score": self.mi_score,
            "dead_end": self.dead_end,
            "per_hop": {
                "cond": list(self.per_hop_cond),
                "uncond": list(self.per_hop_uncond),
            },
        }


def conditional_context(question: str, prefix: Sequence[Triple], head: str) -> str:
    """Scoring context with the question: question, verbalized prefix, head."""
    return " ".join([question, *[verbalize_fact(t) for t in prefix], head])


def unconditional_context(prefix: Sequence[Triple], head: str) -> str:
    """Scoring context without the question: verbalized prefix, head."""
    return " ".join([*[verbalize_fact(t) for t in prefix], head])


def relation_log_ratio(
    scorer: Scorer,
    question: str,
    path_prefix: FactChain | Sequence[Triple] | None,
    head: str,
    relation: str,
) -> tuple[float, float]:
    """Log2 probability of ``relation`` with and without the question in context."""
    prefix = tuple(path_prefix) if path_prefix is not None else ()
    cond = scorer.sequence_logprob(conditional_context(question, prefix, head), relation)
    uncond = scorer.sequence_logprob(unconditional_context(prefix, head), relation)
    return cond, uncond


def _question_prior(scorer: Scorer, question: str, start: str) -> float:
    """log2 p(question | start entity); a constant offset per question."""
    return scorer.sequence_logprob(start, question)


def _expand(
    kg: EditedKG,
    scorer: Scorer,
    question: str,
    candidate: PathCandidate,
    start: str,
    cap: int,
) -> list[PathCandidate] | None:
    """All one-hop extensions of a live candidate, or None at a dead end."""
    entity = candidate.links[-1].tail if candidate.links else start
    edges = kg.outgoing(entity)
    if not edges:
        return None
    relations = list(dict.fromkeys(r for r, _, _ in edges))
    if len(relations) > cap:
        raise RetrievalError(
            f"entity {entity!r} has {len(relations)} outgoing relations, "
            f"exceeding max_relations_per_hop={cap}"
        )
    scores = {
        rel: relation_log_ratio(scorer, question, candidate.links, entity, rel)
        for rel in relations
    }
    extensions = []
    for rel, tail, _ in edges:  # each distinct tail forks a candidate
        cond, uncond = scores[rel]
        extensions.append(
            PathCandidate(
                links=candidate.links + (Triple(entity, rel, tail),),
                cum_logp_cond=candidate.cum_logp_cond + cond,
                cum_logp_uncond=candidate.cum_logp_uncond + uncond,
                per_hop_cond=candidate.per_hop_cond + (cond,),
                per_hop_uncond=candidate.per_hop_uncond + (uncond,),
            )
        )
    return extensions


def _to_subgraph(
    winner: PathCandidate,
    kg: EditedKG,
    scorer: Scorer,
    question: str,
    start: str,
    include_question_prior: bool,
) -> ScoredSubgraph:
    cond_total = winner.cum_logp_cond
    if include_question_prior:
        cond_total += _question_prior(scorer, question, start)
    ratio = cond_total - winner.cum_logp_uncond
    chain = FactChain(winner.links)
    return ScoredSubgraph(
        chain=chain,
        log_ratio=ratio,
        mi_score=mi_score(ratio),
        edited_members=tuple(kg.is_edited(t) for t in chain),
        per_hop_cond=winner.per_hop_cond,
        per_hop_uncond=winner.per_hop_uncond,
        dead_end=winner.dead_end,
        question=question,
    )


def beam_search_retrieve(
    kg: EditedKG,
    scorer: Scorer,
    question: str,
    start_entity: str,
    config: RetrievalConfig,
) -> ScoredSubgraph:
    """Retrieve the chain with maximal cumulative log ratio via beam search.

    Expands hop by hop for ``config.hops`` rounds. Every live candidate's
    outgoing relations are scored once each (multiple tails of one relation
    fork with identical scores); the pool — extensions plus frozen dead-end
    candidates — is cut to the top ``beam_width`` by cumulative log ratio,
    ties broken lexicographically on the (relation, tail) label sequence.
    Dead-end candidates keep competing with their score as-is.
    """
    if not question.strip():
        raise ValidationError("question is empty")
    start = normalize_label(start_entity)
    if not kg.outgoing(start):
        raise RetrievalError(f"start entity {start!r} has no outgoing edges")

    beam: list[PathCandidate] = [PathCandidate()]
    for _ in range(config.hops):
        live = [c for c in beam if not c.dead_end]
        if not live:
            break
        pool = [c for c in beam if c.dead_end]
        for candidate in live:
            extensions = _expand(
                kg, scorer, question, candidate, start, config.max_relations_per_hop
            )
            if extensions is None:
                pool.append(replace(candidate, dead_end=True))
            else:
                pool.extend(extensions)
        beam = sorted(pool, key=lambda c: c.sort_key)[: config.beam_width]

    winner = min(beam, key=lambda c: c.sort_key)
    return _to_subgraph(
        winner, kg, scorer, question, start, config.include_question_prior
    )


def exhaustive_retrieve(
    kg: EditedKG,
    scorer: Scorer,
    question: str,
    start_entity: str,
    hops: int,
    path_bound: int = 100_000,
    include_question_prior: bool = False,
) -> ScoredSubgraph:
    """Brute-force oracle: enumerate every path of length <= ``hops``.

    Uses the identical per-hop ratio arithmetic and tie-break as the beam,
    and selects among the same completed candidates (full length or dead
    ended). Enumeration beyond ``path_bound`` paths raises OracleError.
    """
    if not question.strip():
        raise ValidationError("question is empty")
    if hops < 1:
        raise ValidationError(f"hops must be >= 1, got {hops}")
    start = normalize_label(start_entity)
    if not kg.outgoing(start):
        raise RetrievalError(f"start entity {start!r} has no outgoing edges")

    completed: list[PathCandidate] = []
    enumerated = 0

    def visit(candidate: PathCandidate) -> None:
        nonlocal enumerated
        if len(candidate.links) == hops:
            completed.append(candidate)
            return
        extensions = _expand(kg, scorer, question, candidate, start, 10**9)
        if extensions is None:
            completed.append(replace(candidate, dead_end=True))
            return
        enumerated += len(extensions)
        if enumerated > path_bound:
            raise OracleError(
                f"path enumeration exceeded bound {path_bound} at entity "
                f"{(candidate.links[-1].tail if candidate.links else start)!r}"
            )
        for ext in extensions:
            visit(ext)

    visit(PathCandidate())
    winner = min(completed, key=lambda c: c.sort_key)
    return _to_subgraph(winner, kg, scorer, question, start, include_question_prior)
