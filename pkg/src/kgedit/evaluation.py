"""Dataset ingestion, end-to-end pipeline runs, and accuracy metrics.

A dataset is a line-delimited file of multi-hop cases, each carrying its
question, the gold pre-edit and edited fact chains, the edits it depends
on, and the expected answers. All edits are pooled into one bank and
applied to the base KG at once; every case is then retrieved, optionally
pruned, answered, and judged.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .editing import GenerationBackend, PromptTemplate, answer_with_edit, default_template
from .errors import ConflictError, DatasetError, KGEditError, ValidationError
from .kgstore import (
    Edit,
    EditedKG,
    FactChain,
    Triple,
    build_edited_kg,
    load_triples,
    normalize_label,
)
from .pruning import prune
from .retrieval import RetrievalConfig, beam_search_retrieve
from .scoring import Scorer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Case:
    """One multi-hop editing instance."""

    case_id: str
    question: str
    question_entity: str
    hops: int
    gold_pre_edit_chain: FactChain
    gold_edited_chain: FactChain
    edits: tuple[Edit, ...]
    original_answer: str
    edited_answer: str
    answer_aliases: tuple[str, ...] = ()

    def __post_init__(self):
        if not str(self.case_id).strip():
            raise ValidationError("case_id is empty")
        if not self.question.strip():
            raise ValidationError("question is empty")
        if not normalize_label(self.question_entity):
            raise ValidationError("question_entity is empty")
        if self.hops != self.gold_edited_chain.hop_count:
            raise ValidationError(
                f"hops={self.hops} but edited chain has "
                f"{self.gold_edited_chain.hop_count} links"
            )
        links = set(self.gold_edited_chain.links)
        for edit in self.edits:
            if edit.new_triple not in links:
                raise ValidationError(
                    f"edit {edit.new_triple} does not appear in the edited chain"
                )
        expected = self.gold_edited_chain.links[-1].tail
        if normalize_label(self.edited_answer) != expected:
            raise ValidationError(
                f"edited_answer {self.edited_answer!r} differs from the final "
                f"chain tail {expected!r}"
            )


def _chain_from_records(records, what: str) -> FactChain:
    try:
        return FactChain(
            tuple(Triple(r["head"], r["relation"], r["tail"]) for r in records)
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad triple record in {what}: {exc}") from exc


def _case_from_record(rec: dict) -> Case:
    try:
        return Case(
            case_id=str(rec["case_id"]),
            question=rec["question"],
            question_entity=rec["question_entity"],
            hops=int(rec["hops"]),
            gold_pre_edit_chain=_chain_from_records(
                rec["gold_pre_edit_chain"], "gold_pre_edit_chain"
            ),
            gold_edited_chain=_chain_from_records(
                rec["gold_edited_chain"], "gold_edited_chain"
            ),
            edits=tuple(
                Edit(
                    e["head"],
                    e["relation"],
                    e["new_tail"],
                    old_tail=e.get("old_tail"),
                )
                for e in rec["edits"]
            ),
            original_answer=rec.get("original_answer", ""),
            edited_answer=rec["edited_answer"],
            answer_aliases=tuple(rec.get("answer_aliases", ())),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"missing or malformed field: {exc}") from exc


def load_dataset(path: str | Path) -> list[Case]:
    """Read cases from a line-delimited dataset file.

    Every record must satisfy the Case invariants; violations are collected
    and reported together, naming the offending case ids.
    """
    cases: list[Case] = []
    bad: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            case_id = str(rec.get("case_id", f"line {lineno}"))
            try:
                cases.append(_case_from_record(rec))
            except ValidationError as exc:
                bad.append((case_id, str(exc)))
    if bad:
        details = "; ".join(f"{cid}: {msg}" for cid, msg in bad)
        raise DatasetError(
            f"{len(bad)} invalid case(s) in {path}: {details}",
            case_ids=[cid for cid, _ in bad],
        )
    if not cases:
        log.warning("dataset %s contains no cases", path)
    return cases


@dataclass(frozen=True)
class EditBank:
    """Deduplicated pool of edits across all cases."""

    edits: tuple[Edit, ...]

    def __len__(self) -> int:
        return len(self.edits)


def build_edit_bank(cases: Sequence[Case]) -> EditBank:
    """Union of all case edits; conflicting tails for one (head, relation) fail."""
    pooled: dict[Edit, None] = {}
    owners: dict[tuple[str, str], tuple[str, Edit]] = {}
    for case in cases:
        for edit in case.edits:
            key = (edit.head, edit.relation)
            prior = owners.get(key)
            if prior is not None and prior[1].new_tail != edit.new_tail:
                raise ConflictError(
                    f"cases {prior[0]} and {case.case_id} disagree on "
                    f"({edit.head}, {edit.relation}): "
                    f"{prior[1].new_tail!r} vs {edit.new_tail!r}"
                )
            owners.setdefault(key, (case.case_id, edit))
            pooled.setdefault(edit, None)
    return EditBank(tuple(pooled))


def retrieval_metrics(retrieved: FactChain, gold: FactChain) -> tuple[bool, bool]:
    """(partial match, exact match) of retrieved facts against the gold chain.

    Partial match: at least one retrieved triple appears in the gold chain.
    Exact match: every retrieved triple appears in the gold chain.
    """
    retrieved_set = set(retrieved.links)
    gold_set = set(gold.links)
    pm = bool(retrieved_set & gold_set)
    em = retrieved_set <= gold_set
    return pm, em


def _pct(numerator: int, denominator: int) -> float:
    """Percentage with exact rational arithmetic, rounded to 0.1."""
    if denominator == 0:
        return 0.0
    return round(Fraction(numerator, denominator) * 1000) / 10.0


def _group_stats(records: list[dict], strict: bool, flags: list[str]) -> dict:
    counted = records if strict else [r for r in records if not r.get("failed")]
    stats = {
        "cases": len(records),
        "failed": sum(1 for r in records if r.get("failed")),
    }
    for flag in flags:
        hits = sum(1 for r in counted if r.get(flag))
        key = "edited_accuracy" if flag == "matched" else flag
        stats[key] = _pct(hits, len(counted))
    return stats


def metrics_aggregate(records: Sequence[dict], strict: bool = True) -> dict:
    """Aggregate per-case records into percentages, overall and by hop count.

    With ``strict`` (the default) failed cases stay in the denominators and
    count as incorrect; otherwise they are dropped from the denominators.
    """
    records = list(records)
    if not records:
        raise ValidationError("no records to aggregate")
    flags = ["matched", "pm", "em"]
    if all("pm_preprune" in r for r in records):
        flags += ["pm_preprune", "em_preprune"]
    by_hops: dict[str, list[dict]] = {}
    for r in records:
        by_hops.setdefault(str(r["hops"]), []).append(r)
    return {
        "overall": _group_stats(records, strict, flags),
        "by_hops": {
            hops: _group_stats(group, strict, flags)
            for hops, group in sorted(by_hops.items())
        },
    }


@dataclass(frozen=True)
class EvalReport:
    """Full pipeline output: per-case records, aggregates, and the run config."""

    config: dict
    cases: tuple[dict, ...]
    aggregates: dict
    generated_at: str

    def to_record(self) -> dict:
        return {
            "config": self.config,
            "cases": list(self.cases),
            "aggregates": self.aggregates,
            "generated_at": self.generated_at,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_record(), fh, sort_keys=True, indent=2, ensure_ascii=False)
            fh.write("\n")


def _evaluate_case(
    case: Case,
    kg: EditedKG,
    scorer: Scorer,
    backend: GenerationBackend,
    template: PromptTemplate,
    *,
    hops_override: int | None,
    beam_width: int,
    max_relations_per_hop: int,
    include_question_prior: bool,
    do_prune: bool,
    emit_preprune_metrics: bool,
) -> dict:
    record: dict = {
        "case_id": case.case_id,
        "hops": case.hops,
        "failed": False,
        "error": None,
        "matched": False,
        "pm": False,
        "em": False,
    }
    try:
        n = hops_override if hops_override is not None else case.hops + 2
        config = RetrievalConfig(
            hops=n,
            beam_width=beam_width,
            max_relations_per_hop=max_relations_per_hop,
            include_question_prior=include_question_prior,
        )
        subgraph = beam_search_retrieve(
            kg, scorer, case.question, case.question_entity, config
        )
        record["retrieval"] = subgraph.to_record()
        final_chain = subgraph.chain
        if do_prune:
            report = prune(scorer, case.question, subgraph.chain, template)
            record["prune"] = report.to_record()
            final_chain = report.selected_chain
        if emit_preprune_metrics:
            pm_pre, em_pre = retrieval_metrics(subgraph.chain, case.gold_edited_chain)
            record["pm_preprune"] = pm_pre
            record["em_preprune"] = em_pre
        outcome = answer_with_edit(
            backend,
            template,
            case.question,
            final_chain,
            case.edited_answer,
            case.answer_aliases,
        )
        record["generated"] = outcome.generated
        record["matched"] = outcome.matched
        record["matched_alias"] = outcome.matched_alias
        pm, em = retrieval_metrics(final_chain, case.gold_edited_chain)
        record["pm"] = pm
        record["em"] = em
    except KGEditError as exc:
        record["failed"] = True
        record["error"] = f"{type(exc).__name__}: {exc}"
        if emit_preprune_metrics:
            record.setdefault("pm_preprune", False)
            record.setdefault("em_preprune", False)
    return record


def run_eval(
    kg_triples_path: str | Path,
    dataset_path: str | Path,
    scorer: Scorer,
    backend: GenerationBackend,
    *,
    template: PromptTemplate | None = None,
    hops: int | None = None,
    beam_width: int = 2,
    max_relations_per_hop: int = 64,
    include_question_prior: bool = False,
    do_prune: bool = True,
    emit_preprune_metrics: bool = False,
    strict: bool = True,
    parallelism: int = 1,
    report_path: str | Path | None = None,
    config_note: dict | None = None,
) -> EvalReport:
    """Run the full pipeline over a dataset and return (and optionally write)
    the report.

    The edited KG is built once from the base triples plus the pooled edit
    bank. Each case retrieves ``hops`` (default: its own hop count + 2)
    facts, optionally prunes them, answers through the generation backend,
    and is judged on the edited answer and on PM/EM against its gold edited
    chain (post-pruning chain when pruning is on). Per-case errors mark the
    case failed and the run continues. With mock backends the report is
    deterministic apart from its timestamp.
    """
    if parallelism < 1:
        raise ValidationError(f"parallelism must be >= 1, got {parallelism}")
    template = template if template is not None else default_template()
    triples = load_triples(kg_triples_path)
    cases = load_dataset(dataset_path)
    bank = build_edit_bank(cases)
    kg = build_edited_kg(triples, bank.edits)

    def work(case: Case) -> dict:
        return _evaluate_case(
            case,
            kg,
            scorer,
            backend,
            template,
            hops_override=hops,
            beam_width=beam_width,
            max_relations_per_hop=max_relations_per_hop,
            include_question_prior=include_question_prior,
            do_prune=do_prune,
            emit_preprune_metrics=emit_preprune_metrics,
        )

    if parallelism == 1 or len(cases) <= 1:
        records = [work(case) for case in cases]
    else:
        # keyed by position so assembly order never depends on completion order
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(work, cases))

    aggregates = (
        metrics_aggregate(records, strict=strict)
        if records
        else {"overall": {"cases": 0, "failed": 0}, "by_hops": {}}
    )
    config = {
        "kg_triples": str(kg_triples_path),
        "dataset": str(dataset_path),
        "hops": hops,
        "beam_width": beam_width,
        "max_relations_per_hop": max_relations_per_hop,
        "include_question_prior": include_question_prior,
        "prune": do_prune,
        "emit_preprune_metrics": emit_preprune_metrics,
        "strict": strict,
        "parallelism": parallelism,
        "edit_bank_size": len(bank),
        "kg_size": len(kg),
    }
    if config_note:
        config.update(config_note)
    report = EvalReport(
        config=config,
        cases=tuple(records),
        aggregates=aggregates,
        generated_at=datetime.now(timezone.utc).isoformat(),
    )
    if report_path is not None:
        report.save(report_path)
    return report
