"""Acceptance suite: oracle-equivalence and property criteria, one test per
criterion, each printing a PASS/FAIL line. Runs entirely offline on mock
backends except the optional, non-gating endpoint check at the end.
"""

from __future__ import annotations

import os
import random
import time

import numpy as np
import pytest

from kgedit.cli import run_command
from kgedit.editing import build_edit_prompt, default_template
from kgedit.errors import KGEditError
from kgedit.evaluation import retrieval_metrics, run_eval
from kgedit.infotheory import DiscreteJoint, random_markov_joint, verify_dpi
from kgedit.kgstore import FactChain, Triple
from kgedit.pruning import normalized_entropy, prune
from kgedit.retrieval import RetrievalConfig, beam_search_retrieve, exhaustive_retrieve
from kgedit.scoring import MockTable, TokenDist, extend_context, make_mock_scorer

from e2e import PEAKED, UNIFORM4, make_e2e_fixture
from synth import make_planted_instance

_em_pm_records: list[tuple[bool, bool]] = []


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_1_beam_vs_exhaustive_oracle():
    rng = random.Random(20240901)
    instances = 200
    mismatches = 0
    em_hits = {1: 0, 2: 0}
    started = time.perf_counter()
    for _ in range(instances):
        inst = make_planted_instance(
            rng, n_entities=25, max_out_degree=4, gold_len=rng.randint(2, 4)
        )
        hops = inst.gold_chain.hop_count
        wide = beam_search_retrieve(
            inst.kg, inst.scorer, inst.question, inst.start,
            RetrievalConfig(hops=hops, beam_width=inst.max_out_degree),
        )
        oracle = exhaustive_retrieve(
            inst.kg, inst.scorer, inst.question, inst.start, hops
        )
        if wide.chain.links != oracle.chain.links:
            mismatches += 1
        for width in (1, 2):
            result = beam_search_retrieve(
                inst.kg, inst.scorer, inst.question, inst.start,
                RetrievalConfig(hops=hops, beam_width=width),
            )
            pm, em = retrieval_metrics(result.chain, inst.gold_chain)
            _em_pm_records.append((em, pm))
            if em:
                em_hits[width] += 1
    elapsed = time.perf_counter() - started
    em1 = 100.0 * em_hits[1] / instances
    em2 = 100.0 * em_hits[2] / instances
    ok = mismatches == 0 and em2 >= em1 and elapsed < 30.0
    _report(
        1,
        ok,
        f"{instances} instances, beam==exhaustive on {instances - mismatches}, "
        f"EM width2 {em2:.1f}% >= width1 {em1:.1f}%, {elapsed:.1f}s",
    )


def test_criterion_2_probability_decomposition_identity():
    rng = random.Random(77)
    worst = 0.0
    paths = 100
    for _ in range(paths):
        hop_count = rng.randint(2, 5)
        question = f"q{rng.randrange(1000)}?"
        head = f"H{rng.randrange(100)}"
        context0 = f"{question} {head}"
        hops = [
            " ".join(f"rel{rng.randrange(60)}" for _ in range(rng.randint(1, 3)))
            for _ in range(hop_count)
        ]
        entries: dict[tuple[str, str], float] = {}
        ctx = context0
        for hop in hops:
            for token in hop.split():
                entries[(ctx, token)] = rng.uniform(0.05, 1.0)
                ctx = extend_context(ctx, token)
        scorer = make_mock_scorer(MockTable(entries), ["x"])
        joint = scorer.sequence_logprob(context0, " ".join(hops))
        stepwise = 0.0
        ctx = context0
        for hop in hops:
            stepwise += scorer.sequence_logprob(ctx, hop)
            ctx = extend_context(ctx, hop)
        worst = max(worst, abs(joint - stepwise))
    ok = worst <= 1e-9
    _report(2, ok, f"{paths} random paths, max |joint - sum of hops| = {worst:.2e}")


def test_criterion_3_data_processing_inequality():
    rng = np.random.default_rng(12345)
    trials = 1000
    failures = 0
    for _ in range(trials):
        _, _, holds = verify_dpi(random_markov_joint(rng, max_alphabet=5))
        if not holds:
            failures += 1

    # analytic edge case: q is a deterministic copy of theta
    p_g = rng.dirichlet(np.ones(4))
    p_t_given_g = rng.dirichlet(np.ones(5), size=4)
    copy_joint = DiscreteJoint.from_chain_components(p_g, p_t_given_g, np.eye(5))
    i_gt, i_gq, copy_holds = verify_dpi(copy_joint)
    copy_ok = copy_holds and abs(i_gt - i_gq) <= 1e-9

    # analytic edge case: q independent of theta
    fixed_q = rng.dirichlet(np.ones(3))
    indep_joint = DiscreteJoint.from_chain_components(
        p_g, p_t_given_g, np.tile(fixed_q, (5, 1))
    )
    _, i_gq_indep, indep_holds = verify_dpi(indep_joint)
    indep_ok = indep_holds and abs(i_gq_indep) <= 1e-9

    ok = failures == 0 and copy_ok and indep_ok
    _report(
        3,
        ok,
        f"{trials - failures}/{trials} random Markov joints hold; "
        f"copy case equality gap {abs(i_gt - i_gq):.2e}; "
        f"independent case I(G;Q) = {i_gq_indep:.2e}",
    )


def _pruning_fixture(rng: random.Random, length: int, gold: int):
    chain = FactChain(
        tuple(Triple(f"p{i}", f"rel{i}", f"p{i+1}") for i in range(length))
    )
    question = f"which entity ends the chain from p0 ({rng.randrange(10**6)})?"
    template = default_template()
    rows = {}
    for k in range(1, length + 1):
        prompt = build_edit_prompt(template, question, chain.prefix(k))
        rows[prompt] = TokenDist(PEAKED if k == gold else UNIFORM4)
    scorer = make_mock_scorer(MockTable(rows=rows), vocabulary=list(UNIFORM4))
    return scorer, question, chain, template


def test_criterion_4_pruning_recovery():
    rng = random.Random(9090)
    fixtures = 100
    recovered = 0
    for _ in range(fixtures):
        length = rng.randint(2, 6)
        gold = rng.randint(1, length)
        scorer, question, chain, template = _pruning_fixture(rng, length, gold)
        if prune(scorer, question, chain, template).selected_length == gold:
            recovered += 1

    tie_ok = True
    for _ in range(20):
        length = rng.randint(2, 6)
        scorer, question, chain, template = _pruning_fixture(rng, length, gold=0)
        if prune(scorer, question, chain, template).selected_length != 1:
            tie_ok = False
    ok = recovered == fixtures and tie_ok
    _report(
        4,
        ok,
        f"gold prefix recovered in {recovered}/{fixtures} fixtures; "
        f"uniform rows tie to length 1: {tie_ok}",
    )


def test_criterion_5_entropy_properties():
    uniform_ok = normalized_entropy(TokenDist({t: 0.25 for t in "abcd"})) == 1.0
    uniform3_ok = normalized_entropy(TokenDist({t: 1 / 3 for t in "abc"})) == 1.0
    point_ok = normalized_entropy(TokenDist({"only": 1.0})) == 0.0

    rng = np.random.default_rng(555)
    in_range = 0
    trials = 1000
    for _ in range(trials):
        n = int(rng.integers(1, 9))
        probs = rng.dirichlet(np.ones(n))
        dist = TokenDist({f"t{i}": float(p) for i, p in enumerate(probs)})
        if 0.0 <= normalized_entropy(dist) <= 1.0:
            in_range += 1

    hand = normalized_entropy(TokenDist({"a": 0.5, "b": 0.25, "c": 0.25}))
    hand_ok = abs(hand - 0.946) <= 1e-3
    ok = uniform_ok and uniform3_ok and point_ok and in_range == trials and hand_ok
    _report(
        5,
        ok,
        f"uniform=1.0: {uniform_ok and uniform3_ok}, point=0.0: {point_ok}, "
        f"in [0,1]: {in_range}/{trials}, {{0.5,0.25,0.25}} -> {hand:.6f}",
    )


def test_criterion_6_metric_correctness(tmp_path):
    fixture = make_e2e_fixture(tmp_path)
    pruned = run_eval(
        fixture.triples_path, fixture.dataset_path, fixture.scorer, fixture.backend,
        do_prune=True,
    )
    unpruned = run_eval(
        fixture.triples_path, fixture.dataset_path, fixture.scorer, fixture.backend,
        do_prune=False,
    )
    for report in (pruned, unpruned):
        for record in report.cases:
            _em_pm_records.append((record["em"], record["pm"]))
    implication_ok = all(pm or not em for em, pm in _em_pm_records)

    pruned_overall = pruned.aggregates["overall"]
    unpruned_overall = unpruned.aggregates["overall"]
    pruned_ok = (
        pruned_overall["edited_accuracy"] == 100.0
        and pruned_overall["em"] == 100.0
    )
    unpruned_ok = (
        unpruned_overall["pm"] == 100.0 and unpruned_overall["em"] < 100.0
    )
    ok = implication_ok and pruned_ok and unpruned_ok
    _report(
        6,
        ok,
        f"EM=>PM on {len(_em_pm_records)} records: {implication_ok}; "
        f"pruned accuracy {pruned_overall['edited_accuracy']}% / EM "
        f"{pruned_overall['em']}%; unpruned PM {unpruned_overall['pm']}% / "
        f"EM {unpruned_overall['em']}%",
    )


def test_criterion_7_eval_determinism(tmp_path):
    fixture = make_e2e_fixture(tmp_path)
    dumps = []
    for i in range(2):
        report_path = tmp_path / f"report{i}.json"
        code = run_command(
            [
                "eval",
                "--triples", str(fixture.triples_path),
                "--dataset", str(fixture.dataset_path),
                "--scorer", f"mock:{fixture.table_path}",
                "--backend", f"mock:{fixture.responses_path}",
                "--report", str(report_path),
            ]
        )
        assert code == 0
        lines = [
            line
            for line in report_path.read_text(encoding="utf-8").splitlines()
            if '"generated_at"' not in line
        ]
        dumps.append("\n".join(lines))
    ok = dumps[0] == dumps[1]
    _report(7, ok, "two eval runs byte-identical apart from the timestamp")


def test_criterion_8_optional_endpoint_integration(tmp_path):
    endpoint = os.environ.get("RAE_EVAL_ENDPOINT")
    model = os.environ.get("RAE_EVAL_MODEL")
    if not endpoint or not model:
        pytest.skip("set RAE_EVAL_ENDPOINT and RAE_EVAL_MODEL to run")
    from kgedit.editing import RemoteGenerator, answer_with_edit
    from kgedit.kgstore import build_edited_kg
    from kgedit.scoring import RemoteScorer

    from conftest import BASE_TRIPLES, DISTRACTOR_TRIPLES, EDITS, GOLD_CHAIN, QUESTION

    kg = build_edited_kg(BASE_TRIPLES + DISTRACTOR_TRIPLES, EDITS)
    scorer = RemoteScorer(endpoint, model, timeout=60)
    backend = RemoteGenerator(endpoint, model, timeout=60)
    try:
        subgraph = beam_search_retrieve(
            kg, scorer, QUESTION, "Harry Potter", RetrievalConfig(hops=3, beam_width=2)
        )
        outcome = answer_with_edit(
            backend, default_template(), QUESTION, GOLD_CHAIN, "Boston"
        )
    except KGEditError as exc:
        _report(8, True, f"endpoint unavailable mid-run, non-gating: {exc}")
        return
    # model-dependent: report the result either way, never gate acceptance
    _report(
        8,
        True,
        f"retrieved {subgraph.chain.hop_count} hops; edited answer matched "
        f"'Boston': {outcome.matched} (generated: {outcome.generated[:60]!r})",
    )
