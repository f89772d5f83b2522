#!/usr/bin/env python3
"""End-to-end evaluation over a small counterfactual dataset.

Two 2-hop cases share one edit bank. Every case retrieves K+2 facts (so two
junk facts always ride along), prunes them away, answers through a mock
generator, and is scored on edited accuracy plus partial/exact retrieval
match. Run twice to see that reports are deterministic.
"""

import json
import tempfile
from pathlib import Path

from kgedit import Triple, build_edit_prompt, default_template, run_eval
from kgedit.editing import MockGenerator
from kgedit.kgstore import FactChain
from kgedit.retrieval import conditional_context, unconditional_context
from kgedit.scoring import MockTable, TokenDist, make_mock_scorer

workdir = Path(tempfile.mkdtemp(prefix="kgedit-demo-"))
template = default_template()

continuations, rows, responses = {}, {}, {}
triples, dataset = [], []

for name, city, land, lake in [("Aldora", "Brightport", "Veloria", "Mirrormere"),
                               ("Nerith", "Stonegate", "Caldua", "Glasslake")]:
    # pre-edit: book -> old author -> their home; edit swaps the author
    question = f"Which place is home to the author of {name}?"
    pre = [Triple(name, "author", f"old-{name}"), Triple(f"old-{name}", "home", city)]
    gold = FactChain((Triple(name, "author", f"new-{name}"),
                      Triple(f"new-{name}", "home", land)))
    junk = [Triple(land, "landmark", lake), Triple(lake, "type", "lake")]
    retrieved = FactChain(gold.links + tuple(junk))
    triples += pre + [Triple(f"new-{name}", "home", land)] + junk

    for k, link in enumerate(gold):
        prefix = gold.links[:k]
        continuations[(conditional_context(question, prefix, link.head), link.relation)] = 0.8
        continuations[(unconditional_context(prefix, link.head), link.relation)] = 0.2
    for length in range(1, retrieved.hop_count + 1):
        prompt = build_edit_prompt(template, question, retrieved.prefix(length))
        peaked = {land: 0.97, city: 0.01, lake: 0.01, "elsewhere": 0.01}
        uniform = {land: 0.25, city: 0.25, lake: 0.25, "elsewhere": 0.25}
        rows[prompt] = TokenDist(peaked if length == 2 else uniform)
    responses[build_edit_prompt(template, question, gold)] = land

    dataset.append({
        "case_id": f"book-{name}", "question": question, "question_entity": name,
        "hops": 2,
        "gold_pre_edit_chain": [vars(t) for t in pre],
        "gold_edited_chain": [vars(t) for t in gold],
        "edits": [{"head": name, "relation": "author",
                   "old_tail": f"old-{name}", "new_tail": f"new-{name}"}],
        "original_answer": city, "edited_answer": land, "answer_aliases": [],
    })

triples_path = workdir / "triples.jsonl"
triples_path.write_text("\n".join(json.dumps(vars(t)) for t in triples) + "\n")
dataset_path = workdir / "dataset.jsonl"
dataset_path.write_text("\n".join(json.dumps(rec) for rec in dataset) + "\n")

scorer = make_mock_scorer(MockTable(continuations, rows), vocabulary=["elsewhere"])
backend = MockGenerator(responses)

for do_prune in (True, False):
    report = run_eval(triples_path, dataset_path, scorer, backend, do_prune=do_prune)
    overall = report.aggregates["overall"]
    label = "with pruning" if do_prune else "without pruning"
    print(f"{label:>16}: edited accuracy {overall['edited_accuracy']:5.1f}%  "
          f"PM {overall['pm']:5.1f}%  EM {overall['em']:5.1f}%")

print(f"\nFixture files kept under {workdir} for inspection.")
print("Without pruning the two junk facts spoil exact match and the answer;")
print("pruning restores both.")
