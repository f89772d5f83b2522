"""Prompt assembly, generation backends, and edited-answer judging."""

from __future__ import annotations

import random

import pytest

from kgedit.editing import (
    Exemplar,
    MockGenerator,
    PromptTemplate,
    answer_with_edit,
    build_edit_prompt,
    check_edited_answer,
    default_template,
    load_mock_generator,
)
from kgedit.errors import ValidationError
from kgedit.kgstore import FactChain, Triple
from kgedit.scoring import verbalize_fact

from conftest import GOLD_CHAIN, QUESTION


def test_prompt_contains_facts_and_question():
    prompt = build_edit_prompt(default_template(), QUESTION, GOLD_CHAIN)
    assert "Given fact:" in prompt
    for link in GOLD_CHAIN:
        assert verbalize_fact(link) in prompt
    assert QUESTION in prompt


def test_prompt_is_deterministic():
    template = default_template()
    assert build_edit_prompt(template, QUESTION, GOLD_CHAIN) == build_edit_prompt(
        template, QUESTION, GOLD_CHAIN
    )


def test_prompt_rejects_empty_facts():
    with pytest.raises(ValidationError):
        build_edit_prompt(default_template(), QUESTION, None)


def test_prompt_question_mark_is_ensured():
    template = PromptTemplate("{{facts}} {{question}}")
    chain = FactChain((Triple("a", "r", "b"),))
    assert build_edit_prompt(template, "where is a", chain).endswith("where is a?")
    assert build_edit_prompt(template, "where is a?", chain).endswith("where is a?")


def test_template_requires_exactly_one_of_each_slot():
    with pytest.raises(ValidationError):
        PromptTemplate("{{facts}} only facts")
    with pytest.raises(ValidationError):
        PromptTemplate("{{facts}} {{facts}} {{question}}")


def test_template_from_file(tmp_path):
    path = tmp_path / "template.txt"
    path.write_text("Known:\n{{facts}}\nQ: {{question}}\nA:", encoding="utf-8")
    template = PromptTemplate.from_file(path)
    chain = FactChain((Triple("a", "r", "b"),))
    prompt = build_edit_prompt(template, "what is a", chain)
    assert prompt == "Known:\n(a, r, b)\nQ: what is a?\nA:"


def test_facts_joined_one_per_line():
    template = PromptTemplate("{{facts}}|{{question}}")
    prompt = build_edit_prompt(template, "q", GOLD_CHAIN)
    facts_part = prompt.split("|")[0]
    assert facts_part.count("\n") == 2  # three facts on three lines


def test_prompt_length_accounting():
    template = default_template()
    prompt = build_edit_prompt(template, QUESTION, GOLD_CHAIN)
    slots = len("{{facts}}") + len("{{question}}")
    expected = 0
    for ex in template.exemplars:
        facts_text = "\n".join(verbalize_fact(t) for t in ex.facts)
        question = ex.question if ex.question.endswith("?") else ex.question + "?"
        expected += len(template.body) - slots + len(facts_text) + len(question)
        expected += len(" ") + len(ex.answer) + len("\n\n")
    facts_text = "\n".join(verbalize_fact(t) for t in GOLD_CHAIN)
    expected += len(template.body) - slots + len(facts_text) + len(QUESTION)
    assert len(prompt) == expected


def test_check_edited_answer_worked_example():
    assert check_edited_answer("Boston is the capital", "Boston")


def test_check_edited_answer_case_insensitive():
    assert check_edited_answer("the united states", "United States")


def test_check_edited_answer_alias():
    assert check_edited_answer("USA.", "United States", aliases=["USA"])


def test_check_edited_answer_token_boundary():
    tokens = [f"w{i}" for i in range(10)] + ["Boston", "w12"]
    assert not check_edited_answer(" ".join(tokens), "Boston", max_tokens=10)
    assert check_edited_answer(" ".join(tokens), "Boston", max_tokens=11)


def test_check_edited_answer_whitespace_invariance():
    rng = random.Random(3)
    for _ in range(30):
        pad = lambda s: "".join(
            c + (" " * rng.randint(0, 2) if c == " " else "") for c in s
        )
        generated = pad("the answer is New   York city")
        assert check_edited_answer(generated.upper(), "new york", max_tokens=10)


def test_check_edited_answer_rejects_empty_target():
    with pytest.raises(ValidationError):
        check_edited_answer("text", "   ")


def test_mock_generator_exact_prompt_match():
    template = default_template()
    prompt = build_edit_prompt(template, QUESTION, GOLD_CHAIN)
    backend = MockGenerator({prompt: "Boston"})
    outcome = answer_with_edit(
        backend, template, QUESTION, GOLD_CHAIN, "Boston"
    )
    assert outcome.matched
    assert outcome.matched_alias == "Boston"
    assert outcome.generated == "Boston"
    assert outcome.prompt == prompt


def test_unrelated_generation_does_not_match():
    backend = MockGenerator({}, default="something else entirely")
    outcome = answer_with_edit(
        backend, default_template(), QUESTION, GOLD_CHAIN, "Boston"
    )
    assert not outcome.matched
    assert outcome.matched_alias is None


def test_outcome_matches_check_edited_answer_single_path():
    rng = random.Random(11)
    words = ["Boston", "London", "here", "city", "the"]
    for _ in range(40):
        generated = " ".join(rng.choice(words) for _ in range(rng.randint(0, 14)))
        backend = MockGenerator({}, default=generated, max_new_tokens=10)
        outcome = answer_with_edit(
            backend, default_template(), QUESTION, GOLD_CHAIN, "Boston",
            aliases=("London",),
        )
        assert outcome.matched == check_edited_answer(
            generated, "Boston", ("London",), backend.max_new_tokens
        )


def test_answer_window_uses_backend_tokens_when_reported():
    class TokenizedBackend:
        max_new_tokens = 2

        def generate(self, prompt):
            from kgedit.editing import GenerationResult
            # backend tokenization puts the answer in the third token
            return GenerationResult(
                text="a b Boston", tokens=("a", "b", "Boston")
            )

    outcome = answer_with_edit(
        TokenizedBackend(), default_template(), QUESTION, GOLD_CHAIN, "Boston"
    )
    assert not outcome.matched


def test_mock_generator_validation():
    with pytest.raises(ValidationError):
        MockGenerator({}, max_new_tokens=0)


def test_load_mock_generator(tmp_path):
    path = tmp_path / "responses.jsonl"
    path.write_text(
        '{"prompt": "p1", "completion": "Boston"}\n'
        '{"prompt": "p2", "completion": "London"}\n',
        encoding="utf-8",
    )
    backend = load_mock_generator(path)
    assert backend.generate("p1").text == "Boston"
    assert backend.generate("unknown").text == ""


def test_exemplars_render_before_the_task():
    template = PromptTemplate(
        "Facts:\n{{facts}}\n{{question}}\nAnswer:",
        exemplars=(
            Exemplar(
                facts=(Triple("x", "r", "y"),), question="what is x", answer="y"
            ),
        ),
    )
    chain = FactChain((Triple("a", "r", "b"),))
    prompt = build_edit_prompt(template, "what is a", chain)
    assert prompt.index("what is x?") < prompt.index("what is a?")
    assert prompt.endswith("Answer:")


def test_edit_outcome_record():
    backend = MockGenerator({}, default="Boston")
    record = answer_with_edit(
        backend, default_template(), QUESTION, GOLD_CHAIN, "Boston"
    ).to_record()
    assert record["matched"] is True
    assert record["generated"] == "Boston"
