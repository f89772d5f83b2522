"""In-context editing: prompt assembly, answer generation, and judging.

The editing prompt places the retrieved facts ahead of the question so a
frozen model can pick the updated answer up from context. Generation is
greedy with a capped token budget; an answer counts as edited when the
target (or an alias) appears within the first ``max_new_tokens`` generated
tokens, compared case-insensitively with whitespace runs collapsed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence, runtime_checkable

from .errors import ProtocolError, ValidationError
from .kgstore import FactChain, Triple
from .scoring import CompletionsClient, verbalize_fact

FACTS_SLOT = "{{facts}}"
QUESTION_SLOT = "{{question}}"

_WS = re.compile(r"\s+")


def _normalize_answer(text: str) -> str:
    return _WS.sub(" ", text).strip().lower()


def _ensure_question_mark(question: str) -> str:
    q = question.rstrip()
    if not q:
        raise ValidationError("question is empty")
    return q if q.endswith("?") else q + "?"


@dataclass(frozen=True)
class Exemplar:
    """One few-shot demonstration: facts, question, and the expected answer."""

    facts: tuple[Triple, ...]
    question: str
    answer: str


@dataclass(frozen=True)
class PromptTemplate:
    """Editing-prompt template with optional few-shot demonstrations.

    ``body`` must contain exactly one facts slot and one question slot
    (literal ``{{facts}}`` / ``{{question}}``). Demonstrations are rendered
    with the same body, each followed by its answer.
    """

    body: str
    exemplars: tuple[Exemplar, ...] = ()

    def __post_init__(self):
        for slot in (FACTS_SLOT, QUESTION_SLOT):
            if self.body.count(slot) != 1:
                raise ValidationError(
                    f"template body must contain exactly one {slot}, "
                    f"found {self.body.count(slot)}"
                )

    def render_body(self, question: str, fact_lines: Sequence[str]) -> str:
        facts_text = "\n".join(fact_lines)
        return self.body.replace(FACTS_SLOT, facts_text).replace(
            QUESTION_SLOT, _ensure_question_mark(question)
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        """Load a template body from a plain-text file (no demonstrations)."""
        return cls(Path(path).read_text(encoding="utf-8"))


DEFAULT_BODY = "Given fact:\n{{facts}}\n{{question}}\nAnswer:"

_DEFAULT_EXEMPLARS = (
    Exemplar(
        facts=(
            Triple("Mont Blanc", "located in", "France"),
            Triple("France", "capital", "Paris"),
        ),
        question="What is the capital of the country where Mont Blanc is located?",
        answer="Paris",
    ),
    Exemplar(
        facts=(
            Triple("sushi", "originates from", "Japan"),
            Triple("Japan", "currency", "yen"),
        ),
        question="Which currency is used where sushi originates from?",
        answer="yen",
    ),
    Exemplar(
        facts=(Triple("The Hobbit", "written by", "J. R. R. Tolkien"),),
        question="Who wrote The Hobbit?",
        answer="J. R. R. Tolkien",
    ),
)


def default_template() -> PromptTemplate:
    """The built-in template with three embedded demonstrations."""
    return PromptTemplate(DEFAULT_BODY, _DEFAULT_EXEMPLARS)


def build_edit_prompt(
    template: PromptTemplate, question: str, facts: FactChain
) -> str:
    """Render the editing prompt: demonstrations, facts, then the question.

    The question is guaranteed a trailing question mark; each fact is
    verbalized on its own line. Rendering is deterministic.
    """
    if facts is None or len(facts) == 0:
        raise ValidationError("editing requires at least one fact")
    parts = []
    for ex in template.exemplars:
        rendered = template.render_body(
            ex.question, [verbalize_fact(t) for t in ex.facts]
        )
        parts.append(f"{rendered} {ex.answer}\n\n")
    parts.append(template.render_body(question, [verbalize_fact(t) for t in facts]))
    return "".join(parts)


def _matching_alias(
    generated: str | Sequence[str],
    target: str,
    aliases: Sequence[str],
    max_tokens: int,
) -> str | None:
    """The first target/alias found in the leading generated tokens, if any."""
    if not target.strip():
        raise ValidationError("target answer is empty")
    if max_tokens < 1:
        raise ValidationError(f"max_tokens must be >= 1, got {max_tokens}")
    tokens = generated.split() if isinstance(generated, str) else list(generated)
    window = _normalize_answer(" ".join(tokens[:max_tokens]))
    for candidate in (target, *aliases):
        if _normalize_answer(candidate) in window:
            return candidate
    return None


def check_edited_answer(
    generated: str | Sequence[str],
    target: str,
    aliases: Sequence[str] = (),
    max_tokens: int = 10,
) -> bool:
    """True iff the target or an alias appears within the first tokens.

    ``generated`` may be raw text (split on whitespace) or the backend's own
    token list. Matching is a substring test after lowercasing and collapsing
    whitespace on both sides.
    """
    return _matching_alias(generated, target, aliases, max_tokens) is not None


@dataclass(frozen=True)
class GenerationResult:
    """Raw model output; ``tokens`` is the backend tokenization when known."""

    text: str
    tokens: tuple[str, ...] | None = None


@runtime_checkable
class GenerationBackend(Protocol):
    max_new_tokens: int

    def generate(self, prompt: str) -> GenerationResult: ...


class MockGenerator:
    """Deterministic generator mapping exact prompts to continuations.

    Unmapped prompts yield ``default`` (empty by default). Tokens are
    whitespace-split words, so alignment with the judging rule is exact.
    """

    def __init__(
        self,
        responses: Mapping[str, str],
        default: str = "",
        max_new_tokens: int = 10,
    ):
        if max_new_tokens < 1:
            raise ValidationError(f"max_new_tokens must be >= 1, got {max_new_tokens}")
        self._responses = dict(responses)
        self._default = default
        self.max_new_tokens = max_new_tokens

    def generate(self, prompt: str) -> GenerationResult:
        text = self._responses.get(prompt, self._default)
        return GenerationResult(text=text, tokens=None)


def load_mock_generator(
    path: str | Path, default: str = "", max_new_tokens: int = 10
) -> MockGenerator:
    """Read generator responses from a JSONL file of {prompt, completion}."""
    responses: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                responses[rec["prompt"]] = rec["completion"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad record: {exc}") from exc
    return MockGenerator(responses, default=default, max_new_tokens=max_new_tokens)


class RemoteGenerator:
    """Greedy generation against a completions endpoint (temperature 0)."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout: float,
        max_retries: int = 3,
        api_key_env: str = "RAE_API_KEY",
        max_new_tokens: int = 10,
        max_in_flight: int = 4,
    ):
        if max_new_tokens < 1:
            raise ValidationError(f"max_new_tokens must be >= 1, got {max_new_tokens}")
        self._transport = CompletionsClient(
            endpoint,
            timeout,
            max_retries=max_retries,
            api_key_env=api_key_env,
            max_in_flight=max_in_flight,
        )
        self._model = model
        self.max_new_tokens = max_new_tokens

    def close(self) -> None:
        self._transport.close()

    def generate(self, prompt: str) -> GenerationResult:
        body = self._transport.request(
            {
                "model": self._model,
                "prompt": prompt,
                "max_tokens": self.max_new_tokens,
                "logprobs": 1,
                "echo": False,
                "temperature": 0,
            }
        )
        try:
            choice = body["choices"][0]
            text = choice["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"response missing choices[0].text: {exc}") from exc
        tokens = None
        logprobs = choice.get("logprobs") or {}
        if isinstance(logprobs.get("tokens"), list):
            tokens = tuple(str(t) for t in logprobs["tokens"])
        return GenerationResult(text=str(text), tokens=tokens)


@dataclass(frozen=True)
class EditOutcome:
    """One editing attempt: the prompt, the output, and the verdict."""

    prompt: str
    generated: str
    matched: bool
    matched_alias: str | None = None

    def to_record(self) -> dict:
        return {
            "prompt": self.prompt,
            "generated": self.generated,
            "matched": self.matched,
            "matched_alias": self.matched_alias,
        }


def answer_with_edit(
    backend: GenerationBackend,
    template: PromptTemplate,
    question: str,
    facts: FactChain,
    target: str,
    aliases: Sequence[str] = (),
) -> EditOutcome:
    """Build the prompt, generate greedily, and judge against the target.

    The judgment uses the backend's reported tokens when available and
    whitespace-split words otherwise; the ``matched`` field comes from the
    same matching pass that yields ``matched_alias``.
    """
    prompt = build_edit_prompt(template, question, facts)
    result = backend.generate(prompt)
    generated = result.tokens if result.tokens is not None else result.text
    alias = _matching_alias(generated, target, aliases, backend.max_new_tokens)
    return EditOutcome(
        prompt=prompt,
        generated=result.text,
        matched=alias is not None,
        matched_alias=alias,
    )
