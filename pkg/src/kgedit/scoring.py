"""Conditional-probability backends used to score text continuations.

Two interchangeable backends implement the :class:`Scorer` protocol:

* :class:`MockScorer` — a deterministic, table-driven model for tests and
  desk-scale runs. Whitespace-separated words are its tokens.
* :class:`RemoteScorer` — a client for completions-style endpoints that
  report echoed token log-probabilities (teacher forcing).

All log-probabilities are base 2. Remote endpoints report natural-log
values; the conversion happens at the client boundary.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, runtime_checkable

import httpx

from .errors import (
    CredentialError,
    ProtocolError,
    TransportError,
    ValidationError,
)
from .kgstore import Triple

LN2 = math.log(2.0)

#: Probability assigned per unseen token by the mock backend. Small enough
#: not to drown signal, large enough to keep log ratios finite.
DEFAULT_EPSILON = 2.0**-20

_SUM_TOL = 1e-6


def verbalize_fact(triple: Triple) -> str:
    """Render a triple as ``(head, relation, tail)``, fields verbatim."""
    return f"({triple.head}, {triple.relation}, {triple.tail})"


def extend_context(context: str, token: str) -> str:
    """Append one token to a context string (single-space join)."""
    return f"{context} {token}" if context else token


@dataclass(frozen=True)
class TokenDist:
    """Next-token probability distribution, plus mass for unlisted tokens.

    ``tail_mass`` lumps every token outside ``entries`` into one implicit
    pseudo-outcome; it is always 0 for the mock backend, which knows its
    whole vocabulary.
    """

    entries: Mapping[str, float]
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        if not self.entries:
            raise ValidationError("token distribution has no entries")
        for token, p in self.entries.items():
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"probability for {token!r} out of [0,1]: {p}")
        if not -_SUM_TOL <= self.tail_mass <= 1.0 + _SUM_TOL:
            raise ValidationError(f"tail_mass out of range: {self.tail_mass}")
        total = sum(self.entries.values()) + self.tail_mass
        if abs(total - 1.0) > _SUM_TOL:
            raise ValidationError(f"distribution sums to {total}, expected 1")

    @property
    def outcome_count(self) -> int:
        """Number of outcomes, counting a positive tail mass as one."""
        return len(self.entries) + (1 if self.tail_mass > 0.0 else 0)

    def probabilities(self) -> list[float]:
        """All outcome probabilities, tail mass last when present."""
        ps = list(self.entries.values())
        if self.tail_mass > 0.0:
            ps.append(self.tail_mass)
        return ps


@runtime_checkable
class Scorer(Protocol):
    """Minimal contract every probability backend satisfies."""

    def sequence_logprob(self, context: str, continuation: str) -> float: ...

    def next_token_dist(self, context: str) -> TokenDist: ...


@dataclass(frozen=True)
class MockTable:
    """Lookup tables backing the mock scorer.

    ``continuations`` maps (context, continuation) to a probability and
    feeds :meth:`MockScorer.sequence_logprob`. Multi-token continuations are
    expanded at construction into token-level entries via the chain rule:
    the stated probability goes to the first token, 1.0 to each follow-up
    token. ``rows`` maps a context to its next-token distribution and feeds
    :meth:`MockScorer.next_token_dist`; the two tables are independent.
    """

    continuations: Mapping[tuple[str, str], float] = field(default_factory=dict)
    rows: Mapping[str, TokenDist] = field(default_factory=dict)

    def __post_init__(self):
        expanded: dict[tuple[str, str], float] = {}
        for (context, continuation), prob in self.continuations.items():
            if not 0.0 < prob <= 1.0:
                raise ValidationError(
                    f"continuation probability out of (0,1]: {prob} for "
                    f"({context!r}, {continuation!r})"
                )
            tokens = continuation.split()
            if not tokens:
                raise ValidationError(f"empty continuation for context {context!r}")
            ctx = context
            for i, token in enumerate(tokens):
                p = prob if i == 0 else 1.0
                key = (ctx, token)
                if key in expanded and expanded[key] != p:
                    raise ValidationError(
                        f"conflicting probabilities for {key!r}: "
                        f"{expanded[key]} vs {p}"
                    )
                expanded[key] = p
                ctx = extend_context(ctx, token)
        object.__setattr__(self, "continuations", expanded)
        rows = dict(self.rows)
        for context, row in rows.items():
            if not isinstance(row, TokenDist):
                rows[context] = TokenDist(row)
        object.__setattr__(self, "rows", rows)


class MockScorer:
    """Pure, deterministic scorer backed by a :class:`MockTable`.

    Tokens are whitespace-separated words. Unseen (context, token) pairs
    fall back to the epsilon floor; contexts without a stored next-token
    row yield the uniform distribution over the configured vocabulary.
    """

    def __init__(self, table: MockTable, vocabulary: Iterable[str], epsilon: float = DEFAULT_EPSILON):
        vocab = tuple(dict.fromkeys(vocabulary))
        if not vocab:
            raise ValidationError("mock vocabulary is empty")
        if not 0.0 < epsilon < 1.0:
            raise ValidationError(f"epsilon must lie in (0,1), got {epsilon}")
        self._table = table
        self._vocab = vocab
        self._epsilon = epsilon

    @property
    def epsilon(self) -> float:
        return self._epsilon

    def sequence_logprob(self, context: str, continuation: str) -> float:
        """Sum of per-token log2 probabilities under the table (chain rule)."""
        tokens = continuation.split()
        if not tokens:
            raise ValidationError("continuation is empty")
        total = 0.0
        ctx = context
        for token in tokens:
            p = self._table.continuations.get((ctx, token), self._epsilon)
            total += math.log2(p)
            ctx = extend_context(ctx, token)
        return total

    def next_token_dist(self, context: str) -> TokenDist:
        row = self._table.rows.get(context)
        if row is not None:
            return TokenDist(dict(row.entries), row.tail_mass)
        p = 1.0 / len(self._vocab)
        return TokenDist({token: p for token in self._vocab})


def make_mock_scorer(
    table: MockTable,
    vocabulary: Iterable[str],
    epsilon: float = DEFAULT_EPSILON,
) -> MockScorer:
    """Construct the deterministic table-driven scorer."""
    return MockScorer(table, vocabulary, epsilon)


def load_mock_table(path: str | Path) -> MockTable:
    """Read a mock table file (line-delimited JSON).

    Each line is either {context, continuation, prob} or
    {context, dist: {token: prob}}.
    """
    continuations: dict[tuple[str, str], float] = {}
    rows: dict[str, TokenDist] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "dist" in rec:
                rows[rec["context"]] = TokenDist(rec["dist"])
            elif "continuation" in rec:
                key = (rec["context"], rec["continuation"])
                continuations[key] = float(rec["prob"])
            else:
                raise ValidationError(
                    f"{path}:{lineno}: record needs 'continuation' or 'dist'"
                )
    return MockTable(continuations, rows)


class CompletionsClient:
    """HTTP transport for completions-style endpoints.

    Lazy (no network contact until the first request), retries transport
    failures and 5xx responses up to ``max_retries`` total attempts, and
    bounds in-flight requests with a semaphore so one client can be shared
    by parallel workers. The API key is read from ``api_key_env`` at request
    time and sent as a bearer token when present.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float,
        max_retries: int = 3,
        api_key_env: str = "RAE_API_KEY",
        max_in_flight: int = 4,
    ):
        if not endpoint.startswith(("http://", "https://")):
            raise ValidationError(f"endpoint is not an http(s) URL: {endpoint!r}")
        if timeout <= 0:
            raise ValidationError(f"timeout must be positive, got {timeout}")
        if max_retries < 1:
            raise ValidationError(f"max_retries must be >= 1, got {max_retries}")
        if max_in_flight < 1:
            raise ValidationError(f"max_in_flight must be >= 1, got {max_in_flight}")
        self._endpoint = endpoint
        self._timeout = timeout
        self._max_retries = max_retries
        self._api_key_env = api_key_env
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._client: httpx.Client | None = None
        self._client_lock = threading.Lock()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self._api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _get_client(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self._timeout)
            return self._client

    def close(self) -> None:
        with self._client_lock:
            if self._client is not None:
                self._client.close()
                self._client = None

    def request(self, payload: dict) -> dict:
        client = self._get_client()
        last_error: Exception | None = None
        for attempt in range(self._max_retries):
            if attempt:
                time.sleep(0.05 * attempt)
            try:
                with self._gate:
                    response = client.post(
                        self._endpoint, json=payload, headers=self._headers()
                    )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise CredentialError(
                    f"endpoint rejected credentials (HTTP {response.status_code}); "
                    f"is ${self._api_key_env} set correctly?"
                )
            if response.status_code >= 500:
                last_error = TransportError(f"HTTP {response.status_code} from endpoint")
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"unexpected HTTP {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"response is not JSON: {exc}") from exc
        raise TransportError(
            f"request failed after {self._max_retries} attempts: {last_error}"
        )


class RemoteScorer:
    """Scorer backed by a completions endpoint with echoed logprobs.

    Scoring requests carry ``echo=true`` and ``temperature=0`` so the
    endpoint reports teacher-forced token log-probabilities of the supplied
    text instead of sampling.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout: float,
        max_retries: int = 3,
        api_key_env: str = "RAE_API_KEY",
        top_k: int = 20,
        max_in_flight: int = 4,
        score_max_tokens: int = 0,
    ):
        if top_k < 1:
            raise ValidationError(f"top_k must be >= 1, got {top_k}")
        if score_max_tokens not in (0, 1):
            raise ValidationError("score_max_tokens must be 0 or 1")
        self._transport = CompletionsClient(
            endpoint,
            timeout,
            max_retries=max_retries,
            api_key_env=api_key_env,
            max_in_flight=max_in_flight,
        )
        self._model = model
        self._top_k = top_k
        self._score_max_tokens = score_max_tokens

    def close(self) -> None:
        self._transport.close()

    def _request(self, payload: dict) -> dict:
        return self._transport.request(payload)

    @staticmethod
    def _logprobs(body: dict) -> dict:
        try:
            logprobs = body["choices"][0]["logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"response missing choices[0].logprobs: {exc}") from exc
        if logprobs is None:
            raise ProtocolError("response has null logprobs; was logprobs requested?")
        return logprobs

    def sequence_logprob(self, context: str, continuation: str) -> float:
        """Teacher-forced log2 probability of ``continuation`` after ``context``."""
        if not continuation.split():
            raise ValidationError("continuation is empty")
        prompt = extend_context(context, continuation)
        body = self._request(
            {
                "model": self._model,
                "prompt": prompt,
                "max_tokens": self._score_max_tokens,
                "logprobs": self._top_k,
                "echo": True,
                "temperature": 0,
            }
        )
        logprobs = self._logprobs(body)
        try:
            tokens = list(logprobs["tokens"])
            values = list(logprobs["token_logprobs"])
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"logprobs missing tokens arrays: {exc}") from exc
        if len(tokens) != len(values):
            raise ProtocolError("tokens and token_logprobs lengths differ")
        # Locate the echoed prompt region, then walk back far enough to cover
        # the continuation text; a token straddling the boundary is included.
        echo_end = len(tokens)
        prompt_len = 0
        for i, token in enumerate(tokens):
            prompt_len += len(token)
            if prompt_len >= len(prompt):
                echo_end = i + 1
                break
        needed = len(continuation)
        covered = 0
        start = echo_end
        while start > 0 and covered < needed:
            start -= 1
            covered += len(tokens[start])
        total_nat = 0.0
        for value in values[start:echo_end]:
            if value is not None:  # first echoed token may have no logprob
                total_nat += float(value)
        return total_nat / LN2

    def next_token_dist(self, context: str) -> TokenDist:
        """Top-K next-token probabilities; remaining mass goes to tail_mass."""
        body = self._request(
            {
                "model": self._model,
                "prompt": context,
                "max_tokens": 1,
                "logprobs": self._top_k,
                "echo": False,
                "temperature": 0,
            }
        )
        logprobs = self._logprobs(body)
        try:
            top = logprobs["top_logprobs"][0]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"logprobs missing top_logprobs[0]: {exc}") from exc
        if not isinstance(top, dict) or not top:
            raise ProtocolError("top_logprobs[0] is not a non-empty object")
        entries = {token: math.exp(float(lp)) for token, lp in top.items()}
        tail = max(0.0, 1.0 - sum(entries.values()))
        return TokenDist(entries, tail)


def make_remote_scorer(
    endpoint: str,
    model: str,
    timeout: float,
    max_retries: int = 3,
    **kwargs,
) -> RemoteScorer:
    """Construct the remote logprob client (no network contact until used)."""
    return RemoteScorer(endpoint, model, timeout, max_retries=max_retries, **kwargs)
