"""Command-line interface: thin adapters over the library modules.

Subcommands: ``build-kg``, ``retrieve``, ``prune``, ``edit``, ``eval``,
``dpi-check``. Settings may come from a JSON config file (``--config``);
command-line flags win over config values. API credentials are read only
from the environment variable named by ``--api-key-env``.

Exit codes: 0 success, 1 input/configuration error, 2 backend/transport
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .editing import (
    EditOutcome,
    PromptTemplate,
    RemoteGenerator,
    answer_with_edit,
    default_template,
    load_mock_generator,
)
from .errors import ConfigError, KGEditError, ScorerError, ValidationError
from .evaluation import run_eval
from .infotheory import random_markov_joint, verify_dpi
from .kgstore import (
    FactChain,
    Triple,
    build_edited_kg,
    load_edits,
    load_kg,
    load_triples,
    save_kg,
    validate_chain,
)
from .pruning import prune
from .retrieval import RetrievalConfig, beam_search_retrieve
from .scoring import (
    DEFAULT_EPSILON,
    MockTable,
    RemoteScorer,
    load_mock_table,
    make_mock_scorer,
)

DEFAULT_API_KEY_ENV = "RAE_API_KEY"


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _setting(args, key: str, default=None):
    """Flag value if given, else the config-file value, else the default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    config = getattr(args, "_config", None) or {}
    return config.get(key, default)


def _require_path(value, what: str) -> Path:
    if not value:
        raise ConfigError(f"missing required path: {what}")
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"{what} does not exist: {path}")
    return path


def _mock_vocabulary(table: MockTable, override) -> list[str]:
    if override:
        return [token.strip() for token in str(override).split(",") if token.strip()]
    vocab: dict[str, None] = {}
    for row in table.rows.values():
        for token in row.entries:
            vocab.setdefault(token, None)
    for _, token in table.continuations:
        vocab.setdefault(token, None)
    if not vocab:
        raise ConfigError(
            "cannot derive a vocabulary from an empty mock table; pass --mock-vocab"
        )
    return list(vocab)


def _make_scorer(args):
    spec = _setting(args, "scorer")
    if not spec:
        raise ConfigError("missing --scorer (mock:TABLE.jsonl or remote:URL)")
    kind, _, rest = str(spec).partition(":")
    if kind == "mock":
        table = load_mock_table(_require_path(rest, "mock table"))
        vocab = _mock_vocabulary(table, _setting(args, "mock_vocab"))
        epsilon = float(_setting(args, "epsilon", DEFAULT_EPSILON))
        return make_mock_scorer(table, vocab, epsilon)
    if kind == "remote":
        model = _setting(args, "model")
        if not model:
            raise ConfigError("remote scorer requires --model")
        return RemoteScorer(
            rest,
            model,
            timeout=float(_setting(args, "timeout", 30.0)),
            max_retries=int(_setting(args, "max_retries", 3)),
            api_key_env=_setting(args, "api_key_env", DEFAULT_API_KEY_ENV),
            top_k=int(_setting(args, "top_k", 20)),
            max_in_flight=int(_setting(args, "max_in_flight", 4)),
        )
    raise ConfigError(f"unknown scorer kind {kind!r}; use mock: or remote:")


def _make_backend(args):
    spec = _setting(args, "backend")
    if not spec:
        raise ConfigError("missing --backend (mock:RESPONSES.jsonl or remote:URL)")
    kind, _, rest = str(spec).partition(":")
    max_new_tokens = int(_setting(args, "max_new_tokens", 10))
    if kind == "mock":
        return load_mock_generator(
            _require_path(rest, "mock responses"), max_new_tokens=max_new_tokens
        )
    if kind == "remote":
        model = _setting(args, "model")
        if not model:
            raise ConfigError("remote backend requires --model")
        return RemoteGenerator(
            rest,
            model,
            timeout=float(_setting(args, "timeout", 30.0)),
            max_retries=int(_setting(args, "max_retries", 3)),
            api_key_env=_setting(args, "api_key_env", DEFAULT_API_KEY_ENV),
            max_new_tokens=max_new_tokens,
            max_in_flight=int(_setting(args, "max_in_flight", 4)),
        )
    raise ConfigError(f"unknown backend kind {kind!r}; use mock: or remote:")


def _load_template(args) -> PromptTemplate:
    path = _setting(args, "template")
    if path:
        return PromptTemplate.from_file(_require_path(path, "template file"))
    return default_template()


def _load_chain(path: Path) -> FactChain:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "chain" in data:
        data = data["chain"]
    if not isinstance(data, list):
        raise ValidationError(f"{path}: expected a chain array or a record with one")
    return validate_chain(
        Triple(r["head"], r["relation"], r["tail"]) for r in data
    )


def _emit(record: dict, out) -> None:
    text = json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# --- subcommand handlers ----------------------------------------------------


def _cmd_build_kg(args) -> int:
    triples = load_triples(_require_path(_setting(args, "triples"), "--triples"))
    edits_path = _setting(args, "edits")
    edits = load_edits(_require_path(edits_path, "--edits")) if edits_path else []
    kg = build_edited_kg(triples, edits)
    out = _setting(args, "out")
    if not out:
        raise ConfigError("missing --out for the built KG")
    save_kg(kg, out)
    print(f"wrote {len(kg)} triples ({kg.edited_count} edited) to {out}")
    return 0


def _cmd_retrieve(args) -> int:
    kg = load_kg(_require_path(_setting(args, "kg"), "--kg"))
    scorer = _make_scorer(args)
    config = RetrievalConfig(
        hops=int(_setting(args, "hops", 4)),
        beam_width=int(_setting(args, "beam", 2)),
        max_relations_per_hop=int(_setting(args, "cap", 64)),
        include_question_prior=bool(_setting(args, "include_question_prior", False)),
    )
    subgraph = beam_search_retrieve(
        kg, scorer, _required(args, "question"), _required(args, "entity"), config
    )
    _emit(subgraph.to_record(), _setting(args, "out"))
    return 0


def _cmd_prune(args) -> int:
    scorer = _make_scorer(args)
    chain = _load_chain(_require_path(_setting(args, "chain"), "--chain"))
    report = prune(scorer, _required(args, "question"), chain, _load_template(args))
    _emit(report.to_record(), _setting(args, "out"))
    return 0


def _cmd_edit(args) -> int:
    backend = _make_backend(args)
    chain = _load_chain(_require_path(_setting(args, "chain"), "--chain"))
    outcome: EditOutcome = answer_with_edit(
        backend,
        _load_template(args),
        _required(args, "question"),
        chain,
        _required(args, "target"),
        tuple(_setting(args, "alias", []) or []),
    )
    _emit(outcome.to_record(), _setting(args, "out"))
    return 0


def _cmd_eval(args) -> int:
    report_path = _setting(args, "report")
    if not report_path:
        raise ConfigError("missing --report path for the eval output")
    report = run_eval(
        _require_path(_setting(args, "triples"), "--triples"),
        _require_path(_setting(args, "dataset"), "--dataset"),
        _make_scorer(args),
        _make_backend(args),
        template=_load_template(args),
        hops=_maybe_int(_setting(args, "hops")),
        beam_width=int(_setting(args, "beam", 2)),
        max_relations_per_hop=int(_setting(args, "cap", 64)),
        include_question_prior=bool(_setting(args, "include_question_prior", False)),
        do_prune=bool(_setting(args, "prune", True)),
        emit_preprune_metrics=bool(_setting(args, "emit_preprune", False)),
        strict=bool(_setting(args, "strict", True)),
        parallelism=int(_setting(args, "parallelism", 1)),
        report_path=report_path,
        config_note={"scorer": str(_setting(args, "scorer")),
                     "backend": str(_setting(args, "backend"))},
    )
    overall = report.aggregates["overall"]
    print(
        f"evaluated {overall['cases']} cases: "
        f"edited accuracy {overall.get('edited_accuracy', 0.0)}%, "
        f"PM {overall.get('pm', 0.0)}%, EM {overall.get('em', 0.0)}% "
        f"-> {report_path}"
    )
    return 0


def _cmd_dpi_check(args) -> int:
    trials = int(_setting(args, "trials", 1000))
    rng = np.random.default_rng(int(_setting(args, "seed", 0)))
    max_alphabet = int(_setting(args, "max_alphabet", 5))
    violations = 0
    for _ in range(trials):
        _, _, holds = verify_dpi(random_markov_joint(rng, max_alphabet))
        if not holds:
            violations += 1
    print(
        f"dpi-check: {trials - violations}/{trials} random Markov joints satisfy "
        "I(G;Theta) >= I(G;Q)"
    )
    return 0 if violations == 0 else 1


def _required(args, key: str):
    value = _setting(args, key)
    if value is None:
        raise ConfigError(f"missing required --{key.replace('_', '-')}")
    return value


def _maybe_int(value):
    return None if value is None else int(value)


# --- parser wiring -----------------------------------------------------------


def _add_scorer_flags(sub) -> None:
    sub.add_argument("--scorer", help="mock:TABLE.jsonl or remote:URL")
    sub.add_argument("--mock-vocab", dest="mock_vocab",
                     help="comma-separated vocabulary for the mock scorer")
    sub.add_argument("--epsilon", type=float, help="mock unseen-token probability")
    _add_remote_flags(sub)


def _add_remote_flags(sub) -> None:
    sub.add_argument("--model", help="model name for remote endpoints")
    sub.add_argument("--timeout", type=float, help="request timeout in seconds")
    sub.add_argument("--max-retries", dest="max_retries", type=int)
    sub.add_argument("--top-k", dest="top_k", type=int,
                     help="top-K logprobs requested from remote endpoints")
    sub.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    sub.add_argument("--api-key-env", dest="api_key_env",
                     help=f"env var holding the API key (default {DEFAULT_API_KEY_ENV})")


def build_parser() -> _Parser:
    parser = _Parser(prog="kgedit", description=__doc__)
    parser.add_argument("--config", help="JSON config file; flags override it")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    sub = commands.add_parser("build-kg", help="merge base triples with edits")
    sub.add_argument("--triples", help="base triples file (JSONL)")
    sub.add_argument("--edits", help="edits file (JSONL)")
    sub.add_argument("--out", help="output KG file")
    sub.set_defaults(func=_cmd_build_kg)

    sub = commands.add_parser("retrieve", help="retrieve a fact chain for a question")
    sub.add_argument("--kg", help="KG file from build-kg")
    sub.add_argument("--question")
    sub.add_argument("--entity", help="question entity (first head)")
    sub.add_argument("--hops", type=int)
    sub.add_argument("--beam", type=int)
    sub.add_argument("--cap", type=int, help="max relations per hop")
    sub.add_argument("--include-question-prior", dest="include_question_prior",
                     action="store_const", const=True)
    sub.add_argument("--out")
    _add_scorer_flags(sub)
    sub.set_defaults(func=_cmd_retrieve)

    sub = commands.add_parser("prune", help="prune a retrieved chain by uncertainty")
    sub.add_argument("--question")
    sub.add_argument("--chain", help="chain file (JSON array or retrieve output)")
    sub.add_argument("--template", help="prompt template file")
    sub.add_argument("--out")
    _add_scorer_flags(sub)
    sub.set_defaults(func=_cmd_prune)

    sub = commands.add_parser("edit", help="answer a question with facts in context")
    sub.add_argument("--question")
    sub.add_argument("--chain")
    sub.add_argument("--backend", help="mock:RESPONSES.jsonl or remote:URL")
    sub.add_argument("--target", help="expected edited answer")
    sub.add_argument("--alias", action="append", help="answer alias (repeatable)")
    sub.add_argument("--template")
    sub.add_argument("--max-new-tokens", dest="max_new_tokens", type=int)
    sub.add_argument("--out")
    _add_remote_flags(sub)
    sub.set_defaults(func=_cmd_edit)

    sub = commands.add_parser("eval", help="run the full pipeline over a dataset")
    sub.add_argument("--triples")
    sub.add_argument("--dataset")
    sub.add_argument("--backend")
    sub.add_argument("--beam", type=int)
    sub.add_argument("--hops", type=int, help="override the per-case K+2 default")
    sub.add_argument("--cap", type=int)
    sub.add_argument("--include-question-prior", dest="include_question_prior",
                     action="store_const", const=True)
    sub.add_argument("--prune", dest="prune", action=argparse.BooleanOptionalAction)
    sub.add_argument("--emit-preprune", dest="emit_preprune",
                     action="store_const", const=True)
    sub.add_argument("--strict", dest="strict", action=argparse.BooleanOptionalAction)
    sub.add_argument("--parallelism", type=int)
    sub.add_argument("--template")
    sub.add_argument("--max-new-tokens", dest="max_new_tokens", type=int)
    sub.add_argument("--report", help="output report file")
    _add_scorer_flags(sub)
    sub.set_defaults(func=_cmd_eval)

    sub = commands.add_parser("dpi-check", help="verify the information inequality "
                              "on random Markov joints")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--max-alphabet", dest="max_alphabet", type=int)
    sub.set_defaults(func=_cmd_dpi_check)

    return parser


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    if not getattr(args, "command", None):
        parser.print_help()
        return 1
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"kgedit: bad config file: {exc}", file=sys.stderr)
            return 1
    args._config = config
    try:
        return args.func(args)
    except ScorerError as exc:
        print(f"kgedit: backend error: {exc}", file=sys.stderr)
        return 2
    except KGEditError as exc:
        print(f"kgedit: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"kgedit: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
