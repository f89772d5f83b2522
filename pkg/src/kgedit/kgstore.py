"""Triple store: an external knowledge graph merged with a bank of tail edits.

The store is built once through :class:`KGBuilder` (add base triples, apply
edits), then frozen into an immutable :class:`EditedKG` that is safe to share
across any number of concurrent readers. Entity and relation labels are
compared after Unicode NFC normalization, trimming, and collapsing of internal
whitespace; comparison is case-sensitive.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ChainError, ConflictError, ValidationError

_WS = re.compile(r"\s+")


def normalize_label(label: str) -> str:
    """Canonicalize an entity or relation label (NFC, trim, collapse spaces)."""
    return _WS.sub(" ", unicodedata.normalize("NFC", label)).strip()


@dataclass(frozen=True)
class Triple:
    """A (head, relation, tail) fact. Labels are normalized at construction."""

    head: str
    relation: str
    tail: str

    def __post_init__(self):
        for name in ("head", "relation", "tail"):
            value = normalize_label(getattr(self, name))
            if not value:
                raise ValidationError(f"triple field {name!r} is empty")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class Edit:
    """A tail replacement: (head, relation, old_tail) becomes (head, relation, new_tail).

    When ``old_tail`` is None the edit is functional on (head, relation): it
    replaces every existing tail for that pair.
    """

    head: str
    relation: str
    new_tail: str
    old_tail: str | None = None

    def __post_init__(self):
        for name in ("head", "relation", "new_tail"):
            value = normalize_label(getattr(self, name))
            if not value:
                raise ValidationError(f"edit field {name!r} is empty")
            object.__setattr__(self, name, value)
        if self.old_tail is not None:
            old = normalize_label(self.old_tail)
            if not old:
                raise ValidationError("edit field 'old_tail' is empty; omit it instead")
            if old == self.new_tail:
                raise ValidationError(
                    f"edit for ({self.head}, {self.relation}) replaces "
                    f"{old!r} with itself"
                )
            object.__setattr__(self, "old_tail", old)

    @property
    def new_triple(self) -> Triple:
        return Triple(self.head, self.relation, self.new_tail)


@dataclass(frozen=True)
class FactChain:
    """Ordered triples where each tail is the head of the next link."""

    links: tuple[Triple, ...]

    def __post_init__(self):
        if not self.links:
            raise ChainError("fact chain is empty")
        for i in range(1, len(self.links)):
            if self.links[i - 1].tail != self.links[i].head:
                raise ChainError(
                    f"broken linkage at index {i}: tail {self.links[i-1].tail!r} "
                    f"!= head {self.links[i].head!r}",
                    index=i,
                )

    @property
    def hop_count(self) -> int:
        return len(self.links)

    def prefix(self, length: int) -> "FactChain":
        """First ``length`` links as a chain (1 <= length <= hop_count)."""
        if not 1 <= length <= len(self.links):
            raise ValidationError(f"prefix length {length} out of range")
        return FactChain(self.links[:length])

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.links)

    def __len__(self) -> int:
        return len(self.links)


def validate_chain(triples: Iterable[Triple]) -> FactChain:
    """Build a FactChain, raising ChainError naming the first broken index."""
    return FactChain(tuple(triples))


class EditedKG:
    """Immutable triple store with an adjacency index over head entities.

    Construct via :class:`KGBuilder`; direct construction takes an ordered
    triple sequence plus the set of edited members.
    """

    def __init__(self, triples: Iterable[Triple], edited: Iterable[Triple] = ()):
        ordered = dict.fromkeys(triples)
        self._triples = frozenset(ordered)
        self._edited = frozenset(edited)
        if not self._edited <= self._triples:
            raise ValidationError("edited flags reference triples not in the store")
        index: dict[str, list[tuple[str, str]]] = {}
        for t in ordered:
            index.setdefault(t.head, []).append((t.relation, t.tail))
        self._order = tuple(ordered)
        self._out = {h: tuple(pairs) for h, pairs in index.items()}

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._order)

    def is_edited(self, triple: Triple) -> bool:
        return triple in self._edited

    @property
    def edited_count(self) -> int:
        return len(self._edited)

    def entities(self) -> Iterator[str]:
        """Head entities with at least one outgoing edge, in insertion order."""
        return iter(self._out)

    def outgoing(self, entity: str) -> list[tuple[str, str, bool]]:
        """(relation, tail, is_edited) edges of ``entity`` in insertion order.

        Unknown entities yield an empty list.
        """
        entity = normalize_label(entity)
        return [
            (r, t, Triple(entity, r, t) in self._edited)
            for r, t in self._out.get(entity, ())
        ]


@dataclass
class KGBuilder:
    """Single-writer accumulator for triples and edits; freeze() yields EditedKG."""

    _triples: dict[Triple, None] = field(default_factory=dict)
    _edited: set[Triple] = field(default_factory=set)
    _applied: dict[tuple[str, str], str] = field(default_factory=dict)
    _frozen: bool = False

    def _check_mutable(self):
        if self._frozen:
            raise ValidationError("builder is frozen; no further mutation allowed")

    def add_triple(self, triple: Triple) -> "KGBuilder":
        """Insert a base fact; re-adding an existing triple is a no-op."""
        self._check_mutable()
        self._triples.setdefault(triple, None)
        return self

    def add_triples(self, triples: Iterable[Triple]) -> "KGBuilder":
        for t in triples:
            self.add_triple(t)
        return self

    def apply_edit(self, edit: Edit) -> "KGBuilder":
        """Replace the edited fact's tail, or append the new fact if absent.

        With ``old_tail`` set, only the matching original is removed; without
        it, every (head, relation, *) triple is removed first. Two edits that
        disagree on the new tail for the same (head, relation) raise
        ConflictError; reapplying an identical edit is a no-op.
        """
        self._check_mutable()
        key = (edit.head, edit.relation)
        seen = self._applied.get(key)
        if seen is not None and seen != edit.new_tail:
            raise ConflictError(
                f"conflicting edits for ({edit.head}, {edit.relation}): "
                f"{seen!r} vs {edit.new_tail!r}"
            )
        self._applied[key] = edit.new_tail

        if edit.old_tail is not None:
            victims = [Triple(edit.head, edit.relation, edit.old_tail)]
        else:
            victims = [
                t
                for t in self._triples
                if t.head == edit.head and t.relation == edit.relation
            ]
        for v in victims:
            self._triples.pop(v, None)
            self._edited.discard(v)
        new = edit.new_triple
        self._triples.setdefault(new, None)
        self._edited.add(new)
        return self

    def freeze(self) -> EditedKG:
        """Finalize into an immutable, concurrently shareable store."""
        self._check_mutable()
        self._frozen = True
        return EditedKG(self._triples, self._edited)


def build_edited_kg(triples: Iterable[Triple], edits: Iterable[Edit]) -> EditedKG:
    """Convenience: one-shot build of base triples with a batch of edits."""
    builder = KGBuilder().add_triples(triples)
    for e in edits:
        builder.apply_edit(e)
    return builder.freeze()


# --- line-delimited file formats -------------------------------------------


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise ValidationError(f"{path}:{lineno}: expected an object")
            yield lineno, record


def load_triples(path: str | Path) -> list[Triple]:
    """Read a triple file: one {head, relation, tail} object per line."""
    out = []
    for lineno, rec in _read_jsonl(path):
        try:
            out.append(Triple(rec["head"], rec["relation"], rec["tail"]))
        except KeyError as exc:
            raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
    return out


def load_edits(path: str | Path) -> list[Edit]:
    """Read an edits file: {head, relation, new_tail, old_tail?} per line."""
    out = []
    for lineno, rec in _read_jsonl(path):
        try:
            out.append(
                Edit(
                    rec["head"],
                    rec["relation"],
                    rec["new_tail"],
                    old_tail=rec.get("old_tail"),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
    return out


def save_kg(kg: EditedKG, path: str | Path) -> None:
    """Write the frozen store, one record per line, in insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in kg:
            record = {
                "head": t.head,
                "relation": t.relation,
                "tail": t.tail,
                "edited": kg.is_edited(t),
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def load_kg(path: str | Path) -> EditedKG:
    """Read a store written by :func:`save_kg`, preserving edited flags."""
    triples: list[Triple] = []
    edited: list[Triple] = []
    for lineno, rec in _read_jsonl(path):
        try:
            t = Triple(rec["head"], rec["relation"], rec["tail"])
        except KeyError as exc:
            raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
        triples.append(t)
        if rec.get("edited"):
            edited.append(t)
    return EditedKG(triples, edited)
