"""The AC statement repository.

Statements are short self-contained sentences describing a reaction a
reader wants from a book, labeled A (affective), C (cognitive), or AC
(both). A and AC statements carry one or more emotion-wheel categories;
C statements carry none. The store format is JSONL records of
{id, text, kind, categories[], source} with an optional facet tag.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from ..domain import ACDescription
from .wheel import category_names

__all__ = ["ACStatement", "StatementRepository", "load_statements", "save_statements"]

KINDS = ("A", "C", "AC")


class StatementError(ValueError):
    pass


@dataclass(frozen=True)
class ACStatement:
    id: str
    text: str
    kind: str  # A | C | AC
    categories: frozenset[str] = frozenset()
    source: str = "fixture"  # llm | lexicon | fixture
    facet: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StatementError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "C" and self.categories:
            raise StatementError(f"C statement {self.id!r} must not carry categories")
        if self.kind in ("A", "AC") and not self.categories:
            raise StatementError(f"{self.kind} statement {self.id!r} needs at least one category")
        unknown = set(self.categories) - set(category_names())
        if unknown:
            raise StatementError(f"unknown categories {sorted(unknown)} on {self.id!r}")
        object.__setattr__(self, "categories", frozenset(self.categories))

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "text": self.text,
            "kind": self.kind,
            "categories": sorted(self.categories),
            "source": self.source,
        }
        if self.facet:
            rec["facet"] = self.facet
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ACStatement":
        return cls(
            id=str(rec["id"]),
            text=str(rec["text"]),
            kind=str(rec["kind"]),
            categories=frozenset(rec.get("categories", ())),
            source=str(rec.get("source", "fixture")),
            facet=rec.get("facet"),
        )


class StatementRepository:
    """Concurrent readers, serialized writers."""

    def __init__(self, statements: Iterable[ACStatement] = ()):
        self._lock = threading.Lock()
        self._by_id: dict[str, ACStatement] = {}
        for s in statements:
            self.add(s)

    def add(self, statement: ACStatement) -> None:
        with self._lock:
            if statement.id in self._by_id:
                raise StatementError(f"duplicate statement id {statement.id!r}")
            self._by_id[statement.id] = statement

    def get(self, statement_id: str) -> ACStatement:
        try:
            return self._by_id[statement_id]
        except KeyError:
            raise StatementError(f"unknown statement id {statement_id!r}") from None

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self):
        return iter(sorted(self._by_id.values(), key=lambda s: s.id))

    def by_category(self, name: str, intensity: Optional[str] = None) -> list[ACStatement]:
        if name not in category_names():
            raise StatementError(f"unknown category {name!r}")
        out = [s for s in self if name in s.categories]
        if intensity:
            needle = intensity.lower()
            out = [s for s in out if needle in s.text.lower()]
        return out

    def compose(self, statement_ids: Iterable[str]) -> ACDescription:
        """Join the statements' texts in ascending id order; duplicate ids
        collapse, so composition is selection-order independent."""
        unique = sorted(set(statement_ids))
        if not unique:
            raise StatementError("cannot compose an empty statement selection")
        texts = {sid: self.get(sid).text for sid in unique}
        return ACDescription.from_parts(free_text=None, statement_texts_by_id=texts)

    @classmethod
    def from_distribution(cls, distribution: dict[str, int]) -> "StatementRepository":
        """Materialize placeholder statements matching a per-category count
        table; used to validate loaders against the published category
        distribution without shipping the statements themselves."""
        repo = cls()
        for cat in sorted(distribution):
            if cat not in category_names():
                raise StatementError(f"unknown category {cat!r} in distribution")
            for i in range(int(distribution[cat])):
                slug = cat.lower().replace(" ", "-")
                repo.add(
                    ACStatement(
                        id=f"dist-{slug}-{i:05d}",
                        text=f"placeholder {slug} statement {i}",
                        kind="A",
                        categories=frozenset({cat}),
                        source="fixture",
                    )
                )
        return repo


def save_statements(path: str | Path, repo: StatementRepository) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for s in repo:
            f.write(json.dumps(s.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def load_statements(path: str | Path) -> StatementRepository:
    repo = StatementRepository()
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                repo.add(ACStatement.from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise StatementError(f"{path}:{lineno}: bad statement record: {exc}") from exc
    return repo


def load_category_distribution(path: str | Path) -> dict[str, int]:
    data = json.loads(Path(path).read_text("utf-8"))
    return {str(k): int(v) for k, v in data.items()}
