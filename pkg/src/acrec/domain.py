"""Core vocabulary types shared across the pipeline.

Everything here is an immutable value object; validation beyond cheap
construction checks lives in :func:`validate_corpus`, which reports
violations instead of raising so that callers can surface all problems
in a corpus at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

__all__ = [
    "Book",
    "Interaction",
    "ReadingHistory",
    "ACDescription",
    "Split",
    "EmbeddingVector",
    "ValidationIssue",
    "ValidationReport",
    "validate_corpus",
    "render_ac_text",
]


class DomainError(ValueError):
    """Raised when a domain value cannot be constructed."""


@dataclass(frozen=True)
class Book:
    id: str
    title: str
    original_description: str
    extended_description: str = ""

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.original_description,
            "extended_description": self.extended_description,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Book":
        return cls(
            id=str(rec["id"]),
            title=str(rec.get("title", "")),
            original_description=str(rec.get("description", "")),
            extended_description=str(rec.get("extended_description", "")),
        )

    @property
    def combined_description(self) -> str:
        """Original plus extended description, used for cosine features."""
        if self.extended_description:
            return self.original_description + " " + self.extended_description
        return self.original_description


@dataclass(frozen=True)
class Interaction:
    """One (book, rating, review) event at a position in a user's history.

    `rating` is intentionally not range-checked at construction: corpus
    validation reports out-of-range values so a bad file can be diagnosed
    in full rather than dying at the first record.
    """

    user: str
    book: str
    rating: int
    review: str
    timestamp: int
    index: int

    def to_record(self) -> dict:
        return {
            "user_id": self.user,
            "book_id": self.book,
            "rating": self.rating,
            "review": self.review,
            "timestamp": self.timestamp,
            "index": self.index,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Interaction":
        return cls(
            user=str(rec["user_id"]),
            book=str(rec["book_id"]),
            rating=int(rec["rating"]),
            review=str(rec.get("review", "")),
            timestamp=int(rec["timestamp"]),
            index=int(rec.get("index", -1)),
        )


@dataclass(frozen=True)
class ReadingHistory:
    user: str
    interactions: tuple[Interaction, ...]

    def __post_init__(self):
        object.__setattr__(self, "interactions", tuple(self.interactions))

    @property
    def book_ids(self) -> frozenset[str]:
        """Set of consumed book ids over the whole history."""
        return frozenset(i.book for i in self.interactions)

    def consumed_before(self, step_index: int) -> frozenset[str]:
        return frozenset(i.book for i in self.interactions[:step_index])


class Split(enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"
    BURN_IN = "burn_in"
    SKIPPED = "skipped"


def render_ac_text(
    free_text: Optional[str],
    statement_texts_by_id: Optional[Mapping[str, str]] = None,
) -> str:
    """Render the text actually embedded for an AC description.

    Free text comes first, then statement texts joined in ascending id
    order with single spaces. Duplicate ids collapse. The result is
    deterministic and independent of selection order.
    """
    parts: list[str] = []
    if free_text and free_text.strip():
        parts.append(free_text.strip())
    if statement_texts_by_id:
        for sid in sorted(statement_texts_by_id):
            text = statement_texts_by_id[sid].strip()
            if text:
                parts.append(text)
    rendered = " ".join(parts)
    if not rendered:
        raise DomainError("AC description rendered to empty text")
    return rendered


@dataclass(frozen=True)
class ACDescription:
    """A user's affective-cognitive request, plus its rendered form."""

    rendered: str
    free_text: Optional[str] = None
    statement_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.rendered:
            raise DomainError("ACDescription.rendered must be non-empty")
        object.__setattr__(self, "statement_ids", tuple(self.statement_ids))

    @classmethod
    def from_parts(
        cls,
        free_text: Optional[str] = None,
        statement_texts_by_id: Optional[Mapping[str, str]] = None,
    ) -> "ACDescription":
        rendered = render_ac_text(free_text, statement_texts_by_id)
        ids = tuple(sorted(statement_texts_by_id)) if statement_texts_by_id else ()
        return cls(rendered=rendered, free_text=free_text, statement_ids=ids)

    @classmethod
    def from_text(cls, text: str) -> "ACDescription":
        return cls.from_parts(free_text=text)


@dataclass(frozen=True)
class EmbeddingVector:
    """A raw text embedding; all values finite, dim fixed by the provider."""

    values: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 1:
            raise DomainError(f"embedding must be 1-d, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("embedding contains non-finite values")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "dim", int(arr.shape[0]))


@dataclass(frozen=True)
class ValidationIssue:
    kind: str  # dangling_book | rating_range | timestamp_order | index_order
    message: str


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, kind: str, message: str) -> None:
        self.issues.append(ValidationIssue(kind, message))

    def by_kind(self, kind: str) -> list[ValidationIssue]:
        return [i for i in self.issues if i.kind == kind]


def validate_corpus(
    books: Mapping[str, Book] | Iterable[Book],
    histories: Mapping[str, ReadingHistory] | Iterable[ReadingHistory],
) -> ValidationReport:
    """Check referential integrity and ordering; never raises.

    A corpus is accepted iff the returned report is empty.
    """
    if not isinstance(books, Mapping):
        books = {b.id: b for b in books}
    if isinstance(histories, Mapping):
        histories = histories.values()

    report = ValidationReport()
    for hist in histories:
        prev_ts = None
        for pos, inter in enumerate(hist.interactions):
            if inter.book not in books:
                report.add(
                    "dangling_book",
                    f"user {inter.user} step {inter.index}: unknown book id {inter.book!r}",
                )
            if not 1 <= inter.rating <= 5:
                report.add(
                    "rating_range",
                    f"user {inter.user} step {inter.index}: rating {inter.rating} outside [1,5]",
                )
            if inter.index != pos:
                report.add(
                    "index_order",
                    f"user {hist.user}: index {inter.index} at position {pos}",
                )
            if prev_ts is not None and inter.timestamp < prev_ts:
                report.add(
                    "timestamp_order",
                    f"user {hist.user} step {inter.index}: timestamp decreases",
                )
            prev_ts = inter.timestamp
    return report
