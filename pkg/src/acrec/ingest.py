"""Corpus loading, extended descriptions, useful-step selection, splits.

File formats (all JSONL, UTF-8):
  books:         {id, title, description}
  interactions:  {user_id, book_id, rating, review, timestamp}
  splits:        {user_id, step_index, book_id, split}

A step is useful when the rating is 4 or 5, the review has at least 20
tokens, and the book's original plus extended description has at least
250 tokens. Tokens are maximal runs of non-whitespace characters. The
first 15 steps of every history are burn-in, and at most 20 useful steps
per user are kept, spread evenly over the candidate list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .domain import Book, Interaction, ReadingHistory, Split, validate_corpus

__all__ = [
    "IngestError",
    "UsefulStep",
    "CorpusStats",
    "BandSample",
    "token_count",
    "load_corpus",
    "sample_users_by_band",
    "build_extended_descriptions",
    "is_useful_step",
    "select_useful_steps",
    "make_splits",
    "read_jsonl",
    "write_jsonl",
]

BURN_IN = 15
MAX_USEFUL_PER_USER = 20
MIN_REVIEW_TOKENS = 20
MIN_DESCRIPTION_TOKENS = 250
EXTENDED_MAX_TOKENS = 8192


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class UsefulStep:
    user: str
    step_index: int
    positive_book: str
    review: str
    rating: int
    split: Optional[Split] = None

    def to_record(self) -> dict:
        return {
            "user_id": self.user,
            "step_index": self.step_index,
            "book_id": self.positive_book,
            "split": self.split.value if self.split else None,
        }


@dataclass(frozen=True)
class CorpusStats:
    n_users: int
    n_steps: int
    n_books: int
    n_useful: int

    def __post_init__(self):
        if self.n_useful > self.n_steps:
            raise IngestError(f"n_useful {self.n_useful} > n_steps {self.n_steps}")


@dataclass
class BandSample:
    users: list[str]
    warnings: list[str] = field(default_factory=list)


def token_count(text: str) -> int:
    """Maximal runs of non-whitespace characters (Unicode whitespace)."""
    return len(text.split())


def write_jsonl(path: str | Path, records: Iterable[Mapping], meta: Optional[Mapping] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        if meta is not None:
            f.write(json.dumps({"record": "meta", **meta}, sort_keys=True) + "\n")
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> tuple[list[dict], dict]:
    """Returns (records, meta). Parse errors carry the 1-based line number."""
    path = Path(path)
    records: list[dict] = []
    meta: dict = {}
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if isinstance(rec, dict) and rec.get("record") == "meta":
                meta = rec
            else:
                records.append(rec)
    return records, meta


def load_corpus(
    books_path: str | Path, interactions_path: str | Path
) -> tuple[dict[str, Book], dict[str, ReadingHistory]]:
    """Load and validate a corpus. Interactions are grouped per user,
    sorted by timestamp (stable), and indexed from 0."""
    book_records, _ = read_jsonl(books_path)
    books: dict[str, Book] = {}
    for rec in book_records:
        book = Book.from_record(rec)
        if book.id in books:
            raise IngestError(f"{books_path}: duplicate book id {book.id!r}")
        books[book.id] = book

    inter_records, _ = read_jsonl(interactions_path)
    by_user: dict[str, list[dict]] = {}
    for rec in inter_records:
        by_user.setdefault(str(rec["user_id"]), []).append(rec)

    histories: dict[str, ReadingHistory] = {}
    for user in sorted(by_user):
        recs = sorted(by_user[user], key=lambda r: int(r["timestamp"]))
        interactions = tuple(
            Interaction(
                user=user,
                book=str(r["book_id"]),
                rating=int(r["rating"]),
                review=str(r.get("review", "")),
                timestamp=int(r["timestamp"]),
                index=i,
            )
            for i, r in enumerate(recs)
        )
        histories[user] = ReadingHistory(user=user, interactions=interactions)

    report = validate_corpus(books, histories)
    if not report.ok:
        first = report.issues[0]
        raise IngestError(
            f"corpus validation failed with {len(report.issues)} issue(s); first: "
            f"[{first.kind}] {first.message}"
        )
    return books, histories


def sample_users_by_band(
    histories: Mapping[str, ReadingHistory],
    band_width: int = 50,
    min_books: int = 20,
    max_books: int = 500,
    per_band: int = 100,
    rng_seed: int = 0,
) -> BandSample:
    """Sample up to ``per_band`` users from each history-length band
    [20-50], [51-100], ... [451-500]; underfull bands yield everyone
    available plus a warning. Deterministic under ``rng_seed``."""
    n_bands = max_books // band_width
    bands: list[list[str]] = [[] for _ in range(n_bands)]
    for user in sorted(histories):
        n = len(histories[user].interactions)
        if n < min_books or n > max_books:
            continue
        bands[(n - 1) // band_width].append(user)

    rng = np.random.default_rng(rng_seed)
    sample = BandSample(users=[])
    for idx, members in enumerate(bands):
        lo = min_books if idx == 0 else idx * band_width + 1
        hi = (idx + 1) * band_width
        if len(members) <= per_band:
            chosen = list(members)
            if len(members) < per_band:
                sample.warnings.append(
                    f"band [{lo}-{hi}]: only {len(members)} eligible users (wanted {per_band})"
                )
        else:
            chosen = sorted(rng.choice(members, size=per_band, replace=False).tolist())
        sample.users.extend(chosen)
    return sample


def build_extended_descriptions(
    books: Mapping[str, Book],
    histories: Mapping[str, ReadingHistory],
    excluded_users: frozenset[str] | set[str],
    max_tokens: int = EXTENDED_MAX_TOKENS,
) -> dict[str, str]:
    """Concatenate, per book, the reviews written by users outside
    ``excluded_users`` in ascending (timestamp, user id) order, truncated
    to ``max_tokens`` tokens. Books with no eligible reviews map to ""."""
    reviews: dict[str, list[tuple[int, str, str]]] = {bid: [] for bid in books}
    for user, hist in histories.items():
        if user in excluded_users:
            continue
        for inter in hist.interactions:
            if inter.book in reviews and inter.review.strip():
                reviews[inter.book].append((inter.timestamp, user, inter.review))

    extended: dict[str, str] = {}
    for bid, entries in reviews.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        tokens: list[str] = []
        for _, _, review in entries:
            tokens.extend(review.split())
            if len(tokens) >= max_tokens:
                break
        extended[bid] = " ".join(tokens[:max_tokens])
    return extended


def attach_extended(books: Mapping[str, Book], extended: Mapping[str, str]) -> dict[str, Book]:
    return {
        bid: replace(book, extended_description=extended.get(bid, ""))
        for bid, book in books.items()
    }


def is_useful_step(interaction: Interaction, book: Book) -> bool:
    if interaction.rating not in (4, 5):
        return False
    if token_count(interaction.review) < MIN_REVIEW_TOKENS:
        return False
    combined = token_count(book.original_description) + token_count(book.extended_description)
    return combined >= MIN_DESCRIPTION_TOKENS


def select_useful_steps(
    history: ReadingHistory,
    books: Mapping[str, Book],
    burn_in: int = BURN_IN,
    max_steps: int = MAX_USEFUL_PER_USER,
) -> list[UsefulStep]:
    """Useful steps past the burn-in, thinned to ``max_steps`` by keeping
    candidates at positions round(i*(n-1)/(max_steps-1)) for i in
    0..max_steps-1 (endpoints always survive)."""
    candidates = [
        inter
        for inter in history.interactions
        if inter.index >= burn_in and is_useful_step(inter, books[inter.book])
    ]
    if len(candidates) > max_steps:
        n = len(candidates)
        keep = sorted({round(i * (n - 1) / (max_steps - 1)) for i in range(max_steps)})
        candidates = [candidates[i] for i in keep]
    return [
        UsefulStep(
            user=history.user,
            step_index=inter.index,
            positive_book=inter.book,
            review=inter.review,
            rating=inter.rating,
        )
        for inter in candidates
    ]


@dataclass
class SplitSummary:
    n_train: int = 0
    n_validation: int = 0
    n_test: int = 0
    users_without_train: int = 0
    users_without_validation: int = 0


def make_splits(steps_by_user: Mapping[str, Sequence[UsefulStep]]) -> tuple[list[UsefulStep], SplitSummary]:
    """Last useful step -> test, second-to-last -> validation, earlier ->
    train. Users with fewer than 3 useful steps still contribute their
    test (and validation) samples."""
    labeled: list[UsefulStep] = []
    summary = SplitSummary()
    for user in sorted(steps_by_user):
        steps = sorted(steps_by_user[user], key=lambda s: s.step_index)
        if not steps:
            continue
        for i, step in enumerate(steps):
            if i == len(steps) - 1:
                split = Split.TEST
            elif i == len(steps) - 2:
                split = Split.VALIDATION
            else:
                split = Split.TRAIN
            labeled.append(replace(step, split=split))
        summary.n_test += 1
        if len(steps) >= 2:
            summary.n_validation += 1
        else:
            summary.users_without_validation += 1
        if len(steps) >= 3:
            summary.n_train += len(steps) - 2
        else:
            summary.users_without_train += 1
    return labeled, summary
