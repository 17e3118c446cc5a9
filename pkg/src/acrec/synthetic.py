"""Synthetic separable corpus for end-to-end benchmarks.

Every book gets a private topic (a few random words) and a fixed
"essence" sentence sampled from it. Dataset users review a book with
exactly its essence, and the book's catalog description starts with that
essence, so the retrospective AC text appears verbatim in the positive's
description. Distinct books share almost no 3-grams under the hash
embedder, which makes the task strongly learnable and gives the raw
cosine baseline a near-perfect signal. A handful of short-history
outside reviewers provide extended-description text without entering
the dataset (band sampling excludes them).
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import write_jsonl

__all__ = ["SyntheticConfig", "generate_synthetic_corpus", "write_synthetic_corpus"]


@dataclass(frozen=True)
class SyntheticConfig:
    n_users: int = 60
    n_books: int = 400
    steps_per_user: int = 45
    n_outside_reviewers: int = 8
    outside_reviews_each: int = 12
    vocab_size: int = 3000
    topic_words: int = 8
    essence_tokens: int = 24
    description_tokens: int = 260
    seed: int = 0

    def __post_init__(self):
        if self.steps_per_user > self.n_books:
            raise ValueError("steps_per_user cannot exceed n_books")


def _make_vocab(rng: np.random.Generator, size: int) -> list[str]:
    letters = np.array(list(string.ascii_lowercase))
    words = set()
    while len(words) < size:
        n = int(rng.integers(5, 10))
        words.add("".join(rng.choice(letters, size=n)))
    return sorted(words)


def generate_synthetic_corpus(cfg: SyntheticConfig) -> tuple[list[dict], list[dict]]:
    """Returns (book_records, interaction_records) in the ingest file
    schemas."""
    rng = np.random.default_rng(cfg.seed)
    vocab = np.array(_make_vocab(rng, cfg.vocab_size))

    topics: list[np.ndarray] = []
    essences: list[str] = []
    books: list[dict] = []
    for b in range(cfg.n_books):
        topic = rng.choice(vocab, size=cfg.topic_words, replace=False)
        essence = " ".join(rng.choice(topic, size=cfg.essence_tokens))
        filler = " ".join(rng.choice(topic, size=cfg.description_tokens - cfg.essence_tokens))
        topics.append(topic)
        essences.append(essence)
        books.append(
            {
                "id": f"b{b:04d}",
                "title": " ".join(topic[:2]),
                "description": essence + " " + filler,
            }
        )

    interactions: list[dict] = []
    rating_choices = np.array([5, 5, 5, 4, 4, 3])
    for u in range(cfg.n_users):
        user = f"u{u:03d}"
        book_order = rng.choice(cfg.n_books, size=cfg.steps_per_user, replace=False)
        for t, b in enumerate(book_order):
            interactions.append(
                {
                    "user_id": user,
                    "book_id": f"b{int(b):04d}",
                    "rating": int(rng.choice(rating_choices)),
                    "review": essences[int(b)],
                    "timestamp": 1_000_000 + u * 10_000 + t,
                }
            )

    # short-history outsiders whose reviews become extended descriptions
    for o in range(cfg.n_outside_reviewers):
        user = f"ext{o:02d}"
        book_order = rng.choice(cfg.n_books, size=cfg.outside_reviews_each, replace=False)
        for t, b in enumerate(book_order):
            review = " ".join(rng.choice(topics[int(b)], size=12))
            interactions.append(
                {
                    "user_id": user,
                    "book_id": f"b{int(b):04d}",
                    "rating": int(rng.choice(rating_choices)),
                    "review": review,
                    "timestamp": 2_000_000 + o * 10_000 + t,
                }
            )
    return books, interactions


def write_synthetic_corpus(cfg: SyntheticConfig, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    books, interactions = generate_synthetic_corpus(cfg)
    books_path = out / "books.jsonl"
    inter_path = out / "interactions.jsonl"
    write_jsonl(books_path, books)
    write_jsonl(inter_path, interactions)
    return books_path, inter_path
