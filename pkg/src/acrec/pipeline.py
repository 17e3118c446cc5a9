"""End-to-end plumbing between raw corpus files and trained models.

``run_ingest`` turns raw books/interactions files into a prepared corpus
directory (extended descriptions attached, useful steps labeled with
splits, one AC text per useful step). ``load_prepared`` reads such a
directory back; ``corpus_texts``/``build_bank`` connect it to an
embedding provider.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .domain import Book, Interaction, ReadingHistory, Split
from .features import FeatureBank, build_feature_bank
from .ingest import (
    IngestError,
    UsefulStep,
    attach_extended,
    build_extended_descriptions,
    load_corpus,
    make_splits,
    sample_users_by_band,
    select_useful_steps,
    write_jsonl,
    read_jsonl,
)
from .taxonomy.extraction import LexiconExtractor
from .train import config_digest

__all__ = ["PreparedCorpus", "run_ingest", "load_prepared", "corpus_texts", "build_bank"]


@dataclass
class PreparedCorpus:
    books: dict[str, Book]
    histories: dict[str, ReadingHistory]  # dataset users only
    steps: list[UsefulStep]  # split-labeled
    ac_texts: dict[tuple[str, int], str]
    stats: dict = field(default_factory=dict)

    def steps_for(self, split: Split) -> list[UsefulStep]:
        return [s for s in self.steps if s.split == split]

    @property
    def catalog(self) -> tuple[str, ...]:
        return tuple(sorted(self.books))


def _ac_text_for(review: str, mode: str) -> str:
    """AC text for one useful step under the retrospective protocol: the
    statements extracted from the step's review, rendered in id order.
    ``verbatim`` short-circuits extraction; an extraction that drops
    every sentence falls back to the review so the text stays non-empty."""
    if mode == "verbatim":
        return review
    if mode == "lexicon":
        statements = LexiconExtractor().extract(review).statements
        rendered = " ".join(s.text for s in sorted(statements, key=lambda s: s.id))
        return rendered if rendered.strip() else review
    raise IngestError(f"unknown ac mode {mode!r} (expected verbatim or lexicon)")


def run_ingest(
    books_path: str | Path,
    interactions_path: str | Path,
    out_dir: Optional[str | Path] = None,
    per_band: Optional[int] = None,
    band_width: int = 50,
    min_books: int = 20,
    max_books: int = 500,
    seed: int = 0,
    ac_mode: str = "verbatim",
    burn_in: int = 15,
    max_steps: int = 20,
) -> PreparedCorpus:
    books, histories = load_corpus(books_path, interactions_path)

    warnings: list[str] = []
    if per_band is not None:
        sample = sample_users_by_band(
            histories, band_width=band_width, min_books=min_books,
            max_books=max_books, per_band=per_band, rng_seed=seed,
        )
        dataset_users = sample.users
        warnings.extend(sample.warnings)
    else:
        dataset_users = sorted(histories)

    # dataset users' reviews never leak into extended descriptions
    extended = build_extended_descriptions(books, histories, excluded_users=set(dataset_users))
    books = attach_extended(books, extended)
    dataset_histories = {u: histories[u] for u in dataset_users}

    steps_by_user = {
        u: select_useful_steps(h, books, burn_in=burn_in, max_steps=max_steps)
        for u, h in dataset_histories.items()
    }
    labeled, split_summary = make_splits(steps_by_user)
    ac_texts = {(s.user, s.step_index): _ac_text_for(s.review, ac_mode) for s in labeled}

    n_steps = sum(len(h.interactions) for h in dataset_histories.values())
    stats = {
        "n_users": len(dataset_histories),
        "n_steps": n_steps,
        "n_books": len(books),
        "n_useful": len(labeled),
        "split_summary": {
            "train": split_summary.n_train,
            "validation": split_summary.n_validation,
            "test": split_summary.n_test,
            "users_without_train": split_summary.users_without_train,
            "users_without_validation": split_summary.users_without_validation,
        },
        "warnings": warnings,
        "ac_mode": ac_mode,
    }
    prepared = PreparedCorpus(
        books=books, histories=dataset_histories, steps=labeled, ac_texts=ac_texts, stats=stats
    )
    if out_dir is not None:
        _write_prepared(prepared, Path(out_dir), seed)
    return prepared


def _write_prepared(prepared: PreparedCorpus, out: Path, seed: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    digest = config_digest({"stats": prepared.stats, "seed": seed})
    meta = {"config_digest": digest}
    write_jsonl(out / "books.jsonl", (b.to_record() for b in prepared.books.values()), meta=meta)
    write_jsonl(
        out / "interactions.jsonl",
        (i.to_record() for h in prepared.histories.values() for i in h.interactions),
        meta=meta,
    )
    write_jsonl(out / "splits.jsonl", (s.to_record() for s in prepared.steps), meta=meta)
    write_jsonl(
        out / "ac_texts.jsonl",
        (
            {"user_id": u, "step_index": ix, "text": text}
            for (u, ix), text in sorted(prepared.ac_texts.items())
        ),
        meta=meta,
    )
    (out / "stats.json").write_text(
        json.dumps({"config_digest": digest, **prepared.stats}, indent=2, sort_keys=True) + "\n",
        "utf-8",
    )


def load_prepared(corpus_dir: str | Path) -> PreparedCorpus:
    corpus_dir = Path(corpus_dir)
    book_recs, _ = read_jsonl(corpus_dir / "books.jsonl")
    books = {str(r["id"]): Book.from_record(r) for r in book_recs}

    inter_recs, _ = read_jsonl(corpus_dir / "interactions.jsonl")
    by_user: dict[str, list[Interaction]] = {}
    for rec in inter_recs:
        inter = Interaction.from_record(rec)
        by_user.setdefault(inter.user, []).append(inter)
    histories = {
        u: ReadingHistory(user=u, interactions=tuple(sorted(inters, key=lambda i: i.index)))
        for u, inters in by_user.items()
    }

    split_recs, _ = read_jsonl(corpus_dir / "splits.jsonl")
    review_by_key = {
        (u, i.index): i for u, h in histories.items() for i in h.interactions
    }
    steps = []
    for rec in split_recs:
        key = (str(rec["user_id"]), int(rec["step_index"]))
        inter = review_by_key.get(key)
        if inter is None:
            raise IngestError(f"splits reference unknown step {key}")
        steps.append(
            UsefulStep(
                user=key[0],
                step_index=key[1],
                positive_book=str(rec["book_id"]),
                review=inter.review,
                rating=inter.rating,
                split=Split(rec["split"]),
            )
        )

    ac_recs, _ = read_jsonl(corpus_dir / "ac_texts.jsonl")
    ac_texts = {(str(r["user_id"]), int(r["step_index"])): str(r["text"]) for r in ac_recs}

    stats = {}
    stats_path = corpus_dir / "stats.json"
    if stats_path.exists():
        stats = json.loads(stats_path.read_text("utf-8"))
    return PreparedCorpus(books=books, histories=histories, steps=steps, ac_texts=ac_texts, stats=stats)


def corpus_texts(prepared: PreparedCorpus) -> list[str]:
    """Every text the models need embedded: both description variants,
    the combined form, all dataset-user reviews, and the AC texts."""
    texts: set[str] = set()
    for book in prepared.books.values():
        texts.add(book.original_description)
        if book.extended_description.strip():
            texts.add(book.extended_description)
        texts.add(book.combined_description)
    for hist in prepared.histories.values():
        for inter in hist.interactions:
            if inter.review.strip():
                texts.add(inter.review)
    texts.update(prepared.ac_texts.values())
    return sorted(t for t in texts if t.strip())


def build_bank(prepared: PreparedCorpus, provider) -> FeatureBank:
    return build_feature_bank(
        prepared.books,
        prepared.histories,
        prepared.ac_texts,
        provider,
        users=sorted(prepared.histories),
    )
