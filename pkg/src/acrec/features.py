"""Raw-embedding feature bank and per-sample feature assembly.

The bank holds one float32 matrix per text family (original
descriptions, extended descriptions, combined descriptions, reviews)
plus the AC embedding per useful step. Books whose extended description
is empty get a zero row: that is a defined representation of "no
extended text", distinct from a missing embedding, which is an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import Book, ReadingHistory
from .ingest import UsefulStep
from .model import CandidateFeatures, SampleFeatures, decay_weights

__all__ = [
    "FeatureBank",
    "build_feature_bank",
    "history_features",
    "build_sample_features",
    "candidate_features",
]


class FeatureError(KeyError):
    pass


@dataclass
class FeatureBank:
    book_ids: tuple[str, ...]
    id_to_ix: dict[str, int]
    d_mat: np.ndarray  # (n_books, d_raw) original descriptions
    e_mat: np.ndarray  # (n_books, d_raw) extended descriptions (zero row if empty)
    c_mat: np.ndarray  # (n_books, d_raw) combined descriptions, unscaled
    c_norms: np.ndarray  # (n_books,)
    review_ix: dict[tuple[str, int], int]
    r_mat: np.ndarray  # (n_reviews, d_raw)
    ac_vecs: dict[tuple[str, int], np.ndarray]
    dim: int
    feature_scale: float = 1.0

    def scale_query(self, vec: np.ndarray) -> np.ndarray:
        """Apply the bank's feature conditioning to an ad-hoc raw vector
        (e.g. a per-request AC embedding)."""
        return (vec * self.feature_scale).astype(np.float32)

    @property
    def scorable_ids(self) -> tuple[str, ...]:
        """Books with at least one non-empty description: the candidate
        pool for negatives, ranking, and recommendations. Books outside
        it can still appear in histories (zero-vector text slots)."""
        return tuple(b for b in self.book_ids if self.c_norms[self.id_to_ix[b]] > 0.0)

    def book_row(self, book_id: str) -> int:
        try:
            return self.id_to_ix[book_id]
        except KeyError:
            raise FeatureError(f"no embeddings for book {book_id!r}") from None

    def review_row(self, user: str, index: int) -> int:
        try:
            return self.review_ix[(user, index)]
        except KeyError:
            raise FeatureError(f"no review embedding for user {user!r} step {index}") from None

    def ac_vec(self, user: str, step_index: int) -> np.ndarray:
        try:
            return self.ac_vecs[(user, step_index)]
        except KeyError:
            raise FeatureError(f"no AC embedding for user {user!r} step {step_index}") from None

    def cosines(self, ac_raw: np.ndarray, book_rows: np.ndarray) -> np.ndarray:
        """cos(ac, combined description) per candidate row."""
        ac_norm = float(np.linalg.norm(ac_raw))
        if ac_norm == 0.0:
            raise ValueError("cosine of a zero AC vector")
        norms = self.c_norms[book_rows]
        if np.any(norms == 0.0):
            bad = self.book_ids[int(book_rows[int(np.argmax(norms == 0.0))])]
            raise ValueError(f"book {bad!r} has no description text; not a scorable candidate")
        sims = self.c_mat[book_rows] @ ac_raw.astype(self.c_mat.dtype)
        return (sims / (norms * ac_norm)).astype(np.float32)


def build_feature_bank(
    books: Mapping[str, Book],
    histories: Mapping[str, ReadingHistory],
    ac_texts: Mapping[tuple[str, int], str],
    provider,
    users: Optional[Sequence[str]] = None,
) -> FeatureBank:
    """Embed every description, every dataset-user review, and every AC
    text through ``provider``. ``users`` limits whose reviews are
    embedded (defaults to everyone in ``histories``).

    Providers emit L2-normalized-scale vectors whose coordinates have
    variance ~1/dim; the bank rescales them by sqrt(dim) to unit
    per-coordinate variance so Xavier-initialized projections see inputs
    at their design scale. Combined-description vectors stay unscaled:
    they only feed cosines, which are scale-invariant.
    """
    dim = provider.config.dim
    scale = float(np.sqrt(dim))
    book_ids = tuple(sorted(books))
    id_to_ix = {bid: i for i, bid in enumerate(book_ids)}

    def embed_or_zero(text: str) -> np.ndarray:
        if not text.strip():
            return np.zeros(dim, dtype=np.float32)
        return provider.embed_text(text).values

    d_mat = np.stack([embed_or_zero(books[b].original_description) for b in book_ids])
    e_mat = np.stack([embed_or_zero(books[b].extended_description) for b in book_ids])
    c_mat = np.stack([embed_or_zero(books[b].combined_description) for b in book_ids])
    c_norms = np.linalg.norm(c_mat, axis=1)

    review_ix: dict[tuple[str, int], int] = {}
    review_rows: list[np.ndarray] = []
    selected = sorted(users) if users is not None else sorted(histories)
    for user in selected:
        for inter in histories[user].interactions:
            key = (user, inter.index)
            review_ix[key] = len(review_rows)
            review_rows.append(embed_or_zero(inter.review))
    r_mat = np.stack(review_rows) if review_rows else np.zeros((0, dim), dtype=np.float32)

    ac_vecs = {
        key: (provider.embed_text(text).values * scale).astype(np.float32)
        for key, text in ac_texts.items()
    }
    return FeatureBank(
        book_ids=book_ids,
        id_to_ix=id_to_ix,
        d_mat=(d_mat * scale).astype(np.float32),
        e_mat=(e_mat * scale).astype(np.float32),
        c_mat=c_mat.astype(np.float32),
        c_norms=c_norms.astype(np.float64),
        review_ix=review_ix,
        r_mat=(r_mat * scale).astype(np.float32),
        ac_vecs=ac_vecs,
        dim=dim,
        feature_scale=scale,
    )


def history_features(
    bank: FeatureBank,
    history: ReadingHistory,
    upto_index: int,
    m: int,
    ac_raw: np.ndarray,
) -> SampleFeatures:
    """Assemble the query-side features for a prediction at position
    ``upto_index``: the reversed last-m window of earlier steps and
    decay-weighted prefix averages of everything before the window."""
    past = history.interactions[:upto_index]
    n_window = min(m, upto_index)
    window = list(reversed(past[upto_index - n_window : upto_index]))
    prefix = past[: upto_index - n_window]

    w_book_rows = np.array([bank.book_row(i.book) for i in window], dtype=np.intp)
    w_review_rows = np.array([bank.review_row(i.user, i.index) for i in window], dtype=np.intp)
    window_ratings = np.array([i.rating for i in window], dtype=np.int64)

    dim = bank.dim
    if prefix:
        alpha = decay_weights(len(prefix)).astype(np.float32)
        p_book_rows = np.array([bank.book_row(i.book) for i in prefix], dtype=np.intp)
        p_review_rows = np.array([bank.review_row(i.user, i.index) for i in prefix], dtype=np.intp)
        dbar = alpha @ bank.d_mat[p_book_rows]
        ebar = alpha @ bank.e_mat[p_book_rows]
        rbar = alpha @ bank.r_mat[p_review_rows]
        rating_weights = np.zeros(5, dtype=np.float32)
        for a, inter in zip(alpha, prefix):
            rating_weights[inter.rating - 1] += a
    else:
        dbar = np.zeros(dim, dtype=np.float32)
        ebar = np.zeros(dim, dtype=np.float32)
        rbar = np.zeros(dim, dtype=np.float32)
        rating_weights = np.zeros(5, dtype=np.float32)

    return SampleFeatures(
        user=history.user,
        step_index=upto_index,
        window_d=bank.d_mat[w_book_rows],
        window_e=bank.e_mat[w_book_rows],
        window_r=bank.r_mat[w_review_rows],
        window_ratings=window_ratings,
        prefix_dbar=dbar,
        prefix_ebar=ebar,
        prefix_rbar=rbar,
        prefix_rating_weights=rating_weights,
        ac_raw=ac_raw,
    )


def build_sample_features(
    bank: FeatureBank,
    history: ReadingHistory,
    step: UsefulStep,
    m: int,
) -> SampleFeatures:
    """Features for one useful step under the retrospective protocol: the
    history before the step plus the step's own AC embedding."""
    return history_features(
        bank, history, step.step_index, m, bank.ac_vec(step.user, step.step_index)
    )


def candidate_features(
    bank: FeatureBank,
    book_ids: Sequence[str],
    ac_raw: Optional[np.ndarray] = None,
    with_cosine: bool = False,
) -> CandidateFeatures:
    rows = np.array([bank.book_row(b) for b in book_ids], dtype=np.intp)
    cos = None
    if with_cosine:
        if ac_raw is None:
            raise ValueError("cosine features need the AC raw embedding")
        cos = bank.cosines(ac_raw, rows)
    return CandidateFeatures(
        book_ids=tuple(book_ids),
        d_raw=bank.d_mat[rows],
        e_raw=bank.e_mat[rows],
        cosine=cos,
    )
