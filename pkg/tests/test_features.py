import numpy as np
import pytest

from acrec.domain import Book, Interaction, ReadingHistory
from acrec.embed import HashEmbedder
from acrec.features import FeatureError, build_feature_bank, build_sample_features, candidate_features
from acrec.ingest import UsefulStep
from acrec.model import decay_weights

DIM = 32


def small_corpus():
    books = {
        "full": Book("full", "t", "original words here", "extended words here"),
        "noext": Book("noext", "t", "original only text"),
        "noorig": Book("noorig", "t", "", "only outside reviews"),
        "bare": Book("bare", "t", "", ""),
    }
    inters = tuple(
        Interaction("u", book, 5, f"review text number {i}", i, i)
        for i, book in enumerate(["full", "noext", "noorig", "bare", "full"])
    )
    histories = {"u": ReadingHistory("u", inters)}
    ac_texts = {("u", 4): "something to feel"}
    return books, histories, ac_texts


@pytest.fixture()
def bank():
    books, histories, ac_texts = small_corpus()
    return build_feature_bank(books, histories, ac_texts, HashEmbedder(dim=DIM, seed=0))


def test_feature_scale_applied(bank):
    assert bank.feature_scale == pytest.approx(np.sqrt(DIM))
    row = bank.d_mat[bank.book_row("full")]
    assert np.linalg.norm(row) == pytest.approx(np.sqrt(DIM), rel=1e-5)


def test_empty_description_slots_are_zero_rows(bank):
    assert np.all(bank.e_mat[bank.book_row("noext")] == 0.0)
    assert np.all(bank.d_mat[bank.book_row("noorig")] == 0.0)
    assert np.all(bank.d_mat[bank.book_row("bare")] == 0.0)
    assert not np.all(bank.d_mat[bank.book_row("full")] == 0.0)


def test_bare_book_not_scorable_but_in_history(bank):
    assert "bare" not in bank.scorable_ids
    assert set(bank.scorable_ids) == {"full", "noext", "noorig"}
    # the bare book still has review embeddings for its history step
    assert bank.review_row("u", 3) >= 0


def test_cosines_reject_bare_books(bank):
    ac = bank.ac_vec("u", 4)
    rows = np.array([bank.book_row("bare")])
    with pytest.raises(ValueError, match="bare"):
        bank.cosines(ac, rows)
    ok_rows = np.array([bank.book_row(b) for b in ("full", "noext")])
    cos = bank.cosines(ac, ok_rows)
    assert np.all(np.abs(cos) <= 1.0 + 1e-6)


def test_missing_lookups_raise(bank):
    with pytest.raises(FeatureError, match="ghost"):
        bank.book_row("ghost")
    with pytest.raises(FeatureError):
        bank.review_row("u", 99)
    with pytest.raises(FeatureError):
        bank.ac_vec("u", 0)


def test_sample_features_window_and_prefix(bank):
    books, histories, _ = small_corpus()
    step = UsefulStep(user="u", step_index=4, positive_book="full",
                      review="review text number 4", rating=5)
    feats = build_sample_features(bank, histories["u"], step, m=3)
    # window = last 3 of the 4 earlier steps, most recent first
    assert feats.window_d.shape == (3, DIM)
    assert np.array_equal(feats.window_d[0], bank.d_mat[bank.book_row("bare")])
    assert np.array_equal(feats.window_d[2], bank.d_mat[bank.book_row("noext")])
    # prefix = the single oldest step, weighted by decay_weights(1) == [1]
    assert np.allclose(feats.prefix_dbar, bank.d_mat[bank.book_row("full")])
    assert feats.prefix_rating_weights[4] == pytest.approx(1.0)


def test_sample_features_decay_weighting(bank):
    books, histories, _ = small_corpus()
    step = UsefulStep(user="u", step_index=4, positive_book="full",
                      review="r", rating=5)
    feats = build_sample_features(bank, histories["u"], step, m=2)
    alpha = decay_weights(2).astype(np.float32)
    rows = [bank.book_row("full"), bank.book_row("noext")]
    expected = alpha[0] * bank.d_mat[rows[0]] + alpha[1] * bank.d_mat[rows[1]]
    assert np.allclose(feats.prefix_dbar, expected, atol=1e-6)


def test_candidate_features_with_cosine(bank):
    ac = bank.ac_vec("u", 4)
    cand = candidate_features(bank, ["full", "noext"], ac, with_cosine=True)
    assert cand.d_raw.shape == (2, DIM)
    assert cand.cosine.shape == (2,)
    no_cos = candidate_features(bank, ["full"], None, with_cosine=False)
    assert no_cos.cosine is None
    with pytest.raises(ValueError):
        candidate_features(bank, ["full"], None, with_cosine=True)
