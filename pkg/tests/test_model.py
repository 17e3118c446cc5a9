import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acrec.evaluation import ranked_result_from_scores
from acrec.model import (
    AcRecModel,
    CandidateFeatures,
    CosineScorer,
    FcnConfig,
    FcnModel,
    ModelConfig,
    ModelError,
    SampleFeatures,
    cosine_similarity,
    decay_weights,
)
from acrec.numerics import grad_check
from acrec.numerics import tensor as T

from conftest import TOY_CONFIG


def toy_features(rng, config=TOY_CONFIG, window=3, prefix=True):
    d = config.d_raw

    def unit(shape):
        v = rng.normal(size=shape).astype(np.float32)
        return v

    return SampleFeatures(
        user="u",
        step_index=window,
        window_d=unit((window, d)),
        window_e=unit((window, d)),
        window_r=unit((window, d)),
        window_ratings=rng.integers(1, 6, size=window),
        prefix_dbar=unit(d) if prefix else np.zeros(d, dtype=np.float32),
        prefix_ebar=unit(d) if prefix else np.zeros(d, dtype=np.float32),
        prefix_rbar=unit(d) if prefix else np.zeros(d, dtype=np.float32),
        prefix_rating_weights=(
            np.array([0.1, 0.0, 0.2, 0.3, 0.4], dtype=np.float32)
            if prefix
            else np.zeros(5, dtype=np.float32)
        ),
        ac_raw=unit(d),
    )


def toy_candidates(rng, n, config=TOY_CONFIG, cosine=False):
    return CandidateFeatures(
        book_ids=tuple(f"b{i}" for i in range(n)),
        d_raw=rng.normal(size=(n, config.d_raw)).astype(np.float32),
        e_raw=rng.normal(size=(n, config.d_raw)).astype(np.float32),
        cosine=rng.uniform(-1, 1, size=n).astype(np.float32) if cosine else None,
    )


# -- config invariants --------------------------------------------------------


def test_default_config_dimensions():
    c = ModelConfig()
    assert 3 * c.d_proj + c.d_rating == 128
    assert c.candidate_dim == 87  # 2*41 + 5
    assert c.fcn_input_dim == 128 + 128 + 87 + 41 == 384
    assert ModelConfig(use_cosine=True).fcn_input_dim == 385
    assert c.m == 30 and c.blocks == 4 and c.dropout == 0.2


def test_config_rejects_inconsistent_dims():
    with pytest.raises(ModelError):
        ModelConfig(d_proj=40)  # 3*40+5 != 128
    with pytest.raises(ModelError):
        ModelConfig(heads=5)


# -- long-term decay weights ---------------------------------------------------


def test_decay_weights_small_case():
    w = decay_weights(3)
    assert np.allclose(w, [1 / 6, 1 / 3, 1 / 2], atol=1e-15)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_decay_weights_single_item():
    assert np.array_equal(decay_weights(1), [1.0])


def test_decay_weights_oracle_full_range():
    """Closed-form check over every length 1..10_000 in float64."""
    for n in range(1, 10_001):
        w = decay_weights(n)
        k = np.arange(1, n + 1, dtype=np.float64)
        assert np.all(np.abs(w - 2.0 * k / (n * (n + 1))) <= 1e-12)
        assert abs(w.sum() - 1.0) <= 1e-12
        if n > 1:
            assert np.all(np.diff(w) > 0)
        assert np.all(w >= 0)


# -- encoders -----------------------------------------------------------------


def test_encode_step_is_128_under_defaults(rng):
    model = AcRecModel(ModelConfig(), seed=0)
    c = model.encode_step(
        rng.normal(size=768).astype(np.float32),
        rng.normal(size=768).astype(np.float32),
        rng.normal(size=768).astype(np.float32),
        rating=5,
    )
    assert c.shape == (128,)


def test_encode_step_deterministic(rng):
    model = AcRecModel(ModelConfig(), seed=0)
    d = rng.normal(size=768).astype(np.float32)
    e = rng.normal(size=768).astype(np.float32)
    r = rng.normal(size=768).astype(np.float32)
    assert np.array_equal(model.encode_step(d, e, r, 4).data, model.encode_step(d, e, r, 4).data)


def test_rating_changes_only_last_five_coords(rng):
    model = AcRecModel(ModelConfig(), seed=0)
    d = rng.normal(size=768).astype(np.float32)
    e = rng.normal(size=768).astype(np.float32)
    r = rng.normal(size=768).astype(np.float32)
    c4 = model.encode_step(d, e, r, 4).data
    c5 = model.encode_step(d, e, r, 5).data
    assert np.array_equal(c4[:123], c5[:123])
    assert not np.array_equal(c4[123:], c5[123:])


def test_encode_candidate_is_87_and_uses_rating_five(rng):
    model = AcRecModel(ModelConfig(), seed=0)
    d = rng.normal(size=768).astype(np.float32)
    e = rng.normal(size=768).astype(np.float32)
    s = model.encode_candidate(d, e)
    assert s.shape == (87,)
    assert np.array_equal(s.data[82:], model.rating_table.data[4])


def test_candidate_content_determined(rng):
    model = AcRecModel(ModelConfig(), seed=0)
    d = rng.normal(size=768).astype(np.float32)
    e = rng.normal(size=768).astype(np.float32)
    assert np.array_equal(model.encode_candidate(d, e).data, model.encode_candidate(d, e).data)


def test_candidate_path_has_no_review_parameter():
    import inspect

    sig = inspect.signature(AcRecModel.encode_candidate)
    assert "r_raw" not in sig.parameters
    assert "review" not in sig.parameters
    sig2 = inspect.signature(CandidateFeatures)
    assert "review" not in sig2.parameters and "r_raw" not in sig2.parameters


def test_encode_ac_is_41_and_missing_raw_errors(rng):
    model = AcRecModel(ModelConfig(), seed=0)
    assert model.encode_ac(rng.normal(size=768).astype(np.float32)).shape == (41,)
    with pytest.raises(ModelError):
        model.encode_ac(None)
    with pytest.raises(ModelError):
        model.encode_step(None, None, None, 5)


# -- preference encoders ------------------------------------------------------


def test_short_term_deterministic_and_window_bounds(rng):
    model = AcRecModel(TOY_CONFIG, seed=1)
    feats = toy_features(rng)
    a = model.short_term(feats).data
    b = model.short_term(feats).data
    assert np.array_equal(a, b)
    too_wide = toy_features(rng, window=TOY_CONFIG.m + 1)
    with pytest.raises(ModelError):
        model.short_term(too_wide)
    empty = toy_features(rng, window=0)
    with pytest.raises(ModelError):
        model.short_term(empty)


def test_short_term_position_sensitivity(rng):
    """Swapping two older window items changes sp (positional encoding)."""
    model = AcRecModel(TOY_CONFIG, seed=1)
    feats = toy_features(rng, window=4)
    swapped = SampleFeatures(
        user=feats.user,
        step_index=feats.step_index,
        window_d=feats.window_d[[0, 2, 1, 3]],
        window_e=feats.window_e[[0, 2, 1, 3]],
        window_r=feats.window_r[[0, 2, 1, 3]],
        window_ratings=feats.window_ratings[[0, 2, 1, 3]],
        prefix_dbar=feats.prefix_dbar,
        prefix_ebar=feats.prefix_ebar,
        prefix_rbar=feats.prefix_rbar,
        prefix_rating_weights=feats.prefix_rating_weights,
        ac_raw=feats.ac_raw,
    )
    assert not np.allclose(model.short_term(feats).data, model.short_term(swapped).data)


def test_padded_window_equals_unpadded_computation(rng):
    """A window shorter than m, padded and masked, must give the same sp
    as running the encoder on just the real rows."""
    from acrec.numerics import attention_mask

    model = AcRecModel(TOY_CONFIG, seed=2)
    feats = toy_features(rng, window=2)
    sp = model.short_term(feats).data

    c = model._window_matrix(feats)
    c = T.add(c, T.constant(model._pe[:2], np.float32))
    out = model.encoder(c, None, False, None)
    direct = T.row(out, 0).data
    assert np.allclose(sp, direct, atol=1e-5)


def test_long_term_zero_prefix_gives_zero_vector(rng):
    model = AcRecModel(TOY_CONFIG, seed=1)
    feats = toy_features(rng, prefix=False)
    assert np.allclose(model.long_term(feats).data, 0.0)


def test_long_term_single_prefix_item_equals_its_encoding(rng):
    model = AcRecModel(ModelConfig(), seed=0)
    d = rng.normal(size=768).astype(np.float32)
    e = rng.normal(size=768).astype(np.float32)
    r = rng.normal(size=768).astype(np.float32)
    feats = SampleFeatures(
        user="u", step_index=31,
        window_d=np.zeros((1, 768), np.float32),
        window_e=np.zeros((1, 768), np.float32),
        window_r=np.zeros((1, 768), np.float32),
        window_ratings=np.array([5]),
        prefix_dbar=d, prefix_ebar=e, prefix_rbar=r,
        prefix_rating_weights=np.array([0, 0, 0, 1, 0], np.float32),
        ac_raw=np.zeros(768, np.float32),
    )
    lp = model.long_term(feats).data
    c = model.encode_step(d, e, r, rating=4).data
    assert np.allclose(lp, c, atol=1e-6)


# -- scoring ------------------------------------------------------------------


def test_zero_weights_give_zero_scores(rng):
    model = AcRecModel(TOY_CONFIG, seed=3)
    for p in model.parameters().values():
        p.data[...] = 0.0
    feats = toy_features(rng)
    cand = toy_candidates(rng, 4)
    scores = model.score_sample(feats, cand)
    assert np.allclose(scores.data, 0.0)


def test_cosine_flag_contract(rng):
    model = AcRecModel(TOY_CONFIG, seed=3)
    feats = toy_features(rng)
    with_cos = toy_candidates(rng, 3, cosine=True)
    with pytest.raises(ModelError, match="use_cosine is off"):
        model.score(
            model.long_term(feats), model.short_term(feats),
            model.encode_candidates(with_cos), model.encode_ac(feats.ac_raw),
            cosine_feature=with_cos.cosine,
        )
    cos_config = ModelConfig(
        d_raw=TOY_CONFIG.d_raw, d_proj=4, d_rating=4, d_hidden=16, blocks=2, heads=4,
        m=4, fcn_hidden=(16, 8), d_ac=4, use_cosine=True,
    )
    cos_model = AcRecModel(cos_config, seed=3)
    without = toy_candidates(rng, 3, cosine=False)
    with pytest.raises(ModelError, match="no cosine feature"):
        cos_model.score_sample(feats, without)


def test_score_purity(rng):
    model = AcRecModel(TOY_CONFIG, seed=4)
    feats = toy_features(rng)
    cand = toy_candidates(rng, 5)
    a = model.score_sample(feats, cand).data
    b = model.score_sample(feats, cand).data
    assert np.array_equal(a, b)


def test_monotone_cosine_path(rng):
    """With nonnegative FCN weights downstream, a larger cosine feature
    never lowers the score."""
    config = ModelConfig(
        d_raw=TOY_CONFIG.d_raw, d_proj=4, d_rating=4, d_hidden=16, blocks=2, heads=4,
        m=4, fcn_hidden=(16, 8), d_ac=4, use_cosine=True,
    )
    model = AcRecModel(config, seed=5)
    for name, p in model.parameters().items():
        if name.startswith("fcn."):
            p.data[...] = np.abs(p.data)
    feats = toy_features(rng)
    base = toy_candidates(rng, 1, cosine=False)
    lows = CandidateFeatures(base.book_ids, base.d_raw, base.e_raw,
                             cosine=np.array([0.1], np.float32))
    highs = CandidateFeatures(base.book_ids, base.d_raw, base.e_raw,
                              cosine=np.array([0.9], np.float32))
    assert model.score_sample(feats, highs).data[0] >= model.score_sample(feats, lows).data[0]


# -- cosine similarity + baseline ranking -------------------------------------


def test_cosine_similarity_identities(rng):
    v = rng.normal(size=16)
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-6)
    assert cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-6)
    a = np.zeros(4)
    a[0] = 1.0
    b = np.zeros(4)
    b[1] = 1.0
    assert cosine_similarity(a, b) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ModelError):
        cosine_similarity(np.zeros(4), b)


def test_cosine_baseline_identical_description_ranks_first(rng):
    ac = rng.normal(size=32)
    scores = [cosine_similarity(ac, ac)] + [
        cosine_similarity(ac, rng.normal(size=32)) for _ in range(10)
    ]
    ids = ["gt"] + [f"n{i}" for i in range(10)]
    result = ranked_result_from_scores("q", ids, scores, "gt")
    assert result.ground_truth_rank == 1


def test_equal_scores_order_by_book_id():
    result = ranked_result_from_scores("q", ["z", "a", "m"], [0.5, 0.5, 0.5], "m")
    assert result.book_ids == ("a", "z", "m")  # gt loses its tie
    assert result.ground_truth_rank == 3


# -- FCN baseline -------------------------------------------------------------


def test_fcn_projection_dims_sum_to_width():
    c = FcnConfig()
    assert c.proj_dims == (42, 43, 43)
    assert sum(c.proj_dims) == 128
    with pytest.raises(ModelError):
        FcnConfig(n_hidden=5)


def test_fcn_zero_hidden_is_linear_head(rng):
    model = FcnModel(FcnConfig(n_hidden=0, d_raw=16), seed=0)
    assert model.hidden == []
    feats = toy_features(rng)
    cand = toy_candidates(rng, 4)
    assert model.score_sample(feats, cand).shape == (4,)


def test_fcn_ignores_history(rng):
    model = FcnModel(FcnConfig(n_hidden=2, d_raw=16), seed=0)
    f1 = toy_features(rng, window=3)
    f2 = SampleFeatures(
        user=f1.user, step_index=f1.step_index,
        window_d=np.flip(f1.window_d, 0).copy(), window_e=np.flip(f1.window_e, 0).copy(),
        window_r=np.flip(f1.window_r, 0).copy(), window_ratings=f1.window_ratings,
        prefix_dbar=f1.prefix_dbar * 2, prefix_ebar=f1.prefix_ebar,
        prefix_rbar=f1.prefix_rbar, prefix_rating_weights=f1.prefix_rating_weights,
        ac_raw=f1.ac_raw,
    )
    cand = toy_candidates(rng, 3)
    assert np.array_equal(model.score_sample(f1, cand).data, model.score_sample(f2, cand).data)


def test_cosine_scorer_requires_cosines(rng):
    cand = toy_candidates(rng, 3, cosine=False)
    with pytest.raises(ModelError):
        CosineScorer().score_sample(toy_features(rng), cand)


# -- full-model gradient check ------------------------------------------------


def test_full_model_grad_check_toy_dims(rng):
    model = AcRecModel(TOY_CONFIG, seed=6, dtype=np.float64)
    r = np.random.default_rng(10)
    feats = SampleFeatures(
        user="u", step_index=4,
        window_d=r.normal(size=(3, 16)), window_e=r.normal(size=(3, 16)),
        window_r=r.normal(size=(3, 16)), window_ratings=np.array([5, 4, 2]),
        prefix_dbar=r.normal(size=16), prefix_ebar=r.normal(size=16),
        prefix_rbar=r.normal(size=16),
        prefix_rating_weights=np.array([0.1, 0.2, 0.3, 0.2, 0.2]),
        ac_raw=r.normal(size=16),
    )
    cand = CandidateFeatures(
        book_ids=("a", "b", "c"),
        d_raw=r.normal(size=(3, 16)),
        e_raw=r.normal(size=(3, 16)),
    )
    proj = r.normal(size=3)

    def f():
        scores = model.score_sample(feats, cand, training=False)
        return T.sum_all(T.mul(scores, T.constant(proj, np.float64)))

    report = grad_check(f, model.parameters(), rng=np.random.default_rng(11),
                        samples_per_param=6)
    assert report.max_rel_error < 1e-4


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_scoring_batch_matches_singletons(seed):
    """Scoring candidates in one batch equals scoring them one at a time."""
    r = np.random.default_rng(seed)
    model = AcRecModel(TOY_CONFIG, seed=7)
    feats = toy_features(r)
    cand = toy_candidates(r, 4)
    batch = model.score_sample(feats, cand).data
    for i in range(4):
        single = CandidateFeatures(
            (cand.book_ids[i],), cand.d_raw[i : i + 1], cand.e_raw[i : i + 1]
        )
        assert model.score_sample(feats, single).data[0] == pytest.approx(
            batch[i], abs=1e-5
        )
