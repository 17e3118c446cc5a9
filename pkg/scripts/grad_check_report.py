#!/usr/bin/env python3
"""Print finite-difference gradient-check results for every layer type
and the composed scoring model at toy dimensions (float64)."""

import sys
import time

import numpy as np

from acrec.model import AcRecModel, CandidateFeatures, ModelConfig, SampleFeatures
from acrec.numerics import (
    LayerNorm,
    Linear,
    MultiHeadSelfAttention,
    TransformerEncoder,
    attention_mask,
    grad_check,
)
from acrec.numerics import tensor as T

TOY = ModelConfig(
    d_raw=16, d_proj=4, d_rating=4, d_hidden=16, blocks=2, heads=4, m=4,
    dropout=0.2, fcn_hidden=(16, 8), use_cosine=False, d_ac=4,
)


def main():
    rng = np.random.default_rng(100)
    x = rng.normal(size=(4, 10))
    proj10 = rng.normal(size=(10,))
    proj16 = rng.normal(size=(16,))
    xa = rng.normal(size=(4, 16))
    mask = attention_mask(4, 3, causal=False, dtype=np.float64)

    lin = Linear(10, 10, rng, dtype=np.float64)
    ln = LayerNorm(10, dtype=np.float64)
    mhsa = MultiHeadSelfAttention(16, 4, rng, dtype=np.float64)
    enc = TransformerEncoder(16, 2, 4, 16, 0.0, rng, dtype=np.float64)
    p_act = T.parameter(rng.normal(size=(4, 10)))
    p_soft = T.parameter(rng.normal(size=(3, 8)))
    proj8 = rng.normal(size=(8,))
    p_drop = T.parameter(rng.normal(size=(5, 5)))
    proj5 = rng.normal(size=(5,))

    checks = {
        "linear": (lambda: T.sum_all(T.matmul(lin(T.constant(x)), T.constant(proj10))),
                   lin.parameters("lin")),
        "ramp": (lambda: T.sum_all(T.matmul(T.ramp(p_act), T.constant(proj10))), {"x": p_act}),
        "softmax": (lambda: T.sum_all(T.matmul(T.softmax_rows(p_soft), T.constant(proj8))),
                    {"x": p_soft}),
        "layer_norm": (lambda: T.sum_all(T.matmul(ln(T.constant(x)), T.constant(proj10))),
                       ln.parameters("ln")),
        "dropout": (lambda: T.sum_all(T.matmul(
            T.dropout(p_drop, 0.3, True, np.random.default_rng(12)), T.constant(proj5))),
            {"x": p_drop}),
        "attention": (lambda: T.sum_all(T.matmul(mhsa(T.constant(xa), mask), T.constant(proj16))),
                      mhsa.parameters("attn")),
        "transformer": (lambda: T.sum_all(T.matmul(enc(T.constant(xa), mask, False, None),
                                                   T.constant(proj16))),
                        enc.parameters("enc")),
    }

    model = AcRecModel(TOY, seed=6, dtype=np.float64)
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
    cand = CandidateFeatures(("a", "b", "c"), r.normal(size=(3, 16)), r.normal(size=(3, 16)))
    proj3 = r.normal(size=3)
    checks["composed_model"] = (
        lambda: T.sum_all(T.mul(model.score_sample(feats, cand), T.constant(proj3, np.float64))),
        model.parameters(),
    )

    worst_overall = 0.0
    for name, (fn, params) in checks.items():
        started = time.perf_counter()
        rep = grad_check(fn, params, rng=np.random.default_rng(7), samples_per_param=12)
        worst_overall = max(worst_overall, rep.max_rel_error)
        print(f"{name:16s} max_rel_err={rep.max_rel_error:.3e} "
              f"checked={rep.n_checked:4d} excluded={rep.n_excluded} "
              f"({time.perf_counter() - started:.1f}s)")
    print(f"{'OVERALL':16s} max_rel_err={worst_overall:.3e} "
          f"({'OK' if worst_overall < 1e-4 else 'TOO HIGH'})")
    return 0 if worst_overall < 1e-4 else 1


if __name__ == "__main__":
    sys.exit(main())
