"""The scoring network and its baselines.

A consumed step is encoded as c = [d; e; r; g]: projections of the raw
original-description, extended-description, and review embeddings plus a
learned rating embedding (3*41 + 5 = 128 under defaults). Short-term
preference is the final-block Transformer hidden state at the most
recent item over the reversed last-m window; long-term preference is a
linearly-decaying weighted average of everything earlier. Candidates
drop the review slot and always carry the rating-5 embedding. A two-
hidden-layer FCN maps [lp; sp; s_b; ac] (optionally plus the raw cosine
between the AC text and the combined book description) to a scalar
score.

Baselines: raw-cosine ranking, and an FCN over three projected raw
embeddings (42/43/43 -> 128) with a configurable number of hidden
layers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import layers as L
from .numerics import tensor as T
from .numerics.tensor import Tensor

__all__ = [
    "ModelConfig",
    "FcnConfig",
    "SampleFeatures",
    "CandidateFeatures",
    "decay_weights",
    "cosine_similarity",
    "AcRecModel",
    "FcnModel",
    "CosineScorer",
]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_raw: int = 768
    d_proj: int = 41
    d_rating: int = 5
    d_hidden: int = 128
    blocks: int = 4
    heads: int = 4
    m: int = 30
    dropout: float = 0.2
    fcn_hidden: tuple[int, ...] = (256, 128)
    use_cosine: bool = False
    d_ac: int = 41
    causal_attention: bool = False

    def __post_init__(self):
        if 3 * self.d_proj + self.d_rating != self.d_hidden:
            raise ModelError(
                f"3*d_proj + d_rating must equal d_hidden: "
                f"3*{self.d_proj} + {self.d_rating} != {self.d_hidden}"
            )
        if self.m < 1 or self.blocks < 1:
            raise ModelError("m and blocks must be >= 1")
        if self.d_hidden % self.heads != 0:
            raise ModelError(f"d_hidden {self.d_hidden} not divisible by heads {self.heads}")
        if self.d_hidden % 2 != 0:
            raise ModelError("d_hidden must be even for positional encodings")

    @property
    def candidate_dim(self) -> int:
        return 2 * self.d_proj + self.d_rating

    @property
    def fcn_input_dim(self) -> int:
        base = 2 * self.d_hidden + self.candidate_dim + self.d_ac
        return base + 1 if self.use_cosine else base

    def to_dict(self) -> dict:
        return {
            "d_raw": self.d_raw,
            "d_proj": self.d_proj,
            "d_rating": self.d_rating,
            "d_hidden": self.d_hidden,
            "blocks": self.blocks,
            "heads": self.heads,
            "m": self.m,
            "dropout": self.dropout,
            "fcn_hidden": list(self.fcn_hidden),
            "use_cosine": self.use_cosine,
            "d_ac": self.d_ac,
            "causal_attention": self.causal_attention,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["fcn_hidden"] = tuple(d.get("fcn_hidden", (256, 128)))
        return cls(**d)


@dataclass(frozen=True)
class FcnConfig:
    d_raw: int = 768
    proj_dims: tuple[int, int, int] = (42, 43, 43)
    n_hidden: int = 3
    width: int = 128
    dropout: float = 0.2

    def __post_init__(self):
        if not 0 <= self.n_hidden <= 4:
            raise ModelError(f"n_hidden must be in 0..4, got {self.n_hidden}")
        if sum(self.proj_dims) != self.width:
            raise ModelError(f"projection dims {self.proj_dims} must sum to width {self.width}")

    def to_dict(self) -> dict:
        return {
            "d_raw": self.d_raw,
            "proj_dims": list(self.proj_dims),
            "n_hidden": self.n_hidden,
            "width": self.width,
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FcnConfig":
        d = dict(d)
        d["proj_dims"] = tuple(d.get("proj_dims", (42, 43, 43)))
        return cls(**d)


@dataclass(frozen=True)
class SampleFeatures:
    """Parameter-independent raw features for one (user, step) query.

    Window arrays are ordered most-recent-first (the Transformer's input
    order). Prefix aggregates are the decay-weighted averages of the raw
    vectors of every step before the window; all-zero when the window
    already covers the whole history.
    """

    user: str
    step_index: int
    window_d: np.ndarray  # (L, d_raw)
    window_e: np.ndarray
    window_r: np.ndarray
    window_ratings: np.ndarray  # (L,) ints in 1..5
    prefix_dbar: np.ndarray  # (d_raw,)
    prefix_ebar: np.ndarray
    prefix_rbar: np.ndarray
    prefix_rating_weights: np.ndarray  # (5,)
    ac_raw: np.ndarray  # (d_raw,)


@dataclass(frozen=True)
class CandidateFeatures:
    book_ids: tuple[str, ...]
    d_raw: np.ndarray  # (n, d_raw)
    e_raw: np.ndarray  # (n, d_raw)
    cosine: Optional[np.ndarray] = None  # (n,) cos(ac, combined description)


def decay_weights(n: int) -> np.ndarray:
    """Linearly increasing weights a_k = 2k / (n (n+1)), k = 1..n.

    Nonnegative, strictly increasing, summing to 1: the most recent
    prefix item carries the largest weight."""
    if n < 0:
        raise ModelError(f"decay_weights needs n >= 0, got {n}")
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    k = np.arange(1, n + 1, dtype=np.float64)
    return 2.0 * k / (n * (n + 1))


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ModelError("cosine similarity of a zero vector")
    return float(np.dot(a, b) / (na * nb))


def _onehot_ratings(ratings: np.ndarray, dtype) -> np.ndarray:
    out = np.zeros((len(ratings), 5), dtype=dtype)
    for i, r in enumerate(ratings):
        if not 1 <= int(r) <= 5:
            raise ModelError(f"rating {r} outside [1,5]")
        out[i, int(r) - 1] = 1.0
    return out


class AcRecModel:
    """Transformer + FCN scorer. Parameters live in float32 for training
    and float64 when gradient checking."""

    name = "acrec"

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        c = config
        self.w_d = T.parameter(L.xavier_uniform(rng, c.d_raw, c.d_proj, (c.d_raw, c.d_proj), dtype))
        self.w_e = T.parameter(L.xavier_uniform(rng, c.d_raw, c.d_proj, (c.d_raw, c.d_proj), dtype))
        self.w_r = T.parameter(L.xavier_uniform(rng, c.d_raw, c.d_proj, (c.d_raw, c.d_proj), dtype))
        self.w_a = T.parameter(L.xavier_uniform(rng, c.d_raw, c.d_ac, (c.d_raw, c.d_ac), dtype))
        self.rating_table = T.parameter(L.xavier_uniform(rng, 5, c.d_rating, (5, c.d_rating), dtype))
        self.encoder = L.TransformerEncoder(
            c.d_hidden, c.blocks, c.heads, d_ff=c.d_hidden, dropout_p=c.dropout, rng=rng, dtype=dtype
        )
        dims = [c.fcn_input_dim, *c.fcn_hidden]
        self.fcn_hidden = [
            L.Linear(dims[i], dims[i + 1], rng, dtype) for i in range(len(dims) - 1)
        ]
        self.fcn_out = L.Linear(dims[-1], 1, rng, dtype)
        self._pe = L.sinusoidal_positional_encoding(c.m, c.d_hidden, dtype)

    def parameters(self) -> dict[str, Tensor]:
        params = {
            "proj.w_d": self.w_d,
            "proj.w_e": self.w_e,
            "proj.w_r": self.w_r,
            "proj.w_a": self.w_a,
            "rating_table": self.rating_table,
        }
        params.update(self.encoder.parameters("encoder"))
        for i, lin in enumerate(self.fcn_hidden):
            params.update(lin.parameters(f"fcn.h{i}"))
        params.update(self.fcn_out.parameters("fcn.out"))
        return params

    # -- per-piece encoders ------------------------------------------------

    def encode_step(self, d_raw: np.ndarray, e_raw: np.ndarray, r_raw: np.ndarray, rating: int) -> Tensor:
        """c = [W_d d; W_e e; W_r r; rating embedding], length d_hidden."""
        for name, arr in (("original", d_raw), ("extended", e_raw), ("review", r_raw)):
            if arr is None:
                raise ModelError(f"missing raw {name} embedding")
        onehot = _onehot_ratings(np.array([rating]), self.dtype)
        g = T.row(T.matmul(T.constant(onehot, self.dtype), self.rating_table), 0)
        return T.concat(
            [
                T.matmul(T.constant(d_raw, self.dtype), self.w_d),
                T.matmul(T.constant(e_raw, self.dtype), self.w_e),
                T.matmul(T.constant(r_raw, self.dtype), self.w_r),
                g,
            ],
            axis=0,
        )

    def encode_candidate(self, d_raw: np.ndarray, e_raw: np.ndarray) -> Tensor:
        """s_b = [W_d d; W_e e; rating-5 embedding]; no review slot."""
        if d_raw is None or e_raw is None:
            raise ModelError("missing raw description embedding for candidate")
        return T.concat(
            [
                T.matmul(T.constant(d_raw, self.dtype), self.w_d),
                T.matmul(T.constant(e_raw, self.dtype), self.w_e),
                T.row(self.rating_table, 4),
            ],
            axis=0,
        )

    def encode_ac(self, ac_raw: np.ndarray) -> Tensor:
        if ac_raw is None:
            raise ModelError("missing raw AC embedding")
        return T.matmul(T.constant(ac_raw, self.dtype), self.w_a)

    # -- preference encoders -----------------------------------------------

    def _window_matrix(self, feats: SampleFeatures) -> Tensor:
        onehot = _onehot_ratings(feats.window_ratings, self.dtype)
        return T.concat(
            [
                T.matmul(T.constant(feats.window_d, self.dtype), self.w_d),
                T.matmul(T.constant(feats.window_e, self.dtype), self.w_e),
                T.matmul(T.constant(feats.window_r, self.dtype), self.w_r),
                T.matmul(T.constant(onehot, self.dtype), self.rating_table),
            ],
            axis=1,
        )

    def short_term(self, feats: SampleFeatures, training: bool = False,
                   rng: Optional[np.random.Generator] = None) -> Tensor:
        """sp: final-block hidden state at the most recent item, computed
        over the reversed window left-padded to m with a key mask."""
        n_real = feats.window_d.shape[0]
        if n_real == 0:
            raise ModelError("short_term requires a non-empty window")
        if n_real > self.config.m:
            raise ModelError(f"window of {n_real} exceeds m={self.config.m}")
        c = self._window_matrix(feats)  # (L, d_hidden), most recent first
        c = T.add(c, T.constant(self._pe[:n_real], self.dtype))
        if n_real < self.config.m:
            pad = T.constant(
                np.zeros((self.config.m - n_real, self.config.d_hidden), dtype=self.dtype)
            )
            c = T.concat([c, pad], axis=0)
        mask = L.attention_mask(self.config.m, n_real, self.config.causal_attention, self.dtype)
        out = self.encoder(c, mask, training, rng)
        return T.row(out, 0)

    def long_term(self, feats: SampleFeatures) -> Tensor:
        """lp from the precomputed decay-weighted prefix averages; exact
        because the step encoding is linear in the raw vectors."""
        g = T.matmul(T.constant(feats.prefix_rating_weights, self.dtype), self.rating_table)
        return T.concat(
            [
                T.matmul(T.constant(feats.prefix_dbar, self.dtype), self.w_d),
                T.matmul(T.constant(feats.prefix_ebar, self.dtype), self.w_e),
                T.matmul(T.constant(feats.prefix_rbar, self.dtype), self.w_r),
                g,
            ],
            axis=0,
        )

    # -- scoring -------------------------------------------------------------

    def score(self, lp: Tensor, sp: Tensor, candidates: Tensor, ac: Tensor,
              cosine_feature: Optional[np.ndarray] = None, training: bool = False,
              rng: Optional[np.random.Generator] = None) -> Tensor:
        """Scores for a batch of candidate rows: w3 f(W2 f(W1 [lp;sp;s_b;ac]))."""
        if self.config.use_cosine and cosine_feature is None:
            raise ModelError("use_cosine is set but no cosine feature was provided")
        if not self.config.use_cosine and cosine_feature is not None:
            raise ModelError("cosine feature provided but use_cosine is off")
        n = candidates.shape[0]
        parts = [
            T.broadcast_rows(lp, n),
            T.broadcast_rows(sp, n),
            candidates,
            T.broadcast_rows(ac, n),
        ]
        if cosine_feature is not None:
            parts.append(T.constant(cosine_feature.reshape(n, 1), self.dtype))
        x = T.concat(parts, axis=1)
        for lin in self.fcn_hidden:
            x = T.dropout(T.ramp(lin(x)), self.config.dropout, training, rng)
        return T.flatten(self.fcn_out(x))

    def encode_candidates(self, cand: CandidateFeatures) -> Tensor:
        rating5 = T.row(self.rating_table, 4)
        n = cand.d_raw.shape[0]
        return T.concat(
            [
                T.matmul(T.constant(cand.d_raw, self.dtype), self.w_d),
                T.matmul(T.constant(cand.e_raw, self.dtype), self.w_e),
                T.broadcast_rows(rating5, n),
            ],
            axis=1,
        )

    def score_sample(self, feats: SampleFeatures, cand: CandidateFeatures,
                     training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        lp = self.long_term(feats)
        sp = self.short_term(feats, training, rng)
        ac = self.encode_ac(feats.ac_raw)
        s = self.encode_candidates(cand)
        cos = cand.cosine if self.config.use_cosine else None
        return self.score(lp, sp, s, ac, cos, training, rng)


class FcnModel:
    """Text-only baseline: raw original/extended/AC embeddings through
    three ramp projections (42/43/43), concatenated to 128, then n hidden
    ramp layers and a linear output. No history, no ratings."""

    name = "fcn"

    def __init__(self, config: FcnConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        pd, pe, pa = config.proj_dims
        self.proj_d = L.Linear(config.d_raw, pd, rng, dtype)
        self.proj_e = L.Linear(config.d_raw, pe, rng, dtype)
        self.proj_a = L.Linear(config.d_raw, pa, rng, dtype)
        self.hidden = [
            L.Linear(config.width, config.width, rng, dtype) for _ in range(config.n_hidden)
        ]
        self.out = L.Linear(config.width, 1, rng, dtype)

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        params.update(self.proj_d.parameters("proj_d"))
        params.update(self.proj_e.parameters("proj_e"))
        params.update(self.proj_a.parameters("proj_a"))
        for i, lin in enumerate(self.hidden):
            params.update(lin.parameters(f"h{i}"))
        params.update(self.out.parameters("out"))
        return params

    def score_sample(self, feats: SampleFeatures, cand: CandidateFeatures,
                     training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        n = cand.d_raw.shape[0]
        d = T.ramp(self.proj_d(T.constant(cand.d_raw, self.dtype)))
        e = T.ramp(self.proj_e(T.constant(cand.e_raw, self.dtype)))
        a = T.ramp(self.proj_a(T.constant(feats.ac_raw, self.dtype)))
        x = T.concat([d, e, T.broadcast_rows(a, n)], axis=1)
        for lin in self.hidden:
            x = T.dropout(T.ramp(lin(x)), self.config.dropout, training, rng)
        return T.flatten(self.out(x))


class CosineScorer:
    """Ranks purely by cos(ac, original+extended); nothing to train."""

    name = "cosine"

    def __init__(self):
        pass

    def parameters(self) -> dict[str, Tensor]:
        return {}

    def score_sample(self, feats: SampleFeatures, cand: CandidateFeatures,
                     training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        if cand.cosine is None:
            raise ModelError("cosine scorer requires precomputed cosine features")
        return T.constant(cand.cosine, np.float32)
