"""Network layers built on the autodiff tensor core."""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = [
    "xavier_uniform",
    "Linear",
    "LayerNorm",
    "MultiHeadSelfAttention",
    "TransformerBlock",
    "TransformerEncoder",
    "sinusoidal_positional_encoding",
]


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype) -> np.ndarray:
    bound = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear:
    """y = x W + b with x a vector or a matrix of row vectors."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32, bias: bool = True):
        self.d_in = d_in
        self.d_out = d_out
        self.W = T.parameter(xavier_uniform(rng, d_in, d_out, (d_in, d_out), dtype))
        self.b = T.parameter(np.zeros(d_out, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = T.matmul(x, self.W)
        if self.b is None:
            return out
        if out.data.ndim == 1:
            return T.add(out, self.b)
        return T.add_row(out, self.b)

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        params = {f"{prefix}.W": self.W}
        if self.b is not None:
            params[f"{prefix}.b"] = self.b
        return params


class LayerNorm:
    def __init__(self, dim: int, dtype=np.float32, eps: float = 1e-5):
        self.eps = eps
        self.gain = T.parameter(np.ones(dim, dtype=dtype))
        self.bias = T.parameter(np.zeros(dim, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        normed = T.layer_norm_rows(x, eps=self.eps)
        scaled = T.mul(normed, T.broadcast_rows(self.gain, x.shape[0]))
        return T.add_row(scaled, self.bias)

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.gain": self.gain, f"{prefix}.bias": self.bias}


def attention_mask(n_positions: int, n_real: int, causal: bool, dtype=np.float32) -> Optional[np.ndarray]:
    """Additive (0 / -inf) mask over key positions.

    Positions >= n_real are padding and masked out for every query. With
    ``causal`` set, position i may additionally attend only to j <= i.
    """
    if n_real >= n_positions and not causal:
        return None
    mask = np.zeros((n_positions, n_positions), dtype=dtype)
    if n_real < n_positions:
        mask[:, n_real:] = -np.inf
    if causal:
        mask[np.triu_indices(n_positions, k=1)] = -np.inf
        # keep padded queries' rows well-defined: they may see position 0
        if n_real < n_positions:
            mask[n_real:, 0] = 0.0
    return mask


class MultiHeadSelfAttention:
    """Standard scaled dot-product self-attention with h % heads == 0."""

    def __init__(self, d_hidden: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        if d_hidden % heads != 0:
            raise T.ShapeError(f"hidden size {d_hidden} not divisible by {heads} heads")
        self.d_hidden = d_hidden
        self.heads = heads
        self.d_head = d_hidden // heads
        self.wq = Linear(d_hidden, d_hidden, rng, dtype)
        # no key bias: a constant key shift moves every logit in a softmax
        # row equally, so the output is invariant to it
        self.wk = Linear(d_hidden, d_hidden, rng, dtype, bias=False)
        self.wv = Linear(d_hidden, d_hidden, rng, dtype)
        self.wo = Linear(d_hidden, d_hidden, rng, dtype)

    def __call__(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        q, k, v = self.wq(x), self.wk(x), self.wv(x)
        inv_sqrt = 1.0 / np.sqrt(self.d_head)
        head_outs = []
        for h in range(self.heads):
            lo, hi = h * self.d_head, (h + 1) * self.d_head
            qh = T.slice_cols(q, lo, hi)
            kh = T.slice_cols(k, lo, hi)
            vh = T.slice_cols(v, lo, hi)
            logits = T.scale(T.matmul(qh, T.transpose(kh)), inv_sqrt)
            weights = T.softmax_rows(logits, additive_mask=mask)
            head_outs.append(T.matmul(weights, vh))
        return self.wo(T.concat(head_outs, axis=1))

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name, lin in (("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("wo", self.wo)):
            params.update(lin.parameters(f"{prefix}.{name}"))
        return params


class TransformerBlock:
    """Post-norm block: LN(x + drop(attn(x))), LN(x + drop(ffn(x)))."""

    def __init__(self, d_hidden: int, heads: int, d_ff: int, dropout_p: float,
                 rng: np.random.Generator, dtype=np.float32):
        self.attn = MultiHeadSelfAttention(d_hidden, heads, rng, dtype)
        self.ln1 = LayerNorm(d_hidden, dtype)
        self.ff1 = Linear(d_hidden, d_ff, rng, dtype)
        self.ff2 = Linear(d_ff, d_hidden, rng, dtype)
        self.ln2 = LayerNorm(d_hidden, dtype)
        self.dropout_p = dropout_p

    def __call__(self, x: Tensor, mask: Optional[np.ndarray], training: bool,
                 rng: Optional[np.random.Generator]) -> Tensor:
        a = T.dropout(self.attn(x, mask), self.dropout_p, training, rng)
        x = self.ln1(T.add(x, a))
        f = T.dropout(self.ff2(T.ramp(self.ff1(x))), self.dropout_p, training, rng)
        return self.ln2(T.add(x, f))

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        params.update(self.attn.parameters(f"{prefix}.attn"))
        params.update(self.ln1.parameters(f"{prefix}.ln1"))
        params.update(self.ff1.parameters(f"{prefix}.ff1"))
        params.update(self.ff2.parameters(f"{prefix}.ff2"))
        params.update(self.ln2.parameters(f"{prefix}.ln2"))
        return params


class TransformerEncoder:
    def __init__(self, d_hidden: int, blocks: int, heads: int, d_ff: int, dropout_p: float,
                 rng: np.random.Generator, dtype=np.float32):
        self.blocks = [
            TransformerBlock(d_hidden, heads, d_ff, dropout_p, rng, dtype) for _ in range(blocks)
        ]

    def __call__(self, x: Tensor, mask: Optional[np.ndarray], training: bool,
                 rng: Optional[np.random.Generator]) -> Tensor:
        for block in self.blocks:
            x = block(x, mask, training, rng)
        return x

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for i, block in enumerate(self.blocks):
            params.update(block.parameters(f"{prefix}.block{i}"))
        return params


def sinusoidal_positional_encoding(n_positions: int, d_hidden: int, dtype=np.float32) -> np.ndarray:
    """PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...)."""
    if d_hidden % 2 != 0:
        raise T.ShapeError(f"positional encoding needs an even dim, got {d_hidden}")
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    i2 = np.arange(0, d_hidden, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i2 / d_hidden)
    pe = np.empty((n_positions, d_hidden), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe.astype(dtype)
