"""Transformer encoder with an exact forward pass and analytic gradients.

The architecture is the classic post-norm encoder stack: token + position
embeddings with a LayerNorm, then per layer multi-head scaled-dot-product
self-attention with pad masking, add & norm, GELU feed-forward, add & norm.
Masked-token logits come from the final hidden states multiplied by the
tied token-embedding table plus an output bias.  There are no segment
embeddings: inputs are single short texts.

Everything is plain numpy so the backward pass can be written out exactly
and checked coordinate-by-coordinate against central finite differences.
Training math runs in float32 by default; passing float64 parameters runs
the identical code path in double precision for gradient verification.

Dropout (embedding output, attention probabilities, attention output,
feed-forward output) is active only in train mode and is drawn from a
generator seeded per call, so a forward pass is a deterministic function
of (params, inputs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.special import erf

from .errors import IdOutOfRange, SequenceTooLong

LN_EPS = 1e-12
INIT_STD = 0.02
INIT_TRUNC = 2.0  # in units of INIT_STD
MASK_BIAS = -1e9
IGNORE_INDEX = -1

_INV_SQRT_2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture hyperparameters.

    Defaults are the desk-scale configuration; the full-scale setting
    (12 layers, 12 heads, hidden 768, 512 positions) is reached purely
    through these fields.
    """

    layers: int = 2
    heads: int = 2
    hidden: int = 128
    ff_dim: int = 512
    vocab_size: int = 8000
    max_positions: int = 128
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.hidden % self.heads != 0:
            raise ValueError("hidden must be divisible by heads")
        if self.max_positions < 3:
            raise ValueError("max_positions must be >= 3")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.vocab_size < 5:
            raise ValueError("vocab_size must hold the special tokens")

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


def param_shapes(cfg: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Canonical tensor names and shapes, in serialization order."""
    h, f, v = cfg.hidden, cfg.ff_dim, cfg.vocab_size
    shapes: dict[str, tuple[int, ...]] = {
        "token_embedding": (v, h),
        "position_embedding": (cfg.max_positions, h),
        "embedding_ln_gain": (h,),
        "embedding_ln_offset": (h,),
    }
    for i in range(cfg.layers):
        p = f"layer{i}."
        for name in ("wq", "wk", "wv", "wo"):
            shapes[p + "attn_" + name] = (h, h)
            shapes[p + "attn_" + name.replace("w", "b")] = (h,)
        shapes[p + "attn_ln_gain"] = (h,)
        shapes[p + "attn_ln_offset"] = (h,)
        shapes[p + "ffn_w1"] = (h, f)
        shapes[p + "ffn_b1"] = (f,)
        shapes[p + "ffn_w2"] = (f, h)
        shapes[p + "ffn_b2"] = (h,)
        shapes[p + "ffn_ln_gain"] = (h,)
        shapes[p + "ffn_ln_offset"] = (h,)
    shapes["mlm_output_bias"] = (v,)
    return shapes


@dataclass
class EncoderParams:
    """All learnable tensors, keyed by canonical name."""

    tensors: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def dtype(self):
        return self.tensors["token_embedding"].dtype

    def copy(self) -> "EncoderParams":
        return EncoderParams({k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "EncoderParams":
        return EncoderParams({k: v.astype(dtype) for k, v in self.tensors.items()})

    def num_parameters(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def validate_shapes(self, cfg: EncoderConfig) -> None:
        expected = param_shapes(cfg)
        got = {k: v.shape for k, v in self.tensors.items()}
        if got != expected:
            raise ValueError("parameter shapes do not match the configuration")


@dataclass
class LayerActivations:
    """Forward-pass record: embedding output, per-layer states, attention."""

    hidden_states: list[np.ndarray]          # (L+1) arrays of (T, H)
    attention: list[np.ndarray]              # L arrays of (A, T, T)
    logits: np.ndarray                       # (T, V)
    cache: dict = field(default_factory=dict, repr=False)


def _truncated_normal(rng: np.random.Generator, shape, std: float,
                      dtype) -> np.ndarray:
    bound = INIT_TRUNC * std
    x = rng.normal(0.0, std, size=shape)
    bad = np.abs(x) > bound
    while bad.any():
        x[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(x) > bound
    return x.astype(dtype)


def init_params(cfg: EncoderConfig, seed: int,
                dtype=np.float32) -> EncoderParams:
    """Truncated-normal weights (std 0.02, cut at 2 std), unit gains,
    zero biases/offsets; fully reproducible from the seed."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("ln_gain"):
            tensors[name] = np.ones(shape, dtype=dtype)
        elif len(shape) == 1:
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            tensors[name] = _truncated_normal(rng, shape, INIT_STD, dtype)
    return EncoderParams(tensors)


def gelu(x: np.ndarray) -> np.ndarray:
    return x * (0.5 * (1.0 + erf(x * _INV_SQRT_2)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT_2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return cdf + x * pdf


def _layer_norm(x: np.ndarray, gain: np.ndarray, offset: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return gain * xhat + offset, (xhat, inv)


def _layer_norm_backward(dy: np.ndarray, gain: np.ndarray, cache):
    xhat, inv = cache
    axes = tuple(range(dy.ndim - 1))
    dgain = (dy * xhat).sum(axis=axes)
    doffset = dy.sum(axis=axes)
    dxhat = dy * gain
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dgain, doffset


def _softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, t, h = x.shape
    return x.reshape(b, t, heads, h // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, a, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, a * dh)


class _Dropout:
    """Per-call seeded dropout; records masks for the backward pass."""

    def __init__(self, rate: float, seed: int, active: bool, dtype):
        self.rate = rate
        self.active = active and rate > 0.0
        self.rng = np.random.default_rng(seed) if self.active else None
        self.inv_keep = np.asarray(1.0 / (1.0 - rate), dtype=dtype)
        self.dtype = dtype

    def apply(self, x: np.ndarray):
        if not self.active:
            return x, None
        mask = (self.rng.random(x.shape) >= self.rate).astype(self.dtype)
        return x * mask * self.inv_keep, mask

    def backward(self, dy: np.ndarray, mask) -> np.ndarray:
        if mask is None:
            return dy
        return dy * mask * self.inv_keep


def _validate_inputs(cfg: EncoderConfig, ids: np.ndarray) -> None:
    if ids.shape[1] > cfg.max_positions:
        raise SequenceTooLong(
            f"sequence length {ids.shape[1]} exceeds max_positions "
            f"{cfg.max_positions}")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise IdOutOfRange("token id outside the vocabulary")


def _forward_batch(params: EncoderParams, cfg: EncoderConfig,
                   ids: np.ndarray, attention_mask: np.ndarray,
                   train_mode: bool, seed: int) -> dict:
    """Run the stack over a batch; returns every intermediate needed for
    the backward pass."""
    p = params.tensors
    ids = np.asarray(ids, dtype=np.int64)
    attention_mask = np.asarray(attention_mask)
    _validate_inputs(cfg, ids)
    dtype = params.dtype
    b, t = ids.shape
    drop = _Dropout(cfg.dropout_rate, seed, train_mode, dtype)

    # additive bias on the key axis: 0 for real tokens, a large negative
    # number (which underflows to exactly-zero attention) for padding
    key_bias = np.where(attention_mask[:, None, None, :] > 0,
                        dtype.type(0), dtype.type(MASK_BIAS))

    emb_sum = p["token_embedding"][ids] + p["position_embedding"][:t]
    emb_norm, emb_ln_cache = _layer_norm(
        emb_sum, p["embedding_ln_gain"], p["embedding_ln_offset"])
    x, emb_drop_mask = drop.apply(emb_norm)

    scale = dtype.type(1.0 / math.sqrt(cfg.head_dim))
    hidden = [x]
    layer_caches = []
    for i in range(cfg.layers):
        pre = f"layer{i}."
        x_in = x
        q = _split_heads(x_in @ p[pre + "attn_wq"] + p[pre + "attn_bq"], cfg.heads)
        k = _split_heads(x_in @ p[pre + "attn_wk"] + p[pre + "attn_bk"], cfg.heads)
        v = _split_heads(x_in @ p[pre + "attn_wv"] + p[pre + "attn_bv"], cfg.heads)
        scores = q @ k.transpose(0, 1, 3, 2) * scale + key_bias
        probs = _softmax(scores)
        probs_d, probs_mask = drop.apply(probs)
        ctx = _merge_heads(probs_d @ v)
        attn_out = ctx @ p[pre + "attn_wo"] + p[pre + "attn_bo"]
        attn_out_d, attn_drop_mask = drop.apply(attn_out)
        r1 = x_in + attn_out_d
        h1, ln1_cache = _layer_norm(
            r1, p[pre + "attn_ln_gain"], p[pre + "attn_ln_offset"])
        pre_act = h1 @ p[pre + "ffn_w1"] + p[pre + "ffn_b1"]
        act = gelu(pre_act)
        ffn_out = act @ p[pre + "ffn_w2"] + p[pre + "ffn_b2"]
        ffn_out_d, ffn_drop_mask = drop.apply(ffn_out)
        r2 = h1 + ffn_out_d
        x, ln2_cache = _layer_norm(
            r2, p[pre + "ffn_ln_gain"], p[pre + "ffn_ln_offset"])
        hidden.append(x)
        layer_caches.append({
            "x_in": x_in, "q": q, "k": k, "v": v, "probs": probs,
            "probs_mask": probs_mask, "probs_d": probs_d,
            "ctx": ctx, "attn_drop_mask": attn_drop_mask,
            "ln1_cache": ln1_cache, "h1": h1, "pre_act": pre_act,
            "act": act, "ffn_drop_mask": ffn_drop_mask,
            "ln2_cache": ln2_cache,
        })

    return {
        "ids": ids, "attention_mask": attention_mask, "hidden": hidden,
        "emb_ln_cache": emb_ln_cache, "emb_drop_mask": emb_drop_mask,
        "layers": layer_caches, "drop": drop, "scale": scale, "dtype": dtype,
    }


def _logits_full(params: EncoderParams, final_hidden: np.ndarray) -> np.ndarray:
    return final_hidden @ params["token_embedding"].T + params["mlm_output_bias"]


def forward(params: EncoderParams, cfg: EncoderConfig, seq,
            train_mode: bool = False, seed: int = 0) -> LayerActivations:
    """Single-sequence forward pass returning all layer activations and
    the full (T, V) masked-token logits."""
    ids = np.asarray([seq.ids])
    mask = np.asarray([seq.attention_mask])
    cache = _forward_batch(params, cfg, ids, mask, train_mode, seed)
    logits = _logits_full(params, cache["hidden"][-1])[0]
    return LayerActivations(
        hidden_states=[h[0] for h in cache["hidden"]],
        attention=[c["probs"][0] for c in cache["layers"]],
        logits=logits,
        cache=cache,
    )


def _masked_positions(labels: np.ndarray):
    rows, cols = np.nonzero(labels != IGNORE_INDEX)
    return rows, cols


def masked_ce_loss(params: EncoderParams, cfg: EncoderConfig,
                   ids: np.ndarray, labels: np.ndarray,
                   attention_mask: np.ndarray, train_mode: bool = True,
                   seed: int = 0) -> float:
    """Mean cross-entropy over labeled positions, forward pass only.

    This is the function the finite-difference oracle probes; it shares no
    code with the backward pass below.
    """
    labels = np.asarray(labels)
    rows, cols = _masked_positions(labels)
    if rows.size == 0:
        return 0.0
    cache = _forward_batch(params, cfg, ids, attention_mask, train_mode, seed)
    hs = cache["hidden"][-1][rows, cols]
    logits = hs @ params["token_embedding"].T + params["mlm_output_bias"]
    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    true = logits[np.arange(rows.size), labels[rows, cols]]
    return float((lse - true).mean())


def gradients(params: EncoderParams, cfg: EncoderConfig,
              ids: np.ndarray, labels: np.ndarray,
              attention_mask: np.ndarray, train_mode: bool = True,
              seed: int = 0):
    """Exact gradients of the mean masked cross-entropy.

    Returns ``(grads, loss, n_masked)`` where ``grads`` maps every tensor
    name to an array of the same shape.  With no labeled positions the
    loss is zero and so is every gradient.
    """
    p = params.tensors
    labels = np.asarray(labels)
    dtype = params.dtype
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    rows, cols = _masked_positions(labels)
    n_masked = int(rows.size)
    if n_masked == 0:
        return grads, 0.0, 0

    cache = _forward_batch(params, cfg, ids, attention_mask, train_mode, seed)
    ids_arr = cache["ids"]
    drop = cache["drop"]
    scale = cache["scale"]
    b, t = ids_arr.shape
    h = cfg.hidden

    # head: logits only at labeled positions
    hs = cache["hidden"][-1][rows, cols]                       # (M, H)
    logits = hs @ p["token_embedding"].T + p["mlm_output_bias"]
    zmax = logits.max(axis=1, keepdims=True)
    ez = np.exp(logits - zmax)
    softmax = ez / ez.sum(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(ez.sum(axis=1))
    gold = labels[rows, cols]
    loss = float((lse - logits[np.arange(n_masked), gold]).mean())

    dlogits = softmax / dtype.type(n_masked)
    dlogits[np.arange(n_masked), gold] -= dtype.type(1.0 / n_masked)
    grads["token_embedding"] += dlogits.T @ hs
    grads["mlm_output_bias"] += dlogits.sum(axis=0)
    dhs = dlogits @ p["token_embedding"]                       # (M, H)
    dx = np.zeros((b, t, h), dtype=dtype)
    dx[rows, cols] = dhs

    for i in reversed(range(cfg.layers)):
        pre = f"layer{i}."
        c = cache["layers"][i]
        dr2, dg2, do2 = _layer_norm_backward(dx, p[pre + "ffn_ln_gain"],
                                             c["ln2_cache"])
        grads[pre + "ffn_ln_gain"] += dg2
        grads[pre + "ffn_ln_offset"] += do2
        dh1 = dr2.copy()
        dffn = drop.backward(dr2, c["ffn_drop_mask"])
        grads[pre + "ffn_w2"] += c["act"].reshape(-1, cfg.ff_dim).T @ \
            dffn.reshape(-1, h)
        grads[pre + "ffn_b2"] += dffn.sum(axis=(0, 1))
        dact = dffn @ p[pre + "ffn_w2"].T
        dpre = dact * _gelu_grad(c["pre_act"])
        grads[pre + "ffn_w1"] += c["h1"].reshape(-1, h).T @ \
            dpre.reshape(-1, cfg.ff_dim)
        grads[pre + "ffn_b1"] += dpre.sum(axis=(0, 1))
        dh1 += dpre @ p[pre + "ffn_w1"].T

        dr1, dg1, do1 = _layer_norm_backward(dh1, p[pre + "attn_ln_gain"],
                                             c["ln1_cache"])
        grads[pre + "attn_ln_gain"] += dg1
        grads[pre + "attn_ln_offset"] += do1
        dx = dr1.copy()
        dao = drop.backward(dr1, c["attn_drop_mask"])
        grads[pre + "attn_wo"] += c["ctx"].reshape(-1, h).T @ dao.reshape(-1, h)
        grads[pre + "attn_bo"] += dao.sum(axis=(0, 1))
        dctx = _split_heads(dao @ p[pre + "attn_wo"].T, cfg.heads)
        dprobs_d = dctx @ c["v"].transpose(0, 1, 3, 2)
        dv = c["probs_d"].transpose(0, 1, 3, 2) @ dctx
        dprobs = drop.backward(dprobs_d, c["probs_mask"])
        dscores = c["probs"] * (
            dprobs - (dprobs * c["probs"]).sum(axis=-1, keepdims=True))
        dq = dscores @ c["k"] * scale
        dk = dscores.transpose(0, 1, 3, 2) @ c["q"] * scale
        x_flat = c["x_in"].reshape(-1, h)
        for name, dhead in (("q", dq), ("k", dk), ("v", dv)):
            dfull = _merge_heads(dhead)
            grads[pre + f"attn_w{name}"] += x_flat.T @ dfull.reshape(-1, h)
            grads[pre + f"attn_b{name}"] += dfull.sum(axis=(0, 1))
            dx += dfull @ p[pre + f"attn_w{name}"].T

    demb_norm = drop.backward(dx, cache["emb_drop_mask"])
    demb, dge, doe = _layer_norm_backward(demb_norm, p["embedding_ln_gain"],
                                          cache["emb_ln_cache"])
    grads["embedding_ln_gain"] += dge
    grads["embedding_ln_offset"] += doe
    np.add.at(grads["token_embedding"], ids_arr.reshape(-1),
              demb.reshape(-1, h))
    grads["position_embedding"][:t] += demb.sum(axis=0)

    return grads, loss, n_masked
