"""Masked-language-model pretraining: masking, objective, Adam, train loop.

Selected tokens are all replaced by [MASK], matching the training recipe
this toolkit reproduces; the original BERT 80/10/10 corruption split is
available behind ``bert_split`` for comparison.  Masking count is
round(rate * real-non-special-count) with a floor of one so very short
texts still contribute an objective.

Every random choice (epoch shuffling, mask positions, dropout) derives
from the single run seed, so a training run is reproducible down to the
emitted bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import encoder
from .encoder import EncoderConfig, EncoderParams, IGNORE_INDEX
from .errors import NoMaskableTokens, NoMaskedPositions, NonFiniteGradient
from .tokenizer import CLS_ID, MASK_ID, PAD_ID, SEP_ID, UNK_ID, Vocab, encode

_SPECIAL_IDS = (PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID)

# stream tags keeping shuffle / mask / dropout seeds disjoint
_SHUFFLE_STREAM, _MASK_STREAM, _DROPOUT_STREAM = 1, 2, 3


@dataclass(frozen=True)
class MaskedExample:
    """One sequence with [MASK]-corrupted inputs and recovery labels."""

    input_ids: tuple[int, ...]
    labels: tuple[int, ...]              # IGNORE_INDEX except at masked spots
    attention_mask: tuple[int, ...]


@dataclass
class MaskedBatch:
    input_ids: np.ndarray                # (B, T) int64
    labels: np.ndarray                   # (B, T) int64
    attention_mask: np.ndarray           # (B, T) int64

    @classmethod
    def stack(cls, rows: list[MaskedExample]) -> "MaskedBatch":
        return cls(
            input_ids=np.array([r.input_ids for r in rows], dtype=np.int64),
            labels=np.array([r.labels for r in rows], dtype=np.int64),
            attention_mask=np.array([r.attention_mask for r in rows],
                                    dtype=np.int64),
        )


@dataclass(frozen=True)
class TrainHyper:
    """Optimization settings; the learning rate is deliberately explicit."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 5
    mask_rate: float = 0.15
    max_len: int = 64
    seed: int = 13
    bert_split: bool = False

    def to_dict(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "batch_size": self.batch_size,
            "epochs": self.epochs, "mask_rate": self.mask_rate,
            "max_len": self.max_len, "seed": self.seed,
            "bert_split": self.bert_split,
        }


@dataclass
class TrainState:
    """Adam moments, step counter, and the loss curve."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int
    hyper: TrainHyper
    loss_history: list[tuple[int, int, float]] = field(default_factory=list)

    @classmethod
    def fresh(cls, params: EncoderParams, hyper: TrainHyper) -> "TrainState":
        return cls(
            m={k: np.zeros_like(t) for k, t in params.tensors.items()},
            v={k: np.zeros_like(t) for k, t in params.tensors.items()},
            step=0,
            hyper=hyper,
        )


def _maskable_positions(seq) -> list[int]:
    return [i for i, (tid, m) in enumerate(zip(seq.ids, seq.attention_mask))
            if m == 1 and tid not in _SPECIAL_IDS]


def mask_count(rate: float, n_real: int) -> int:
    """round-half-away-from-zero(rate * n), floored at one."""
    return max(1, int(np.floor(rate * n_real + 0.5)))


def mask_tokens(seq, rate: float, seed, bert_split: bool = False,
                vocab_size: int | None = None) -> MaskedExample:
    """Corrupt one encoded sequence for the MLM objective.

    Picks round(rate * n) positions (minimum one) uniformly without
    replacement among real non-special tokens.  All picks become [MASK]
    unless ``bert_split`` asks for the 80/10/10 mask/random/keep split,
    which needs ``vocab_size`` for the random replacement.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("mask rate must be in (0, 1)")
    eligible = _maskable_positions(seq)
    if not eligible:
        raise NoMaskableTokens("sequence holds only special tokens")
    if bert_split and vocab_size is None:
        raise ValueError("bert_split replacement needs vocab_size")

    rng = np.random.default_rng(seed)
    k = min(mask_count(rate, len(eligible)), len(eligible))
    picks = rng.choice(np.array(eligible), size=k, replace=False)

    ids = list(seq.ids)
    labels = [IGNORE_INDEX] * len(ids)
    for pos in picks:
        labels[pos] = ids[pos]
        if not bert_split:
            ids[pos] = MASK_ID
            continue
        r = rng.random()
        if r < 0.8:
            ids[pos] = MASK_ID
        elif r < 0.9:
            ids[pos] = int(rng.integers(len(_SPECIAL_IDS), vocab_size))
        # else: keep the original token
    return MaskedExample(input_ids=tuple(ids), labels=tuple(labels),
                         attention_mask=tuple(seq.attention_mask))


def mlm_loss(logits: np.ndarray, labels) -> float:
    """Mean of -log softmax(logits)[gold] over labeled positions."""
    labels = np.asarray(labels)
    pos = labels != IGNORE_INDEX
    if not pos.any():
        raise NoMaskedPositions("no labeled positions in this row")
    z = np.asarray(logits, dtype=np.float64)[pos]
    gold = labels[pos]
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    return float((lse - z[np.arange(len(gold)), gold]).mean())


def adam_step(params: EncoderParams, grads: dict[str, np.ndarray],
              state: TrainState) -> tuple[EncoderParams, TrainState]:
    """One bias-corrected Adam update, in place.

    Aborts (raising NonFiniteGradient, naming the tensor) before touching
    any state when a gradient is not finite.
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient in tensor {name!r}")
    h = state.hyper
    t = state.step + 1
    c1 = 1.0 - h.beta1 ** t
    c2 = 1.0 - h.beta2 ** t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= h.beta1
        m += (1.0 - h.beta1) * g
        v *= h.beta2
        v += (1.0 - h.beta2) * g * g
        params.tensors[name] -= h.lr * (m / c1) / (np.sqrt(v / c2) + h.eps)
    state.step = t
    return params, state


def _stream_seed(base: int, *parts: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((base, *parts))


def encode_corpus(texts, vocab: Vocab, max_len: int):
    """Encode lines, dropping any without a maskable token.

    Returns (sequences, n_dropped)."""
    seqs = []
    dropped = 0
    for text in texts:
        seq = encode(vocab, text if isinstance(text, str) else text.text,
                     max_len)
        if _maskable_positions(seq):
            seqs.append(seq)
        else:
            dropped += 1
    return seqs, dropped


def train(texts, vocab: Vocab, cfg: EncoderConfig, hyper: TrainHyper,
          log_every: int = 0) -> tuple[EncoderParams, TrainState]:
    """Full MLM pretraining loop over an in-memory corpus.

    Per-epoch reshuffle with a seeded generator, dynamic masking (fresh
    positions every epoch), last partial batch kept.  With zero epochs the
    returned parameters equal ``init_params(cfg, hyper.seed)`` exactly.
    """
    seqs, dropped = encode_corpus(texts, vocab, hyper.max_len)
    if not seqs:
        raise NoMaskableTokens("corpus has no sequence with maskable tokens")
    params = encoder.init_params(cfg, hyper.seed)
    state = TrainState.fresh(params, hyper)
    shuffle_rng = np.random.default_rng(
        _stream_seed(hyper.seed, _SHUFFLE_STREAM))

    for epoch in range(hyper.epochs):
        order = shuffle_rng.permutation(len(seqs))
        for start in range(0, len(seqs), hyper.batch_size):
            chosen = order[start:start + hyper.batch_size]
            rows = [
                mask_tokens(
                    seqs[j], hyper.mask_rate,
                    _stream_seed(hyper.seed, _MASK_STREAM, epoch, int(j)),
                    bert_split=hyper.bert_split, vocab_size=len(vocab),
                )
                for j in chosen
            ]
            batch = MaskedBatch.stack(rows)
            grads, loss, _ = encoder.gradients(
                params, cfg, batch.input_ids, batch.labels,
                batch.attention_mask, train_mode=True,
                seed=_stream_seed(hyper.seed, _DROPOUT_STREAM, epoch,
                                  state.step),
            )
            adam_step(params, grads, state)
            state.loss_history.append((state.step, epoch, loss))
            if log_every and state.step % log_every == 0:
                print(f"step {state.step} epoch {epoch} loss {loss:.4f}")
    return params, state


def masked_prediction_accuracy(params: EncoderParams, cfg: EncoderConfig,
                               texts, vocab: Vocab, max_len: int,
                               rate: float, seed: int) -> float:
    """Fraction of masked tokens recovered by argmax, dropout disabled."""
    seqs, _ = encode_corpus(texts, vocab, max_len)
    correct = 0
    total = 0
    for j, seq in enumerate(seqs):
        row = mask_tokens(seq, rate, _stream_seed(seed, _MASK_STREAM, 0, j))
        batch = MaskedBatch.stack([row])
        cache = encoder._forward_batch(params, cfg, batch.input_ids,
                                       batch.attention_mask,
                                       train_mode=False, seed=0)
        logits = encoder._logits_full(params, cache["hidden"][-1])[0]
        labels = np.asarray(row.labels)
        pos = labels != IGNORE_INDEX
        pred = logits[pos].argmax(axis=1)
        correct += int((pred == labels[pos]).sum())
        total += int(pos.sum())
    return correct / total if total else 0.0


def write_loss_curve(history, path: str) -> None:
    """Comma-separated ``step,epoch,loss`` rows with a header line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,epoch,loss\n")
        for step, epoch, loss in history:
            fh.write(f"{step},{epoch},{loss:.8f}\n")
