"""Sentence embeddings and pair scoring on the [0, 5] similarity scale.

Per-token vectors are the average of the last (up to) four layer outputs;
a pooling step (CLS position, masked mean, or masked per-dimension max)
reduces them to one sentence vector, and the cosine of two such vectors
maps onto [0, 5].

Two cosine-to-score mappings are provided because the exact calibration
is a modeling choice: ``clamp`` (default) treats negative cosine as fully
unrelated, 5 * max(0, cos); ``linear`` spreads [-1, 1] onto the scale,
2.5 * (cos + 1).  Both preserve ranking, so rank correlations agree.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import encoder as enc
from .checkpoint import load_checkpoint
from .encoder import EncoderConfig, EncoderParams, LayerActivations
from .errors import ModelLoadFailed, NoRealTokens, ZeroVector
from .textprep import EmojiLexicon, preprocess_text
from .tokenizer import CLS_ID, MASK_ID, PAD_ID, SEP_ID, TokenSequence, Vocab, encode

POOLINGS = ("cls", "mean", "max")
MAPPINGS = ("clamp", "linear")
LAST_LAYERS_AVERAGED = 4

_POOL_EXCLUDED_IDS = (PAD_ID, CLS_ID, SEP_ID, MASK_ID)


@dataclass
class SentenceVector:
    values: np.ndarray
    pooling: str
    source_id: str | None = None


@dataclass(frozen=True)
class SimilarityResult:
    cosine: float
    score: float
    pooling: str
    mapping: str


def token_embeddings(acts: LayerActivations) -> np.ndarray:
    """Per-token vectors: elementwise mean of the final min(4, L) layers."""
    layer_outputs = acts.hidden_states[1:]
    take = min(LAST_LAYERS_AVERAGED, len(layer_outputs))
    return np.mean(layer_outputs[-take:], axis=0)


def pool(tokvecs: np.ndarray, attention_mask, specials_mask,
         strategy: str = "mean") -> SentenceVector:
    """Reduce (T, H) token vectors to one sentence vector.

    ``mean`` and ``max`` run over real non-special positions only, so
    padding or extra specials never change the result; ``cls`` picks
    position 0.
    """
    if strategy not in POOLINGS:
        raise ValueError(f"unknown pooling {strategy!r}; use one of {POOLINGS}")
    if strategy == "cls":
        return SentenceVector(values=np.array(tokvecs[0]), pooling="cls")
    keep = (np.asarray(attention_mask) == 1) & ~np.asarray(specials_mask, bool)
    if not keep.any():
        raise NoRealTokens(f"{strategy} pooling needs at least one real token")
    chosen = tokvecs[keep]
    values = chosen.mean(axis=0) if strategy == "mean" else chosen.max(axis=0)
    return SentenceVector(values=values, pooling=strategy)


def specials_mask_for(seq: TokenSequence) -> np.ndarray:
    return np.array([tid in _POOL_EXCLUDED_IDS for tid in seq.ids])


def map_score(cosine: float, mapping: str) -> float:
    if mapping == "clamp":
        return 5.0 * max(0.0, cosine)
    if mapping == "linear":
        return 2.5 * (cosine + 1.0)
    raise ValueError(f"unknown mapping {mapping!r}; use one of {MAPPINGS}")


def cosine_score(u, v, mapping: str = "clamp") -> SimilarityResult:
    """Cosine of two sentence vectors plus its [0, 5] score."""
    uv = u.values if isinstance(u, SentenceVector) else np.asarray(u)
    vv = v.values if isinstance(v, SentenceVector) else np.asarray(v)
    if uv.shape != vv.shape:
        raise ValueError("vectors must share a dimension")
    a = uv.astype(np.float64)
    b = vv.astype(np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cannot score a zero-magnitude sentence vector")
    cos = float(np.clip(a @ b / (na * nb), -1.0, 1.0))
    pooling = u.pooling if isinstance(u, SentenceVector) else "unknown"
    return SimilarityResult(cosine=cos, score=map_score(cos, mapping),
                            pooling=pooling, mapping=mapping)


class SimilarityScorer:
    """Pipeline bundle: preprocess -> tokenize -> encode -> pool -> score.

    Stateless once constructed; forwards always run with dropout off, so
    scoring is deterministic and safe to parallelize over a shared model.
    """

    def __init__(self, params: EncoderParams, cfg: EncoderConfig, vocab: Vocab,
                 lexicon: EmojiLexicon | None = None,
                 pooling: str = "mean", mapping: str = "clamp",
                 max_len: int | None = None):
        if pooling not in POOLINGS:
            raise ValueError(f"unknown pooling {pooling!r}")
        if mapping not in MAPPINGS:
            raise ValueError(f"unknown mapping {mapping!r}")
        self.params = params
        self.cfg = cfg
        self.vocab = vocab
        self.lexicon = lexicon if lexicon is not None else EmojiLexicon()
        self.pooling = pooling
        self.mapping = mapping
        self.max_len = max_len if max_len is not None else cfg.max_positions

    @classmethod
    def load(cls, checkpoint_path: str, vocab_path: str, **kwargs
             ) -> "SimilarityScorer":
        try:
            params, cfg = load_checkpoint(checkpoint_path)
            vocab = Vocab.load(vocab_path)
        except Exception as exc:
            raise ModelLoadFailed(
                f"cannot load model from {checkpoint_path!r} / "
                f"{vocab_path!r}: {exc}") from exc
        return cls(params, cfg, vocab, **kwargs)

    def embed(self, text: str, source_id: str | None = None) -> SentenceVector:
        clean = preprocess_text(text, self.lexicon)
        seq = encode(self.vocab, clean, self.max_len)
        acts = enc.forward(self.params, self.cfg, seq, train_mode=False)
        vec = pool(token_embeddings(acts), seq.attention_mask,
                   specials_mask_for(seq), self.pooling)
        vec.source_id = source_id
        return vec

    def score_pair(self, text_a: str, text_b: str) -> SimilarityResult:
        return cosine_score(self.embed(text_a), self.embed(text_b),
                            self.mapping)


def score_pair(checkpoint_path: str, vocab_path: str,
               lexicon: EmojiLexicon | None, text_a: str, text_b: str,
               pooling: str = "mean", mapping: str = "clamp"
               ) -> SimilarityResult:
    """One-shot pair scoring from artifact paths."""
    scorer = SimilarityScorer.load(checkpoint_path, vocab_path,
                                   lexicon=lexicon, pooling=pooling,
                                   mapping=mapping)
    return scorer.score_pair(text_a, text_b)


def export_embeddings(vectors: list[SentenceVector], path: str) -> None:
    """Binary export: little-endian uint32 (count, dim) header, then
    count * dim little-endian float32 values."""
    if not vectors:
        raise ValueError("nothing to export")
    dim = len(vectors[0].values)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", len(vectors), dim))
        for vec in vectors:
            fh.write(np.ascontiguousarray(vec.values, dtype="<f4").tobytes())


def load_embeddings(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        count, dim = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != count * dim:
        raise ValueError(f"{path}: expected {count * dim} floats, "
                         f"found {data.size}")
    return data.reshape(count, dim).copy()
