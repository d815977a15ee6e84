"""Desk-scale toolkit for semantic similarity of informal short texts.

Stages: social-text preprocessing, WordPiece tokenizer training, masked
language-model pretraining of a small transformer encoder, sentence
embedding + cosine similarity scoring on a [0, 5] scale, the
Pearson/Spearman/MSE evaluation suite, and candidate-pair mining with
annotation aggregation for dataset construction.
"""

__version__ = "0.1.0"

from .encoder import EncoderConfig, EncoderParams, forward, gradients, init_params
from .errors import ShortsimError
from .evalkit import make_report, mse, pearson, spearman
from .pairbuilder import aggregate_annotations, candidate_pairs, filter_short
from .pretrain import TrainHyper, adam_step, mask_tokens, mlm_loss, train
from .similarity import SimilarityScorer, cosine_score, pool, score_pair, token_embeddings
from .textprep import CleanText, EmojiLexicon, RawPost, preprocess, preprocess_text
from .tokenizer import Vocab, compare_tokenizations, decode, encode, train_wordpiece

__all__ = [
    "__version__",
    "ShortsimError",
    "RawPost", "CleanText", "EmojiLexicon", "preprocess", "preprocess_text",
    "Vocab", "train_wordpiece", "encode", "decode", "compare_tokenizations",
    "EncoderConfig", "EncoderParams", "init_params", "forward", "gradients",
    "TrainHyper", "mask_tokens", "mlm_loss", "adam_step", "train",
    "SimilarityScorer", "token_embeddings", "pool", "cosine_score", "score_pair",
    "pearson", "spearman", "mse", "make_report",
    "filter_short", "candidate_pairs", "aggregate_annotations",
]
