"""WordPiece subword tokenizer: trainer, encoder/decoder, comparison report.

Training follows the likelihood-score merge rule: starting from single
characters (word-initial pieces plus ``##``-prefixed continuations), the
pair with the highest score

    score(a, b) = freq(ab) / (freq(a) * freq(b))

is merged until the vocabulary is full or no pair reaches ``min_freq``.
Ties break on the lexicographically smallest (left, right) pair, so a
given corpus always yields byte-identical vocabulary files.

Segmentation is greedy longest-match-first; a word that cannot be covered
becomes a single ``[UNK]``.  Word boundary is a single space (preprocessing
collapses whitespace); punctuation splits into standalone units first.

The trainer recounts pair statistics over distinct word shapes each round,
which is simple and exactly deterministic; it is sized for desk-scale
corpora, not the full social-network crawl.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field

from .errors import EmptyCorpus, IdOutOfRange, VocabTooSmall
from .textprep import CleanText

SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)
CONTINUATION_PREFIX = "##"

DEFAULT_VOCAB_SIZE = 8000
DEFAULT_MIN_FREQ = 2


@dataclass
class Vocab:
    """Ordered subword inventory with BERT-style special tokens at ids 0-4."""

    tokens: list[str]
    id_of: dict[str, int] = field(init=False)
    continuation_prefix: str = field(default=CONTINUATION_PREFIX, init=False)

    def __post_init__(self):
        if tuple(self.tokens[:5]) != SPECIAL_TOKENS:
            raise ValueError(f"first five tokens must be {SPECIAL_TOKENS}")
        self.id_of = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.id_of) != len(self.tokens):
            dupes = [t for t, c in Counter(self.tokens).items() if c > 1]
            raise ValueError(f"duplicate tokens in vocabulary: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    def save(self, path: str) -> None:
        """One token per line, UTF-8; line number is the id."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self.tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens)


@dataclass(frozen=True)
class TokenSequence:
    """Encoded text framed as [CLS] ... [SEP] and padded to a fixed length."""

    ids: tuple[int, ...]
    pieces: tuple[str, ...]
    attention_mask: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def real_length(self) -> int:
        return sum(self.attention_mask)


@dataclass
class TokenizerReport:
    """Corpus-level segmentation quality of one vocabulary."""

    unk_rate: float
    fertility: float
    examples: list[tuple[str, list[str]]]


def _as_text(item: CleanText | str) -> str:
    return item.text if isinstance(item, CleanText) else item


def pretokenize(text: str) -> list[str]:
    """Whitespace split, then isolate each punctuation character."""
    units: list[str] = []
    for word in text.split():
        buf: list[str] = []
        for ch in word:
            if unicodedata.category(ch).startswith("P"):
                if buf:
                    units.append("".join(buf))
                    buf = []
                units.append(ch)
            else:
                buf.append(ch)
        if buf:
            units.append("".join(buf))
    return units


def _word_counts(corpus) -> Counter:
    counts: Counter = Counter()
    for item in corpus:
        counts.update(pretokenize(_as_text(item)))
    return counts


def train_wordpiece(corpus, vocab_size: int = DEFAULT_VOCAB_SIZE,
                    min_freq: int = DEFAULT_MIN_FREQ) -> Vocab:
    """Learn a WordPiece vocabulary from preprocessed lines.

    The vocabulary holds the five specials, every corpus character in both
    word-initial and ``##``-prefixed form, then greedy merges in learned
    order.  Raises EmptyCorpus when no line yields a word and VocabTooSmall
    when ``vocab_size`` cannot hold the specials plus the alphabet.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = _word_counts(corpus)
    if not counts:
        raise EmptyCorpus("corpus contains no non-empty lines")

    alphabet = sorted({ch for word in counts for ch in word})
    tokens = list(SPECIAL_TOKENS)
    tokens.extend(alphabet)
    tokens.extend(CONTINUATION_PREFIX + ch for ch in alphabet)
    if vocab_size < len(tokens):
        raise VocabTooSmall(
            f"vocab_size={vocab_size} cannot hold {len(SPECIAL_TOKENS)} specials "
            f"plus an alphabet of {len(tokens) - len(SPECIAL_TOKENS)} pieces"
        )
    known = set(tokens)

    splits = {
        word: [word[0]] + [CONTINUATION_PREFIX + ch for ch in word[1:]]
        for word in counts
    }

    while len(tokens) < vocab_size:
        piece_freq: Counter = Counter()
        pair_freq: Counter = Counter()
        for word, pieces in splits.items():
            n = counts[word]
            for i, piece in enumerate(pieces):
                piece_freq[piece] += n
                if i + 1 < len(pieces):
                    pair_freq[(piece, pieces[i + 1])] += n

        eligible = [(pair, freq) for pair, freq in pair_freq.items()
                    if freq >= min_freq]
        if not eligible:
            break
        # Highest score wins; ties go to the lexicographically smallest pair.
        best, _ = min(
            eligible,
            key=lambda e: (-e[1] / (piece_freq[e[0][0]] * piece_freq[e[0][1]]),
                           e[0]),
        )
        left, right = best
        merged = left + right[len(CONTINUATION_PREFIX):] \
            if right.startswith(CONTINUATION_PREFIX) else left + right

        for word, pieces in splits.items():
            out: list[str] = []
            i = 0
            while i < len(pieces):
                if (i + 1 < len(pieces) and pieces[i] == left
                        and pieces[i + 1] == right):
                    out.append(merged)
                    i += 2
                else:
                    out.append(pieces[i])
                    i += 1
            splits[word] = out

        if merged not in known:
            known.add(merged)
            tokens.append(merged)

    return Vocab(tokens)


def segment_word(vocab: Vocab, word: str) -> list[str]:
    """Greedy longest-match-first pieces for one pre-tokenized unit.

    Returns ``["[UNK]"]`` when any step finds no matching vocabulary
    prefix, so [UNK] only ever covers a whole word.
    """
    if word in vocab.id_of:
        return [word]
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        found = None
        while end > start:
            cand = word[start:end]
            if start > 0:
                cand = CONTINUATION_PREFIX + cand
            if cand in vocab.id_of:
                found = cand
                break
            end -= 1
        if found is None:
            return [SPECIAL_TOKENS[UNK_ID]]
        pieces.append(found)
        start = end
    return pieces


def encode(vocab: Vocab, text: str, max_len: int) -> TokenSequence:
    """Segment, frame with [CLS]/[SEP], truncate keeping [SEP], pad."""
    if max_len < 3:
        raise ValueError("max_len must be >= 3")
    pieces: list[str] = []
    for unit in pretokenize(text):
        pieces.extend(segment_word(vocab, unit))
    if len(pieces) > max_len - 2:
        pieces = pieces[: max_len - 2]
    framed = ["[CLS]"] + pieces + ["[SEP]"]
    mask = [1] * len(framed)
    pad = max_len - len(framed)
    framed.extend(["[PAD]"] * pad)
    mask.extend([0] * pad)
    ids = [vocab.id_of[p] for p in framed]
    return TokenSequence(ids=tuple(ids), pieces=tuple(framed),
                         attention_mask=tuple(mask))


def decode(vocab: Vocab, ids) -> str:
    """Drop specials, glue ``##`` continuations, join words with spaces."""
    words: list[str] = []
    for i in ids:
        i = int(i)
        if not 0 <= i < len(vocab):
            raise IdOutOfRange(f"id {i} outside vocabulary of {len(vocab)}")
        piece = vocab.tokens[i]
        if piece in SPECIAL_TOKENS:
            continue
        if piece.startswith(CONTINUATION_PREFIX) and words:
            words[-1] += piece[len(CONTINUATION_PREFIX):]
        elif piece.startswith(CONTINUATION_PREFIX):
            words.append(piece[len(CONTINUATION_PREFIX):])
        else:
            words.append(piece)
    return " ".join(words)


def _segment_whitespace_word(vocab: Vocab, word: str) -> list[str]:
    pieces: list[str] = []
    for unit in pretokenize(word):
        pieces.extend(segment_word(vocab, unit))
    return pieces


def describe(vocab: Vocab, corpus, n_examples: int = 0) -> TokenizerReport:
    """UNK rate and fertility of one vocabulary over a corpus.

    Both statistics are per whitespace word: a word counts as UNK when any
    of its punctuation-split units maps to [UNK]; fertility is the mean
    number of pieces a word produces.
    """
    total_words = 0
    unk_words = 0
    total_pieces = 0
    examples: list[tuple[str, list[str]]] = []
    for item in corpus:
        text = _as_text(item)
        words = text.split()
        sent_pieces: list[str] = []
        for word in words:
            pieces = _segment_whitespace_word(vocab, word)
            total_words += 1
            total_pieces += len(pieces)
            if SPECIAL_TOKENS[UNK_ID] in pieces:
                unk_words += 1
            sent_pieces.extend(pieces)
        if len(examples) < n_examples and words:
            examples.append((text, sent_pieces))
    if total_words == 0:
        raise EmptyCorpus("corpus contains no words")
    return TokenizerReport(unk_rate=unk_words / total_words,
                           fertility=total_pieces / total_words,
                           examples=examples)


def compare_tokenizations(vocab_a: Vocab, vocab_b: Vocab, corpus,
                          n_examples: int = 10
                          ) -> tuple[TokenizerReport, TokenizerReport]:
    """Side-by-side segmentation quality of two vocabularies."""
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("no sentences to compare on")
    return (describe(vocab_a, corpus, n_examples),
            describe(vocab_b, corpus, n_examples))
