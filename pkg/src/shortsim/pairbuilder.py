"""Dataset construction: short-post filtering, candidate-pair mining under
the trend / one-day / five-word-overlap rules, annotation aggregation, and
label-distribution histograms.

A pair of posts survives mining only when all three hold: both carry the
same non-null trend tag, their timestamps differ by at most one day
(86,400 s inclusive), and their preprocessed texts share at least five
distinct words.  Word overlap uses set semantics over whitespace tokens.

Aggregated labels use the sample (k-1) variance, which is the convention
the reference annotations follow; display values truncate (never round)
to two decimals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_DOWN, Decimal

from .errors import EmptyDataset, MissingTimestamp, MissingTrendField, TooFewScores
from .textprep import RawPost

ONE_DAY_SECONDS = 86_400
DEFAULT_MIN_WORDS = 4
DEFAULT_MIN_OVERLAP = 5


@dataclass(frozen=True)
class CandidatePair:
    """An unordered post pair satisfying all three mining rules."""

    id_a: str
    id_b: str
    trend: str
    gap_seconds: int
    overlap: int


@dataclass(frozen=True)
class AnnotatedPair:
    """Text pair with per-annotator scores and the derived label stats."""

    pair_id: str
    text_a: str
    text_b: str
    scores: tuple[int, ...]
    avg: float
    sd: float
    var: float

    @classmethod
    def build(cls, pair_id: str, text_a: str, text_b: str,
              scores) -> "AnnotatedPair":
        avg, sd, var = aggregate_annotations(scores)
        return cls(pair_id=pair_id, text_a=text_a, text_b=text_b,
                   scores=tuple(int(s) for s in scores),
                   avg=avg, sd=sd, var=var)


def filter_short(posts: list[RawPost],
                 min_words: int = DEFAULT_MIN_WORDS) -> list[RawPost]:
    """Keep posts with at least ``min_words`` whitespace words, in order."""
    return [p for p in posts if len(p.text.split()) >= min_words]


def word_overlap(text_a: str, text_b: str) -> int:
    return len(set(text_a.split()) & set(text_b.split()))


def candidate_pairs(posts: list[RawPost],
                    max_gap_seconds: int = ONE_DAY_SECONDS,
                    min_overlap: int = DEFAULT_MIN_OVERLAP
                    ) -> list[CandidatePair]:
    """All unordered pairs passing the trend/gap/overlap rules.

    Output is sorted by (id_a, id_b) with id_a < id_b.  Posts require a
    timestamp; a corpus where no post carries a trend tag is rejected
    outright, since mining without trend metadata can only return nothing.
    """
    for p in posts:
        if p.timestamp is None:
            raise MissingTimestamp(f"post {p.id!r} has no timestamp")
    if posts and all(p.trend is None for p in posts):
        raise MissingTrendField("no post carries a trend tag")

    by_trend: dict[str, list[RawPost]] = {}
    for p in posts:
        if p.trend is not None:
            by_trend.setdefault(p.trend, []).append(p)

    out: list[CandidatePair] = []
    for trend, group in by_trend.items():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                gap = abs(a.timestamp - b.timestamp)
                if gap > max_gap_seconds:
                    continue
                overlap = word_overlap(a.text, b.text)
                if overlap < min_overlap:
                    continue
                id_a, id_b = sorted((a.id, b.id))
                out.append(CandidatePair(id_a=id_a, id_b=id_b, trend=trend,
                                         gap_seconds=gap, overlap=overlap))
    out.sort(key=lambda c: (c.id_a, c.id_b))
    return out


def aggregate_annotations(scores) -> tuple[float, float, float]:
    """(mean, sample sd, sample variance) of integer scores in {0..5}."""
    scores = list(scores)
    if len(scores) < 2:
        raise TooFewScores(f"need at least 2 scores, got {len(scores)}")
    for s in scores:
        if int(s) != s or not 0 <= int(s) <= 5:
            raise ValueError(f"score {s!r} outside the 0..5 integer rubric")
    k = len(scores)
    avg = sum(scores) / k
    var = sum((s - avg) ** 2 for s in scores) / (k - 1)
    return avg, math.sqrt(var), var


def truncate2(value: float) -> str:
    """Two-decimal truncation for display: 0.5773 -> '0.57', 0.5 -> '0.5'.

    Truncates on the decimal representation (not binary), so 0.29 stays
    '0.29'; trailing zeros and bare dots are trimmed.
    """
    d = Decimal(repr(float(value))).quantize(Decimal("0.01"),
                                             rounding=ROUND_DOWN)
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def label_distribution(pairs, bin_width: float = 1.0):
    """Histogram of average labels over [0, 5].

    Bins are half-open with the final bin closed; counts always sum to the
    dataset size.  Accepts AnnotatedPair items or bare labels.
    """
    labels = [p.avg if isinstance(p, AnnotatedPair) else float(p)
              for p in pairs]
    if not labels:
        raise EmptyDataset("no pairs to histogram")
    if not 0 < bin_width <= 5:
        raise ValueError("bin_width must lie in (0, 5]")
    nbins = math.ceil(5.0 / bin_width)
    counts = [0] * nbins
    for lab in labels:
        counts[min(int(lab / bin_width), nbins - 1)] += 1
    return [(i * bin_width, min((i + 1) * bin_width, 5.0), counts[i])
            for i in range(nbins)]


# --- file formats ---

def write_candidates_tsv(pairs: list[CandidatePair], path: str) -> None:
    """``idA  idB  trend  gap_seconds  overlap`` rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in pairs:
            fh.write(f"{c.id_a}\t{c.id_b}\t{c.trend}\t{c.gap_seconds}\t"
                     f"{c.overlap}\n")


def read_annotations(path: str) -> dict[str, list[tuple[str, int]]]:
    """``pair_id  annotator_id  score`` rows, grouped per pair.

    Scores within a pair are ordered by annotator id so aggregation does
    not depend on file order.
    """
    grouped: dict[str, list[tuple[str, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            grouped.setdefault(parts[0], []).append((parts[1], int(parts[2])))
    for pair_id in grouped:
        grouped[pair_id].sort()
    return grouped


def read_pair_texts(path: str) -> dict[str, tuple[str, str]]:
    """``pair_id  textA  textB`` rows."""
    texts: dict[str, tuple[str, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            texts[parts[0]] = (parts[1], parts[2])
    return texts


def write_dataset_tsv(pairs: list[AnnotatedPair], path: str) -> None:
    """``pair_id  textA  textB  s1..sk  avg  sd  var`` with display
    truncation on the derived columns."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            scores = "\t".join(str(s) for s in p.scores)
            fh.write(f"{p.pair_id}\t{p.text_a}\t{p.text_b}\t{scores}\t"
                     f"{truncate2(p.avg)}\t{truncate2(p.sd)}\t"
                     f"{truncate2(p.var)}\n")
