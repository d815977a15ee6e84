"""Evaluation metrics and reporting: Pearson, Spearman, MSE, bucketed MSE.

Spearman uses average ranks for ties and is computed as Pearson over the
rank vectors; with no ties this matches the classical 1 - 6*sum(d^2) /
(n*(n^2-1)) form exactly.  Bucketed MSE partitions rows by gold label into
[0,1), [1,2), [2,3), [3,4), [4,5] so every label lands somewhere; empty
buckets report as null.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantInput, LengthMismatch

BUCKET_EDGES = ((0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0), (4.0, 5.0))


def _paired(x, y, min_n: int):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"got {x.shape} vs {y.shape} values")
    if x.size < min_n:
        raise ConstantInput(f"need at least {min_n} pairs, got {x.size}")
    return x, y


def pearson(x, y) -> float:
    """Sum((x-xbar)(y-ybar)) / sqrt(Sum(x-xbar)^2 * Sum(y-ybar)^2)."""
    x, y = _paired(x, y, min_n=2)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInput("correlation is undefined for a constant input")
    return float(dx @ dy) / np.sqrt(sxx * syy)


def ranks(x) -> np.ndarray:
    """Ranks starting at 1; tied values share their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    out = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        out[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return out


def spearman(x, y) -> float:
    """Pearson correlation of the (average-tie) rank vectors."""
    x, y = _paired(x, y, min_n=2)
    return pearson(ranks(x), ranks(y))


def mse(pred, gold) -> float:
    """Mean of squared (gold - pred) differences."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape or pred.ndim != 1:
        raise LengthMismatch(f"got {pred.shape} vs {gold.shape} values")
    if pred.size == 0:
        raise LengthMismatch("need at least one pair")
    d = gold - pred
    return float((d * d).mean())


@dataclass
class ScoredPairSet:
    """Predictions paired with gold labels in [0, 5]."""

    ids: list[str]
    pred: np.ndarray
    gold: np.ndarray

    def __post_init__(self):
        self.pred = np.asarray(self.pred, dtype=np.float64)
        self.gold = np.asarray(self.gold, dtype=np.float64)
        if not (len(self.ids) == self.pred.size == self.gold.size):
            raise LengthMismatch("ids, pred, and gold must align")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("pair ids must be unique")
        if self.gold.size and (self.gold.min() < 0 or self.gold.max() > 5):
            raise ValueError("gold labels must lie in [0, 5]")

    def __len__(self) -> int:
        return len(self.ids)


def bucket_index(label: float) -> int:
    """[k, k+1) for k in 0..3, final bucket [4, 5] closed."""
    return min(int(label), len(BUCKET_EDGES) - 1)


def bucketed_mse(s: ScoredPairSet):
    """Per-bucket (lo, hi, mse-or-None, count) rows over the gold labels."""
    rows = []
    idx = np.array([bucket_index(g) for g in s.gold], dtype=int) \
        if len(s) else np.array([], dtype=int)
    for b, (lo, hi) in enumerate(BUCKET_EDGES):
        sel = idx == b
        count = int(sel.sum())
        value = mse(s.pred[sel], s.gold[sel]) if count else None
        rows.append((lo, hi, value, count))
    return rows


@dataclass
class EvalReport:
    """Metrics for one named prediction set; ``error`` isolates failures."""

    name: str
    n: int
    pearson: float | None = None
    spearman: float | None = None
    mse: float | None = None
    buckets: list = field(default_factory=list)
    error: str | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "pearson": self.pearson,
            "spearman": self.spearman,
            "mse": self.mse,
            "bucket_mse": [
                {"lo": lo, "hi": hi, "mse": value, "count": count}
                for lo, hi, value, count in self.buckets
            ],
            "error": self.error,
            "metadata": self.metadata,
        }


def evaluate_set(name: str, s: ScoredPairSet,
                 metadata: dict | None = None) -> EvalReport:
    report = EvalReport(name=name, n=len(s), metadata=metadata or {})
    try:
        report.pearson = pearson(s.pred, s.gold)
        report.spearman = spearman(s.pred, s.gold)
        report.mse = mse(s.pred, s.gold)
        report.buckets = bucketed_mse(s)
    except (ConstantInput, LengthMismatch) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    return report


def make_report(named_sets, metadata: dict | None = None) -> list[EvalReport]:
    """Evaluate each named set; rows ordered by descending Pearson.

    ``named_sets`` is an iterable of (name, ScoredPairSet).  A failing set
    contributes an error row without aborting the others.
    """
    rows = [evaluate_set(name, s, metadata) for name, s in named_sets]
    rows.sort(key=lambda r: (r.error is not None,
                             -(r.pearson if r.pearson is not None else 0.0),
                             r.name))
    return rows


def report_to_json(rows: list[EvalReport], metadata: dict | None = None) -> str:
    doc = {"metadata": metadata or {}, "results": [r.to_dict() for r in rows]}
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _fmt(value, nd: int) -> str:
    return "-" if value is None else f"{value:.{nd}f}"


def render_text_tables(rows: list[EvalReport]) -> str:
    """Plain-text summary: correlation table, then the per-bucket table."""
    name_w = max([len(r.name) for r in rows] + [len("Model")]) + 2
    lines = [f"{'Model':<{name_w}}{'Pearson':>9}  {'Spearman':>9}"]
    for r in rows:
        if r.error:
            lines.append(f"{r.name:<{name_w}}ERROR({r.error})")
        else:
            lines.append(f"{r.name:<{name_w}}{_fmt(r.pearson, 4):>9}  "
                         f"{_fmt(r.spearman, 4):>9}")
    lines.append("")
    labels = [f"[{lo:g},{hi:g}" + ("]" if hi >= 5 else ")")
              for lo, hi in BUCKET_EDGES]
    hdr = "".join(f"{lab:>10}" for lab in labels)
    lines.append(f"{'Model':<{name_w}}{'MSE':>8}{hdr}")
    for r in rows:
        if r.error:
            lines.append(f"{r.name:<{name_w}}ERROR({r.error})")
            continue
        cells = "".join(f"{_fmt(value, 2):>10}"
                        for _, _, value, _ in r.buckets)
        lines.append(f"{r.name:<{name_w}}{_fmt(r.mse, 2):>8}{cells}")
    return "\n".join(lines) + "\n"


def read_scored_pairs(path: str) -> ScoredPairSet:
    """Tab-separated ``id  pred  gold`` rows; ``#`` lines are comments."""
    ids: list[str] = []
    pred: list[float] = []
    gold: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            ids.append(parts[0])
            pred.append(float(parts[1]))
            gold.append(float(parts[2]))
    return ScoredPairSet(ids=ids, pred=np.array(pred), gold=np.array(gold))
