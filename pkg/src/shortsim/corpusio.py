"""JSON-lines corpus ingestion and emission.

One object per line with fields ``id``, ``text``, ``ts`` (epoch seconds,
nullable), ``trend`` (nullable).  Malformed lines are skipped and counted;
the read fails only when they exceed a configurable fraction.  Duplicate
ids always fail, naming the offending line.
"""

from __future__ import annotations

import json

from .errors import DuplicateId, TooManyMalformedLines
from .textprep import RawPost

DEFAULT_MALFORMED_THRESHOLD = 0.10


def _parse_line(obj: dict) -> RawPost:
    post_id = obj.get("id")
    text = obj.get("text")
    if not isinstance(post_id, str) or not post_id:
        raise ValueError("missing or empty 'id'")
    if not isinstance(text, str) or not text:
        raise ValueError("missing or empty 'text'")
    ts = obj.get("ts")
    if ts is not None and not isinstance(ts, int):
        raise ValueError("'ts' must be an integer or null")
    trend = obj.get("trend")
    if trend is not None and not isinstance(trend, str):
        raise ValueError("'trend' must be a string or null")
    return RawPost(id=post_id, text=text, timestamp=ts, trend=trend)


def read_corpus(path: str,
                malformed_threshold: float = DEFAULT_MALFORMED_THRESHOLD
                ) -> tuple[list[RawPost], int]:
    """Parse a JSON-lines corpus; returns (posts, malformed_count)."""
    posts: list[RawPost] = []
    seen: dict[str, int] = {}
    malformed = 0
    total = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            total += 1
            try:
                post = _parse_line(json.loads(line))
            except (json.JSONDecodeError, ValueError):
                malformed += 1
                continue
            if post.id in seen:
                raise DuplicateId(
                    f"{path}:{lineno}: id {post.id!r} already used on line "
                    f"{seen[post.id]}")
            seen[post.id] = lineno
            posts.append(post)
    if total and malformed / total > malformed_threshold:
        raise TooManyMalformedLines(
            f"{path}: {malformed} of {total} lines malformed "
            f"(threshold {malformed_threshold:.0%})")
    return posts, malformed


def write_corpus(posts: list[RawPost], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in posts:
            fh.write(json.dumps(
                {"id": p.id, "text": p.text, "ts": p.timestamp,
                 "trend": p.trend},
                ensure_ascii=False) + "\n")
