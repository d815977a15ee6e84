"""Deterministic cleanup pipeline for noisy social-network posts.

The pipeline runs three stages in a fixed order:

    strip_and_remove  ->  replace_entities  ->  normalize

Stage 1 drops markup and noise (HTML tags, emails, phone numbers, control
characters, ``#``), stage 2 rewrites entities (@mentions, URLs, Arabic
letter variants, emoji), stage 3 canonicalizes Unicode (NFC, digit family,
kashida, diacritics, zero-width characters) and re-collapses whitespace.

All functions are pure; applying the full pipeline twice yields the same
text as applying it once.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

# Persian requires ZWNJ (U+200C) inside words; it is the one format
# character the pipeline preserves.
ZWNJ = "‌"
ZWJ = "‍"

# Arabic letter variants commonly typed instead of their Persian forms.
ARABIC_TO_PERSIAN = {
    0x064A: "ی",  # Arabic yeh -> Persian yeh
    0x0643: "ک",  # Arabic kaf -> Persian kaf
    0x0629: "ه",  # teh marbuta -> heh
}

# Arabic-Indic digits unify to the Extended-Arabic-Indic (Persian) family.
DIGIT_MAP = {0x0660 + i: chr(0x06F0 + i) for i in range(10)}

KASHIDA = "ـ"

# Harakat and related combining marks stripped during normalization.
_DIACRITIC_RANGES = ((0x0610, 0x061A), (0x064B, 0x065F), (0x0670, 0x0670))

# Zero-width / directional characters removed outright (ZWNJ is kept).
_ZERO_WIDTH_DROP = "​‍‎‏‪‫‬‭‮﻿"

# Codepoint ranges treated as emoji when scanning for lexicon replacement.
EMOJI_RANGES = (
    (0x1F000, 0x1FBFF),  # supplementary symbol blocks incl. emoticons, flags
    (0x2600, 0x27BF),    # miscellaneous symbols and dingbats
    (0x2B00, 0x2BFF),    # stars, geometric arrows
    (0x2300, 0x23FF),    # technical pictographs (watch, hourglass, ...)
    (0x25A0, 0x25FF),    # geometric shapes
    (0xFE0F, 0xFE0F),    # variation selector-16
    (0x20E3, 0x20E3),    # combining enclosing keycap
)

_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}")
# Digits from the three families seen in Persian tweets, optionally broken
# up by separators; treated as a phone number when >= 7 digits long.  The
# separator class includes zero-width characters and kashida so that a
# digit run the normalizer would later fuse is already caught here.
_DIGIT_CLASS = "0-9٠-٩۰-۹"
_PHONE_SEP = r"\s\-.()ـ​-‏‪-‮﻿"
_PHONE_RE = re.compile(
    rf"\+?[{_DIGIT_CLASS}][{_DIGIT_CLASS}{_PHONE_SEP}]*[{_DIGIT_CLASS}]"
)
_SCRIPT_STYLE_RE = re.compile(
    r"<\s*(script|style)\b[^>]*>.*?<\s*/\s*\1\s*>", re.IGNORECASE | re.DOTALL
)
_TAG_RE = re.compile(r"<[^<>]+>")
_MENTION_RE = re.compile(r"@\w+", re.UNICODE)
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_WS_RE = re.compile(r"\s+")

PIPELINE_STEPS = ("strip_and_remove", "replace_entities", "normalize")


@dataclass(frozen=True)
class RawPost:
    """One ingested social post."""

    id: str
    text: str
    timestamp: int | None = None
    trend: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("post id must be non-empty")
        if not self.text:
            raise ValueError(f"post {self.id!r}: text must be non-empty")


@dataclass(frozen=True)
class CleanText:
    """Preprocessed text plus the ordered steps that produced it."""

    text: str
    applied_steps: tuple[str, ...] = PIPELINE_STEPS


@dataclass
class EmojiLexicon:
    """Maps emoji codepoint sequences to replacement words.

    Keys must contain at least one emoji codepoint, values none; both are
    checked on insertion.  Longest keys win during matching.
    """

    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        items = dict(self.entries)
        self.entries = {}
        for key, word in items.items():
            self.add(key, word)

    def add(self, key: str, word: str) -> None:
        if not any(is_emoji_codepoint(ch) for ch in key):
            raise ValueError(f"lexicon key {key!r} contains no emoji codepoint")
        if any(is_emoji_codepoint(ch) for ch in word):
            raise ValueError(f"replacement {word!r} for {key!r} contains emoji")
        self.entries[key] = word

    def __len__(self) -> int:
        return len(self.entries)


def is_emoji_codepoint(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in EMOJI_RANGES)


def _strip_weird(text: str) -> str:
    """Drop control/format/surrogate/private-use codepoints.

    Controls become separators; zero-width format characters vanish without
    a trace.  ZWNJ and ZWJ survive this stage: ZWNJ is meaningful in
    Persian and ZWJ may still glue an emoji sequence that the replace stage
    must see intact.
    """
    parts = []
    for ch in text:
        if ch in (ZWNJ, ZWJ):
            parts.append(ch)
            continue
        cat = unicodedata.category(ch)
        if cat == "Cc":
            parts.append(" ")
        elif cat not in ("Cf", "Cs", "Co", "Cn"):
            parts.append(ch)
    return "".join(parts)


def strip_and_remove(text: str) -> str:
    """Drop markup and noise: tags, emails, phones, controls, ``#``.

    Tag content is kept, script/style content is dropped.  Whitespace runs
    collapse to one space and the result is trimmed.
    """
    text = _SCRIPT_STYLE_RE.sub(" ", text)
    text = _TAG_RE.sub(" ", text)
    text = _EMAIL_RE.sub(" ", text)

    def _phone(m: re.Match) -> str:
        digits = len(re.findall(f"[{_DIGIT_CLASS}]", m.group()))
        return " " if digits >= 7 else m.group()

    text = _PHONE_RE.sub(_phone, text)
    text = text.replace("#", "")
    text = _strip_weird(text)
    return _WS_RE.sub(" ", text).strip()


def _match_lexicon(text: str, pos: int, lex: EmojiLexicon) -> tuple[str, int] | None:
    """Longest lexicon key starting at ``pos``, or None."""
    best = None
    for key, word in lex.entries.items():
        if text.startswith(key, pos) and (best is None or len(key) > len(best[1])):
            best = (word, key)
    if best is None:
        return None
    return best[0], len(best[1])


def replace_entities(text: str, lex: EmojiLexicon,
                     counters: dict[str, int] | None = None) -> str:
    """Rewrite @mentions, URLs, Arabic letter variants, and emoji.

    Known emoji become their lexicon word (space-delimited); unknown emoji
    are dropped and tallied under ``counters['unknown_emoji']``.
    """
    text = _URL_RE.sub("URL", text)
    text = _MENTION_RE.sub("USERNAME", text)
    text = text.translate(ARABIC_TO_PERSIAN)

    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        hit = _match_lexicon(text, i, lex)
        if hit is not None:
            word, consumed = hit
            out.append(f" {word} ")
            i += consumed
            continue
        ch = text[i]
        if ch == ZWJ:
            # Joiners not consumed by a lexicon match only ever glue emoji
            # sequences; normalize would drop them later anyway.
            i += 1
            continue
        if is_emoji_codepoint(ch):
            if counters is not None and ord(ch) not in (0xFE0F, 0x20E3):
                counters["unknown_emoji"] = counters.get("unknown_emoji", 0) + 1
            i += 1
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def normalize(text: str) -> str:
    """Canonicalize Unicode after entity replacement.

    NFC composition, Arabic->Persian letters, one digit family, kashida and
    diacritics stripped, zero-width characters canonicalized (runs of ZWNJ
    collapse to one, other zero-width characters removed, ZWNJ at word
    edges dropped), whitespace re-collapsed.
    """
    text = unicodedata.normalize("NFC", text)
    text = text.translate(ARABIC_TO_PERSIAN)
    text = text.translate(DIGIT_MAP)
    text = text.replace(KASHIDA, "")
    text = "".join(
        ch for ch in text
        if not any(lo <= ord(ch) <= hi for lo, hi in _DIACRITIC_RANGES)
    )
    text = "".join(ch for ch in text if ch not in _ZERO_WIDTH_DROP
                   and not (0xFE00 <= ord(ch) <= 0xFE0F))
    text = re.sub(f"{ZWNJ}+", ZWNJ, text)
    text = re.sub(rf"{ZWNJ}(?=\s)|(?<=\s){ZWNJ}|^{ZWNJ}|{ZWNJ}$", "", text)
    return _WS_RE.sub(" ", text).strip()


def preprocess(post: RawPost, lex: EmojiLexicon | None = None,
               counters: dict[str, int] | None = None) -> CleanText:
    """Full pipeline: strip -> replace -> normalize, order fixed."""
    lex = lex if lex is not None else EmojiLexicon()
    text = strip_and_remove(post.text)
    text = replace_entities(text, lex, counters)
    text = normalize(text)
    return CleanText(text=text, applied_steps=PIPELINE_STEPS)


def preprocess_text(text: str, lex: EmojiLexicon | None = None,
                    counters: dict[str, int] | None = None) -> str:
    """Pipeline over a bare string (ids/metadata not needed)."""
    lex = lex if lex is not None else EmojiLexicon()
    return normalize(replace_entities(strip_and_remove(text), lex, counters))


def load_emoji_lexicon(path: str) -> EmojiLexicon:
    """Read a tab-separated lexicon: emoji sequence, replacement word.

    ``#``-prefixed lines and blank lines are ignored.
    """
    lex = EmojiLexicon()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 2 tab-separated columns")
            lex.add(parts[0], parts[1])
    return lex
