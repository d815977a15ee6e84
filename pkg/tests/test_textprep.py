import random

import pytest

from shortsim.textprep import (
    EmojiLexicon,
    RawPost,
    load_emoji_lexicon,
    normalize,
    preprocess,
    preprocess_text,
    replace_entities,
    strip_and_remove,
)

ZWNJ = "‌"


@pytest.fixture
def lex():
    return EmojiLexicon({
        "\U0001f600": "خنده",
        "❤️": "قلب",
        "\U0001f1ee\U0001f1f7": "ایران",
    })


class TestStripAndRemove:
    def test_html_tags_and_double_spaces(self):
        assert strip_and_remove("<b>سلام</b>  دنیا") == "سلام دنیا"

    def test_script_content_dropped_tag_content_kept(self):
        text = "<p>متن</p><script>var x = 1;</script><style>b{}</style> ادامه"
        assert strip_and_remove(text) == "متن ادامه"

    def test_hash_removed_body_kept(self):
        assert strip_and_remove("#تهران هوا") == "تهران هوا"

    def test_email_removed(self):
        assert strip_and_remove("write a@b.com now") == "write now"

    def test_phone_removed(self):
        assert strip_and_remove("zang bezan 0912 345 6789 hatman") == "zang bezan hatman"
        assert strip_and_remove("تماس ۰۹۱۲۳۴۵۶۷۸۹ بگیر") == "تماس بگیر"

    def test_short_digit_runs_kept(self):
        assert strip_and_remove("سال ۱۴۰۲ بود") == "سال ۱۴۰۲ بود"

    def test_line_breaks_and_controls(self):
        assert strip_and_remove("الف\nب\tج\x00د") == "الف ب ج د"

    def test_weird_unicode_dropped_zwnj_kept(self):
        assert strip_and_remove(f"می{ZWNJ}روم‎﻿ خانه") == f"می{ZWNJ}روم خانه"

    def test_empty_output_allowed(self):
        assert strip_and_remove("  <br/>  ") == ""


class TestReplaceEntities:
    def test_mention(self, lex):
        assert replace_entities("@ali سلام", lex) == "USERNAME سلام"

    def test_url(self, lex):
        assert replace_entities("ببین https://t.co/x", lex) == "ببین URL"

    def test_www_url(self, lex):
        assert replace_entities("www.example.com/a?b=1 متن", lex) == "URL متن"

    def test_arabic_yeh_to_persian(self, lex):
        assert replace_entities("علي", lex) == "علی"

    def test_known_emoji_replaced_space_delimited(self, lex):
        assert replace_entities("سلام\U0001f600خوبی", lex).split() == ["سلام", "خنده", "خوبی"]

    def test_multi_codepoint_emoji_longest_match(self, lex):
        out = replace_entities("❤️ اینجا", lex)
        assert out.split() == ["قلب", "اینجا"]
        out = replace_entities("\U0001f1ee\U0001f1f7", lex)
        assert out.strip() == "ایران"

    def test_unknown_emoji_removed_and_counted(self, lex):
        counters = {}
        out = replace_entities("بد \U0001f9ff\U0001f9ff شد", lex, counters)
        assert "\U0001f9ff" not in out
        assert counters["unknown_emoji"] == 2


class TestNormalize:
    def test_arabic_kaf(self):
        assert normalize("كتاب") == "کتاب"

    def test_digit_family_unification(self):
        assert normalize("١٢٣") == "۱۲۳"

    def test_kashida_removed(self):
        assert normalize("بـــله") == "بله"

    def test_diacritics_removed(self):
        assert normalize("مَدرَسَه") == "مدرسه"

    def test_zero_width_canonicalized(self):
        assert normalize(f"می{ZWNJ}{ZWNJ}خوام") == f"می{ZWNJ}خوام"
        assert normalize(f"سلام {ZWNJ}دنیا") == "سلام دنیا"
        assert normalize("سلام​دنیا") == "سلامدنیا"

    def test_nfc_composition(self):
        # decomposed alef + madda composes to U+0622
        assert normalize("آب") == "آب"


class TestPreprocess:
    def test_hand_composed_pipeline(self, lex):
        post = RawPost(id="1", text="@ali  سلام #خبر")
        # oracle: compose the three stages explicitly
        expected = normalize(replace_entities(strip_and_remove(post.text), lex))
        got = preprocess(post, lex)
        assert got.text == expected == "USERNAME سلام خبر"
        assert got.applied_steps == ("strip_and_remove", "replace_entities", "normalize")

    def test_clean_text_is_fixed_point(self, lex):
        assert preprocess(RawPost(id="1", text="سلام"), lex).text == "سلام"

    def test_raw_post_invariants(self):
        with pytest.raises(ValueError):
            RawPost(id="", text="x")
        with pytest.raises(ValueError):
            RawPost(id="a", text="")


def _random_noisy_lines(n):
    """Assemble messy lines from building blocks seen in social posts."""
    rng = random.Random(1387)
    words = ["سلام", "دنیا", "كتاب", "میرم", f"می{ZWNJ}خوام", "خونه", "بچه‌ها",
             "ولی", "علي", "۱۴۰۲", "١٢٣", "خبر", "tehran", "weather"]
    noise = ["@ali", "@user_42", "#تهران", "#خبر_فوری", "https://t.co/abc",
             "www.x.com/y", "a@b.com", "<b>", "</b>", "<script>x</script>",
             "\U0001f600", "\U0001f9ff", "❤️", "0912 345 6789",
             "\n", "\t", "  ", "‎", "بـــله"]
    lines = []
    for _ in range(n):
        k = rng.randint(3, 12)
        parts = [rng.choice(words + noise) for _ in range(k)]
        lines.append(" ".join(parts))
    return lines


class TestPipelineProperties:
    def test_idempotence_on_random_corpus(self, lex):
        for line in _random_noisy_lines(1000):
            once = preprocess_text(line, lex)
            twice = preprocess_text(once, lex)
            assert twice == once

    def test_forbidden_patterns_absent(self, lex):
        import re
        from shortsim.textprep import is_emoji_codepoint
        for line in _random_noisy_lines(500):
            out = preprocess_text(line, lex)
            assert "#" not in out
            assert not re.search(r"@\w", out)
            assert "http://" not in out and "https://" not in out
            assert "  " not in out
            assert "\n" not in out
            assert not any(is_emoji_codepoint(ch) for ch in out)

    def test_determinism(self, lex):
        lines = _random_noisy_lines(100)
        a = [preprocess_text(t, lex) for t in lines]
        b = [preprocess_text(t, lex) for t in lines]
        assert a == b


class TestEmojiLexicon:
    def test_key_must_contain_emoji(self):
        with pytest.raises(ValueError):
            EmojiLexicon({"abc": "کلمه"})

    def test_value_must_not_contain_emoji(self):
        with pytest.raises(ValueError):
            EmojiLexicon({"\U0001f600": "خنده\U0001f600"})

    def test_loader(self, tmp_path):
        p = tmp_path / "lex.tsv"
        p.write_text("# comment line\n\U0001f600\tخنده\n\n❤️\tقلب\n",
                     encoding="utf-8")
        lex = load_emoji_lexicon(str(p))
        assert len(lex) == 2
        assert lex.entries["\U0001f600"] == "خنده"

    def test_loader_rejects_malformed(self, tmp_path):
        p = tmp_path / "lex.tsv"
        p.write_text("\U0001f600 خنده\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_emoji_lexicon(str(p))
