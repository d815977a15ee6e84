"""Command-line front end tying the pipeline stages together.

One binary, eleven subcommands: preprocess, train-tokenizer, tokenize,
compare-tokenizers, pretrain, embed, score, evaluate, build-pairs,
aggregate, label-dist.  All randomness flows from a single ``--seed``
flag, environment variables are never consulted, and every artifact gets
a ``<path>.meta.json`` provenance sidecar (tool version + command +
options + seed) so a run can be reproduced byte-for-byte.

Exit codes: 0 success, 1 runtime failure (message on stderr), 2 bad
usage.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .corpusio import DEFAULT_MALFORMED_THRESHOLD, read_corpus, write_corpus
from .encoder import EncoderConfig
from .errors import ShortsimError
from .evalkit import make_report, read_scored_pairs, render_text_tables, report_to_json
from .pairbuilder import (
    AnnotatedPair,
    candidate_pairs,
    filter_short,
    label_distribution,
    read_annotations,
    read_pair_texts,
    write_candidates_tsv,
    write_dataset_tsv,
)
from .pretrain import TrainHyper, train, write_loss_curve
from .similarity import (
    MAPPINGS,
    POOLINGS,
    SimilarityScorer,
    export_embeddings,
)
from .textprep import EmojiLexicon, RawPost, load_emoji_lexicon, preprocess
from .tokenizer import Vocab, describe, train_wordpiece

DEFAULT_SEED = 13


def _write_meta(artifact_path: str, command: str, options: dict) -> None:
    meta = {
        "tool": "shortsim",
        "version": __version__,
        "command": command,
        "options": options,
    }
    with open(artifact_path + ".meta.json", "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def _options_dict(args: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load_lexicon(path: str | None) -> EmojiLexicon:
    return load_emoji_lexicon(path) if path else EmojiLexicon()


def _read_clean_corpus(path: str, threshold: float):
    posts, malformed = read_corpus(path, threshold)
    if malformed:
        print(f"note: skipped {malformed} malformed lines in {path}",
              file=sys.stderr)
    return posts


# --- subcommand implementations ---

def cmd_preprocess(args) -> int:
    lex = _load_lexicon(args.emoji_lexicon)
    posts, malformed = read_corpus(args.input, args.malformed_threshold)
    counters: dict[str, int] = {}
    cleaned: list[RawPost] = []
    dropped_empty = 0
    for post in posts:
        text = preprocess(post, lex, counters).text
        if not text:
            dropped_empty += 1
            continue
        cleaned.append(RawPost(id=post.id, text=text, timestamp=post.timestamp,
                               trend=post.trend))
    write_corpus(cleaned, args.output)
    _write_meta(args.output, "preprocess", _options_dict(args))
    print(f"preprocessed {len(cleaned)} posts "
          f"(skipped: {malformed} malformed, {dropped_empty} emptied; "
          f"unknown emoji removed: {counters.get('unknown_emoji', 0)})",
          file=sys.stderr)
    return 0


def cmd_train_tokenizer(args) -> int:
    posts = _read_clean_corpus(args.input, args.malformed_threshold)
    vocab = train_wordpiece([p.text for p in posts],
                            vocab_size=args.vocab_size,
                            min_freq=args.min_freq)
    vocab.save(args.output)
    _write_meta(args.output, "train-tokenizer", _options_dict(args))
    print(f"trained vocabulary of {len(vocab)} pieces from "
          f"{len(posts)} posts", file=sys.stderr)
    return 0


def cmd_tokenize(args) -> int:
    from .tokenizer import encode
    vocab = Vocab.load(args.vocab)
    posts = _read_clean_corpus(args.input, args.malformed_threshold)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        for post in posts:
            seq = encode(vocab, post.text, args.max_len)
            real = [p for p, m in zip(seq.pieces, seq.attention_mask) if m]
            fh.write(post.id + "\t" + " ".join(real[1:-1]) + "\n")
    _write_meta(args.output, "tokenize", _options_dict(args))
    return 0


def cmd_compare_tokenizers(args) -> int:
    vocab_a = Vocab.load(args.vocab_a)
    vocab_b = Vocab.load(args.vocab_b)
    posts = _read_clean_corpus(args.input, args.malformed_threshold)
    texts = [p.text for p in posts]
    rep_a = describe(vocab_a, texts, n_examples=args.examples)
    rep_b = describe(vocab_b, texts, n_examples=args.examples)
    tsv_path = args.output_prefix + ".tsv"
    with open(tsv_path, "w", encoding="utf-8", newline="\n") as fh:
        for (sent, pieces_a), (_, pieces_b) in zip(rep_a.examples,
                                                   rep_b.examples):
            fh.write(f"{sent}\t{' '.join(pieces_a)}\t{' '.join(pieces_b)}\n")
    json_path = args.output_prefix + ".json"
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"unk_rate_a": rep_a.unk_rate, "unk_rate_b": rep_b.unk_rate,
                   "fertility_a": rep_a.fertility,
                   "fertility_b": rep_b.fertility},
                  fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_meta(args.output_prefix, "compare-tokenizers", _options_dict(args))
    print(f"unk_rate {rep_a.unk_rate:.4f} vs {rep_b.unk_rate:.4f}; "
          f"fertility {rep_a.fertility:.4f} vs {rep_b.fertility:.4f}",
          file=sys.stderr)
    return 0


def cmd_pretrain(args) -> int:
    import os
    vocab = Vocab.load(args.vocab)
    posts = _read_clean_corpus(args.input, args.malformed_threshold)
    cfg = EncoderConfig(layers=args.layers, heads=args.heads,
                        hidden=args.hidden, ff_dim=args.ff_dim,
                        vocab_size=len(vocab),
                        max_positions=args.max_positions,
                        dropout_rate=args.dropout)
    hyper = TrainHyper(lr=args.lr, batch_size=args.batch_size,
                       epochs=args.epochs, mask_rate=args.mask_rate,
                       max_len=args.max_len, seed=args.seed,
                       bert_split=args.bert_split)
    params, state = train([p.text for p in posts], vocab, cfg, hyper,
                          log_every=args.log_every)
    os.makedirs(args.output_dir, exist_ok=True)
    ckpt = os.path.join(args.output_dir, "model.ckpt")
    save_checkpoint(params, cfg, ckpt)
    loss_path = os.path.join(args.output_dir, "loss.csv")
    write_loss_curve(state.loss_history, loss_path)
    run_config = {"encoder": cfg.to_dict(), "hyper": hyper.to_dict(),
                  "seed": args.seed, "steps": state.step,
                  "tool": "shortsim", "version": __version__}
    with open(os.path.join(args.output_dir, "train_config.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(run_config, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_meta(ckpt, "pretrain", _options_dict(args))
    final = state.loss_history[-1][2] if state.loss_history else float("nan")
    print(f"trained {state.step} steps; final loss {final:.4f}; "
          f"checkpoint at {ckpt}", file=sys.stderr)
    return 0


def cmd_embed(args) -> int:
    scorer = SimilarityScorer.load(args.model, args.vocab,
                                   lexicon=_load_lexicon(args.emoji_lexicon),
                                   pooling=args.pooling)
    posts = _read_clean_corpus(args.input, args.malformed_threshold)
    vectors = [scorer.embed(p.text, source_id=p.id) for p in posts]
    export_embeddings(vectors, args.output)
    with open(args.output + ".ids.txt", "w", encoding="utf-8",
              newline="\n") as fh:
        for p in posts:
            fh.write(p.id + "\n")
    _write_meta(args.output, "embed", _options_dict(args))
    print(f"embedded {len(vectors)} posts (dim {scorer.cfg.hidden})",
          file=sys.stderr)
    return 0


def cmd_score(args) -> int:
    scorer = SimilarityScorer.load(args.model, args.vocab,
                                   lexicon=_load_lexicon(args.emoji_lexicon),
                                   pooling=args.pooling, mapping=args.mapping)
    n = 0
    with open(args.pairs, encoding="utf-8") as src, \
            open(args.out, "w", encoding="utf-8", newline="\n") as dst:
        for lineno, line in enumerate(src, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ShortsimError(
                    f"{args.pairs}:{lineno}: expected 'id<TAB>textA<TAB>textB'")
            pair_id, text_a, text_b = parts
            res = scorer.score_pair(text_a, text_b)
            dst.write(f"{pair_id}\t{text_a}\t{text_b}\t"
                      f"{res.cosine:.6f}\t{res.score:.6f}\n")
            n += 1
    _write_meta(args.out, "score", _options_dict(args))
    print(f"scored {n} pairs ({args.pooling}/{args.mapping})",
          file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    named = []
    for spec in args.pred:
        if "=" not in spec:
            raise ShortsimError(
                f"--pred wants NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        named.append((name, read_scored_pairs(path)))
    rows = make_report(named, metadata={"tool": "shortsim",
                                        "version": __version__})
    json_path = args.output_prefix + ".json"
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_to_json(rows))
    text = render_text_tables(rows)
    with open(args.output_prefix + ".txt", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(text)
    _write_meta(args.output_prefix, "evaluate", _options_dict(args))
    print(text, end="")
    failed = [r.name for r in rows if r.error]
    if failed:
        print(f"error: metric failure in set(s): {', '.join(failed)}",
              file=sys.stderr)
        return 1
    return 0


def cmd_build_pairs(args) -> int:
    posts = _read_clean_corpus(args.input, args.malformed_threshold)
    long_enough = filter_short(posts, min_words=args.min_words)
    pairs = candidate_pairs(long_enough,
                            max_gap_seconds=args.max_gap_seconds,
                            min_overlap=args.min_overlap)
    write_candidates_tsv(pairs, args.output)
    _write_meta(args.output, "build-pairs", _options_dict(args))
    print(f"kept {len(long_enough)}/{len(posts)} posts; "
          f"mined {len(pairs)} candidate pairs", file=sys.stderr)
    return 0


def cmd_aggregate(args) -> int:
    grouped = read_annotations(args.annotations)
    if not grouped:
        raise ShortsimError(f"no annotations found in {args.annotations}")
    texts = read_pair_texts(args.texts)
    ks = {len(v) for v in grouped.values()}
    if len(ks) > 1:
        raise ShortsimError(
            f"inconsistent annotator counts per pair: {sorted(ks)}")
    rows: list[AnnotatedPair] = []
    for pair_id in sorted(grouped):
        if pair_id not in texts:
            raise ShortsimError(f"pair {pair_id!r} has no texts in "
                                f"{args.texts}")
        text_a, text_b = texts[pair_id]
        scores = [score for _, score in grouped[pair_id]]
        rows.append(AnnotatedPair.build(pair_id, text_a, text_b, scores))
    write_dataset_tsv(rows, args.output)
    _write_meta(args.output, "aggregate", _options_dict(args))
    print(f"aggregated {len(rows)} pairs ({next(iter(ks))} annotators each)",
          file=sys.stderr)
    return 0


def cmd_label_dist(args) -> int:
    labels: list[float] = []
    with open(args.dataset, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 7:
                raise ShortsimError(f"{args.dataset}:{lineno}: too few columns")
            labels.append(float(cols[-3]))   # avg sits before sd and var
    hist = label_distribution(labels, bin_width=args.bin_width)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"bin_width": args.bin_width, "n": len(labels),
                   "bins": [{"lo": lo, "hi": hi, "count": c}
                            for lo, hi, c in hist]},
                  fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_meta(args.output, "label-dist", _options_dict(args))
    for lo, hi, count in hist:
        bar = "#" * count
        print(f"[{lo:.2f},{hi:.2f}] {count:5d} {bar}", file=sys.stderr)
    return 0


# --- parser wiring ---

def _add_corpus_arg(sub, required=True):
    sub.add_argument("--input", required=required,
                     help="JSON-lines corpus (id, text, ts, trend)")
    sub.add_argument("--malformed-threshold", type=float,
                     default=DEFAULT_MALFORMED_THRESHOLD,
                     help="abort when this fraction of lines is malformed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shortsim",
        description="Pipeline for informal short-text semantic similarity.")
    parser.add_argument("--version", action="version",
                        version=f"shortsim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("preprocess", help="clean a raw corpus")
    _add_corpus_arg(s)
    s.add_argument("--output", required=True)
    s.add_argument("--emoji-lexicon", default=None,
                   help="TSV of emoji<TAB>replacement word")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.set_defaults(func=cmd_preprocess)

    s = subs.add_parser("train-tokenizer", help="learn a WordPiece vocabulary")
    _add_corpus_arg(s)
    s.add_argument("--output", required=True, help="vocabulary file")
    s.add_argument("--vocab-size", type=int, default=8000)
    s.add_argument("--min-freq", type=int, default=2)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.set_defaults(func=cmd_train_tokenizer)

    s = subs.add_parser("tokenize", help="segment a corpus with a vocabulary")
    _add_corpus_arg(s)
    s.add_argument("--vocab", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--max-len", type=int, default=64)
    s.set_defaults(func=cmd_tokenize)

    s = subs.add_parser("compare-tokenizers",
                        help="side-by-side quality of two vocabularies")
    _add_corpus_arg(s)
    s.add_argument("--vocab-a", required=True)
    s.add_argument("--vocab-b", required=True)
    s.add_argument("--output-prefix", required=True)
    s.add_argument("--examples", type=int, default=10)
    s.set_defaults(func=cmd_compare_tokenizers)

    s = subs.add_parser("pretrain", help="masked-language-model pretraining")
    _add_corpus_arg(s)
    s.add_argument("--vocab", required=True)
    s.add_argument("--output-dir", required=True)
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--heads", type=int, default=2)
    s.add_argument("--hidden", type=int, default=128)
    s.add_argument("--ff-dim", type=int, default=512)
    s.add_argument("--max-positions", type=int, default=128)
    s.add_argument("--dropout", type=float, default=0.1)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--batch-size", type=int, default=32)
    s.add_argument("--epochs", type=int, default=5)
    s.add_argument("--mask-rate", type=float, default=0.15)
    s.add_argument("--max-len", type=int, default=64)
    s.add_argument("--bert-split", action="store_true",
                   help="use the 80/10/10 mask/random/keep corruption")
    s.add_argument("--log-every", type=int, default=0)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.set_defaults(func=cmd_pretrain)

    s = subs.add_parser("embed", help="export pooled sentence embeddings")
    _add_corpus_arg(s)
    s.add_argument("--model", required=True)
    s.add_argument("--vocab", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--pooling", choices=POOLINGS, default="mean")
    s.add_argument("--emoji-lexicon", default=None)
    s.set_defaults(func=cmd_embed)

    s = subs.add_parser("score", help="similarity scores for text pairs")
    s.add_argument("--model", required=True)
    s.add_argument("--vocab", required=True)
    s.add_argument("--pairs", required=True,
                   help="TSV: id, textA, textB")
    s.add_argument("--out", required=True,
                   help="output TSV: id, textA, textB, cosine, score")
    s.add_argument("--pooling", choices=POOLINGS, default="mean")
    s.add_argument("--mapping", choices=MAPPINGS, default="clamp")
    s.add_argument("--emoji-lexicon", default=None)
    s.set_defaults(func=cmd_score)

    s = subs.add_parser("evaluate", help="correlation/MSE report")
    s.add_argument("--pred", action="append", required=True,
                   metavar="NAME=PATH",
                   help="prediction file (TSV: id, pred, gold); repeatable")
    s.add_argument("--output-prefix", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = subs.add_parser("build-pairs", help="mine candidate pairs")
    _add_corpus_arg(s)
    s.add_argument("--output", required=True)
    s.add_argument("--min-words", type=int, default=4)
    s.add_argument("--max-gap-seconds", type=int, default=86_400)
    s.add_argument("--min-overlap", type=int, default=5)
    s.set_defaults(func=cmd_build_pairs)

    s = subs.add_parser("aggregate", help="aggregate annotator scores")
    s.add_argument("--annotations", required=True,
                   help="TSV: pair_id, annotator_id, score")
    s.add_argument("--texts", required=True,
                   help="TSV: pair_id, textA, textB")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_aggregate)

    s = subs.add_parser("label-dist", help="label histogram of a dataset")
    s.add_argument("--dataset", required=True,
                   help="aggregated dataset TSV")
    s.add_argument("--output", required=True, help="JSON histogram")
    s.add_argument("--bin-width", type=float, default=1.0)
    s.set_defaults(func=cmd_label_dist)

    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ShortsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
