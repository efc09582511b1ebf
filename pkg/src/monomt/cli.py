"""Command-line entry point.

Subcommands: gen-toy, train, translate, eval, baseline, learn-bpe,
apply-bpe. Exit codes: 0 success, 1 usage or configuration error,
2 data or format error, 3 numeric failure (NaN loss). Every
subcommand is deterministic given --seed and writes only to paths
named in its flags.
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter

import numpy as np

from .bpe import MergeTable, apply_bpe, learn_bpe, undo_bpe
from .config import PRESETS, RunConfig, resolve_config
from .data import Vocabulary, build_vocab, length_filter, read_corpus, write_corpus
from .decoding import translate_corpus
from .embeddings import CrossLingualSpace, load_embeddings, word_by_word_translate
from .errors import (ConfigError, ContractError, EmptyInputError, FormatError,
                     MonomtError, NumericError)
from .evaluation import bleu
from .model import ModelConfig, TranslationModel, load_checkpoint
from .synthetic import LangPairSpec, write_toy_dataset
from .training import Adam, TrainSettings, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monomt",
        description="Train and run a translator on monolingual corpora alone.")
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, help_text):
        return sub.add_parser(name, help=help_text,
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    p = cmd("gen-toy", "generate a synthetic language pair with gold embeddings")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--vocab", type=int, default=100, help="types per language")
    p.add_argument("--train", type=int, default=10_000, help="monolingual sentences per side")
    p.add_argument("--test", type=int, default=500, help="parallel test sentences")
    p.add_argument("--parallel", type=int, default=0, help="parallel training pairs")
    p.add_argument("--dim", type=int, default=32, help="embedding dimension")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--zipf", type=float, default=1.0, help="token frequency exponent")
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--coherence", type=float, default=0.9,
                   help="strength of the latent word-order structure")
    p.add_argument("--branching", type=int, default=2, help="preferred successors per type")
    p.add_argument("--perturbation", type=float, default=0.0,
                   help="gaussian noise on the second language's vectors")
    p.add_argument("--identity-lexicon", action="store_true",
                   help="both languages share token strings")
    p.add_argument("--no-reorder", action="store_true", help="disable pairwise swaps")
    p.add_argument("--lang1", default="l1")
    p.add_argument("--lang2", default="l2")

    p = cmd("train", "train a dual translator")
    p.add_argument("--mode", choices=("unsupervised", "semi", "supervised"),
                   default="unsupervised")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="named hyperparameter preset")
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--out", required=True, help="run directory (checkpoints, metrics)")
    p.add_argument("--mono-l1", default=None, help="monolingual corpus, first language")
    p.add_argument("--mono-l2", default=None, help="monolingual corpus, second language")
    p.add_argument("--parallel-l1", default=None, help="parallel corpus, first-language side")
    p.add_argument("--parallel-l2", default=None, help="parallel corpus, second-language side")
    p.add_argument("--emb-l1", required=True, help="cross-lingual embeddings, first language")
    p.add_argument("--emb-l2", required=True, help="cross-lingual embeddings, second language")
    p.add_argument("--lang1", default="l1")
    p.add_argument("--lang2", default="l2")
    p.add_argument("--bpe", action="store_true",
                   help="corpora are subword-segmented; recorded in the checkpoint")
    p.add_argument("--no-backtranslation", action="store_true",
                   help="denoising-only ablation arm")
    for flag, kind in (("--emb-dim", int), ("--hidden-dim", int), ("--layers", int),
                       ("--batch-size", int), ("--alpha", float), ("--dropout", float),
                       ("--vocab-cap", int), ("--max-len", int), ("--iterations", int),
                       ("--report-every", int), ("--checkpoint-every", int),
                       ("--seed", int)):
        p.add_argument(flag, type=kind, default=None,
                       help=f"override (default {getattr(RunConfig(), flag[2:].replace('-', '_'))})")

    p = cmd("translate", "translate a file with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="source text, one sentence per line")
    p.add_argument("--output", required=True)
    p.add_argument("--direction", required=True, help="SRC-TGT language tags, e.g. l1-l2")
    p.add_argument("--beam", type=int, default=12, help="beam width; 0 selects greedy")

    p = cmd("eval", "corpus BLEU of a hypothesis file against a reference file")
    p.add_argument("hypotheses", help="hypothesis file, one sentence per line")
    p.add_argument("references", help="reference file, one sentence per line")

    p = cmd("baseline", "word-by-word nearest-neighbor translation")
    p.add_argument("--emb-l1", required=True)
    p.add_argument("--emb-l2", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--direction", required=True, help="SRC-TGT language tags, e.g. l1-l2")
    p.add_argument("--lang1", default="l1")
    p.add_argument("--lang2", default="l2")

    p = cmd("learn-bpe", "learn subword merge operations from a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="merge table file")
    p.add_argument("--ops", type=int, default=RunConfig().bpe_ops)

    p = cmd("apply-bpe", "segment a corpus with a learned merge table")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--merges", required=True)

    return parser


# ---------------------------------------------------------------------------
# subcommand handlers


def run_gen_toy(args) -> int:
    if args.zipf <= 0:
        raise ConfigError(f"--zipf must be positive, got {args.zipf}")
    spec = LangPairSpec(
        vocab_size=args.vocab, dim=args.dim, seed=args.seed, zipf_exponent=args.zipf,
        min_len=args.min_len, max_len=args.max_len, coherence=args.coherence,
        branching=args.branching, perturbation=args.perturbation,
        identity_lexicon=args.identity_lexicon, reorder=not args.no_reorder,
        lang1=args.lang1, lang2=args.lang2)
    written = write_toy_dataset(spec, args.out, args.train, args.test, args.parallel)
    for path in written:
        print(path)
    return 0


def _word_frequencies(sentences) -> dict[str, int]:
    counts = Counter()
    for sentence in sentences:
        counts.update(sentence)
    return dict(counts)


def _read_parallel(path_src, path_tgt, max_len):
    src = read_corpus(path_src)
    tgt = read_corpus(path_tgt)
    if len(src) != len(tgt):
        raise FormatError(
            f"parallel sides differ: {len(src)} vs {len(tgt)} lines")
    return [(s, t) for s, t in zip(src, tgt)
            if len(s) <= max_len and len(t) <= max_len]


def run_train(args) -> int:
    overrides = {key: getattr(args, key) for key in (
        "emb_dim", "hidden_dim", "layers", "batch_size", "alpha", "dropout",
        "vocab_cap", "max_len", "iterations", "report_every", "checkpoint_every",
        "seed")}
    config = resolve_config(args.preset, args.config, overrides)
    l1, l2 = args.lang1, args.lang2
    if l1 == l2:
        raise ConfigError("--lang1 and --lang2 must differ")

    needs_mono = args.mode in ("unsupervised", "semi")
    if needs_mono and (args.mono_l1 is None or args.mono_l2 is None):
        raise ConfigError(f"{args.mode} mode needs --mono-l1 and --mono-l2")
    needs_parallel = args.mode in ("semi", "supervised")
    if needs_parallel and (args.parallel_l1 is None or args.parallel_l2 is None):
        raise ConfigError(f"{args.mode} mode needs --parallel-l1 and --parallel-l2")

    mono_sentences: dict[str, list] = {}
    if needs_mono:
        mono_sentences[l1] = list(length_filter(read_corpus(args.mono_l1), config.max_len))
        mono_sentences[l2] = list(length_filter(read_corpus(args.mono_l2), config.max_len))
    pairs = (_read_parallel(args.parallel_l1, args.parallel_l2, config.max_len)
             if needs_parallel else None)

    per_lang: dict[str, list] = {l1: [], l2: []}
    for lang in (l1, l2):
        per_lang[lang].extend(mono_sentences.get(lang, []))
    if pairs:
        per_lang[l1].extend(p[0] for p in pairs)
        per_lang[l2].extend(p[1] for p in pairs)
    vocab_l1 = build_vocab(per_lang[l1], config.vocab_cap, l1)
    vocab_l2 = build_vocab(per_lang[l2], config.vocab_cap, l2)

    emb_l1 = load_embeddings(args.emb_l1, vocab_l1, expected_dim=config.emb_dim)
    emb_l2 = load_embeddings(args.emb_l2, vocab_l2, expected_dim=config.emb_dim)

    model = TranslationModel(
        ModelConfig(emb_dim=config.emb_dim, hidden_dim=config.hidden_dim,
                    layers=config.layers, dropout=config.dropout),
        (vocab_l1, vocab_l2), (emb_l1.vectors, emb_l2.vectors), seed=config.seed)

    mono_ids = {lang: [model.vocabs[lang].encode(s) for s in sentences]
                for lang, sentences in mono_sentences.items()}
    pair_ids = ([(vocab_l1.encode(a), vocab_l2.encode(b)) for a, b in pairs]
                if pairs else None)

    settings = TrainSettings(
        iterations=config.iterations, mode=args.mode, batch_size=config.batch_size,
        report_every=config.report_every, checkpoint_every=config.checkpoint_every,
        out_dir=args.out, seed=config.seed, uses_bpe=args.bpe,
        backtranslation=not args.no_backtranslation)
    result = train(model, mono_ids, pair_ids, settings, adam=Adam(alpha=config.alpha))

    with open(f"{args.out}/config.txt", "w", encoding="utf-8") as f:
        f.write(config.dump())
    for tag in result.schedule:
        print(f"{tag}: final mean loss {result.final_mean(tag):.4f}")
    if result.empty_pseudo_rows:
        print(f"empty pseudo-translations replaced by UNK: {result.empty_pseudo_rows}")
    print(f"checkpoint: {result.checkpoints[-1]}")
    return 0


def _parse_direction(direction: str, langs) -> tuple[str, str]:
    parts = direction.split("-")
    if len(parts) != 2 or parts[0] not in langs or parts[1] not in langs \
            or parts[0] == parts[1]:
        raise ConfigError(
            f"--direction must name both checkpoint languages {sorted(langs)} "
            f"as SRC-TGT, got {direction!r}")
    return parts[0], parts[1]


def run_translate(args) -> int:
    if args.beam < 0:
        raise ConfigError(f"--beam must be >= 0, got {args.beam}")
    model, extra = load_checkpoint(args.checkpoint)
    src_lang, tgt_lang = _parse_direction(args.direction, model.langs)
    sentences = read_corpus(args.input)
    outputs = translate_corpus(model, sentences, src_lang, tgt_lang, beam=args.beam)
    if extra.get("uses_bpe"):
        outputs = [undo_bpe(s) for s in outputs]
    write_corpus(args.output, outputs)
    print(f"translated {len(outputs)} lines -> {args.output}")
    return 0


def run_eval(args) -> int:
    hyps = read_corpus(args.hypotheses)
    refs = read_corpus(args.references)
    report = bleu(hyps, refs)
    print(report)
    return 0


def run_baseline(args) -> int:
    space = CrossLingualSpace(
        _embeddings_with_own_vocab(args.emb_l1, args.lang1),
        _embeddings_with_own_vocab(args.emb_l2, args.lang2))
    src_lang, tgt_lang = _parse_direction(args.direction, (args.lang1, args.lang2))
    sentences = read_corpus(args.input)
    outputs = [word_by_word_translate(s, space, src_lang, tgt_lang) for s in sentences]
    write_corpus(args.output, outputs)
    print(f"translated {len(outputs)} lines -> {args.output}")
    return 0


def _embeddings_with_own_vocab(path, lang):
    """Build the vocabulary from the embedding file itself."""
    tokens = []
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        if len(header.split()) != 2:
            raise FormatError(f"{path}: expected header 'V d'", line=1)
        for line in f:
            if line.strip():
                tokens.append(line.split(" ", 1)[0])
    return load_embeddings(path, Vocabulary(tokens, lang))


def run_learn_bpe(args) -> int:
    if args.ops < 0:
        raise ConfigError(f"--ops must be >= 0, got {args.ops}")
    table = learn_bpe(_word_frequencies(read_corpus(args.input)), args.ops)
    table.save(args.output)
    print(f"learned {len(table)} merges -> {args.output}")
    return 0


def run_apply_bpe(args) -> int:
    table = MergeTable.load(args.merges)
    segmented = [apply_bpe(s, table) for s in read_corpus(args.input)]
    write_corpus(args.output, segmented)
    print(f"segmented {len(segmented)} lines -> {args.output}")
    return 0


HANDLERS = {
    "gen-toy": run_gen_toy,
    "train": run_train,
    "translate": run_translate,
    "eval": run_eval,
    "baseline": run_baseline,
    "learn-bpe": run_learn_bpe,
    "apply-bpe": run_apply_bpe,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_call:
        # argparse uses status 2 for usage errors; 0 stays 0 (--help)
        return 0 if exit_call.code == 0 else 1
    try:
        return HANDLERS[args.command](args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except (FormatError, EmptyInputError, ContractError, MonomtError,
            FileNotFoundError, IndexError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
