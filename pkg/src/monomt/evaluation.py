"""Corpus BLEU (reference-script semantics) and per-word perplexity.

BLEU is single-reference, corpus-level, unsmoothed: clipped n-gram
precisions for n=1..4, brevity penalty min(1, exp(1 − ref/hyp)), and a
geometric mean that collapses to 0 when any precision is 0. Scoring
always operates on words, so subword output must be unsplit first.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import Batch, pad_batch
from .errors import ContractError
from .model import TranslationModel

MAX_ORDER = 4


@dataclass
class BleuReport:
    """Corpus score on the 0-100 scale with its components."""

    bleu: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int

    def __str__(self):
        parts = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        return (f"BLEU = {self.bleu:.2f}, {parts} "
                f"(BP={self.brevity_penalty:.3f}, hyp_len={self.hyp_length}, "
                f"ref_len={self.ref_length})")


def _ngrams(tokens: list[str], order: int) -> Counter:
    return Counter(tuple(tokens[i:i + order]) for i in range(len(tokens) - order + 1))


def bleu(hypotheses: list[list[str]], references: list[list[str]]) -> BleuReport:
    """Corpus BLEU of tokenized hypotheses against single references."""
    if len(hypotheses) != len(references):
        raise ContractError(
            f"bleu: {len(hypotheses)} hypotheses vs {len(references)} references")
    matched = [0] * MAX_ORDER
    total = [0] * MAX_ORDER
    hyp_length = 0
    ref_length = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_length += len(hyp)
        ref_length += len(ref)
        for n in range(1, MAX_ORDER + 1):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref, n)
            total[n - 1] += sum(hyp_counts.values())
            matched[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    precisions = tuple(m / t if t else 0.0 for m, t in zip(matched, total))
    if hyp_length == 0:
        return BleuReport(0.0, precisions, 0.0, 0, ref_length)
    bp = min(1.0, math.exp(1.0 - ref_length / hyp_length))
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER) * 100.0
    return BleuReport(score, precisions, bp, hyp_length, ref_length)


def corpus_nll(model: TranslationModel, pairs: list[tuple[list[int], list[int]]],
               src_lang: str, tgt_lang: str, batch_size: int = 16) -> tuple[float, int]:
    """Summed teacher-forced negative log likelihood (nats) and token
    count (EOS included, padding excluded) over encoded (src, tgt) id
    pairs."""
    if not pairs:
        raise ContractError("corpus_nll: empty evaluation set")
    was_training = model.training
    model.eval()
    total_nll = 0.0
    total_tokens = 0
    try:
        with T.no_grad():
            for start in range(0, len(pairs), batch_size):
                chunk = pairs[start:start + batch_size]
                src = pad_batch([p[0] for p in chunk], src_lang)
                tgt = pad_batch([p[1] for p in chunk], tgt_lang)
                mean = float(model.forward_teacher_forced(src, tgt).data)
                n = int(tgt.mask.sum())
                total_nll += mean * n
                total_tokens += n
    finally:
        model.train(was_training)
    return total_nll, total_tokens


def perplexity(model: TranslationModel, sources: list[list[str]],
               targets: list[list[str]], src_lang: str, tgt_lang: str,
               batch_size: int = 16) -> float:
    """exp of the mean per-token reference NLL under teacher forcing."""
    if len(sources) != len(targets):
        raise ContractError(f"perplexity: {len(sources)} sources vs {len(targets)} targets")
    sv, tv = model.vocabs[src_lang], model.vocabs[tgt_lang]
    pairs = [(sv.encode(s), tv.encode(t)) for s, t in zip(sources, targets)]
    nll, tokens = corpus_nll(model, pairs, src_lang, tgt_lang, batch_size)
    return math.exp(nll / tokens)
