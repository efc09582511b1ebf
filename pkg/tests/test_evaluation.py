"""BLEU against an independent counter, plus perplexity base cases."""

import math

import numpy as np
import pytest

from monomt.errors import ContractError
from monomt.evaluation import bleu, perplexity

from test_model import tiny_model


def oracle_bleu(hyps, refs):
    """Independent reimplementation: greedy decrement-matching of
    n-grams instead of Counter clipping."""
    match = {1: 0, 2: 0, 3: 0, 4: 0}
    total = {1: 0, 2: 0, 3: 0, 4: 0}
    hyp_len = ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in (1, 2, 3, 4):
            bag = {}
            for i in range(len(ref) - n + 1):
                g = tuple(ref[i:i + n])
                bag[g] = bag.get(g, 0) + 1
            for i in range(len(hyp) - n + 1):
                g = tuple(hyp[i:i + n])
                total[n] += 1
                if bag.get(g, 0) > 0:
                    bag[g] -= 1
                    match[n] += 1
    if hyp_len == 0:
        return 0.0
    precisions = [match[n] / total[n] if total[n] else 0.0 for n in (1, 2, 3, 4)]
    if min(precisions) == 0.0:
        return 0.0
    bp = math.exp(1.0 - ref_len / hyp_len) if hyp_len < ref_len else 1.0
    return bp * math.exp(sum(math.log(p) for p in precisions) / 4.0) * 100.0


def random_corpus(rng, n_sentences, vocab=8, max_len=9):
    return [[f"w{rng.integers(0, vocab)}" for _ in range(rng.integers(1, max_len))]
            for _ in range(n_sentences)]


class TestBleu:
    def test_identity_scores_100(self):
        refs = [["the", "cat"], ["a", "b", "c", "d", "e"]]
        assert bleu(refs, refs).bleu == pytest.approx(100.0)

    def test_brevity_penalty_hand_example(self):
        report = bleu([["a", "b", "c", "d", "e", "f"]],
                      [["a", "b", "c", "d", "e", "f", "g"]])
        assert report.precisions == (1.0, 1.0, 1.0, 1.0)
        assert report.brevity_penalty == pytest.approx(math.exp(-1 / 6))
        assert abs(report.bleu - 84.65) < 0.01

    def test_zero_fourgram_overlap_scores_zero(self):
        report = bleu([["the", "cat", "sat", "on", "the", "mat"]],
                      [["the", "cat", "is", "on", "the", "mat"]])
        assert report.bleu == 0.0
        assert report.precisions[3] == 0.0

    def test_matches_independent_counter_on_100_corpora(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 12))
            hyps = random_corpus(rng, n)
            refs = random_corpus(rng, n)
            assert bleu(hyps, refs).bleu == pytest.approx(oracle_bleu(hyps, refs), abs=1e-9)

    def test_invariant_to_joint_permutation(self):
        rng = np.random.default_rng(1)
        hyps = random_corpus(rng, 20)
        refs = random_corpus(rng, 20)
        base = bleu(hyps, refs)
        perm = rng.permutation(20)
        shuffled = bleu([hyps[i] for i in perm], [refs[i] for i in perm])
        assert shuffled.bleu == pytest.approx(base.bleu, abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            hyps = random_corpus(rng, 5)
            refs = random_corpus(rng, 5)
            report = bleu(hyps, refs)
            assert 0.0 <= report.bleu <= 100.0
            assert report.brevity_penalty <= 1.0
            assert all(0.0 <= p <= 1.0 for p in report.precisions)

    def test_count_mismatch_rejected(self):
        with pytest.raises(ContractError):
            bleu([["a"]], [["a"], ["b"]])


class TestPerplexity:
    def test_uniform_logit_model_gives_vocab_size(self):
        model = tiny_model(n_words=6)
        dec = model.decoders["l2"]
        dec.w_out.data = np.zeros_like(dec.w_out.data)
        dec.b_out.data = np.zeros_like(dec.b_out.data)
        sources = [["a0", "a1"], ["a2"]]
        targets = [["b1"], ["b3", "b4"]]
        ppl = perplexity(model, sources, targets, "l1", "l2")
        assert ppl == pytest.approx(len(model.vocabs["l2"]), rel=1e-4)

    def test_empty_corpus_rejected(self):
        model = tiny_model()
        with pytest.raises(ContractError):
            perplexity(model, [], [], "l1", "l2")

    def test_batching_does_not_change_the_statistic(self):
        model = tiny_model(seed=9)
        rng = np.random.default_rng(3)
        sources = [[f"a{rng.integers(0, 8)}" for _ in range(rng.integers(1, 6))]
                   for _ in range(9)]
        targets = [[f"b{rng.integers(0, 8)}" for _ in range(rng.integers(1, 6))]
                   for _ in range(9)]
        a = perplexity(model, sources, targets, "l1", "l2", batch_size=2)
        b = perplexity(model, sources, targets, "l1", "l2", batch_size=9)
        assert a == pytest.approx(b, rel=1e-5)
