"""Deterministic toy language pairs with known ground truth.

A pair is defined by a latent sentence process, a token bijection, and
a reordering rule: language 1 renders the latent sentence as-is,
language 2 maps every token through the bijection and swaps the tokens
at positions (2i, 2i+1): an involution per pair block, and exactly
the kind of local divergence the adjacent-swap denoising noise is
meant to teach. An odd-length tail token has no partner and stays put.

Latent sentences are sampled i.i.d.; token draws are Zipf-weighted and
chained through a seeded successor table (each type prefers a small
set of followers), so every language has learnable word-order
conventions. Without that internal structure the two monolingual
corpora would be statistically identical up to renaming and no learner
could recover the reordering rule from them.

The word-by-word baseline on these pairs is lexically perfect but
cannot reorder, so it scores well below 100 BLEU on any test set with
a sentence of length >= 2; that gap is what trained reordering closes.

Gold cross-lingual embeddings give both members of a bijection pair
the same unit vector (optionally Gaussian-perturbed, then
renormalized). Monolingual training pools are drawn from disjoint
latent sentence sets, so no hidden parallelism exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Vocabulary, write_corpus
from .embeddings import CrossLingualSpace, EmbeddingMatrix, save_embeddings
from .errors import ContractError


@dataclass
class LangPairSpec:
    """Generative description of one synthetic pair."""

    vocab_size: int = 100
    dim: int = 32
    seed: int = 0
    zipf_exponent: float = 1.0
    min_len: int = 3
    max_len: int = 10
    coherence: float = 0.9     # P(next token comes from the successor table)
    branching: int = 2         # preferred successors per type
    perturbation: float = 0.0  # Gaussian noise on the second language's vectors
    identity_lexicon: bool = False  # both languages share token strings
    reorder: bool = True
    lang1: str = "l1"
    lang2: str = "l2"

    def __post_init__(self):
        if self.zipf_exponent <= 0:
            raise ContractError(
                f"zipf exponent must be positive, got {self.zipf_exponent}")
        if self.vocab_size < 2:
            raise ContractError(f"vocab size must be >= 2, got {self.vocab_size}")
        if not 1 <= self.min_len <= self.max_len:
            raise ContractError(
                f"invalid length range [{self.min_len}, {self.max_len}]")
        if not 0.0 <= self.coherence <= 1.0:
            raise ContractError(f"coherence must be in [0, 1], got {self.coherence}")
        if self.branching < 1:
            raise ContractError(f"branching must be >= 1, got {self.branching}")

    def l1_token(self, i: int) -> str:
        return f"s{i}"

    def l2_token(self, i: int) -> str:
        return self.l1_token(i) if self.identity_lexicon else f"t{i}"


@dataclass
class ToyCorpora:
    l1_mono: list[list[str]]
    l2_mono: list[list[str]]
    test_pairs: list[tuple[list[str], list[str]]]
    parallel_pairs: list[tuple[list[str], list[str]]]


class PairGenerator:
    """Seeded sampler for one LangPairSpec. All structure (bijection,
    successor table, vectors) is fixed by the seed; every product is
    reproducible."""

    def __init__(self, spec: LangPairSpec):
        self.spec = spec
        structure_rng, self._emb_rng = (
            np.random.default_rng(s)
            for s in np.random.SeedSequence(spec.seed).spawn(2))
        v = spec.vocab_size
        weights = 1.0 / np.arange(1, v + 1, dtype=np.float64) ** spec.zipf_exponent
        self._zipf = weights / weights.sum()
        self._mapping = (np.arange(v) if spec.identity_lexicon
                         else structure_rng.permutation(v))
        self._successors = np.stack([
            structure_rng.choice(v, size=spec.branching, replace=False, p=self._zipf)
            for _ in range(v)])

    # -- latent process -------------------------------------------------

    def latent_sentence(self, rng: np.random.Generator) -> tuple[int, ...]:
        spec = self.spec
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        out = [int(rng.choice(spec.vocab_size, p=self._zipf))]
        for _ in range(length - 1):
            if rng.random() < spec.coherence:
                nxt = int(self._successors[out[-1]][rng.integers(0, spec.branching)])
            else:
                nxt = int(rng.choice(spec.vocab_size, p=self._zipf))
            out.append(nxt)
        return tuple(out)

    # -- rendering ------------------------------------------------------

    def render_l1(self, latent: tuple[int, ...]) -> list[str]:
        return [self.spec.l1_token(i) for i in latent]

    def render_l2(self, latent: tuple[int, ...]) -> list[str]:
        mapped = [int(self._mapping[i]) for i in latent]
        if self.spec.reorder:
            for i in range(0, len(mapped) - 1, 2):
                mapped[i], mapped[i + 1] = mapped[i + 1], mapped[i]
        return [self.spec.l2_token(i) for i in mapped]

    def lexicon(self) -> list[tuple[str, str]]:
        return [(self.spec.l1_token(i), self.spec.l2_token(int(self._mapping[i])))
                for i in range(self.spec.vocab_size)]

    # -- corpora --------------------------------------------------------

    def corpora(self, n_train: int, n_test: int, n_parallel: int = 0) -> ToyCorpora:
        """Two monolingual training sets over disjoint latent pools, a
        genuinely parallel test set, and optional parallel training
        pairs."""
        if n_train < 1 or n_test < 1 or n_parallel < 0:
            raise ContractError("corpus sizes must be positive")
        rng = np.random.default_rng(np.random.SeedSequence((self.spec.seed, 1)))
        l1_latents = [self.latent_sentence(rng) for _ in range(n_train)]
        seen = set(l1_latents)
        l2_latents = []
        attempts = 0
        while len(l2_latents) < n_train:
            cand = self.latent_sentence(rng)
            attempts += 1
            if cand not in seen:
                l2_latents.append(cand)
            elif attempts > 50 * n_train:
                raise ContractError(
                    "latent space too small to draw disjoint monolingual pools")
        test = [self.latent_sentence(rng) for _ in range(n_test)]
        parallel = [self.latent_sentence(rng) for _ in range(n_parallel)]
        return ToyCorpora(
            l1_mono=[self.render_l1(u) for u in l1_latents],
            l2_mono=[self.render_l2(u) for u in l2_latents],
            test_pairs=[(self.render_l1(u), self.render_l2(u)) for u in test],
            parallel_pairs=[(self.render_l1(u), self.render_l2(u)) for u in parallel])

    # -- embeddings -----------------------------------------------------

    def gold_embeddings(self) -> CrossLingualSpace:
        """Unit vectors shared across each bijection pair; the second
        language's copies get the configured perturbation and are
        renormalized."""
        spec = self.spec
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 2)))
        base = rng.standard_normal((spec.vocab_size, spec.dim))
        base /= np.linalg.norm(base, axis=1, keepdims=True)
        v1 = Vocabulary([spec.l1_token(i) for i in range(spec.vocab_size)], spec.lang1)
        v2 = Vocabulary([spec.l2_token(i) for i in range(spec.vocab_size)], spec.lang2)
        m1 = np.zeros((len(v1), spec.dim), dtype=np.float32)
        m2 = np.zeros((len(v2), spec.dim), dtype=np.float32)
        for i in range(spec.vocab_size):
            vec = base[i]
            m1[v1.token_id(spec.l1_token(i))] = vec
            twin = vec + spec.perturbation * rng.standard_normal(spec.dim)
            twin /= np.linalg.norm(twin)
            m2[v2.token_id(spec.l2_token(int(self._mapping[i])))] = twin
        return CrossLingualSpace(EmbeddingMatrix(m1, v1), EmbeddingMatrix(m2, v2))


def write_toy_dataset(spec: LangPairSpec, out_dir, n_train: int, n_test: int,
                      n_parallel: int = 0) -> list[str]:
    """Emit the toy dataset as files: mono corpora, parallel test
    sides, embedding files, a gold lexicon, and optional parallel
    training sides. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gen = PairGenerator(spec)
    corpora = gen.corpora(n_train, n_test, n_parallel)
    space = gen.gold_embeddings()
    l1, l2 = spec.lang1, spec.lang2
    paths = {
        f"train.{l1}": corpora.l1_mono,
        f"train.{l2}": corpora.l2_mono,
        f"test.{l1}": [p[0] for p in corpora.test_pairs],
        f"test.{l2}": [p[1] for p in corpora.test_pairs],
    }
    if n_parallel:
        paths[f"parallel.{l1}"] = [p[0] for p in corpora.parallel_pairs]
        paths[f"parallel.{l2}"] = [p[1] for p in corpora.parallel_pairs]
    written = []
    for name, sentences in paths.items():
        path = out / name
        write_corpus(path, sentences)
        written.append(str(path))
    for name, matrix in ((f"emb.{l1}", space.first), (f"emb.{l2}", space.second)):
        path = out / name
        save_embeddings(path, matrix)
        written.append(str(path))
    lex_path = out / "lexicon.tsv"
    with open(lex_path, "w", encoding="utf-8") as f:
        for a, b in gen.lexicon():
            f.write(f"{a}\t{b}\n")
    written.append(str(lex_path))
    return written
