"""Corpus loading, per-language vocabularies, and padded mini-batches.

Corpora are UTF-8 text files, one pre-tokenized sentence per line,
tokens separated by spaces. Each language keeps its own vocabulary
with four reserved ids (PAD=0, UNK=1, SOS=2, EOS=3); a vocabulary file
stores one token per line, so line number = id - 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import EmptyInputError

PAD, UNK, SOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<sos>", "<eos>")
NUM_SPECIALS = len(SPECIALS)


class Vocabulary:
    """Bijective token/id map for one language, ids 0..3 reserved."""

    def __init__(self, tokens: Iterable[str], lang: str):
        self.lang = lang
        self._id_to_token = list(SPECIALS)
        self._token_to_id: dict[str, int] = {}
        for token in tokens:
            if token in self._token_to_id or token in SPECIALS:
                continue
            self._token_to_id[token] = len(self._id_to_token)
            self._id_to_token.append(token)

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def token_id(self, token: str) -> int:
        return self._token_to_id.get(token, UNK)

    def token(self, token_id: int) -> str:
        return self._id_to_token[token_id]

    def tokens(self) -> list[str]:
        """Non-reserved tokens in id order."""
        return self._id_to_token[NUM_SPECIALS:]

    def encode(self, sentence: list[str]) -> list[int]:
        return [self._token_to_id.get(t, UNK) for t in sentence]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._id_to_token[i] for i in ids]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for token in self.tokens():
                f.write(token + "\n")

    @classmethod
    def load(cls, path, lang: str) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            return cls((line.rstrip("\n") for line in f), lang)


@dataclass
class Batch:
    """A padded id grid with its validity mask.

    ``lengths`` counts the real entries per row including the appended
    EOS; ``mask[i, t]`` is true exactly when ``t < lengths[i]`` and
    ids beyond that are PAD.
    """

    ids: np.ndarray       # (b, T) int32
    lengths: np.ndarray   # (b,) int32
    mask: np.ndarray      # (b, T) bool
    lang: str

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    def row_tokens(self, i: int) -> list[int]:
        """Row i without padding or the final EOS."""
        return self.ids[i, : self.lengths[i] - 1].tolist()


def pad_batch(sentences: list[list[int]], lang: str) -> Batch:
    """Append EOS to every sentence and pad the group to its own max
    length."""
    if not sentences:
        raise EmptyInputError("pad_batch: no sentences")
    lengths = np.array([len(s) + 1 for s in sentences], dtype=np.int32)
    width = int(lengths.max())
    ids = np.full((len(sentences), width), PAD, dtype=np.int32)
    for i, sent in enumerate(sentences):
        ids[i, : len(sent)] = sent
        ids[i, len(sent)] = EOS
    mask = np.arange(width)[None, :] < lengths[:, None]
    return Batch(ids=ids, lengths=lengths, mask=mask, lang=lang)


def read_corpus(path) -> list[list[str]]:
    """Whitespace-tokenized sentences, one per line. Blank lines are
    kept as empty sentences so line counts survive round trips."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            out.append(line.split())
    return out


def write_corpus(path, sentences: Iterable[list[str]]):
    with open(path, "w", encoding="utf-8") as f:
        for sent in sentences:
            f.write(" ".join(sent) + "\n")


def build_vocab(corpus: Iterable[list[str]], cap: int, lang: str = "") -> Vocabulary:
    """Keep the ``cap`` most frequent tokens; frequency ties go to the
    token seen first. Everything else encodes to UNK."""
    if cap < 1:
        raise ValueError(f"vocabulary cap must be >= 1, got {cap}")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    n_tokens = 0
    for sentence in corpus:
        for token in sentence:
            counts[token] = counts.get(token, 0) + 1
            if token not in first_seen:
                first_seen[token] = n_tokens
            n_tokens += 1
    if not counts:
        raise EmptyInputError("build_vocab: corpus has no tokens")
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(ranked[:cap], lang)


def length_filter(corpus: Iterable[list[str]], max_len: int = 50) -> Iterator[list[str]]:
    """Drop sentences with more than ``max_len`` elements, order kept."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    for sentence in corpus:
        if len(sentence) <= max_len:
            yield sentence


def make_batches(encoded: list[list[int]], batch_size: int, rng: np.random.Generator,
                 lang: str = "") -> Iterator[Batch]:
    """Shuffle sentence order with ``rng`` and emit consecutive groups
    of ``batch_size`` (last group may be smaller), each padded to its
    own max length with EOS appended first."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(len(encoded))
    for start in range(0, len(encoded), batch_size):
        group = [encoded[i] for i in order[start:start + batch_size]]
        yield pad_batch(group, lang)


def endless_batches(encoded: list[list[int]], batch_size: int, rng: np.random.Generator,
                    lang: str = "") -> Iterator[Batch]:
    """Cycle make_batches forever, reshuffling at every epoch boundary
    from the same generator so the stream is seed-reproducible."""
    while True:
        yield from make_batches(encoded, batch_size, rng, lang)
