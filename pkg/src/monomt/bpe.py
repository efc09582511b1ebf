"""Byte pair encoding learned and applied per language.

The learner splits words into characters plus an end-of-word marker
"</w>" and greedily merges the most frequent adjacent symbol pair;
frequencies are recounted exactly after every merge (desk scale makes
that affordable and keeps the code obviously correct). Applied output
uses the "@@" continuation suffix on every non-final subword of a
word, so word boundaries are recoverable with ``undo_bpe``.
"""

from __future__ import annotations

from collections import Counter

from .errors import EmptyInputError, FormatError

WORD_END = "</w>"
CONTINUATION = "@@"
MERGE_FILE_HEADER = "#version: monomt-bpe 1"


class MergeTable:
    """Ordered merge operations for one language."""

    def __init__(self, merges: list[tuple[str, str]], lang: str = ""):
        self.merges = merges
        self.lang = lang
        self._ranks = {pair: i for i, pair in enumerate(merges)}
        self._segmentations: dict[str, list[str]] = {}

    def __len__(self) -> int:
        return len(self.merges)

    def rank(self, pair: tuple[str, str]) -> int | None:
        return self._ranks.get(pair)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(MERGE_FILE_HEADER + "\n")
            for left, right in self.merges:
                f.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path, lang: str = "") -> "MergeTable":
        merges = []
        with open(path, encoding="utf-8") as f:
            header = f.readline()
            if not header.startswith("#"):
                raise FormatError("merge file must start with a header line", line=1)
            for lineno, line in enumerate(f, start=2):
                parts = line.split()
                if len(parts) != 2:
                    raise FormatError(f"expected 'left right', got {line!r}", line=lineno)
                merges.append((parts[0], parts[1]))
        return cls(merges, lang)


def _pair_counts(symbolized: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in symbolized.items():
        for pair in zip(symbols, symbols[1:]):
            counts[pair] += freq
    return counts


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    merged = pair[0] + pair[1]
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_bpe(word_freqs: dict[str, int], num_ops: int, lang: str = "") -> MergeTable:
    """Greedy merge learning over a word-frequency map.

    Stops after ``num_ops`` merges or as soon as the best pair occurs
    at most once; pair-frequency ties break lexicographically so the
    table is deterministic.
    """
    if num_ops < 0:
        raise ValueError(f"num_ops must be >= 0, got {num_ops}")
    if not word_freqs:
        raise EmptyInputError("learn_bpe: empty word-frequency map")
    symbolized: dict[tuple[str, ...], int] = {}
    for word, freq in word_freqs.items():
        symbols = tuple(word) + (WORD_END,)
        symbolized[symbols] = symbolized.get(symbols, 0) + freq
    merges: list[tuple[str, str]] = []
    for _ in range(num_ops):
        counts = _pair_counts(symbolized)
        if not counts:
            break
        best = min(counts, key=lambda p: (-counts[p], p))
        if counts[best] <= 1:
            break
        merges.append(best)
        symbolized = {_merge_word(sym, best): freq for sym, freq in symbolized.items()}
    return MergeTable(merges, lang)


def _segment_word(word: str, merges: MergeTable) -> list[str]:
    symbols = list(word) + [WORD_END]
    while len(symbols) > 1:
        ranked = [(merges.rank((a, b)), i)
                  for i, (a, b) in enumerate(zip(symbols, symbols[1:]))
                  if merges.rank((a, b)) is not None]
        if not ranked:
            break
        _, i = min(ranked)
        symbols[i:i + 2] = [symbols[i] + symbols[i + 1]]
    # drop the marker and tag non-final pieces with the continuation suffix
    if symbols[-1] == WORD_END:
        symbols = symbols[:-1] or [""]
    elif symbols[-1].endswith(WORD_END):
        symbols[-1] = symbols[-1][: -len(WORD_END)]
    return [s + CONTINUATION for s in symbols[:-1]] + [symbols[-1]]


def apply_bpe(sentence: list[str], merges: MergeTable) -> list[str]:
    """Split every word by replaying the merges in learned order.
    Unknown characters pass through as singleton symbols."""
    out: list[str] = []
    cache = merges._segmentations
    for word in sentence:
        pieces = cache.get(word)
        if pieces is None:
            pieces = _segment_word(word, merges)
            cache[word] = pieces
        out.extend(pieces)
    return out


def undo_bpe(tokens: list[str]) -> list[str]:
    """Join continuation-marked subwords back into words."""
    words: list[str] = []
    current = ""
    for i, token in enumerate(tokens):
        if token.endswith(CONTINUATION):
            if i == len(tokens) - 1:
                raise FormatError(f"trailing continuation marker on {token!r}")
            current += token[: -len(CONTINUATION)]
        else:
            words.append(current + token)
            current = ""
    return words
