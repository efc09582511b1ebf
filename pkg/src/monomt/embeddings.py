"""Fixed cross-lingual word embeddings and the word-by-word baseline.

Embedding files are whitespace text: a "V d" header, then one line per
word with the token followed by d reals. Translation pairs are
expected to lie near each other in one shared space; self-training of
that space is out of scope here, so matrices are either consumed
pre-mapped or aligned with the dictionary-seeded orthogonal
`procrustes_map` utility.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import NUM_SPECIALS, Vocabulary
from .errors import ContractError, FormatError


@dataclass
class EmbeddingMatrix:
    """Rows aligned to a vocabulary: row i is the vector of token id i.
    Reserved specials and words missing from the file keep zero rows,
    which also bars them from nearest-neighbor candidacy (a zero
    vector has no cosine direction)."""

    vectors: np.ndarray  # (V, d) float32
    vocab: Vocabulary

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class CrossLingualSpace:
    """One embedding matrix per language, asserted to share a space."""

    first: EmbeddingMatrix
    second: EmbeddingMatrix

    def __post_init__(self):
        if self.first.dim != self.second.dim:
            raise ContractError(
                f"cross-lingual space needs equal dimensions, got "
                f"{self.first.dim} and {self.second.dim}")

    def for_lang(self, lang: str) -> EmbeddingMatrix:
        if lang == self.first.vocab.lang:
            return self.first
        if lang == self.second.vocab.lang:
            return self.second
        raise ContractError(f"unknown language {lang!r}")


def load_embeddings(path, vocab: Vocabulary, expected_dim: int | None = None) -> EmbeddingMatrix:
    """Read vectors for ``vocab`` from a text embedding file.

    Vocabulary words absent from the file get zero vectors and a
    warning naming them; tokens outside the vocabulary are ignored.
    """
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise FormatError("expected header 'V d'", line=1)
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(f"non-numeric header {header!r}", line=1) from None
        if expected_dim is not None and dim != expected_dim:
            raise FormatError(f"file dimension {dim} != configured dimension {expected_dim}")
        vectors = np.zeros((len(vocab), dim), dtype=np.float32)
        filled = np.zeros(len(vocab), dtype=bool)
        for lineno, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise FormatError(
                    f"expected token + {dim} values, got {len(parts)} fields", line=lineno)
            token = parts[0]
            if token not in vocab:
                continue
            try:
                row = np.asarray([float(v) for v in parts[1:]], dtype=np.float32)
            except ValueError:
                raise FormatError(f"non-numeric vector for {token!r}", line=lineno) from None
            tid = vocab.token_id(token)
            vectors[tid] = row
            filled[tid] = True
    missing = [vocab.token(i) for i in range(NUM_SPECIALS, len(vocab)) if not filled[i]]
    if missing:
        warnings.warn(
            f"{len(missing)} vocabulary words missing from {path}, zero-initialized: "
            f"{missing[:10]}{'...' if len(missing) > 10 else ''}")
    return EmbeddingMatrix(vectors=vectors, vocab=vocab)


def save_embeddings(path, matrix: EmbeddingMatrix):
    """Write non-special rows in the text format load_embeddings reads."""
    tokens = matrix.vocab.tokens()
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(tokens)} {matrix.dim}\n")
        for i, token in enumerate(tokens):
            row = matrix.vectors[NUM_SPECIALS + i]
            f.write(token + " " + " ".join(f"{v:.6f}" for v in row) + "\n")


def procrustes_map(x: np.ndarray, z: np.ndarray, pairs: list[tuple[int, int]]) -> np.ndarray:
    """Orthogonal map W minimizing ||X_dict W − Z_dict||_F over the
    dictionary pairs: W = U·Vᵀ from the SVD U·Σ·Vᵀ of X_dictᵀ·Z_dict."""
    if not pairs:
        raise ContractError("procrustes_map: empty seed dictionary")
    if x.shape[1] != z.shape[1]:
        raise ContractError(f"procrustes_map: dimension mismatch {x.shape[1]} vs {z.shape[1]}")
    xi = np.asarray([p[0] for p in pairs])
    zi = np.asarray([p[1] for p in pairs])
    u, _, vt = np.linalg.svd(x[xi].T.astype(np.float64) @ z[zi].astype(np.float64))
    return (u @ vt).astype(np.float64)


def _unit_rows(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(vectors, axis=1)
    nonzero = norms > 0
    safe = np.where(nonzero, norms, 1.0)
    return vectors / safe[:, None], nonzero


def word_by_word_translate(sentence: list[str], space: CrossLingualSpace,
                           src: str, tgt: str) -> list[str]:
    """Replace each in-vocabulary word by its nearest cosine neighbor
    in the other language; out-of-vocabulary words are copied
    unchanged. Output length always equals input length. Cosine ties
    break toward the lower target id; retrieval is an exact scan of
    the full target vocabulary."""
    src_emb = space.for_lang(src)
    tgt_emb = space.for_lang(tgt)
    tgt_unit, tgt_valid = _unit_rows(tgt_emb.vectors)
    out = []
    for token in sentence:
        tid = src_emb.vocab.token_id(token)
        vector = src_emb.vectors[tid] if token in src_emb.vocab else None
        if vector is None or not vector.any():
            out.append(token)
            continue
        sims = tgt_unit @ (vector / np.linalg.norm(vector))
        sims[~tgt_valid] = -np.inf
        out.append(tgt_emb.vocab.token(int(np.argmax(sims))))
    return out
