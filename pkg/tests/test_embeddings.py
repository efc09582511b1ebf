"""Embedding IO, orthogonal mapping, and the nearest-neighbor baseline."""

import numpy as np
import pytest

from monomt.data import NUM_SPECIALS, Vocabulary
from monomt.embeddings import (CrossLingualSpace, EmbeddingMatrix, load_embeddings,
                               procrustes_map, save_embeddings, word_by_word_translate)
from monomt.errors import ContractError, FormatError


def write_emb(path, rows, dim):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(rows)} {dim}\n")
        for token, vec in rows:
            f.write(token + " " + " ".join(str(v) for v in vec) + "\n")


class TestLoad:
    def test_full_coverage_no_warning(self, tmp_path):
        vocab = Vocabulary(["a", "b"], "l1")
        p = tmp_path / "emb.txt"
        write_emb(p, [("a", [1, 0, 0, 0]), ("b", [0, 1, 0, 0])], 4)
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            emb = load_embeddings(p, vocab)
        assert emb.vectors.shape == (len(vocab), 4)
        np.testing.assert_array_equal(emb.vectors[vocab.token_id("b")], [0, 1, 0, 0])
        assert (emb.vectors[:NUM_SPECIALS] == 0).all()

    def test_missing_word_zero_row_with_warning(self, tmp_path):
        vocab = Vocabulary(["a", "b"], "l1")
        p = tmp_path / "emb.txt"
        write_emb(p, [("a", [1, 2])], 2)
        with pytest.warns(UserWarning, match="b"):
            emb = load_embeddings(p, vocab)
        assert (emb.vectors[vocab.token_id("b")] == 0).all()

    def test_dimension_mismatch_rejected(self, tmp_path):
        vocab = Vocabulary(["a"], "l1")
        p = tmp_path / "emb.txt"
        write_emb(p, [("a", [0.0] * 300)], 300)
        with pytest.raises(FormatError):
            load_embeddings(p, vocab, expected_dim=64)

    def test_malformed_line_reports_number(self, tmp_path):
        vocab = Vocabulary(["a"], "l1")
        p = tmp_path / "emb.txt"
        p.write_text("1 3\na 0.5 0.5\n")
        with pytest.raises(FormatError, match="line 2"):
            load_embeddings(p, vocab)

    def test_save_load_roundtrip(self, tmp_path):
        vocab = Vocabulary(["x", "y"], "l2")
        vectors = np.zeros((len(vocab), 3), dtype=np.float32)
        vectors[vocab.token_id("x")] = [0.25, -1.5, 3.0]
        vectors[vocab.token_id("y")] = [1.0, 2.0, -0.125]
        p = tmp_path / "emb.txt"
        save_embeddings(p, EmbeddingMatrix(vectors, vocab))
        again = load_embeddings(p, vocab)
        np.testing.assert_allclose(again.vectors, vectors, atol=1e-6)


class TestProcrustes:
    def rotation(self, rng, d):
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        return q

    def test_self_mapping_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((20, 6))
        w = procrustes_map(x, x, [(i, i) for i in range(20)])
        np.testing.assert_allclose(w, np.eye(6), atol=1e-8)

    def test_recovers_known_rotation(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((50, 8))
        r = self.rotation(rng, 8)
        w = procrustes_map(x, x @ r, [(i, i) for i in range(50)])
        assert np.abs(w - r).max() < 1e-4

    def test_orthogonal_for_random_inputs(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            x = rng.standard_normal((30, 5))
            z = rng.standard_normal((30, 5))
            w = procrustes_map(x, z, [(i, i) for i in range(30)])
            np.testing.assert_allclose(w.T @ w, np.eye(5), atol=1e-5)

    def test_invariant_to_common_rescaling(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((40, 4))
        z = rng.standard_normal((40, 4))
        pairs = [(i, i) for i in range(40)]
        w1 = procrustes_map(x, z, pairs)
        w2 = procrustes_map(7.5 * x, 7.5 * z, pairs)
        np.testing.assert_allclose(w1, w2, atol=1e-10)

    def test_empty_dictionary_rejected(self):
        with pytest.raises(ContractError):
            procrustes_map(np.ones((2, 2)), np.ones((2, 2)), [])


def toy_space(rng, n=6, d=5):
    """Gold space: pair i of each language shares one unit vector."""
    src_tokens = [f"s{i}" for i in range(n)]
    tgt_tokens = [f"t{i}" for i in range(n)]
    sv = Vocabulary(src_tokens, "l1")
    tv = Vocabulary(tgt_tokens, "l2")
    base = rng.standard_normal((n, d)).astype(np.float32)
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    sm = np.zeros((len(sv), d), dtype=np.float32)
    tm = np.zeros((len(tv), d), dtype=np.float32)
    for i in range(n):
        sm[sv.token_id(src_tokens[i])] = base[i]
        tm[tv.token_id(tgt_tokens[i])] = base[i]
    return CrossLingualSpace(EmbeddingMatrix(sm, sv), EmbeddingMatrix(tm, tv))


class TestWordByWord:
    def test_oov_copied_verbatim(self):
        space = toy_space(np.random.default_rng(4))
        out = word_by_word_translate(["Tymoshenko"], space, "l1", "l2")
        assert out == ["Tymoshenko"]

    def test_gold_space_recovers_lexicon(self):
        space = toy_space(np.random.default_rng(5))
        sent = ["s3", "s0", "s5", "s1"]
        assert word_by_word_translate(sent, space, "l1", "l2") == ["t3", "t0", "t5", "t1"]

    def test_empty_sentence(self):
        space = toy_space(np.random.default_rng(6))
        assert word_by_word_translate([], space, "l1", "l2") == []

    def test_length_always_preserved(self):
        rng = np.random.default_rng(7)
        space = toy_space(rng)
        for _ in range(20):
            k = int(rng.integers(0, 8))
            sent = [f"s{rng.integers(0, 9)}" for _ in range(k)]  # some OOV (s6..s8)
            assert len(word_by_word_translate(sent, space, "l1", "l2")) == k

    def test_matches_brute_force_cosine_scan(self):
        rng = np.random.default_rng(8)
        space = toy_space(rng, n=10, d=4)
        # perturb the target side so neighbors are nontrivial
        tm = space.second.vectors
        tm[NUM_SPECIALS:] += rng.standard_normal(tm[NUM_SPECIALS:].shape).astype(np.float32) * 0.5
        for i in range(10):
            token = f"s{i}"
            got = word_by_word_translate([token], space, "l1", "l2")[0]
            q = space.first.vectors[space.first.vocab.token_id(token)]
            best, best_sim = None, -np.inf
            for tid in range(len(space.second.vocab)):
                v = tm[tid]
                if not v.any():
                    continue
                sim = float(q @ v / (np.linalg.norm(q) * np.linalg.norm(v)))
                if sim > best_sim:
                    best, best_sim = tid, sim
            assert got == space.second.vocab.token(best)

    def test_dim_mismatch_rejected(self):
        a = EmbeddingMatrix(np.zeros((5, 3), dtype=np.float32), Vocabulary(["a"], "l1"))
        b = EmbeddingMatrix(np.zeros((5, 4), dtype=np.float32), Vocabulary(["b"], "l2"))
        with pytest.raises(ContractError):
            CrossLingualSpace(a, b)
