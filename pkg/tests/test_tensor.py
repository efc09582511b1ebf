"""Differentiation engine tests: frozen hand values plus the
finite-difference oracle over every operator."""

import math

import numpy as np
import pytest

from monomt import tensor as T
from monomt.errors import ContractError, NumericError, ShapeError


def f64(values):
    return T.tensor(values, dtype=np.float64)


def rand(rng, *shape):
    return T.tensor(rng.standard_normal(shape), dtype=np.float64)


class TestMatmul:
    def test_identity(self):
        b = f64([[1.5, -2.0], [0.25, 4.0]])
        eye = f64(np.eye(2))
        np.testing.assert_array_equal(T.matmul(eye, b).data, b.data)

    def test_hand_product(self):
        a = f64([[1.0, 2.0], [3.0, 4.0]])
        b = f64([[1.0], [1.0]])
        np.testing.assert_array_equal(T.matmul(a, b).data, [[3.0], [7.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            T.matmul(f64(np.zeros((2, 3))), f64(np.zeros((2, 3))))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal((4, 3))
        x = rand(rng, 3, 4)
        err = T.finite_difference_check(
            lambda a: T.sum_all(T.matmul(a, T.tensor(b, dtype=np.float64))), x)
        assert err < 1e-4


class TestSoftmax:
    def test_equal_values_give_uniform(self):
        y = T.softmax_rows(f64([[2.0, 2.0, 2.0, 2.0]]))
        np.testing.assert_allclose(y.data, 0.25)

    def test_closed_form_quarter(self):
        y = T.softmax_rows(f64([[0.0, math.log(3.0)]]))
        np.testing.assert_allclose(y.data, [[0.25, 0.75]], atol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((5, 7))
        a = T.softmax_rows(f64(x)).data
        b = T.softmax_rows(f64(x + 123.456)).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_rows_sum_to_one_float32(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = T.tensor(rng.standard_normal((8, 50)) * 10)
            sums = T.softmax_rows(x).data.sum(axis=1)
            np.testing.assert_allclose(sums, 1.0, atol=1e-6)

    def test_nan_rejected(self):
        with pytest.raises(NumericError):
            T.softmax_rows(f64([[1.0, float("nan")]]))


class TestMaskedSoftmax:
    def test_masked_positions_get_exactly_zero(self):
        rng = np.random.default_rng(3)
        x = rand(rng, 4, 6)
        mask = rng.random((4, 6)) < 0.6
        mask[:, 0] = True
        y = T.masked_softmax_rows(x, mask)
        assert (y.data[~mask] == 0.0).all()
        np.testing.assert_allclose(y.data.sum(axis=1), 1.0, atol=1e-9)

    def test_single_valid_position_gets_weight_one(self):
        mask = np.array([[False, True, False]])
        y = T.masked_softmax_rows(f64([[5.0, -3.0, 2.0]]), mask)
        np.testing.assert_allclose(y.data, [[0.0, 1.0, 0.0]])

    def test_all_masked_row_rejected(self):
        with pytest.raises(ContractError):
            T.masked_softmax_rows(f64([[1.0, 2.0]]), np.zeros((1, 2), dtype=bool))


class TestCrossEntropy:
    def test_uniform_logits_give_log_vocab(self):
        logits = f64(np.zeros((3, 4)))
        loss = T.cross_entropy_from_logits(logits, [0, 1, 2], [True, True, True])
        np.testing.assert_allclose(float(loss.data), math.log(4.0), atol=1e-12)

    def test_dominant_logit_drives_loss_to_zero(self):
        row = np.zeros((1, 5))
        row[0, 2] = 60.0
        loss = T.cross_entropy_from_logits(f64(row), [2], [True])
        assert float(loss.data) < 1e-12

    def test_mask_excludes_padding_rows(self):
        logits = np.zeros((2, 4))
        logits[0, 1] = 9.0
        loss = T.cross_entropy_from_logits(f64(logits), [1, 3], [True, False])
        assert float(loss.data) < 1e-3  # the masked uniform row does not count

    def test_out_of_range_target(self):
        with pytest.raises(IndexError):
            T.cross_entropy_from_logits(f64(np.zeros((1, 4))), [4], [True])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        x = rand(rng, 5, 6)
        targets = rng.integers(0, 6, size=5)
        mask = np.array([True, True, False, True, True])
        err = T.finite_difference_check(
            lambda a: T.cross_entropy_from_logits(a, targets, mask), x)
        assert err < 1e-4


class TestBackward:
    def test_linear_loss_constant_gradient(self):
        w = T.tensor(np.ones((3, 2)), requires_grad=True, dtype=np.float64)
        T.backward(T.sum_all(T.affine(w, 2.0, 0.0)))
        np.testing.assert_array_equal(w.grad, np.full((3, 2), 2.0))

    def test_diamond_graph_accumulates_both_paths(self):
        # y = x*x + 3x at x=5 -> dy/dx = 2x + 3 = 13
        x = T.tensor([[5.0]], requires_grad=True, dtype=np.float64)
        y = T.add(T.mul(x, x), T.affine(x, 3.0, 0.0))
        T.backward(y)
        np.testing.assert_allclose(x.grad, [[13.0]])

    def test_shared_subexpression_fanout(self):
        # s = x + x reused twice; gradients must not alias each other
        x = T.tensor([[1.0, 2.0]], requires_grad=True, dtype=np.float64)
        c = T.tensor([[3.0, 4.0]], dtype=np.float64)
        s = T.add(x, x)
        y = T.add(T.mul(s, c), s)
        T.backward(T.sum_all(y))
        np.testing.assert_allclose(x.grad, [[8.0, 10.0]])  # 2*(c+1)

    def test_non_scalar_loss_rejected(self):
        x = T.tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ContractError):
            T.backward(T.add(x, x))

    def test_non_trainable_leaf_gets_no_gradient(self):
        fixed = T.Parameter(np.ones((4, 3), dtype=np.float32), "emb", trainable=False)
        before = fixed.data.copy()
        picked = T.gather_rows(fixed, np.array([0, 2]))
        w = T.tensor(np.ones((2, 3)), requires_grad=True)
        T.backward(T.sum_all(T.mul(picked, w)))
        assert fixed.grad is None
        np.testing.assert_array_equal(fixed.data, before)
        assert w.grad is not None

    def test_no_grad_suppresses_graph(self):
        x = T.tensor(np.ones((2, 2)), requires_grad=True)
        with T.no_grad():
            y = T.sum_all(T.mul(x, x))
        assert y._backward is None and not y.requires_grad


class TestFiniteDifferenceOracle:
    def test_square_closed_form(self):
        x = f64([[3.0]])
        err = T.finite_difference_check(lambda a: T.sum_all(T.mul(a, a)), x, eps=1e-4)
        assert err < 1e-6

    def test_constant_function_both_sides_zero(self):
        x = f64([[1.0, 2.0]])
        c = T.tensor([[7.0]], dtype=np.float64)
        err = T.finite_difference_check(lambda a: T.sum_all(c), x)
        assert err == 0.0

    def test_eps_out_of_range(self):
        with pytest.raises(ContractError):
            T.finite_difference_check(lambda a: T.sum_all(a), f64([[1.0]]), eps=1e-2)


def _fd_cases():
    rng = np.random.default_rng(5)
    drawn = {}

    def const(*s):
        # one frozen constant per shape: the case functions must be
        # deterministic across repeated finite-difference evaluations
        if s not in drawn:
            drawn[s] = T.tensor(rng.standard_normal(s), dtype=np.float64)
        return drawn[s]

    mask64 = rng.random((4, 5)) < 0.5
    mask64[:, 2] = True
    keep_col = (rng.random((4, 1)) < 0.5).astype(np.float64)
    ids = rng.integers(0, 6, size=7)
    targets = rng.integers(0, 5, size=4)
    drop_seed = 11
    return [
        ("add", (4, 5), lambda x: T.sum_all(T.mul(T.add(x, const(4, 5)), const(4, 5)))),
        ("add_bias", (1, 5), lambda x: T.sum_all(T.mul(T.add(const(4, 5), x), const(4, 5)))),
        ("sub", (4, 5), lambda x: T.sum_all(T.mul(T.sub(const(4, 5), x), const(4, 5)))),
        ("mul", (4, 5), lambda x: T.sum_all(T.mul(T.mul(x, const(4, 5)), const(4, 5)))),
        ("affine", (4, 5), lambda x: T.sum_all(T.affine(x, -1.7, 0.4))),
        ("matmul_left", (4, 3), lambda x: T.sum_all(T.mul(T.matmul(x, const(3, 5)), const(4, 5)))),
        ("matmul_right", (3, 5), lambda x: T.sum_all(T.mul(T.matmul(const(4, 3), x), const(4, 5)))),
        ("tanh", (4, 5), lambda x: T.sum_all(T.mul(T.tanh(x), const(4, 5)))),
        ("sigmoid", (4, 5), lambda x: T.sum_all(T.mul(T.sigmoid(x), const(4, 5)))),
        ("gate_mix_z", (4, 5), lambda x: T.sum_all(T.mul(
            T.gate_mix(T.sigmoid(x), const(4, 5), const(4, 5)), const(4, 5)))),
        ("mask_mix", (4, 5), lambda x: T.sum_all(T.mul(
            T.mask_mix(x, T.mul(x, x), keep_col), const(4, 5)))),
        ("concat_cols", (4, 2), lambda x: T.sum_all(T.mul(
            T.concat_cols([x, const(4, 3), x]), const(4, 7)))),
        ("concat_rows", (2, 5), lambda x: T.sum_all(T.mul(
            T.concat_rows([const(3, 5), x]), const(5, 5)))),
        ("seq_stack", (4, 5), lambda x: T.sum_all(T.mul(
            T.seq_stack([x, T.mul(x, x), x]), const(4, 3, 5)))),
        ("seq_scores_query", (4, 5), lambda x: T.sum_all(T.mul(
            T.seq_scores(x, const(4, 3, 5)), const(4, 3)))),
        ("seq_scores_seq", (4, 3, 5), lambda x: T.sum_all(T.mul(
            T.seq_scores(const(4, 5), x), const(4, 3)))),
        ("seq_mix_weights", (4, 3), lambda x: T.sum_all(T.mul(
            T.seq_mix(x, const(4, 3, 5)), const(4, 5)))),
        ("seq_mix_seq", (4, 3, 5), lambda x: T.sum_all(T.mul(
            T.seq_mix(const(4, 3), x), const(4, 5)))),
        ("gather_rows", (6, 3), lambda x: T.sum_all(T.mul(
            T.gather_rows(x, ids), const(7, 3)))),
        ("dropout", (4, 5), lambda x: T.sum_all(T.mul(
            T.dropout(x, 0.4, np.random.default_rng(drop_seed)), const(4, 5)))),
        ("softmax_rows", (4, 5), lambda x: T.sum_all(T.mul(T.softmax_rows(x), const(4, 5)))),
        ("masked_softmax_rows", (4, 5), lambda x: T.sum_all(T.mul(
            T.masked_softmax_rows(x, mask64), const(4, 5)))),
        ("cross_entropy", (4, 5), lambda x: T.cross_entropy_from_logits(
            x, targets, [True, False, True, True])),
    ]


@pytest.mark.parametrize("case", _fd_cases(), ids=lambda c: c[0])
def test_operator_gradients_match_finite_differences(case):
    """Analytic gradients agree with central differences (<1e-4, 64-bit)."""
    name, shape, fn = case
    rng = np.random.default_rng(hash(name) % 2**32)
    x = T.tensor(rng.standard_normal(shape), dtype=np.float64)
    assert T.finite_difference_check(fn, x) < 1e-4


class TestDropout:
    def test_zero_probability_is_identity(self):
        x = T.tensor(np.ones((3, 3)))
        assert T.dropout(x, 0.0, np.random.default_rng(0)) is x

    def test_survivors_scaled_by_inverse_keep(self):
        rng = np.random.default_rng(6)
        x = T.tensor(np.ones((50, 50)))
        y = T.dropout(x, 0.3, rng).data
        kept = y[y != 0.0]
        np.testing.assert_allclose(kept, 1.0 / 0.7, rtol=1e-6)
        # expectation is preserved to sampling error
        assert abs(y.mean() - 1.0) < 0.05

    def test_invalid_probability(self):
        with pytest.raises(ContractError):
            T.dropout(T.tensor(np.ones((2, 2))), 1.0, np.random.default_rng(0))


class TestGather:
    def test_out_of_range_ids(self):
        table = T.tensor(np.ones((4, 2)))
        with pytest.raises(IndexError):
            T.gather_rows(table, np.array([0, 4]))

    def test_repeated_ids_accumulate(self):
        table = T.tensor(np.ones((3, 2)), requires_grad=True, dtype=np.float64)
        out = T.gather_rows(table, np.array([1, 1, 2]))
        T.backward(T.sum_all(out))
        np.testing.assert_array_equal(table.grad, [[0, 0], [2, 2], [1, 1]])
