"""Tape engine checks: closed-form values plus finite-difference oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textclf import tensor as tc
from textclf.tensor import Tape, Tensor


# ---- forward values ----

def test_softmax_uniform():
    p = tc.softmax(Tensor([0.0, 0.0]))
    np.testing.assert_allclose(p.data, [0.5, 0.5], rtol=0, atol=0)


def test_softmax_log_ratio():
    p = tc.softmax(Tensor([math.log(3.0), math.log(1.0)]))
    np.testing.assert_allclose(p.data, [0.75, 0.25], atol=1e-15)


def test_softmax_shift_invariance_large_inputs():
    a = tc.softmax(Tensor([1000.0, 999.0])).data
    b = tc.softmax(Tensor([1.0, 0.0])).data
    assert np.all(np.isfinite(a))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_softmax_rejects_empty_and_matrix():
    with pytest.raises(ValueError):
        tc.softmax(Tensor(np.zeros(0)))
    with pytest.raises(ValueError):
        tc.softmax(Tensor(np.zeros((2, 2))))


def test_cross_entropy_uniform_two_class():
    loss = tc.cross_entropy(Tensor([0.5, 0.5]), 0)
    assert abs(loss.item() - math.log(2.0)) < 1e-9


def test_cross_entropy_quarter():
    loss = tc.cross_entropy(Tensor([0.75, 0.25]), 1)
    assert abs(loss.item() - math.log(4.0)) < 1e-9


def test_cross_entropy_contract_violations():
    with pytest.raises(ValueError):
        tc.cross_entropy(Tensor([0.9, 0.9]), 0)  # does not sum to 1
    with pytest.raises(ValueError):
        tc.cross_entropy(Tensor([0.5, 0.5]), 2)  # label out of range
    with pytest.raises(ValueError):
        tc.cross_entropy(Tensor([0.5, 0.5]), -1)


def test_non_finite_values_rejected():
    with pytest.raises(tc.NumericError):
        Tensor([1.0, float("nan")])
    with pytest.raises(tc.NumericError):
        Tensor([float("inf")])


def test_max_over_time_ties_go_earliest():
    x = Tensor(np.array([[1.0, 5.0], [1.0, 7.0], [0.0, 7.0]]))
    out, arg = tc.max_over_time(x)
    np.testing.assert_allclose(out.data, [1.0, 7.0])
    assert arg.tolist() == [0, 1]


# ---- recording semantics ----

def test_no_tape_means_no_graph():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = tc.sigmoid(x)
    assert y.requires_grad is False
    assert x.grad is None


def test_ops_on_constants_do_not_record():
    with Tape() as tape:
        a = Tensor([1.0, 2.0])
        b = Tensor([3.0, 4.0])
        _ = a + b
    assert len(tape) == 0


def test_gradients_accumulate_across_uses():
    # y = w*x + w*x so dy/dw = 2x, exercising += accumulation
    w = Tensor([3.0], requires_grad=True)
    x = Tensor([5.0])
    with Tape() as tape:
        y = tc.total(w * x + w * x)
        tape.backward(y)
    np.testing.assert_allclose(w.grad, [10.0])


def test_constant_parameter_gets_zero_gradient():
    used = Tensor(np.array([2.0, 3.0]), requires_grad=True)
    unused = Tensor(np.array([1.0]), requires_grad=True)

    def loss(params):
        return tc.total(params[0] * params[0])

    err = tc.gradient_check(loss, [used, unused], max_coords=50)
    assert err < 1e-8
    assert np.all(unused.grad == 0.0) if unused.grad is not None else True


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        y = x * x
        with pytest.raises(ValueError):
            tape.backward(y)


# ---- finite-difference oracles, op by op ----

def test_sum_of_squares_gradient():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)

    def loss(params):
        return tc.total(params[0] * params[0])

    err = tc.gradient_check(loss, [x])
    assert err < 1e-8
    np.testing.assert_allclose(x.grad, 2.0 * x.data, atol=1e-12)


def _check(loss_fn, params, tol=1e-7):
    err = tc.gradient_check(loss_fn, params, max_coords=80)
    assert err < tol, f"gradient mismatch {err:.3e}"


def test_affine_matmul_gradients():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    b = Tensor(rng.normal(size=5), requires_grad=True)
    v = Tensor(rng.normal(size=4), requires_grad=True)

    def loss(params):
        h = tc.affine(params[0], params[1], params[2])   # (4,5)
        s = tc.matmul(params[3], h)                      # (5,)
        return tc.total(s * s)

    _check(loss, [x, w, b, v])


def test_vector_matrix_forms():
    rng = np.random.default_rng(1)
    v = Tensor(rng.normal(size=3), requires_grad=True)
    m = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    u = Tensor(rng.normal(size=4), requires_grad=True)

    def loss(params):
        a = tc.matmul(params[0], params[1])   # (4,)
        b = tc.matmul(params[1], params[2])   # (3,)
        return tc.total(a * a) + tc.total(b * b)

    _check(loss, [v, m, u])


def test_activation_gradients():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=6) + 0.1, requires_grad=True)

    def loss(params):
        s = tc.sigmoid(params[0])
        t = tc.tanh(params[0])
        r = tc.relu(params[0])
        return tc.total(s * t + r)

    _check(loss, [x])


def test_softmax_cross_entropy_gradient():
    rng = np.random.default_rng(3)
    z = Tensor(rng.normal(size=5), requires_grad=True)

    def loss(params):
        return tc.cross_entropy(tc.softmax(params[0]), 2)

    _check(loss, [z], tol=1e-8)
    # classic closed form: d loss / d z = p - onehot(label)
    p = tc.softmax(z).data
    expect = p.copy()
    expect[2] -= 1.0
    np.testing.assert_allclose(z.grad, expect, atol=1e-9)


def test_structural_op_gradients():
    rng = np.random.default_rng(4)
    m = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)

    def loss(params):
        rows = [tc.row(params[0], i) for i in range(4)]
        stacked = tc.stack_rows(rows[::-1])
        joined = tc.concat([rows[0], rows[2]])
        wide = tc.concat_cols(params[1], params[2])
        tall = tc.concat_rows(params[1], params[1])
        return (tc.total(stacked * stacked) + tc.total(joined)
                + tc.total(wide * wide) + tc.total(tall * tall))

    _check(loss, [m, a, b])


def test_max_over_time_gradient():
    x = Tensor(np.array([[1.0, 4.0], [3.0, 2.0], [2.0, 1.0]]), requires_grad=True)

    def loss(params):
        out, _ = tc.max_over_time(params[0])
        return tc.total(out * out)

    _check(loss, [x])
    expect = np.zeros((3, 2))
    expect[1, 0] = 2.0 * 3.0
    expect[0, 1] = 2.0 * 4.0
    np.testing.assert_allclose(x.grad, expect)


def test_embedding_lookup_accumulates_repeats():
    table = Tensor(np.arange(12.0).reshape(4, 3), requires_grad=True)

    def loss(params):
        e = tc.embedding_lookup(params[0], [1, 1, 3])
        return tc.total(e)

    _check(loss, [table])
    expect = np.zeros((4, 3))
    expect[1] = 2.0
    expect[3] = 1.0
    np.testing.assert_allclose(table.grad, expect)


def test_broadcast_bias_gradient():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=3), requires_grad=True)

    def loss(params):
        return tc.total(tc.tanh(params[0] + params[1]))

    _check(loss, [x, b])


# ---- composed random graphs ----

@st.composite
def graph_case(draw):
    n = draw(st.integers(2, 5))
    m = draw(st.integers(2, 5))
    k = draw(st.integers(2, 4))
    rng = np.random.default_rng(draw(st.integers(0, 2 ** 32 - 1)))
    act = draw(st.sampled_from(["sigmoid", "tanh", "relu"]))
    label = draw(st.integers(0, k - 1))
    return n, m, k, rng, act, label


@settings(max_examples=25, deadline=None)
@given(graph_case())
def test_composed_graph_matches_finite_differences(case):
    n, m, k, rng, act, label = case
    x = Tensor(rng.normal(size=n), requires_grad=True)
    w1 = Tensor(rng.normal(size=(n, m)) * 0.7, requires_grad=True)
    b1 = Tensor(rng.normal(size=m) * 0.1, requires_grad=True)
    w2 = Tensor(rng.normal(size=(m, k)) * 0.7, requires_grad=True)
    b2 = Tensor(rng.normal(size=k) * 0.1, requires_grad=True)
    fn = {"sigmoid": tc.sigmoid, "tanh": tc.tanh, "relu": tc.relu}[act]

    def loss(params):
        h = fn(tc.affine(params[0], params[1], params[2]))
        z = tc.affine(h, params[3], params[4])
        return tc.cross_entropy(tc.softmax(z), label)

    err = tc.gradient_check(loss, [x, w1, b1, w2, b2], max_coords=40)
    assert err < 1e-6
