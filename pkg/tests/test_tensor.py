import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfbench.errors import ConfigError, DimensionError, StateError
from mfbench.nn import tensor as T
from mfbench.nn.tensor import Tape, Tensor, no_grad


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def check_op(build, *shapes, seed=0, tol=1e-6):
    """Compare tape gradients of sum(w * build(*inputs)) with central differences."""
    r = np.random.default_rng(seed)
    xs = [Tensor(r.standard_normal(s), requires_grad=True) for s in shapes]
    out_shape = build(*[Tensor(x.data) for x in xs]).shape
    w = r.standard_normal(out_shape)

    def value():
        with no_grad():
            return float((build(*xs).data * w).sum())

    with Tape() as tape:
        loss = T.sum_all(T.mul(build(*xs), Tensor(w)))
    tape.backward(loss)
    for x in xs:
        num = numeric_grad(value, x.data)
        np.testing.assert_allclose(x.grad, num, rtol=tol, atol=tol)


def test_gelu_values():
    assert T.gelu(Tensor([[0.0]])).data[0, 0] == 0.0
    assert abs(T.gelu(Tensor([[12.0]])).data[0, 0] - 12.0) < 1e-6
    z = 0.7
    ref = 0.5 * z * (1 + math.tanh(math.sqrt(2 / math.pi) * (z + 0.044715 * z ** 3)))
    assert abs(T.gelu(Tensor([[z]])).data[0, 0] - ref) < 1e-15


def test_elementwise_and_matmul_grads():
    check_op(T.add, (3, 4), (3, 4))
    check_op(T.sub, (3, 4), (1, 4))
    check_op(T.mul, (2, 3), (2, 3))
    check_op(lambda a: T.scale(a, -2.5), (2, 5))
    check_op(T.gelu, (4, 3))
    check_op(T.matmul, (2, 3, 4), (4, 5))
    check_op(lambda x, w, b: T.linear(x, w, b), (2, 3, 4), (4, 5), (5,))


def test_norm_softmax_attention_grads():
    check_op(lambda x, g, b: T.layer_norm(x, g, b), (3, 6), (6,), (6,))
    check_op(lambda q, k, v: T.attention_forward(q, k, v, 2), (2, 3, 4), (2, 5, 4), (2, 5, 4))
    check_op(lambda x: T.mean(x, axis=1), (2, 3, 4))
    check_op(lambda a, b: T.concat([a, b], axis=1), (2, 3, 2), (2, 1, 2))
    check_op(lambda x: T.slice_axis(x, 1, 3, axis=1), (2, 4, 3))
    check_op(lambda x: T.reshape(x, (3, 4)), (2, 6))
    check_op(lambda x: T.broadcast_to(x, (3, 2, 4)), (1, 4))
    check_op(lambda x: T.take_rows(x, np.array([0, 2, 0])), (3, 2))
    check_op(lambda t: T.embedding(t, np.array([1, 1, 0])), (3, 4))


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 10_000))
def test_mse_gradient_property(rows, cols, seed):
    check_op(lambda p: T.mse(p, Tensor(np.ones((rows, cols)))), (rows, cols), seed=seed)


def test_sum_of_linear_gives_broadcast_input():
    x = np.array([[1.0, -2.0, 0.5]])
    w = Tensor(np.zeros((3, 2)), requires_grad=True)
    with Tape() as tape:
        loss = T.sum_all(T.matmul(Tensor(x), w))
    tape.backward(loss)
    np.testing.assert_array_equal(w.grad, np.repeat(x.T, 2, axis=1))


def test_squared_norm_gradient_is_2y():
    y = Tensor(np.array([[1.5, -0.5, 2.0]]), requires_grad=True)
    with Tape() as tape:
        loss = T.sum_all(T.mul(y, y))
    tape.backward(loss)
    np.testing.assert_array_equal(y.grad, 2 * y.data)


def test_attention_singleton_and_uniform():
    r = np.random.default_rng(0)
    q = Tensor(r.standard_normal((3, 4)))
    v = r.standard_normal((1, 4))
    out = T.attention_forward(q, Tensor(r.standard_normal((1, 4))), Tensor(v), 2).data
    np.testing.assert_allclose(out, np.repeat(v, 3, axis=0), atol=1e-15)
    vals = r.standard_normal((5, 4))
    keys = np.repeat(r.standard_normal((1, 4)), 5, axis=0)
    out = T.attention_forward(q, Tensor(keys), Tensor(vals), 1).data
    np.testing.assert_allclose(out, np.repeat(vals.mean(0, keepdims=True), 3, axis=0), atol=1e-12)


def test_attention_oracle_two_queries_three_keys():
    # independent exhaustive arithmetic, heads=1, d=4
    q = [[0.1, 0.2, -0.3, 0.4], [0.5, -0.1, 0.0, 0.2]]
    k = [[0.3, 0.1, 0.2, -0.2], [-0.4, 0.5, 0.1, 0.0], [0.2, 0.2, 0.2, 0.2]]
    v = [[1.0, 0.0, -1.0, 2.0], [0.5, 0.5, 0.5, 0.5], [-1.0, 2.0, 0.0, 1.0]]
    expected = []
    for qi in q:
        s = [sum(a * b for a, b in zip(qi, kj)) / 2.0 for kj in k]
        e = [math.exp(x) for x in s]
        z = sum(e)
        expected.append([sum(e[j] / z * v[j][c] for j in range(3)) for c in range(4)])
    out = T.attention_forward(Tensor(q), Tensor(k), Tensor(v), 1).data
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-14)


@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 2, 4]), st.integers(0, 999))
def test_softmax_rows_sum_to_one(nq, nk, heads, seed):
    r = np.random.default_rng(seed)
    z = r.standard_normal((heads, nq, nk)) * 10
    np.testing.assert_allclose(T.softmax(z).sum(-1), 1.0, atol=1e-12)


def test_attention_errors():
    with pytest.raises(ConfigError):
        T.attention_forward(Tensor(np.zeros((2, 6))), Tensor(np.zeros((3, 6))),
                            Tensor(np.zeros((3, 6))), 4)
    with pytest.raises(DimensionError):
        T.attention_forward(Tensor(np.zeros((2, 4))), Tensor(np.zeros((3, 6))),
                            Tensor(np.zeros((3, 6))), 2)
    with pytest.raises(DimensionError):
        T.attention_forward(Tensor(np.zeros((2, 4))), Tensor(np.zeros((3, 4))),
                            Tensor(np.zeros((2, 4))), 2)


def test_backward_errors():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    tape = Tape()
    with pytest.raises(StateError):
        tape.backward(T.sum_all(x))  # nothing recorded
    with Tape() as tape:
        y = T.mul(x, x)
    with pytest.raises(StateError):
        tape.backward(y)  # not a scalar
    with Tape() as tape:
        loss = T.sum_all(T.mul(x, x))
    tape.backward(loss)
    with pytest.raises(StateError):
        tape.backward(loss)  # tape already consumed


def test_two_tapes_match_one():
    r = np.random.default_rng(3)
    w = Tensor(r.standard_normal((3, 3)), requires_grad=True)
    x = Tensor(r.standard_normal((2, 3)))

    def run():
        w.grad[...] = 0
        with Tape() as tape:
            loss = T.sum_all(T.gelu(T.matmul(x, w)))
        tape.backward(loss)
        return w.grad.copy()

    first = run()
    with Tape():
        T.sum_all(T.gelu(T.matmul(x, w)))  # a second recorded forward, never used
    np.testing.assert_array_equal(run(), first)


def test_no_grad_records_nothing():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        with no_grad():
            y = T.mul(x, x)
    assert not y.requires_grad
    assert len(tape.nodes) == 0
