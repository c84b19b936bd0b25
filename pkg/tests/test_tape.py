"""Every tape operation is checked against the central-difference oracle."""

import numpy as np
import pytest

from miarec import tape
from miarec.numkernel import finite_difference_gradient, relative_gradient_error

RNG = np.random.default_rng(2024)


def check_op(build, *shapes, tol=1e-6):
    """Compare tape gradients of sum(build(xs)) with finite differences."""
    values = [RNG.normal(size=s) for s in shapes]
    for i in range(len(values)):

        def objective(candidate):
            args = [tape.const(v) for v in values]
            args[i] = tape.param(candidate)
            out = build(*args)
            return float(tape.sum_all(out).value)

        args = [tape.const(v) for v in values]
        args[i] = tape.param(values[i])
        loss = tape.sum_all(build(*args))
        tape.backward(loss)
        analytic = args[i].grad
        numeric = finite_difference_gradient(objective, values[i].copy())
        err = relative_gradient_error(analytic, numeric)
        assert err < tol, f"operand {i}: rel err {err}"


def test_add_broadcast():
    check_op(tape.add, (3, 4), (3, 4))
    check_op(tape.add, (3, 4), (4,))
    check_op(tape.add, (3, 1), (1, 1))


def test_sub_mul():
    check_op(tape.sub, (2, 5), (2, 5))
    check_op(tape.mul, (4, 3), (4, 3))
    check_op(tape.mul, (4, 3), (4, 1))


def test_matmul_transpose_reshape():
    check_op(tape.matmul, (3, 4), (4, 2))
    check_op(tape.transpose, (3, 5))
    check_op(lambda x: tape.reshape(x, (6, 2)), (3, 4))


def test_activations():
    check_op(tape.tanh, (3, 3))
    check_op(tape.log_sigmoid, (4, 2))
    check_op(tape.exp, (3, 2))
    check_op(lambda x: tape.relu(tape.add(x, 0.05)), (4, 4))
    check_op(lambda x: tape.leaky_relu(tape.add(x, 0.05), 0.2), (4, 4))


def test_divide():
    a = RNG.normal(size=(3, 2))
    b = np.abs(RNG.normal(size=(3, 2))) + 0.5

    def objective(candidate):
        return float(tape.sum_all(tape.divide(tape.const(a), tape.param(candidate))).value)

    var = tape.param(b)
    loss = tape.sum_all(tape.divide(tape.const(a), var))
    tape.backward(loss)
    numeric = finite_difference_gradient(objective, b.copy())
    assert relative_gradient_error(var.grad, numeric) < 1e-6


def test_softmax_rows_gradient():
    mixer = RNG.normal(size=(3, 4))
    check_op(lambda x: tape.mul(tape.softmax_rows(x), tape.const(mixer)), (3, 4))


def test_reductions_and_indexing():
    check_op(tape.sum_all, (3, 4))
    check_op(lambda x: tape.sum_axis(x, 0), (3, 4))
    check_op(lambda x: tape.sum_axis(x, 1), (3, 4))
    check_op(tape.sum_squares, (3, 3))
    check_op(lambda x: tape.gather_rows(x, [0, 2, 2, 1]), (4, 3))
    check_op(lambda x: tape.segment_sum(x, [0, 0, 2, 1], 4), (4, 3))
    check_op(lambda x: tape.column(x, 1), (4, 3))
    check_op(lambda x: tape.concat_cols([x, x]), (3, 2))
    check_op(lambda x: tape.scale(x, -2.5), (2, 2))


def test_vstack_gradient():
    x = RNG.normal(size=(5, 3))

    def build(v):
        rows = [tape.gather_rows(v, [i]) for i in range(5)]
        flat = [tape.reshape(r, (3,)) for r in rows]
        return tape.vstack(flat)

    check_op(build, (5, 3))


def test_composite_expression():
    # a small MLP-like composite touching most ops at once
    def build(w1, w2, x):
        h = tape.relu(tape.add(tape.matmul(x, tape.transpose(w1)), 0.1))
        out = tape.matmul(tape.tanh(h), tape.transpose(w2))
        return tape.log_sigmoid(out)

    check_op(build, (4, 3), (2, 4), (5, 3))


def test_shared_subexpression_accumulates():
    x = tape.param(np.array([[2.0]]))
    y = tape.mul(x, x)  # x^2; both parents are the same var
    tape.backward(tape.sum_all(y))
    assert x.grad[0, 0] == pytest.approx(4.0)


def test_backward_requires_scalar():
    x = tape.param(np.ones((2, 2)))
    with pytest.raises(ValueError):
        tape.backward(tape.add(x, 1.0))


def test_constants_get_no_grad():
    c = tape.const(np.ones((2, 2)))
    p = tape.param(np.ones((2, 2)))
    loss = tape.sum_all(tape.mul(c, p))
    tape.backward(loss)
    assert c.grad is None
    assert np.array_equal(p.grad, np.ones((2, 2)))
