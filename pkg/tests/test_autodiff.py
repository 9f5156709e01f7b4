"""Tape mechanics and analytic gradients of every primitive, verified
against central differences."""

import numpy as np
import pytest

from shiftreg import autodiff as ad
from shiftreg.errors import InputError
from shiftreg.gradcheck import check_gradients, max_relative_error, numerical_grad
from shiftreg.sparse import build_csr, normalize_adjacency

TOL = 1e-5


def proj(t, c):
    """Scalar projection so multi-output ops can be gradchecked."""
    return ad.reduce_sum(ad.mul(t, c))


def test_add_broadcast_gradients():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 4))
    b = rng.standard_normal(4)
    c = rng.standard_normal((3, 4))
    err = check_gradients(lambda ts: proj(ad.add(ts[0], ts[1]), c), [x, b])
    assert err < TOL


def test_sub_and_mul_gradients():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 3))
    y = rng.standard_normal((4, 3))
    c = rng.standard_normal((4, 3))
    assert check_gradients(lambda ts: proj(ad.sub(ts[0], ts[1]), c), [x, y]) < TOL
    assert check_gradients(lambda ts: proj(ad.mul(ts[0], ts[1]), c), [x, y]) < TOL


def test_mul_scalar_broadcast_gradient():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 3))
    s = np.array(0.7)
    c = rng.standard_normal((3, 3))
    assert check_gradients(lambda ts: proj(ad.mul(ts[0], ts[1]), c), [x, s]) < TOL


def test_matmul_gradients():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((5, 2))
    c = rng.standard_normal((4, 2))
    assert check_gradients(lambda ts: proj(ad.matmul(ts[0], ts[1]), c), [a, b]) < TOL


def test_matmul_rejects_non_2d():
    with pytest.raises(InputError):
        ad.matmul(ad.Tensor(np.zeros(3)), ad.Tensor(np.zeros((3, 2))))
    with pytest.raises(InputError):
        ad.matmul(ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((4, 2))))


def test_sparse_matmul_gradient():
    m = normalize_adjacency(build_csr([(0, 1), (1, 2), (2, 3), (0, 3)], 4))
    rng = np.random.default_rng(4)
    h = rng.standard_normal((4, 3))
    c = rng.standard_normal((4, 3))
    assert check_gradients(lambda ts: proj(ad.sparse_matmul(m, ts[0]), c), [h]) < TOL
    # analytic check: d/dh sum(c * (M h)) = M^T c
    with ad.Tape() as tape:
        ht = ad.Tensor(h, requires_grad=True)
        ad.backward(tape, proj(ad.sparse_matmul(m, ht), c))
    assert np.max(np.abs(ht.grad - m.to_dense().T @ c)) < 1e-12


def test_transpose_gradient():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 5))
    c = rng.standard_normal((5, 3))
    assert check_gradients(lambda ts: proj(ad.transpose(ts[0]), c), [x]) < TOL


def test_relu_gradient_away_from_kink():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((4, 4))
    x[np.abs(x) < 1e-2] = 0.5
    c = rng.standard_normal((4, 4))
    assert check_gradients(lambda ts: proj(ad.relu(ts[0]), c), [x]) < TOL


def test_relu_gate_is_zero_at_zero():
    with ad.Tape() as tape:
        x = ad.Tensor(np.array([[-1.0, 0.0, 2.0]]), requires_grad=True)
        ad.backward(tape, ad.reduce_sum(ad.relu(x)))
    assert np.array_equal(x.grad, np.array([[0.0, 0.0, 1.0]]))


def test_exp_gradient():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((3, 4))
    c = rng.standard_normal((3, 4))
    assert check_gradients(lambda ts: proj(ad.exp(ts[0]), c), [x]) < TOL


def test_safe_sqrt_gradient():
    rng = np.random.default_rng(8)
    x = rng.uniform(0.5, 4.0, (3, 4))
    c = rng.standard_normal((3, 4))
    assert check_gradients(lambda ts: proj(ad.safe_sqrt(ts[0]), c), [x]) < TOL


def test_safe_sqrt_rejects_negative():
    with pytest.raises(InputError):
        ad.safe_sqrt(ad.Tensor(np.array([-1e-3])))


def test_safe_sqrt_zero_has_zero_subgradient():
    with ad.Tape() as tape:
        x = ad.Tensor(np.array([0.0, 4.0]), requires_grad=True)
        ad.backward(tape, ad.reduce_sum(ad.safe_sqrt(x)))
    assert np.array_equal(x.grad, np.array([0.0, 0.25]))


def test_powi_gradients():
    rng = np.random.default_rng(9)
    x = rng.uniform(0.5, 2.0, (3, 3))
    c = rng.standard_normal((3, 3))
    for k in (1, 2, 3, 5):
        assert check_gradients(lambda ts, k=k: proj(ad.powi(ts[0], k), c), [x]) < TOL


def test_dropout_eval_is_identity_and_draws_nothing():
    rng = np.random.default_rng(10)
    before = rng.bit_generator.state
    x = ad.Tensor(np.ones((5, 5)))
    out = ad.dropout(x, 0.5, rng, train=False)
    assert out is x
    assert rng.bit_generator.state == before
    out0 = ad.dropout(x, 0.0, rng, train=True)
    assert out0 is x
    assert rng.bit_generator.state == before


def test_dropout_scales_survivors():
    rng = np.random.default_rng(11)
    x = ad.Tensor(np.full((200, 50), 3.0))
    out = ad.dropout(x, 0.4, rng, train=True).data
    vals = np.unique(out)
    assert set(np.round(vals, 12)) <= {0.0, round(3.0 / 0.6, 12)}
    keep_frac = np.mean(out != 0.0)
    assert abs(keep_frac - 0.6) < 0.02


def test_dropout_gradient_with_fixed_mask():
    rng0 = np.random.default_rng(12)
    x = rng0.standard_normal((4, 6))
    c = rng0.standard_normal((4, 6))

    def build(ts):
        rng = np.random.default_rng(99)
        return proj(ad.dropout(ts[0], 0.3, rng, train=True), c)

    assert check_gradients(build, [x]) < TOL


def test_dropout_rejects_bad_rate():
    x = ad.Tensor(np.ones(3))
    rng = np.random.default_rng(0)
    for rate in (-0.1, 1.0, 1.5):
        with pytest.raises(InputError):
            ad.dropout(x, rate, rng, train=True)


def test_row_softmax_values_and_stability():
    out = ad.row_softmax(ad.Tensor(np.array([[0.0, 0.0], [1000.0, 1000.0]]))).data
    assert np.allclose(out, 0.5, atol=1e-15)
    big = ad.row_softmax(ad.Tensor(np.array([[1e4, 0.0]]))).data
    assert np.isfinite(big).all()
    assert abs(big.sum() - 1.0) < 1e-12


def test_row_softmax_gradient():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((3, 5))
    c = rng.standard_normal((3, 5))
    assert check_gradients(lambda ts: proj(ad.row_softmax(ts[0]), c), [x]) < TOL


def test_reduce_sum_and_mean_gradients():
    rng = np.random.default_rng(14)
    x = rng.standard_normal((3, 4))
    c0 = rng.standard_normal(4)
    c1 = rng.standard_normal((3, 1))
    assert check_gradients(lambda ts: ad.reduce_sum(ts[0]), [x]) < TOL
    assert check_gradients(lambda ts: proj(ad.reduce_sum(ts[0], axis=0), c0), [x]) < TOL
    assert check_gradients(
        lambda ts: proj(ad.reduce_mean(ts[0], axis=1, keepdims=True), c1), [x]
    ) < TOL
    assert check_gradients(lambda ts: proj(ad.mean_rows(ts[0]), c0), [x]) < TOL


def test_take_rows_gradient_accumulates_on_repeats():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((5, 3))
    idx = np.array([1, 1, 4, 0])
    c = rng.standard_normal((4, 3))
    assert check_gradients(lambda ts: proj(ad.take_rows(ts[0], idx), c), [x]) < TOL
    with ad.Tape() as tape:
        xt = ad.Tensor(x, requires_grad=True)
        ad.backward(tape, proj(ad.take_rows(xt, idx), c))
    expected = np.zeros_like(x)
    np.add.at(expected, idx, c)
    assert np.max(np.abs(xt.grad - expected)) < 1e-12


def test_cross_entropy_uniform_logits_is_log_c():
    for num_classes in (2, 3, 7):
        logits = ad.Tensor(np.zeros((4, num_classes)))
        labels = np.array([0, 1, 0, num_classes - 1])
        mask = np.ones(4, dtype=bool)
        loss = ad.softmax_cross_entropy(logits, labels, mask)
        assert abs(float(loss.data) - np.log(num_classes)) < 1e-12


def test_cross_entropy_shift_invariance():
    rng = np.random.default_rng(16)
    logits = rng.standard_normal((6, 4))
    labels = rng.integers(0, 4, 6)
    mask = np.array([1, 0, 1, 1, 0, 1], dtype=bool)
    a = ad.softmax_cross_entropy(ad.Tensor(logits), labels, mask)
    b = ad.softmax_cross_entropy(ad.Tensor(logits + 1000.0), labels, mask)
    assert abs(float(a.data) - float(b.data)) < 1e-9


def test_cross_entropy_masked_rows_only():
    logits = np.zeros((3, 2))
    logits[2] = [50.0, -50.0]
    labels = np.array([0, 0, 1])
    mask = np.array([1, 1, 0], dtype=bool)
    loss = ad.softmax_cross_entropy(ad.Tensor(logits), labels, mask)
    assert abs(float(loss.data) - np.log(2.0)) < 1e-12


def test_cross_entropy_empty_mask_rejected():
    with pytest.raises(InputError):
        ad.softmax_cross_entropy(
            ad.Tensor(np.zeros((3, 2))), np.zeros(3, dtype=int), np.zeros(3, dtype=bool)
        )


def test_cross_entropy_gradient():
    rng = np.random.default_rng(17)
    logits = rng.standard_normal((6, 5))
    labels = rng.integers(0, 5, 6)
    mask = np.array([1, 0, 1, 1, 1, 0], dtype=bool)
    err = check_gradients(
        lambda ts: ad.softmax_cross_entropy(ts[0], labels, mask), [logits]
    )
    assert err < TOL


def test_cross_entropy_gradient_rows_outside_mask_are_zero():
    rng = np.random.default_rng(18)
    with ad.Tape() as tape:
        logits = ad.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        labels = np.array([0, 1, 2, 0])
        mask = np.array([1, 0, 1, 0], dtype=bool)
        ad.backward(tape, ad.softmax_cross_entropy(logits, labels, mask))
    assert np.array_equal(logits.grad[1], np.zeros(3))
    assert np.array_equal(logits.grad[3], np.zeros(3))


def test_fanout_accumulates():
    with ad.Tape() as tape:
        x = ad.Tensor(np.array([2.0, -3.0]), requires_grad=True)
        y = ad.add(ad.mul(x, x), x)
        ad.backward(tape, ad.reduce_sum(y))
    assert np.max(np.abs(x.grad - (2.0 * x.data + 1.0))) < 1e-12


def test_operator_overloads_match_functions():
    rng = np.random.default_rng(19)
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal((3, 2))
    with ad.Tape() as tape:
        at = ad.Tensor(a, requires_grad=True)
        bt = ad.Tensor(b, requires_grad=True)
        out = (at @ bt) * 2.0 + 1.0 - 0.5
        ad.backward(tape, ad.reduce_sum(out))
    assert np.max(np.abs(at.grad - 2.0 * np.ones((2, 2)) @ b.T)) < 1e-12


def test_no_grad_suppresses_recording():
    with ad.Tape() as tape:
        x = ad.Tensor(np.ones((2, 2)), requires_grad=True)
        with ad.no_grad():
            y = ad.mul(x, x)
        assert len(tape.ops) == 0
        z = ad.mul(x, x)
        assert len(tape.ops) == 1
    assert not y.requires_grad


def test_backward_rejects_non_scalar():
    with ad.Tape() as tape:
        x = ad.Tensor(np.ones((2, 2)), requires_grad=True)
        y = ad.mul(x, x)
        with pytest.raises(InputError):
            ad.backward(tape, y)


def test_backward_zero_fills_disconnected_leaves():
    with ad.Tape() as tape:
        x = ad.Tensor(np.ones(3), requires_grad=True)
        w = ad.Tensor(np.ones(3), requires_grad=True)
        ad.mul(w, w)  # recorded, but feeds nothing downstream
        ad.backward(tape, ad.reduce_sum(ad.mul(x, 2.0)))
    assert np.array_equal(w.grad, np.zeros(3))
    assert np.array_equal(x.grad, np.full(3, 2.0))


def test_composite_network_gradient():
    # two-layer network with every core op in the path
    rng = np.random.default_rng(20)
    x = rng.standard_normal((6, 4))
    w0 = rng.standard_normal((4, 8)) * 0.5
    b0 = rng.standard_normal(8) * 0.1
    w1 = rng.standard_normal((8, 3)) * 0.5
    labels = rng.integers(0, 3, 6)
    mask = np.array([1, 1, 0, 1, 0, 1], dtype=bool)
    adj = normalize_adjacency(build_csr([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], 6))

    def build(ts):
        h = ad.relu(ad.add(ad.matmul(ad.Tensor(x), ts[0]), ts[1]))
        logits = ad.sparse_matmul(adj, ad.matmul(h, ts[2]))
        return ad.softmax_cross_entropy(logits, labels, mask)

    assert check_gradients(build, [w0, b0, w1]) < TOL


def test_numerical_grad_quadratic():
    g = numerical_grad(lambda v: float((v**2).sum()), np.array([1.0, -2.0, 3.0]))
    assert np.max(np.abs(g - np.array([2.0, -4.0, 6.0]))) < 1e-6


def test_max_relative_error_shapes():
    with pytest.raises(InputError):
        max_relative_error(np.zeros(3), np.zeros(4))
    assert max_relative_error(np.array([1.0]), np.array([1.0])) == 0.0
