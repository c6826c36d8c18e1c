import numpy as np
import pytest

from oracles import naive_conv2d
from shona_asr import autodiff as ad
from shona_asr.autodiff import Parameters, Tensor, backward
from shona_asr.gradcheck import grad_check
from shona_asr.optim import OptimizerState, optimizer_step
from shona_asr.errors import VerificationError
from shona_asr.verify import CHECKS, TOLERANCE


def test_sum_gradient_is_ones():
    p = Parameters()
    w = p.add("w", np.arange(6.0).reshape(2, 3))
    backward(ad.tsum(w))
    assert np.array_equal(w.grad, np.ones((2, 3)))


def test_quadratic_gradient_is_2w(rng):
    p = Parameters()
    w = p.add("w", rng.normal(size=5))
    backward(ad.tsum(ad.mul(w, w)))
    assert np.allclose(w.grad, 2 * w.data)


def test_backward_requires_scalar():
    t = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(t)


def test_backward_twice_is_an_error():
    p = Parameters()
    w = p.add("w", np.ones(3))
    loss = ad.tsum(w)
    backward(loss)
    with pytest.raises(RuntimeError, match="already ran"):
        backward(loss)


def test_gradients_accumulate_across_graphs():
    p = Parameters()
    w = p.add("w", np.ones(3))
    backward(ad.tsum(w))
    backward(ad.tsum(w))
    assert np.array_equal(w.grad, 2 * np.ones(3))
    p.zero_grad()
    assert w.grad is None


def test_backward_deterministic_bitwise(rng):
    def run():
        g = np.random.default_rng(7)
        p = Parameters()
        x = p.add("x", g.normal(size=(3, 4)))
        w = p.add("w", g.normal(size=(5, 4)))
        b = p.add("b", g.normal(size=5))
        loss = ad.tsum(ad.relu(ad.dense(x, w, b)))
        backward(loss)
        return [t.grad.copy() for _, t in p.items()]

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)


def test_identity_conv_kernel_preserves_input(rng):
    x = Tensor(rng.normal(size=(1, 4, 5)))
    k = Tensor(np.ones((1, 1, 1, 1)))
    b = Tensor(np.zeros(1))
    out = ad.conv2d(x, k, b)
    assert np.allclose(out.data, x.data)


def test_conv_matches_four_loop_oracle(rng):
    for _ in range(10):
        x = rng.normal(size=(2, 4, 6))
        k = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)
        got = ad.conv2d(Tensor(x), Tensor(k), Tensor(b)).data
        assert np.allclose(got, naive_conv2d(x, k, b), atol=1e-12)


def test_conv_all_ones_2x2_case():
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]])[None])
    out = ad.conv2d(x, Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)))
    assert np.allclose(out.data[0], naive_conv2d(x.data, np.ones((1, 1, 3, 3)), np.zeros(1))[0])


def test_max_pool_basic():
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]])[None])
    assert ad.max_pool2d(x).data.tolist() == [[[4.0]]]


def test_max_pool_odd_edges_dropped(rng):
    x = Tensor(rng.normal(size=(2, 5, 5)))
    assert ad.max_pool2d(x).data.shape == (2, 2, 2)


def test_max_pool_tie_routes_to_first_element():
    p = Parameters()
    x = p.add("x", np.ones((1, 2, 2)))
    backward(ad.tsum(ad.max_pool2d(x)))
    assert x.grad[0].tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_max_pool_too_small_rejected():
    with pytest.raises(ValueError):
        ad.max_pool2d(Tensor(np.zeros((1, 1, 5))))


def test_dense_identity_and_zero(rng):
    x = Tensor(rng.normal(size=4))
    out = ad.dense(x, Tensor(np.eye(4)), Tensor(np.zeros(4)))
    assert np.allclose(out.data, x.data)
    b = rng.normal(size=4)
    out2 = ad.dense(x, Tensor(np.zeros((4, 4))), Tensor(b))
    assert np.allclose(out2.data, b)


def test_dense_matches_dot_oracle(rng):
    x, w, b = rng.normal(size=3), rng.normal(size=(4, 3)), rng.normal(size=4)
    got = ad.dense(Tensor(x), Tensor(w), Tensor(b)).data
    want = np.array([sum(w[i, j] * x[j] for j in range(3)) + b[i] for i in range(4)])
    assert np.allclose(got, want)


def test_lstm_zero_weights_halves_gates():
    d, k = 3, 4
    x, h, c = Tensor(np.ones(d)), Tensor(np.zeros(k)), Tensor(np.zeros(k))
    zeros = lambda *s: Tensor(np.zeros(s))
    h2, c2 = ad.lstm_cell(x, h, c, zeros(4 * k, d), zeros(4 * k, k), zeros(4 * k))
    assert np.allclose(c2.data, 0.0)
    assert np.allclose(h2.data, 0.0)


def test_lstm_saturated_gates_carry_cell_state(rng):
    d, k = 2, 3
    c0 = rng.normal(size=k)
    bias = np.zeros(4 * k)
    bias[k:2 * k] = 50.0   # forget gate ~ 1
    bias[:k] = -50.0       # input gate ~ 0
    h2, c2 = ad.lstm_cell(Tensor(rng.normal(size=d)), Tensor(np.zeros(k)), Tensor(c0),
                          Tensor(np.zeros((4 * k, d))), Tensor(np.zeros((4 * k, k))), Tensor(bias))
    assert np.max(np.abs(c2.data - c0)) < 1e-9


def test_softmax_uniform_on_zeros():
    out = ad.softmax(Tensor(np.zeros(3)))
    assert np.allclose(out.data, 1.0 / 3.0)


def test_softmax_rows_sum_to_one_large_inputs(rng):
    x = Tensor(rng.uniform(-100, 100, size=(20, 7)))
    out = ad.softmax(x)
    assert np.all(np.abs(out.data.sum(axis=1) - 1.0) < 1e-6)
    assert np.all(out.data > 0)


def test_cross_entropy_target_out_of_range():
    with pytest.raises(ValueError):
        ad.cross_entropy(Tensor(np.zeros(3)), 5)


def test_attention_single_position_residual(rng):
    d = 4
    seq = rng.normal(size=(1, d))
    wv = rng.normal(size=(d, d))
    out = ad.attention_layer(Tensor(seq), Tensor(np.zeros((d, d))),
                             Tensor(np.zeros((d, d))), Tensor(wv))
    assert np.allclose(out.data, seq + seq @ wv)


def test_attention_zero_projections_residual_only(rng):
    seq = rng.normal(size=(5, 4))
    z = lambda: Tensor(np.zeros((4, 4)))
    out = ad.attention_layer(Tensor(seq), z(), z(), z())
    assert np.allclose(out.data, seq)


def test_attention_matches_direct_formula(rng):
    t, d = 3, 4
    seq, wq, wk, wv = (rng.normal(size=s) for s in ((t, d), (d, d), (d, d), (d, d)))
    got = ad.attention_layer(Tensor(seq), Tensor(wq), Tensor(wk), Tensor(wv)).data
    q, k, v = seq @ wq, seq @ wk, seq @ wv
    scores = q @ k.T / np.sqrt(d)
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    want = seq + (e / e.sum(axis=1, keepdims=True)) @ v
    assert np.allclose(got, want, atol=1e-12)


# -- optimizer ---------------------------------------------------------------

def test_zero_gradients_leave_parameters_unchanged(rng):
    for kind in ("sgd", "adam"):
        p = Parameters()
        w = p.add("w", rng.normal(size=4))
        before = w.data.copy()
        w.grad = np.zeros(4)
        optimizer_step(OptimizerState(kind=kind), p)
        assert np.array_equal(w.data, before)
        assert w.grad is None


def test_sgd_arithmetic():
    p = Parameters()
    w = p.add("w", np.array([1.0]))
    w.grad = np.array([2.0])
    optimizer_step(OptimizerState(kind="sgd", learning_rate=0.1), p)
    assert np.allclose(w.data, 0.8)


def test_adam_first_step_magnitude_matches_formulas():
    p = Parameters()
    w = p.add("w", np.zeros(3))
    w.grad = np.ones(3)
    lr = 1e-3
    optimizer_step(OptimizerState(kind="adam", learning_rate=lr), p)
    # direct evaluation of the bias-corrected update with g=1
    m_hat = (0.1 * 1.0) / (1 - 0.9)
    v_hat = (0.001 * 1.0) / (1 - 0.999)
    expected = -lr * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert np.allclose(w.data, expected)
    assert abs(abs(expected) - lr) < 1e-8


def test_missing_gradient_is_an_error():
    p = Parameters()
    p.add("w", np.zeros(3))
    with pytest.raises(ValueError, match="missing gradients"):
        optimizer_step(OptimizerState(), p)


def test_frozen_parameters_not_updated():
    p = Parameters()
    w = p.add("enc.w", np.ones(2))
    v = p.add("out.w", np.ones(2))
    w.grad = np.ones(2)
    v.grad = np.ones(2)
    optimizer_step(OptimizerState(kind="sgd", learning_rate=0.5, frozen_prefixes=("enc.",)), p)
    assert np.array_equal(w.data, np.ones(2))
    assert not np.array_equal(v.data, np.ones(2))


# -- gradient checking -------------------------------------------------------

def test_grad_check_quadratic_is_nearly_exact(rng):
    p = Parameters()
    w = p.add("w", rng.normal(size=6))
    err = grad_check(lambda: ad.tsum(ad.mul(w, w)), p)
    assert err < 1e-6


def test_grad_check_detects_sign_flip(rng):
    p = Parameters()
    w = p.add("w", rng.normal(size=4))

    def corrupted():
        out = ad.tsum(ad.mul(w, w))

        def bad_bwd(g):
            w.grad = np.zeros_like(w.data) if w.grad is None else w.grad
            w.grad += -2.0 * w.data * g  # sign flipped

        return ad.Tensor(out.data, requires_grad=True, parents=(w,), backward_fn=bad_bwd)

    err = grad_check(corrupted, p)
    assert abs(err - 2.0) < 1e-3


def test_grad_check_rejects_nondeterministic_forward(rng):
    p = Parameters()
    p.add("w", np.zeros(2))
    state = {"n": 0}

    def noisy():
        state["n"] += 1
        return ad.Tensor(np.array(float(state["n"])))

    with pytest.raises(VerificationError, match="deterministic"):
        grad_check(noisy, p)


@pytest.mark.parametrize("op_name", sorted(CHECKS))
def test_every_op_passes_gradient_check_50_seeds(op_name):
    check = CHECKS[op_name]
    worst = max(check(seed) for seed in range(50))
    assert worst < TOLERANCE, f"{op_name}: worst relative error {worst:.3e}"
