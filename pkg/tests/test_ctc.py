import itertools
import math

import numpy as np
import pytest

from oracles import brute_force_ctc_logprob, collapse_path
from shona_asr import autodiff as ad
from shona_asr.autodiff import Parameters, Tensor, backward
from shona_asr.ctc import ctc_forward_logprob, ctc_greedy_decode, ctc_loss, min_frames


def random_grid(rng, t, k):
    g = rng.uniform(0.05, 1.0, size=(t, k))
    return g / g.sum(axis=1, keepdims=True)


def test_single_frame_single_phone():
    grid = Tensor(np.array([[0.2, 0.3, 0.5]]))  # blank is index 2
    loss = ctc_loss(grid, [1])
    assert float(loss.data) == pytest.approx(-math.log(0.3), abs=1e-12)


def test_matches_brute_force_small_instance(rng):
    grid = random_grid(rng, 3, 4)
    loss = ctc_loss(Tensor(grid), [0, 1])
    want = -brute_force_ctc_logprob(grid, [0, 1], blank=3)
    assert float(loss.data) == pytest.approx(want, abs=1e-6)


def test_matches_brute_force_exhaustive_small_space(rng):
    # all targets of length <= 3 over alphabets of 1..3 phones, frames 1..5
    for n_classes in (2, 3, 4):
        blank = n_classes - 1
        for t in range(1, 6):
            grid = random_grid(rng, t, n_classes)
            log_grid = np.log(grid)
            for length in range(1, 4):
                for target in itertools.product(range(blank), repeat=length):
                    want = brute_force_ctc_logprob(grid, target, blank)
                    got = ctc_forward_logprob(log_grid, list(target), blank)
                    if want == -math.inf:
                        assert got == -math.inf
                    else:
                        assert got == pytest.approx(want, abs=1e-6)


def test_infeasible_target_rejected(rng):
    grid = Tensor(random_grid(rng, 2, 4))
    with pytest.raises(ValueError, match="frames"):
        ctc_loss(grid, [0, 1, 2])
    with pytest.raises(ValueError, match="frames"):
        ctc_loss(Tensor(random_grid(rng, 2, 4)), [0, 0])  # repeat needs 3 frames


def test_min_frames_counts_adjacent_repeats():
    assert min_frames([1, 2, 3]) == 3
    assert min_frames([1, 1, 2]) == 4
    assert min_frames([1, 1, 1]) == 5


def test_loss_is_positive_probability(rng):
    checked = 0
    while checked < 20:
        t = int(rng.integers(2, 7))
        grid = random_grid(rng, t, 5)
        target = [int(v) for v in rng.integers(0, 4, size=min(t, 2))]
        if min_frames(target) > t:
            continue
        loss = float(ctc_loss(Tensor(grid), target).data)
        assert 0.0 < math.exp(-loss) <= 1.0
        checked += 1


def test_gradient_matches_finite_differences(rng):
    t, k = 5, 4
    p = Parameters()
    logits = p.add("logits", rng.uniform(-1, 1, (t, k)))
    from shona_asr.gradcheck import grad_check
    err = grad_check(lambda: ctc_loss(ad.softmax(logits), [0, 2, 1]), p, eps=1e-5)
    assert err < 1e-3


def test_loss_decreases_when_overfitting_single_grid(rng):
    # seeded smoke property: 50 gradient steps on one tiny instance
    from shona_asr.optim import OptimizerState, optimizer_step
    p = Parameters()
    logits = p.add("logits", rng.normal(size=(6, 5)) * 0.1)
    target = [0, 2]
    opt = OptimizerState(kind="adam", learning_rate=5e-2)
    losses = []
    for _ in range(50):
        loss = ctc_loss(ad.softmax(logits), target)
        losses.append(float(loss.data))
        p.zero_grad()
        backward(loss)
        optimizer_step(opt, p)
    assert losses[-1] < losses[0]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:])) or losses[-1] < 0.2 * losses[0]


def test_greedy_decode_blank_only():
    grid = np.array([[0.1, 0.9], [0.2, 0.8]])  # blank = 1
    assert ctc_greedy_decode(grid) == []


def test_greedy_decode_collapse_semantics():
    # path a a blank a b  ->  a a b
    a, b, blank = 0, 1, 2
    rows = {a: [0.8, 0.1, 0.1], b: [0.1, 0.8, 0.1], blank: [0.1, 0.1, 0.8]}
    grid = np.array([rows[a], rows[a], rows[blank], rows[a], rows[b]])
    assert ctc_greedy_decode(grid) == [a, a, b]


def test_greedy_decode_matches_argmax_collapse_oracle(rng):
    for _ in range(30):
        grid = random_grid(rng, 6, 4)
        want = list(collapse_path(grid.argmax(axis=1), blank=3))
        assert ctc_greedy_decode(grid) == want
