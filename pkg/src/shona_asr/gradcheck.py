"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .autodiff import Parameters, backward
from .errors import VerificationError


def grad_check(forward_fn, params: Parameters, eps: float = 1e-3,
               max_samples: int = 200, rng: np.random.Generator | None = None) -> float:
    """Compare backward() gradients against central differences.

    forward_fn rebuilds the loss graph from current parameter values and
    returns a scalar Tensor. At most max_samples scalar coordinates are
    checked, sampled uniformly across all parameters. Returns the maximum
    relative error  |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
    """
    rng = rng or np.random.default_rng(0)

    base_a = float(forward_fn().data)
    base_b = float(forward_fn().data)
    if base_a != base_b:
        raise VerificationError("forward_fn is not deterministic; gradient check is meaningless")

    params.zero_grad()
    backward(forward_fn())
    analytic = {}
    for name, t in params.items():
        analytic[name] = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
    params.zero_grad()

    coords = []
    for name, t in params.items():
        coords.extend((name, i) for i in range(t.data.size))
    if len(coords) > max_samples:
        picked = rng.choice(len(coords), size=max_samples, replace=False)
        coords = [coords[i] for i in sorted(picked)]

    max_rel = 0.0
    for name, i in coords:
        t = params[name]
        original = t.data.flat[i]
        t.data.flat[i] = original + eps
        f_plus = float(forward_fn().data)
        t.data.flat[i] = original - eps
        f_minus = float(forward_fn().data)
        t.data.flat[i] = original
        g_n = (f_plus - f_minus) / (2.0 * eps)
        g_a = float(analytic[name].flat[i])
        rel = abs(g_a - g_n) / max(abs(g_a), abs(g_n), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel
