"""SGD and Adam parameter updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameters


@dataclass
class OptimizerState:
    kind: str = "adam"  # "sgd" | "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    frozen_prefixes: tuple[str, ...] = ()
    moments: dict = field(default_factory=dict)  # name -> (m, v)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")

    def is_frozen(self, name: str) -> bool:
        return any(name.startswith(p) for p in self.frozen_prefixes)


def optimizer_step(state: OptimizerState, params: Parameters) -> None:
    """Apply one update from accumulated gradients, then zero all grads.

    Frozen parameters keep their values but still get their grads cleared.
    """
    missing = [name for name, t in params.items()
               if t.grad is None and not state.is_frozen(name)]
    if missing:
        raise ValueError(f"missing gradients for {missing}")
    state.step_count += 1
    for name, t in params.items():
        if state.is_frozen(name):
            t.grad = None
            continue
        g = t.grad
        if state.kind == "sgd":
            t.data -= state.learning_rate * g
        else:
            if name not in state.moments:
                state.moments[name] = (np.zeros_like(t.data), np.zeros_like(t.data))
            m, v = state.moments[name]
            m = state.beta1 * m + (1.0 - state.beta1) * g
            v = state.beta2 * v + (1.0 - state.beta2) * g * g
            state.moments[name] = (m, v)
            m_hat = m / (1.0 - state.beta1 ** state.step_count)
            v_hat = v / (1.0 - state.beta2 ** state.step_count)
            t.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        t.grad = None
