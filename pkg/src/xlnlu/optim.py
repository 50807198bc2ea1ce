"""Adam with bias correction.

State is held per parameter object.  ``adam_step`` consumes the gradients
(clears them afterwards), so each training step is: build tape, backward once
or more to accumulate, then one step.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state, clip_norm=None):
    """One update over ``params`` (list of Tensors with populated grads).

    clip_norm, when set, rescales the global gradient norm to at most that
    value before the moment updates; by default no clipping is applied.
    """
    for i, p in enumerate(params):
        if p.grad is None:
            raise ValueError(f"parameter {p.name or i} has no gradient")
    if clip_norm is not None:
        total = np.sqrt(sum(float((p.grad**2).sum()) for p in params))
        if total > clip_norm and total > 0.0:
            factor = clip_norm / total
            for p in params:
                p.grad = p.grad * factor
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    for p in params:
        key = id(p)
        m = state.m.get(key)
        if m is None:
            m = np.zeros_like(p.values)
            state.v[key] = np.zeros_like(p.values)
        v = state.v[key]
        m = b1 * m + (1.0 - b1) * p.grad
        v = b2 * v + (1.0 - b2) * p.grad * p.grad
        state.m[key], state.v[key] = m, v
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.values = p.values - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        if not np.all(np.isfinite(p.values)):
            raise FloatingPointError(
                f"non-finite parameter values after update: {p.name or id(p)}"
            )
        p.grad = None
