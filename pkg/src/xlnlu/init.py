"""Parameter initialization rules, shared by every model component.

Weight matrices: uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Biases: zeros.  Embedding tables: normal(0, 0.1).
"""

import numpy as np

from .tensor import Tensor


def glorot(rng, fan_in, fan_out, shape=None, name=None):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in, fan_out) if shape is None else shape
    return Tensor(rng.uniform(-a, a, size=shape), requires_grad=True, name=name)


def zeros(shape, name=None):
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def embedding_table(rng, n_rows, dim, name=None):
    return Tensor(rng.normal(0.0, 0.1, size=(n_rows, dim)), requires_grad=True, name=name)
