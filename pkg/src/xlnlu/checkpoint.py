"""Parameter checkpointing.

Format: a .npz archive mapping parameter names to float64 arrays (shape and
row-major data per entry).  float64 round-trips bit-exactly through npz, which
the tests rely on.
"""

import numpy as np


def save_params(path, named_params):
    """named_params: dict name -> Tensor (or ndarray)."""
    arrays = {}
    for name, p in named_params.items():
        arrays[name] = p.values if hasattr(p, "values") else np.asarray(p)
    np.savez(path, **arrays)


def load_params(path):
    """Returns dict name -> ndarray."""
    with np.load(path) as data:
        return {name: data[name].copy() for name in data.files}


def restore_params(named_params, loaded):
    """Write loaded arrays back into Tensors in place; shapes must match."""
    for name, p in named_params.items():
        if name not in loaded:
            raise KeyError(f"checkpoint is missing parameter '{name}'")
        arr = loaded[name]
        if arr.shape != p.values.shape:
            raise ValueError(
                f"checkpoint shape {arr.shape} != parameter '{name}' shape {p.values.shape}"
            )
        p.values = arr.copy()
