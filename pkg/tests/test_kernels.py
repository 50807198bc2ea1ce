"""Kernel-level checks: numba and numpy paths agree, padding cannot leak."""

import numpy as np
import pytest

from xlnlu import kernels
from xlnlu._jit import NUMBA_ENABLED


def make_inputs(seed=0, B=3, T=5, D=4, H=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(B, T, D))
    mask = np.ones((B, T))
    mask[0, 3:] = 0.0
    mask[1, 4:] = 0.0
    wx = rng.normal(size=(D, 4 * H)) * 0.4
    wh = rng.normal(size=(H, 4 * H)) * 0.4
    b = rng.normal(size=4 * H) * 0.1
    return x, mask, wx, wh, b


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba path disabled")
@pytest.mark.parametrize("reverse", [False, True])
def test_jit_and_python_paths_agree(reverse):
    x, mask, wx, wh, b = make_inputs()
    jit = kernels.lstm_seq_forward(x, mask, wx, wh, b, reverse)
    py = kernels.lstm_seq_forward_py(x, mask, wx, wh, b, reverse)
    for a, bb in zip(jit, py):
        assert np.allclose(a, bb, rtol=1e-12, atol=1e-12)
    dh = np.random.default_rng(1).normal(size=jit[0].shape)
    gj = kernels.lstm_seq_backward(dh, x, mask, wx, wh, *jit, reverse)
    gp = kernels.lstm_seq_backward_py(dh, x, mask, wx, wh, *py, reverse)
    for a, bb in zip(gj, gp):
        assert np.allclose(a, bb, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("reverse", [False, True])
def test_appending_pad_steps_changes_nothing(reverse):
    # bit-exact: real positions must not see trailing pad at all
    x, mask, wx, wh, b = make_inputs()
    h1, _, _ = kernels.lstm_seq_forward(x, mask, wx, wh, b, reverse)
    rng = np.random.default_rng(2)
    x_pad = np.concatenate([x, rng.normal(size=(3, 2, 4))], axis=1)
    mask_pad = np.concatenate([mask, np.zeros((3, 2))], axis=1)
    h2, _, _ = kernels.lstm_seq_forward(x_pad, mask_pad, wx, wh, b, reverse)
    assert h1.tobytes() == h2[:, :5, :].tobytes()
    assert np.all(h2[:, 5:, :] == 0.0)


def test_pad_content_is_ignored_bitwise():
    x, mask, wx, wh, b = make_inputs()
    x2 = x.copy()
    x2[0, 3:] = 999.0  # masked positions of row 0
    for reverse in (False, True):
        h1, _, _ = kernels.lstm_seq_forward(x, mask, wx, wh, b, reverse)
        h2, _, _ = kernels.lstm_seq_forward(x2, mask, wx, wh, b, reverse)
        assert h1.tobytes() == h2.tobytes()


def test_reverse_direction_equals_flipped_forward():
    # with a full mask, reverse=True is forward on the time-reversed input
    x, _, wx, wh, b = make_inputs()
    mask = np.ones(x.shape[:2])
    hr, _, _ = kernels.lstm_seq_forward(x, mask, wx, wh, b, True)
    hf, _, _ = kernels.lstm_seq_forward(x[:, ::-1].copy(), mask, wx, wh, b, False)
    assert np.allclose(hr, hf[:, ::-1], atol=1e-12)


def test_scatter_add_matches_np_add_at():
    rng = np.random.default_rng(3)
    out = np.zeros((6, 4))
    idx = rng.integers(0, 6, size=20)
    vals = rng.normal(size=(20, 4))
    ref = out.copy()
    np.add.at(ref, idx, vals)
    kernels.scatter_add_rows(out, idx, vals)
    assert np.allclose(out, ref, atol=1e-12)
