"""Hot numeric kernels: masked LSTM recurrence (forward + BPTT) and row scatter-add.

These dominate training time, so they are compiled with numba when available.
The undecorated python versions are kept as module attributes (``*_py``) so the
benchmark can time both paths in one process; everything else should import the
wrapped names.  Set XLNLU_NUMBA=0 to run the pure-numpy path everywhere.

Gate layout is i, f, g, o packed along the last axis of the (.., 4H) projection.
Masked timesteps reset h and c to exactly zero, so right-padded batches behave
bit-identically to unpadded ones at real positions (the input projection is done
per timestep on purpose: one big (B*T, d) GEMM would let pad rows change BLAS
blocking for real rows).
"""

import numpy as np

from ._jit import NUMBA_ENABLED, njit


def _lstm_seq_forward(X, mask, Wx, Wh, b, reverse):
    # X: (B, T, Din), mask: (B, T) of {0., 1.}, Wx: (Din, 4H), Wh: (H, 4H), b: (4H,)
    B, T, _ = X.shape
    H = Wh.shape[0]
    Hseq = np.zeros((B, T, H))
    Cseq = np.zeros((B, T, H))
    Gseq = np.zeros((B, T, 4 * H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for step in range(T):
        t = T - 1 - step if reverse else step
        xt = np.ascontiguousarray(X[:, t, :])
        a = np.dot(xt, Wx) + np.dot(h, Wh) + b
        with np.errstate(over="ignore"):  # pad garbage may saturate the gates
            i = 1.0 / (1.0 + np.exp(-a[:, :H]))
            f = 1.0 / (1.0 + np.exp(-a[:, H : 2 * H]))
            g = np.tanh(a[:, 2 * H : 3 * H])
            o = 1.0 / (1.0 + np.exp(-a[:, 3 * H :]))
        m = np.ascontiguousarray(mask[:, t]).reshape(B, 1)
        # + 0.0 normalizes -0.0 at masked steps so pad content cannot even
        # flip the sign bit of the stored zeros
        c = (f * c + i * g) * m + 0.0
        h = (o * np.tanh(c)) * m + 0.0
        Hseq[:, t, :] = h
        Cseq[:, t, :] = c
        Gseq[:, t, :H] = i
        Gseq[:, t, H : 2 * H] = f
        Gseq[:, t, 2 * H : 3 * H] = g
        Gseq[:, t, 3 * H :] = o
    return Hseq, Cseq, Gseq


def _lstm_seq_backward(dH, X, mask, Wx, Wh, Hseq, Cseq, Gseq, reverse):
    # Reverse-order BPTT over the same step sequence the forward pass used.
    B, T, _ = X.shape
    H = Wh.shape[0]
    dX = np.zeros_like(X)
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dh_carry = np.zeros((B, H))
    dc_carry = np.zeros((B, H))
    zeros_bh = np.zeros((B, H))
    for step in range(T - 1, -1, -1):
        t = T - 1 - step if reverse else step
        i = Gseq[:, t, :H]
        f = Gseq[:, t, H : 2 * H]
        g = Gseq[:, t, 2 * H : 3 * H]
        o = Gseq[:, t, 3 * H :]
        if reverse:
            first = t == T - 1
            prev_t = t + 1
        else:
            first = t == 0
            prev_t = t - 1
        if first:
            h_prev = zeros_bh
            c_prev = zeros_bh
        else:
            h_prev = np.ascontiguousarray(Hseq[:, prev_t, :])
            c_prev = np.ascontiguousarray(Cseq[:, prev_t, :])
        m = np.ascontiguousarray(mask[:, t]).reshape(B, 1)
        tc = np.tanh(Cseq[:, t, :])
        dh = dH[:, t, :] + dh_carry
        do = dh * tc * m
        dc = dh * m * o * (1.0 - tc * tc) + dc_carry
        dcpre = dc * m
        di = dcpre * g
        df = dcpre * c_prev
        dg = dcpre * i
        dc_carry = dcpre * f
        da = np.empty((B, 4 * H))
        da[:, :H] = di * i * (1.0 - i)
        da[:, H : 2 * H] = df * f * (1.0 - f)
        da[:, 2 * H : 3 * H] = dg * (1.0 - g * g)
        da[:, 3 * H :] = do * o * (1.0 - o)
        xt = np.ascontiguousarray(X[:, t, :])
        dX[:, t, :] = np.dot(da, Wx.T)
        dWx += np.dot(xt.T, da)
        dWh += np.dot(h_prev.T, da)
        db += np.sum(da, axis=0)
        dh_carry = np.dot(da, Wh.T)
    return dX, dWx, dWh, db


def _scatter_add_rows(out, idx, vals):
    # out[idx[n], :] += vals[n, :] with repeated indices accumulating.
    n_rows, dim = vals.shape
    for n in range(n_rows):
        r = idx[n]
        for d in range(dim):
            out[r, d] += vals[n, d]


lstm_seq_forward_py = _lstm_seq_forward
lstm_seq_backward_py = _lstm_seq_backward
scatter_add_rows_py = _scatter_add_rows

if NUMBA_ENABLED:
    lstm_seq_forward = njit(cache=True)(_lstm_seq_forward)
    lstm_seq_backward = njit(cache=True)(_lstm_seq_backward)
    scatter_add_rows = njit(cache=True)(_scatter_add_rows)
else:
    lstm_seq_forward = _lstm_seq_forward
    lstm_seq_backward = _lstm_seq_backward
    scatter_add_rows = _scatter_add_rows
