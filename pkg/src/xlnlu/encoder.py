"""BiLSTM utterance encoder over a shared embedding table.

Input token matrices carry a leading CLS column (``with_cls`` builds it); the
encoder runs one LSTM per direction and concatenates, so d_model = 2 * hidden.
The backward recurrence effectively starts at each sequence's true last token:
masked steps reset the state to zero, so right padding cannot leak into real
positions.  Dropout (train mode only) is applied to the embeddings and to the
concatenated hidden states.
"""

from dataclasses import dataclass

import numpy as np

from . import init
from .corpus import CLS
from .tensor import Tensor, concat, dropout, embedding, lstm_seq


@dataclass
class LstmCell:
    wx: Tensor  # (d_in, 4H)
    wh: Tensor  # (H, 4H)
    b: Tensor   # (4H,)


@dataclass
class EncoderParams:
    embedding: Tensor  # (V, d_e)
    fwd: LstmCell
    bwd: LstmCell
    dropout_keep: float = 0.9

    @property
    def d_model(self):
        return 2 * self.fwd.wh.shape[0]

    def named(self, prefix="encoder"):
        out = {f"{prefix}.embedding": self.embedding}
        for direction, cell in (("fwd", self.fwd), ("bwd", self.bwd)):
            out[f"{prefix}.{direction}.wx"] = cell.wx
            out[f"{prefix}.{direction}.wh"] = cell.wh
            out[f"{prefix}.{direction}.b"] = cell.b
        return out

    def params(self):
        return [
            self.embedding,
            self.fwd.wx, self.fwd.wh, self.fwd.b,
            self.bwd.wx, self.bwd.wh, self.bwd.b,
        ]


def _cell(rng, d_in, hidden, name):
    return LstmCell(
        wx=init.glorot(rng, d_in, 4 * hidden, name=f"{name}.wx"),
        wh=init.glorot(rng, hidden, 4 * hidden, name=f"{name}.wh"),
        b=init.zeros(4 * hidden, name=f"{name}.b"),
    )


def init_encoder(rng, vocab_size, embed_dim=256, hidden_dim=128, dropout_rate=0.1):
    return EncoderParams(
        embedding=init.embedding_table(rng, vocab_size, embed_dim, name="embedding"),
        fwd=_cell(rng, embed_dim, hidden_dim, "fwd"),
        bwd=_cell(rng, embed_dim, hidden_dim, "bwd"),
        dropout_keep=1.0 - dropout_rate,
    )


def with_cls(tokens, mask):
    """Prepend the CLS column: (B, T) -> (B, 1+T) tokens and mask."""
    n = tokens.shape[0]
    cls_col = np.full((n, 1), CLS, dtype=tokens.dtype)
    ones = np.ones((n, 1))
    return np.concatenate([cls_col, tokens], axis=1), np.concatenate([ones, mask], axis=1)


def encode(params, tokens, mask, train=False, seed=0):
    """tokens/mask: (B, T) with CLS already at column 0.  Returns (B, T, d_model)."""
    emb = embedding(params.embedding, tokens)
    if train and params.dropout_keep < 1.0:
        emb = dropout(emb, keep=params.dropout_keep, seed=2 * seed)
    h_fwd = lstm_seq(emb, params.fwd.wx, params.fwd.wh, params.fwd.b, mask=mask, reverse=False)
    h_bwd = lstm_seq(emb, params.bwd.wx, params.bwd.wh, params.bwd.b, mask=mask, reverse=True)
    states = concat([h_fwd, h_bwd], axis=2)
    if train and params.dropout_keep < 1.0:
        states = dropout(states, keep=params.dropout_keep, seed=2 * seed + 1)
    return states
