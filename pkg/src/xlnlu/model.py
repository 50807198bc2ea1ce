"""Full model bundle: encoder + heads (+ alignment machinery for training)."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .encoder import EncoderParams, init_encoder
from .heads import HeadParams, init_heads
from .softalign import AlignParams, init_align


@dataclass
class NluModel:
    encoder: EncoderParams
    heads: HeadParams
    align: Optional[AlignParams] = None

    def named_params(self):
        out = {}
        out.update(self.encoder.named())
        out.update(self.heads.named())
        if self.align is not None:
            out.update(self.align.named())
        return out

    def supervised_params(self):
        return self.encoder.params() + self.heads.params()


def init_model(
    seed, vocab_size, n_intents, n_tags,
    embed_dim=256, hidden_dim=128, dropout_rate=0.1,
    with_align=False, d_attn=None, d_ff=None, temperature=0.1,
):
    rng = np.random.default_rng(seed)
    enc = init_encoder(rng, vocab_size, embed_dim, hidden_dim, dropout_rate)
    heads = init_heads(rng, enc.d_model, n_intents, n_tags)
    align = None
    if with_align:
        align = init_align(
            rng, embed_dim, enc.d_model, vocab_size,
            d_attn=d_attn, d_ff=d_ff, temperature=temperature,
        )
    return NluModel(enc, heads, align)
