"""Training-time soft alignment between source tokens and target encoder states.

Queries are raw source embeddings (rows of the shared table), keys are target
BiLSTM states with the CLS column excluded; scores are scaled by
1/(sqrt(d) * temperature) and row-softmaxed over real target positions.  The
attention summaries z_i feed the shared slot head (source tags supervise them)
and a feed-forward reconstruction head whose output weights are literally the
embedding table, so the source token must be recoverable from z_i.  All of this
exists only at training time: inference reads the encoder and heads alone.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import init
from .encoder import encode, with_cls
from .heads import intent_distribution, nll, slot_distributions, split_states
from .optim import adam_step
from .tensor import (
    Tape,
    Tensor,
    add,
    backward,
    bmm,
    embedding,
    matmul,
    relu,
    reshape,
    scale,
    slice_axis,
    softmax,
)


@dataclass
class AlignParams:
    w_query: Tensor      # (d_e, d)
    w_key: Tensor        # (d_model, d)
    ff1_w: Tensor        # (d_model, d_ff)
    ff1_b: Tensor        # (d_ff,)
    ff2_w: Tensor        # (d_ff, d_model)
    ff2_b: Tensor        # (d_model,)
    b_rec: Tensor        # (|V|,)
    temperature: float = 0.1

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    @property
    def d_attn(self):
        return self.w_query.shape[1]

    def named(self, prefix="align"):
        return {
            f"{prefix}.w_query": self.w_query,
            f"{prefix}.w_key": self.w_key,
            f"{prefix}.ff1_w": self.ff1_w,
            f"{prefix}.ff1_b": self.ff1_b,
            f"{prefix}.ff2_w": self.ff2_w,
            f"{prefix}.ff2_b": self.ff2_b,
            f"{prefix}.b_rec": self.b_rec,
        }

    def params(self, with_reconstruction=True):
        out = [self.w_query, self.w_key]
        if with_reconstruction:
            out += [self.ff1_w, self.ff1_b, self.ff2_w, self.ff2_b, self.b_rec]
        return out


def init_align(rng, embed_dim, d_model, vocab_size, d_attn=None, d_ff=None, temperature=0.1):
    if embed_dim != d_model:
        raise ValueError(
            f"weight tying requires embed_dim == d_model, got {embed_dim} != {d_model}"
        )
    d_attn = d_model if d_attn is None else d_attn
    d_ff = 2 * d_model if d_ff is None else d_ff
    return AlignParams(
        w_query=init.glorot(rng, embed_dim, d_attn, name="w_query"),
        w_key=init.glorot(rng, d_model, d_attn, name="w_key"),
        ff1_w=init.glorot(rng, d_model, d_ff, name="ff1_w"),
        ff1_b=init.zeros(d_ff, name="ff1_b"),
        ff2_w=init.glorot(rng, d_ff, d_model, name="ff2_w"),
        ff2_b=init.zeros(d_model, name="ff2_b"),
        b_rec=init.zeros(vocab_size, name="b_rec"),
        temperature=temperature,
    )


def attend(enc, align, src_tokens, src_mask, tgt_states, tgt_mask):
    """Soft-align source positions to target states.

    src_tokens/src_mask: (B, S); tgt_states: (B, 1+T, d_model) from ``encode``
    (CLS at column 0, excluded from the keys); tgt_mask: (B, T) over real
    target tokens.  Returns (Z, A): summaries (B, S, d_model) and attention
    rows (B, S, T) that sum to 1 over unmasked target positions.
    """
    n, s = src_tokens.shape
    t = tgt_mask.shape[1]
    d_model = tgt_states.shape[2]
    d = align.d_attn
    e_src = embedding(enc.embedding, src_tokens)
    q = matmul(reshape(e_src, (n * s, e_src.shape[2])), align.w_query)
    keys_in = slice_axis(tgt_states, axis=1, start=1, stop=1 + t)
    k = matmul(reshape(keys_in, (n * t, d_model)), align.w_key)
    scores = bmm(reshape(q, (n, s, d)), reshape(k, (n, t, d)), transpose_b=True)
    scores = scale(scores, 1.0 / (math.sqrt(d) * align.temperature))
    attn = softmax(
        reshape(scores, (n * s, t)),
        mask=np.repeat(np.asarray(tgt_mask, dtype=np.float64), s, axis=0),
    )
    summaries = bmm(reshape(attn, (n, s, t)), keys_in)
    return summaries, reshape(attn, (n, s, t))


def aligned_slot_loss(heads, summaries, src_tags, src_mask):
    """Source-tag NLL at every real source position, batch-averaged."""
    n, s, d_model = summaries.shape
    dist = slot_distributions(reshape(summaries, (n * s, d_model)), heads)
    return nll(dist, src_tags.reshape(-1), src_mask.reshape(-1) / n)


def reconstruction_loss(enc, align, summaries, src_tokens, src_mask):
    """NLL of the source tokens under the tied-softmax reconstruction head."""
    n, s, d_model = summaries.shape
    flat = reshape(summaries, (n * s, d_model))
    hidden = relu(add(matmul(flat, align.ff1_w), align.ff1_b))
    recon = add(matmul(hidden, align.ff2_w), align.ff2_b)
    logits = add(matmul(recon, enc.embedding, transpose_b=True), align.b_rec)
    return nll(softmax(logits), src_tokens.reshape(-1), src_mask.reshape(-1) / n)


def total_training_loss(enc, heads, align, pair_batch, train=False, seed=0, no_reconstruction=False):
    """Intent + aligned slot + reconstruction loss on one batch of pairs.

    Returns (loss, parts); parts maps component names to float values and the
    total is exactly their sum (one add chain on the same tape).
    """
    n = len(pair_batch)
    tokens, mask = with_cls(pair_batch.tgt_tokens, pair_batch.tgt_mask)
    tgt_states = encode(enc, tokens, mask, train=train, seed=seed)
    h0, _ = split_states(tgt_states, n, pair_batch.tgt_mask.shape[1])
    intent_loss = nll(intent_distribution(h0, heads), pair_batch.intents, np.full(n, 1.0 / n))
    summaries, _ = attend(
        enc, align, pair_batch.src_tokens, pair_batch.src_mask, tgt_states, pair_batch.tgt_mask
    )
    slot_loss = aligned_slot_loss(heads, summaries, pair_batch.src_tags, pair_batch.src_mask)
    total = add(intent_loss, slot_loss)
    parts = {
        "intent": float(intent_loss.values),
        "slot": float(slot_loss.values),
    }
    if not no_reconstruction:
        rec_loss = reconstruction_loss(
            enc, align, summaries, pair_batch.src_tokens, pair_batch.src_mask
        )
        total = add(total, rec_loss)
        parts["reconstruction"] = float(rec_loss.values)
    return total, parts


def joint_train_step(
    model, state, pair_batch, src_batch=None, seed=0,
    no_reconstruction=False, clip_norm=None,
):
    """One optimizer step on target-pair loss plus (optionally) a source batch.

    Passing src_batch=None trains on the pair objective alone (the
    no-joint-source ablation).  Gradients from both losses sum before the
    single Adam update.  Returns the component losses as floats.
    """
    from .heads import supervised_loss

    parts = {}
    with Tape() as tape:
        loss, parts = total_training_loss(
            model.encoder, model.heads, model.align, pair_batch,
            train=True, seed=2 * seed, no_reconstruction=no_reconstruction,
        )
        if src_batch is not None:
            src_loss = supervised_loss(
                model.encoder, model.heads, src_batch, train=True, seed=2 * seed + 1
            )
            parts["source"] = float(src_loss.values)
            loss = add(loss, src_loss)
    backward(loss, tape)
    params = (
        model.encoder.params()
        + model.heads.params()
        + model.align.params(with_reconstruction=not no_reconstruction)
    )
    adam_step(params, state, clip_norm=clip_norm)
    parts["total"] = float(loss.values)
    return parts


def hard_alignment(attn_row_matrix):
    """Per-source argmax over an (S, T) attention matrix, 1-based target indices.

    Ties break toward the lowest target index (argmax semantics).
    """
    a = np.asarray(attn_row_matrix)
    if a.ndim != 2:
        raise ValueError(f"expected an (S, T) matrix, got shape {a.shape}")
    return (a.argmax(axis=1) + 1).tolist()
