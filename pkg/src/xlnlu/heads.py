"""Intent and slot classification heads plus the supervised objective.

Intent reads the CLS state; slots read per-token states.  The supervised loss
is the mean over the batch of (intent NLL + summed real-position tag NLL);
padded positions are weighted out, so pad content can never move the loss.
"""

from dataclasses import dataclass

import numpy as np

from . import init
from .encoder import encode, with_cls
from .tensor import Tensor, add, log, matmul, pick, reshape, slice_axis, softmax, wsum
from . import bio


@dataclass
class HeadParams:
    w_intent: Tensor  # (n_intents, d_model)
    b_intent: Tensor  # (n_intents,)
    w_slot: Tensor    # (n_tags, d_model)
    b_slot: Tensor    # (n_tags,)

    def named(self, prefix="heads"):
        return {
            f"{prefix}.w_intent": self.w_intent,
            f"{prefix}.b_intent": self.b_intent,
            f"{prefix}.w_slot": self.w_slot,
            f"{prefix}.b_slot": self.b_slot,
        }

    def params(self):
        return [self.w_intent, self.b_intent, self.w_slot, self.b_slot]


def init_heads(rng, d_model, n_intents, n_tags):
    return HeadParams(
        w_intent=init.glorot(rng, d_model, n_intents, shape=(n_intents, d_model), name="w_intent"),
        b_intent=init.zeros(n_intents, name="b_intent"),
        w_slot=init.glorot(rng, d_model, n_tags, shape=(n_tags, d_model), name="w_slot"),
        b_slot=init.zeros(n_tags, name="b_slot"),
    )


def intent_distribution(h0, heads):
    """h0: (B, d_model) CLS states -> (B, n_intents) softmax rows."""
    return softmax(add(matmul(h0, heads.w_intent, transpose_b=True), heads.b_intent))


def slot_distributions(states, heads):
    """states: (N, d_model) token states -> (N, n_tags) softmax rows."""
    return softmax(add(matmul(states, heads.w_slot, transpose_b=True), heads.b_slot))


def split_states(states, n, t):
    """(B, 1+T, d) -> CLS states (B, d) and flattened token states (B*T, d)."""
    d = states.shape[2]
    h0 = reshape(slice_axis(states, axis=1, start=0, stop=1), (n, d))
    tokens = reshape(slice_axis(states, axis=1, start=1, stop=1 + t), (n * t, d))
    return h0, tokens


def nll(dist, index, weights):
    """Weighted negative log likelihood of ``index`` under softmax rows."""
    return wsum(log(pick(dist, index)), -np.asarray(weights, dtype=np.float64))


def supervised_loss(enc, heads, batch, train=False, seed=0):
    n, t = batch.tokens.shape
    tokens, mask = with_cls(batch.tokens, batch.mask)
    states = encode(enc, tokens, mask, train=train, seed=seed)
    h0, token_states = split_states(states, n, t)
    intent_loss = nll(intent_distribution(h0, heads), batch.intents, np.full(n, 1.0 / n))
    slot_loss = nll(
        slot_distributions(token_states, heads),
        batch.tags.reshape(-1),
        batch.mask.reshape(-1) / n,
    )
    return add(intent_loss, slot_loss)


def predict(enc, heads, batch, labels, repair=True):
    """Greedy decode: (intent names, per-utterance tag lists).

    Inference only reads the encoder and the two heads; argmax over logits, so
    no softmax is needed.  With repair=True orphan I-X tags become B-X.
    """
    n, t = batch.tokens.shape
    tokens, mask = with_cls(batch.tokens, batch.mask)
    states = encode(enc, tokens, mask, train=False).values
    h0 = states[:, 0, :]
    intent_logits = h0 @ heads.w_intent.values.T + heads.b_intent.values
    intent_ids = intent_logits.argmax(axis=1)
    slot_logits = states[:, 1:, :] @ heads.w_slot.values.T + heads.b_slot.values
    tag_ids = slot_logits.argmax(axis=2)
    intents = [labels.id_to_intent[i] for i in intent_ids]
    tag_seqs = []
    for row in range(n):
        tags = [labels.id_to_tag[tag_ids[row, col]] for col in range(batch.lengths[row])]
        tag_seqs.append(bio.repair(tags) if repair else tags)
    return intents, tag_seqs
