import numpy as np
import pytest

from xlnlu.corpus import CLS, PAD
from xlnlu.encoder import encode, init_encoder, with_cls
from xlnlu.tensor import Tape, backward, wsum


@pytest.fixture
def enc():
    return init_encoder(np.random.default_rng(0), vocab_size=12, embed_dim=6, hidden_dim=4)


def toy_batch():
    tokens = np.array([[3, 4, 5], [6, 7, PAD]], dtype=np.int64)
    mask = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0]])
    return with_cls(tokens, mask)


def test_with_cls_prepends_column():
    tokens, mask = toy_batch()
    assert tokens.shape == (2, 4) and mask.shape == (2, 4)
    assert np.all(tokens[:, 0] == CLS)
    assert np.all(mask[:, 0] == 1.0)


def test_encode_shapes_and_masked_zeros(enc):
    tokens, mask = toy_batch()
    states = encode(enc, tokens, mask)
    assert states.shape == (2, 4, 8)  # d_model = 2 * hidden
    assert np.all(states.values[1, 3, :] == 0.0)
    assert np.any(states.values[1, 2, :] != 0.0)


def test_single_token_utterance(enc):
    tokens, mask = with_cls(np.array([[5]], dtype=np.int64), np.ones((1, 1)))
    states = encode(enc, tokens, mask)
    assert states.shape == (1, 2, 8)
    assert np.all(np.isfinite(states.values))


def test_eval_mode_is_deterministic_and_dropout_free(enc):
    tokens, mask = toy_batch()
    a = encode(enc, tokens, mask, train=False, seed=1).values
    b = encode(enc, tokens, mask, train=False, seed=2).values
    assert a.tobytes() == b.tobytes()


def test_train_mode_dropout_depends_on_seed(enc):
    tokens, mask = toy_batch()
    a = encode(enc, tokens, mask, train=True, seed=1).values
    b = encode(enc, tokens, mask, train=True, seed=1).values
    c = encode(enc, tokens, mask, train=True, seed=2).values
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


def test_appended_pads_do_not_move_real_states(enc):
    tokens, mask = toy_batch()
    base = encode(enc, tokens, mask).values
    more_tokens = np.concatenate([tokens, np.full((2, 2), PAD, dtype=np.int64)], axis=1)
    more_mask = np.concatenate([mask, np.zeros((2, 2))], axis=1)
    padded = encode(enc, more_tokens, more_mask).values
    assert base.tobytes() == padded[:, :4, :].tobytes()
    assert np.all(padded[:, 4:, :] == 0.0)


def test_pad_token_content_is_irrelevant(enc):
    tokens, mask = toy_batch()
    changed = tokens.copy()
    changed[1, 3] = 9  # masked position
    assert (
        encode(enc, tokens, mask).values.tobytes()
        == encode(enc, changed, mask).values.tobytes()
    )


def test_gradients_reach_every_encoder_parameter(enc):
    tokens, mask = toy_batch()
    with Tape() as tape:
        states = encode(enc, tokens, mask)
        loss = wsum(states, np.random.default_rng(3).normal(size=states.shape))
    backward(loss, tape)
    for p in enc.params():
        assert p.grad is not None
        assert np.any(p.grad != 0.0), p.name
