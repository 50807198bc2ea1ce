"""Soft alignment: attention contracts, loss closed forms, joint training step."""

import dataclasses

import numpy as np
import pytest

from xlnlu import grammar
from xlnlu.bitext import PseudoLangSpec, make_pair_batch, make_parallel_corpus
from xlnlu.corpus import build_label_maps, build_vocab, make_batch
from xlnlu.encoder import encode, with_cls
from xlnlu.gradcheck import finite_diff_check
from xlnlu.heads import predict, supervised_loss
from xlnlu.model import init_model
from xlnlu.optim import AdamState
from xlnlu.softalign import (
    aligned_slot_loss,
    attend,
    hard_alignment,
    init_align,
    joint_train_step,
    reconstruction_loss,
    total_training_loss,
)
from xlnlu.tensor import Tensor


def build_fixture(n_utts=4, seed=0, fert=0.0, k=2, embed=8, hidden=4):
    utts = grammar.generate(n_utts, seed=seed)
    spec = PseudoLangSpec(lexicon_seed=1, reversal_window=k, fertility_rate=fert, seed=seed)
    pairs = make_parallel_corpus(utts, spec)
    from xlnlu.bitext import pairs_to_target_corpus

    vocab = build_vocab([utts, pairs_to_target_corpus(pairs)])
    labels = build_label_maps([utts])
    model = init_model(
        seed + 100, len(vocab), labels.n_intents, labels.n_tags,
        embed_dim=embed, hidden_dim=hidden, with_align=True,
    )
    pair_batch = make_pair_batch(pairs, vocab, labels)
    src_batch = make_batch(utts, vocab, labels)
    return model, pair_batch, src_batch, vocab, labels, pairs


def target_states_for(model, pair_batch):
    tokens, mask = with_cls(pair_batch.tgt_tokens, pair_batch.tgt_mask)
    return encode(model.encoder, tokens, mask)


def test_attend_shapes_and_row_sums():
    model, pb, _, _, _, _ = build_fixture()
    states = target_states_for(model, pb)
    z, a = attend(model.encoder, model.align, pb.src_tokens, pb.src_mask, states, pb.tgt_mask)
    n, s = pb.src_tokens.shape
    t = pb.tgt_mask.shape[1]
    assert z.shape == (n, s, model.encoder.d_model)
    assert a.shape == (n, s, t)
    sums = a.values.sum(axis=2)
    assert np.allclose(sums, 1.0, atol=1e-9)
    # masked target columns carry exactly zero mass
    for row in range(n):
        dead = pb.tgt_mask[row] == 0.0
        assert np.all(a.values[row][:, dead] == 0.0)


def test_attend_single_token_pair_is_degenerate():
    model, _, _, vocab, labels, _ = build_fixture()
    from xlnlu.bitext import AlignedPair
    from xlnlu.corpus import LabeledUtterance

    intent = labels.id_to_intent[0]
    pair = AlignedPair(LabeledUtterance("p", ["boston"], ["O"], intent), ["boston~aa"], intent)
    pb = make_pair_batch([pair], vocab, labels)
    states = target_states_for(model, pb)
    _, a = attend(model.encoder, model.align, pb.src_tokens, pb.src_mask, states, pb.tgt_mask)
    assert a.values.shape == (1, 1, 1)
    assert a.values[0, 0, 0] == 1.0


def test_attend_rejects_fully_masked_target():
    model, pb, _, _, _, _ = build_fixture()
    states = target_states_for(model, pb)
    dead_mask = np.zeros_like(pb.tgt_mask)
    with pytest.raises(ValueError, match="masked"):
        attend(model.encoder, model.align, pb.src_tokens, pb.src_mask, states, dead_mask)


def test_cls_state_is_not_a_key():
    model, pb, _, _, _, _ = build_fixture()
    states = target_states_for(model, pb)
    _, a1 = attend(model.encoder, model.align, pb.src_tokens, pb.src_mask, states, pb.tgt_mask)
    poked = Tensor(states.values.copy())
    poked.values[:, 0, :] = 123.0  # CLS column must be structurally excluded
    _, a2 = attend(model.encoder, model.align, pb.src_tokens, pb.src_mask, poked, pb.tgt_mask)
    assert a1.values.tobytes() == a2.values.tobytes()


def test_aligned_slot_loss_uniform_closed_form():
    model, pb, _, _, labels, _ = build_fixture()
    for p in (model.heads.w_slot, model.heads.b_slot):
        p.values = np.zeros_like(p.values)
    two = Tensor(np.random.default_rng(0).normal(size=(1, 2, model.encoder.d_model)))
    tags = np.array([[labels.tag_to_id["O"], labels.tag_to_id["O"]]])
    loss = aligned_slot_loss(model.heads, two, tags, np.ones((1, 2)))
    assert np.isclose(float(loss.values), 2 * np.log(labels.n_tags), atol=1e-12)


def test_reconstruction_loss_uniform_closed_form():
    model, pb, _, vocab, _, _ = build_fixture()
    model.encoder.embedding.values = np.zeros_like(model.encoder.embedding.values)
    summaries = Tensor(np.random.default_rng(1).normal(size=(1, 3, model.encoder.d_model)))
    loss = reconstruction_loss(
        model.encoder, model.align, summaries, np.array([[3, 4, 5]]), np.ones((1, 3))
    )
    assert np.isclose(float(loss.values), 3 * np.log(len(vocab)), atol=1e-10)


def test_total_loss_is_exact_sum_of_parts():
    model, pb, _, _, _, _ = build_fixture()
    total, parts = total_training_loss(model.encoder, model.heads, model.align, pb)
    assert set(parts) == {"intent", "slot", "reconstruction"}
    assert float(total.values) == parts["intent"] + parts["slot"] + parts["reconstruction"]
    ablated, parts2 = total_training_loss(
        model.encoder, model.heads, model.align, pb, no_reconstruction=True
    )
    assert set(parts2) == {"intent", "slot"}
    assert float(ablated.values) == parts2["intent"] + parts2["slot"]


def test_total_loss_gradients_match_finite_differences():
    # seed chosen so no relu pre-activation sits within the FD step of zero
    model, pb, _, _, _, _ = build_fixture(n_utts=2, embed=6, hidden=3, seed=1)
    params = model.encoder.params() + model.heads.params() + model.align.params()

    def f():
        loss, _ = total_training_loss(model.encoder, model.heads, model.align, pb)
        return loss

    report = finite_diff_check(f, params, step=1e-4, tol=1e-3, sample=6, seed=0)
    assert report.ok(1e-3), report.offending[:5]


def test_embedding_gradient_includes_tied_reconstruction_path():
    # gradient w.r.t. E must combine the query-embedding path and the tied
    # output-projection path; finite differences see both at once
    model, pb, _, _, _, _ = build_fixture(n_utts=2, embed=6, hidden=3)

    def f():
        states = target_states_for(model, pb)
        z, _ = attend(model.encoder, model.align, pb.src_tokens, pb.src_mask, states, pb.tgt_mask)
        return reconstruction_loss(model.encoder, model.align, z, pb.src_tokens, pb.src_mask)

    report = finite_diff_check(f, [model.encoder.embedding], step=1e-4, tol=1e-3, sample=12, seed=1)
    assert report.ok(1e-3), report.offending[:5]


def test_supervised_loss_gradients_match_finite_differences():
    model, _, sb, _, _, _ = build_fixture(n_utts=2, embed=6, hidden=3)
    params = model.supervised_params()

    def f():
        return supervised_loss(model.encoder, model.heads, sb, train=True, seed=3)

    report = finite_diff_check(f, params, step=1e-4, tol=1e-3, sample=6, seed=2)
    assert report.ok(1e-3), report.offending[:5]


def test_joint_step_updates_and_reports_parts():
    model, pb, sb, _, _, _ = build_fixture()
    state = AdamState(lr=1e-3)
    before = {k: p.values.copy() for k, p in model.named_params().items()}
    parts = joint_train_step(model, state, pb, src_batch=sb, seed=0)
    assert {"intent", "slot", "reconstruction", "source", "total"} <= set(parts)
    assert np.isclose(
        parts["total"],
        parts["intent"] + parts["slot"] + parts["reconstruction"] + parts["source"],
    )
    after = model.named_params()
    changed = [k for k in before if not np.array_equal(before[k], after[k].values)]
    assert "encoder.embedding" in changed and "align.w_query" in changed


def test_zero_learning_rate_changes_nothing():
    model, pb, sb, _, _, _ = build_fixture()
    state = AdamState(lr=0.0)
    before = {k: p.values.copy() for k, p in model.named_params().items()}
    joint_train_step(model, state, pb, src_batch=sb, seed=0)
    for k, p in model.named_params().items():
        assert np.array_equal(before[k], p.values), k


def test_ablation_flags_leave_unused_parts_untouched():
    model, pb, _, _, _, _ = build_fixture()
    state = AdamState(lr=1e-2)
    rec_before = {p.name: p.values.copy() for p in model.align.params()[2:]}
    joint_train_step(model, state, pb, src_batch=None, no_reconstruction=True, seed=1)
    for p in model.align.params()[2:]:
        assert np.array_equal(rec_before[p.name], p.values), p.name


def test_hard_alignment_argmax_and_ties():
    a = np.array([[0.2, 0.5, 0.3], [0.4, 0.4, 0.2]])
    assert hard_alignment(a) == [2, 1]  # tie in row 2 breaks to the lowest index
    uniform = np.full((1, 3), 1.0 / 3.0)
    assert hard_alignment(uniform) == [1]
    with pytest.raises(ValueError):
        hard_alignment(np.zeros(3))


def test_lower_temperature_sharpens_attention():
    model, pb, _, _, _, _ = build_fixture(n_utts=3)
    states = target_states_for(model, pb)
    peaks = []
    for tau in (1.0, 0.5, 0.1, 0.01):
        align = dataclasses.replace(model.align, temperature=tau)
        _, a = attend(model.encoder, align, pb.src_tokens, pb.src_mask, states, pb.tgt_mask)
        live = pb.src_mask.reshape(-1) == 1.0
        peaks.append(a.values.max(axis=2).reshape(-1)[live])
    for sharper, softer in zip(peaks[1:], peaks[:-1]):
        assert np.all(sharper >= softer)
        assert sharper.mean() > softer.mean()


def test_inference_ignores_alignment_parameters():
    model, pb, sb, vocab, labels, _ = build_fixture()
    state = AdamState(lr=1e-3)
    for step in range(3):
        joint_train_step(model, state, pb, src_batch=sb, seed=step)
    base = predict(model.encoder, model.heads, sb, labels)
    rng = np.random.default_rng(123)
    for p in model.align.params():
        p.values = rng.normal(size=p.values.shape)
    assert predict(model.encoder, model.heads, sb, labels) == base
