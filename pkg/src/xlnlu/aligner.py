"""EM-trained lexical word aligner with a diagonal position prior.

Models p(t_j | pair) = sum_i prior(i | j, S, T) * t(t_j | s_i)
                       + null_p * t(t_j | NULL),
with prior(i | j, S, T) proportional to exp(-lambda * |i/S - j/T|) and
normalized so that the real positions carry (1 - null_p) of the mass.  Only
the target-given-source direction is modeled; there is no symmetrization.

Viterbi picks the per-target argmax source position (ties -> lowest index,
NULL only on a strict win), and labels project along those links: each target
token copies its source parent's slot type (NULL -> O) and B/I prefixes are
recomputed left to right.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bitext import project_types

log = logging.getLogger(__name__)

NULL_TOKEN = "<null>"


@dataclass
class DiagonalPrior:
    lam: float = 4.0
    null_p: float = 0.08
    _cache: dict = field(default_factory=dict, repr=False)

    def weights(self, s_len, t_len):
        """(T, S) matrix; each row sums to 1 - null_p."""
        key = (s_len, t_len)
        got = self._cache.get(key)
        if got is None:
            i = np.arange(1, s_len + 1) / s_len
            j = np.arange(1, t_len + 1) / t_len
            raw = np.exp(-self.lam * np.abs(i[None, :] - j[:, None]))
            got = raw / raw.sum(axis=1, keepdims=True) * (1.0 - self.null_p)
            self._cache[key] = got
        return got


class TranslationTable:
    """Dense t(target | source) over the training vocabulary, NULL at row 0."""

    def __init__(self, src_tokens, tgt_tokens, floor=1e-12):
        self.src_tokens = [NULL_TOKEN] + sorted(src_tokens)
        self.tgt_tokens = sorted(tgt_tokens)
        self.src_index = {tok: i for i, tok in enumerate(self.src_tokens)}
        self.tgt_index = {tok: i for i, tok in enumerate(self.tgt_tokens)}
        self.floor = floor
        n_src, n_tgt = len(self.src_tokens), len(self.tgt_tokens)
        self.probs = np.full((n_src, n_tgt), 1.0 / n_tgt)

    def prob(self, tgt_token, src_token):
        """Unseen tokens fall back to the floor instead of failing."""
        si = self.src_index.get(src_token)
        ti = self.tgt_index.get(tgt_token)
        if si is None or ti is None:
            return self.floor
        return float(self.probs[si, ti])

    def row_sums(self):
        return self.probs.sum(axis=1)


@dataclass
class AlignmentResult:
    """Per target position (left to right) the 1-based source parent, None = NULL."""

    parents: list

    def links(self):
        return {(i, j) for j, i in enumerate(self.parents, start=1) if i is not None}

    def dump_line(self):
        return " ".join(f"{i}-{j}" for j, i in enumerate(self.parents, start=1) if i is not None)


def em_train(pairs, iterations=5, prior=None, floor=1e-12):
    """Returns (TranslationTable, diagnostics).

    diagnostics carries the per-iteration corpus log-likelihood (computed with
    the parameters entering that iteration, hence non-decreasing) and the
    count of pairs skipped for having an empty side.
    """
    prior = prior or DiagonalPrior()
    usable = []
    skipped = 0
    for pair in pairs:
        if len(pair.source.tokens) == 0 or len(pair.target_tokens) == 0:
            skipped += 1
            continue
        usable.append(pair)
    if skipped:
        log.warning("skipping %d pair(s) with an empty side", skipped)
    if not usable:
        raise ValueError("no non-empty pairs to train on")

    src_vocab = {tok for p in usable for tok in p.source.tokens}
    tgt_vocab = {tok for p in usable for tok in p.target_tokens}
    table = TranslationTable(src_vocab, tgt_vocab, floor=floor)
    n_tgt = len(table.tgt_tokens)

    indexed = []
    cooc = np.zeros_like(table.probs)
    for pair in usable:
        s_idx = np.array([table.src_index[tok] for tok in pair.source.tokens])
        t_idx = np.array([table.tgt_index[tok] for tok in pair.target_tokens])
        indexed.append((s_idx, t_idx))
        np.add.at(cooc, (s_idx[:, None], t_idx[None, :]), 1.0)
        np.add.at(cooc, (0, t_idx), 1.0)  # NULL co-occurs with every target token
    # co-occurrence start instead of uniform: one corpus pass of evidence for free
    table.probs = _normalize_rows(cooc, n_tgt, floor)

    history = []
    for _ in range(iterations):
        flat_positions = []
        flat_weights = []
        ll = 0.0
        for s_idx, t_idx in indexed:
            s_len, t_len = len(s_idx), len(t_idx)
            pw = prior.weights(s_len, t_len)  # (T, S)
            m = table.probs[np.ix_(s_idx, t_idx)]  # (S, T)
            p_null = table.probs[0, t_idx]  # (T,)
            joint = pw * m.T  # (T, S): prior * lexical per real source position
            null_joint = prior.null_p * p_null
            denom = joint.sum(axis=1) + null_joint
            ll += float(np.log(denom).sum())
            gamma = joint / denom[:, None]  # (T, S)
            gamma_null = null_joint / denom
            cells = (s_idx[None, :] * n_tgt + t_idx[:, None]).reshape(-1)
            flat_positions.append(cells)
            flat_weights.append(gamma.reshape(-1))
            flat_positions.append(t_idx)  # NULL row is row 0: cell index == t index
            flat_weights.append(gamma_null)
        history.append(ll)
        counts = np.bincount(
            np.concatenate(flat_positions),
            weights=np.concatenate(flat_weights),
            minlength=table.probs.size,
        ).reshape(table.probs.shape)
        table.probs = _normalize_rows(counts, n_tgt, floor)
    return table, {"log_likelihood": history, "skipped_pairs": skipped}


def _normalize_rows(counts, n_tgt, floor):
    totals = counts.sum(axis=1, keepdims=True)
    fresh = np.where(totals > 0.0, counts / np.where(totals > 0.0, totals, 1.0), 1.0 / n_tgt)
    return np.maximum(fresh, floor)


def viterbi_align(table, src_tokens, tgt_tokens, prior=None):
    """Best source parent per target token; never fails on unseen tokens."""
    prior = prior or DiagonalPrior()
    s_len, t_len = len(src_tokens), len(tgt_tokens)
    if s_len == 0 or t_len == 0:
        raise ValueError("cannot align a pair with an empty side")
    pw = prior.weights(s_len, t_len)  # (T, S)
    lex = np.empty((t_len, s_len))
    null_lex = np.empty(t_len)
    for j, t_tok in enumerate(tgt_tokens):
        null_lex[j] = table.prob(t_tok, NULL_TOKEN)
        for i, s_tok in enumerate(src_tokens):
            lex[j, i] = table.prob(t_tok, s_tok)
    scores = pw * lex
    best = scores.argmax(axis=1)  # ties resolve to the lowest source index
    best_score = scores[np.arange(t_len), best]
    null_score = prior.null_p * null_lex
    parents = [
        None if null_score[j] > best_score[j] else int(best[j]) + 1 for j in range(t_len)
    ]
    return AlignmentResult(parents)


def project_labels(source_tags, alignment):
    """Slot types ride the alignment onto the target side; prefixes rebuilt."""
    parents = alignment.parents if isinstance(alignment, AlignmentResult) else list(alignment)
    return project_types(source_tags, parents)


def projection_accuracy(predicted_seqs, gold_seqs, ids=None):
    """Token-level exact-match rate over a corpus of tag sequences."""
    if len(predicted_seqs) != len(gold_seqs):
        raise ValueError(
            f"corpus size mismatch: {len(predicted_seqs)} predicted vs {len(gold_seqs)} gold"
        )
    total = 0
    hit = 0
    for n, (pred, gold) in enumerate(zip(predicted_seqs, gold_seqs)):
        if len(pred) != len(gold):
            name = ids[n] if ids else f"#{n}"
            raise ValueError(
                f"utterance {name}: predicted {len(pred)} tags vs {len(gold)} gold"
            )
        total += len(gold)
        hit += sum(p == g for p, g in zip(pred, gold))
    if total == 0:
        raise ValueError("empty corpus")
    return hit / total


def alignment_accuracy(results, gold_links_per_pair):
    """Fraction of gold links recovered (every gold target has one parent)."""
    if len(results) != len(gold_links_per_pair):
        raise ValueError(
            f"corpus size mismatch: {len(results)} alignments vs {len(gold_links_per_pair)} gold"
        )
    n_gold = 0
    n_hit = 0
    for result, gold in zip(results, gold_links_per_pair):
        links = result.links() if isinstance(result, AlignmentResult) else set(result)
        gold = set(gold)
        n_gold += len(gold)
        n_hit += len(links & gold)
    if n_gold == 0:
        raise ValueError("no gold links to score against")
    return n_hit / n_gold


def dump_alignments(results, path):
    """One line per pair: space-separated source-target 1-based links, NULL omitted."""
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(result.dump_line() + "\n")
