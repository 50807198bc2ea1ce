"""Synthetic pseudo-language bitext with known gold alignments.

A pseudo-language is a deterministic transform of the source: every token maps
through a bijection (suffix tag drawn from lexicon_seed), word order is
reversed inside consecutive windows of size k, and each source token splits
into two adjacent half-tokens with probability fertility_rate.  Because the
transform is known, every pair carries its gold word alignment (1-based
(source, target) index pairs) and the gold target tags obtained by projecting
the source tags through that alignment.

Real translations with no gold fields enter through ``import_translations``
(TSV: id<TAB>target utterance).
"""

import string
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bio
from .corpus import LabeledUtterance


@dataclass
class PseudoLangSpec:
    lexicon_seed: int = 0
    reversal_window: int = 1
    fertility_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.reversal_window < 1:
            raise ValueError(f"reversal_window must be >= 1, got {self.reversal_window}")
        if not 0.0 <= self.fertility_rate < 1.0:
            raise ValueError(f"fertility_rate must be in [0, 1), got {self.fertility_rate}")

    @property
    def lang_tag(self):
        rng = np.random.default_rng(self.lexicon_seed)
        return "".join(rng.choice(list(string.ascii_lowercase), size=2))

    def pseudo(self, token):
        return f"{token}~{self.lang_tag}"


@dataclass
class AlignedPair:
    source: LabeledUtterance
    target_tokens: list
    intent: str
    gold_alignment: Optional[set] = None   # {(i, j)} 1-based source->target
    gold_target_tags: Optional[list] = None


def _window_reversed_positions(n, k):
    positions = []
    for start in range(0, n, k):
        chunk = list(range(start + 1, min(start + k, n) + 1))
        positions.extend(reversed(chunk))
    return positions


def project_types(source_tags, parent_of_target):
    """parent_of_target: per target position the 1-based source parent or None."""
    types = []
    for parent in parent_of_target:
        if parent is None:
            types.append(None)
        else:
            types.append(bio.split_tag(source_tags[parent - 1])[1])
    return bio.types_to_bio(types)


def transduce(utt, spec):
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, zlib.crc32(utt.id.encode("utf-8"))])
    )
    n = len(utt.tokens)
    splits = rng.random(n) < spec.fertility_rate
    tag = spec.lang_tag
    target_tokens = []
    alignment = set()
    parents = []
    for i in _window_reversed_positions(n, spec.reversal_window):
        token = utt.tokens[i - 1]
        if splits[i - 1]:
            surfaces = [f"{token}#1~{tag}", f"{token}#2~{tag}"]
        else:
            surfaces = [f"{token}~{tag}"]
        for surface in surfaces:
            target_tokens.append(surface)
            alignment.add((i, len(target_tokens)))
            parents.append(i)
    gold_tags = project_types(utt.bio_tags, parents)
    return AlignedPair(utt, target_tokens, utt.intent, alignment, gold_tags)


def make_parallel_corpus(utterances, spec):
    return [transduce(utt, spec) for utt in utterances]


def pairs_to_target_corpus(pairs, suffix=""):
    """Gold-tagged target-side view of synthetic pairs, for evaluation only."""
    out = []
    for pair in pairs:
        if pair.gold_target_tags is None:
            raise ValueError(f"pair {pair.source.id!r} has no gold target tags")
        out.append(
            LabeledUtterance(
                pair.source.id + suffix, list(pair.target_tokens), list(pair.gold_target_tags), pair.intent
            )
        )
    return out


def strip_gold(pairs):
    """Training-side view: no gold alignment, no gold target tags."""
    return [
        AlignedPair(p.source, list(p.target_tokens), p.intent, None, None) for p in pairs
    ]


@dataclass
class PairBatch:
    ids: list
    src_tokens: np.ndarray   # (B, S_max) int64
    src_tags: np.ndarray     # (B, S_max) int64, source-language gold tags
    src_mask: np.ndarray     # (B, S_max)
    intents: np.ndarray      # (B,) int64, inherited from the source side
    tgt_tokens: np.ndarray   # (B, T_max) int64
    tgt_mask: np.ndarray     # (B, T_max)
    src_lengths: np.ndarray
    tgt_lengths: np.ndarray

    def __len__(self):
        return len(self.ids)


def make_pair_batch(pairs, vocab, labels):
    from .corpus import PAD  # local import keeps the module split clean

    n = len(pairs)
    s_max = max(len(p.source.tokens) for p in pairs)
    t_max = max(len(p.target_tokens) for p in pairs)
    src_tokens = np.full((n, s_max), PAD, dtype=np.int64)
    src_tags = np.full((n, s_max), labels.tag_to_id["O"], dtype=np.int64)
    src_mask = np.zeros((n, s_max))
    intents = np.zeros(n, dtype=np.int64)
    tgt_tokens = np.full((n, t_max), PAD, dtype=np.int64)
    tgt_mask = np.zeros((n, t_max))
    src_lengths = np.zeros(n, dtype=np.int64)
    tgt_lengths = np.zeros(n, dtype=np.int64)
    for row, pair in enumerate(pairs):
        s, t = len(pair.source.tokens), len(pair.target_tokens)
        src_tokens[row, :s] = vocab.encode(pair.source.tokens)
        src_tags[row, :s] = [labels.tag_to_id[tag] for tag in pair.source.bio_tags]
        src_mask[row, :s] = 1.0
        intents[row] = labels.intent_to_id[pair.intent]
        tgt_tokens[row, :t] = vocab.encode(pair.target_tokens)
        tgt_mask[row, :t] = 1.0
        src_lengths[row], tgt_lengths[row] = s, t
    return PairBatch(
        [p.source.id for p in pairs], src_tokens, src_tags, src_mask, intents,
        tgt_tokens, tgt_mask, src_lengths, tgt_lengths,
    )


def pair_batches(pairs, vocab, labels, batch_size, seed=None, shuffle=False):
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = list(range(len(pairs)))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(pairs)).tolist()
    return [
        make_pair_batch([pairs[i] for i in order[k : k + batch_size]], vocab, labels)
        for k in range(0, len(order), batch_size)
    ]


def import_translations(utterances, path):
    """Join utterances with a translation TSV (id<TAB>target utterance)."""
    translations = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ValueError(
                    f"{path}: line {lineno}: expected 2 tab-separated columns, got {len(cols)}"
                )
            utt_id, text = cols[0].strip(), cols[1].strip()
            if utt_id in translations:
                raise ValueError(f"{path}: line {lineno}: duplicate translation for id {utt_id!r}")
            if not text.split():
                raise ValueError(f"{path}: line {lineno}: empty translation for id {utt_id!r}")
            translations[utt_id] = [tok.lower() for tok in text.split()]
    known = {u.id for u in utterances}
    for utt_id in translations:
        if utt_id not in known:
            raise ValueError(f"{path}: translation for unknown utterance id {utt_id!r}")
    pairs = []
    for utt in utterances:
        if utt.id not in translations:
            raise ValueError(f"{path}: no translation for utterance id {utt.id!r}")
        pairs.append(AlignedPair(utt, translations[utt.id], utt.intent, None, None))
    return pairs
