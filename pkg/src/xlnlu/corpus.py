"""Labeled utterances, TSV IO, vocabulary, label maps, and batching.

The on-disk format is four tab-separated columns per line:
``id<TAB>utterance<TAB>slot labels<TAB>intent`` with whitespace-tokenized
utterance and one BIO tag per token; an optional header line is tolerated.
Tokens are lowercased on load.
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import bio

HEADER = ("id", "utterance", "slot_labels", "intent")

PAD, UNK, CLS = 0, 1, 2
PAD_TOKEN, UNK_TOKEN, CLS_TOKEN = "<pad>", "<unk>", "<cls>"


@dataclass
class LabeledUtterance:
    id: str
    tokens: list
    bio_tags: list
    intent: str


def load_tsv(path, header=None):
    """Read a corpus file.  header: True/False, or None to auto-detect."""
    utterances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if lineno == 1 and header is not False:
                if tuple(c.strip() for c in cols) == HEADER:
                    continue
                if header is True:
                    continue  # declared header, whatever it says
            if len(cols) != 4:
                raise ValueError(
                    f"{path}: line {lineno}: expected 4 tab-separated columns, got {len(cols)}"
                )
            utt_id, text, tag_text, intent = (c.strip() for c in cols)
            tokens = [tok.lower() for tok in text.split()]
            tags = tag_text.split()
            if not tokens:
                raise ValueError(f"{path}: line {lineno}: row {utt_id!r} has an empty utterance")
            if len(tokens) != len(tags):
                raise ValueError(
                    f"{path}: line {lineno}: row {utt_id!r} has {len(tokens)} tokens"
                    f" but {len(tags)} slot labels"
                )
            if not intent:
                raise ValueError(f"{path}: line {lineno}: row {utt_id!r} has no intent")
            utterances.append(LabeledUtterance(utt_id, tokens, tags, intent))
    return utterances


def dump_tsv(utterances, path, header=False):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("\t".join(HEADER) + "\n")
        for utt in utterances:
            fh.write(
                f"{utt.id}\t{' '.join(utt.tokens)}\t{' '.join(utt.bio_tags)}\t{utt.intent}\n"
            )


def validate_bio(tags, mode="strict"):
    """Strict mode returns (index, message) pairs; lenient flags nothing."""
    if mode == "lenient":
        return []
    if mode != "strict":
        raise ValueError(f"unknown BIO validation mode: {mode!r}")
    return bio.strict_violations(tags)


class Vocabulary:
    """Token ids with <pad>=0, <unk>=1, <cls>=2 pinned, then frequency order."""

    def __init__(self, tokens):
        self.id_to_token = [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN] + list(tokens)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def encode(self, tokens):
        get = self.token_to_id.get
        return [get(tok, UNK) for tok in tokens]

    def decode(self, ids):
        return [self.id_to_token[i] for i in ids]


def build_vocab(datasets, min_count=1):
    """Count tokens over every provided dataset; order by count desc, then token."""
    counts = Counter()
    for dataset in datasets:
        for utt in dataset:
            counts.update(utt.tokens)
    kept = [tok for tok, c in counts.items() if c >= min_count]
    kept.sort(key=lambda tok: (-counts[tok], tok))
    return Vocabulary(kept)


@dataclass
class LabelMaps:
    intent_to_id: dict
    tag_to_id: dict
    id_to_intent: list = field(default_factory=list)
    id_to_tag: list = field(default_factory=list)

    def __post_init__(self):
        if not self.id_to_intent:
            self.id_to_intent = [k for k, _ in sorted(self.intent_to_id.items(), key=lambda kv: kv[1])]
        if not self.id_to_tag:
            self.id_to_tag = [k for k, _ in sorted(self.tag_to_id.items(), key=lambda kv: kv[1])]

    @property
    def n_intents(self):
        return len(self.intent_to_id)

    @property
    def n_tags(self):
        return len(self.tag_to_id)


def build_label_maps(datasets):
    """Dense sorted maps over the union of all provided splits; "O" always present."""
    intents = set()
    tags = {"O"}
    for dataset in datasets:
        for utt in dataset:
            intents.add(utt.intent)
            tags.update(utt.bio_tags)
    intent_to_id = {name: i for i, name in enumerate(sorted(intents))}
    tag_to_id = {name: i for i, name in enumerate(sorted(tags))}
    return LabelMaps(intent_to_id, tag_to_id)


@dataclass
class Batch:
    ids: list
    tokens: np.ndarray   # (B, T_max) int64, PAD on the right
    tags: np.ndarray     # (B, T_max) int64, "O" at padded positions
    intents: np.ndarray  # (B,) int64
    mask: np.ndarray     # (B, T_max) float64, 1.0 exactly on real tokens
    lengths: np.ndarray  # (B,) int64

    def __len__(self):
        return len(self.ids)


def make_batch(utterances, vocab, labels):
    n = len(utterances)
    t_max = max(len(u.tokens) for u in utterances)
    tokens = np.full((n, t_max), PAD, dtype=np.int64)
    tags = np.full((n, t_max), labels.tag_to_id["O"], dtype=np.int64)
    intents = np.zeros(n, dtype=np.int64)
    mask = np.zeros((n, t_max))
    lengths = np.zeros(n, dtype=np.int64)
    for row, utt in enumerate(utterances):
        length = len(utt.tokens)
        tokens[row, :length] = vocab.encode(utt.tokens)
        tags[row, :length] = [labels.tag_to_id[t] for t in utt.bio_tags]
        intents[row] = labels.intent_to_id[utt.intent]
        mask[row, :length] = 1.0
        lengths[row] = length
    return Batch([u.id for u in utterances], tokens, tags, intents, mask, lengths)


def to_batches(utterances, vocab, labels, batch_size, seed=None, shuffle=False):
    """Every utterance exactly once; sequential chunks of a (maybe shuffled) order."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = list(range(len(utterances)))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(utterances)).tolist()
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [utterances[i] for i in order[start : start + batch_size]]
        batches.append(make_batch(chunk, vocab, labels))
    return batches
