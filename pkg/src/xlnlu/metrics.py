"""Span-level slot scoring and intent accuracy.

Chunking follows the conlleval convention: a chunk opens at every B tag and
at any I tag whose predecessor is not a same-type B/I; it closes at O, at a
type change, and at the next B.  Scores are corpus-level micro averages over
exact (type, start, end) matches.
"""

from dataclasses import dataclass, field
from typing import Optional

from .bio import split_tag


@dataclass(frozen=True, order=True)
class Span:
    type: str
    start: int  # 1-based, inclusive
    end: int  # 1-based, inclusive


def extract_spans(tags):
    spans = set()
    open_type: Optional[str] = None
    open_start = 0
    for pos, tag in enumerate(tags, start=1):
        prefix, slot_type = split_tag(tag)
        closes = open_type is not None and (
            prefix == "O" or prefix == "B" or slot_type != open_type
        )
        if closes:
            spans.add(Span(open_type, open_start, pos - 1))
            open_type = None
        if prefix == "B" or (prefix == "I" and open_type is None):
            open_type = slot_type
            open_start = pos
    if open_type is not None:
        spans.add(Span(open_type, open_start, len(tags)))
    return spans


@dataclass
class EvalReport:
    intent_accuracy: float
    slot_precision: float
    slot_recall: float
    slot_f1: float
    n_utterances: int
    n_gold_spans: int
    n_pred_spans: int
    n_correct_spans: int
    per_language: Optional[dict] = field(default=None)

    def to_dict(self):
        out = {
            "intent_accuracy": self.intent_accuracy,
            "slot_precision": self.slot_precision,
            "slot_recall": self.slot_recall,
            "slot_f1": self.slot_f1,
            "n_utterances": self.n_utterances,
            "n_gold_spans": self.n_gold_spans,
            "n_pred_spans": self.n_pred_spans,
            "n_correct_spans": self.n_correct_spans,
        }
        if self.per_language is not None:
            out["per_language"] = {
                lang: rep.to_dict() for lang, rep in self.per_language.items()
            }
        return out


def _span_counts(gold_seqs, pred_seqs, ids=None):
    if len(gold_seqs) != len(pred_seqs):
        raise ValueError(
            f"corpus size mismatch: {len(gold_seqs)} gold vs {len(pred_seqs)} predicted"
        )
    n_gold = n_pred = n_correct = 0
    for n, (gold, pred) in enumerate(zip(gold_seqs, pred_seqs)):
        if len(gold) != len(pred):
            name = ids[n] if ids else f"#{n}"
            raise ValueError(
                f"utterance {name}: {len(gold)} gold tags vs {len(pred)} predicted"
            )
        gold_spans = extract_spans(gold)
        pred_spans = extract_spans(pred)
        n_gold += len(gold_spans)
        n_pred += len(pred_spans)
        n_correct += len(gold_spans & pred_spans)
    return n_gold, n_pred, n_correct


def slot_f1(gold_seqs, pred_seqs, ids=None):
    """Micro precision/recall/F1 plus raw counts, as a dict."""
    n_gold, n_pred, n_correct = _span_counts(gold_seqs, pred_seqs, ids)
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0.0
        else 0.0
    )
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "n_gold": n_gold,
        "n_pred": n_pred,
        "n_correct": n_correct,
    }


def intent_accuracy(gold_intents, pred_intents):
    if len(gold_intents) != len(pred_intents):
        raise ValueError(
            f"corpus size mismatch: {len(gold_intents)} gold vs {len(pred_intents)} predicted"
        )
    if not gold_intents:
        raise ValueError("empty corpus")
    hits = sum(g == p for g, p in zip(gold_intents, pred_intents))
    return hits / len(gold_intents)


def evaluate(gold_utterances, pred_intents, pred_tag_seqs):
    """Full corpus report against gold utterances."""
    ids = [utt.id for utt in gold_utterances]
    gold_tags = [utt.bio_tags for utt in gold_utterances]
    gold_intents = [utt.intent for utt in gold_utterances]
    slots = slot_f1(gold_tags, pred_tag_seqs, ids=ids)
    return EvalReport(
        intent_accuracy=intent_accuracy(gold_intents, pred_intents),
        slot_precision=slots["precision"],
        slot_recall=slots["recall"],
        slot_f1=slots["f1"],
        n_utterances=len(gold_utterances),
        n_gold_spans=slots["n_gold"],
        n_pred_spans=slots["n_pred"],
        n_correct_spans=slots["n_correct"],
    )


def dump_conll(gold_utterances, pred_tag_seqs, path):
    """token gold predicted, one token per line, blank line after each utterance."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt, pred in zip(gold_utterances, pred_tag_seqs):
            if len(pred) != len(utt.tokens):
                raise ValueError(
                    f"utterance {utt.id}: {len(utt.tokens)} tokens vs {len(pred)} predicted tags"
                )
            for token, gold, guess in zip(utt.tokens, utt.bio_tags, pred):
                fh.write(f"{token} {gold} {guess}\n")
            fh.write("\n")
