import random

import pytest

from xlnlu.bio import split_tag
from xlnlu.corpus import LabeledUtterance
from xlnlu.metrics import (
    EvalReport,
    Span,
    dump_conll,
    evaluate,
    extract_spans,
    intent_accuracy,
    slot_f1,
)


def reference_spans(tags):
    """Chunk boundaries via the published conlleval start/end predicates."""

    def starts(prev_prefix, prev_type, prefix, slot_type):
        if prefix == "B":
            return True
        if prefix == "I" and prev_prefix == "O":
            return True
        if prefix == "I" and prev_type != slot_type:
            return True
        return False

    def ends(prev_prefix, prev_type, prefix, slot_type):
        if prev_prefix == "O":
            return False
        if prefix in ("O", "B"):
            return True
        return prev_type != slot_type

    spans = set()
    prev_prefix, prev_type = "O", None
    start = None
    for pos, tag in enumerate(tags, start=1):
        prefix, slot_type = split_tag(tag)
        if ends(prev_prefix, prev_type, prefix, slot_type):
            spans.add(Span(prev_type, start, pos - 1))
            start = None
        if starts(prev_prefix, prev_type, prefix, slot_type):
            start = pos
        prev_prefix, prev_type = prefix, slot_type
    if prev_prefix != "O":
        spans.add(Span(prev_type, start, len(tags)))
    return spans


def random_tags(rng, length, types=("a", "b", "c", "d", "e")):
    tags = []
    for _ in range(length):
        kind = rng.randrange(3)
        if kind == 0:
            tags.append("O")
        elif kind == 1:
            tags.append(f"B-{rng.choice(types)}")
        else:
            tags.append(f"I-{rng.choice(types)}")
    return tags


class TestExtractSpans:
    def test_orphan_leading_i_opens_a_chunk(self):
        assert extract_spans(["O", "I-x", "I-x"]) == {Span("x", 2, 3)}

    def test_adjacent_b_tags_are_two_spans(self):
        assert extract_spans(["B-x", "B-x"]) == {Span("x", 1, 1), Span("x", 2, 2)}

    def test_type_change_inside_i_run_splits(self):
        assert extract_spans(["I-x", "I-y"]) == {Span("x", 1, 1), Span("y", 2, 2)}

    def test_empty_and_all_outside(self):
        assert extract_spans([]) == set()
        assert extract_spans(["O", "O", "O"]) == set()

    def test_span_runs_to_sequence_end(self):
        assert extract_spans(["O", "B-q", "I-q"]) == {Span("q", 2, 3)}

    def test_matches_reference_on_random_sequences(self):
        rng = random.Random(20240817)
        for _ in range(1000):
            tags = random_tags(rng, rng.randint(1, 20))
            assert extract_spans(tags) == reference_spans(tags), tags


class TestSlotF1:
    def test_frozen_half_recall_case(self):
        gold = [["B-city", "O", "B-day"]]
        pred = [["B-city", "O", "O"]]
        scores = slot_f1(gold, pred)
        assert scores["precision"] == 1.0
        assert scores["recall"] == 0.5
        assert scores["f1"] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert (scores["n_gold"], scores["n_pred"], scores["n_correct"]) == (2, 1, 1)

    def test_no_predictions_scores_zero_without_dividing(self):
        scores = slot_f1([["B-city"]], [["O"]])
        assert scores == {
            "precision": 0.0,
            "recall": 0.0,
            "f1": 0.0,
            "n_gold": 1,
            "n_pred": 0,
            "n_correct": 0,
        }

    def test_boundary_error_is_a_full_miss(self):
        scores = slot_f1([["B-x", "I-x", "O"]], [["B-x", "I-x", "I-x"]])
        assert scores["n_correct"] == 0

    def test_swapping_arguments_swaps_precision_and_recall(self):
        rng = random.Random(7)
        gold = [random_tags(rng, 12) for _ in range(20)]
        pred = [random_tags(rng, 12) for _ in range(20)]
        ab = slot_f1(gold, pred)
        ba = slot_f1(pred, gold)
        assert ab["precision"] == ba["recall"]
        assert ab["recall"] == ba["precision"]
        assert ab["f1"] == ba["f1"]

    def test_micro_average_matches_pooled_counts(self):
        rng = random.Random(13)
        gold = [random_tags(rng, rng.randint(1, 20)) for _ in range(200)]
        pred = []
        for tags in gold:
            noisy = [
                t if rng.random() < 0.7 else random_tags(rng, 1)[0] for t in tags
            ]
            pred.append(noisy)
        scores = slot_f1(gold, pred)
        n_gold = n_pred = n_hit = 0
        for g, p in zip(gold, pred):
            gs, ps = reference_spans(g), reference_spans(p)
            n_gold += len(gs)
            n_pred += len(ps)
            n_hit += len(gs & ps)
        assert (scores["n_gold"], scores["n_pred"], scores["n_correct"]) == (
            n_gold,
            n_pred,
            n_hit,
        )
        assert scores["precision"] == n_hit / n_pred
        assert scores["recall"] == n_hit / n_gold

    def test_length_mismatch_names_the_utterance(self):
        with pytest.raises(ValueError, match="utt-3"):
            slot_f1([["O", "O"]], [["O"]], ids=["utt-3"])

    def test_corpus_size_mismatch_rejected(self):
        with pytest.raises(ValueError, match="corpus size"):
            slot_f1([["O"], ["O"]], [["O"]])


class TestIntentAccuracy:
    def test_exact_fraction(self):
        assert intent_accuracy(["a", "b", "c", "d"], ["a", "b", "x", "y"]) == 0.5

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            intent_accuracy([], [])

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError, match="corpus size"):
            intent_accuracy(["a"], ["a", "b"])


class TestEvaluate:
    def build(self):
        gold = [
            LabeledUtterance("u-1", ["fly", "to", "boston"], ["O", "O", "B-city"], "find"),
            LabeledUtterance("u-2", ["book", "it"], ["O", "O"], "book"),
        ]
        pred_intents = ["find", "find"]
        pred_tags = [["O", "O", "B-city"], ["O", "B-city"]]
        return gold, pred_intents, pred_tags

    def test_report_fields(self):
        gold, pred_intents, pred_tags = self.build()
        report = evaluate(gold, pred_intents, pred_tags)
        assert isinstance(report, EvalReport)
        assert report.intent_accuracy == 0.5
        assert report.slot_precision == 0.5
        assert report.slot_recall == 1.0
        assert report.slot_f1 == pytest.approx(2 / 3, abs=1e-12)
        assert report.n_utterances == 2
        assert (report.n_gold_spans, report.n_pred_spans, report.n_correct_spans) == (1, 2, 1)

    def test_to_dict_roundtrips_values(self):
        gold, pred_intents, pred_tags = self.build()
        report = evaluate(gold, pred_intents, pred_tags)
        as_dict = report.to_dict()
        assert as_dict["slot_f1"] == report.slot_f1
        assert "per_language" not in as_dict
        report.per_language = {"xx": evaluate(gold, pred_intents, pred_tags)}
        nested = report.to_dict()["per_language"]["xx"]
        assert nested["intent_accuracy"] == 0.5
        assert "per_language" not in nested


class TestDumpConll:
    def test_exact_bytes(self, tmp_path):
        gold = [
            LabeledUtterance("u-1", ["fly", "home"], ["O", "B-city"], "find"),
            LabeledUtterance("u-2", ["stay"], ["O"], "stay"),
        ]
        pred = [["O", "O"], ["B-city"]]
        out = tmp_path / "eval.conll"
        dump_conll(gold, pred, out)
        expected = "fly O O\nhome B-city O\n\nstay O B-city\n\n"
        assert out.read_text() == expected

    def test_prediction_length_mismatch_names_utterance(self, tmp_path):
        gold = [LabeledUtterance("u-9", ["a", "b"], ["O", "O"], "x")]
        with pytest.raises(ValueError, match="u-9"):
            dump_conll(gold, [["O"]], tmp_path / "bad.conll")
