"""Experiment driver: modes, training loops, evaluation, reports.

Mode isolation is structural: ``assemble_training`` is the only place training
data is put together, and for the zero-shot modes it reaches labeled target
data through no code path — pairs are stripped of gold annotations before
use, and the hard-align branch manufactures target labels from source tags
alone.  Labeled target data enters a zero-shot mixture only through the
explicit few-shot path of ``run_learning_curve``.
"""

import hashlib
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import grammar
from .aligner import (
    AlignmentResult,
    DiagonalPrior,
    alignment_accuracy,
    em_train,
    project_labels,
    projection_accuracy,
    viterbi_align,
)
from .bitext import (
    PseudoLangSpec,
    make_pair_batch,
    make_parallel_corpus,
    pair_batches,
    pairs_to_target_corpus,
    strip_gold,
)
from .corpus import (
    LabeledUtterance,
    LabelMaps,
    Vocabulary,
    build_label_maps,
    build_vocab,
    load_tsv,
    to_batches,
)
from .encoder import encode, with_cls
from .heads import predict, supervised_loss
from .metrics import evaluate
from .model import init_model
from .optim import AdamState, adam_step
from .softalign import attend, hard_alignment, joint_train_step
from .tensor import Tape, backward


@dataclass
class ExperimentData:
    """Corpora per role ("src"/"tgt") and split, plus parallel pairs.

    ``train_pairs``/``test_pairs`` keep gold annotations when the bitext is
    synthetic; training code must go through ``strip_gold`` first.
    """

    corpora: dict = field(default_factory=dict)  # {(role, split): [LabeledUtterance]}
    train_pairs: Optional[list] = None
    test_pairs: Optional[list] = None
    synthetic: bool = True

    def corpus(self, role, split):
        got = self.corpora.get((role, split))
        if got is None:
            raise ValueError(f"no {role} {split} data available")
        return got

    def has(self, role, split):
        return (role, split) in self.corpora

    @property
    def roles(self):
        return sorted({role for role, _ in self.corpora})


def build_data(config):
    if config.uses_files:
        return _load_file_data(config)
    return _build_synthetic_data(config)


def _build_synthetic_data(config):
    sizes = {
        "train": config.synthetic_train,
        "dev": config.synthetic_dev,
        "test": config.synthetic_test,
    }
    grammar_corpora = {
        split: grammar.generate(n, seed=config.grammar_seed + k, id_prefix=split)
        for k, (split, n) in enumerate(sizes.items())
    }
    data = ExperimentData()
    if not config.pseudo:
        # single-language setup: the grammar itself is the target language
        for split, corpus in grammar_corpora.items():
            data.corpora[("tgt", split)] = corpus
        return data
    spec = PseudoLangSpec(
        lexicon_seed=config.lexicon_seed,
        reversal_window=config.reversal_window,
        fertility_rate=config.fertility_rate,
        seed=config.bitext_seed,
    )
    pairs = {split: make_parallel_corpus(corpus, spec) for split, corpus in grammar_corpora.items()}
    for split, corpus in grammar_corpora.items():
        data.corpora[("src", split)] = corpus
        data.corpora[("tgt", split)] = pairs_to_target_corpus(pairs[split], suffix="@tgt")
    data.train_pairs = pairs["train"]
    data.test_pairs = pairs["test"]
    return data


def _load_file_data(config):
    data = ExperimentData(synthetic=False)
    for (role, split), path in sorted(config.data_paths.items()):
        data.corpora[(role, split)] = load_tsv(path)
    if config.translations is not None:
        from .bitext import import_translations

        data.train_pairs = import_translations(data.corpus("src", "train"), config.translations)
    return data


@dataclass
class TrainingPlan:
    supervised: list  # labeled utterances trained with the supervised objective
    pairs: Optional[list] = None  # gold-free pairs for the soft-align objective
    projection_accuracy: Optional[float] = None
    viterbi_alignment_accuracy: Optional[float] = None
    gold_projection_accuracy: Optional[float] = None


def assemble_training(config, data):
    """The single gateway from data to training corpora, per mode."""
    mode = config.mode
    if mode == "target_only":
        return TrainingPlan(supervised=list(data.corpus("tgt", "train")))
    if mode == "multilingual":
        return TrainingPlan(
            supervised=list(data.corpus("src", "train")) + list(data.corpus("tgt", "train"))
        )
    if mode == "zeroshot_nomt":
        return TrainingPlan(supervised=list(data.corpus("src", "train")))
    if data.train_pairs is None:
        raise ValueError(f"mode {mode} needs parallel pairs (pseudo bitext or translations)")
    pairs = strip_gold(data.train_pairs)
    if mode == "zeroshot_softalign":
        supervised = [] if config.no_joint_src else list(data.corpus("src", "train"))
        return TrainingPlan(supervised=supervised, pairs=pairs)
    if mode == "zeroshot_hardalign":
        projected, diagnostics = _project_pairs(config, pairs, data)
        return TrainingPlan(
            supervised=list(data.corpus("src", "train")) + projected, **diagnostics
        )
    raise ValueError(f"unknown mode {mode!r}")


def _project_pairs(config, stripped_pairs, data):
    """EM-align the stripped pairs and manufacture a projected target corpus."""
    prior = DiagonalPrior(lam=config.lam, null_p=config.p0)
    table, _ = em_train(stripped_pairs, iterations=config.em_iterations, prior=prior)
    projected = []
    results = []
    for pair in stripped_pairs:
        result = viterbi_align(table, pair.source.tokens, pair.target_tokens, prior=prior)
        results.append(result)
        projected.append(
            LabeledUtterance(
                pair.source.id + "@proj",
                list(pair.target_tokens),
                project_labels(pair.source.bio_tags, result),
                pair.intent,
            )
        )
    diagnostics = {}
    gold_pairs = data.train_pairs if data.synthetic else None
    if gold_pairs and gold_pairs[0].gold_alignment is not None:
        gold_links = [p.gold_alignment for p in gold_pairs]
        gold_tags = [p.gold_target_tags for p in gold_pairs]
        diagnostics["viterbi_alignment_accuracy"] = alignment_accuracy(results, gold_links)
        diagnostics["projection_accuracy"] = projection_accuracy(
            [u.bio_tags for u in projected], gold_tags
        )
        gold_projected = []
        for pair in gold_pairs:
            parents = [None] * len(pair.target_tokens)
            for i, j in pair.gold_alignment:
                parents[j - 1] = i
            gold_projected.append(project_labels(pair.source.bio_tags, AlignmentResult(parents)))
        diagnostics["gold_projection_accuracy"] = projection_accuracy(gold_projected, gold_tags)
    return projected, diagnostics


def _token_only(utterances):
    return [LabeledUtterance(u.id, u.tokens, ["O"] * len(u.tokens), u.intent) for u in utterances]


def build_model_inputs(config, data, plan):
    """Vocabulary over exactly the text the mode may see, plus the label schema."""
    vocab_sources = [plan.supervised]
    if plan.pairs is not None:
        vocab_sources.append(
            _token_only(
                [LabeledUtterance(p.source.id, p.target_tokens, [], p.intent) for p in plan.pairs]
            )
        )
        vocab_sources.append([p.source for p in plan.pairs])
    vocab = build_vocab(vocab_sources)
    if data.synthetic:
        labels = schema_label_maps()
    else:
        base = build_label_maps([corpus for corpus in data.corpora.values()])
        # close the tag set under B/I pairing: projection can produce I-X for
        # a type the files only ever show as B-X
        tags = set(base.tag_to_id)
        for tag in list(tags):
            if tag[:2] in ("B-", "I-"):
                tags.update({"B-" + tag[2:], "I-" + tag[2:]})
        labels = LabelMaps(base.intent_to_id, {t: i for i, t in enumerate(sorted(tags))})
    return vocab, labels


def schema_label_maps():
    """Label inventory fixed by the grammar schema, independent of any sample."""
    tags = {"O"}
    for slot_type in grammar.SLOT_TYPES:
        tags.add(f"B-{slot_type}")
        tags.add(f"I-{slot_type}")
    intent_to_id = {name: i for i, name in enumerate(sorted(grammar.INTENTS))}
    tag_to_id = {name: i for i, name in enumerate(sorted(tags))}
    return LabelMaps(intent_to_id, tag_to_id)


@dataclass
class TrainedRun:
    model: object
    vocab: Vocabulary
    labels: LabelMaps
    plan: TrainingPlan
    loss_trace: list
    selected_epoch: int


def _supervised_step(model, state, batch, seed, clip_norm=None):
    with Tape() as tape:
        loss = supervised_loss(model.encoder, model.heads, batch, train=True, seed=seed)
    backward(loss, tape)
    adam_step(model.supervised_params(), state, clip_norm=clip_norm)
    return float(loss.values)


def _dev_score(model, batches, corpus, labels):
    report = _evaluate_corpus(model, batches, corpus, labels)
    return (report.intent_accuracy + report.slot_f1) / 2.0


def _evaluate_corpus(model, batches, corpus, labels):
    intents = []
    tags = []
    for batch in batches:
        got_intents, got_tags = predict(model.encoder, model.heads, batch, labels)
        intents.extend(got_intents)
        tags.extend(got_tags)
    return evaluate(corpus, intents, tags)


def train_single(config, data, seed, extra_supervised=None):
    """One fully deterministic training run; returns the trained model."""
    plan = assemble_training(config, data)
    if extra_supervised:
        plan = replace(plan, supervised=plan.supervised + list(extra_supervised))
    vocab, labels = build_model_inputs(config, data, plan)
    model = init_model(
        seed=seed,
        vocab_size=len(vocab),
        n_intents=labels.n_intents,
        n_tags=labels.n_tags,
        embed_dim=config.d_e,
        hidden_dim=config.d_h,
        dropout_rate=config.dropout,
        with_align=config.mode == "zeroshot_softalign",
        d_attn=config.d,
        d_ff=config.d_ff,
        temperature=config.temperature,
    )
    state = AdamState(lr=config.learning_rate)
    use_dev = config.selection_resolved == "dev_best"
    if use_dev:
        dev_corpus = data.corpus(config.dev_language, "dev")
        dev_batches = to_batches(dev_corpus, vocab, labels, config.batch_size)
    best = None  # (score, epoch, snapshot)
    trace = []
    for epoch in range(config.epochs):
        shuffle_seed = seed * 100003 + epoch
        losses = []
        if plan.pairs is not None:
            sup_batches = (
                to_batches(plan.supervised, vocab, labels, config.batch_size,
                           seed=shuffle_seed, shuffle=True)
                if plan.supervised else []
            )
            for k, pair_batch in enumerate(
                pair_batches(plan.pairs, vocab, labels, config.batch_size,
                             seed=shuffle_seed + 1, shuffle=True)
            ):
                step_seed = seed * 1000003 + epoch * 4099 + k
                parts = joint_train_step(
                    model, state, pair_batch,
                    src_batch=sup_batches[k % len(sup_batches)] if sup_batches else None,
                    seed=step_seed,
                    no_reconstruction=config.no_reconstruction,
                    clip_norm=config.clip_norm,
                )
                losses.append(parts["total"])
        else:
            for k, batch in enumerate(
                to_batches(plan.supervised, vocab, labels, config.batch_size,
                           seed=shuffle_seed, shuffle=True)
            ):
                step_seed = seed * 1000003 + epoch * 4099 + k
                losses.append(
                    _supervised_step(model, state, batch, step_seed, clip_norm=config.clip_norm)
                )
        trace.append(sum(losses) / len(losses) if losses else 0.0)
        if use_dev:
            score = _dev_score(model, dev_batches, dev_corpus, labels)
            if best is None or score > best[0]:
                best = (score, epoch, {n: p.values.copy() for n, p in model.named_params().items()})
    selected_epoch = config.epochs - 1
    if use_dev and best is not None:
        selected_epoch = best[1]
        for name, values in best[2].items():
            model.named_params()[name].values = values
    return TrainedRun(model, vocab, labels, plan, trace, selected_epoch)


def attention_alignment_score(model, vocab, labels, gold_pairs, batch_size):
    """Fraction of source tokens whose attention argmax hits a gold link."""
    if model.align is None:
        raise ValueError("model has no alignment parameters")
    hits = 0
    total = 0
    for start in range(0, len(gold_pairs), batch_size):
        chunk = gold_pairs[start : start + batch_size]
        pb = make_pair_batch(chunk, vocab, labels)
        tokens, mask = with_cls(pb.tgt_tokens, pb.tgt_mask)
        tgt_states = encode(model.encoder, tokens, mask)
        _, attn = attend(model.encoder, model.align, pb.src_tokens, pb.src_mask,
                         tgt_states, pb.tgt_mask)
        for row, pair in enumerate(chunk):
            s_len = int(pb.src_lengths[row])
            t_len = int(pb.tgt_lengths[row])
            guesses = hard_alignment(attn.values[row, :s_len, :t_len])
            hits += sum(
                (i, j) in pair.gold_alignment for i, j in enumerate(guesses, start=1)
            )
            total += s_len
    if total == 0:
        raise ValueError("no source tokens to score")
    return hits / total


@dataclass
class RunReport:
    config: dict
    per_seed: list
    mean: dict
    seconds: float

    def to_dict(self):
        return {
            "config": self.config,
            "per_seed": self.per_seed,
            "mean": self.mean,
            "seconds": self.seconds,
        }


_METRIC_KEYS = ("intent_accuracy", "slot_f1", "slot_precision", "slot_recall")


def _language_metrics(report):
    return {
        "intent_accuracy": report.intent_accuracy,
        "slot_f1": report.slot_f1,
        "slot_precision": report.slot_precision,
        "slot_recall": report.slot_recall,
        "n_gold_spans": report.n_gold_spans,
        "n_pred_spans": report.n_pred_spans,
        "n_correct_spans": report.n_correct_spans,
    }


def run_experiment(config, data=None, extra_supervised_per_seed=None):
    """Train over all configured seeds and report per-seed plus mean metrics."""
    started = time.perf_counter()
    data = data if data is not None else build_data(config)
    per_seed = []
    for seed in config.seeds:
        seed_started = time.perf_counter()
        extra = extra_supervised_per_seed[seed] if extra_supervised_per_seed else None
        run = train_single(config, data, seed, extra_supervised=extra)
        entry = {
            "seed": seed,
            "selected_epoch": run.selected_epoch,
            "loss_trace": run.loss_trace,
            "languages": {},
        }
        for role in data.roles:
            if data.has(role, "test"):
                corpus = data.corpus(role, "test")
                batches = to_batches(corpus, run.vocab, run.labels, config.batch_size)
                entry["languages"][role] = _language_metrics(
                    _evaluate_corpus(run.model, batches, corpus, run.labels)
                )
        if run.plan.projection_accuracy is not None:
            entry["projection_accuracy"] = run.plan.projection_accuracy
            entry["alignment_accuracy"] = run.plan.viterbi_alignment_accuracy
            entry["gold_projection_accuracy"] = run.plan.gold_projection_accuracy
        if config.mode == "zeroshot_softalign" and data.test_pairs:
            entry["alignment_accuracy"] = attention_alignment_score(
                run.model, run.vocab, run.labels, data.test_pairs, config.batch_size
            )
        entry["seconds"] = time.perf_counter() - seed_started
        per_seed.append(entry)
    mean = {"languages": {}}
    for role in sorted({r for e in per_seed for r in e["languages"]}):
        mean["languages"][role] = {
            key: sum(e["languages"][role][key] for e in per_seed) / len(per_seed)
            for key in _METRIC_KEYS
        }
    for key in ("projection_accuracy", "alignment_accuracy"):
        if all(key in e for e in per_seed):
            mean[key] = sum(e[key] for e in per_seed) / len(per_seed)
    return RunReport(
        config=config.to_dict(),
        per_seed=per_seed,
        mean=mean,
        seconds=time.perf_counter() - started,
    )


def _subsample(corpus, size, seed):
    rng = np.random.default_rng(np.random.SeedSequence([17, seed, size]))
    picked = sorted(rng.permutation(len(corpus))[:size].tolist())
    return [corpus[i] for i in picked]


def run_learning_curve(config, data=None):
    """Zero-shot mixture plus n labeled target utterances, for each size n."""
    if not config.target_sizes:
        raise ValueError("target_sizes must be set for a learning curve")
    data = data if data is not None else build_data(config)
    out = {"sizes": list(config.target_sizes), "reports": []}
    for size in config.target_sizes:
        if size == 0:
            out["reports"].append(run_experiment(config, data=data).to_dict())
            continue
        target_train = data.corpus("tgt", "train")
        if size > len(target_train):
            raise ValueError(
                f"target size {size} exceeds available labeled data ({len(target_train)})"
            )
        extras = {}
        hashes = {}
        for seed in config.seeds:
            sample = _subsample(target_train, size, seed)
            extras[seed] = sample
            digest = hashlib.sha256(",".join(u.id for u in sample).encode()).hexdigest()
            hashes[seed] = digest[:16]
        report = run_experiment(config, data=data, extra_supervised_per_seed=extras)
        for entry in report.per_seed:
            entry["subsample_sha"] = hashes[entry["seed"]]
        report_dict = report.to_dict()
        report_dict["target_size"] = size
        out["reports"].append(report_dict)
    return out


def run_ablation(config, data=None):
    """full vs no_reconstruction vs no_joint_src on shared data and seeds."""
    if config.mode != "zeroshot_softalign":
        raise ValueError("ablation runs on mode zeroshot_softalign")
    data = data if data is not None else build_data(config)
    variants = {
        "full": replace(config, no_reconstruction=False, no_joint_src=False),
        "no_reconstruction": replace(config, no_reconstruction=True, no_joint_src=False),
        "no_joint_src": replace(config, no_reconstruction=False, no_joint_src=True),
    }
    reports = {name: run_experiment(cfg, data=data) for name, cfg in variants.items()}
    summary = {
        metric: {
            name: report.mean["languages"]["tgt"][metric] for name, report in reports.items()
        }
        for metric in ("slot_f1", "intent_accuracy")
    }
    out = {name: report.to_dict() for name, report in reports.items()}
    out["summary"] = summary
    return out
