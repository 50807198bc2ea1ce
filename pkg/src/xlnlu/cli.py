"""Command line front end.

Subcommands: train, curve, ablate, gen-bitext, align, score.  Every run
writes a JSON document under --out; the summary printed to stdout is a
convenience, the JSON is the interface.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments
from .aligner import (
    DiagonalPrior,
    alignment_accuracy,
    dump_alignments,
    em_train,
    project_labels,
    projection_accuracy,
    viterbi_align,
)
from .bitext import PseudoLangSpec, make_parallel_corpus, pairs_to_target_corpus, strip_gold
from .config import _parse_int_list, load_config
from .corpus import LabeledUtterance, dump_tsv, load_tsv
from .metrics import dump_conll, evaluate


def _write_json(payload, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_with_overrides(args):
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = _parse_int_list(args.seed)
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.no_reconstruction:
        overrides["no_reconstruction"] = True
    if args.no_joint_src:
        overrides["no_joint_src"] = True
    return replace(config, **overrides) if overrides else config


def _mean_summary(report_dict):
    parts = []
    for role, metrics in sorted(report_dict["mean"]["languages"].items()):
        parts.append(
            f"{role}: intent_accuracy={metrics['intent_accuracy']:.4f}"
            f" slot_f1={metrics['slot_f1']:.4f}"
        )
    return "  ".join(parts)


def cmd_train(args):
    config = _load_with_overrides(args)
    report = experiments.run_experiment(config).to_dict()
    out = Path(args.out)
    _write_json(report, out / "report.json")
    print(f"mode={config.mode} seeds={len(config.seeds)} {_mean_summary(report)}")
    print(f"report: {out / 'report.json'} ({report['seconds']:.1f}s)")
    return 0


def cmd_curve(args):
    config = _load_with_overrides(args)
    curve = experiments.run_learning_curve(config)
    out = Path(args.out)
    _write_json(curve, out / "curve.json")
    for size, report in zip(curve["sizes"], curve["reports"]):
        print(f"size={size} {_mean_summary(report)}")
    print(f"report: {out / 'curve.json'}")
    return 0


def cmd_ablate(args):
    config = _load_with_overrides(args)
    result = experiments.run_ablation(config)
    out = Path(args.out)
    _write_json(result, out / "ablation.json")
    for name in ("full", "no_reconstruction", "no_joint_src"):
        print(f"{name}: slot_f1={result['summary']['slot_f1'][name]:.4f}"
              f" intent_accuracy={result['summary']['intent_accuracy'][name]:.4f}")
    print(f"report: {out / 'ablation.json'}")
    return 0


def cmd_gen_bitext(args):
    """Write a synthetic parallel corpus: source, gold target, translations, links."""
    from . import grammar

    config = _load_with_overrides(args)
    spec = PseudoLangSpec(
        lexicon_seed=config.lexicon_seed,
        reversal_window=config.reversal_window,
        fertility_rate=config.fertility_rate,
        seed=config.bitext_seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sizes = {
        "train": config.synthetic_train,
        "dev": config.synthetic_dev,
        "test": config.synthetic_test,
    }
    for k, (split, n) in enumerate(sizes.items()):
        source = grammar.generate(n, seed=config.grammar_seed + k, id_prefix=split)
        pairs = make_parallel_corpus(source, spec)
        dump_tsv(source, out / f"src.{split}.tsv")
        dump_tsv(pairs_to_target_corpus(pairs), out / f"tgt.{split}.tsv")
        with open(out / f"translations.{split}.tsv", "w", encoding="utf-8") as fh:
            for pair in pairs:
                fh.write(f"{pair.source.id}\t{' '.join(pair.target_tokens)}\n")
        with open(out / f"alignments.{split}.txt", "w", encoding="utf-8") as fh:
            for pair in pairs:
                links = sorted(pair.gold_alignment, key=lambda link: (link[1], link[0]))
                fh.write(" ".join(f"{i}-{j}" for i, j in links) + "\n")
        print(f"{split}: {n} utterances ({spec.lang_tag} target)")
    print(f"files under {out}")
    return 0


def cmd_align(args):
    """Train the EM aligner on the configured pairs; write links and projections."""
    config = _load_with_overrides(args)
    data = experiments.build_data(config)
    if data.train_pairs is None:
        raise ValueError("align needs parallel pairs: translations or a pseudo-language config")
    pairs = strip_gold(data.train_pairs)
    prior = DiagonalPrior(lam=config.lam, null_p=config.p0)
    table, stats = em_train(pairs, iterations=config.em_iterations, prior=prior)
    results = []
    projected = []
    for pair in pairs:
        result = viterbi_align(table, pair.source.tokens, pair.target_tokens, prior=prior)
        results.append(result)
        projected.append(
            LabeledUtterance(
                pair.source.id,
                list(pair.target_tokens),
                project_labels(pair.source.bio_tags, result),
                pair.intent,
            )
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_alignments(results, out / "alignments.txt")
    dump_tsv(projected, out / "projected.tsv")
    summary = {
        "pairs": len(pairs),
        "log_likelihood": stats["log_likelihood"],
        "skipped_pairs": stats["skipped_pairs"],
    }
    gold = data.train_pairs
    if gold and gold[0].gold_alignment is not None:
        summary["alignment_accuracy"] = alignment_accuracy(
            results, [p.gold_alignment for p in gold]
        )
        summary["projection_accuracy"] = projection_accuracy(
            [u.bio_tags for u in projected],
            [p.gold_target_tags for p in gold],
            ids=[p.source.id for p in gold],
        )
    _write_json(summary, out / "align.json")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_score(args):
    gold = load_tsv(args.gold)
    pred = load_tsv(args.pred)
    if [u.id for u in gold] != [u.id for u in pred]:
        raise ValueError(f"{args.pred}: utterance ids do not match {args.gold}")
    report = evaluate(gold, [u.intent for u in pred], [u.bio_tags for u in pred])
    payload = report.to_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out is not None:
        out = Path(args.out)
        _write_json(payload, out / "score.json")
        dump_conll(gold, [u.bio_tags for u in pred], out / "score.conll")
        print(f"report: {out / 'score.json'}", file=sys.stderr)
    return 0


def _add_run_args(sub):
    sub.add_argument("--config", required=True, help="flat key=value config file")
    sub.add_argument("--seed", help="comma-separated seed list, overrides the config")
    sub.add_argument("--mode", help="training mode, overrides the config")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--no-reconstruction", action="store_true",
                     help="drop the reconstruction term")
    sub.add_argument("--no-joint-src", action="store_true",
                     help="drop the source-language supervised term")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="xlnlu",
        description="joint intent/slot models with cross-lingual transfer experiments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for name, fn, blurb in (
        ("train", cmd_train, "train one mode over its seeds and report metrics"),
        ("curve", cmd_curve, "few-shot learning curve over target_sizes"),
        ("ablate", cmd_ablate, "full vs no-reconstruction vs no-joint-source"),
        ("gen-bitext", cmd_gen_bitext, "write a synthetic parallel corpus to disk"),
        ("align", cmd_align, "EM-align the configured pairs and project labels"),
    ):
        sub = subs.add_parser(name, help=blurb)
        _add_run_args(sub)
        sub.set_defaults(fn=fn)

    score = subs.add_parser("score", help="score a prediction file against gold")
    score.add_argument("gold", help="gold corpus TSV")
    score.add_argument("pred", help="prediction TSV (same ids, predicted labels)")
    score.add_argument("--out", help="also write score.json and a conlleval-style dump")
    score.set_defaults(fn=cmd_score)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
