"""``convrank`` command line: ingest, audit, train, score, eval, analyze.

Exit codes: 0 success, 1 data/evaluation inconsistency, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import annotation as ann
from . import corpus, evaluation, plots
from .model import load_embeddings
from .train import TrainConfig, load_checkpoint, new_model, save_checkpoint, train, write_loss_log

log = logging.getLogger("convrank")

DATA_ROOT_ENV = "CONVRANK_DATA_ROOT"
TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off", ""}


class UsageError(Exception):
    pass


# -- config & paths ----------------------------------------------------------------

def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment line."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(subparser, values, path):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"{path}: unknown key {key!r} for this subcommand")
        if isinstance(action, argparse._StoreTrueAction):
            low = value.lower()
            if low not in TRUE_WORDS | FALSE_WORDS:
                raise UsageError(f"{path}: {key} expects true/false, got {value!r}")
            defaults[key] = low in TRUE_WORDS
        else:
            defaults[key] = value
    subparser.set_defaults(**defaults)


def resolve_input(path):
    if path is None:
        return None
    p = Path(path)
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _split_ids(value):
    return {t.strip() for t in value.split(",") if t.strip()} if value else set()


def write_run_config(args, out):
    record = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
              if k not in ("func",)}
    record["tool_version"] = __version__
    with open(out / "run_config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(x):
    return "NA" if x is None else f"{x:.6f}"


# -- shared loaders -------------------------------------------------------------------

def _load_corpus(args):
    evidence_list = corpus.parse_evidence_file(args.evidence)
    evidence = {e.id: e for e in evidence_list}
    pairs = corpus.parse_pairs_file(args.pairs)
    corpus.validate_pairs(pairs, evidence)
    labels = corpus.parse_labels_file(args.labels)
    known = {p.id for p in pairs}
    unknown = [g.pair_id for g in labels if g.pair_id not in known]
    if unknown:
        raise corpus.SchemaError(f"labels for unknown pairs: {unknown[:10]}")
    return evidence, pairs, labels


def _train_config(args):
    return TrainConfig(epochs=args.epochs, learning_rate=args.lr, clip_norm=args.clip_norm,
                       dropout_rate=args.dropout, batch_size=args.batch_size, seed=args.seed)


def _split(pairs, labels, test_topics):
    split = corpus.split_by_topic(pairs, test_topics)
    train_p = [p for p in pairs if p.id in split.train]
    test_p = [p for p in pairs if p.id in split.test]
    return train_p, test_p


# -- subcommands ------------------------------------------------------------------------

def cmd_ingest(args, out):
    evidence_list = corpus.parse_evidence_file(args.evidence)
    evidence = {e.id: e for e in evidence_list}
    lines = [f"evidence: {len(evidence_list)}"]
    if args.topics:
        topics = corpus.parse_topics_file(args.topics)
        corpus.validate_evidence_topics(evidence_list, topics)
        corpus.write_topics_file(topics, out / "topics.tsv")
        lines.append(f"topics: {len(topics)}")
    corpus.write_evidence_file(evidence_list, out / "evidence.tsv")
    if args.pairs:
        pairs = corpus.parse_pairs_file(args.pairs)
    else:
        pairs = corpus.build_pairs(evidence_list, args.budget, args.seed)
        skipped = corpus.topics_with_too_few(evidence_list)
        lines.append(f"topics skipped (fewer than 2 evidence): {len(skipped)} {' '.join(skipped)}".rstrip())
    corpus.validate_pairs(pairs, evidence)
    corpus.write_pairs_file(pairs, out / "pairs.tsv")
    kinds = [corpus.stance_kind(p, evidence) for p in pairs]
    lines += [f"pairs: {len(pairs)}", f"same-stance pairs: {kinds.count('SAME')}",
              f"cross-stance pairs: {kinds.count('CROSS')}"]

    labels = None
    if args.labels:
        labels = corpus.parse_labels_file(args.labels)
    if args.annotations:
        records = ann.parse_annotations_file(args.annotations)
        ann.write_annotations_file(records, out / "annotations.tsv")
        lines.append(f"annotation records: {len(records)}")
        if labels is None:
            report = ann.run_audit(records, pairs)
            labels = report.aggregation.kept_labels
            lines.append("labels aggregated from annotations with default filters")
    if labels is not None:
        known = {p.id for p in pairs}
        unknown = [g.pair_id for g in labels if g.pair_id not in known]
        if unknown:
            raise corpus.SchemaError(f"labels for unknown pairs: {unknown[:10]}")
        corpus.write_labels_file(labels, out / "labels.tsv")
        n_a = sum(g.winner == "A" for g in labels)
        share = max(n_a, len(labels) - n_a) / len(labels) if labels else None
        lines += [f"labels: {len(labels)}", f"label A: {n_a}", f"label B: {len(labels) - n_a}",
                  f"most frequent label share: {_fmt(share)}"]

    per_topic = {}
    for e in evidence_list:
        per_topic.setdefault(e.topic_id, [0, 0])[e.stance == "CON"] += 1
    corpus.write_tsv(out / "topic_counts.tsv", ("topic_id", "n_pro", "n_con"),
                     ((t, *per_topic[t]) for t in sorted(per_topic)))
    _write_lines(out / "summary.txt", lines)
    print("\n".join(lines))


def cmd_audit(args, out):
    records = ann.parse_annotations_file(args.annotations)
    pairs = corpus.parse_pairs_file(args.pairs) if args.pairs else None
    report = ann.run_audit(records, pairs, args.min_pairs, args.min_kappa, args.min_precision,
                           args.min_annotations, args.majority)
    corpus.write_labels_file(report.aggregation.kept_labels, out / "labels.tsv")
    ann.write_labeler_stats(report.stats, report.rejected, out / "labeler_stats.tsv")
    agg = report.aggregation
    dropped = [(p, "indecisive") for p in agg.dropped_indecisive] + \
              [(p, "underannotated") for p in agg.dropped_underannotated]
    corpus.write_tsv(out / "dropped_pairs.tsv", ("pair_id", "reason"), sorted(dropped))
    lines = ann.summary_lines(report)
    rows = [("n_labelers", len(report.stats)), ("n_rejected_labelers", len(report.rejected)),
            ("n_kept_pairs", len(agg.kept_labels)), ("n_dropped_indecisive", len(agg.dropped_indecisive)),
            ("n_dropped_underannotated", len(agg.dropped_underannotated)),
            ("mean_hidden_precision", _fmt(report.remaining_precision)),
            ("kappa_unweighted", _fmt(report.kappa_unweighted)),
            ("kappa_weighted", _fmt(report.kappa_weighted)),
            ("n_triplets", report.n_triplets), ("transitivity_fraction", _fmt(report.transitivity))]
    if args.expert_annotations:
        experts = ann.parse_annotations_file(args.expert_annotations)
        crowd = ann.pair_decisions(records, args.majority)
        expert = ann.pair_decisions(experts, args.majority)
        agreement = ann.group_agreement(crowd, expert)
        lines.append(f"crowd/expert agreement on mutually decisive pairs: {_fmt(agreement)}")
        rows.append(("group_agreement", _fmt(agreement)))
    corpus.write_tsv(out / "audit.tsv", ("metric", "value"), rows)
    _write_lines(out / "audit_summary.txt", lines)
    print("\n".join(lines))


def cmd_train(args, out):
    evidence, pairs, labels = _load_corpus(args)
    table = load_embeddings(args.embeddings)
    train_p, _ = _split(pairs, labels, _split_ids(args.test_topics))
    gold = {g.pair_id: g.winner for g in labels}
    examples = [(evidence[p.a].text, evidence[p.b].text, gold[p.id]) for p in train_p if p.id in gold]
    config = _train_config(args)
    model = new_model(table, args.seed, args.hidden, args.heads, args.max_len)
    result = train(examples, config, model)
    save_checkpoint(model, out / "model.evck", config)
    write_loss_log(result.log, out / "loss_log.tsv")
    plots.plot_loss_curve(result.log, out / "loss_curve.png")
    for e in result.log:
        print(f"epoch {e.epoch}\tloss {e.mean_loss:.4f}\ttrain accuracy {e.train_accuracy:.4f}")


def cmd_score(args, out):
    evidence_list = corpus.parse_evidence_file(args.evidence)
    model = load_checkpoint(args.checkpoint, load_embeddings(args.embeddings))
    scores = {e.id: model.pointwise_score(e.text) for e in evidence_list}
    corpus.write_scores_file(scores, out / "scores.tsv")
    if args.pairs:
        evidence = {e.id: e for e in evidence_list}
        pairs = corpus.parse_pairs_file(args.pairs)
        corpus.validate_pairs(pairs, evidence)
        preds = evaluation.model_predictions(model, pairs, evidence)
        write_predictions(preds, out / "pair_probabilities.tsv")
    print(f"scored {len(scores)} evidence")


def write_predictions(preds, path):
    corpus.write_tsv(path, ("pair_id", "p_a_wins", "predicted_winner"),
                     ((k, repr(v.p_a_wins), v.predicted_winner) for k, v in preds.items()))


def read_predictions(path):
    return {pid: evaluation.PairPrediction(pid, float(p))
            for _, (pid, p, _w) in corpus.read_tsv(path, ("pair_id", "p_a_wins", "predicted_winner"))}


def _fit_factory(args, table):
    config = _train_config(args)

    def fit(examples):
        model = new_model(table, args.seed, args.hidden, args.heads, args.max_len)
        train(examples, config, model)
        return model
    return fit


def cmd_eval(args, out):
    evidence, pairs, labels = _load_corpus(args)
    test_topics = _split_ids(args.test_topics)
    train_p, test_p = _split(pairs, labels, test_topics) if test_topics else (pairs, pairs)
    gold_by = {g.pair_id: g for g in labels}
    test_gold = [gold_by[p.id] for p in test_p if p.id in gold_by]
    train_gold = [gold_by[p.id] for p in train_p if p.id in gold_by]
    rows, lines = [], []
    outcomes = {}

    def record(name, preds):
        acc = evaluation.pairwise_accuracy(preds, test_gold)
        winners = {k: getattr(v, "predicted_winner", v) for k, v in preds.items()}
        outcomes[name] = [float(winners[g.pair_id] == g.winner) for g in test_gold]
        rows.append((f"accuracy.{name}", f"{acc:.6f}"))
        lines.append(f"{name} accuracy: {acc:.4f} ({len(test_gold)} pairs)")

    baselines = set(args.baseline or ["length", "most-frequent"])
    if "all" in baselines:
        baselines = {"length", "most-frequent", "detection"}
    if "length" in baselines:
        record("length", {p.id: evaluation.length_baseline(p, evidence) for p in test_p})
    if "most-frequent" in baselines:
        record("most_frequent", evaluation.most_frequent_label_baseline(train_gold or test_gold, test_p))
    if "detection" in baselines:
        if not args.detection_scores:
            raise UsageError("--baseline detection needs --detection-scores")
        scores = corpus.load_scores_file(args.detection_scores)
        record("detection", {p.id: evaluation.score_baseline(p, scores) for p in test_p})

    model = None
    if args.checkpoint:
        if not args.embeddings:
            raise UsageError("--checkpoint needs --embeddings")
        table = load_embeddings(args.embeddings)
        model = load_checkpoint(args.checkpoint, table)
        preds = evaluation.model_predictions(model, test_p, evidence)
        write_predictions(preds, out / "predictions.tsv")
        record("model", preds)
        for name in sorted(outcomes):
            if name != "model":
                p = evaluation.wilcoxon_p(outcomes["model"], outcomes[name])
                rows.append((f"wilcoxon_p.model_vs_{name}", _fmt(p)))

        if args.gold_scores:
            gold_scores = corpus.load_scores_file(args.gold_scores)
            unknown = [k for k in gold_scores if k not in evidence]
            if unknown:
                raise evaluation.CoverageError(f"gold scores for unknown evidence {unknown[:10]}", unknown)
            predicted = {k: model.pointwise_score(evidence[k].text) for k in gold_scores}
            groups = None if args.grouping == "pooled" else {k: evidence[k].topic_id for k in gold_scores}
            rank = evaluation.rank_evaluation(predicted, gold_scores, groups)
            rows += [("rank.mean_pearson", _fmt(rank.mean_pearson)),
                     ("rank.mean_spearman", _fmt(rank.mean_spearman)),
                     ("rank.n_groups", len(rank.per_group)),
                     ("rank.n_degenerate", len(rank.degenerate))]
            if len(rank.per_group) > 1:
                rows.append(("rank.pearson_t_p_vs_0",
                             _fmt(evaluation.one_sample_t_p([v[0] for v in rank.per_group.values()], 0.0))))
            lines.append(f"ranking ({args.grouping}): Pearson {_fmt(rank.mean_pearson)}, "
                         f"Spearman {_fmt(rank.mean_spearman)}")
            corpus.write_tsv(out / "rank_groups.tsv", ("group", "pearson", "spearman"),
                             ((g, f"{r:.6f}", f"{s:.6f}") for g, (r, s) in sorted(rank.per_group.items())))
            plots.plot_score_scatter(predicted, gold_scores, out / "rank_scatter.png")

        if args.length_pairs:
            lp = corpus.parse_pairs_file(args.length_pairs)
            corpus.validate_pairs(lp, evidence)
            lgold = corpus.parse_labels_file(args.length_labels) if args.length_labels else labels
            lpreds = evaluation.model_predictions(model, lp, evidence)
            acc = evaluation.length_robustness_eval(lpreds, lp, evidence, lgold)
            rows.append(("accuracy.length_unbalanced", f"{acc:.6f}"))
            lines.append(f"model accuracy on length-unbalanced pairs: {acc:.4f}")

    if args.stance_grid or args.cross_topic:
        if not args.embeddings:
            raise UsageError("--stance-grid/--cross-topic need --embeddings")
        table = load_embeddings(args.embeddings)
        fit = _fit_factory(args, table)
        if args.stance_grid:
            grid = evaluation.stance_grid(train_p, test_p, evidence, labels, args.grid_train_size,
                                          args.grid_test_size, fit, seed=args.seed)
            corpus.write_tsv(out / "stance_grid.tsv", ("train", *(s.lower() for s in evaluation.SUBSETS)),
                             ((r.lower(), *(f"{v:.6f}" for v in grid.accuracy[i]))
                              for i, r in enumerate(evaluation.SUBSETS)))
            plots.plot_stance_grid(grid.accuracy, evaluation.SUBSETS, out / "stance_grid.png")
            lines.append("stance grid (rows train, columns test: same cross mixed):")
            lines += [f"  {r.lower():6s} " + " ".join(f"{v:.3f}" for v in grid.accuracy[i])
                      for i, r in enumerate(evaluation.SUBSETS)]
        if args.cross_topic:
            folds = evaluation.cross_topic_validation(pairs, evidence, labels, fit)
            corpus.write_tsv(out / "cross_topic_folds.tsv", ("test_topics", "n_test", "accuracy"),
                             ((",".join(f.test_topics), f.n_test, f"{f.accuracy:.6f}") for f in folds))
            mean = float(np.mean([f.accuracy for f in folds])) if folds else None
            rows.append(("accuracy.cross_topic_mean", _fmt(mean)))
            lines.append(f"cross-topic mean accuracy over {len(folds)} folds: {_fmt(mean)}")

    corpus.write_tsv(out / "metrics.tsv", ("metric", "value"), rows)
    _write_lines(out / "summary.txt", lines)
    print("\n".join(lines))


def cmd_analyze(args, out):
    evidence, pairs, labels = _load_corpus(args)
    if args.predictions:
        preds = read_predictions(args.predictions)
    elif args.checkpoint and args.embeddings:
        model = load_checkpoint(args.checkpoint, load_embeddings(args.embeddings))
        preds = evaluation.model_predictions(model, pairs, evidence)
    else:
        raise UsageError("analyze needs --predictions or --checkpoint with --embeddings")
    covered = {p.id for p in pairs if p.id in preds}
    gold = [g for g in labels if g.pair_id in covered]
    lines = []
    if args.reasons:
        reasons = evaluation.parse_reasons_file(args.reasons)
        base = {p.id: evaluation.length_baseline(p, evidence) for p in pairs}
        rows = evaluation.reason_error_analysis(preds, base, gold, reasons)
        corpus.write_tsv(out / "reason_errors.tsv",
                         ("code", "n_pairs", "error_length_baseline", "error_model", "relative_decrease_pct"),
                         ((r.code, r.n_pairs, f"{r.error_baseline:.6f}", f"{r.error_model:.6f}",
                           "NA" if r.relative_decrease is None else f"{r.relative_decrease:.2f}") for r in rows))
        plots.plot_reason_errors(rows, out / "reason_errors.png")
        lines.append(f"reason codes analysed: {len(rows)}")
    titles = {t.id: t.title for t in corpus.parse_topics_file(args.topics)} if args.topics else {}
    stop = evaluation.load_stopwords(args.stopwords)
    diff = evaluation.word_distribution_diff(preds, gold, pairs, evidence, titles, stop, args.top_n)
    corpus.write_tsv(out / "words_convincing.tsv", ("word", "difference"),
                     ((w, f"{d:.6f}") for w, d in diff.convincing))
    corpus.write_tsv(out / "words_non_convincing.tsv", ("word", "difference"),
                     ((w, f"{d:.6f}") for w, d in diff.non_convincing))
    plots.plot_word_differences(diff, out / "word_differences.png")
    lines.append(f"correctly classified pairs: {diff.n_pairs}")
    lines.append("top convincing words: " + " ".join(w for w, _ in diff.convincing[:10]))
    lines.append("top non-convincing words: " + " ".join(w for w, _ in diff.non_convincing[:10]))
    _write_lines(out / "summary.txt", lines)
    print("\n".join(lines))


# -- parser ---------------------------------------------------------------------------------

INPUTS = {
    "ingest": ("evidence", "topics", "pairs", "labels", "annotations"),
    "audit": ("annotations", "pairs", "expert_annotations"),
    "train": ("evidence", "pairs", "labels", "embeddings"),
    "score": ("evidence", "checkpoint", "embeddings", "pairs"),
    "eval": ("evidence", "pairs", "labels", "checkpoint", "embeddings", "detection_scores",
             "gold_scores", "length_pairs", "length_labels"),
    "analyze": ("evidence", "pairs", "labels", "predictions", "checkpoint", "embeddings",
                "reasons", "topics", "stopwords"),
}


def _train_flags(p):
    d = TrainConfig()
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--clip-norm", type=float, default=d.clip_norm)
    p.add_argument("--dropout", type=float, default=d.dropout_rate)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--heads", type=int, default=100)
    p.add_argument("--max-len", type=int, default=60)


def build_parser():
    parser = argparse.ArgumentParser(prog="convrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="flat 'key = value' file; flags override it")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=func)
        return p

    p = command("ingest", cmd_ingest, "validate and normalise corpus files")
    p.add_argument("--evidence", required=True)
    p.add_argument("--topics")
    p.add_argument("--pairs", help="existing pairs; sampled from evidence when omitted")
    p.add_argument("--budget", type=int, default=100, help="pairs sampled per topic")
    p.add_argument("--labels")
    p.add_argument("--annotations")

    p = command("audit", cmd_audit, "annotation quality control and label aggregation")
    p.add_argument("--annotations", required=True)
    p.add_argument("--pairs", help="needed for the transitivity audit")
    p.add_argument("--expert-annotations", help="second labeler group for agreement")
    p.add_argument("--min-pairs", type=int, default=20)
    p.add_argument("--min-kappa", type=float, default=0.1)
    p.add_argument("--min-precision", type=float, default=0.55)
    p.add_argument("--min-annotations", type=int, default=7)
    p.add_argument("--majority", type=float, default=0.6)

    p = command("train", cmd_train, "train the Siamese ranker")
    for name in ("evidence", "pairs", "labels", "embeddings"):
        p.add_argument(f"--{name}", required=True)
    p.add_argument("--test-topics", help="comma-separated topic ids held out of training")
    _train_flags(p)

    p = command("score", cmd_score, "pointwise scores (and pair probabilities)")
    for name in ("evidence", "checkpoint", "embeddings"):
        p.add_argument(f"--{name}", required=True)
    p.add_argument("--pairs")

    p = command("eval", cmd_eval, "accuracy, baselines, correlations, stance grid")
    for name in ("evidence", "pairs", "labels"):
        p.add_argument(f"--{name}", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--embeddings")
    p.add_argument("--test-topics", help="comma-separated topic ids forming the test split")
    p.add_argument("--baseline", action="append",
                   choices=["length", "most-frequent", "detection", "all"])
    p.add_argument("--detection-scores")
    p.add_argument("--gold-scores", help="evidence_id/score file for ranking correlation")
    p.add_argument("--grouping", choices=["topic", "pooled"], default="topic")
    p.add_argument("--length-pairs", help="pairs breaking the length constraint")
    p.add_argument("--length-labels")
    p.add_argument("--stance-grid", action="store_true")
    p.add_argument("--grid-train-size", type=int, default=2082)
    p.add_argument("--grid-test-size", type=int, default=385)
    p.add_argument("--cross-topic", action="store_true", help="leave-one-topic-out validation")
    _train_flags(p)

    p = command("analyze", cmd_analyze, "per-reason errors and word distributions")
    for name in ("evidence", "pairs", "labels"):
        p.add_argument(f"--{name}", required=True)
    p.add_argument("--predictions", help="predictions.tsv written by eval")
    p.add_argument("--checkpoint")
    p.add_argument("--embeddings")
    p.add_argument("--reasons")
    p.add_argument("--topics")
    p.add_argument("--stopwords", help="defaults to the bundled list")
    p.add_argument("--top-n", type=int, default=20)
    return parser, sub.choices


def parse_args(argv):
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = resolve_input(args.config)
        _apply_config(subparsers[args.command], read_config_file(cfg), cfg)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return exc.code
    except (UsageError, FileNotFoundError) as exc:
        print(f"convrank: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        for name in INPUTS[args.command]:
            setattr(args, name, resolve_input(getattr(args, name, None)))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_run_config(args, out)
        args.func(args, out)
    except (UsageError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"convrank: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"convrank: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
