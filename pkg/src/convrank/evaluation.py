"""Accuracy, baselines, ranking correlations and the analyses built on them.

The tie rule everywhere is "predict A".
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import stats as sps

from .corpus import MAX_LENGTH_RATIO, length_ratio_ok, read_tsv, stance_kind
from .model import tokenize

log = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    pass


class CoverageError(ValueError):
    """Predictions or scores do not cover the requested pairs."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


@dataclass(frozen=True)
class PairPrediction:
    pair_id: str
    p_a_wins: float

    @property
    def predicted_winner(self):
        return "A" if self.p_a_wins >= 0.5 else "B"


@dataclass(frozen=True)
class ReasonUnit:
    pair_id: str
    code: str
    text: str


def parse_reasons_file(path):
    return [ReasonUnit(pid, code, text) for _, (pid, code, text) in read_tsv(path, ("pair_id", "code", "text"))]


def prefer(score_a, score_b):
    return "A" if score_a >= score_b else "B"


def pairwise_accuracy(predictions, gold):
    """Fraction of gold pairs whose predicted winner matches.

    ``predictions`` maps pair id to a winner ('A'/'B') or a PairPrediction.
    """
    gold = list(gold)
    if not gold:
        raise UndefinedMetricError("accuracy over an empty gold set")
    winners = {k: getattr(v, "predicted_winner", v) for k, v in dict(predictions).items()}
    missing = [g.pair_id for g in gold if g.pair_id not in winners]
    if missing:
        raise CoverageError(f"no prediction for pairs {missing[:10]}", missing)
    return sum(winners[g.pair_id] == g.winner for g in gold) / len(gold)


# -- baselines ------------------------------------------------------------------

def length_baseline(pair, evidence):
    return prefer(evidence[pair.a].char_length, evidence[pair.b].char_length)


def most_frequent_label_baseline(train_gold, test_pairs):
    counts = Counter(g.winner for g in train_gold)
    if not counts:
        raise UndefinedMetricError("most-frequent-label baseline needs training labels")
    side = "A" if counts["A"] >= counts["B"] else "B"
    return {p.id: side for p in test_pairs}


def score_baseline(pair, scores):
    missing = [e for e in (pair.a, pair.b) if e not in scores]
    if missing:
        raise CoverageError(f"pair {pair.id!r}: no score for evidence {missing}", missing)
    return prefer(scores[pair.a], scores[pair.b])


def model_predictions(model, pairs, evidence):
    """PairPrediction per pair from inference-mode convincingness outputs."""
    c = model.convincingness(evidence[e].text for p in pairs for e in (p.a, p.b))
    return {p.id: PairPrediction(p.id, model.pair_probability_from(c[evidence[p.a].text], c[evidence[p.b].text]))
            for p in pairs}


# -- correlation ------------------------------------------------------------------

def pearson_r(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson_r needs two equal-length vectors of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedMetricError("zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def average_ranks(values):
    """1-based ranks; tied values share the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_rho(x, y):
    return pearson_r(average_ranks(x), average_ranks(y))


@dataclass
class RankEvaluation:
    mean_pearson: float | None
    mean_spearman: float | None
    per_group: dict = field(default_factory=dict)
    degenerate: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def rank_evaluation(predicted, gold, groups=None):
    """Mean Pearson/Spearman across groups (``groups`` None pools everything).

    Groups with fewer than 2 items are skipped; groups with zero variance on
    either side are listed as degenerate and left out of the means.
    """
    missing = [k for k in gold if k not in predicted]
    if missing:
        raise CoverageError(f"no predicted score for {missing[:10]}", missing)
    grouped = {}
    for key in gold:
        grouped.setdefault("all" if groups is None else groups[key], []).append(key)
    result = RankEvaluation(None, None)
    for name in sorted(grouped):
        keys = grouped[name]
        if len(keys) < 2:
            log.warning("group %s has fewer than 2 arguments; skipped", name)
            result.skipped.append(name)
            continue
        x = [predicted[k] for k in keys]
        y = [gold[k] for k in keys]
        try:
            result.per_group[name] = (pearson_r(x, y), spearman_rho(x, y))
        except UndefinedMetricError:
            result.degenerate.append(name)
    if result.per_group:
        vals = list(result.per_group.values())
        result.mean_pearson = float(np.mean([v[0] for v in vals]))
        result.mean_spearman = float(np.mean([v[1] for v in vals]))
    return result


def win_rate_scores(labels, pairs):
    """wins / comparisons per evidence; a rough diagnostic proxy for gold scores."""
    by_id = {p.id: p for p in pairs}
    wins, seen = Counter(), Counter()
    for g in labels:
        p = by_id[g.pair_id]
        seen[p.a] += 1
        seen[p.b] += 1
        wins[p.a if g.winner == "A" else p.b] += 1
    return {e: wins[e] / seen[e] for e in sorted(seen)}


# -- significance -------------------------------------------------------------------

def wilcoxon_p(outcomes_a, outcomes_b):
    """Two-sided Wilcoxon signed-rank p-value for paired outcomes; None if all differences vanish."""
    a = np.asarray(outcomes_a, dtype=np.float64)
    b = np.asarray(outcomes_b, dtype=np.float64)
    if not np.any(a != b):
        return None
    return float(sps.wilcoxon(a, b).pvalue)


def one_sample_t_p(values, popmean):
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return None
    return float(sps.ttest_1samp(values, popmean).pvalue)


# -- analyses ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReasonError:
    code: str
    n_pairs: int
    error_baseline: float
    error_model: float
    relative_decrease: float | None


def relative_error_decrease(err_base, err_model):
    """(err_base - err_model) / err_base in percent; None when err_base is 0."""
    if err_base == 0:
        return None
    return 100.0 * (err_base - err_model) / err_base


def reason_error_analysis(predictions_model, predictions_baseline, gold, reasons):
    """Per reason code, error rates of both systems on single-reason pairs."""
    gold_by = {g.pair_id: g.winner for g in gold}
    per_pair = Counter(r.pair_id for r in reasons)
    groups = {}
    for r in reasons:
        if per_pair[r.pair_id] == 1 and r.pair_id in gold_by:
            groups.setdefault(r.code, []).append(r.pair_id)

    def winner(preds, pid):
        if pid not in preds:
            raise CoverageError(f"no prediction for pair {pid!r}", [pid])
        return getattr(preds[pid], "predicted_winner", preds[pid])

    rows = []
    for code in sorted(groups):
        pids = groups[code]
        err_m = sum(winner(predictions_model, p) != gold_by[p] for p in pids) / len(pids)
        err_b = sum(winner(predictions_baseline, p) != gold_by[p] for p in pids) / len(pids)
        rows.append(ReasonError(code, len(pids), err_b, err_m, relative_error_decrease(err_b, err_m)))
    return rows


def load_stopwords(path=None):
    if path is None:
        text = resources.files("convrank").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return {w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#")}


@dataclass
class WordDistributionDiff:
    differences: dict
    convincing: list
    non_convincing: list
    n_pairs: int


def _distribution(texts_with_topic, stopwords, title_tokens):
    counts = Counter()
    for text, topic in texts_with_topic:
        banned = title_tokens.get(topic, set())
        counts.update(t for t in tokenize(text) if t not in stopwords and t not in banned)
    total = sum(counts.values())
    return {w: c / total for w, c in counts.items()} if total else {}


def word_distribution_diff(predictions, gold, pairs, evidence, topic_titles, stopwords, top_n=20):
    """Unigram-frequency differences between winners and losers of correctly
    classified pairs. Frequencies count token occurrences, and an evidence
    contributes once per pair it appears in."""
    by_id = {p.id: p for p in pairs}
    winners = {k: getattr(v, "predicted_winner", v) for k, v in dict(predictions).items()}
    correct = [g for g in gold if winners.get(g.pair_id) == g.winner]
    if not correct:
        raise UndefinedMetricError("no correctly classified pairs")
    title_tokens = {t: set(tokenize(title)) for t, title in topic_titles.items()}
    conv, nonconv = [], []
    for g in correct:
        p = by_id[g.pair_id]
        win, lose = (p.a, p.b) if g.winner == "A" else (p.b, p.a)
        conv.append((evidence[win].text, p.topic_id))
        nonconv.append((evidence[lose].text, p.topic_id))
    p_conv = _distribution(conv, stopwords, title_tokens)
    p_non = _distribution(nonconv, stopwords, title_tokens)
    diff = {w: p_conv.get(w, 0.0) - p_non.get(w, 0.0) for w in sorted(set(p_conv) | set(p_non))}
    pos = sorted(((w, d) for w, d in diff.items() if d > 0), key=lambda x: (-x[1], x[0]))[:top_n]
    neg = sorted(((w, -d) for w, d in diff.items() if d < 0), key=lambda x: (-x[1], x[0]))[:top_n]
    return WordDistributionDiff(diff, pos, neg, len(correct))


def length_robustness_eval(predictions, pairs, evidence, gold, max_ratio=MAX_LENGTH_RATIO):
    """Accuracy on pairs that all break the length-balance constraint."""
    for p in pairs:
        if length_ratio_ok(evidence[p.a].char_length, evidence[p.b].char_length, max_ratio):
            raise ValueError(f"pair {p.id!r} satisfies the length constraint; not a length-unbalanced pair")
    ids = {p.id for p in pairs}
    return pairwise_accuracy(predictions, [g for g in gold if g.pair_id in ids])


# -- stance grid ---------------------------------------------------------------------------

SUBSETS = ("SAME", "CROSS", "MIXED")


def stance_subsets(pairs, evidence, size, rng):
    """Equal-sized SAME, CROSS and MIXED (half same, half cross) samples."""
    same = [p for p in pairs if stance_kind(p, evidence) == "SAME"]
    cross = [p for p in pairs if stance_kind(p, evidence) == "CROSS"]
    half = size // 2
    if len(same) < size or len(cross) < size:
        raise ValueError(f"need {size} same-stance and {size} cross-stance pairs, "
                         f"have {len(same)} same and {len(cross)} cross")

    def sample(pool, k):
        return [pool[i] for i in sorted(rng.choice(len(pool), size=k, replace=False))]

    return {
        "SAME": sample(same, size),
        "CROSS": sample(cross, size),
        "MIXED": sample(same, half) + sample(cross, size - half),
    }


@dataclass
class StanceGrid:
    accuracy: np.ndarray
    train_size: int
    test_size: int


def stance_grid(train_pairs, test_pairs, evidence, gold, train_size, test_size, fit, seed=0):
    """Train one model per training subset and score it on every test subset.

    ``fit(examples)`` trains and returns a ranker from (text_a, text_b, winner).
    """
    gold_by = {g.pair_id: g for g in gold}
    train_pairs = [p for p in train_pairs if p.id in gold_by]
    test_pairs = [p for p in test_pairs if p.id in gold_by]
    rng = np.random.Generator(np.random.Philox(seed))
    train_sets = stance_subsets(train_pairs, evidence, train_size, rng)
    test_sets = stance_subsets(test_pairs, evidence, test_size, rng)
    acc = np.zeros((3, 3))
    for i, row in enumerate(SUBSETS):
        examples = [(evidence[p.a].text, evidence[p.b].text, gold_by[p.id].winner) for p in train_sets[row]]
        model = fit(examples)
        for j, col in enumerate(SUBSETS):
            preds = model_predictions(model, test_sets[col], evidence)
            acc[i, j] = pairwise_accuracy(preds, [gold_by[p.id] for p in test_sets[col]])
    return StanceGrid(acc, train_size, test_size)


# -- cross-topic validation --------------------------------------------------------------------

def leave_one_topic_out(pairs):
    return [{t} for t in sorted({p.topic_id for p in pairs})]


@dataclass
class FoldResult:
    test_topics: tuple
    n_test: int
    accuracy: float


def cross_topic_validation(pairs, evidence, gold, fit, folds=None):
    """Mean accuracy over topic folds; each fold trains on all other topics."""
    gold_by = {g.pair_id: g for g in gold}
    pairs = [p for p in pairs if p.id in gold_by]
    folds = folds if folds is not None else leave_one_topic_out(pairs)
    results = []
    for held in folds:
        train_p = [p for p in pairs if p.topic_id not in held]
        test_p = [p for p in pairs if p.topic_id in held]
        if not train_p or not test_p:
            continue
        model = fit([(evidence[p.a].text, evidence[p.b].text, gold_by[p.id].winner) for p in train_p])
        preds = model_predictions(model, test_p, evidence)
        results.append(FoldResult(tuple(sorted(held)), len(test_p),
                                  pairwise_accuracy(preds, [gold_by[p.id] for p in test_p])))
    return results
