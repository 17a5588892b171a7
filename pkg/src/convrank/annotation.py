"""Crowd-label quality control: Cohen's kappa, labeler filters, majority
aggregation, the transitivity audit and inter-group agreement.

Undefined statistics (kappa with degenerate marginals, precision with no
hidden tests, ...) are returned as ``None``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .corpus import GoldLabel, ParseError, SchemaError, read_tsv, write_tsv

CHOICES = ("A", "B")
MIN_SHARED_PAIRS = 20
MIN_COUNTERPARTS = 10


@dataclass(frozen=True)
class AnnotationRecord:
    labeler_id: str
    pair_id: str
    choice: str
    is_hidden_test: bool = False
    hidden_gold: str | None = None

    def __post_init__(self):
        if self.choice not in CHOICES:
            raise ValueError(f"choice must be A or B, got {self.choice!r}")
        if self.is_hidden_test != (self.hidden_gold is not None):
            raise ValueError("hidden_gold must be set exactly for hidden test records")


@dataclass
class LabelerStats:
    labeler_id: str
    n_real_pairs: int
    n_hidden: int
    hidden_precision: float | None
    avg_kappa: float | None
    n_kappa_counterparts: int


@dataclass
class AggregationReport:
    kept_labels: list = field(default_factory=list)
    dropped_indecisive: list = field(default_factory=list)
    dropped_underannotated: list = field(default_factory=list)
    filtered_labelers: list = field(default_factory=list)


def parse_annotations_file(path):
    cols = ("labeler_id", "pair_id", "choice", "is_hidden_test", "hidden_gold")
    records, seen = [], {}
    for n, (lab, pid, choice, hidden, gold) in read_tsv(path, cols):
        if choice not in CHOICES:
            raise ParseError(f"{path}:{n}: unknown choice {choice!r}")
        if hidden not in ("0", "1"):
            raise ParseError(f"{path}:{n}: is_hidden_test must be 0 or 1, got {hidden!r}")
        if hidden == "1" and gold not in CHOICES:
            raise ParseError(f"{path}:{n}: hidden test without a valid hidden_gold")
        if hidden == "0" and gold:
            raise ParseError(f"{path}:{n}: hidden_gold given for a regular pair")
        key = (lab, pid)
        if key in seen:
            raise SchemaError(f"{path}:{n}: labeler {lab!r} annotated pair {pid!r} twice (line {seen[key]})")
        seen[key] = n
        records.append(AnnotationRecord(lab, pid, choice, hidden == "1", gold or None))
    return records


def write_annotations_file(records, path):
    write_tsv(path, ("labeler_id", "pair_id", "choice", "is_hidden_test", "hidden_gold"),
              ((r.labeler_id, r.pair_id, r.choice, int(r.is_hidden_test), r.hidden_gold or "")
               for r in records))


# -- agreement ------------------------------------------------------------------

def cohen_kappa(ann1, ann2):
    """Kappa over the pairs both labelers annotated; None when undefined."""
    first = dict(ann1)
    second = dict(ann2)
    shared = [p for p in first if p in second]
    if not shared:
        return None
    n = len(shared)
    agree = sum(first[p] == second[p] for p in shared)
    a1 = sum(first[p] == "A" for p in shared)
    a2 = sum(second[p] == "A" for p in shared)
    # exact rationals so p_e == 1 is detected without rounding
    p_o = Fraction(agree, n)
    p_e = Fraction(a1 * a2 + (n - a1) * (n - a2), n * n)
    if p_e == 1:
        return None
    return float((p_o - p_e) / (1 - p_e))


def _real_choices(annotations):
    by_labeler = defaultdict(dict)
    for r in annotations:
        if not r.is_hidden_test:
            by_labeler[r.labeler_id][r.pair_id] = r.choice
    return by_labeler


def pairwise_kappas(annotations, min_shared=MIN_SHARED_PAIRS, labelers=None):
    """{(l1, l2): (kappa or None, shared count)} for labeler pairs sharing enough pairs."""
    choices = _real_choices(annotations)
    ids = sorted(choices if labelers is None else (l for l in choices if l in labelers))
    out = {}
    for l1, l2 in combinations(ids, 2):
        c1, c2 = choices[l1], choices[l2]
        shared = len(c1.keys() & c2.keys())
        if shared >= min_shared:
            out[(l1, l2)] = (cohen_kappa(c1.items(), c2.items()), shared)
    return out


def compute_labeler_stats(annotations, min_shared=MIN_SHARED_PAIRS, min_counterparts=MIN_COUNTERPARTS):
    """Per-labeler pair counts, hidden-test precision and average kappa.

    A counterpart counts only when it shares at least ``min_shared`` regular
    pairs and their kappa is defined.
    """
    annotations = list(annotations)
    labelers = sorted({r.labeler_id for r in annotations})
    choices = _real_choices(annotations)
    hidden_total = defaultdict(int)
    hidden_right = defaultdict(int)
    for r in annotations:
        if r.is_hidden_test:
            hidden_total[r.labeler_id] += 1
            hidden_right[r.labeler_id] += r.choice == r.hidden_gold
    kappas = defaultdict(list)
    for (l1, l2), (k, _) in pairwise_kappas(annotations, min_shared).items():
        if k is not None:
            kappas[l1].append(k)
            kappas[l2].append(k)
    stats = []
    for lab in labelers:
        n_hidden = hidden_total[lab]
        ks = kappas[lab]
        stats.append(LabelerStats(
            labeler_id=lab,
            n_real_pairs=len(choices.get(lab, {})),
            n_hidden=n_hidden,
            hidden_precision=hidden_right[lab] / n_hidden if n_hidden else None,
            avg_kappa=sum(ks) / len(ks) if len(ks) >= min_counterparts else None,
            n_kappa_counterparts=len(ks),
        ))
    return stats


def filter_labelers(stats, min_pairs=20, min_kappa=0.1, min_precision=0.55):
    """Ids of labelers failing any threshold (each rejects strictly below)."""
    rejected = set()
    for s in stats:
        if (s.n_real_pairs < min_pairs
                or (s.avg_kappa is not None and s.avg_kappa < min_kappa)
                or (s.hidden_precision is not None and s.hidden_precision < min_precision)):
            rejected.add(s.labeler_id)
    return rejected


# -- aggregation ------------------------------------------------------------------

def majority_decision(votes_a, n, majority=0.6):
    """'A', 'B' or None (indecisive) for ``votes_a`` of ``n`` votes."""
    need = Fraction(str(majority)) * n
    if votes_a >= need:
        return "A"
    if n - votes_a >= need:
        return "B"
    return None


def aggregate_labels(annotations, rejected=(), min_annotations=7, majority=0.6):
    """Majority gold labels from valid labelers' regular annotations."""
    rejected = set(rejected)
    counts = {}
    for r in annotations:
        if r.is_hidden_test:
            continue
        n, a = counts.get(r.pair_id, (0, 0))
        if r.labeler_id not in rejected:
            n, a = n + 1, a + (r.choice == "A")
        counts[r.pair_id] = (n, a)
    report = AggregationReport(filtered_labelers=sorted(rejected))
    for pid in sorted(counts):
        n, a = counts[pid]
        if n < min_annotations:
            report.dropped_underannotated.append(pid)
            continue
        winner = majority_decision(a, n, majority)
        if winner is None:
            report.dropped_indecisive.append(pid)
        else:
            votes = a if winner == "A" else n - a
            report.kept_labels.append(GoldLabel(pid, winner, votes / n))
    return report


def pair_decisions(annotations, majority=0.6, labelers=None):
    """pair id -> 'A' | 'B' | None over regular annotations (optionally a labeler subset)."""
    counts = {}
    for r in annotations:
        if r.is_hidden_test or (labelers is not None and r.labeler_id not in labelers):
            continue
        n, a = counts.get(r.pair_id, (0, 0))
        counts[r.pair_id] = (n + 1, a + (r.choice == "A"))
    return {pid: majority_decision(a, n, majority) for pid, (n, a) in counts.items()}


def group_agreement(labels1, labels2):
    """Share of pairs decisive in both groups on which the winners match."""
    first, second = dict(labels1), dict(labels2)
    shared = [p for p in first if p in second and first[p] is not None and second[p] is not None]
    if not shared:
        return None
    return sum(first[p] == second[p] for p in shared) / len(shared)


# -- transitivity -------------------------------------------------------------------

def preference_graph(labels, pairs):
    """{frozenset({x, y}): winner evidence id} from gold labels."""
    by_id = {p.id: p for p in pairs}
    prefs = {}
    for g in labels:
        if g.pair_id not in by_id:
            raise SchemaError(f"label for unknown pair {g.pair_id!r}")
        p = by_id[g.pair_id]
        key = frozenset((p.a, p.b))
        winner = p.a if g.winner == "A" else p.b
        if prefs.get(key, winner) != winner:
            raise SchemaError(f"conflicting gold labels for evidence {sorted(key)}")
        prefs[key] = winner
    return prefs


def transitivity_audit(labels, pairs):
    """(number of fully labeled triplets, fraction that admit a strict order)."""
    prefs = preference_graph(labels, pairs)
    neighbours = defaultdict(set)
    for key in prefs:
        x, y = tuple(key)
        neighbours[x].add(y)
        neighbours[y].add(x)
    total = consistent = 0
    for key in prefs:
        x, y = sorted(key)
        for z in neighbours[x] & neighbours[y]:
            if z <= y:
                continue
            total += 1
            wins = [prefs[frozenset(e)] for e in ((x, y), (x, z), (y, z))]
            # a 3-cycle is the only way three strict preferences fail to order
            consistent += len(set(wins)) < 3
    return total, (consistent / total if total else 1.0)


# -- report -------------------------------------------------------------------------

@dataclass
class AuditReport:
    stats: list
    rejected: set
    aggregation: AggregationReport
    n_triplets: int
    transitivity: float | None
    kappa_unweighted: float | None
    kappa_weighted: float | None
    remaining_precision: float | None


def _kappa_averages(annotations, labelers):
    values = [(k, n) for k, n in pairwise_kappas(annotations, labelers=labelers).values() if k is not None]
    if not values:
        return None, None
    unweighted = sum(k for k, _ in values) / len(values)
    weighted = sum(k * n for k, n in values) / sum(n for _, n in values)
    return unweighted, weighted


def run_audit(annotations, pairs, min_pairs=20, min_kappa=0.1, min_precision=0.55,
              min_annotations=7, majority=0.6):
    """Stats -> one-shot labeler filter -> aggregation -> transitivity.

    ``pairs`` None skips the transitivity audit (transitivity stays None).
    """
    annotations = list(annotations)
    stats = compute_labeler_stats(annotations)
    rejected = filter_labelers(stats, min_pairs, min_kappa, min_precision)
    agg = aggregate_labels(annotations, rejected, min_annotations, majority)
    n_trip, frac = (0, None) if pairs is None else transitivity_audit(agg.kept_labels, pairs)
    kept = {s.labeler_id for s in stats} - rejected
    unweighted, weighted = _kappa_averages(annotations, kept)
    precisions = [s.hidden_precision for s in stats
                  if s.labeler_id in kept and s.hidden_precision is not None]
    return AuditReport(stats, rejected, agg, n_trip, frac, unweighted, weighted,
                       sum(precisions) / len(precisions) if precisions else None)


def _fmt(x):
    return "NA" if x is None else f"{x:.4f}"


def write_labeler_stats(stats, rejected, path):
    write_tsv(path, ("labeler_id", "n_real_pairs", "n_hidden", "hidden_precision",
                     "avg_kappa", "n_kappa_counterparts", "rejected"),
              ((s.labeler_id, s.n_real_pairs, s.n_hidden, _fmt(s.hidden_precision),
                _fmt(s.avg_kappa), s.n_kappa_counterparts, int(s.labeler_id in rejected))
               for s in stats))


def summary_lines(report):
    agg = report.aggregation
    return [
        f"labelers: {len(report.stats)}",
        f"rejected labelers: {len(report.rejected)}",
        f"kept pairs: {len(agg.kept_labels)}",
        f"dropped indecisive pairs: {len(agg.dropped_indecisive)}",
        f"dropped under-annotated pairs: {len(agg.dropped_underannotated)}",
        f"mean hidden-test precision (kept labelers): {_fmt(report.remaining_precision)}",
        f"mean pairwise kappa (kept labelers, unweighted): {_fmt(report.kappa_unweighted)}",
        f"mean pairwise kappa (kept labelers, weighted by shared pairs): {_fmt(report.kappa_weighted)}",
        f"fully labeled triplets: {report.n_triplets}",
        f"transitive triplet fraction: {_fmt(report.transitivity)}",
    ]
