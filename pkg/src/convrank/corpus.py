"""Topics, evidence, pairs and labels: TSV ingestion, pair sampling and
topic-disjoint splits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

log = logging.getLogger(__name__)

STANCES = ("PRO", "CON")
WINNERS = ("A", "B")
MAX_LENGTH_RATIO = Fraction(13, 10)


class ParseError(ValueError):
    """A malformed row; the message carries ``path:line``."""


class SchemaError(ValueError):
    """Rows that parse individually but conflict with each other."""


@dataclass(frozen=True)
class Topic:
    id: str
    title: str


@dataclass(frozen=True)
class Evidence:
    id: str
    topic_id: str
    stance: str
    text: str

    @property
    def char_length(self):
        return len(self.text)


@dataclass(frozen=True)
class EvidencePair:
    id: str
    topic_id: str
    a: str
    b: str


@dataclass(frozen=True)
class GoldLabel:
    pair_id: str
    winner: str
    majority_fraction: float


@dataclass(frozen=True)
class DatasetSplit:
    train: frozenset
    test: frozenset


def stance_kind(pair, evidence):
    """'SAME' or 'CROSS', derived from the two evidence stances."""
    return "SAME" if evidence[pair.a].stance == evidence[pair.b].stance else "CROSS"


# -- TSV plumbing ---------------------------------------------------------------

def read_tsv(path, columns):
    """Yield (line number, fields) for each data row after checking the header."""
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n").split("\t")
        if header != list(columns):
            raise ParseError(f"{path}:1: expected header {list(columns)}, got {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(columns):
                raise ParseError(f"{path}:{lineno}: expected {len(columns)} columns, got {len(fields)}")
            yield lineno, fields


def write_tsv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            cells = [str(c) for c in row]
            for c in cells:
                if "\t" in c or "\n" in c:
                    raise ValueError(f"{path}: field {c!r} contains a tab or newline")
            fh.write("\t".join(cells) + "\n")


def _unique(items, path, kind):
    seen = {}
    for lineno, key, item in items:
        if key in seen:
            raise SchemaError(f"{path}:{lineno}: duplicate {kind} {key!r} (first on line {seen[key]})")
        seen[key] = lineno
        yield item


def _nonempty(value, path, lineno, column):
    if not value:
        raise ParseError(f"{path}:{lineno}: empty {column}")
    return value


def parse_topics_file(path):
    rows = ((n, f[0], Topic(_nonempty(f[0], path, n, "topic_id"), _nonempty(f[1], path, n, "title")))
            for n, f in read_tsv(path, ("topic_id", "title")))
    return list(_unique(rows, path, "topic id"))


def parse_evidence_file(path):
    def rows():
        for n, (eid, topic, stance, text) in read_tsv(path, ("id", "topic_id", "stance", "text")):
            if stance not in STANCES:
                raise ParseError(f"{path}:{n}: unknown stance {stance!r} (expected PRO or CON)")
            _nonempty(eid, path, n, "id")
            _nonempty(text, path, n, "text")
            yield n, eid, Evidence(eid, topic, stance, text)
    return list(_unique(rows(), path, "evidence id"))


def parse_pairs_file(path):
    def rows():
        for n, (pid, topic, a, b) in read_tsv(path, ("pair_id", "topic_id", "evidence_a", "evidence_b")):
            if a == b:
                raise ParseError(f"{path}:{n}: pair {pid!r} compares {a!r} with itself")
            yield n, pid, EvidencePair(_nonempty(pid, path, n, "pair_id"), topic, a, b)
    return list(_unique(rows(), path, "pair id"))


def parse_labels_file(path):
    def rows():
        for n, (pid, winner, frac) in read_tsv(path, ("pair_id", "winner", "majority_fraction")):
            if winner not in WINNERS:
                raise ParseError(f"{path}:{n}: unknown winner {winner!r} (expected A or B)")
            try:
                value = float(frac)
            except ValueError:
                raise ParseError(f"{path}:{n}: majority_fraction {frac!r} is not a number") from None
            if not 0.6 <= value <= 1.0:
                raise ParseError(f"{path}:{n}: majority_fraction {value} outside [0.6, 1]")
            yield n, pid, GoldLabel(pid, winner, value)
    return list(_unique(rows(), path, "pair id"))


def load_scores_file(path):
    scores = {}
    lines = {}
    for n, (eid, raw) in read_tsv(path, ("evidence_id", "score")):
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"{path}:{n}: score {raw!r} is not a number") from None
        if not math.isfinite(value):
            raise ParseError(f"{path}:{n}: score {raw!r} is not finite")
        if eid in scores:
            raise SchemaError(f"{path}:{n}: duplicate evidence id {eid!r} (first on line {lines[eid]})")
        scores[eid] = value
        lines[eid] = n
    return scores


def write_topics_file(topics, path):
    write_tsv(path, ("topic_id", "title"), ((t.id, t.title) for t in topics))


def write_evidence_file(evidence, path):
    write_tsv(path, ("id", "topic_id", "stance", "text"),
              ((e.id, e.topic_id, e.stance, e.text) for e in evidence))


def write_pairs_file(pairs, path):
    write_tsv(path, ("pair_id", "topic_id", "evidence_a", "evidence_b"),
              ((p.id, p.topic_id, p.a, p.b) for p in pairs))


def write_labels_file(labels, path):
    write_tsv(path, ("pair_id", "winner", "majority_fraction"),
              ((g.pair_id, g.winner, repr(float(g.majority_fraction))) for g in labels))


def write_scores_file(scores, path):
    write_tsv(path, ("evidence_id", "score"), ((k, repr(float(v))) for k, v in scores.items()))


def validate_pairs(pairs, evidence):
    """Check pair references against the evidence map; raise on the first problem."""
    for p in pairs:
        for side in (p.a, p.b):
            if side not in evidence:
                raise SchemaError(f"pair {p.id!r} references unknown evidence {side!r}")
        if evidence[p.a].topic_id != evidence[p.b].topic_id or evidence[p.a].topic_id != p.topic_id:
            raise SchemaError(f"pair {p.id!r} mixes topics")


def validate_evidence_topics(evidence, topics):
    known = {t.id for t in topics}
    for e in evidence:
        if e.topic_id not in known:
            raise SchemaError(f"evidence {e.id!r} refers to unknown topic {e.topic_id!r}")


# -- pair construction ----------------------------------------------------------

def length_ratio_ok(len_a, len_b, max_ratio=MAX_LENGTH_RATIO):
    """max <= max_ratio * min, inclusive; exact rational comparison."""
    lo, hi = sorted((len_a, len_b))
    return Fraction(hi) <= Fraction(max_ratio) * lo


def topics_with_too_few(evidence):
    counts = {}
    for e in evidence:
        counts[e.topic_id] = counts.get(e.topic_id, 0) + 1
    return sorted(t for t, c in counts.items() if c < 2)


def build_pairs(evidence, per_topic_budget, seed):
    """Sample up to ``per_topic_budget`` length-balanced same-topic pairs per topic.

    Eligible combinations are sampled uniformly without replacement and each
    pair's orientation is a coin flip, both from one seeded stream.
    """
    if per_topic_budget < 1:
        raise ValueError("per_topic_budget must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    by_topic = {}
    for e in evidence:
        by_topic.setdefault(e.topic_id, []).append(e)
    pairs = []
    for topic in sorted(by_topic):
        members = sorted(by_topic[topic], key=lambda e: e.id)
        if len(members) < 2:
            log.warning("topic %s has fewer than 2 evidence; skipped", topic)
            continue
        eligible = [(x, y) for x, y in combinations(members, 2)
                    if length_ratio_ok(x.char_length, y.char_length)]
        if not eligible:
            continue
        k = min(per_topic_budget, len(eligible))
        chosen = rng.choice(len(eligible), size=k, replace=False)
        flips = rng.random(k) < 0.5
        for idx, flip in zip(chosen, flips):
            x, y = eligible[idx]
            if flip:
                x, y = y, x
            pairs.append(EvidencePair(f"{x.id}~{y.id}", topic, x.id, y.id))
    return pairs


def split_by_topic(pairs, test_topic_ids):
    test_topic_ids = set(test_topic_ids)
    train = frozenset(p.id for p in pairs if p.topic_id not in test_topic_ids)
    test = frozenset(p.id for p in pairs if p.topic_id in test_topic_ids)
    return DatasetSplit(train, test)
