"""Independent reference computations used to check the package.

Nothing here imports the code under test except plain data types.
"""

import math
from itertools import combinations, permutations

import numpy as np


# -- calculus -----------------------------------------------------------------

def central_difference(f, arrays, step=1e-3):
    """d f / d arrays[i] for every array, by central differences in float64.

    ``f`` reads the arrays in place; they are restored after each probe.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = f()
            flat[i] = orig - step
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def lstm_cell_scalar(x, h, c, w):
    """One LSTM step with H = d = 1; ``w`` maps gate -> (W, U, b)."""
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    i = sig(w["i"][0] * x + w["i"][1] * h + w["i"][2])
    f = sig(w["f"][0] * x + w["f"][1] * h + w["f"][2])
    o = sig(w["o"][0] * x + w["o"][1] * h + w["o"][2])
    g = math.tanh(w["c"][0] * x + w["c"][1] * h + w["c"][2])
    c_new = f * c + i * g
    return o * math.tanh(c_new), c_new


def attention_brute_force(states, queries):
    out = []
    for q in queries:
        scores = [sum(qi * si for qi, si in zip(q, s)) for s in states]
        m = max(scores)
        e = [math.exp(v - m) for v in scores]
        z = sum(e)
        w = [v / z for v in e]
        out.extend(sum(w[t] * states[t][j] for t in range(len(states))) for j in range(len(q)))
    return out


def adam_reference(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam over a sequence of gradients, in Python floats."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
    return theta


# -- statistics ------------------------------------------------------------------

def pearson_direct(x, y):
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def ranks_by_counting(values):
    """Average rank = (#smaller) + (#equal + 1) / 2."""
    return [sum(w < v for w in values) + (sum(w == v for w in values) + 1) / 2 for v in values]


def spearman_oracle(x, y):
    return pearson_direct(ranks_by_counting(x), ranks_by_counting(y))


# -- annotation ---------------------------------------------------------------------

def kappa_oracle(c1, c2):
    """Kappa from the 2x2 confusion table of two {pair: choice} dicts."""
    shared = sorted(set(c1) & set(c2))
    if not shared:
        return None
    table = {(x, y): 0 for x in "AB" for y in "AB"}
    for p in shared:
        table[(c1[p], c2[p])] += 1
    n = len(shared)
    po = (table[("A", "A")] + table[("B", "B")]) / n
    row_a = (table[("A", "A")] + table[("A", "B")]) / n
    col_a = (table[("A", "A")] + table[("B", "A")]) / n
    pe = row_a * col_a + (1 - row_a) * (1 - col_a)
    if abs(1 - pe) < 1e-12:
        return None
    return (po - pe) / (1 - pe)


def labeler_stats_oracle(records, min_shared=20, min_counterparts=10):
    """{labeler: (n_real, n_hidden, precision, avg_kappa)} by brute force."""
    labelers = sorted({r.labeler_id for r in records})
    real = {l: {r.pair_id: r.choice for r in records if r.labeler_id == l and not r.is_hidden_test}
            for l in labelers}
    out = {}
    for l in labelers:
        hidden = [r for r in records if r.labeler_id == l and r.is_hidden_test]
        precision = (sum(r.choice == r.hidden_gold for r in hidden) / len(hidden)) if hidden else None
        ks = []
        for other in labelers:
            if other == l or len(set(real[l]) & set(real[other])) < min_shared:
                continue
            k = kappa_oracle(real[l], real[other])
            if k is not None:
                ks.append(k)
        avg = sum(ks) / len(ks) if len(ks) >= min_counterparts else None
        out[l] = (len(real[l]), len(hidden), precision, avg)
    return out


def reject_oracle(stats, min_pairs=20, min_kappa=0.1, min_precision=0.55):
    bad = set()
    for l, (n_real, _, precision, kappa) in stats.items():
        if n_real < min_pairs:
            bad.add(l)
        if kappa is not None and kappa < min_kappa:
            bad.add(l)
        if precision is not None and precision < min_precision:
            bad.add(l)
    return bad


def aggregate_oracle(records, rejected, min_annotations=7, majority=0.6):
    """pair -> ('kept', winner, fraction) | ('indecisive',) | ('under',)."""
    pairs = sorted({r.pair_id for r in records if not r.is_hidden_test})
    out = {}
    for p in pairs:
        votes = [r.choice for r in records
                 if r.pair_id == p and not r.is_hidden_test and r.labeler_id not in rejected]
        n = len(votes)
        if n < min_annotations:
            out[p] = ("under",)
            continue
        a = votes.count("A")
        # integer form of a / n >= majority for majority = k / 10
        k = round(majority * 10)
        if 10 * a >= k * n:
            out[p] = ("kept", "A", a / n)
        elif 10 * (n - a) >= k * n:
            out[p] = ("kept", "B", (n - a) / n)
        else:
            out[p] = ("indecisive",)
    return out


def transitivity_oracle(prefs, items):
    """``prefs`` maps (x, y) with x < y to the winner id; brute force over triplets."""
    total = ok = 0
    for tri in combinations(sorted(items), 3):
        edges = list(combinations(tri, 2))
        if not all(e in prefs for e in edges):
            continue
        total += 1
        for order in permutations(tri):
            rank = {e: i for i, e in enumerate(order)}
            if all(prefs[(x, y)] == (x if rank[x] < rank[y] else y) for x, y in edges):
                ok += 1
                break
    return total, (ok / total if total else 1.0)
