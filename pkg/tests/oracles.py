"""Independent reference implementations used by the tests.

Each one is written directly from the defining formula, loop by loop, with no
code shared with the package.
"""
import itertools
import math

import numpy as np

from costconv.baselines.sax import StateInterval


def lrelu_scalar(x):
    return x if x > 0 else 0.01 * x


def avg_pool_scalar(row):
    return [(row[2 * j] + row[2 * j + 1]) / 2 for j in range(len(row) // 2)]


def conv_scalar(x, kernels, biases):
    """out[d][j] = b_d + sum_{r,c} w_d[r][c] * padded[r][j+c], zero padding on time only."""
    n_f, f_in, k = kernels.shape
    t = x.shape[1]
    left = (k - 1) // 2
    out = np.zeros((n_f, t))
    for d in range(n_f):
        for j in range(t):
            s = biases[d]
            for r in range(f_in):
                for c in range(k):
                    col = j + c - left
                    if 0 <= col < t:
                        s += kernels[d, r, c] * x[r, col]
            out[d, j] = s
    return out


def mape_scalar(actual, predicted):
    total = 0.0
    for a, p in zip(actual, predicted):
        total += abs((a + 1) - p) / (a + 1)
    return total / len(actual)


def _relation(a, b, epsilon=0):
    if a.end + epsilon < b.start:
        return "before"
    if b.end <= a.end:
        return "contain"
    return "overlap"


def _canonical(intervals):
    return sorted(intervals, key=lambda iv: (iv.start, -iv.end, iv.feature, iv.symbol))


def brute_force_tirps(entities, min_support, max_size=3, epsilon=0):
    """Every (states, relations) over every interval subset of size 2..max_size, filtered by support."""
    found = {}
    for e, ent in enumerate(entities):
        c = _canonical(ent)
        for s in range(2, max_size + 1):
            for comb in itertools.combinations(range(len(c)), s):
                ivs = [c[i] for i in comb]
                states = tuple((iv.feature, iv.symbol) for iv in ivs)
                rels = tuple(_relation(ivs[i], ivs[j], epsilon) for j in range(1, s) for i in range(j))
                found.setdefault((states, rels), set()).add(e)
    n = len(entities)
    return {key: len(ents) / n for key, ents in found.items() if len(ents) >= min_support * n - 1e-9}


def random_entities(rng: np.random.Generator, max_entities=20, max_intervals=6, n_features=3):
    ents = []
    for _ in range(int(rng.integers(1, max_entities + 1))):
        ivs = []
        for f in range(n_features):
            t = 0
            while t < 8 and len(ivs) < max_intervals:
                length = int(rng.integers(1, 4))
                sym = "ab"[int(rng.integers(2))]
                if rng.random() < 0.7:
                    ivs.append(StateInterval(f, sym, t, min(t + length - 1, 9)))
                t += length + int(rng.integers(0, 2))
        ents.append(ivs)
    return ents


def equal_dollar_sweep(costs):
    """Bucket of every patient by walking ascending costs and closing bucket q once cum >= q*total/5."""
    order = sorted(range(len(costs)), key=lambda i: costs[i])
    total = sum(costs)
    out = [0] * len(costs)
    bucket, cum = 1, 0.0
    for i in order:
        out[i] = bucket
        cum += costs[i]
        while bucket < 5 and 5 * cum >= bucket * total:  # cum >= q * total / 5 without rounding
            bucket += 1
    return out


def t_statistic(a, b):
    d = [x - y for x, y in zip(a, b)]
    n = len(d)
    m = sum(d) / n
    sd = math.sqrt(sum((x - m) ** 2 for x in d) / (n - 1))
    return m / (sd / math.sqrt(n))
