"""Time-interval-related pattern (TIRP) mining with three abstract relations.

Karma collects every frequent 2-sized TIRP; Lego grows each frequent TIRP by
one interval at a time, appending the relations of every existing member to
the new last member.  Vertical support is the fraction of entities holding at
least one instance, and an extension is only tried from a frequent parent.

A TIRP of size s stores its states in the canonical order of its instances'
intervals and its relations column by column: (0,1), (0,2), (1,2), (0,3), ...
Per entity the work is vectorised: the relation matrix of all canonical
interval pairs is computed once and candidate extensions are encoded as
integers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sax import StateInterval, canonical_key, canonicalize

BEFORE, OVERLAP, CONTAIN = "before", "overlap", "contain"
RELATIONS = (BEFORE, OVERLAP, CONTAIN)
_N_REL = len(RELATIONS)

State = tuple  # (feature, symbol)


def allen_relation(a: StateInterval, b: StateInterval, epsilon: int = 0) -> str:
    """Abstract relation of ``a`` to ``b``; ``a`` must precede ``b`` canonically."""
    if canonical_key(a) > canonical_key(b):
        raise ValueError(f"intervals out of canonical order: {a} after {b}")
    if a.end + epsilon < b.start:
        return BEFORE
    if b.end <= a.end:
        return CONTAIN
    return OVERLAP


@dataclass
class Tirp:
    states: tuple
    relations: tuple
    support: float = 0.0
    # entity index -> instances, each a tuple of positions in the entity's canonical interval list
    instances: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def key(self):
        return (self.states, self.relations)

    @property
    def entities(self) -> list[int]:
        return sorted(self.instances)


def _relation_matrix(start, end, epsilon):
    """R[i, j] for i < j in canonical order: 0 before, 1 overlap, 2 contain."""
    before = (end[:, None] + epsilon) < start[None, :]
    contain = end[None, :] <= end[:, None]
    return np.where(before, 0, np.where(contain, 2, 1)).astype(np.int64)


class _Encoded:
    """One entity's canonical intervals as arrays."""

    __slots__ = ("intervals", "state", "R", "n")

    def __init__(self, intervals, state_ids, epsilon):
        self.intervals = intervals
        self.n = len(intervals)
        self.state = np.array([state_ids.get((iv.feature, iv.symbol), -1) for iv in intervals], dtype=np.int64)
        start = np.array([iv.start for iv in intervals], dtype=np.int64)
        end = np.array([iv.end for iv in intervals], dtype=np.int64)
        self.R = _relation_matrix(start, end, epsilon)


def _state_table(entities) -> dict:
    states = sorted({(iv.feature, iv.symbol) for ent in entities for iv in ent})
    return {s: i for i, s in enumerate(states)}


def _pair_codes(enc: _Encoded, n_states: int):
    """Upper-triangle pair codes (s_i * S + s_j) * 3 + rel, and their (i, j)."""
    i, j = np.triu_indices(enc.n, k=1)
    ok = (enc.state[i] >= 0) & (enc.state[j] >= 0)
    i, j = i[ok], j[ok]
    codes = (enc.state[i] * n_states + enc.state[j]) * _N_REL + enc.R[i, j]
    return codes, i, j


def _extend(enc: _Encoded, inst: np.ndarray, parent: np.ndarray, n_states: int, pair_ok: np.ndarray):
    """Extension codes of size-s instances by every later interval.

    Code = (parent * S + s_new) * 3**s + sum_m rel(member_m, new) * 3**m.
    Returns codes, the row of ``inst`` extended and the new interval index.
    """
    m, s = inst.shape
    cand = np.arange(enc.n)
    valid = cand[None, :] > inst[:, -1:]
    valid &= (enc.state >= 0)[None, :]
    for c in range(s):
        valid &= pair_ok[inst[:, c]][:, :]
    rows, new = np.nonzero(valid)
    if rows.size == 0:
        return np.empty(0, np.int64), rows, new
    rel = np.zeros(rows.size, dtype=np.int64)
    for c in range(s):
        rel += enc.R[inst[rows, c], new] * _N_REL ** c
    codes = (parent[rows] * n_states + enc.state[new]) * _N_REL ** s + rel
    return codes, rows, new


class _Miner:
    def __init__(self, entities, epsilon, state_ids=None):
        self.canon = [canonicalize(e) for e in entities]
        self.state_ids = _state_table(self.canon) if state_ids is None else state_ids
        self.states = sorted(self.state_ids, key=self.state_ids.get)
        self.S = max(len(self.state_ids), 1)
        self.enc = [_Encoded(e, self.state_ids, epsilon) for e in self.canon]

    def pairs(self):
        for e, enc in enumerate(self.enc):
            codes, i, j = _pair_codes(enc, self.S)
            yield e, codes, i, j

    def decode_pair(self, code):
        rel = int(code % _N_REL)
        si, sj = divmod(int(code // _N_REL), self.S)
        return (self.states[si], self.states[sj]), (RELATIONS[rel],)


def _support_filter(per_entity_codes, n_entities, min_support):
    """Codes present in at least ``min_support`` of the entities, sorted."""
    if not per_entity_codes:
        return np.empty(0, np.int64)
    allc = np.concatenate([np.unique(c) for c in per_entity_codes])
    if allc.size == 0:
        return allc
    uniq, counts = np.unique(allc, return_counts=True)
    # counts / n >= min_support, compared without division
    return uniq[counts >= min_support * n_entities - 1e-9 * n_entities]


def _check_support(min_support):
    if not 0 < min_support <= 1:
        raise ValueError("min_vertical_support must lie in (0, 1]")


def karma(entities: Sequence[Sequence[StateInterval]], min_vertical_support: float = 0.6,
          epsilon: int = 0) -> list[Tirp]:
    """Frequent 2-sized TIRPs with their instances, sorted by (states, relations)."""
    _check_support(min_vertical_support)
    miner = _Miner(entities, epsilon)
    n_ent = len(entities)
    if n_ent == 0:
        return []
    pair_data = list(miner.pairs())
    freq = _support_filter([c for _, c, _, _ in pair_data], n_ent, min_vertical_support)
    tirps = [Tirp(*miner.decode_pair(code)) for code in freq]
    level_inst = []
    for e, codes, i, j in pair_data:
        hit = np.isin(codes, freq)
        level_inst.append((np.stack([i[hit], j[hit]], axis=1), np.searchsorted(freq, codes[hit])))
    _attach(tirps, level_inst, n_ent)
    tirps.sort(key=lambda t: t.key)
    return tirps


def lego(tirps2: Sequence[Tirp], entities, min_vertical_support: float = 0.6, max_size: int = 3,
         epsilon: int = 0) -> list[Tirp]:
    """Grow frequent 2-TIRPs (from :func:`karma` on the same entities) into all
    frequent TIRPs of size 2..max_size, sorted by (size, states, relations)."""
    _check_support(min_vertical_support)
    n_ent = len(entities)
    result = list(tirps2)
    if n_ent == 0 or not tirps2:
        return result
    miner = _Miner(entities, epsilon)
    level_tirps = list(tirps2)
    by_entity = [([], []) for _ in range(n_ent)]
    for tid, t in enumerate(level_tirps):
        for e, insts in t.instances.items():
            by_entity[e][0].extend(insts)
            by_entity[e][1].extend([tid] * len(insts))
    level_inst = []
    pair_ok = []
    for e, enc in enumerate(miner.enc):
        rows, ids = by_entity[e]
        inst = np.array(rows, dtype=np.int64).reshape(-1, 2)
        ok = np.zeros((enc.n, enc.n), dtype=bool)
        ok[inst[:, 0], inst[:, 1]] = True
        pair_ok.append(ok)
        level_inst.append((inst, np.array(ids, dtype=np.int64)))
    size = 2
    while size < max_size and level_tirps:
        cand = []
        for e, (inst, parent) in enumerate(level_inst):
            if inst.shape[0] == 0:
                cand.append((np.empty(0, np.int64), None, None, inst))
                continue
            codes, rows, new = _extend(miner.enc[e], inst, parent, miner.S, pair_ok[e])
            cand.append((codes, rows, new, inst))
        freq = _support_filter([c[0] for c in cand], n_ent, min_vertical_support)
        next_tirps = []
        for code in freq:
            code = int(code)
            rel_code = code % _N_REL ** size
            parent, s_new = divmod(code // _N_REL ** size, miner.S)
            p = level_tirps[parent]
            rels = tuple(RELATIONS[(rel_code // _N_REL ** c) % _N_REL] for c in range(size))
            next_tirps.append(Tirp(p.states + (miner.states[s_new],), p.relations + rels))
        next_inst = []
        for codes, rows, new, inst in cand:
            if codes.size == 0 or freq.size == 0:
                next_inst.append((np.empty((0, size + 1), np.int64), np.empty(0, np.int64)))
                continue
            hit = np.isin(codes, freq)
            grown = np.concatenate([inst[rows[hit]], new[hit][:, None]], axis=1)
            next_inst.append((grown, np.searchsorted(freq, codes[hit])))
        _attach(next_tirps, next_inst, n_ent)
        result.extend(next_tirps)
        level_tirps, level_inst = next_tirps, next_inst
        size += 1
    result.sort(key=lambda t: (t.size, t.states, t.relations))
    return result


def _attach(tirps, level_inst, n_ent):
    for e, (inst, ids) in enumerate(level_inst):
        for row, tid in zip(inst, ids):
            tirps[tid].instances.setdefault(e, []).append(tuple(int(v) for v in row))
    for t in tirps:
        t.support = len(t.instances) / n_ent


def mine_tirps(entities, min_vertical_support: float = 0.6, max_size: int = 3, epsilon: int = 0) -> list[Tirp]:
    """Karma followed by Lego: every frequent TIRP of size 2..max_size."""
    if max_size < 2:
        return []
    return lego(karma(entities, min_vertical_support, epsilon), entities, min_vertical_support, max_size, epsilon)


class TirpMatcher:
    """Finds instances of a fixed set of TIRPs in unseen entities."""

    def __init__(self, tirps: Sequence[Tirp], epsilon: int = 0):
        self.tirps = list(tirps)
        self.epsilon = epsilon
        states = sorted({s for t in self.tirps for s in t.states})
        self.state_ids = {s: i for i, s in enumerate(states)}
        self.S = max(len(states), 1)
        self.max_size = max((t.size for t in self.tirps), default=0)
        # per level: sorted codes and the column of each code
        self.levels = {}
        ids_by_key = {}
        for size in range(2, self.max_size + 1):
            codes, cols = [], []
            for col, t in enumerate(self.tirps):
                if t.size != size:
                    continue
                if size == 2:
                    code = (self.state_ids[t.states[0]] * self.S + self.state_ids[t.states[1]]) * _N_REL \
                        + RELATIONS.index(t.relations[0])
                else:
                    parent = ids_by_key.get((t.states[:-1], t.relations[:-(size - 1)]))
                    if parent is None:
                        raise ValueError(f"TIRP {t.key} has no parent in the set")
                    rel = sum(RELATIONS.index(r) * _N_REL ** c for c, r in enumerate(t.relations[-(size - 1):]))
                    code = (parent * self.S + self.state_ids[t.states[-1]]) * _N_REL ** (size - 1) + rel
                codes.append(code)
                cols.append(col)
            order = np.argsort(codes)
            codes = np.array(codes, dtype=np.int64)[order]
            cols = np.array(cols, dtype=np.int64)[order]
            self.levels[size] = (codes, cols)
            for pos, col in enumerate(cols):
                ids_by_key[self.tirps[col].key] = pos

    def instances(self, entity: Sequence[StateInterval]) -> dict[int, list[tuple]]:
        """TIRP column -> instances (as tuples of canonical positions) in one entity."""
        canon = canonicalize(entity)
        out: dict[int, list[tuple]] = {}
        if self.max_size < 2 or len(canon) < 2:
            return out
        enc = _Encoded(canon, self.state_ids, self.epsilon)
        codes, i, j = _pair_codes(enc, self.S)
        lv_codes, lv_cols = self.levels[2]
        hit = np.isin(codes, lv_codes)
        pos = np.searchsorted(lv_codes, codes[hit])
        inst = np.stack([i[hit], j[hit]], axis=1)
        pair_ok = np.zeros((enc.n, enc.n), dtype=bool)
        pair_ok[i[hit], j[hit]] = True
        self._collect(out, inst, lv_cols[pos])
        for size in range(2, self.max_size):
            if inst.shape[0] == 0 or size + 1 not in self.levels:
                break
            ext, rows, new = _extend(enc, inst, pos, self.S, pair_ok)
            nxt_codes, nxt_cols = self.levels[size + 1]
            hit = np.isin(ext, nxt_codes)
            pos = np.searchsorted(nxt_codes, ext[hit])
            inst = np.concatenate([inst[rows[hit]], new[hit][:, None]], axis=1)
            self._collect(out, inst, nxt_cols[pos])
        return out

    @staticmethod
    def _collect(out, inst, cols):
        for row, col in zip(inst, cols):
            out.setdefault(int(col), []).append(tuple(int(v) for v in row))

    def features(self, entity: Sequence[StateInterval]) -> np.ndarray:
        """Mean instance duration (latest end - earliest start + 1) per TIRP; 0 if absent."""
        canon = canonicalize(entity)
        vec = np.zeros(len(self.tirps))
        for col, insts in self.instances(canon).items():
            spans = [max(canon[p].end for p in inst) - canon[inst[0]].start + 1 for inst in insts]
            vec[col] = float(np.mean(spans))
        return vec


def tirp_features(tirps: Sequence[Tirp], entity: Sequence[StateInterval], epsilon: int = 0) -> np.ndarray:
    return TirpMatcher(tirps, epsilon).features(entity)


def format_tirp(t: Tirp) -> str:
    states = ",".join(f"{f}:{s}" for f, s in t.states)
    return f"{t.size}\t{states}\t{','.join(t.relations)}\t{t.support!r}"


def write_tirps(tirps: Sequence[Tirp], fh) -> None:
    for t in tirps:
        fh.write(format_tirp(t) + "\n")
