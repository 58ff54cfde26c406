"""Seeded synthetic claims cohorts with four latent cost archetypes.

Randomness comes from numpy's PCG64 bit generator.  Patient ``i`` of a cohort
with seed ``s`` draws everything (archetype, claims, target noise) from
``PCG64(SeedSequence(s, spawn_key=(i,)))``, so patients are independent of one
another and of the cohort size.

Archetypes
    healthy    sparse, cheap background claims.
    chronic    steady monthly office visits and drug refills.
    spike      background plus a 2-3 month burst of inpatient/emergency claims
               that decays over the following months.
    transient  background plus a six-month block of outpatient care.

Result-period target (dollars)::

    det    = base[archetype]
             + chronic_slope * [chronic] * observation_cost
             - spike_slope * [spike] * spike_mass
    det    = max(det, base["healthy"])
    target = det + det * (exp(noise * z - noise**2 / 2) - 1),   z ~ N(0, 1)

``spike_mass`` is the dollars paid during the burst and its decay.  The noise
term has mean zero, so ``noise_level = 0`` reproduces ``det`` exactly.  The
target is paid out as a handful of result-period claims whose cents sum to it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import IO

import numpy as np

from .claims import MEDICAL, PHARMACY, ClaimRecord, FeatureTaxonomy, StudyWindowing, synthetic_taxonomy

ARCHETYPES = ("healthy", "chronic", "spike", "transient")

DEFAULT_MIX = {"healthy": 0.55, "chronic": 0.2, "spike": 0.15, "transient": 0.1}


@dataclass(frozen=True)
class TargetParams:
    base: tuple[float, float, float, float] = (300.0, 1500.0, 2500.0, 1200.0)
    chronic_slope: float = 0.5
    spike_slope: float = 0.05

    def base_of(self, archetype: str) -> float:
        return self.base[ARCHETYPES.index(archetype)]


@dataclass
class CohortSpec:
    n_patients: int
    seed: int = 0
    archetype_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_MIX))
    noise_level: float = 0.25
    windowing: StudyWindowing = field(default_factory=StudyWindowing)
    taxonomy: FeatureTaxonomy = field(default_factory=synthetic_taxonomy)
    target: TargetParams = field(default_factory=TargetParams)

    def __post_init__(self):
        if self.n_patients < 0:
            raise ValueError("n_patients must be >= 0")
        unknown = set(self.archetype_mix) - set(ARCHETYPES)
        if unknown:
            raise ValueError(f"unknown archetypes {sorted(unknown)}")
        probs = [self.archetype_mix.get(a, 0.0) for a in ARCHETYPES]
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError("archetype probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"archetype probabilities sum to {sum(probs)}, not 1")
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")

    def probabilities(self) -> np.ndarray:
        return np.array([self.archetype_mix.get(a, 0.0) for a in ARCHETYPES])


def patient_rng(seed: int, index: int) -> np.random.Generator:
    """Per-patient generator: PCG64 seeded by SeedSequence(seed, spawn_key=(index,))."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _add_months(start: date, months: int) -> date:
    m = start.month - 1 + months
    return date(start.year + m // 12, m % 12 + 1, 1)


class _PatientWriter:
    """Emits claims for one patient while tracking observation dollars."""

    def __init__(self, pid, rng, taxonomy: FeatureTaxonomy, windowing: StudyWindowing):
        self.pid = pid
        self.rng = rng
        self.windowing = windowing
        self.claims: list[ClaimRecord] = []
        self.obs_cents = 0
        self.codes = {cat: {} for cat in ("procedure", "diagnosis", "drug")}
        for code in sorted(taxonomy.codes):
            cat, g = taxonomy.codes[code]
            self.codes[cat].setdefault(g, []).append(code)
        self.groups = {cat: sorted(v) for cat, v in self.codes.items()}

    def pool(self, category: str, lo: float, hi: float) -> list[int]:
        """Groups lying in the [lo, hi) fraction of a category's group list."""
        groups = self.groups[category]
        if not groups:
            return []
        a, b = int(lo * len(groups)), max(int(hi * len(groups)), int(lo * len(groups)) + 1)
        return groups[a:b]

    def pick_code(self, category: str, groups: list[int]) -> str | None:
        if not groups:
            return None
        g = groups[self.rng.integers(len(groups))]
        codes = self.codes[category][g]
        return codes[self.rng.integers(len(codes))]

    def emit(self, month: int, kind: str, code: str | None, place: str | None, dollars: float) -> int:
        if code is None:
            return 0
        start = _add_months(self.windowing.observation_start, month)
        day = int(self.rng.integers(1, 29))
        cents = max(int(round(dollars * 100)), 0)
        self.claims.append(ClaimRecord(self.pid, start.replace(day=day), kind, code, place, cents))
        self.obs_cents += cents
        return cents


def _background(w: _PatientWriter, month: int, scale: float):
    rng = w.rng
    for _ in range(rng.poisson(0.25)):
        place = ("office", "lab", "other")[rng.integers(3)]
        cat = "procedure" if rng.random() < 0.5 else "diagnosis"
        w.emit(month, MEDICAL, w.pick_code(cat, w.pool(cat, 0.0, 0.3)), place, 80 * scale * rng.lognormal(0, 0.5))
    for _ in range(rng.poisson(0.15)):
        w.emit(month, PHARMACY, w.pick_code("drug", w.pool("drug", 0.0, 0.3)), None, 25 * scale * rng.lognormal(0, 0.5))


def _generate_patient(spec: CohortSpec, index: int) -> tuple[list[ClaimRecord], str]:
    rng = patient_rng(spec.seed, index)
    archetype = ARCHETYPES[int(rng.choice(len(ARCHETYPES), p=spec.probabilities()))]
    pid = f"P{index:06d}"
    w = _PatientWriter(pid, rng, spec.taxonomy, spec.windowing)
    n_obs = spec.windowing.T * spec.windowing.window_months
    scale = float(rng.lognormal(0.0, 0.5))
    spike_cents = 0

    if archetype == "chronic":
        dx = [w.pick_code("diagnosis", w.pool("diagnosis", 0.3, 0.6)) for _ in range(2)]
        procs = w.pool("procedure", 0.3, 0.6)
        drugs = [(w.pick_code("drug", w.pool("drug", 0.3, 0.6)), 120 * scale * rng.lognormal(0, 0.5))
                 for _ in range(int(rng.integers(1, 4)))]
        for m in range(n_obs):
            _background(w, m, scale)
            for _ in range(rng.poisson(2.5)):
                place = ("office", "lab", "outpatient")[rng.integers(3)]
                if rng.random() < 0.5:
                    code = dx[rng.integers(len(dx))]
                    w.emit(m, MEDICAL, code, place, 150 * scale * rng.lognormal(0, 0.4))
                else:
                    w.emit(m, MEDICAL, w.pick_code("procedure", procs), place, 150 * scale * rng.lognormal(0, 0.4))
            for code, price in drugs:
                if rng.random() < 0.9:
                    w.emit(m, PHARMACY, code, None, price * rng.lognormal(0, 0.1))
    elif archetype == "spike":
        start = int(rng.integers(2, max(n_obs - 4, 3)))
        length = int(rng.integers(2, 4))
        acute = w.pool("procedure", 0.6, 1.0)
        acute_dx = w.pool("diagnosis", 0.6, 1.0)
        for m in range(n_obs):
            _background(w, m, scale)
            if start <= m < start + length:
                rate = 8.0
            elif start + length <= m < start + length + 3:
                rate = 8.0 * 0.5 ** (m - start - length + 1)
            else:
                continue
            for _ in range(rng.poisson(rate)):
                place = "inpatient" if rng.random() < 0.6 else "emergency"
                cat, pool = ("procedure", acute) if rng.random() < 0.6 else ("diagnosis", acute_dx)
                spike_cents += w.emit(m, MEDICAL, w.pick_code(cat, pool), place, 900 * scale * rng.lognormal(0, 0.5))
            if rng.random() < 0.7:
                spike_cents += w.emit(m, PHARMACY, w.pick_code("drug", w.pool("drug", 0.6, 1.0)), None,
                                      60 * scale * rng.lognormal(0, 0.5))
    elif archetype == "transient":
        start = int(rng.integers(max(n_obs // 4, 1), max(n_obs // 2, 2)))
        procs = w.pool("procedure", 0.3, 0.8)
        drug = w.pick_code("drug", w.pool("drug", 0.3, 0.8))
        for m in range(n_obs):
            _background(w, m, scale)
            if start <= m < start + 6:
                for _ in range(rng.poisson(1.5)):
                    w.emit(m, MEDICAL, w.pick_code("procedure", procs), "outpatient", 120 * scale * rng.lognormal(0, 0.4))
                if rng.random() < 0.8:
                    w.emit(m, PHARMACY, drug, None, 80 * scale * rng.lognormal(0, 0.3))
    else:
        for m in range(n_obs):
            _background(w, m, scale)

    tp = spec.target
    det = tp.base_of(archetype)
    if archetype == "chronic":
        det += tp.chronic_slope * w.obs_cents / 100.0
    elif archetype == "spike":
        det -= tp.spike_slope * spike_cents / 100.0
    det = max(det, tp.base_of("healthy"))
    z = rng.standard_normal()
    noise = det * (np.exp(spec.noise_level * z - spec.noise_level ** 2 / 2) - 1.0)
    target_cents = max(int(round((det + noise) * 100)), 0)
    w.claims.extend(_result_claims(w, archetype, target_cents))
    return w.claims, archetype


def _result_claims(w: _PatientWriter, archetype: str, target_cents: int) -> list[ClaimRecord]:
    if target_cents == 0:
        return []
    rng, win = w.rng, w.windowing
    n = 1 + int(rng.poisson(3 if archetype == "healthy" else 12))
    shares = rng.dirichlet(np.ones(n))
    cents = np.floor(shares * target_cents).astype(np.int64)
    cents[-1] += target_cents - int(cents.sum())
    months = win.result_months()
    out = []
    for c in cents:
        m = int(rng.integers(months))
        start = _add_months(win.result_start.replace(day=1), m)
        day = int(rng.integers(1, 29))
        when = start.replace(day=day)
        when = min(max(when, win.result_start), win.result_end)
        code = w.pick_code("procedure", w.groups["procedure"])
        if code is None:
            code = w.pick_code("diagnosis", w.groups["diagnosis"]) or "UNMAPPED"
        out.append(ClaimRecord(w.pid, when, MEDICAL, code, "office", int(c)))
    return out


def generate_cohort(spec: CohortSpec) -> tuple[list[ClaimRecord], dict[str, str]]:
    """All claims (patient order, then date order) and the latent archetype of each patient."""
    claims: list[ClaimRecord] = []
    labels: dict[str, str] = {}
    for i in range(spec.n_patients):
        pc, arch = _generate_patient(spec, i)
        pc.sort(key=lambda c: c.service_date)
        claims.extend(pc)
        labels[f"P{i:06d}"] = arch
    return claims, labels


def write_labels(labels: dict[str, str], fh: IO[str]) -> None:
    for pid, arch in labels.items():
        fh.write(f"{pid}\t{arch}\n")


def read_labels(fh: IO[str]) -> dict[str, str]:
    out = {}
    for line in fh:
        line = line.rstrip("\n")
        if line:
            pid, arch = line.split("\t")
            out[pid] = arch
    return out
