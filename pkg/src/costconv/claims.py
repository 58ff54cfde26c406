"""Claims parsing, feature taxonomy, and per-patient feature x time matrices.

Each patient's observation period is cut into calendar-month windows.  A cell
of the matrix holds either dollars (the two cost rows), visit counts (the
seven visit rows) or claim counts (procedure, diagnosis and drug group rows).
Money is carried as integer cents until the matrix is materialised.
"""
from __future__ import annotations

import json
import logging
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

MEDICAL = "medical"
PHARMACY = "pharmacy"
CLAIM_KINDS = (MEDICAL, PHARMACY)

VISIT_PLACES = ("office", "inpatient", "outpatient", "lab", "emergency", "home", "other")
COST_CATEGORIES = (MEDICAL, PHARMACY)
CODE_CATEGORIES = ("procedure", "diagnosis", "drug")

UNMAPPED = "unmapped"


class ClaimsError(ValueError):
    """Raised for malformed claims, taxonomy or cache input."""


@dataclass(frozen=True)
class ClaimRecord:
    patient_id: str
    service_date: date
    kind: str
    code: str
    visit_place: str | None
    paid_cents: int

    @property
    def paid_amount(self) -> float:
        return self.paid_cents / 100.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "patient_id": self.patient_id,
                "service_date": self.service_date.isoformat(),
                "kind": self.kind,
                "code": self.code,
                "visit_place": self.visit_place,
                "paid_amount_cents": self.paid_cents,
            },
            separators=(",", ":"),
        )


_CLAIM_KEYS = ("patient_id", "service_date", "kind", "code", "visit_place", "paid_amount_cents")


def _claim_from_obj(obj, lineno: int) -> ClaimRecord:
    if not isinstance(obj, dict):
        raise ClaimsError(f"line {lineno}: expected a JSON object")
    for key in _CLAIM_KEYS:
        if key not in obj:
            raise ClaimsError(f"line {lineno}: missing field {key!r}")
    pid = obj["patient_id"]
    if not isinstance(pid, str) or not pid:
        raise ClaimsError(f"line {lineno}: field 'patient_id' must be a non-empty string")
    try:
        when = date.fromisoformat(obj["service_date"])
    except (TypeError, ValueError):
        raise ClaimsError(f"line {lineno}: field 'service_date' is not an ISO-8601 date") from None
    kind = obj["kind"]
    if kind not in CLAIM_KINDS:
        raise ClaimsError(f"line {lineno}: field 'kind' must be one of {CLAIM_KINDS}, got {kind!r}")
    code = obj["code"]
    if not isinstance(code, str):
        raise ClaimsError(f"line {lineno}: field 'code' must be a string")
    place = obj["visit_place"]
    if place is not None and place not in VISIT_PLACES:
        raise ClaimsError(f"line {lineno}: field 'visit_place' must be null or one of {VISIT_PLACES}")
    cents = obj["paid_amount_cents"]
    if isinstance(cents, bool) or not isinstance(cents, int):
        raise ClaimsError(f"line {lineno}: field 'paid_amount_cents' must be an integer")
    if cents < 0:
        raise ClaimsError(f"negative amount, line {lineno}")
    return ClaimRecord(pid, when, kind, code, place, cents)


def parse_claims(stream: Iterable[str]) -> list[ClaimRecord]:
    """Parse line-delimited JSON claims, preserving order.  Blank lines are skipped."""
    out = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ClaimsError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        out.append(_claim_from_obj(obj, lineno))
    return out


def read_claims(path: str | Path) -> list[ClaimRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_claims(fh)


def write_claims(claims: Iterable[ClaimRecord], fh: IO[str]) -> None:
    for c in claims:
        fh.write(c.to_json())
        fh.write("\n")


# --------------------------------------------------------------------------
# taxonomy


@dataclass
class FeatureTaxonomy:
    """Feature rows: cost (2), procedure, diagnosis, drug groups, visits (7).

    ``codes`` maps a code to ``(category, group_index)`` where category is one
    of procedure / diagnosis / drug.
    """

    procedure_groups: list[str]
    diagnosis_groups: list[str]
    drug_groups: list[str]
    codes: dict[str, tuple[str, int]] = field(default_factory=dict)
    visit_categories: tuple[str, ...] = VISIT_PLACES
    cost_categories: tuple[str, ...] = COST_CATEGORIES

    def __post_init__(self):
        sizes = {"procedure": len(self.procedure_groups), "diagnosis": len(self.diagnosis_groups),
                 "drug": len(self.drug_groups)}
        for code, (cat, idx) in self.codes.items():
            if cat not in sizes:
                raise ClaimsError(f"code {code!r}: unknown category {cat!r}")
            if not 0 <= idx < sizes[cat]:
                raise ClaimsError(f"code {code!r}: group index {idx} out of range for {cat} ({sizes[cat]} groups)")

    # row offsets
    @property
    def cost_offset(self) -> int:
        return 0

    @property
    def procedure_offset(self) -> int:
        return len(self.cost_categories)

    @property
    def diagnosis_offset(self) -> int:
        return self.procedure_offset + len(self.procedure_groups)

    @property
    def drug_offset(self) -> int:
        return self.diagnosis_offset + len(self.diagnosis_groups)

    @property
    def visit_offset(self) -> int:
        return self.drug_offset + len(self.drug_groups)

    @property
    def n_features(self) -> int:
        return self.visit_offset + len(self.visit_categories)

    def category_offset(self, category: str) -> int:
        return {"procedure": self.procedure_offset, "diagnosis": self.diagnosis_offset,
                "drug": self.drug_offset}[category]

    def rows(self, category: str) -> np.ndarray:
        """Row indices of a predictor category: cost, visit or medical."""
        if category == "cost":
            return np.arange(self.cost_offset, self.procedure_offset)
        if category == "visit":
            return np.arange(self.visit_offset, self.n_features)
        if category == "medical":
            return np.arange(self.procedure_offset, self.visit_offset)
        raise ValueError(f"unknown predictor category {category!r}")

    def feature_names(self) -> list[str]:
        names = [f"cost:{c}" for c in self.cost_categories]
        names += [f"procedure:{g}" for g in self.procedure_groups]
        names += [f"diagnosis:{g}" for g in self.diagnosis_groups]
        names += [f"drug:{g}" for g in self.drug_groups]
        names += [f"visit:{v}" for v in self.visit_categories]
        return names

    def describe(self, index: int) -> tuple[str, str]:
        """(category, group) for a feature row."""
        cat, _, group = self.feature_names()[index].partition(":")
        return cat, group


def synthetic_taxonomy(n_procedure: int = 180, n_diagnosis: int = 83, n_drug: int = 336,
                       codes_per_group: int = 2) -> FeatureTaxonomy:
    """Placeholder groups of the right cardinality with ``codes_per_group`` codes each."""
    codes = {}
    prefixes = {"procedure": "PX", "diagnosis": "DX", "drug": "RX"}
    counts = {"procedure": n_procedure, "diagnosis": n_diagnosis, "drug": n_drug}
    for cat, n in counts.items():
        for g in range(n):
            for j in range(codes_per_group):
                codes[f"{prefixes[cat]}{g:03d}{chr(ord('A') + j)}"] = (cat, g)
    return FeatureTaxonomy(
        procedure_groups=[f"procedure_{g:03d}" for g in range(n_procedure)],
        diagnosis_groups=[f"diagnosis_{g:03d}" for g in range(n_diagnosis)],
        drug_groups=[f"drug_{g:03d}" for g in range(n_drug)],
        codes=codes,
    )


def mini_taxonomy() -> FeatureTaxonomy:
    """60-row taxonomy for fast runs: 18 procedure, 8 diagnosis, 25 drug groups."""
    return synthetic_taxonomy(18, 8, 25)


def read_taxonomy(path: str | Path) -> FeatureTaxonomy:
    """Read ``code<TAB>category<TAB>group_index`` lines.

    Group counts are the largest index + 1 per category unless a
    ``#groups procedure=N diagnosis=N drug=N`` comment fixes them.
    """
    codes: dict[str, tuple[str, int]] = {}
    declared: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if line.startswith("#groups"):
                    for tok in line.split()[1:]:
                        cat, _, n = tok.partition("=")
                        declared[cat] = int(n)
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ClaimsError(f"taxonomy line {lineno}: expected 3 tab-separated fields")
            code, cat, idx = parts
            if cat not in CODE_CATEGORIES:
                raise ClaimsError(f"taxonomy line {lineno}: unknown category {cat!r}")
            try:
                gi = int(idx)
            except ValueError:
                raise ClaimsError(f"taxonomy line {lineno}: group_index {idx!r} is not an integer") from None
            if gi < 0:
                raise ClaimsError(f"taxonomy line {lineno}: negative group_index")
            if code in codes and codes[code] != (cat, gi):
                raise ClaimsError(f"taxonomy line {lineno}: code {code!r} mapped twice")
            codes[code] = (cat, gi)
    sizes = {cat: declared.get(cat, 0) for cat in CODE_CATEGORIES}
    for cat, gi in codes.values():
        if cat not in declared:
            sizes[cat] = max(sizes[cat], gi + 1)
    return FeatureTaxonomy(
        procedure_groups=[f"procedure_{g:03d}" for g in range(sizes["procedure"])],
        diagnosis_groups=[f"diagnosis_{g:03d}" for g in range(sizes["diagnosis"])],
        drug_groups=[f"drug_{g:03d}" for g in range(sizes["drug"])],
        codes=codes,
    )


def write_taxonomy(taxonomy: FeatureTaxonomy, fh: IO[str]) -> None:
    fh.write(f"#groups procedure={len(taxonomy.procedure_groups)} "
             f"diagnosis={len(taxonomy.diagnosis_groups)} drug={len(taxonomy.drug_groups)}\n")
    for code, (cat, gi) in taxonomy.codes.items():
        fh.write(f"{code}\t{cat}\t{gi}\n")


def assign_group(code: str, kind: str, taxonomy: FeatureTaxonomy) -> int | str:
    """Feature row of a claim code, or ``UNMAPPED``.

    Pharmacy claims map only to drug groups and medical claims only to
    procedure or diagnosis groups; anything else is unmapped.
    """
    hit = taxonomy.codes.get(code)
    if hit is None:
        return UNMAPPED
    cat, gi = hit
    if (kind == PHARMACY) != (cat == "drug"):
        return UNMAPPED
    return taxonomy.category_offset(cat) + gi


# --------------------------------------------------------------------------
# windowing


def _month_index(d: date) -> int:
    return d.year * 12 + d.month - 1


@dataclass(frozen=True)
class StudyWindowing:
    observation_start: date = date(2013, 10, 1)
    observation_end: date = date(2015, 9, 30)
    result_start: date = date(2015, 10, 1)
    result_end: date = date(2016, 9, 30)
    window_months: int = 1

    def __post_init__(self):
        if self.observation_start.day != 1:
            raise ValueError("observation_start must be the first day of a month")
        if self.window_months < 1:
            raise ValueError("window_months must be >= 1")
        if not self.observation_start <= self.observation_end < self.result_start <= self.result_end:
            raise ValueError("observation period must precede the result period without overlap")
        if self.T < 1:
            raise ValueError("observation period shorter than one window")

    @property
    def T(self) -> int:
        months = _month_index(self.observation_end) - _month_index(self.observation_start) + 1
        # a trailing partial month does not count as a whole window
        nxt = date.fromordinal(self.observation_end.toordinal() + 1)
        if nxt.day != 1:
            months -= 1
        return months // self.window_months

    def window_of(self, d: date) -> int | None:
        """Observation window index of a date, or None outside the whole windows."""
        if d < self.observation_start or d > self.observation_end:
            return None
        w = (_month_index(d) - _month_index(self.observation_start)) // self.window_months
        return w if w < self.T else None

    def in_result(self, d: date) -> bool:
        return self.result_start <= d <= self.result_end

    def result_months(self) -> int:
        return _month_index(self.result_end) - _month_index(self.result_start) + 1


# --------------------------------------------------------------------------
# matrices


@dataclass
class PatientMatrix:
    patient_id: str
    values: np.ndarray
    target_cost: float
    n_outside: int = 0
    n_unmapped: int = 0


def build_matrix(claims: Sequence[ClaimRecord], taxonomy: FeatureTaxonomy,
                 windowing: StudyWindowing, patient_id: str | None = None) -> PatientMatrix:
    """Aggregate one patient's claims into an F x T matrix and result-period target."""
    F, T = taxonomy.n_features, windowing.T
    cents = np.zeros((len(COST_CATEGORIES), T), dtype=np.int64)
    counts = np.zeros((F, T), dtype=np.int64)
    target_cents = 0
    outside = unmapped = 0
    pid = patient_id
    for c in claims:
        if pid is None:
            pid = c.patient_id
        elif c.patient_id != pid:
            raise ClaimsError(f"build_matrix: claim for {c.patient_id!r} in matrix of {pid!r}")
        if windowing.in_result(c.service_date):
            target_cents += c.paid_cents
            continue
        w = windowing.window_of(c.service_date)
        if w is None:
            outside += 1
            continue
        row = assign_group(c.code, c.kind, taxonomy)
        if row == UNMAPPED:
            unmapped += 1
            continue
        counts[row, w] += 1
        cents[COST_CATEGORIES.index(c.kind), w] += c.paid_cents
        if c.kind == MEDICAL and c.visit_place is not None:
            counts[taxonomy.visit_offset + VISIT_PLACES.index(c.visit_place), w] += 1
    if outside:
        log.warning("patient %s: %d claims outside both periods excluded", pid, outside)
    values = counts.astype(np.float64)
    values[taxonomy.cost_offset:taxonomy.procedure_offset] = cents / 100.0
    return PatientMatrix(pid or "", values, target_cents / 100.0, outside, unmapped)


@dataclass
class Cohort:
    """Stacked patient matrices: ``X`` is (N, F, T), ``y`` is (N,) dollars."""

    patient_ids: list[str]
    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.patient_ids)

    def subset(self, idx) -> "Cohort":
        idx = np.asarray(idx)
        return Cohort([self.patient_ids[i] for i in idx], self.X[idx], self.y[idx])


def build_cohort(claims: Iterable[ClaimRecord], taxonomy: FeatureTaxonomy, windowing: StudyWindowing,
                 patient_ids: Sequence[str] | None = None) -> Cohort:
    """Matrices for every patient, in ``patient_ids`` order (default: first appearance)."""
    by_patient: dict[str, list[ClaimRecord]] = defaultdict(list)
    order = []
    for c in claims:
        if c.patient_id not in by_patient:
            order.append(c.patient_id)
        by_patient[c.patient_id].append(c)
    ids = list(patient_ids) if patient_ids is not None else order
    X = np.zeros((len(ids), taxonomy.n_features, windowing.T))
    y = np.zeros(len(ids))
    for i, pid in enumerate(ids):
        m = build_matrix(by_patient.get(pid, ()), taxonomy, windowing, patient_id=pid)
        X[i] = m.values
        y[i] = m.target_cost
    return Cohort(ids, X, y)


# --------------------------------------------------------------------------
# matrix cache

CACHE_MAGIC = b"CCMX"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sHIII")


def write_cohort_cache(cohort: Cohort, path: str | Path) -> None:
    """Header (magic, version, F, T, N), row-major float64 matrices, targets, ids."""
    N, F, T = cohort.X.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, F, T, N))
        fh.write(np.ascontiguousarray(cohort.X, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(cohort.y, dtype="<f8").tobytes())
        for pid in cohort.patient_ids:
            raw = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def read_cohort_cache(path: str | Path) -> Cohort:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ClaimsError(f"{path}: truncated cohort cache")
    magic, version, F, T, N = _HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise ClaimsError(f"{path}: not a cohort cache")
    if version != CACHE_VERSION:
        raise ClaimsError(f"{path}: unsupported cache version {version}")
    off = _HEADER.size
    n_vals = N * F * T
    X = np.frombuffer(data, dtype="<f8", count=n_vals, offset=off).reshape(N, F, T).astype(np.float64)
    off += 8 * n_vals
    y = np.frombuffer(data, dtype="<f8", count=N, offset=off).astype(np.float64)
    off += 8 * N
    ids = []
    for _ in range(N):
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        ids.append(data[off:off + n].decode("utf-8"))
        off += n
    return Cohort(ids, X, y)
