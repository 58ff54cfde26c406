"""Evaluation protocol: MAPE with the +$1 rule, equal-dollar cost buckets,
per-bucket classification metrics, penalty error, fold splits and paired
t-tests with Bonferroni correction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

N_BUCKETS = 5


class EvalError(ValueError):
    pass


def mape(actual, predicted, shift_mode: str = "both") -> float:
    """Mean absolute percentage error with one dollar added to every actual cost.

    ``shift_mode="both"`` compares the prediction with ``actual + 1`` and
    divides by ``actual + 1``; ``"denominator"`` keeps the unshifted actual in
    the numerator.
    """
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape:
        raise EvalError(f"{a.size} actual values but {p.size} predictions")
    if a.size == 0:
        raise EvalError("MAPE of an empty list")
    shifted = a + 1.0
    if shift_mode == "both":
        num = np.abs(shifted - p)
    elif shift_mode == "denominator":
        num = np.abs(a - p)
    else:
        raise ValueError(f"unknown shift_mode {shift_mode!r}")
    return float(np.mean(num / shifted))


@dataclass
class BucketScheme:
    """Four cutoffs c1 <= ... <= c4 and the fitted population's membership.

    ``membership`` holds the bucket (1..5) of each fitted patient in input order,
    decided by the cumulative-dollar sweep, so tied costs can be split across
    buckets there even though :func:`assign_bucket` sends ties to the lower one.
    """

    cutoffs: np.ndarray
    membership: np.ndarray = field(default=None, repr=False)
    total: float = 0.0
    n_fitted: int = 0


def fit_buckets(costs) -> BucketScheme:
    """Sweep ascending costs; bucket q closes with the patient whose inclusion
    first brings the running total to q/5 of the population total."""
    c = np.asarray(costs, dtype=np.float64)
    if c.size < N_BUCKETS:
        raise EvalError(f"need at least {N_BUCKETS} patients to fit buckets, got {c.size}")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise EvalError("bucket costs must be finite and non-negative")
    total = float(c.sum())
    if total <= 0:
        raise EvalError("degenerate population: total cost is zero")
    order = np.argsort(c, kind="stable")
    membership = np.empty(c.size, dtype=np.int64)
    cutoffs = []
    b, cum = 1, 0.0
    for i in order:
        membership[i] = b
        cum += c[i]
        while b < N_BUCKETS and cum * N_BUCKETS >= b * total:
            cutoffs.append(c[i])
            b += 1
    while len(cutoffs) < N_BUCKETS - 1:
        # rounding left the running total a hair short of the last quota
        cutoffs.append(c[order[-1]])
    return BucketScheme(np.array(cutoffs), membership, total, int(c.size))


def assign_bucket(cost, scheme: BucketScheme):
    """1 + number of cutoffs strictly below the cost (ties go to the lower bucket)."""
    out = 1 + np.searchsorted(scheme.cutoffs, np.asarray(cost, dtype=np.float64), side="left")
    return int(out) if np.ndim(out) == 0 else out.astype(np.int64)


@dataclass
class ClassificationMetrics:
    accuracy: float
    recall: list  # per bucket; None where no patient is actually in the bucket
    precision: list  # None where nothing was predicted into the bucket
    actual_counts: list
    predicted_counts: list
    correct_counts: list


def classification_metrics(actual_buckets, predicted_buckets) -> ClassificationMetrics:
    a = np.asarray(actual_buckets)
    p = np.asarray(predicted_buckets)
    if a.shape != p.shape:
        raise EvalError(f"{a.size} actual buckets but {p.size} predicted")
    if a.size == 0:
        raise EvalError("no patients")
    hit = a == p
    recall, precision, na, npred, nc = [], [], [], [], []
    for b in range(1, N_BUCKETS + 1):
        in_a, in_p = a == b, p == b
        correct = int(np.sum(hit & in_a))
        na.append(int(in_a.sum()))
        npred.append(int(in_p.sum()))
        nc.append(correct)
        recall.append(correct / na[-1] if na[-1] else None)
        precision.append(correct / npred[-1] if npred[-1] else None)
    return ClassificationMetrics(float(hit.mean()), recall, precision, na, npred, nc)


def default_penalty_matrix() -> np.ndarray:
    """|a - p|, doubled when the prediction is below the actual bucket.

    A placeholder with the right asymmetry; not the published penalty table.
    """
    a = np.arange(1, N_BUCKETS + 1)[:, None]
    p = np.arange(1, N_BUCKETS + 1)[None, :]
    d = np.abs(a - p).astype(np.float64)
    return np.where(a > p, 2 * d, d)


def check_penalty_matrix(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.shape != (N_BUCKETS, N_BUCKETS):
        raise EvalError(f"penalty matrix must be {N_BUCKETS}x{N_BUCKETS}, got {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise EvalError("penalty matrix entries must be finite and non-negative")
    if np.any(np.diag(P) != 0):
        raise EvalError("penalty matrix diagonal must be zero")
    return P


def read_penalty_matrix(path: str | Path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            rows.append([float(v) for v in line.split("\t")])
    return check_penalty_matrix(rows)


def write_penalty_matrix(P, path: str | Path) -> None:
    Path(path).write_text("".join("\t".join(repr(float(v)) for v in row) + "\n" for row in np.asarray(P)))


def penalty_error(actual_buckets, predicted_buckets, P=None):
    """Mean of P[actual][predicted] overall and within each actual bucket (None if empty)."""
    P = default_penalty_matrix() if P is None else check_penalty_matrix(P)
    a = np.asarray(actual_buckets)
    p = np.asarray(predicted_buckets)
    if a.shape != p.shape:
        raise EvalError(f"{a.size} actual buckets but {p.size} predicted")
    if a.size == 0:
        raise EvalError("no patients")
    pen = P[a - 1, p - 1]
    per = [float(pen[a == b].mean()) if np.any(a == b) else None for b in range(1, N_BUCKETS + 1)]
    return float(pen.mean()), per


def kfold_split(n: int, k: int = 20, seed: int = 0) -> list[np.ndarray]:
    """Seeded shuffle of range(n) cut into k folds whose sizes differ by at most one."""
    if k < 1 or n < k:
        raise EvalError(f"cannot split {n} items into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass
class TTestResult:
    t: float | None
    p: float | None
    n: int

    @property
    def no_difference(self) -> bool:
        return self.t is None


def paired_ttest(a, b) -> TTestResult:
    """Two-sided paired t-test on d = a - b.

    Zero-variance differences leave t undefined; the result then reports no
    difference detected (``t`` and ``p`` are None).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise EvalError("paired t-test needs two vectors of equal length")
    n = a.size
    if n < 2:
        raise EvalError("paired t-test needs at least two pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        return TTestResult(None, None, n)
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    return TTestResult(t, t_two_sided_p(t, n - 1), n)


def t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    # the two tails together equal the regularised incomplete beta I_x(df/2, 1/2), x = df/(df+t^2)
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def bonferroni(p_values, alpha: float = 0.05, m: int | None = None) -> list[bool]:
    """Flag p < alpha / m; ``m`` defaults to the number of p-values. None never passes."""
    m = len(p_values) if m is None else m
    thr = alpha / m
    return [p is not None and p < thr for p in p_values]


# --------------------------------------------------------------------------
# full report


@dataclass
class EvalReport:
    method: str
    n: int
    mape: float
    bucket_mape: list
    accuracy: float
    recall: list
    precision: list
    penalty: float
    bucket_penalty: list
    bucket_counts: list
    fold_mape: np.ndarray
    mae: float  # dollars; synthetic data only, not a published metric
    significance: dict = field(default_factory=dict)

    def rows(self):
        """(method, bucket, metric, value) rows; undefined values are None."""
        out = [
            (self.method, "all", "mape", self.mape),
            (self.method, "all", "accuracy", self.accuracy),
            (self.method, "all", "penalty_error", self.penalty),
            (self.method, "all", "n", self.n),
            (self.method, "all", "fold_mape_mean", float(np.mean(self.fold_mape))),
            (self.method, "all", "mae_dollars_nonpaper", self.mae),
        ]
        for b in range(N_BUCKETS):
            key = str(b + 1)
            out += [
                (self.method, key, "mape", self.bucket_mape[b]),
                (self.method, key, "recall", self.recall[b]),
                (self.method, key, "precision", self.precision[b]),
                (self.method, key, "penalty_error", self.bucket_penalty[b]),
                (self.method, key, "n", self.bucket_counts[b]),
            ]
        return out


def evaluate(method: str, actual, predicted, scheme: BucketScheme, folds, P=None,
             shift_mode: str = "both") -> EvalReport:
    """Overall and per-bucket metrics of one method on a holdout set.

    ``folds`` are index arrays partitioning the holdout; each yields one MAPE
    value for the paired tests.
    """
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise EvalError(f"{method}: non-finite predictions")
    ab = assign_bucket(a, scheme)
    pb = assign_bucket(p, scheme)
    cm = classification_metrics(ab, pb)
    pen, per = penalty_error(ab, pb, P)
    bucket_mape = [mape(a[ab == b], p[ab == b], shift_mode) if np.any(ab == b) else None
                   for b in range(1, N_BUCKETS + 1)]
    fold_mape = np.array([mape(a[f], p[f], shift_mode) for f in folds])
    return EvalReport(
        method=method, n=int(a.size), mape=mape(a, p, shift_mode), bucket_mape=bucket_mape,
        accuracy=cm.accuracy, recall=cm.recall, precision=cm.precision, penalty=pen,
        bucket_penalty=per, bucket_counts=cm.actual_counts, fold_mape=fold_mape,
        mae=float(np.mean(np.abs(a - p))),
    )


def format_value(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_report_csv(reports, path: str | Path) -> None:
    lines = ["method,bucket,metric,value"]
    for r in reports:
        for method, bucket, metric, value in r.rows():
            lines.append(f"{method},{bucket},{metric},{format_value(value)}")
    Path(path).write_text("\n".join(lines) + "\n")


def significance_table(reference: EvalReport, others, alpha: float = 0.05, m: int | None = None):
    """Paired t-tests of the reference's fold MAPEs against each other method, Bonferroni-corrected.

    ``m`` defaults to the number of comparisons.
    """
    tests = [(o.method, paired_ttest(reference.fold_mape, o.fold_mape)) for o in others]
    flags = bonferroni([t.p for _, t in tests], alpha=alpha, m=m or max(len(tests), 1))
    return [(f"{reference.method} vs {name}", t.t, t.p, flag) for (name, t), flag in zip(tests, flags)]


def write_significance_csv(rows, path: str | Path) -> None:
    lines = ["pair,t,p,significant"]
    for pair, t, p, sig in rows:
        lines.append(f"{pair},{format_value(t)},{format_value(p)},{'yes' if sig else 'no'}")
    Path(path).write_text("\n".join(lines) + "\n")
