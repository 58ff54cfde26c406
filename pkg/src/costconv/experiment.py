"""Experiment runner: cohort, splits, CNN and baselines, reports and sweeps.

Configuration is a flat ``key = value`` text file (``#`` starts a comment);
every key is a field of :class:`ExperimentConfig`.  Relative output
directories are resolved under ``$COSTCONV_OUT`` when it is set.
"""
from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import logging
import os
import platform
import zlib
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from . import evalkit
from .baselines.gbt import GbtConfig
from .baselines.karmalego import mine_tirps, write_tirps
from .baselines.symbolic import SymbolicConfig, abstract_cohort, fit_symbolic, select_rows
from .claims import (
    Cohort,
    FeatureTaxonomy,
    StudyWindowing,
    build_cohort,
    mini_taxonomy,
    read_claims,
    read_cohort_cache,
    read_taxonomy,
    synthetic_taxonomy,
)
from .cohort import ARCHETYPES, CohortSpec, generate_cohort
from .convnet import ConvBlockSpec, NetworkSpec, TrainConfig, predict, save_checkpoint, train
from .convnet.training import write_training_log

log = logging.getLogger(__name__)

OUT_ENV = "COSTCONV_OUT"
ABLATION_CATEGORIES = ("cost", "visit", "medical")
SWEEP_AXES = ("k", "blocks", "activation", "dropout")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "run"
    # cohort source: synthetic | claims | cache
    source: str = "synthetic"
    n_patients: int = 5000
    noise_level: float = 0.25
    archetype_mix: str = ""
    taxonomy: str = "default"  # default | mini | path to a taxonomy TSV
    claims_path: str = ""
    cache_path: str = ""
    observation_start: str = "2013-10-01"
    observation_end: str = "2015-09-30"
    result_start: str = "2015-10-01"
    result_end: str = "2016-09-30"
    window_months: int = 1
    # network
    blocks: str = "128,64,32"
    k: int = 3
    k_deep: int = 3
    activation: str = "lrelu"
    dropout: float = 0.5
    # training
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 10
    target_transform: str = "identity"
    input_normalization: str = "zscore"
    dtype: str = "float32"
    # methods
    cnn: bool = True
    tirp_gbt: bool = True
    global_mean: bool = True
    external_predictions: str = ""
    ablations: str = "cost"
    # symbolic baseline
    top_medical: int = 20
    min_support: float = 0.6
    max_tirp_size: int = 3
    epsilon: int = 0
    mine_max_entities: int = 0
    gbt_trees: int = 100
    gbt_depth: int = 3
    gbt_shrinkage: float = 0.1
    gbt_min_leaf: int = 5
    # evaluation
    test_fraction: float = 0.3
    val_fraction: float = 0.2
    n_folds: int = 20
    alpha: float = 0.05
    bonferroni_m: int = 0  # 0: number of comparisons
    penalty_matrix: str = ""
    shift_mode: str = "both"
    # sweep
    sweep_mode: str = "sequential"  # sequential | grid
    sweep_order: str = "k,blocks,activation,dropout"
    sweep_iterate: bool = False
    grid_k: str = ""
    grid_blocks: str = ""  # ';'-separated filter lists, e.g. 128,64,32;64,32
    grid_activation: str = ""
    grid_dropout: str = ""

    def __post_init__(self):
        if self.source not in ("synthetic", "claims", "cache"):
            raise ConfigError(f"source must be synthetic, claims or cache, not {self.source!r}")
        if self.source == "claims" and not self.claims_path:
            raise ConfigError("source=claims needs claims_path")
        if self.source == "cache" and not self.cache_path:
            raise ConfigError("source=cache needs cache_path")
        if not 0 < self.test_fraction < 1 or not 0 < self.val_fraction < 1:
            raise ConfigError("test_fraction and val_fraction must lie in (0, 1)")
        if self.sweep_mode not in ("sequential", "grid"):
            raise ConfigError(f"sweep_mode must be sequential or grid, not {self.sweep_mode!r}")
        for name in self.ablation_list():
            if name not in ABLATION_CATEGORIES:
                raise ConfigError(f"unknown ablation {name!r}; choose from {', '.join(ABLATION_CATEGORIES)}")
        for axis in self.sweep_axes():
            if axis not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {axis!r}")
        self.filters()

    # -- parsing ---------------------------------------------------------

    def filters(self) -> tuple[int, ...]:
        return _parse_filters(self.blocks)

    def ablation_list(self) -> list[str]:
        return [s.strip() for s in self.ablations.split(",") if s.strip()]

    def sweep_axes(self) -> list[str]:
        return [s.strip() for s in self.sweep_order.split(",") if s.strip()]

    def grid(self, axis: str) -> list:
        raw = getattr(self, f"grid_{axis}").strip()
        if not raw:
            return []
        if axis == "blocks":
            return [_parse_filters(part) for part in raw.split(";") if part.strip()]
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        try:
            return [{"k": int, "dropout": float, "activation": str}[axis](p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"grid_{axis}: {exc}") from None

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format_field(getattr(self, f.name))}\n" for f in dataclasses.fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _parse_filters(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"blocks must be comma-separated filter counts, got {text!r}") from None
    if any(n < 1 for n in out):
        raise ConfigError(f"filter counts must be positive, got {text!r}")
    return out


def _format_field(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def coerce(key: str, raw: str):
    """Convert a text value to the type of field ``key``."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = type(_FIELDS[key].default)
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}, line {lineno}: expected key = value")
        key = key.strip()
        values[key] = coerce(key, value)
    return values


# Both presets fit on log1p costs: MSE on the log scale tracks the relative error that MAPE scores.
PRESETS = {
    "paper-shape": {"target_transform": "log1p"},
    "mini": {"n_patients": 600, "taxonomy": "mini", "max_epochs": 8, "patience": 4,
             "n_folds": 10, "top_medical": 10, "target_transform": "log1p"},
}


def make_config(preset: str = "paper-shape", path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Preset values, then a config file, then explicit overrides."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    values = dict(PRESETS[preset])
    if path:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
    values.update(overrides or {})
    return ExperimentConfig(**values)


def output_dir(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    root = os.environ.get(OUT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def sub_seed(seed: int, name: str) -> int:
    """Independent integer seed for one named use of the global seed."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# --------------------------------------------------------------------------
# cohort


def load_taxonomy(config: ExperimentConfig) -> FeatureTaxonomy:
    if config.taxonomy == "default":
        return synthetic_taxonomy()
    if config.taxonomy == "mini":
        return mini_taxonomy()
    return read_taxonomy(config.taxonomy)


def windowing_of(config: ExperimentConfig) -> StudyWindowing:
    try:
        return StudyWindowing(
            date.fromisoformat(config.observation_start), date.fromisoformat(config.observation_end),
            date.fromisoformat(config.result_start), date.fromisoformat(config.result_end),
            config.window_months,
        )
    except ValueError as exc:
        raise ConfigError(f"windowing: {exc}") from None


def parse_mix(text: str) -> dict[str, float]:
    mix = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, p = part.partition(":")
        if name.strip() not in ARCHETYPES:
            raise ConfigError(f"archetype_mix: unknown archetype {name.strip()!r}")
        mix[name.strip()] = float(p)
    return mix


def cohort_spec(config: ExperimentConfig) -> CohortSpec:
    kwargs = {}
    if config.archetype_mix.strip():
        kwargs["archetype_mix"] = parse_mix(config.archetype_mix)
    try:
        return CohortSpec(config.n_patients, seed=config.seed, noise_level=config.noise_level,
                          windowing=windowing_of(config), taxonomy=load_taxonomy(config), **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_cohort(config: ExperimentConfig) -> tuple[Cohort, FeatureTaxonomy]:
    taxonomy = load_taxonomy(config)
    if config.source == "synthetic":
        spec = cohort_spec(config)
        claims, labels = generate_cohort(spec)
        cohort = build_cohort(claims, spec.taxonomy, spec.windowing, patient_ids=list(labels))
    elif config.source == "claims":
        cohort = build_cohort(read_claims(config.claims_path), taxonomy, windowing_of(config))
    else:
        cohort = read_cohort_cache(config.cache_path)
        if cohort.X.shape[1] != taxonomy.n_features:
            raise ValueError(f"{config.cache_path}: {cohort.X.shape[1]} feature rows but the taxonomy "
                             f"defines {taxonomy.n_features}")
    return cohort, taxonomy


@dataclass
class Split:
    fit: np.ndarray  # CNN training patients
    val: np.ndarray  # early-stopping / selection patients, carved out of the training share
    test: np.ndarray

    @property
    def train(self) -> np.ndarray:
        return np.sort(np.concatenate([self.fit, self.val]))


def split_cohort(n: int, config: ExperimentConfig) -> Split:
    rng = np.random.default_rng(sub_seed(config.seed, "split"))
    perm = rng.permutation(n)
    n_test = int(round(n * config.test_fraction))
    n_train = n - n_test
    n_val = int(round(n_train * config.val_fraction))
    if n_test < config.n_folds or n_val < 1 or n_train - n_val < 1:
        raise ConfigError(f"a cohort of {n} patients is too small for this split "
                          f"(test {n_test}, folds {config.n_folds}, validation {n_val})")
    test = np.sort(perm[:n_test])
    val = np.sort(perm[n_test:n_test + n_val])
    fit = np.sort(perm[n_test + n_val:])
    return Split(fit, val, test)


# --------------------------------------------------------------------------
# methods


def network_spec(config: ExperimentConfig, n_features: int, n_windows: int, **point) -> NetworkSpec:
    filters = point.get("blocks", config.filters())
    k = point.get("k", config.k)
    act = point.get("activation", config.activation)
    blocks = tuple(ConvBlockSpec(nf, k if i == 0 else config.k_deep, act) for i, nf in enumerate(filters))
    return NetworkSpec(n_features, n_windows, blocks, point.get("dropout", config.dropout))


def train_config(config: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        learning_rate=config.learning_rate, batch_size=config.batch_size, max_epochs=config.max_epochs,
        patience=config.patience, seed=sub_seed(config.seed, "cnn"), target_transform=config.target_transform,
        input_normalization=config.input_normalization, dtype=config.dtype,
    )


def symbolic_config(config: ExperimentConfig) -> SymbolicConfig:
    return SymbolicConfig(
        top_medical=config.top_medical, min_vertical_support=config.min_support, max_size=config.max_tirp_size,
        epsilon=config.epsilon, max_mining_entities=config.mine_max_entities, seed=sub_seed(config.seed, "mine"),
        target_transform=config.target_transform,
        gbt=GbtConfig(config.gbt_trees, config.gbt_depth, config.gbt_shrinkage, config.gbt_min_leaf),
    )


def kept_rows(taxonomy: FeatureTaxonomy, drop: str | None) -> np.ndarray | None:
    if drop is None:
        return None
    return np.setdiff1d(np.arange(taxonomy.n_features), taxonomy.rows(drop))


def fit_cnn(config, cohort: Cohort, split: Split, taxonomy, rows=None, **point):
    n_rows = cohort.X.shape[1] if rows is None else len(rows)
    spec = network_spec(config, n_rows, cohort.X.shape[2], **point)
    X_fit, X_val = cohort.X[split.fit], cohort.X[split.val]
    state, history = train(spec, train_config(config), X_fit, cohort.y[split.fit], X_val, cohort.y[split.val],
                           rows=rows)
    if rows is not None:
        state.meta["rows"] = [int(r) for r in rows]
    return spec, state, history


def read_predictions(path: str | Path) -> dict[str, float]:
    """``patient_id<TAB>predicted_dollars`` lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}, line {lineno}: expected patient_id<TAB>prediction")
            try:
                value = float(parts[1])
            except ValueError:
                raise ValueError(f"{path}, line {lineno}: prediction {parts[1]!r} is not a number") from None
            if not np.isfinite(value):
                raise ValueError(f"{path}, line {lineno}: prediction is not finite")
            out[parts[0]] = value
    return out


def predictions_for(ids, predictions: dict[str, float]) -> np.ndarray:
    missing = [pid for pid in ids if pid not in predictions]
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise ValueError(f"predictions missing for {len(missing)} patient(s): {shown}")
    return np.array([predictions[pid] for pid in ids])


def penalty_of(config: ExperimentConfig):
    if config.penalty_matrix:
        return evalkit.read_penalty_matrix(config.penalty_matrix)
    return evalkit.default_penalty_matrix()


# --------------------------------------------------------------------------
# experiment


@dataclass
class ExperimentResult:
    reports: list
    significance: list
    out_dir: Path
    split: Split
    scheme: evalkit.BucketScheme

    def report(self, method: str) -> evalkit.EvalReport:
        for r in self.reports:
            if r.method == method:
                return r
        raise KeyError(method)


def _versions() -> dict:
    from importlib import metadata

    import scipy

    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"artifact": pkg, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(config: ExperimentConfig, out: Path, extra: dict | None = None) -> None:
    manifest = {"config": {f.name: getattr(config, f.name) for f in dataclasses.fields(config)},
                "config_sha256": config.digest(), "versions": _versions()}
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_fold_csv(reports, path: Path) -> None:
    lines = ["method,fold,mape"]
    for r in reports:
        lines += [f"{r.method},{i + 1},{evalkit.format_value(v)}" for i, v in enumerate(r.fold_mape)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig, cohort: Cohort | None = None,
                   taxonomy: FeatureTaxonomy | None = None) -> ExperimentResult:
    """Train every enabled method on the training share and score it on the holdout.

    Writes report.csv, folds.csv, significance.csv, manifest.json, one
    checkpoint and training log per network and the mined TIRPs.
    """
    if cohort is None:
        cohort, taxonomy = load_cohort(config)
    out = output_dir(config)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "logs").mkdir(parents=True, exist_ok=True)

    split = split_cohort(len(cohort), config)
    y = cohort.y
    scheme = evalkit.fit_buckets(y[split.train])
    folds = evalkit.kfold_split(len(split.test), config.n_folds, sub_seed(config.seed, "folds"))
    P = penalty_of(config)
    actual = y[split.test]
    X_test = cohort.X[split.test]
    test_ids = [cohort.patient_ids[i] for i in split.test]

    def score(method, pred):
        return evalkit.evaluate(method, actual, pred, scheme, folds, P, config.shift_mode)

    reports = []
    networks = [("cnn", None)] if config.cnn else []
    networks += [(f"cnn_no_{cat}", cat) for cat in config.ablation_list()]
    for name, drop in networks:
        rows = kept_rows(taxonomy, drop)
        spec, state, history = fit_cnn(config, cohort, split, taxonomy, rows)
        save_checkpoint(out / "checkpoints" / f"{name}.ccnn", spec, state,
                        {"method": name, "best_val_mape": state.meta["best_val_mape"],
                         "epochs_run": state.meta["epochs_run"]})
        write_training_log(history, out / "logs" / f"{name}.csv")
        reports.append(score(name, predict(state, spec, X_test, rows)))
        log.info("%s holdout MAPE %.4f", name, reports[-1].mape)

    if config.tirp_gbt:
        model = fit_symbolic(cohort.X[split.train], y[split.train], taxonomy, symbolic_config(config))
        with open(out / "tirps.tsv", "w", encoding="utf-8") as fh:
            write_tirps(model.tirps, fh)
        reports.append(score("tirp_gbt", model.predict(X_test)))
        log.info("tirp_gbt holdout MAPE %.4f (%d TIRPs)", reports[-1].mape, len(model.tirps))

    if config.global_mean:
        reports.append(score("global_mean", np.full(actual.size, float(np.mean(y[split.train])))))

    if config.external_predictions:
        reports.append(score("external", predictions_for(test_ids, read_predictions(config.external_predictions))))

    if not reports:
        raise ConfigError("no method enabled")
    evalkit.write_report_csv(reports, out / "report.csv")
    write_fold_csv(reports, out / "folds.csv")
    significance = []
    if len(reports) > 1:
        significance = evalkit.significance_table(reports[0], reports[1:], config.alpha,
                                                  m=config.bonferroni_m or None)
    evalkit.write_significance_csv(significance, out / "significance.csv")
    write_manifest(config, out, {"n_patients": len(cohort), "n_train": int(split.train.size),
                                 "n_test": int(split.test.size),
                                 "bucket_cutoffs": [float(c) for c in scheme.cutoffs]})
    return ExperimentResult(reports, significance, out, split, scheme)


def run_mining(config: ExperimentConfig, cohort: Cohort | None = None, taxonomy: FeatureTaxonomy | None = None):
    """Mine TIRPs on the training share only and write them to tirps.tsv."""
    if cohort is None:
        cohort, taxonomy = load_cohort(config)
    out = output_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    split = split_cohort(len(cohort), config)
    X_train = cohort.X[split.train]
    sc = symbolic_config(config)
    entities = abstract_cohort(X_train, select_rows(taxonomy, X_train, sc.top_medical))
    tirps = mine_tirps(entities, sc.min_vertical_support, sc.max_size, sc.epsilon)
    with open(out / "tirps.tsv", "w", encoding="utf-8") as fh:
        write_tirps(tirps, fh)
    return tirps


def score_external(predictions_path: str | Path, cohort: Cohort, config: ExperimentConfig):
    """Full report of an external prediction file over every patient of ``cohort``.

    Buckets are fitted on the cohort's own actual costs.
    """
    pred = predictions_for(cohort.patient_ids, read_predictions(predictions_path))
    scheme = evalkit.fit_buckets(cohort.y)
    folds = evalkit.kfold_split(len(cohort), min(config.n_folds, len(cohort)), sub_seed(config.seed, "folds"))
    return evalkit.evaluate("external", cohort.y, pred, scheme, folds, penalty_of(config), config.shift_mode)


# --------------------------------------------------------------------------
# sweeps


SWEEP_COLUMNS = ("round", "axis", "k", "blocks", "activation", "dropout", "val_mape", "holdout_mape",
                 "holdout_accuracy", "holdout_penalty_error", "selected")


@dataclass
class SweepRow:
    round: int
    axis: str
    point: dict
    val_mape: float
    report: evalkit.EvalReport
    selected: bool = False

    def cells(self) -> list[str]:
        p = self.point
        f = evalkit.format_value
        return [str(self.round), self.axis, str(p["k"]), "-".join(map(str, p["blocks"])), p["activation"],
                f(p["dropout"]), f(self.val_mape), f(self.report.mape), f(self.report.accuracy),
                f(self.report.penalty), "yes" if self.selected else "no"]


def _point_key(point: dict):
    return tuple(point[a] for a in SWEEP_AXES)


def run_sweep(config: ExperimentConfig, cohort: Cohort | None = None,
              taxonomy: FeatureTaxonomy | None = None) -> list[SweepRow]:
    """Tune (k, blocks, activation, dropout) by validation MAPE on the split used by run_experiment.

    Sequential mode varies one axis at a time in ``sweep_order``, keeping the
    best value before moving on; with ``sweep_iterate`` it repeats rounds until
    nothing changes.  Grid mode evaluates the full product.  Every evaluated
    point also carries its holdout metrics, which play no part in selection.
    """
    axes = config.sweep_axes()
    grids = {a: config.grid(a) for a in axes}
    if not any(grids.values()):
        raise ConfigError("sweep needs at least one nonempty grid_* entry")
    if cohort is None:
        cohort, taxonomy = load_cohort(config)
    out = output_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    split = split_cohort(len(cohort), config)
    scheme = evalkit.fit_buckets(cohort.y[split.train])
    folds = evalkit.kfold_split(len(split.test), config.n_folds, sub_seed(config.seed, "folds"))
    P = penalty_of(config)
    X_test, actual = cohort.X[split.test], cohort.y[split.test]
    cache: dict = {}

    def evaluate_point(point):
        key = _point_key(point)
        if key not in cache:
            spec, state, _ = fit_cnn(config, cohort, split, taxonomy, **point)
            report = evalkit.evaluate("cnn", actual, predict(state, spec, X_test), scheme, folds, P,
                                      config.shift_mode)
            cache[key] = (state.meta["best_val_mape"], report)
        return cache[key]

    base = {"k": config.k, "blocks": config.filters(), "activation": config.activation, "dropout": config.dropout}
    rows: list[SweepRow] = []
    if config.sweep_mode == "grid":
        values = [grids[a] or [base[a]] for a in axes]
        for combo in itertools.product(*values):
            point = dict(base, **dict(zip(axes, combo)))
            v, rep = evaluate_point(point)
            rows.append(SweepRow(1, "grid", point, v, rep))
        best = min(range(len(rows)), key=lambda i: rows[i].val_mape)
        rows[best].selected = True
    else:
        current = dict(base)
        for rnd in range(1, (len(axes) + 2 if config.sweep_iterate else 2)):
            before = dict(current)
            for axis in axes:
                if not grids[axis]:
                    continue
                axis_rows = []
                for value in grids[axis]:
                    point = dict(current, **{axis: value})
                    v, rep = evaluate_point(point)
                    axis_rows.append(SweepRow(rnd, axis, point, v, rep))
                best = min(range(len(axis_rows)), key=lambda i: axis_rows[i].val_mape)
                axis_rows[best].selected = True
                current = axis_rows[best].point
                rows += axis_rows
            if current == before:
                break
    write_sweep_csv(rows, out / "sweep.csv")
    write_manifest(config, out)
    return rows


def write_sweep_csv(rows, path: Path) -> None:
    lines = [",".join(SWEEP_COLUMNS)] + [",".join(r.cells()) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
