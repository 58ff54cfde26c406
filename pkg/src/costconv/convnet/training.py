"""Mini-batch Adam training on mean squared error with early stopping."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..evalkit import mape
from .network import AdamConfig, NetworkSpec, NetworkState, adam_step, backward, forward_raw, init_state, to_dollars

log = logging.getLogger(__name__)


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 10
    seed: int = 0
    target_transform: str = "identity"
    input_normalization: str = "zscore"
    dtype: str = "float32"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.target_transform not in ("identity", "log1p"):
            raise ValueError(f"unknown target_transform {self.target_transform!r}")
        if self.input_normalization not in ("none", "zscore"):
            raise ValueError(f"unknown input_normalization {self.input_normalization!r}")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ValueError("batch_size and patience must be positive, max_epochs non-negative")

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.learning_rate, self.beta1, self.beta2, self.eps_adam)


@dataclass
class EpochLog:
    epoch: int
    train_mse: float
    val_mape: float


def _select(X, rows):
    return X if rows is None else X[:, rows, :]


def feature_stats(X, rows=None, chunk: int = 512):
    """Per-row mean and inverse std over patients and windows (inverse std 0 for constant rows)."""
    n = X.shape[0]
    F = X.shape[1] if rows is None else len(rows)
    total = np.zeros(F)
    for s in range(0, n, chunk):
        total += _select(X[s:s + chunk], rows).sum(axis=(0, 2))
    count = n * X.shape[2]
    mean = total / count
    ss = np.zeros(F)
    for s in range(0, n, chunk):
        d = _select(X[s:s + chunk], rows) - mean[:, None]
        ss += (d * d).sum(axis=(0, 2))
    std = np.sqrt(ss / count)
    inv = np.zeros(F)
    nz = std > 0
    inv[nz] = 1.0 / std[nz]
    return mean, inv


def transform_target(y, kind: str):
    y = np.asarray(y, dtype=np.float64)
    return np.log1p(y) if kind == "log1p" else y


def prepare_batch(state: NetworkState, X, idx, rows, dtype):
    xb = _select(X[idx], rows)
    if state.x_mean is not None:
        xb = (xb - state.x_mean[:, None]) * state.x_inv_std[:, None]
    return xb.astype(dtype, copy=False)


def predict(state: NetworkState, spec: NetworkSpec, X, rows=None, batch_size: int = 256) -> np.ndarray:
    """Eval-mode predictions in dollars for an (N, F, T) array."""
    dtype = next(iter(state.params.values())).dtype
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], batch_size):
        idx = np.arange(s, min(s + batch_size, X.shape[0]))
        raw, _ = forward_raw(state.params, spec, prepare_batch(state, X, idx, rows, dtype), "eval")
        out[idx] = to_dollars(state, raw)
    return out


def train(spec: NetworkSpec, config: TrainConfig, X_train, y_train, X_val, y_val, rows=None):
    """Fit a network; returns (best-validation state, per-epoch log).

    ``rows`` optionally restricts the input to a subset of feature rows, in
    which case ``spec.n_features`` must equal ``len(rows)``.
    """
    if len(y_train) == 0 or len(y_val) == 0:
        raise ValueError("training and validation sets must be non-empty")
    n_rows = X_train.shape[1] if rows is None else len(rows)
    if n_rows != spec.n_features or X_train.shape[2] != spec.n_windows:
        raise ValueError(f"data is {n_rows}x{X_train.shape[2]} but the network expects "
                         f"{spec.n_features}x{spec.n_windows}")
    dtype = np.dtype(config.dtype)
    init_ss, shuffle_ss, drop_ss = np.random.SeedSequence(config.seed).spawn(3)
    state = init_state(spec, seed=int(init_ss.generate_state(1)[0]), dtype=dtype)
    state.seed = config.seed
    if config.input_normalization == "zscore":
        state.x_mean, state.x_inv_std = feature_stats(X_train, rows)
    t = transform_target(y_train, config.target_transform)
    state.target_transform = config.target_transform
    state.y_center = float(t.mean())
    sd = float(t.std())
    state.y_scale = sd if sd > 0 else 1.0
    t_std = ((t - state.y_center) / state.y_scale).astype(dtype)

    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)
    n = len(y_train)
    history: list[EpochLog] = []
    best, best_mape, since_best = state.copy(), np.inf, 0
    # overflow surfaces as a non-finite loss below, so numpy's warnings are redundant
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.max_epochs + 1):
            perm = shuffle_rng.permutation(n)
            sq_sum = 0.0
            for bi, s in enumerate(range(0, n, config.batch_size)):
                idx = np.sort(perm[s:s + config.batch_size])
                xb = prepare_batch(state, X_train, idx, rows, dtype)
                out, cache = forward_raw(state.params, spec, xb, "train", drop_rng)
                err = out - t_std[idx]
                loss = float(np.mean(err.astype(np.float64) ** 2))
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite loss at epoch {epoch}, batch {bi}")
                grads = backward(state.params, spec, cache, 2.0 * err / len(idx), input_grad=False)
                adam_step(state, grads, config.adam)
                sq_sum += loss * len(idx)
            val_pred = predict(state, spec, X_val, rows)
            if not np.all(np.isfinite(val_pred)):
                raise NumericError(f"non-finite validation predictions at epoch {epoch}")
            val_mape = mape(y_val, val_pred)
            history.append(EpochLog(epoch, sq_sum / n, val_mape))
            log.debug("epoch %d train_mse %.5f val_mape %.4f", epoch, sq_sum / n, val_mape)
            if val_mape < best_mape:
                best, best_mape, since_best = state.copy(), val_mape, 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    break
    best.meta = {"best_val_mape": best_mape, "epochs_run": len(history)}
    return best, history


def write_training_log(history, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_mse,val_mape\n")
        for e in history:
            fh.write(f"{e.epoch},{e.train_mse!r},{e.val_mape!r}\n")
