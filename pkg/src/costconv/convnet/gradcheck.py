"""Central finite-difference check of the analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ConvBlockSpec, NetworkSpec, backward, forward_raw, init_state

# |analytic - numeric| / max(|analytic|, |numeric|, DENOM_FLOOR)
DENOM_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_rel_error: dict  # per parameter tensor
    tolerance: float

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance


def relative_error(a, n):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), DENOM_FLOOR)


def _loss(params, spec, x, target):
    out, _ = forward_raw(params, spec, x, "eval")
    return float(np.sum((out - target) ** 2))


def check_gradients(spec: NetworkSpec, params, x, target, h: float = 1e-4, tol: float = 1e-4,
                    include_input: bool = False) -> GradCheckReport:
    """Compare backward() with central differences of sum((out - target)^2), eval mode."""
    out, cache = forward_raw(params, spec, x, "eval")
    grads = backward(params, spec, cache, 2.0 * (out - target))
    report = {}
    tensors = dict(params)
    if include_input:
        tensors["input"] = x
    for name, arr in tensors.items():
        num = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gnum = num.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = _loss(params, spec, x, target)
            flat[i] = old - h
            down = _loss(params, spec, x, target)
            flat[i] = old
            gnum[i] = (up - down) / (2 * h)
        report[name] = float(relative_error(grads[name], num).max()) if arr.size else 0.0
    return GradCheckReport(report, tol)


def random_spec(rng: np.random.Generator, max_features: int = 10, max_windows: int = 16,
                max_blocks: int = 3, ks=(1, 3), max_filters: int = 4) -> NetworkSpec:
    n_blocks = int(rng.integers(0, max_blocks + 1))
    # each block halves time, so leave room for the pools
    min_t = max(2 ** n_blocks, 2)
    T = int(rng.integers(min_t, max(max_windows, min_t) + 1))
    F = int(rng.integers(1, max_features + 1))
    blocks = []
    t = T
    for _ in range(n_blocks):
        k = int(rng.choice([k for k in ks if k <= t]))
        blocks.append(ConvBlockSpec(int(rng.integers(1, max_filters + 1)), k, "lrelu"))
        t //= 2
    return NetworkSpec(F, T, tuple(blocks), dropout_rate=0.5)


def gradient_check(spec: NetworkSpec | None = None, seed: int = 0, h: float = 1e-4,
                   tol: float = 1e-4, zero: bool = False) -> GradCheckReport:
    """Gradient check of a (random, if ``spec`` is None) float64 network on random data.

    Dropout is disabled (eval mode) so the check is deterministic.
    """
    rng = np.random.default_rng(seed)
    if spec is None:
        spec = random_spec(rng)
    state = init_state(spec, seed=int(rng.integers(2 ** 31)), zero=zero, dtype=np.float64)
    if not zero:
        for name, p in state.params.items():
            if name.endswith(".b"):
                p[...] = rng.normal(0, 0.1, size=p.shape)
    x = rng.normal(size=(spec.n_features, spec.n_windows))
    target = float(rng.normal())
    return check_gradients(spec, state.params, x, target, h=h, tol=tol, include_input=True)
