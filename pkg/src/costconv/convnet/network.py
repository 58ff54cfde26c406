"""Network description, parameters, forward/backward passes and the Adam update."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    ACTIVATIONS,
    ShapeError,
    avg_pool,
    avg_pool_backward,
    conv_backward,
    conv_forward,
    dropout_forward,
)


@dataclass(frozen=True)
class ConvBlockSpec:
    n_filters: int
    k: int = 3
    activation: str = "lrelu"

    def __post_init__(self):
        if self.n_filters < 1:
            raise ValueError("n_filters must be positive")
        if not 1 <= self.k <= 9:
            raise ValueError(f"kernel width k must be in 1..9, got {self.k}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class NetworkSpec:
    n_features: int
    n_windows: int
    blocks: tuple[ConvBlockSpec, ...] = (ConvBlockSpec(128), ConvBlockSpec(64), ConvBlockSpec(32))
    dropout_rate: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        t = self.n_windows
        for i, b in enumerate(self.blocks):
            if b.k > t:
                raise ValueError(f"block {i}: k={b.k} exceeds its input length {t}")
            if t < 2:
                raise ValueError(f"block {i}: input length {t} too short to pool")
            t //= 2
        if self.flatten_size <= 0:
            raise ValueError("network flattens to zero values")

    def shapes(self) -> list[tuple[int, int]]:
        """(rows, time) after the input, then after each conv and each pool."""
        out = [(self.n_features, self.n_windows)]
        t = self.n_windows
        for b in self.blocks:
            out.append((b.n_filters, t))
            t //= 2
            out.append((b.n_filters, t))
        return out

    @property
    def flatten_size(self) -> int:
        r, t = self.shapes()[-1]
        return r * t

    def with_features(self, n_features: int) -> "NetworkSpec":
        return NetworkSpec(n_features, self.n_windows, self.blocks, self.dropout_rate)


def param_names(spec: NetworkSpec) -> list[str]:
    names = []
    for i in range(len(spec.blocks)):
        names += [f"block{i}.W", f"block{i}.b"]
    return names + ["dense.w", "dense.b"]


def param_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    shapes = {}
    rows = spec.n_features
    for i, b in enumerate(spec.blocks):
        shapes[f"block{i}.W"] = (b.n_filters, rows, b.k)
        shapes[f"block{i}.b"] = (b.n_filters,)
        rows = b.n_filters
    shapes["dense.w"] = (spec.flatten_size,)
    shapes["dense.b"] = (1,)
    return shapes


@dataclass
class NetworkState:
    """Parameters, Adam moments and the input/target normalisation used by ``forward``.

    ``x_mean``/``x_inv_std`` standardise each input row (inverse std is 0 for
    constant rows).  The network output is mapped back to dollars as
    ``inverse_transform(raw * y_scale + y_center)``.
    """

    params: dict[str, np.ndarray]
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    x_mean: np.ndarray | None = None
    x_inv_std: np.ndarray | None = None
    y_center: float = 0.0
    y_scale: float = 1.0
    target_transform: str = "identity"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def copy(self) -> "NetworkState":
        cp = lambda d: {k: a.copy() for k, a in d.items()}
        return NetworkState(
            cp(self.params), cp(self.m), cp(self.v), self.step,
            None if self.x_mean is None else self.x_mean.copy(),
            None if self.x_inv_std is None else self.x_inv_std.copy(),
            self.y_center, self.y_scale, self.target_transform, self.seed, dict(self.meta),
        )


def init_state(spec: NetworkSpec, seed: int = 0, zero: bool = False, dtype=np.float64) -> NetworkState:
    """Glorot-uniform weights, zero biases.  ``zero=True`` gives an all-zero network."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(spec).items():
        if zero or name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        if name == "dense.w":
            fan_in, fan_out = shape[0], 1
        else:
            n_f, rows, k = shape
            fan_in, fan_out = rows * k, n_f * k
        a = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-a, a, size=shape).astype(dtype)
    zeros = {k: np.zeros_like(p) for k, p in params.items()}
    return NetworkState(params, zeros, {k: z.copy() for k, z in zeros.items()}, seed=seed)


def forward_raw(params, spec: NetworkSpec, x, mode: str = "eval", rng=None):
    """Network output on already-normalised input, in normalised target units.

    Returns ``(output, cache)``; output is (batch,) for 3-D input and a scalar
    for a single matrix.
    """
    x = np.asarray(x)
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or xb.shape[1:] != (spec.n_features, spec.n_windows):
        raise ShapeError(f"expected input of shape ({spec.n_features}, {spec.n_windows}), got {x.shape[-2:]}")
    cache = {"blocks": [], "single": single,
             "shapes": {k: p.shape for k, p in params.items()}}
    h = xb
    for i, b in enumerate(spec.blocks):
        pre, cols = conv_forward(h, params[f"block{i}.W"], params[f"block{i}.b"], return_cols=True)
        act = ACTIVATIONS[b.activation][0](pre)
        pooled = avg_pool(act)
        cache["blocks"].append({"cols": cols, "pre": pre, "in_shape": h.shape})
        h = pooled
    flat = h.reshape(h.shape[0], -1)
    dropped, mask = dropout_forward(flat, spec.dropout_rate, mode, rng)
    out = dropped @ params["dense.w"] + params["dense.b"][0]
    cache.update(pooled_shape=h.shape, dropped=dropped, mask=mask)
    return (out[0] if single else out), cache


def backward(params, spec: NetworkSpec, cache, dout, input_grad: bool = True):
    """Gradients of a scalar loss given ``dout`` = dLoss/d(output).

    Returns a dict with one entry per parameter plus ``"input"`` (omitted when
    ``input_grad`` is false, which saves the first layer's input gradient).
    """
    shapes = {k: p.shape for k, p in params.items()}
    if shapes != cache["shapes"]:
        raise ShapeError("stale cache: parameter shapes differ from those used in forward")
    dout = np.atleast_1d(np.asarray(dout, dtype=cache["dropped"].dtype))
    if dout.shape[0] != cache["dropped"].shape[0]:
        raise ShapeError(f"output gradient has {dout.shape[0]} entries for a batch of {cache['dropped'].shape[0]}")
    grads = {"dense.w": cache["dropped"].T @ dout, "dense.b": np.array([dout.sum()])}
    dflat = np.outer(dout, params["dense.w"])
    if cache["mask"] is not None:
        dflat = dflat * cache["mask"]
    dh = dflat.reshape(cache["pooled_shape"])
    for i in reversed(range(len(spec.blocks))):
        b, bc = spec.blocks[i], cache["blocks"][i]
        dact = avg_pool_backward(dh, bc["pre"].shape[-1])
        dpre = dact * ACTIVATIONS[b.activation][1](bc["pre"])
        dh, dW, db = conv_backward(dpre, bc["cols"], params[f"block{i}.W"], bc["in_shape"],
                                   need_input=input_grad or i > 0)
        grads[f"block{i}.W"] = dW
        grads[f"block{i}.b"] = db
    if input_grad:
        grads["input"] = dh[0] if cache["single"] else dh
    return grads


def normalize_input(state: NetworkState, x):
    if state.x_mean is None:
        return x
    return (x - state.x_mean[:, None]) * state.x_inv_std[:, None]


def to_dollars(state: NetworkState, raw):
    t = np.asarray(raw, dtype=np.float64) * state.y_scale + state.y_center
    if state.target_transform == "log1p":
        return np.expm1(t)
    return t


def forward(state: NetworkState, spec: NetworkSpec, matrix, mode: str = "eval", rng=None):
    """Predicted dollars for one matrix or a batch, plus the activation cache."""
    dtype = next(iter(state.params.values())).dtype
    x = normalize_input(state, np.asarray(matrix, dtype=np.float64)).astype(dtype, copy=False)
    raw, cache = forward_raw(state.params, spec, x, mode, rng)
    return to_dollars(state, raw), cache


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(state: NetworkState, grads, config) -> NetworkState:
    """Bias-corrected Adam update of every parameter, in place; returns ``state``."""
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.eps
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in state.params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state
