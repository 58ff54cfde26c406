"""Binary checkpoint container.

Layout: ``b"CCNN"``, uint16 version, uint32 header length, a UTF-8 JSON header
(network spec, scalars, training summary and an array manifest), then each
array's raw little-endian bytes in manifest order.  The header is written with
sorted keys so equal states give equal bytes.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .network import ConvBlockSpec, NetworkSpec, NetworkState

MAGIC = b"CCNN"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class CheckpointError(ValueError):
    pass


def spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "n_features": spec.n_features,
        "n_windows": spec.n_windows,
        "dropout_rate": spec.dropout_rate,
        "blocks": [{"n_filters": b.n_filters, "k": b.k, "activation": b.activation} for b in spec.blocks],
    }


def spec_from_dict(d: dict) -> NetworkSpec:
    return NetworkSpec(d["n_features"], d["n_windows"],
                       tuple(ConvBlockSpec(**b) for b in d["blocks"]), d["dropout_rate"])


def _arrays(state: NetworkState):
    for name in state.params:
        yield f"param/{name}", state.params[name]
        yield f"m/{name}", state.m[name]
        yield f"v/{name}", state.v[name]
    if state.x_mean is not None:
        yield "x_mean", state.x_mean
        yield "x_inv_std", state.x_inv_std


def save_checkpoint(path: str | Path, spec: NetworkSpec, state: NetworkState, summary: dict | None = None) -> None:
    manifest, blobs = [], []
    for name, arr in _arrays(state):
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        manifest.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape)})
        blobs.append(le.tobytes())
    header = {
        "spec": spec_to_dict(spec),
        "step": state.step,
        "seed": state.seed,
        "y_center": state.y_center,
        "y_scale": state.y_scale,
        "target_transform": state.target_transform,
        "meta": state.meta,
        "summary": summary or {},
        "arrays": manifest,
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path: str | Path) -> tuple[NetworkSpec, NetworkState, dict]:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CheckpointError(f"{path}: truncated checkpoint")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[_PREFIX.size:_PREFIX.size + hlen])
    off = _PREFIX.size + hlen
    arrays = {}
    for entry in header["arrays"]:
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        a = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(entry["shape"])
        arrays[entry["name"]] = a.astype(dt.newbyteorder("="))
        off += count * dt.itemsize
    spec = spec_from_dict(header["spec"])
    names = [n[len("param/"):] for n in arrays if n.startswith("param/")]
    state = NetworkState(
        params={n: arrays[f"param/{n}"] for n in names},
        m={n: arrays[f"m/{n}"] for n in names},
        v={n: arrays[f"v/{n}"] for n in names},
        step=header["step"],
        x_mean=arrays.get("x_mean"),
        x_inv_std=arrays.get("x_inv_std"),
        y_center=header["y_center"],
        y_scale=header["y_scale"],
        target_transform=header["target_transform"],
        seed=header["seed"],
        meta=header["meta"],
    )
    return spec, state, header["summary"]
