"""Network assembly, parameter initialization and the checkpoint file format.

Architecture (both variants share everything after the first layer)::

    grid (400, 57)
      -> first layer: quantum 2x2 filter (qnn) or normalized classical 2x2 filter (cnn)
      -> ReLU -> 2x2 max pool                       (199, 28)
      -> conv 2x2, ``conv2_filters`` channels -> ReLU -> 2x2 max pool   (F, 99, 13)
      -> dense to one logit -> sigmoid

With the default four second-layer filters the classical model has 5174
parameters and the quantum one 5188.

Checkpoint layout (little-endian)::

    b"Q2CK" | uint32 format version | uint32 header length | header JSON (utf-8)
    | float64 blocks, in the order listed by header["blocks"]

The header records the model spec, its hash, epoch, seed, phase and the Adam
hyperparameters and step counter.  Blocks are named ``param/<name>``,
``adam_m/<name>`` and ``adam_v/<name>``.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from . import nn
from .ansatz import AnsatzParams
from .qconv import key_gradients, key_values, patch_keys

CHECKPOINT_MAGIC = b"Q2CK"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    variant: Literal["qnn", "cnn"] = "qnn"
    input_rows: int = 400
    input_cols: int = 57
    filter_rows: int = 2
    filter_cols: int = 2
    ansatz_layers: int = 3
    ansatz_qubits: int = 2
    pool: int = 2
    conv2_filters: int = 4
    conv2_rows: int = 2
    conv2_cols: int = 2

    def __post_init__(self):
        if self.variant not in ("qnn", "cnn"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.filter_rows * self.filter_cols != 2**self.ansatz_qubits:
            raise ValueError("first-layer filter size must equal 2**ansatz_qubits")

    def conv1_shape(self) -> tuple[int, int]:
        return self.input_rows - self.filter_rows + 1, self.input_cols - self.filter_cols + 1

    def flat_features(self) -> int:
        h, w = self.conv1_shape()
        h, w = h // self.pool, w // self.pool
        h, w = h - self.conv2_rows + 1, w - self.conv2_cols + 1
        return self.conv2_filters * (h // self.pool) * (w // self.pool)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        first = ({"conv1.theta": (self.ansatz_layers, self.ansatz_qubits, 3)}
                 if self.variant == "qnn"
                 else {"conv1.weight": (self.filter_rows, self.filter_cols)})
        return {
            **first,
            "conv1.bias": (),
            "conv2.weight": (self.conv2_filters, 1, self.conv2_rows, self.conv2_cols),
            "conv2.bias": (self.conv2_filters,),
            "dense.weight": (1, self.flat_features()),
            "dense.bias": (1,),
        }

    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.param_shapes().values())

    def spec_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def classical_filter(spec: ModelSpec, seed: int) -> np.ndarray:
    """The documented classical initializer for the first-layer filter."""
    rng = np.random.default_rng([seed, 2])
    return _uniform(rng, (spec.filter_rows, spec.filter_cols), spec.filter_rows * spec.filter_cols)


def init_params(spec: ModelSpec, seed: int) -> dict[str, np.ndarray]:
    """Seeded parameters; every layer after the first is drawn identically for both variants."""
    shared = np.random.default_rng([seed, 0])
    k1 = spec.filter_rows * spec.filter_cols
    k2 = spec.conv2_rows * spec.conv2_cols
    params = {
        "conv1.bias": _uniform(shared, (), k1),
        "conv2.weight": _uniform(shared, spec.param_shapes()["conv2.weight"], k2),
        "conv2.bias": _uniform(shared, (spec.conv2_filters,), k2),
        "dense.weight": _uniform(shared, (1, spec.flat_features()), spec.flat_features()),
        "dense.bias": _uniform(shared, (1,), spec.flat_features()),
    }
    if spec.variant == "qnn":
        theta_rng = np.random.default_rng([seed, 1])
        params["conv1.theta"] = AnsatzParams.uniform(
            theta_rng, spec.ansatz_layers, spec.ansatz_qubits).angles.copy()
    else:
        params["conv1.weight"] = classical_filter(spec, seed)
    return {k: np.asarray(params[k], dtype=float) for k in spec.param_shapes()}


def forward(params: dict[str, np.ndarray], spec: ModelSpec, grids: np.ndarray):
    """Batch forward pass. Returns (probabilities (B,), cache for ``backward``)."""
    fh, fw = spec.filter_rows, spec.filter_cols
    if spec.variant == "qnn":
        theta = AnsatzParams(params["conv1.theta"])
        keys = patch_keys(grids, fh, fw)
        z1 = key_values(keys, theta, fh, fw)[keys] + params["conv1.bias"]
        c1 = keys
    else:
        z1, c1 = nn.normalized_conv_forward(np.asarray(grids, dtype=float),
                                            params["conv1.weight"], params["conv1.bias"])
    a1 = nn.relu(z1)
    p1, cp1 = nn.maxpool_forward(a1, spec.pool)
    z2, c2 = nn.conv_forward(p1[:, None], params["conv2.weight"], params["conv2.bias"])
    a2 = nn.relu(z2)
    p2, cp2 = nn.maxpool_forward(a2, spec.pool)
    flat = p2.reshape(len(grids), -1)
    z3, c3 = nn.dense_forward(flat, params["dense.weight"], params["dense.bias"])
    prob = nn.sigmoid(z3[:, 0])
    return prob, (z1, c1, cp1, z2, c2, cp2, p2.shape, c3)


def backward(params: dict[str, np.ndarray], spec: ModelSpec, cache, dlogit: np.ndarray):
    """Gradients of the loss for every parameter, given dL/d(logit) per sample."""
    z1, c1, cp1, z2, c2, cp2, p2_shape, c3 = cache
    grads = {}
    dflat, grads["dense.weight"], grads["dense.bias"] = nn.dense_backward(dlogit[:, None], c3)
    da2 = nn.maxpool_backward(dflat.reshape(p2_shape), cp2)
    dz2 = nn.relu_backward(da2, z2)
    dp1, grads["conv2.weight"], grads["conv2.bias"] = nn.conv_backward(dz2, c2)
    da1 = nn.maxpool_backward(dp1[:, 0], cp1)
    dz1 = nn.relu_backward(da1, z1)
    if spec.variant == "qnn":
        keys = c1
        fh, fw = spec.filter_rows, spec.filter_cols
        per_key = np.bincount(keys.reshape(-1), weights=dz1.reshape(-1), minlength=2 ** (fh * fw))
        active = keys[dz1 != 0]
        table = key_gradients(active, AnsatzParams(params["conv1.theta"]), fh, fw)
        grads["conv1.theta"] = np.tensordot(per_key, table, axes=(0, 0))
        grads["conv1.bias"] = np.asarray(dz1.sum())
    else:
        _, grads["conv1.weight"], db = nn.normalized_conv_backward(dz1, c1)
        grads["conv1.bias"] = np.asarray(db)
    return grads


def predict(params: dict[str, np.ndarray], spec: ModelSpec, grids: np.ndarray,
            chunk: int = 256) -> np.ndarray:
    out = [forward(params, spec, grids[i:i + chunk])[0] for i in range(0, len(grids), chunk)]
    return np.concatenate(out) if out else np.zeros(0)


def loss_and_grads(params, spec: ModelSpec, grids: np.ndarray, labels: np.ndarray,
                   return_prob: bool = False):
    """Mean BCE over the batch and its gradients (and the predictions if asked)."""
    prob, cache = forward(params, spec, grids)
    losses = nn.bce_loss(prob, labels)
    dlogit = nn.bce_grad(prob, labels) * prob * (1 - prob) / len(labels)
    grads = backward(params, spec, cache, dlogit)
    if return_prob:
        return float(losses.mean()), grads, prob
    return float(losses.mean()), grads


@dataclass
class ModelCheckpoint:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    adam: nn.AdamState
    epoch: int = 0
    seed: int = 0
    phase: str = "quantum"
    meta: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, spec: ModelSpec, seed: int) -> ModelCheckpoint:
        params = init_params(spec, seed)
        phase = "quantum" if spec.variant == "qnn" else "classical"
        return cls(spec, params, nn.AdamState.for_params(params), 0, seed, phase)

    def param_count(self) -> int:
        return sum(int(np.size(p)) for p in self.params.values())

    def with_variant(self, variant: str) -> ModelSpec:
        return replace(self.spec, variant=variant)

    def save(self, path) -> None:
        names = list(self.spec.param_shapes())
        blocks = ([(f"param/{k}", self.params[k]) for k in names]
                  + [(f"adam_m/{k}", self.adam.m[k]) for k in names]
                  + [(f"adam_v/{k}", self.adam.v[k]) for k in names])
        header = {
            "format_version": CHECKPOINT_VERSION,
            "spec": asdict(self.spec),
            "spec_hash": self.spec.spec_hash(),
            "epoch": self.epoch,
            "seed": self.seed,
            "phase": self.phase,
            "meta": self.meta,
            "adam": {"t": self.adam.t, "lr": self.adam.lr, "beta1": self.adam.beta1,
                     "beta2": self.adam.beta2, "eps": self.adam.eps},
            "blocks": [{"name": n, "shape": list(np.shape(a))} for n, a in blocks],
        }
        raw = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(raw)) + raw)
            for _, a in blocks:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> ModelCheckpoint:
        data = Path(path).read_bytes()
        if data[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        version, hlen = struct.unpack("<II", data[4:12])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(data[12:12 + hlen])
        spec = ModelSpec(**header["spec"])
        if spec.spec_hash() != header["spec_hash"]:
            raise CheckpointError("model spec hash mismatch")
        offset = 12 + hlen
        arrays: dict[str, np.ndarray] = {}
        for block in header["blocks"]:
            count = int(np.prod(block["shape"]))
            a = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            arrays[block["name"]] = a.reshape(block["shape"]).astype(float)
            offset += 8 * count
        names = list(spec.param_shapes())
        adam = nn.AdamState({k: arrays[f"adam_m/{k}"] for k in names},
                            {k: arrays[f"adam_v/{k}"] for k in names}, **header["adam"])
        return cls(spec, {k: arrays[f"param/{k}"] for k in names}, adam,
                   header["epoch"], header["seed"], header["phase"], header.get("meta", {}))
