"""Quantum-to-classical conversion of the first-layer filter, and its random-filter control."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import nn
from .ansatz import AnsatzParams, first_column
from .model import ModelCheckpoint, classical_filter


class TransferError(ValueError):
    pass


def extract_weights(theta: AnsatzParams, fh: int = 2, fw: int = 2) -> np.ndarray:
    """Real part of the ansatz state's amplitudes, as a row-major filter."""
    if fh * fw != 2**theta.n_qubits:
        raise TransferError(f"{theta.n_qubits}-qubit ansatz cannot fill a {fh}x{fw} filter")
    return np.real(first_column(theta)).reshape(fh, fw).copy()


def _swap_filter(ckpt: ModelCheckpoint, weight: np.ndarray, phase: str) -> ModelCheckpoint:
    if ckpt.spec.variant != "qnn":
        raise TransferError(f"expected a qnn checkpoint, got {ckpt.spec.variant!r}")
    spec = replace(ckpt.spec, variant="cnn")
    params = {}
    m, v = {}, {}
    for name in spec.param_shapes():
        if name == "conv1.weight":
            params[name] = np.asarray(weight, dtype=float).copy()
            # moments of the angles have no image in weight space
            m[name] = np.zeros_like(params[name])
            v[name] = np.zeros_like(params[name])
        else:
            params[name] = ckpt.params[name].copy()
            m[name] = ckpt.adam.m[name].copy()
            v[name] = ckpt.adam.v[name].copy()
    adam = nn.AdamState(m, v, ckpt.adam.t, ckpt.adam.lr, ckpt.adam.beta1,
                        ckpt.adam.beta2, ckpt.adam.eps)
    return ModelCheckpoint(spec, params, adam, ckpt.epoch, ckpt.seed, phase, dict(ckpt.meta))


def transfer_checkpoint(ckpt: ModelCheckpoint) -> ModelCheckpoint:
    theta = AnsatzParams(ckpt.params["conv1.theta"]) if "conv1.theta" in ckpt.params else None
    if theta is None:
        raise TransferError(f"expected a qnn checkpoint, got {ckpt.spec.variant!r}")
    w = extract_weights(theta, ckpt.spec.filter_rows, ckpt.spec.filter_cols)
    return _swap_filter(ckpt, w, "classical")


def ablate_checkpoint(ckpt: ModelCheckpoint, seed: int) -> ModelCheckpoint:
    """Same rewrite as ``transfer_checkpoint`` but with a freshly initialized filter."""
    return _swap_filter(ckpt, classical_filter(ckpt.spec, seed), "ablation")
