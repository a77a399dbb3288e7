"""Quantum convolution over binary grids with per-patch deduplication.

A binary fh x fw patch is identified by its integer key: the patch read
row-major with the top-left cell as the most significant bit.  Only the
distinct nonzero keys present in the input are sent through the Hadamard
test, so at most 2**(fh*fw) - 1 circuits run per forward pass no matter how
large the grid is.  The all-zero patch cannot be encoded as a state and
contributes 0 (the layer output there is just the bias).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import ansatz
from .ansatz import AnsatzParams
from .qsim import hadamard_test_real


@dataclass
class DedupCache:
    values: dict[int, float] = field(default_factory=dict)
    multiplicity: dict[int, int] = field(default_factory=dict)


def _key_weights(fh: int, fw: int) -> np.ndarray:
    return (2 ** np.arange(fh * fw)[::-1]).reshape(fh, fw)


def patch_keys(grid: np.ndarray, fh: int = 2, fw: int = 2) -> np.ndarray:
    """Integer key of every stride-1 window; works on (H, W) or batched (..., H, W)."""
    win = sliding_window_view(np.asarray(grid, dtype=np.int64), (fh, fw), axis=(-2, -1))
    return np.einsum("...ij,ij->...", win, _key_weights(fh, fw))


def key_to_patch(key: int, fh: int = 2, fw: int = 2) -> np.ndarray:
    w = fh * fw
    return np.array([(key >> (w - 1 - i)) & 1 for i in range(w)], dtype=float)


def dedup_patches(grid: np.ndarray, fh: int = 2, fw: int = 2) -> DedupCache:
    keys, counts = np.unique(patch_keys(grid, fh, fw), return_counts=True)
    return DedupCache(multiplicity={int(k): int(c) for k, c in zip(keys, counts)})


def _check(theta: AnsatzParams, fh: int, fw: int):
    if fh * fw != 2**theta.n_qubits:
        raise ValueError(f"a {fh}x{fw} filter needs {fh * fw} amplitudes, ansatz has {2**theta.n_qubits}")


def key_values(keys, theta: AnsatzParams, fh: int = 2, fw: int = 2) -> np.ndarray:
    """Lookup table of the Hadamard-test value for every key in ``keys`` (others 0)."""
    _check(theta, fh, fw)
    table = np.zeros(2 ** (fh * fw))
    for k in sorted(set(int(k) for k in np.unique(keys)) - {0}):
        table[k] = hadamard_test_real(key_to_patch(k, fh, fw), theta)
    return table


def key_gradients(keys, theta: AnsatzParams, fh: int = 2, fw: int = 2) -> np.ndarray:
    """Parameter-shift gradients per key, shape (2**w, L, n, 3); key 0 rows stay 0."""
    _check(theta, fh, fw)
    table = np.zeros((2 ** (fh * fw),) + theta.angles.shape)
    for k in sorted(set(int(k) for k in np.unique(keys)) - {0}):
        table[k] = ansatz.param_gradient(key_to_patch(k, fh, fw), theta)
    return table


def qconv_forward(grid: np.ndarray, theta: AnsatzParams, bias: float,
                  fh: int = 2, fw: int = 2) -> np.ndarray:
    keys = patch_keys(grid, fh, fw)
    return key_values(keys, theta, fh, fw)[keys] + bias


def naive_qconv_forward(grid: np.ndarray, theta: AnsatzParams, bias: float,
                        fh: int = 2, fw: int = 2) -> np.ndarray:
    """Reference path: one circuit per window position, no deduplication."""
    grid = np.asarray(grid, dtype=float)
    ho, wo = grid.shape[0] - fh + 1, grid.shape[1] - fw + 1
    out = np.full((ho, wo), float(bias))
    for i in range(ho):
        for j in range(wo):
            out[i, j] += _position_value(grid[i:i + fh, j:j + fw].reshape(-1), theta)
    return out


def _position_value(patch: np.ndarray, theta: AnsatzParams) -> float:
    """One inner-product evaluation of the naive path; the zero patch is 0 by definition."""
    return hadamard_test_real(patch, theta) if patch.any() else 0.0


def qconv_backward(grid: np.ndarray, theta: AnsatzParams, upstream: np.ndarray,
                   fh: int = 2, fw: int = 2) -> tuple[np.ndarray, float]:
    """(d theta, d bias) given dL/d(output); chain rule summed per distinct key."""
    keys = patch_keys(grid, fh, fw)
    if keys.shape != np.shape(upstream):
        raise ValueError(f"upstream shape {np.shape(upstream)} != output shape {keys.shape}")
    per_key = np.bincount(keys.reshape(-1), weights=np.reshape(upstream, -1),
                          minlength=2 ** (fh * fw))
    active = keys[np.reshape(upstream, keys.shape) != 0]
    grads = key_gradients(active, theta, fh, fw)
    dtheta = np.tensordot(per_key, grads, axes=(0, 0))
    return dtheta, float(np.sum(upstream))


def fill_values(cache: DedupCache, theta: AnsatzParams, fh: int = 2, fw: int = 2) -> DedupCache:
    """Evaluate one circuit per nonzero key of ``cache``; key 0 maps to 0 without a circuit."""
    table = key_values(list(cache.multiplicity), theta, fh, fw)
    cache.values = {k: float(table[k]) for k in cache.multiplicity}
    return cache
