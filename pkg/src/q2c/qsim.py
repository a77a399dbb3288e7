"""Statevector simulation of the Hadamard-test and swap-test inner-product circuits.

State preparation loads amplitudes directly.  The uncompute step of the
Hadamard test needs a unitary whose first column is the data vector; a
Householder reflection supplies it.

Sampled mode draws the ancilla counts from numpy's ``PCG64`` bit generator
seeded with ``ShotConfig.seed`` so results are reproducible across platforms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .ansatz import AnsatzParams, ansatz_on_vector, entangling_pairs
from .gates import (
    H,
    S_DAG,
    DimensionError,
    NormalizationError,
    ZeroVectorError,
    apply_1q,
    n_qubits_for,
)


@dataclass(frozen=True)
class ShotConfig:
    mode: Literal["exact", "sampled"] = "exact"
    shots: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled" and self.shots < 1:
            raise ValueError("shots must be >= 1 in sampled mode")


EXACT = ShotConfig()


@dataclass(frozen=True)
class UnitaryCompletion:
    matrix: np.ndarray
    source_vector: np.ndarray


def unitary_completion(x) -> UnitaryCompletion:
    """Householder reflection H = I - 2 v v^T / (v^T v), v = e0 - x, so H e0 = x."""
    x = np.asarray(x, dtype=float)
    n_qubits_for(x.size)
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise NormalizationError(f"vector norm {np.linalg.norm(x)} is not 1")
    v = -x.copy()
    v[0] += 1.0
    vv = float(v @ v)
    if vv < 1e-30:
        return UnitaryCompletion(np.eye(x.size), x)
    m = np.eye(x.size) - (2.0 / vv) * np.outer(v, v)
    m[:, 0] = x  # exact first column; the reflection agrees to rounding
    return UnitaryCompletion(m, x)


def normalize(x) -> np.ndarray:
    x = np.asarray(x)
    x = x.astype(complex if np.iscomplexobj(x) else float)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise ZeroVectorError("cannot encode the all-zero vector as a quantum state")
    return x / norm


def _readout(p0: float, cfg: ShotConfig) -> float:
    p0 = min(max(p0, 0.0), 1.0)
    if cfg.mode == "exact":
        return 2.0 * p0 - 1.0
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    k = rng.binomial(cfg.shots, p0)
    return 2.0 * k / cfg.shots - 1.0


def _hadamard_p0(x_n: np.ndarray, u_dag: np.ndarray, angles: np.ndarray, imag: bool) -> float:
    n = angles.shape[1]
    dim = 2**n
    # ancilla is qubit 0; working register is qubits 1..n
    psi = np.zeros(2 * dim, dtype=complex)
    psi[:dim] = x_n
    psi = apply_1q(psi, H, 0, n + 1)
    if imag:
        psi = apply_1q(psi, S_DAG, 0, n + 1)
    branch = psi[dim:]
    branch = u_dag @ branch
    psi[dim:] = ansatz_on_vector(angles, branch)
    psi = apply_1q(psi, H, 0, n + 1)
    return float(np.vdot(psi[:dim], psi[:dim]).real)


def _prepare(x, theta: AnsatzParams) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.size != 2**theta.n_qubits:
        raise DimensionError(
            f"data vector of length {x.size} does not match a {theta.n_qubits}-qubit ansatz"
        )
    x_n = normalize(x)
    return x_n, unitary_completion(x_n).matrix.T  # real orthogonal: dagger == transpose


def hadamard_test_real(x, theta: AnsatzParams, cfg: ShotConfig = EXACT) -> float:
    """<Z> on the ancilla of H - controlled(U_phi U_psi^dagger) - H, i.e. Re<x|phi>."""
    x_n, u_dag = _prepare(x, theta)
    return _readout(_hadamard_p0(x_n, u_dag, theta.angles, imag=False), cfg)


def hadamard_test_imag(x, theta: AnsatzParams, cfg: ShotConfig = EXACT) -> float:
    """As ``hadamard_test_real`` with S^dagger after the first H: Im<x|phi>."""
    x_n, u_dag = _prepare(x, theta)
    return _readout(_hadamard_p0(x_n, u_dag, theta.angles, imag=True), cfg)


def hadamard_test_batch(x, thetas: Iterable[AnsatzParams]) -> np.ndarray:
    """Exact real-part readouts for one data vector against many parameter sets."""
    thetas = list(thetas)
    x_n, u_dag = _prepare(x, thetas[0])
    return np.array([2.0 * _hadamard_p0(x_n, u_dag, t.angles, False) - 1.0 for t in thetas])


def swap_test(x, y, cfg: ShotConfig = EXACT) -> float:
    """|<x|y>|^2 from the ancilla of H - controlled-SWAP per qubit pair - H.

    ``y`` may be complex (e.g. a prepared ansatz state).
    """
    x_n, y_n = normalize(x), normalize(y)
    if x_n.size != y_n.size:
        raise DimensionError("swap test registers differ in size")
    n = n_qubits_for(x_n.size)
    total = 2 * n + 1
    psi = np.zeros(2 ** total, dtype=complex)
    psi[: 4**n] = np.kron(x_n, y_n)
    psi = apply_1q(psi, H, 0, total)
    t = psi.reshape((2,) * total)
    for k in range(n):
        t = _cswap(t, 0, 1 + k, 1 + n + k)
    psi = apply_1q(t.reshape(-1), H, 0, total)
    p0 = float(np.vdot(psi[: 4**n], psi[: 4**n]).real)
    return _readout(p0, cfg)


def _cswap(t: np.ndarray, control: int, a: int, b: int) -> np.ndarray:
    t = t.copy()
    idx = [slice(None)] * t.ndim
    idx[control] = 1
    idx = tuple(idx)
    # dropping the control axis shifts later axes down by one
    t[idx] = np.swapaxes(t[idx], a - 1, b - 1).copy()
    return t


@dataclass(frozen=True)
class ResourceCount:
    algorithm: str
    qubits: int
    two_qubit_gates: int
    composite_gates: int


def resource_count(n: int, algorithm: str, n_layers: int = 3) -> ResourceCount:
    """Qubit and gate budget of one inner-product circuit on an n-qubit data register.

    For the Hadamard test the controlled (U_phi U_psi^dagger) block counts as one
    composite gate, and ``two_qubit_gates`` is the CNOT count of the ansatz inside it.
    For the swap test ``two_qubit_gates`` counts the controlled-SWAPs.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if algorithm == "hadamard":
        return ResourceCount("hadamard", n + 1, n_layers * len(entangling_pairs(n)), 1)
    if algorithm == "swap":
        return ResourceCount("swap", 2 * n + 1, n, 0)
    raise ValueError(f"unknown algorithm {algorithm!r}")
