"""Dense statevector kernels.

Basis ordering is big-endian: qubit 0 is the most significant bit of the
amplitude index, so the amplitude of |q0 q1 ... q_{n-1}> sits at index
sum(q_k * 2**(n-1-k)).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_DAG = np.array([[1, 0], [0, -1j]], dtype=complex)


class DimensionError(ValueError):
    pass


class ZeroVectorError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


def n_qubits_for(length: int) -> int:
    if length < 2 or length & (length - 1):
        raise DimensionError(f"length {length} is not a power of two >= 2")
    return length.bit_length() - 1


def apply_1q(psi: np.ndarray, matrix: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Apply a 2x2 matrix to ``qubit`` of an n-qubit amplitude vector."""
    t = psi.reshape(2**qubit, 2, 2 ** (n - qubit - 1))
    a, b = t[:, 0, :], t[:, 1, :]
    out = np.empty(t.shape, dtype=np.result_type(psi, matrix))
    out[:, 0, :] = matrix[0, 0] * a + matrix[0, 1] * b
    out[:, 1, :] = matrix[1, 0] * a + matrix[1, 1] * b
    return out.reshape(-1)


def apply_cnot(psi: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n).copy()
    idx = [slice(None)] * n
    idx[control] = 1
    idx = tuple(idx)
    axis = target if target < control else target - 1
    t[idx] = np.flip(t[idx], axis=axis)
    return t.reshape(-1)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.n_qubits < 1 or amps.shape != (2**self.n_qubits,):
            raise DimensionError(
                f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> StateVector:
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> StateVector:
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amps, n_qubits_for(amps.size))

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def apply(self, matrix: np.ndarray, qubit: int) -> StateVector:
        return StateVector(apply_1q(self.amplitudes, matrix, qubit, self.n_qubits), self.n_qubits)

    def cnot(self, control: int, target: int) -> StateVector:
        return StateVector(apply_cnot(self.amplitudes, control, target, self.n_qubits), self.n_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2
