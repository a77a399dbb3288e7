"""Strongly entangling variational circuit and its parameter-shift gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gates import DimensionError, StateVector, apply_1q, apply_cnot

# Each Rot angle enters the Hadamard-test expectation linearly through
# cos(a/2), sin(a/2): a single frequency of 1/2.  The exact two-term rule for
# that spectrum shifts by pi and divides by 4.
SHIFT = np.pi
SHIFT_DENOMINATOR = 4.0


@dataclass(frozen=True)
class AnsatzParams:
    """Rotation angles of shape (layers, qubits, 3), ordered (alpha, beta, gamma)."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.array(self.angles, dtype=float)
        if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DimensionError(f"angles must have shape (L, n, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("angles must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @property
    def n_layers(self) -> int:
        return self.angles.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.angles.shape[1]

    @property
    def size(self) -> int:
        return self.angles.size

    @classmethod
    def zeros(cls, n_layers: int = 3, n_qubits: int = 2) -> AnsatzParams:
        return cls(np.zeros((n_layers, n_qubits, 3)))

    @classmethod
    def uniform(cls, rng: np.random.Generator, n_layers: int = 3, n_qubits: int = 2) -> AnsatzParams:
        return cls(rng.uniform(0.0, 2 * np.pi, size=(n_layers, n_qubits, 3)))

    def shifted(self, flat_index: int, delta: float) -> AnsatzParams:
        a = self.angles.copy().reshape(-1)
        a[flat_index] += delta
        return AnsatzParams(a.reshape(self.angles.shape))


def rz(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]])


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rot_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """RZ(gamma) @ RY(beta) @ RZ(alpha); RZ(alpha) acts first.

    Multiplied out in closed form; tests compare against the three-factor product.
    """
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    plus, minus = np.exp(0.5j * (alpha + gamma)), np.exp(0.5j * (alpha - gamma))
    return np.array([[c / plus, -s * minus], [s / minus, c * plus]])


def entangling_pairs(n_qubits: int) -> list[tuple[int, int]]:
    if n_qubits == 1:
        return []
    if n_qubits == 2:
        # offsets 1 and n-1 coincide; a doubled CNOT would cancel
        return [(0, 1)]
    return [(q, (q + 1) % n_qubits) for q in range(n_qubits)]


def ansatz_on_vector(angles: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Run the layers on a raw amplitude vector (used for controlled application)."""
    n = angles.shape[1]
    for layer in angles:
        for q in range(n):
            psi = apply_1q(psi, rot_matrix(*layer[q]), q, n)
        for c, t in entangling_pairs(n):
            psi = apply_cnot(psi, c, t, n)
    return psi


def apply_ansatz(theta: AnsatzParams, state: StateVector) -> StateVector:
    if state.n_qubits != theta.n_qubits:
        raise DimensionError(
            f"ansatz acts on {theta.n_qubits} qubits, state has {state.n_qubits}"
        )
    return StateVector(ansatz_on_vector(theta.angles, state.amplitudes), state.n_qubits)


def first_column(theta: AnsatzParams) -> np.ndarray:
    """The prepared state U(theta)|0...0>, i.e. column 0 of the ansatz unitary."""
    return apply_ansatz(theta, StateVector.zero(theta.n_qubits)).amplitudes


def ansatz_unitary(theta: AnsatzParams) -> np.ndarray:
    dim = 2**theta.n_qubits
    cols = [ansatz_on_vector(theta.angles, np.eye(dim, dtype=complex)[:, j]) for j in range(dim)]
    return np.stack(cols, axis=1)


def param_gradient(x, theta: AnsatzParams) -> np.ndarray:
    """d/dtheta of the real Hadamard-test output, by parameter shift.

    Every one of the L*n*3 single-axis rotations is shifted by +-pi and the
    difference of the two exact circuit evaluations divided by 4.
    """
    from .qsim import hadamard_test_batch

    shifted = []
    for i in range(theta.size):
        shifted += [theta.shifted(i, SHIFT), theta.shifted(i, -SHIFT)]
    values = hadamard_test_batch(x, shifted).reshape(theta.size, 2)
    grad = (values[:, 0] - values[:, 1]) / SHIFT_DENOMINATOR
    return grad.reshape(theta.angles.shape)
