from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_theta
from q2c.ansatz import AnsatzParams, first_column
from q2c.gates import (
    DimensionError,
    NormalizationError,
    StateVector,
    ZeroVectorError,
    apply_1q,
    H,
)
from q2c.qsim import (
    ShotConfig,
    hadamard_test_imag,
    hadamard_test_real,
    resource_count,
    swap_test,
    unitary_completion,
    _hadamard_p0,
)
from q2c.verify import oracle_inner, oracle_unitary

# Householder for x = [1,1,1,1]/2: v = e0 - x = [1,-1,-1,-1]/2, v.v = 1, M = I - 2 v v^T
HOUSEHOLDER_HALF = np.array([
    [0.5, 0.5, 0.5, 0.5],
    [0.5, 0.5, -0.5, -0.5],
    [0.5, -0.5, 0.5, -0.5],
    [0.5, -0.5, -0.5, 0.5],
])

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
vec4 = arrays(np.float64, 4, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)
angles = arrays(np.float64, (3, 2, 3), elements=st.floats(-20, 20, allow_nan=False))


def _unitarity_err(m):
    return np.abs(m.conj().T @ m - np.eye(len(m))).max()


class TestUnitaryCompletion:
    def test_identity_for_e0(self):
        assert np.array_equal(unitary_completion([1, 0, 0, 0]).matrix, np.eye(4))

    def test_e1(self):
        m = unitary_completion([0, 1, 0, 0]).matrix
        assert np.array_equal(m[:, 0], [0, 1, 0, 0])
        assert _unitarity_err(m) <= 1e-12

    def test_uniform_vector_frozen(self):
        c = unitary_completion(np.full(4, 0.5))
        assert np.abs(c.matrix - HOUSEHOLDER_HALF).max() <= 1e-15
        assert np.array_equal(c.source_vector, np.full(4, 0.5))

    @given(vec4)
    def test_unitary_with_exact_first_column(self, v):
        x = v / np.linalg.norm(v)
        m = unitary_completion(x).matrix
        assert _unitarity_err(m) <= 1e-10
        assert np.abs(m[:, 0] - x).max() <= 1e-12

    def test_rejects_unnormalized(self):
        with pytest.raises(NormalizationError):
            unitary_completion([1, 1, 0, 0])

    def test_rejects_bad_length(self):
        with pytest.raises(DimensionError):
            unitary_completion([1, 0, 0])


class TestHadamard:
    def test_e0_zero_theta(self):
        t = AnsatzParams.zeros()
        assert hadamard_test_real([1, 0, 0, 0], t) == pytest.approx(1.0, abs=1e-15)
        assert hadamard_test_imag([1, 0, 0, 0], t) == pytest.approx(0.0, abs=1e-15)

    def test_orthogonal(self):
        assert hadamard_test_real([0, 1, 0, 0], AnsatzParams.zeros()) == pytest.approx(0.0, abs=1e-15)

    def test_unnormalized_input_is_normalized(self, rng):
        t = random_theta(rng)
        x = rng.normal(size=4)
        assert hadamard_test_real(5 * x, t) == pytest.approx(hadamard_test_real(x, t), abs=1e-14)

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            hadamard_test_real(np.zeros(4), AnsatzParams.zeros())

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            hadamard_test_real(np.ones(8), AnsatzParams.zeros())

    @settings(max_examples=60)
    @given(vec4, angles)
    def test_matches_gate_matrix_oracle(self, x, a):
        t = AnsatzParams(a)
        ref = oracle_inner(x, a)
        assert abs(hadamard_test_real(x, t) - ref.real) <= 1e-10
        assert abs(hadamard_test_imag(x, t) - ref.imag) <= 1e-10

    def test_three_qubit_ansatz(self, rng):
        t = random_theta(rng, 2, 3)
        x = rng.normal(size=8)
        assert abs(hadamard_test_real(x, t) - oracle_inner(x, t.angles).real) <= 1e-10

    def test_completion_independence(self, rng):
        # a Gram-Schmidt completion yields the same observable as the Householder one
        for _ in range(20):
            t = random_theta(rng)
            x = rng.normal(size=4)
            x /= np.linalg.norm(x)
            basis = np.column_stack([x, rng.normal(size=(4, 3))])
            q, r = np.linalg.qr(basis)
            q = q * np.sign(np.diag(r))  # first column +x
            p_gs = _hadamard_p0(x.astype(complex), q.T, t.angles, False)
            p_hh = _hadamard_p0(x.astype(complex), unitary_completion(x).matrix.T, t.angles, False)
            assert abs((2 * p_gs - 1) - (2 * p_hh - 1)) <= 1e-10

    def test_sampled_mode_reproducible(self, rng):
        t = random_theta(rng)
        x = rng.normal(size=4)
        cfg = ShotConfig("sampled", shots=500, seed=9)
        a, b = hadamard_test_real(x, t, cfg), hadamard_test_real(x, t, cfg)
        assert a == b
        assert -1 <= a <= 1
        k = (a + 1) * 500 / 2
        assert abs(k - round(k)) < 1e-9

    def test_sampled_mode_is_binomial_of_p0(self):
        # theta = 0 and x = e0 give p0 = 1: every shot lands on 0
        cfg = ShotConfig("sampled", shots=37, seed=1)
        assert hadamard_test_real([1, 0, 0, 0], AnsatzParams.zeros(), cfg) == 1.0

    def test_shot_config_validation(self):
        with pytest.raises(ValueError):
            ShotConfig("sampled", shots=0)
        with pytest.raises(ValueError):
            ShotConfig("noisy")


class TestSwap:
    def test_identical(self):
        assert swap_test([1, 0, 0, 0], [1, 0, 0, 0]) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal(self):
        assert swap_test([1, 0, 0, 0], [0, 1, 0, 0]) == pytest.approx(0.0, abs=1e-15)

    @given(vec4, vec4)
    def test_real_overlap(self, x, y):
        expected = (x @ y / np.linalg.norm(x) / np.linalg.norm(y)) ** 2
        assert abs(swap_test(x, y) - expected) <= 1e-10

    def test_pythagorean_identity(self, rng):
        for _ in range(25):
            t = random_theta(rng)
            x = rng.normal(size=4)
            re, im = hadamard_test_real(x, t), hadamard_test_imag(x, t)
            assert abs(swap_test(x, first_column(t)) - (re**2 + im**2)) <= 1e-9

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            swap_test([0, 0, 0, 0], [1, 0, 0, 0])

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            swap_test([1, 0], [1, 0, 0, 0])


class TestResources:
    @pytest.mark.parametrize("n,swap,had", [(2, 5, 3), (8, 17, 9), (1, 3, 2)])
    def test_qubits(self, n, swap, had):
        assert resource_count(n, "swap").qubits == swap
        assert resource_count(n, "hadamard").qubits == had

    def test_gate_counts(self):
        assert resource_count(2, "swap").two_qubit_gates == 2
        h = resource_count(2, "hadamard")
        assert (h.two_qubit_gates, h.composite_gates) == (3, 1)
        assert resource_count(4, "hadamard").two_qubit_gates == 12

    def test_errors(self):
        with pytest.raises(ValueError):
            resource_count(0, "swap")
        with pytest.raises(ValueError):
            resource_count(2, "qpe")


class TestStateVector:
    @given(arrays(np.float64, 8, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3), angles)
    def test_norm_preserved(self, v, a):
        psi = StateVector.from_amplitudes(v / np.linalg.norm(v))
        for q in range(3):
            psi = psi.apply(H, q)
            assert abs(psi.norm() - 1) <= 1e-12
        psi = psi.cnot(0, 2)
        assert abs(psi.norm() - 1) <= 1e-12

    def test_bad_shape(self):
        with pytest.raises(DimensionError):
            StateVector(np.ones(3), 2)

    def test_big_endian(self):
        x = np.array([0, 0, 1, 0], dtype=complex)  # |10>
        out = apply_1q(x, np.array([[0, 1], [1, 0]]), 0, 2)  # X on qubit 0
        assert np.array_equal(out, [1, 0, 0, 0])

    def test_oracle_unitary_is_unitary(self, rng):
        assert _unitarity_err(oracle_unitary(random_theta(rng).angles)) <= 1e-12
