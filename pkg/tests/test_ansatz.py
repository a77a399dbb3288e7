from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_theta
from q2c.ansatz import (
    AnsatzParams,
    ansatz_unitary,
    apply_ansatz,
    entangling_pairs,
    first_column,
    param_gradient,
    rot_matrix,
    ry,
    rz,
)
from q2c.gates import DimensionError, StateVector
from q2c.qsim import hadamard_test_real
from q2c.verify import oracle_unitary

angle = st.floats(-10, 10, allow_nan=False)


def _fd_gradient(x, theta, h=1e-5):
    return np.array([(hadamard_test_real(x, theta.shifted(i, h))
                      - hadamard_test_real(x, theta.shifted(i, -h))) / (2 * h)
                     for i in range(theta.size)]).reshape(theta.angles.shape)


class TestRot:
    def test_zero_is_identity(self):
        assert np.array_equal(rot_matrix(0, 0, 0), np.eye(2))

    def test_ry_pi(self):
        assert np.abs(rot_matrix(0, np.pi, 0) - np.array([[0, -1], [1, 0]])).max() <= 1e-15

    @given(angle, angle, angle)
    def test_equals_three_factor_product(self, a, b, g):
        m = rot_matrix(a, b, g)
        assert np.abs(m - rz(g) @ ry(b) @ rz(a)).max() <= 1e-12
        assert np.abs(m.conj().T @ m - np.eye(2)).max() <= 1e-12

    def test_rz_acts_first(self):
        # RZ(alpha) then RY(pi/2) differs from the reverse order
        a = 0.7
        assert not np.allclose(rot_matrix(a, np.pi / 2, 0), rz(0) @ rz(a) @ ry(np.pi / 2))


class TestParams:
    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            AnsatzParams(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            AnsatzParams(np.full((1, 2, 3), np.nan))

    def test_read_only(self):
        t = AnsatzParams.zeros()
        with pytest.raises(ValueError):
            t.angles[0, 0, 0] = 1.0

    def test_uniform_range(self, rng):
        t = AnsatzParams.uniform(rng)
        assert t.angles.shape == (3, 2, 3) and t.size == 18
        assert t.angles.min() >= 0 and t.angles.max() < 2 * np.pi


class TestCircuit:
    def test_entangling_pattern(self):
        assert entangling_pairs(1) == []
        assert entangling_pairs(2) == [(0, 1)]
        assert entangling_pairs(3) == [(0, 1), (1, 2), (2, 0)]

    def test_zero_theta_on_00(self):
        out = apply_ansatz(AnsatzParams.zeros(), StateVector.zero(2))
        assert np.array_equal(out.amplitudes, [1, 0, 0, 0])

    def test_zero_theta_on_10(self):
        # one layer: CNOT(0 -> 1) maps |10> to |11>
        out = apply_ansatz(AnsatzParams.zeros(1, 2), StateVector.from_amplitudes([0, 0, 1, 0]))
        assert np.array_equal(out.amplitudes, [0, 0, 0, 1])

    def test_zero_theta_three_layers_on_10(self):
        # three CNOTs compose to one
        out = apply_ansatz(AnsatzParams.zeros(), StateVector.from_amplitudes([0, 0, 1, 0]))
        assert np.array_equal(out.amplitudes, [0, 0, 0, 1])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            apply_ansatz(AnsatzParams.zeros(3, 2), StateVector.zero(3))

    def test_first_column_zero_theta(self):
        assert np.array_equal(first_column(AnsatzParams.zeros()), [1, 0, 0, 0])

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_unitary_matches_oracle(self, rng, n):
        for _ in range(10):
            t = random_theta(rng, 3, n)
            u = ansatz_unitary(t)
            assert np.abs(u - oracle_unitary(t.angles)).max() <= 1e-12
            assert np.abs(u.conj().T @ u - np.eye(2**n)).max() <= 1e-10
            assert abs(np.linalg.norm(first_column(t)) - 1) <= 1e-12

    def test_periodicity_4pi(self, rng):
        t = random_theta(rng)
        x = rng.normal(size=4)
        base = hadamard_test_real(x, t)
        for i in range(t.size):
            assert abs(hadamard_test_real(x, t.shifted(i, 4 * np.pi)) - base) <= 1e-10


class TestParamShift:
    def test_rz_on_e0_is_stationary(self):
        g = param_gradient([1, 0, 0, 0], AnsatzParams.zeros())
        # the first RZ of each qubit in layer 0 only adds a phase to |0>
        assert np.abs(g[0, :, 0]).max() <= 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        x, t = rng.normal(size=4), random_theta(rng)
        ps, fd = param_gradient(x, t), _fd_gradient(x, t)
        assert np.all(np.abs(ps - fd) <= 1e-5 * np.abs(fd) + 1e-7)

    def test_unused_support(self, rng):
        # x only touches |00>, |01>: gradients still agree everywhere
        x, t = np.array([0.3, -0.8, 0, 0]), random_theta(rng)
        ps, fd = param_gradient(x, t), _fd_gradient(x, t)
        assert np.all(np.abs(ps - fd) <= 1e-5 * np.abs(fd) + 1e-7)

    def test_half_pi_rule_overestimates(self, rng):
        # shifting by pi/2 and halving gives sqrt(2) times the true slope here
        x, t = rng.normal(size=4), random_theta(rng)
        i = 4
        half = (hadamard_test_real(x, t.shifted(i, np.pi / 2))
                - hadamard_test_real(x, t.shifted(i, -np.pi / 2))) / 2
        exact = param_gradient(x, t).reshape(-1)[i]
        assert half == pytest.approx(np.sqrt(2) * exact, rel=1e-9)
