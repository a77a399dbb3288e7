from __future__ import annotations

from unittest import mock

import numpy as np

from q2c import ansatz, verify


def test_oracle_rot_matches_definition():
    a, b, g = 0.3, 1.1, -2.0
    expected = ansatz.rz(g) @ ansatz.ry(b) @ ansatz.rz(a)
    assert np.abs(verify._oracle_rot(a, b, g) - expected).max() <= 1e-15


def test_oracle_cnot_is_permutation():
    m = verify._oracle_cnot(0, 1, 2)
    assert np.array_equal(m, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


def test_perturbed_rot_sign_is_caught():
    def broken(alpha, beta, gamma):
        return ansatz.rz(gamma) @ ansatz.ry(-beta) @ ansatz.rz(alpha)

    with mock.patch.object(ansatz, "rot_matrix", broken):
        real, imag = verify.check_circuit_vs_analytic(n_draws=20)
    assert not real.passed and not imag.passed
    real, imag = verify.check_circuit_vs_analytic(n_draws=20)
    assert real.passed and imag.passed


def test_broken_cnot_is_caught():
    with mock.patch.object(ansatz, "entangling_pairs", lambda n: [(1, 0)] if n == 2 else []):
        real, _ = verify.check_circuit_vs_analytic(n_draws=20)
    assert not real.passed


def test_pairwise_auc():
    assert verify.pairwise_auc([0.5, 0.5, 0.9], [1, 0, 0]) == 0.25


def test_report_lines_show_tolerance():
    results = verify.check_auc(n_instances=5)
    assert all("tol=" in r.line() and r.line().startswith("PASS") for r in results)
