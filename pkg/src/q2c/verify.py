"""Oracle suite: every check compares a production code path with an independent route.

The gate-matrix oracle builds each layer as an explicit 2^n x 2^n matrix from
Kronecker products of hand-written RZ/RY matrices and permutation-matrix
CNOTs.  It shares no code with the statevector kernels, so a broken gate in
the circuit path shows up as a failing check.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from functools import reduce
from typing import Callable
from unittest import mock

import numpy as np

from . import nn, qconv
from .ansatz import AnsatzParams, param_gradient
from .metrics import roc_auc, roc_auc_rank
from .qsim import hadamard_test_imag, hadamard_test_real, swap_test
from .transfer import extract_weights


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    passed: bool
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} max_err={self.max_error:.3e}  "
                f"tol={self.tolerance:<6g}  {self.seconds:6.2f}s  {self.detail}").rstrip()


# --- gate-matrix oracle ----------------------------------------------------------

def _oracle_rot(a: float, b: float, g: float) -> np.ndarray:
    def z(t):
        return np.diag([np.cos(t / 2) - 1j * np.sin(t / 2), np.cos(t / 2) + 1j * np.sin(t / 2)])

    y = np.array([[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]])
    return z(g) @ y @ z(a)


def _oracle_cnot(control: int, target: int, n: int) -> np.ndarray:
    dim = 2**n
    m = np.zeros((dim, dim))
    for i in range(dim):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[control]:
            bits[target] ^= 1
        j = sum(b << (n - 1 - k) for k, b in enumerate(bits))
        m[j, i] = 1.0
    return m


def oracle_unitary(angles: np.ndarray) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    n = angles.shape[1]
    pairs = [] if n == 1 else [(0, 1)] if n == 2 else [(q, (q + 1) % n) for q in range(n)]
    u = np.eye(2**n, dtype=complex)
    for layer in angles:
        rots = reduce(np.kron, [_oracle_rot(*layer[q]) for q in range(n)])
        ent = reduce(lambda acc, p: _oracle_cnot(*p, n) @ acc, pairs, np.eye(2**n))
        u = ent @ rots @ u
    return u


def oracle_inner(x, angles) -> complex:
    x = np.asarray(x, dtype=float)
    return complex(np.vdot(x / np.linalg.norm(x), oracle_unitary(angles)[:, 0]))


def _random_theta(rng, n_layers=3, n_qubits=2) -> AnsatzParams:
    return AnsatzParams(rng.uniform(0, 2 * np.pi, size=(n_layers, n_qubits, 3)))


def _timed(name: str, tol: float, fn: Callable[[], tuple[float, str]], passed=None) -> CheckResult:
    t0 = time.perf_counter()
    err, detail = fn()
    ok = err <= tol if passed is None else passed(err)
    return CheckResult(name, float(err), tol, bool(ok), time.perf_counter() - t0, detail)


# --- individual checks --------------------------------------------------------------

def check_circuit_vs_analytic(n_draws: int = 1000, seed: int = 1) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    draws = [(rng.normal(size=4), _random_theta(rng)) for _ in range(n_draws)]
    refs = [oracle_inner(x, t.angles) for x, t in draws]

    def real():
        return max(abs(hadamard_test_real(x, t) - r.real) for (x, t), r in zip(draws, refs)), f"{n_draws} draws"

    def imag():
        return max(abs(hadamard_test_imag(x, t) - r.imag) for (x, t), r in zip(draws, refs)), f"{n_draws} draws"

    return [_timed("circuit_vs_analytic_real", 1e-10, real),
            _timed("circuit_vs_analytic_imag", 1e-10, imag)]


def check_pythagorean(n_draws: int = 500, seed: int = 2) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        err = 0.0
        for _ in range(n_draws):
            x, t = rng.normal(size=4), _random_theta(rng)
            y = oracle_unitary(t.angles)[:, 0]
            re, im = hadamard_test_real(x, t), hadamard_test_imag(x, t)
            err = max(err, abs(swap_test(x, y) - (re * re + im * im)))
        return err, f"{n_draws} pairs"

    return _timed("swap_hadamard_identity", 1e-9, run)


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # below |g| = 1e-2 this is an absolute bound of 1e-7 at the 1e-5 tolerance
    return float(np.max(np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-2)))


def check_param_shift(n_draws: int = 200, h: float = 1e-5, seed: int = 3) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        err = 0.0
        for _ in range(n_draws):
            x, t = rng.normal(size=4), _random_theta(rng)
            ps = param_gradient(x, t).reshape(-1)
            fd = np.array([(hadamard_test_real(x, t.shifted(i, h))
                            - hadamard_test_real(x, t.shifted(i, -h))) / (2 * h)
                           for i in range(t.size)])
            err = max(err, _rel_err(ps, fd))
        return err, f"{n_draws} draws x 18 angles"

    return _timed("param_shift_vs_fd", 1e-5, run)


def _fd(f: Callable[[], float], arr: np.ndarray, h: float) -> np.ndarray:
    g = np.zeros_like(arr, dtype=float)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        up = f()
        arr[i] = old - h
        down = f()
        arr[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def check_layer_gradients(n_configs: int = 10, h: float = 1e-5, seed: int = 4) -> CheckResult:
    """Central differences of sum(R * layer(x)) for every classical layer."""

    def run():
        rng = np.random.default_rng(seed)
        err = 0.0
        for _ in range(n_configs):
            # normalized conv on a patchy input with some exact zero patches
            x = rng.normal(size=(2, 5, 6)) * (rng.random((2, 5, 6)) < 0.7)
            w, b = rng.normal(size=(2, 2)), float(rng.normal())
            out, cache = nn.normalized_conv_forward(x, w, b)
            r = rng.normal(size=out.shape)
            dx, dw, _ = nn.normalized_conv_backward(r, cache)
            f = lambda: float(np.sum(r * nn.normalized_conv_forward(x, w, b)[0]))
            err = max(err, _rel_err(dw, _fd(f, w, h)))
            # input gradient on dense data: the map jumps where a patch is exactly zero
            x = rng.normal(size=(2, 5, 6))
            out, cache = nn.normalized_conv_forward(x, w, b)
            dx, _, _ = nn.normalized_conv_backward(r, cache)
            err = max(err, _rel_err(dx, _fd(f, x, h)))

            x = rng.normal(size=(2, 3, 6, 5))
            w, bb = rng.normal(size=(4, 3, 2, 2)), rng.normal(size=4)
            out, cache = nn.conv_forward(x, w, bb)
            r = rng.normal(size=out.shape)
            dx, dw, db = nn.conv_backward(r, cache)
            f = lambda: float(np.sum(r * nn.conv_forward(x, w, bb)[0]))
            err = max(err, _rel_err(dx, _fd(f, x, h)), _rel_err(dw, _fd(f, w, h)),
                      _rel_err(db, _fd(f, bb, h)))

            x = rng.normal(size=(2, 3, 7, 6))
            out, cache = nn.maxpool_forward(x)
            r = rng.normal(size=out.shape)
            f = lambda: float(np.sum(r * nn.maxpool_forward(x)[0]))
            err = max(err, _rel_err(nn.maxpool_backward(r, cache), _fd(f, x, h)))

            x, w, bb = rng.normal(size=(3, 7)), rng.normal(size=(2, 7)), rng.normal(size=2)
            out, cache = nn.dense_forward(x, w, bb)
            r = rng.normal(size=out.shape)
            dx, dw, db = nn.dense_backward(r, cache)
            f = lambda: float(np.sum(r * nn.dense_forward(x, w, bb)[0]))
            err = max(err, _rel_err(dx, _fd(f, x, h)), _rel_err(dw, _fd(f, w, h)),
                      _rel_err(db, _fd(f, bb, h)))

            x = rng.normal(size=(4, 5))
            x[np.abs(x) < 1e-3] = 0.5  # keep away from the kink
            r = rng.normal(size=x.shape)
            f = lambda: float(np.sum(r * nn.relu(x)))
            err = max(err, _rel_err(nn.relu_backward(r, x), _fd(f, x, h)))

            # sigmoid + BCE chain as used by the model head
            z = rng.normal(size=6) * 2
            y = (rng.random(6) < 0.5).astype(float)
            p = nn.sigmoid(z)
            analytic = nn.bce_grad(p, y) * p * (1 - p)
            f = lambda: float(np.sum(nn.bce_loss(nn.sigmoid(z), y)))
            err = max(err, _rel_err(analytic, _fd(f, z, h)))
        return err, f"{n_configs} configs x 6 layers"

    return _timed("classical_layer_gradients", 1e-5, run)


def random_grid(rng: np.random.Generator, density: float = 0.1, shape=(400, 57)) -> np.ndarray:
    return (rng.random(shape) < density).astype(np.uint8)


class _Counter:
    def __init__(self, fn):
        self.fn, self.calls = fn, 0

    def __call__(self, *a, **k):
        self.calls += 1
        return self.fn(*a, **k)


def check_dedup(n_grids: int = 20, seed: int = 5) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    grids = [random_grid(rng, density=rng.uniform(0.02, 0.5)) for _ in range(n_grids)]
    theta, bias = _random_theta(rng), float(rng.normal())
    stats = {"dedup": 0, "naive": 0}

    def equality():
        err = 0.0
        for g in grids:
            with mock.patch.object(qconv, "hadamard_test_real", _Counter(hadamard_test_real)) as c:
                fast = qconv.qconv_forward(g, theta, bias)
            stats["dedup"] = max(stats["dedup"], c.calls)
            with mock.patch.object(qconv, "_position_value", _Counter(qconv._position_value)) as c:
                slow = qconv.naive_qconv_forward(g, theta, bias)
            stats["naive"] = min(stats["naive"] or c.calls, c.calls)
            err = max(err, float(np.max(np.abs(fast - slow))))
        return err, f"{n_grids} grids, bitwise={err == 0.0}"

    eq = _timed("dedup_equivalence", 0.0, equality)
    budget = CheckResult("dedup_circuit_budget", float(stats["dedup"]), 15.0,
                         stats["dedup"] <= 15 and stats["naive"] == 22344, 0.0,
                         f"dedup circuits<={stats['dedup']} naive evaluations={stats['naive']}")
    return [eq, budget]


def check_forward_identity(n_grids: int = 20, seed: int = 6) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        err = 0.0
        for _ in range(n_grids):
            g, theta, b = random_grid(rng, rng.uniform(0.02, 0.5)), _random_theta(rng), float(rng.normal())
            q = qconv.qconv_forward(g, theta, b)
            c, _ = nn.normalized_conv_forward(g.astype(float), extract_weights(theta), b)
            err = max(err, float(np.max(np.abs(q - c))))
        return err, f"{n_grids} grids"

    return _timed("quantum_classical_identity", 1e-10, run)


def pairwise_auc(scores, labels) -> float:
    """O(n^2) count of correctly ordered (positive, negative) pairs, ties worth 1/2."""
    s, y = np.asarray(scores, dtype=float), np.asarray(labels)
    pos, neg = s[y == 1], s[y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def random_auc_instance(rng: np.random.Generator):
    n = int(rng.integers(2, 80))
    labels = rng.integers(0, 2, size=n)
    labels[: 2] = [0, 1]
    if rng.random() < 0.5:
        scores = rng.integers(0, 6, size=n) / 5.0  # heavy ties
    else:
        scores = rng.normal(size=n)
    return scores, labels


def check_auc(n_instances: int = 200, seed: int = 7) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    cases = [random_auc_instance(rng) for _ in range(n_instances)]

    def trap():
        return max(abs(roc_auc(s, y) - pairwise_auc(s, y)) for s, y in cases), f"{n_instances} instances"

    def rank():
        return max(abs(roc_auc(s, y) - roc_auc_rank(s, y)) for s, y in cases), f"{n_instances} instances"

    return [_timed("auc_trapezoid_vs_pairwise", 1e-12, trap),
            _timed("auc_trapezoid_vs_rank", 1e-12, rank)]


def run_all(quick: bool = False) -> list[CheckResult]:
    scale = 0.1 if quick else 1.0
    n = lambda k: max(2, int(k * scale))
    results = []
    results += check_circuit_vs_analytic(n(1000))
    results.append(check_pythagorean(n(500)))
    results.append(check_param_shift(n(200)))
    results.append(check_layer_gradients(n(10)))
    results += check_dedup(n(20))
    results.append(check_forward_identity(n(20)))
    results += check_auc(n(200))
    return results
