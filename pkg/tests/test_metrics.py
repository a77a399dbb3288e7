from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from q2c.metrics import CURVE_COLUMNS, CurveLogger, UndefinedAUC, read_curve, roc_auc, roc_auc_rank, roc_curve
from q2c.verify import pairwise_auc, random_auc_instance

# scores on a 1/80 grid so that float transforms stay strictly increasing
labelled = st.integers(2, 60).flatmap(lambda n: st.tuples(
    st.lists(st.integers(-400, 400).map(lambda k: k / 80), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)).filter(lambda t: 0 < sum(t[1]) < len(t[1])))


class TestAuc:
    def test_perfect(self):
        assert roc_auc([0.9, 0.8, 0.3], [1, 1, 0]) == 1.0

    def test_inverted(self):
        assert roc_auc([0.4, 0.6], [1, 0]) == 0.0

    def test_tie(self):
        assert roc_auc([0.5, 0.5], [1, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(UndefinedAUC):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(UndefinedAUC):
            roc_auc_rank([0.1, 0.2], [0, 0])

    def test_bad_labels(self):
        with pytest.raises(ValueError):
            roc_auc([0.1, 0.2], [0, 2])
        with pytest.raises(ValueError):
            roc_auc([0.1], [0, 1])

    def test_curve_endpoints(self):
        fpr, tpr = roc_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0, 0, 1, 1)
        assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)

    def test_pairwise_oracle_200(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            s, y = random_auc_instance(rng)
            assert abs(roc_auc(s, y) - pairwise_auc(s, y)) <= 1e-12
            assert abs(roc_auc(s, y) - roc_auc_rank(s, y)) <= 1e-12

    @settings(max_examples=100)
    @given(labelled)
    def test_monotone_invariance(self, case):
        s, y = np.array(case[0]), np.array(case[1])
        base = roc_auc(s, y)
        assert abs(roc_auc(2 * s + 1, y) - base) <= 1e-12
        assert abs(roc_auc(1 / (1 + np.exp(-s)), y) - base) <= 1e-12

    @settings(max_examples=100)
    @given(labelled)
    def test_negation_complement(self, case):
        s, y = np.array(case[0]), np.array(case[1])
        if len(np.unique(s)) < len(s):
            s = s + np.arange(len(s)) * 1e-3  # the identity assumes no ties
        assert abs(roc_auc(s, y) + roc_auc(-s, y) - 1) <= 1e-12


class TestLogger:
    def test_header_and_rows(self, tmp_path):
        log = CurveLogger(tmp_path / "m.csv")
        assert (tmp_path / "m.csv").read_text().splitlines() == [",".join(CURVE_COLUMNS)]
        for e in range(1, 11):
            log.log(e, "quantum" if e <= 5 else "classical", 0.5, 0.6, 0.7, 0.65)
        rows = read_curve(tmp_path / "m.csv")
        assert len(rows) == 10
        assert [r["phase"] for r in rows] == ["quantum"] * 5 + ["classical"] * 5
        assert float(rows[0]["train_loss"]) == 0.5

    def test_appends_without_second_header(self, tmp_path):
        CurveLogger(tmp_path / "m.csv").log(1, "quantum", 1, 1, 0.5, 0.5)
        CurveLogger(tmp_path / "m.csv").log(2, "ablation", 1, 1, 0.5, 0.5)
        assert len((tmp_path / "m.csv").read_text().splitlines()) == 3

    def test_bad_phase(self, tmp_path):
        with pytest.raises(ValueError):
            CurveLogger(tmp_path / "m.csv").log(1, "warmup", 1, 1, 1, 1)

    def test_io_error_surfaces(self, tmp_path):
        with pytest.raises(OSError):
            CurveLogger(tmp_path / "missing" / "m.csv")
