from __future__ import annotations

import json

import numpy as np
import pytest

from q2c import smiles
from q2c.data import (
    ASSAYS,
    DatasetError,
    UnknownAssay,
    batches,
    load_tox21,
    split_indices,
    write_synthetic_csv,
)

HEADER = "NR-AR,NR-AR-LBD,NR-AhR,NR-Aromatase,NR-ER,NR-ER-LBD,NR-PPAR-gamma,SR-ARE,SR-ATAD5,SR-HSE,SR-MMP,SR-p53,mol_id,smiles\n"


def write_rows(path, rows):
    # rows: (nr-ahr label or "", smiles); other assays left blank
    lines = [HEADER]
    for i, (label, smi) in enumerate(rows):
        cells = [""] * 12
        cells[2] = str(label)
        lines.append(",".join(cells) + f",TOX{i},{smi}\n")
    path.write_text("".join(lines))
    return path


@pytest.fixture
def ten(tmp_path):
    smis = ["CC", "CCO", "C=O", "c1ccccc1", "CCN", "CC(=O)O", "CCCl", "OCCO", "C1CC1", "CC#N"]
    return write_rows(tmp_path / "t.csv", [(i % 2, s) for i, s in enumerate(smis)])


class TestLoad:
    def test_ten_rows_split(self, ten):
        d = load_tox21(ten, "nr-ahr", seed=4)
        assert (len(d.train_idx), len(d.test_idx)) == (8, 2)
        d2 = load_tox21(ten, "NR-AhR", seed=4)
        assert np.array_equal(d.train_idx, d2.train_idx) and np.array_equal(d.test_idx, d2.test_idx)
        assert d.grids.shape == (10, 400, 57) and d.grids.dtype == np.uint8
        assert set(d.labels) == {0.0, 1.0}

    def test_split_disjoint_exhaustive(self):
        for n in (1, 2, 5, 10, 37, 1000):
            tr, te = split_indices(n, 3)
            assert len(set(tr) & set(te)) == 0 and sorted(np.r_[tr, te]) == list(range(n))
            assert len(tr) == int(np.floor(0.8 * n + 0.5))

    def test_rejections_logged(self, tmp_path):
        p = write_rows(tmp_path / "r.csv", [(1, "CC"), (0, "[2H]O[2H]"), (1, "C(=O)(=O)(=O)O"), ("", "CC"), (0, "CO")])
        d = load_tox21(p, "nr-ahr")
        r = d.report.summary()
        assert (r["labeled_rows"], r["accepted"], r["rejected"]) == (4, 2, 2)
        assert r["reasons"] == {"deuterium": 1, "invalid_valence": 1}
        assert r["accepted"] + r["rejected"] == r["labeled_rows"]
        d.report.write(tmp_path / "rep.json")
        assert json.loads((tmp_path / "rep.json").read_text())["rejected"] == 2
        d.report.write_rejections(tmp_path / "rej.jsonl")
        assert len((tmp_path / "rej.jsonl").read_text().splitlines()) == 2

    def test_malformed_rows_skipped(self, tmp_path):
        p = write_rows(tmp_path / "m.csv", [(1, "CC"), ("maybe", "CC"), (2, "CO"), (0, "CO")])
        with open(p, "a") as fh:
            fh.write("1,2\n")  # truncated row
        d = load_tox21(p, "nr-ahr")
        assert len(d) == 2 and d.report.malformed == 3

    def test_errors(self, tmp_path, ten):
        with pytest.raises(FileNotFoundError):
            load_tox21(tmp_path / "nope.csv", "nr-ahr")
        with pytest.raises(UnknownAssay):
            load_tox21(ten, "nr-xyz")
        (tmp_path / "bad.csv").write_text("foo,bar\n1,2\n")
        with pytest.raises(DatasetError):
            load_tox21(tmp_path / "bad.csv", "nr-ahr")
        with pytest.raises(DatasetError):
            load_tox21(write_rows(tmp_path / "e.csv", [("", "CC")]), "nr-ahr")

    def test_packed_directory(self, tmp_path):
        d = tmp_path / "packed"
        d.mkdir()
        smiles.write_packed(d / "grids.bes", [("a", smiles.encode("CC")), ("b", smiles.encode("CO"))])
        (d / "labels.csv").write_text("id,NR-AhR\na,1\nb,0\nc,1\n")
        ds = load_tox21(d, "nr-ahr")
        assert ds.ids == ["a", "b"] and ds.report.rejected == 1
        assert np.array_equal(ds.grids[0], smiles.encode("CC").bits)

    def test_assay_names(self):
        assert len(ASSAYS) == 12 and "nr-ahr" in ASSAYS


class TestBatches:
    def test_sizes(self, ten):
        d = load_tox21(ten, "nr-ahr")
        d.train_idx = np.arange(10)
        assert [len(b[1]) for b in batches(d, "train", 4, epoch_seed=0)] == [4, 4, 2]

    def test_deterministic_and_exhaustive(self, ten):
        d = load_tox21(ten, "nr-ahr")
        a = np.concatenate([b[2] for b in batches(d, "train", 3, epoch_seed=5)])
        b = np.concatenate([b[2] for b in batches(d, "train", 3, epoch_seed=5)])
        assert np.array_equal(a, b) and sorted(a) == sorted(d.train_idx)

    def test_epoch_seeds_differ(self, tmp_path):
        write_synthetic_csv(tmp_path / "s.csv", 60, seed=0)
        d = load_tox21(tmp_path / "s.csv", "nr-ahr")
        orders = {tuple(np.concatenate([b[2] for b in batches(d, "train", 8, epoch_seed=s)])) for s in range(5)}
        assert len(orders) == 5

    def test_test_split_in_order(self, ten):
        d = load_tox21(ten, "nr-ahr")
        got = np.concatenate([b[2] for b in batches(d, "test", 1)])
        assert np.array_equal(got, d.test_idx)

    def test_bad_batch_size(self, ten):
        with pytest.raises(ValueError):
            next(batches(load_tox21(ten, "nr-ahr"), "train", 0))


def test_synthetic_csv_parses(tmp_path):
    write_synthetic_csv(tmp_path / "s.csv", 200, seed=1)
    for assay in ("nr-ahr", "sr-p53"):
        d = load_tox21(tmp_path / "s.csv", assay)
        assert len(d) == 200 and d.report.rejected == 0
        assert 0 < d.labels.mean() < 1
