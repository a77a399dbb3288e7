"""Tox21 ingestion, filtering, splitting and batching.

Expected CSV layout (the tabular Tox21 release, or any export reshaped to it)::

    <12 assay columns>, mol_id, smiles

Column names are matched case-insensitively (``NR-AhR`` and ``nr-ahr`` are the
same assay).  Labels are ``0``/``1`` (``0.0``/``1.0`` accepted); a blank cell
means the molecule was not tested in that assay.  The id column is optional;
row numbers are used when it is missing.

A directory may be given instead of a CSV.  It must hold ``grids.bes`` (packed
grids, see ``smiles.write_packed``) and ``labels.csv`` with an ``id`` column plus
assay columns; the SMILES parser is bypassed.

Split policy: ``default_rng(seed).permutation(N)``; the first
``floor(0.8 N + 0.5)`` indices are the training split.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import smiles

log = logging.getLogger(__name__)

ASSAYS = ("nr-ar", "nr-ar-lbd", "nr-ahr", "nr-aromatase", "nr-er", "nr-er-lbd",
          "nr-ppar-gamma", "sr-are", "sr-atad5", "sr-hse", "sr-mmp", "sr-p53")
TRAIN_FRACTION = 0.8


class DatasetError(ValueError):
    pass


class UnknownAssay(DatasetError):
    pass


@dataclass
class IngestionReport:
    assay: str
    source: str
    labeled_rows: int = 0
    accepted: int = 0
    rejected: int = 0
    malformed: int = 0
    reasons: dict[str, int] = field(default_factory=dict)
    rejections: list[dict] = field(default_factory=list)

    def reject(self, row: int, rec_id: str, smi: str, reason: str, message: str) -> None:
        self.rejected += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1
        self.rejections.append({"row": row, "id": rec_id, "smiles": smi,
                                "reason": reason, "message": message})

    def summary(self) -> dict:
        return {"assay": self.assay, "source": self.source, "labeled_rows": self.labeled_rows,
                "accepted": self.accepted, "rejected": self.rejected,
                "malformed": self.malformed, "reasons": dict(sorted(self.reasons.items()))}

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")

    def write_rejections(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.rejections:
                fh.write(json.dumps(r) + "\n")


@dataclass
class AssayDataset:
    assay_name: str
    ids: list[str]
    grids: np.ndarray          # (N, 400, 57) uint8
    labels: np.ndarray         # (N,) float 0/1
    train_idx: np.ndarray
    test_idx: np.ndarray
    report: IngestionReport | None = None

    def __len__(self) -> int:
        return len(self.ids)

    def split(self, name: str) -> np.ndarray:
        if name == "train":
            return self.train_idx
        if name == "test":
            return self.test_idx
        raise ValueError(f"unknown split {name!r}")


def normalize_assay(name: str) -> str:
    key = name.strip().lower()
    if key not in ASSAYS:
        raise UnknownAssay(f"unknown assay {name!r}; expected one of {', '.join(ASSAYS)}")
    return key


def split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.floor(TRAIN_FRACTION * n + 0.5)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _parse_label(cell: str) -> float | None:
    cell = cell.strip()
    if cell == "":
        return None
    value = float(cell)  # ValueError for junk
    if value not in (0.0, 1.0):
        raise ValueError(f"label {cell!r} is not 0 or 1")
    return value


def _columns(header: list[str], required: list[str]) -> dict[str, int]:
    lower = {h.strip().lower(): i for i, h in enumerate(header)}
    missing = [c for c in required if c not in lower]
    if missing:
        raise DatasetError(f"missing column(s) {missing} in header {header}")
    return lower


def _finish(assay, ids, grids, labels, report, seed) -> AssayDataset:
    if not ids:
        raise DatasetError(f"no usable records for assay {assay}")
    stack = np.stack(grids).astype(np.uint8)
    train, test = split_indices(len(ids), seed)
    return AssayDataset(assay, ids, stack, np.asarray(labels, dtype=float), train, test, report)


def _load_csv(path: Path, assay: str, seed: int) -> AssayDataset:
    report = IngestionReport(assay, str(path))
    ids, grids, labels = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path} is empty") from None
        cols = _columns(header, ["smiles", assay])
        id_col = cols.get("mol_id", cols.get("id"))
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                label = _parse_label(row[cols[assay]])
                smi = row[cols["smiles"]].strip()
            except (IndexError, ValueError) as exc:
                report.malformed += 1
                log.warning("row %d skipped: %s", rowno, exc)
                continue
            if label is None:
                continue
            report.labeled_rows += 1
            rec_id = row[id_col] if id_col is not None and id_col < len(row) else str(rowno)
            try:
                grid = smiles.encode(smi)
            except smiles.Rejected as exc:
                report.reject(rowno, rec_id, smi, exc.reason, str(exc))
                continue
            report.accepted += 1
            ids.append(rec_id)
            grids.append(grid.bits)
            labels.append(label)
    return _finish(assay, ids, grids, labels, report, seed)


def _load_packed_dir(path: Path, assay: str, seed: int) -> AssayDataset:
    report = IngestionReport(assay, str(path))
    records = dict(smiles.read_packed(path / "grids.bes"))
    ids, grids, labels = [], [], []
    with open(path / "labels.csv", newline="") as fh:
        reader = csv.reader(fh)
        cols = _columns(next(reader), ["id", assay])
        for rowno, row in enumerate(reader, start=2):
            try:
                label = _parse_label(row[cols[assay]])
                rec_id = row[cols["id"]]
            except (IndexError, ValueError) as exc:
                report.malformed += 1
                log.warning("row %d skipped: %s", rowno, exc)
                continue
            if label is None:
                continue
            report.labeled_rows += 1
            if rec_id not in records:
                report.reject(rowno, rec_id, "", "missing_grid", "no packed grid with this id")
                continue
            report.accepted += 1
            ids.append(rec_id)
            grids.append(records[rec_id].bits)
            labels.append(label)
    return _finish(assay, ids, grids, labels, report, seed)


def load_tox21(path, assay_name: str, seed: int = 0) -> AssayDataset:
    assay = normalize_assay(assay_name)
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    if path.is_dir():
        return _load_packed_dir(path, assay, seed)
    return _load_csv(path, assay, seed)


def batches(dataset: AssayDataset, split: str, batch_size: int,
            epoch_seed: int | None = None) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (grids, labels, indices); the train split is reshuffled per ``epoch_seed``."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    idx = dataset.split(split)
    if split == "train":
        idx = idx[np.random.default_rng(epoch_seed).permutation(len(idx))]
    for start in range(0, len(idx), batch_size):
        chunk = idx[start:start + batch_size]
        yield dataset.grids[chunk], dataset.labels[chunk], chunk


# --- synthetic Tox21-format data ----------------------------------------------

_SUBSTITUENTS = ("O", "N", "F", "Cl", "Br", "C(=O)O", "c1ccccc1", "C#N", "S", "C", "OC")


def synthetic_smiles(rng: np.random.Generator) -> str:
    """A random acyclic carbon backbone carrying random substituents."""
    parts = []
    for _ in range(int(rng.integers(2, 8))):
        subs = rng.choice(len(_SUBSTITUENTS), size=int(rng.integers(0, 3)))
        parts.append("C" + "".join(f"({_SUBSTITUENTS[s]})" for s in subs))
    return "".join(parts)


def synthetic_label(smi: str, rng: np.random.Generator, noise: float = 0.1) -> int:
    active = ("Cl" in smi or "Br" in smi) and ("c1" in smi or "C#N" in smi)
    return int(active) ^ int(rng.random() < noise)


def write_synthetic_csv(path, n: int, seed: int = 0, assays=ASSAYS, noise: float = 0.1) -> Path:
    """Write ``n`` made-up molecules in the Tox21 CSV layout (every assay labeled)."""
    rng = np.random.default_rng(seed)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([a.upper() for a in assays] + ["mol_id", "smiles"])
        for i in range(n):
            smi = synthetic_smiles(rng)
            labels = [synthetic_label(smi, rng, noise) for _ in assays]
            w.writerow(labels + [f"SYN{i:05d}", smi])
    return path
