"""Command-line entry point: encode, train, transfer, ablate, eval, verify, bench.

Config files are plain ``key = value`` lines; ``#`` starts a comment.  Keys::

    assay            Tox21 assay name (default nr-ahr)
    variant          qnn or cnn (default qnn)
    epochs           epochs for ``train`` (default 5)
    classical_epochs epochs after ``transfer``/``ablate`` (default 5)
    batch_size       default 32
    seed             parameter-initialization seed (default 0)
    split_seed       train/test split seed (default 0)
    shuffle_seed     per-epoch batch-order seed (default 0)
    ablation_seed    seed of the random filter used by ``ablate`` (default 1)
    conv2_filters    second convolution width (default 4)
    data             Tox21 CSV or packed-grid directory
    run_dir          output directory (default runs/default)
    threads          BLAS/OpenMP thread cap (default: library default)

Environment overrides (applied over the file, under command-line flags):
``Q2C_DATA`` -> data, ``Q2C_RUN_DIR`` -> run_dir, ``Q2C_THREADS`` -> threads.

Errors are reported as one JSON object on stderr with a nonzero exit code:
2 for configuration or usage problems, 1 for everything else.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import data as data_mod
from . import qconv, smiles, train, transfer, verify
from .metrics import CurveLogger
from .model import ModelCheckpoint, ModelSpec
from .qsim import resource_count

ENV_OVERRIDES = {"Q2C_DATA": "data", "Q2C_RUN_DIR": "run_dir", "Q2C_THREADS": "threads"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    assay: str = "nr-ahr"
    variant: str = "qnn"
    epochs: int = 5
    classical_epochs: int = 5
    batch_size: int = 32
    seed: int = 0
    split_seed: int = 0
    shuffle_seed: int = 0
    ablation_seed: int = 1
    conv2_filters: int = 4
    data: str = "data/tox21.csv"
    run_dir: str = "runs/default"
    threads: int = 0

    def validate(self) -> RunConfig:
        data_mod.normalize_assay(self.assay)
        if self.variant not in ("qnn", "cnn"):
            raise ConfigError(f"variant must be qnn or cnn, got {self.variant!r}")
        for name in ("epochs", "classical_epochs", "threads"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.batch_size < 1 or self.conv2_filters < 1:
            raise ConfigError("batch_size and conv2_filters must be >= 1")
        return self

    def model_spec(self) -> ModelSpec:
        return ModelSpec(variant=self.variant, conv2_filters=self.conv2_filters)

    def dump(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


def parse_config(text: str) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if types[key] in ("int", int):
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}", lineno) from None
        else:
            values[key] = value
    return RunConfig(**values)


def load_config(path: str | None, env=None) -> RunConfig:
    env = os.environ if env is None else env
    cfg = parse_config(Path(path).read_text()) if path else RunConfig()
    for var, key in ENV_OVERRIDES.items():
        if env.get(var):
            val = env[var]
            if key == "threads":
                try:
                    val = int(val)
                except ValueError:
                    raise ConfigError(f"{var} must be an integer, got {val!r}") from None
            cfg = replace(cfg, **{key: val})
    return cfg


# --- commands --------------------------------------------------------------------

def _load_dataset(cfg: RunConfig, run_dir: Path | None):
    ds = data_mod.load_tox21(cfg.data, cfg.assay, seed=cfg.split_seed)
    if run_dir is not None and ds.report is not None:
        ds.report.write(run_dir / "ingestion.json")
        ds.report.write_rejections(run_dir / "rejections.jsonl")
    return ds


def _checkpoint_saver(run_dir: Path, prefix: str):
    ckdir = run_dir / "checkpoints"
    ckdir.mkdir(parents=True, exist_ok=True)

    def save(ckpt: ModelCheckpoint, res=None):
        path = ckdir / f"{prefix}_epoch_{ckpt.epoch:03d}.ckpt"
        ckpt.save(path)
        if res is not None:
            print(f"epoch {res.epoch:3d} [{res.phase}] train_loss={res.train_loss:.4f} "
                  f"test_loss={res.test_loss:.4f} test_auc={res.test_auc:.4f}")
        return path

    return save


def cmd_encode(args) -> int:
    if args.smiles:
        grid = smiles.encode(args.smiles)
        rows = [np.flatnonzero(grid.bits[r]).tolist() for r in range(grid.length)]
        print(json.dumps({"smiles": args.smiles, "length": grid.length, "rows": rows}))
        return 0
    if not args.input or not args.output:
        raise UsageError("encode needs INPUT and OUTPUT, or --smiles")
    rej = args.rejections or str(Path(args.output).with_suffix(".rejections.jsonl"))
    ok, bad = smiles.encode_file(args.input, args.output, rej)
    print(json.dumps({"accepted": ok, "rejected": bad, "output": args.output, "rejections": rej}))
    return 0


def _prepare_run(cfg: RunConfig) -> Path:
    run_dir = Path(cfg.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(cfg.dump())
    return run_dir


def cmd_train(args, cfg: RunConfig) -> int:
    run_dir = _prepare_run(cfg)
    ds = _load_dataset(cfg, run_dir)
    spec = cfg.model_spec()
    ckpt = ModelCheckpoint.fresh(spec, cfg.seed)
    print(f"model {spec.variant}: {spec.param_count()} parameters; "
          f"{len(ds.train_idx)} train / {len(ds.test_idx)} test molecules")
    save = _checkpoint_saver(run_dir, spec.variant)
    save(ckpt)
    logger = CurveLogger(run_dir / "metrics.csv")
    train.run(ckpt, ds, cfg.epochs, cfg.batch_size, cfg.shuffle_seed, logger, on_epoch=save)
    return 0


def _continue(args, cfg: RunConfig, kind: str) -> int:
    src = ModelCheckpoint.load(args.checkpoint)
    if kind == "transfer":
        ckpt = transfer.transfer_checkpoint(src)
    else:
        ckpt = transfer.ablate_checkpoint(src, cfg.ablation_seed if args.seed is None else args.seed)
    run_dir = _prepare_run(cfg)
    ds = _load_dataset(cfg, run_dir)
    print(f"{kind}: {src.param_count()} -> {ckpt.param_count()} parameters at epoch {ckpt.epoch}")
    save = _checkpoint_saver(run_dir, kind)
    save(ckpt)
    logger = CurveLogger(run_dir / "metrics.csv")
    train.run(ckpt, ds, cfg.classical_epochs, cfg.batch_size, cfg.shuffle_seed, logger, on_epoch=save)
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    ckpt = ModelCheckpoint.load(args.checkpoint)
    ds = _load_dataset(cfg, None)
    loss, auc, prob = train.evaluate(ckpt, ds, args.split)
    idx = ds.split(args.split)
    if args.predictions:
        with open(args.predictions, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "label", "prediction"])
            for i, p in zip(idx, prob):
                w.writerow([ds.ids[i], int(ds.labels[i]), repr(float(p))])
    print(json.dumps({"checkpoint": str(args.checkpoint), "variant": ckpt.spec.variant,
                      "epoch": ckpt.epoch, "split": args.split, "n": int(len(idx)),
                      "loss": loss, "auc": auc}))
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(quick=args.quick)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


BENCH_RESOURCE_COLUMNS = ("n", "algorithm", "qubits", "two_qubit_gates", "composite_gates")
BENCH_TIMING_COLUMNS = ("grid", "density", "dedup_seconds", "naive_seconds", "speedup",
                        "dedup_circuits", "naive_evaluations")


def cmd_bench(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "resources.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_RESOURCE_COLUMNS)
        for n in range(1, args.n_max + 1):
            for algo in ("hadamard", "swap"):
                rc = resource_count(n, algo)
                w.writerow([n, rc.algorithm, rc.qubits, rc.two_qubit_gates, rc.composite_gates])
    rng = np.random.default_rng(args.seed)
    from .ansatz import AnsatzParams
    theta = AnsatzParams.uniform(rng)
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_TIMING_COLUMNS)
        for g in range(args.grids):
            grid = verify.random_grid(rng, args.density)
            positions = (grid.shape[0] - 1) * (grid.shape[1] - 1)
            distinct = len(set(np.unique(qconv.patch_keys(grid)).tolist()) - {0})
            t0 = time.perf_counter()
            fast = qconv.qconv_forward(grid, theta, 0.0)
            t1 = time.perf_counter()
            slow = qconv.naive_qconv_forward(grid, theta, 0.0)
            t2 = time.perf_counter()
            if not np.array_equal(fast, slow):
                raise RuntimeError("dedup and naive outputs differ")
            w.writerow([g, args.density, f"{t1 - t0:.6f}", f"{t2 - t1:.6f}",
                        f"{(t2 - t1) / (t1 - t0):.1f}", distinct, positions])
    for name in ("resources.csv", "timing.csv"):
        print((out / name).read_text(), end="")
    return 0


# --- wiring ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="q2c", description=__doc__.split("\n", 1)[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="encode SMILES into packed grids")
    e.add_argument("input", nargs="?")
    e.add_argument("output", nargs="?")
    e.add_argument("--rejections")
    e.add_argument("--smiles", help="encode one string and print its set bits per row")

    def with_config(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--data")
        sp.add_argument("--run-dir")
        sp.add_argument("--threads", type=int)
        return sp

    with_config(sub.add_parser("train", help="train a qnn or cnn model"))
    for name in ("transfer", "ablate"):
        sp = with_config(sub.add_parser(name, help=f"{name} a qnn checkpoint and keep training"))
        sp.add_argument("--checkpoint", required=True)
        if name == "ablate":
            sp.add_argument("--seed", type=int, help="random filter seed (default: ablation_seed)")
        else:
            sp.set_defaults(seed=None)
    ev = with_config(sub.add_parser("eval", help="loss and ROC-AUC of a checkpoint"))
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--split", choices=("train", "test"), default="test")
    ev.add_argument("--predictions", help="write per-molecule predictions to this CSV")

    v = sub.add_parser("verify", help="run the oracle suite")
    v.add_argument("--quick", action="store_true", help="10%% of the default draws")

    b = sub.add_parser("bench", help="resource counts and dedup timing")
    b.add_argument("--n-max", type=int, default=8)
    b.add_argument("--grids", type=int, default=1)
    b.add_argument("--density", type=float, default=0.1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out-dir", default="bench")
    return p


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    flags = {"data": args.data, "run_dir": args.run_dir, "threads": args.threads}
    return replace(cfg, **{k: v for k, v in flags.items() if v is not None}).validate()


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "line", None) is not None:
        payload["line"] = exc.line
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "encode":
            return cmd_encode(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "bench":
            return cmd_bench(args)
        cfg = _resolve(args)
        with threadpool_limits(limits=cfg.threads or None):
            if args.command == "train":
                return cmd_train(args, cfg)
            if args.command in ("transfer", "ablate"):
                return _continue(args, cfg, args.command)
            return cmd_eval(args, cfg)
    except (ConfigError, UsageError, data_mod.UnknownAssay) as exc:
        return _fail(exc, 2)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON report
        return _fail(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
