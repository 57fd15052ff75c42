"""Command line entry point: render, inspect, train, predict.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import yaml

from .data import CLASSIFICATION, REGRESSION, load_csv
from .exceptions import ConfigError, MolpixError
from .net import NetSpec, build, load_checkpoint, save_checkpoint
from .raster import export_pgm, rasterize
from .training import TrainConfig, depict, train

log = logging.getLogger("molpix")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

# Published totals for the (tier, filters) grid, used by `inspect` for comparison.
REFERENCE_PARAM_COUNTS = {
    (1, 16): 69_875, (1, 32): 276_603, (1, 64): 1_100_967,
    (2, 16): 109_808, (2, 32): 435_516, (2, 64): 1_735_324,
    (3, 16): 149_741, (3, 32): 594_429, (3, 64): 2_369_681,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- config -------------------------------------------------------------------------

@dataclass
class RunConfig:
    dataset: str = ""
    name: str = "custom"
    task: str = ""
    kind: str | None = None
    tier: int = 1
    filters: int = 16
    head: str | None = None
    residual_scale: float = 1.0
    seed: int = 0
    out: str = "run"
    stage1_epochs: int = 50
    stage2_epochs: int = 50
    batch_size: int = 32
    patience: int | None = 25
    augment: bool = True
    oversample: bool = True
    epoch_replication: int | None = None
    min_records: int = 50
    test_share: float | None = None
    threads: int = 1

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat key/value mapping")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls()
        for key, value in raw.items():
            setattr(cfg, key, _coerce(key, value, known[key].type))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.dataset:
            raise ConfigError("'dataset' is required")
        if not self.task:
            raise ConfigError("'task' is required")
        if self.kind not in (None, CLASSIFICATION, REGRESSION):
            raise ConfigError(f"kind must be {CLASSIFICATION!r} or {REGRESSION!r}")
        if self.head not in (None, CLASSIFICATION, REGRESSION):
            raise ConfigError(f"head must be {CLASSIFICATION!r} or {REGRESSION!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.test_share is not None and not 0 <= self.test_share < 1:
            raise ConfigError("test_share must lie in [0, 1)")
        try:
            NetSpec(self.tier, self.filters, self.head or CLASSIFICATION, self.residual_scale)
            self.train_config()
        except (MolpixError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.stage1_epochs, self.stage2_epochs, self.batch_size, self.patience,
                           self.augment, self.oversample, self.epoch_replication,
                           min_records=self.min_records, test_share=self.test_share)


def _coerce(key: str, value, annotation: str):
    base = annotation.replace(" | None", "")
    if value is None:
        if "None" not in annotation:
            raise ConfigError(f"{key} may not be null")
        return None
    if base == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}")
        return value
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def load_config(path: str | Path | None, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat key/value mapping")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(raw)


@contextlib.contextmanager
def _thread_limit(n: int):
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


# -- inputs ---------------------------------------------------------------------------

def _read_molecules(smiles: Sequence[str], csv_path: str | None) -> list[tuple[str, str]]:
    """(id, smiles) pairs from positional SMILES or a CSV with a smiles column."""
    items = [(f"mol{i + 1}", s) for i, s in enumerate(smiles)]
    if csv_path:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            cols = {c.strip().lower(): c for c in reader.fieldnames or []}
            if "smiles" not in cols:
                raise ConfigError(f"{csv_path}: no 'smiles' column")
            for i, row in enumerate(reader, start=1):
                rid = row[cols["id"]].strip() if "id" in cols else f"row{i}"
                items.append((rid, row[cols["smiles"]].strip()))
    return items


def _safe_name(rid: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in rid) or "mol"


# -- commands --------------------------------------------------------------------------

def cmd_render(args) -> int:
    mols = _read_molecules(args.smiles, args.csv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = 0
    with (out / "manifest.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "smiles", "status", "reason", "file"])
        for rid, smi in mols:
            try:
                img = rasterize(depict(smi), rid)
                path = export_pgm(img, out / f"{_safe_name(rid)}.pgm")
                w.writerow([rid, smi, "ok", "", path.name])
                ok += 1
            except MolpixError as exc:
                w.writerow([rid, smi, type(exc).__name__, str(exc), ""])
    print(f"rendered {ok} of {len(mols)} molecules into {out}")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_inspect(args) -> int:
    specs = ([NetSpec(t, f, args.head) for t in (1, 2, 3) for f in (16, 32, 64)] if args.all
             else [NetSpec(args.tier, args.filters, args.head)])
    for spec in specs:
        net = build(spec)
        print(f"== {spec.label} ({spec.head})")
        if not args.all:
            print(net.format_ledger())
        line = f"{spec.label} total {net.param_count:,}"
        ref = REFERENCE_PARAM_COUNTS.get((spec.tier, spec.filters))
        if ref is not None and spec.head == CLASSIFICATION:
            diff = (net.param_count - ref) / ref
            line += f" reference {ref:,} ({'match' if diff == 0 else f'{diff:+.2%}'})"
        print(line)
    return EXIT_OK


def cmd_train(args) -> int:
    overrides = {"seed": args.seed, "out": args.out, "tier": args.tier, "filters": args.filters,
                 "task": args.task, "threads": args.threads, "dataset": args.dataset}
    cfg = load_config(args.config, overrides)
    data_path = Path(cfg.dataset)
    if not data_path.is_file():
        raise ConfigError(f"dataset file {data_path} does not exist")
    dataset = load_csv(data_path, cfg.task, cfg.name, cfg.kind)
    head = cfg.head or dataset.kind
    spec = NetSpec(cfg.tier, cfg.filters, head, cfg.residual_scale)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        log.info("fold %d %s epoch %d train %.4f val %.4f metric %.4f", row.fold, row.stage, row.epoch,
                 row.train_loss, row.val_loss, row.val_metric)

    with _thread_limit(cfg.threads):
        net, report = train(spec, dataset, cfg.train_config(), cfg.seed, out, args.resume, progress)
    report.threads = cfg.threads
    report.to_csv(out / "report.csv")
    report.curve_to_csv(out / "learning_curve.csv")
    save_checkpoint(net, out / "model.ckpt", {"best_fold": report.best_fold, "task": cfg.task,
                                              "dataset": cfg.name, "seed": cfg.seed})
    (out / "run.json").write_text(json.dumps({
        "wall_time_s": round(report.wall_time, 3), "threads": cfg.threads,
        "records": len(dataset), "skipped": dict(dataset.skipped), "best_fold": report.best_fold,
        "param_count": report.param_count,
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    mean, sd = report.summary("val_metric")
    print(f"{spec.label} {report.metric}: validation {mean:.4f} +/- {sd:.4f}; artifacts in {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    mols = _read_molecules(args.smiles, args.csv)
    net, _ = load_checkpoint(args.checkpoint)
    if args.tier is not None and args.tier != net.spec.tier or \
            args.filters is not None and args.filters != net.spec.filters:
        raise MolpixError(f"checkpoint holds {net.spec.label}, requested "
                          f"T{args.tier or net.spec.tier}_F{args.filters or net.spec.filters}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    column = "probability" if net.spec.head == CLASSIFICATION else "value"
    with _thread_limit(args.threads), out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "smiles", column, "status", "reason"])
        for rid, smi in mols:
            try:
                img = rasterize(depict(smi), rid)
            except MolpixError as exc:
                w.writerow([rid, smi, "", type(exc).__name__, str(exc)])
                continue
            value = float(net.predict(img.pixels[None])[0])
            w.writerow([rid, smi, f"{value:.6f}", "ok", ""])
    print(f"wrote {len(mols)} predictions to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="molpix", description="Molecule images and Inception-ResNet property models.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("render", help="write 80x80 PGM images and a manifest")
    r.add_argument("smiles", nargs="*")
    r.add_argument("--csv", help="CSV with a smiles column (and optional id)")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)

    i = sub.add_parser("inspect", help="print the layer ledger and parameter count")
    i.add_argument("--tier", type=int, default=1)
    i.add_argument("--filters", type=int, default=32)
    i.add_argument("--head", choices=[CLASSIFICATION, REGRESSION], default=CLASSIFICATION)
    i.add_argument("--all", action="store_true", help="all tiers 1-3 x filters 16/32/64")
    i.set_defaults(func=cmd_inspect)

    t = sub.add_parser("train", help="run the cross-validated training protocol")
    t.add_argument("--config")
    t.add_argument("--dataset")
    t.add_argument("--task")
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--tier", type=int)
    t.add_argument("--filters", type=int)
    t.add_argument("--threads", type=int)
    t.add_argument("--resume", action="store_true", help="reuse stage checkpoints found in --out")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="score molecules with a saved checkpoint")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("smiles", nargs="*")
    pr.add_argument("--csv")
    pr.add_argument("--out", required=True)
    pr.add_argument("--tier", type=int, help="fail unless the checkpoint has this tier")
    pr.add_argument("--filters", type=int, help="fail unless the checkpoint has this width")
    pr.add_argument("--threads", type=int, default=1)
    pr.set_defaults(func=cmd_predict)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"molpix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"molpix: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MolpixError, OSError, ValueError) as exc:
        print(f"molpix: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
