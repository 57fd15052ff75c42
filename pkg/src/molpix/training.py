"""Two-stage training (RMSprop, then decayed SGD with momentum) with
per-stage early stopping, rotation augmentation and 5-fold reporting."""

from __future__ import annotations

import csv
import logging
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .data import CLASSIFICATION, Dataset, make_splits, oversample, sample_weights
from .exceptions import MolpixError, NumericalFault, PixelCollision, LayoutTooLarge
from .layout import DepictedMol, layout
from .metrics import auc, rmse
from .net import NetSpec, Network, build, load_checkpoint, save_checkpoint
from .optim import RMSPROP, SGD_MOMENTUM, OptimizerState, step
from .raster import augment, rasterize
from .smiles import parse_smiles

log = logging.getLogger(__name__)

STAGES = (RMSPROP, SGD_MOMENTUM)


@dataclass
class TrainConfig:
    stage1_epochs: int = 50
    stage2_epochs: int = 50
    batch_size: int = 32
    patience: int | None = 25  # None disables early stopping
    augment: bool = True
    oversample: bool = True
    epoch_replication: int | None = None  # None: 10 for FreeSolv, 1 otherwise
    lr_ini: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    gamma: float = 0.92
    momentum: float = 0.9
    n_folds: int = 5
    min_records: int = 50
    test_share: float | None = None

    def __post_init__(self):
        for name in ("stage1_epochs", "stage2_epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 or None")
        if self.epoch_replication is not None and self.epoch_replication < 1:
            raise ValueError("epoch_replication must be >= 1")
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")

    def replication_for(self, dataset_name: str) -> int:
        if self.epoch_replication is not None:
            return self.epoch_replication
        return 10 if dataset_name.lower() == "freesolv" else 1

    def optimizer(self, stage: str) -> OptimizerState:
        return OptimizerState(stage, self.lr_ini, self.rho, self.eps, self.gamma, self.momentum)

    def epochs(self, stage: str) -> int:
        return self.stage1_epochs if stage == RMSPROP else self.stage2_epochs


# -- featurization ------------------------------------------------------------------

@dataclass
class Featurized:
    """Depictions and canonical (unrotated) images for the usable records."""

    dataset: Dataset
    mols: list[DepictedMol]
    images: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return self.dataset.labels


def depict(smiles: str) -> DepictedMol:
    return layout(parse_smiles(smiles))


def featurize(d: Dataset) -> Featurized:
    """Lay out and rasterize every record; failures are dropped and counted."""
    keep, mols, images = [], [], []
    skipped = Counter(d.skipped)
    for i, r in enumerate(d.records):
        try:
            m = depict(r.smiles)
            img = rasterize(m, r.id)
        except MolpixError as exc:
            skipped[type(exc).__name__] += 1
            log.warning("dropping %s (%s): %s", r.id, r.smiles, exc)
            continue
        keep.append(i)
        mols.append(m)
        images.append(img.pixels)
    sub = d.subset(keep)
    sub.skipped = skipped
    arr = np.stack(images) if images else np.zeros((0, 80, 80), np.uint8)
    return Featurized(sub, mols, arr)


# -- losses -----------------------------------------------------------------------

def loss_tensor(net: Network, out: T.Tensor, y: np.ndarray) -> T.Tensor:
    if net.spec.head == "classification":
        return T.softmax_xent(out, y.astype(np.int64))
    return T.mse_loss(out, y.reshape(-1, 1))


def per_sample_loss(head: str, out: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = out.astype(np.float64)
    if head == "classification":
        p = T.softmax(out)[np.arange(len(y)), y.astype(np.int64)]
        return -np.log(np.maximum(p, T.LOG_CLAMP))
    return (out[:, 0] - y) ** 2


def evaluate(net: Network, images: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None,
             batch_size: int = 64) -> tuple[float, float, np.ndarray]:
    """(weighted mean loss, metric, predictions) on fixed images without a graph."""
    outs = []
    with T.no_grad():
        for i in range(0, len(images), batch_size):
            outs.append(net.forward(images[i:i + batch_size]).data)
    out = np.concatenate(outs) if outs else np.zeros((0, net.spec.outputs))
    losses = per_sample_loss(net.spec.head, out, y)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)
    loss = float(np.sum(w * losses) / np.sum(w)) if len(y) else float("nan")
    if net.spec.head == "classification":
        pred = T.softmax(out.astype(np.float64))[:, 1]
        metric = auc(pred, y) if len(set(y.tolist())) == 2 else float("nan")
    else:
        pred = out[:, 0].astype(np.float64)
        metric = rmse(pred, y) if len(y) else float("nan")
    return loss, metric, pred


# -- one stage -------------------------------------------------------------------------

@dataclass
class CurveRow:
    fold: int
    stage: str
    epoch: int
    train_loss: float
    val_loss: float
    val_metric: float


@dataclass
class StageResult:
    stage: str
    epochs_run: int
    best_epoch: int
    best_val_loss: float
    curve: list[CurveRow]


def _epoch_images(fz: Featurized, order: np.ndarray, rng: np.random.Generator, use_augment: bool) -> np.ndarray:
    if not use_augment:
        return fz.images[order]
    out = np.empty((len(order), 80, 80), dtype=np.uint8)
    seeds = rng.integers(0, 2**63 - 1, size=len(order))
    for k, (i, s) in enumerate(zip(order, seeds)):
        try:
            out[k] = augment(fz.mols[i], int(s)).pixels
        except (PixelCollision, LayoutTooLarge):
            out[k] = fz.images[i]
    return out


def run_stage(net: Network, stage: str, fz: Featurized, train_idx: Sequence[int],
              val_idx: Sequence[int] | None, val_weights: np.ndarray | None, cfg: TrainConfig,
              seed_key: Sequence[int], replication: int = 1, fold: int = 0,
              progress: Callable[[CurveRow], None] | None = None) -> StageResult:
    """Train one optimizer stage; restores the best-validation parameters at the end.

    Without a validation set every epoch counts as an improvement, so the
    stage runs to its epoch cap and keeps the final parameters.
    """
    y = fz.labels
    params = net.parameters()
    state = cfg.optimizer(stage)
    base = np.asarray(train_idx, dtype=np.int64)
    best_flat, best_loss, best_epoch, stale = net.get_flat(), math.inf, -1, 0
    if stage != RMSPROP and val_idx is not None and len(val_idx):
        # a later stage must beat the parameters it started from
        vi = np.asarray(val_idx)
        best_loss = evaluate(net, fz.images[vi], y[vi], val_weights)[0]
    curve: list[CurveRow] = []
    epochs_run = 0
    for epoch in range(cfg.epochs(stage)):
        state.epoch = epoch
        rng = np.random.default_rng(np.random.SeedSequence([*seed_key, STAGES.index(stage), epoch]))
        order = rng.permutation(np.tile(base, replication))
        images = _epoch_images(fz, order, rng, cfg.augment)
        total, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            sl = slice(start, start + cfg.batch_size)
            net.zero_grad()
            loss = loss_tensor(net, net.forward(images[sl]), y[order[sl]])
            loss.backward()
            step(state, [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params],
                 [p.data for p in params])
            total += float(loss.data) * len(order[sl])
            seen += len(order[sl])
        epochs_run = epoch + 1
        train_loss = total / max(seen, 1)
        if val_idx is not None and len(val_idx):
            vi = np.asarray(val_idx)
            val_loss, val_metric, _ = evaluate(net, fz.images[vi], y[vi], val_weights)
        else:
            val_loss, val_metric = train_loss, float("nan")
        row = CurveRow(fold, stage, epoch, train_loss, val_loss, val_metric)
        curve.append(row)
        if progress:
            progress(row)
        if val_loss < best_loss or val_idx is None:
            best_flat, best_loss, best_epoch, stale = net.get_flat(), val_loss, epoch, 0
        else:
            stale += 1
            if cfg.patience is not None and stale >= cfg.patience:
                break
    net.set_flat(best_flat)
    return StageResult(stage, epochs_run, best_epoch, best_loss, curve)


def fit_network(net: Network, fz: Featurized, train_idx, val_idx, cfg: TrainConfig,
                seed_key: Sequence[int], replication: int = 1, fold: int = 0,
                stages: Sequence[str] = STAGES, progress=None) -> list[StageResult]:
    """Run the requested stages in order, each starting from the previous stage's best."""
    classification = net.spec.head == "classification"
    y = fz.labels
    train_list = oversample(train_idx, y) if classification and cfg.oversample else list(train_idx)
    val_w = None
    if val_idx is not None and classification and cfg.oversample:
        counts = sample_weights(val_idx, y)
        val_w = np.array([counts[i] for i in val_idx], dtype=np.float64)
    results = []
    for stage in stages:
        results.append(run_stage(net, stage, fz, train_list, val_idx, val_w, cfg, seed_key,
                                 replication, fold, progress))
    return results


# -- cross-validated protocol --------------------------------------------------------

@dataclass
class FoldResult:
    fold: int
    status: str
    n_train: int
    n_train_oversampled: int
    n_val: int
    n_test: int
    stage1_epochs: int = 0
    stage1_best_epoch: int = -1
    stage2_epochs: int = 0
    stage2_best_epoch: int = -1
    best_val_loss: float = float("nan")
    train_metric: float = float("nan")
    val_metric: float = float("nan")
    test_metric: float = float("nan")
    train_loss: float = float("nan")


@dataclass
class RunReport:
    metric: str
    spec: NetSpec
    param_count: int
    folds: list[FoldResult]
    curve: list[CurveRow] = field(default_factory=list)
    wall_time: float = 0.0
    threads: int = 1
    best_fold: int = -1

    def summary(self, column: str) -> tuple[float, float]:
        """Mean and sample standard deviation over the folds."""
        vals = np.array([getattr(f, column) for f in self.folds], dtype=np.float64)
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else float("nan")
        return float(np.mean(vals)), sd

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        cols = [f.name for f in fields(FoldResult)]
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "spec", "params", "metric"] + cols)
            for fr in self.folds:
                w.writerow([f"fold{fr.fold}", self.spec.label, self.param_count, self.metric]
                           + [_fmt(getattr(fr, c)) for c in cols])
            for agg, idx in (("mean", 0), ("std", 1)):
                row = []
                for c in cols:
                    if c.endswith("_metric") or c in ("best_val_loss", "train_loss"):
                        row.append(_fmt(self.summary(c)[idx]))
                    else:
                        row.append("")
                w.writerow([agg, self.spec.label, self.param_count, self.metric] + row)
        return path

    def curve_to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f.name for f in fields(CurveRow)])
            for r in self.curve:
                w.writerow([_fmt(v) for v in asdict(r).values()])
        return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def train(spec: NetSpec, dataset: Dataset, config: TrainConfig, seed: int,
          out_dir: str | Path | None = None, resume: bool = False, progress=None,
          featurized: Featurized | None = None) -> tuple[Network, RunReport]:
    """Full protocol: split, then per fold two stages with early stopping,
    evaluation of the fold's best model on train/validation/test.

    Returns the network of the fold with the lowest best validation loss.
    With ``out_dir``, stage checkpoints are written per fold; with ``resume``
    completed stages are loaded instead of retrained.
    """
    started = time.perf_counter()
    fz = featurized or featurize(dataset)
    plan = make_splits(fz.dataset, seed, config.min_records, config.test_share, config.n_folds)
    y = fz.labels
    classification = spec.head == "classification"
    replication = config.replication_for(dataset.name)
    out = Path(out_dir) if out_dir is not None else None
    folds, curve = [], []
    best_net, best_loss, best_fold = None, math.inf, -1
    test = np.asarray(plan.test)
    for f, (train_idx, val_idx) in enumerate(plan.folds):
        expanded = oversample(train_idx, y) if classification and config.oversample else train_idx
        fr = FoldResult(f, "ok", len(train_idx), len(expanded), len(val_idx), len(plan.test))
        net = build(spec).init_params(seed * 1000 + f)
        try:
            stage_results = []
            for stage_no, stage in enumerate(STAGES, start=1):
                ckpt = out / f"fold{f}_stage{stage_no}.ckpt" if out else None
                if resume and ckpt is not None and ckpt.exists():
                    net, meta = load_checkpoint(ckpt, spec)
                    res = StageResult(stage, meta["epochs_run"], meta["best_epoch"], meta["best_val_loss"],
                                      [CurveRow(**r) for r in meta["curve"]])
                else:
                    (res,) = fit_network(net, fz, train_idx, val_idx, config, (seed, f), replication, f,
                                         (stage,), progress)
                    if ckpt is not None:
                        save_checkpoint(net, ckpt, {"fold": f, "stage": stage, "epochs_run": res.epochs_run,
                                                    "best_epoch": res.best_epoch,
                                                    "best_val_loss": res.best_val_loss,
                                                    "curve": [asdict(r) for r in res.curve]})
                stage_results.append(res)
                curve += res.curve
            s1, s2 = stage_results
            fr.stage1_epochs, fr.stage1_best_epoch = s1.epochs_run, s1.best_epoch
            fr.stage2_epochs, fr.stage2_best_epoch = s2.epochs_run, s2.best_epoch
            tr = np.asarray(train_idx)
            vi = np.asarray(val_idx)
            fr.train_loss, fr.train_metric, _ = evaluate(net, fz.images[tr], y[tr])
            val_w = None
            if classification and config.oversample:
                counts = sample_weights(val_idx, y)
                val_w = np.array([counts[i] for i in val_idx], dtype=np.float64)
            fr.best_val_loss, fr.val_metric, _ = evaluate(net, fz.images[vi], y[vi], val_w)
            if len(test):
                _, fr.test_metric, _ = evaluate(net, fz.images[test], y[test])
            if fr.best_val_loss < best_loss:
                best_net, best_loss, best_fold = net, fr.best_val_loss, f
        except NumericalFault as exc:
            log.error("fold %d aborted: %s", f, exc)
            fr.status = "NumericalFault"
        folds.append(fr)
    report = RunReport("auc" if classification else "rmse", spec, build(spec).param_count, folds, curve,
                       time.perf_counter() - started, _threads(), best_fold)
    if best_net is None:
        best_net = build(spec)
    return best_net, report


def _threads() -> int:
    try:
        from threadpoolctl import threadpool_info
        counts = [i.get("num_threads", 1) for i in threadpool_info() if i.get("user_api") == "blas"]
        return max(counts) if counts else 1
    except ImportError:  # pragma: no cover
        return 1
