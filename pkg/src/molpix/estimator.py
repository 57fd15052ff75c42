"""scikit-learn compatible wrappers: an image encoder and two network estimators."""

from __future__ import annotations

import numbers
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_is_fitted

from .data import CLASSIFICATION, REGRESSION, Dataset, Record
from .exceptions import MolpixError
from .net import NetSpec, Network, build, load_checkpoint, save_checkpoint
from .raster import GRID_SIZE, augment, rasterize
from .training import Featurized, TrainConfig, depict, fit_network

IMAGE_SHAPE = (GRID_SIZE, GRID_SIZE)


def check_smiles(X) -> list[str]:
    """1-D sequence of SMILES strings; a single string is rejected."""
    if isinstance(X, str):
        raise ValueError("expected a sequence of SMILES strings, got a single string")
    items = list(np.asarray(X, dtype=object).reshape(-1)) if not isinstance(X, list) else X
    bad = [type(s).__name__ for s in items if not isinstance(s, str)]
    if bad:
        raise ValueError(f"SMILES inputs must be str, found {sorted(set(bad))}")
    return items


def check_images(X) -> np.ndarray:
    """(n, 80, 80) integer code images; (n, 80, 80, 1) is squeezed."""
    arr = np.asarray(X)
    if arr.ndim == 4 and arr.shape[-1] == 1:
        arr = arr[..., 0]
    if arr.ndim != 3 or arr.shape[1:] != IMAGE_SHAPE:
        raise ValueError(f"expected images of shape (n, 80, 80), got {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
        raise ValueError("image codes must lie in [0, 255]")
    return arr.astype(np.uint8)


def is_image_input(X) -> bool:
    if isinstance(X, (str, list)):
        return False
    arr = np.asarray(X)
    return arr.dtype != object and arr.ndim >= 3


class MolImageEncoder(TransformerMixin, BaseEstimator):
    """SMILES -> (n, 80, 80) uint8 code images.

    With ``augment=True`` each molecule is rotated by a random angle drawn
    from ``random_state``. ``on_error="blank"`` yields an all-vacuum image for
    molecules that cannot be parsed or depicted instead of raising.
    """

    def __init__(self, augment: bool = False, random_state: int | None = None, on_error: str = "raise"):
        self.augment = augment
        self.random_state = random_state
        self.on_error = on_error

    def fit(self, X, y=None):
        if self.on_error not in ("raise", "blank"):
            raise ValueError(f"on_error must be 'raise' or 'blank', got {self.on_error!r}")
        check_smiles(X)
        self.n_features_in_ = 1
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        smiles = check_smiles(X)
        rng = np.random.default_rng(self.random_state)
        out = np.zeros((len(smiles),) + IMAGE_SHAPE, dtype=np.uint8)
        self.failures_ = {}
        for i, s in enumerate(smiles):
            try:
                m = depict(s)
                img = augment(m, rng) if self.augment else rasterize(m)
                out[i] = img.pixels
            except MolpixError as exc:
                if self.on_error == "raise":
                    raise
                self.failures_[i] = f"{type(exc).__name__}: {exc}"
        return out


class _InceptionEstimator(BaseEstimator):
    _head = CLASSIFICATION

    def __init__(self, tier: int = 1, filters: int = 16, residual_scale: float = 1.0,
                 stage1_epochs: int = 50, stage2_epochs: int = 50, batch_size: int = 32,
                 patience: int | None = 25, augment: bool = True, oversample: bool = True,
                 epoch_replication: int = 1, validation_fraction: float = 0.0,
                 random_state: int = 0):
        self.tier = tier
        self.filters = filters
        self.residual_scale = residual_scale
        self.stage1_epochs = stage1_epochs
        self.stage2_epochs = stage2_epochs
        self.batch_size = batch_size
        self.patience = patience
        self.augment = augment
        self.oversample = oversample
        self.epoch_replication = epoch_replication
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    # -- helpers ------------------------------------------------------------------

    def _spec(self) -> NetSpec:
        return NetSpec(self.tier, self.filters, self._head, self.residual_scale)

    def _config(self, with_validation: bool) -> TrainConfig:
        return TrainConfig(self.stage1_epochs, self.stage2_epochs, self.batch_size,
                           self.patience if with_validation else None, self.augment, self.oversample,
                           self.epoch_replication)

    def _featurize(self, X, y: np.ndarray) -> Featurized:
        kind = CLASSIFICATION if self._head == CLASSIFICATION else REGRESSION
        if is_image_input(X):
            images = check_images(X)
            records = [Record(str(i), "", float(v)) for i, v in enumerate(y)]
            return Featurized(Dataset(records, kind), [None] * len(images), images)
        smiles = check_smiles(X)
        mols = [depict(s) for s in smiles]
        images = np.stack([rasterize(m).pixels for m in mols]) if mols else np.zeros((0,) + IMAGE_SHAPE, np.uint8)
        records = [Record(str(i), s, float(v)) for i, (s, v) in enumerate(zip(smiles, y))]
        return Featurized(Dataset(records, kind), mols, images)

    def _images(self, X) -> np.ndarray:
        if is_image_input(X):
            return check_images(X)
        return MolImageEncoder().fit(X).transform(X)

    def _encode_targets(self, y) -> np.ndarray:
        return np.asarray(y, dtype=np.float64).reshape(-1)

    def fit(self, X, y):
        y_enc = self._encode_targets(y)
        n = len(y_enc)
        if n == 0:
            raise ValueError("cannot fit on an empty training set")
        if not isinstance(self.validation_fraction, numbers.Real) or not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        fz = self._featurize(X, y_enc)
        if len(fz.images) != n:
            raise ValueError(f"{len(fz.images)} samples but {n} targets")
        use_augment = self.augment and not is_image_input(X)
        idx = np.arange(n)
        val = None
        if self.validation_fraction > 0:
            strat = y_enc if self._head == CLASSIFICATION else None
            idx, val = train_test_split(idx, test_size=self.validation_fraction,
                                        random_state=self.random_state, stratify=strat)
            idx, val = sorted(idx.tolist()), sorted(val.tolist())
        cfg = self._config(val is not None)
        cfg.augment = use_augment
        net = build(self._spec()).init_params(self.random_state)
        self.stages_ = fit_network(net, fz, list(idx), val, cfg, (self.random_state,),
                                   self.epoch_replication)
        self.history_ = [row for s in self.stages_ for row in s.curve]
        self.network_ = net
        self.n_features_in_ = 1
        return self

    def _raw(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return self.network_.predict(self._images(X))

    def save(self, path: str | Path) -> Path:
        check_is_fitted(self, "network_")
        meta = {"estimator": type(self).__name__, "params": self.get_params()}
        if hasattr(self, "classes_"):
            meta["classes"] = self.classes_.tolist()
        return save_checkpoint(self.network_, path, meta)

    @classmethod
    def load(cls, path: str | Path):
        net, meta = load_checkpoint(path)
        est = cls(**meta.get("params", {}))
        if net.spec.head != est._head:
            raise ValueError(f"checkpoint holds a {net.spec.head} network, not a {est._head} one")
        est.network_ = net
        est.n_features_in_ = 1
        if "classes" in meta:
            est.classes_ = np.asarray(meta["classes"])
        return est


class InceptionClassifier(ClassifierMixin, _InceptionEstimator):
    """Binary classifier with a 2-way softmax head."""

    _head = CLASSIFICATION

    def _encode_targets(self, y) -> np.ndarray:
        y = np.asarray(y).reshape(-1)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"binary targets required, got classes {classes.tolist()}")
        self.classes_ = classes
        return (y == classes[1]).astype(np.float64)

    def predict_proba(self, X) -> np.ndarray:
        p1 = self._raw(X).astype(np.float64)
        return np.column_stack([1 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return self.classes_[(self.predict_proba(X)[:, 1] >= 0.5).astype(int)]


class InceptionRegressor(RegressorMixin, _InceptionEstimator):
    """Single-output regressor with a linear head and squared-error loss."""

    _head = REGRESSION

    def __init__(self, tier: int = 1, filters: int = 16, residual_scale: float = 1.0,
                 stage1_epochs: int = 50, stage2_epochs: int = 50, batch_size: int = 32,
                 patience: int | None = 25, augment: bool = True, oversample: bool = False,
                 epoch_replication: int = 10, validation_fraction: float = 0.0,
                 random_state: int = 0):
        super().__init__(tier, filters, residual_scale, stage1_epochs, stage2_epochs, batch_size,
                         patience, augment, oversample, epoch_replication, validation_fraction,
                         random_state)

    def predict(self, X) -> np.ndarray:
        return self._raw(X).astype(np.float64)
