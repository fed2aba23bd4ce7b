"""Model variants, K-fold protocols and the Adam training loop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .homogenization import Dataset
from .nn import (
    Architecture,
    Batch,
    GraphInput,
    ModelParams,
    NumericError,
    Normalization,
    init_params,
    loss_and_param_grads,
    predict,
)

VARIANTS = ("M_L2_mlp", "M_H1_mlp", "M_H1_hybrid", "M_H1_reg")
UNITS = ("sample", "rve")


def variant_spec(variant: str) -> tuple[str, bool, bool]:
    """(loss kind, uses graph branch, regularized graph branch)."""
    table = {
        "M_L2_mlp": ("L2", False, False),
        "M_H1_mlp": ("H1", False, False),
        "M_H1_hybrid": ("H1", True, False),
        "M_H1_reg": ("H1", True, True),
    }
    if variant not in table:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return table[variant]


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "M_H1_reg"
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 20
    decay: float = 0.5
    min_learning_rate: float = 1e-6
    validation_fraction: float = 0.1
    validation_unit: str = "sample"  # "rve" holds out whole RVEs
    seed: int = 0
    normalization: str = "minmax"  # or "none"
    dropout_rate: float = 0.2
    l2_coefficient: float = 1e-4

    def __post_init__(self):
        variant_spec(self.variant)
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.validation_unit not in UNITS:
            raise ValueError(f"validation_unit must be one of {UNITS}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.normalization not in ("minmax", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def loss_kind(self) -> str:
        return variant_spec(self.variant)[0]

    def architecture(self, base: Architecture | None = None) -> Architecture:
        _, use_graph, reg = variant_spec(self.variant)
        base = base or Architecture()
        return replace(
            base,
            use_graph=use_graph,
            dropout_rate=self.dropout_rate if reg else 0.0,
            l2_coefficient=self.l2_coefficient if reg else 0.0,
        )


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class ReduceOnPlateau:
    def __init__(self, optimizer: Adam, patience=20, factor=0.5, min_lr=1e-6):
        self.opt, self.patience, self.factor, self.min_lr = optimizer, patience, factor, min_lr
        self.best = np.inf
        self.wait = 0

    def step(self, value: float) -> bool:
        """Record a validation value; returns True if it is a new best."""
        if value < self.best:
            self.best = value
            self.wait = 0
            return True
        self.wait += 1
        if self.wait >= self.patience:
            self.opt.lr = max(self.opt.lr * self.factor, self.min_lr)
            self.wait = 0
        return False


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = 0
    wall_clock: float = 0.0

    def rows(self):
        for i, (t, v, lr) in enumerate(zip(self.train_loss, self.val_loss, self.lr)):
            yield {"epoch": i + 1, "train_loss": t, "val_loss": v, "lr": lr}


def graph_table(dataset: Dataset, graphs: dict | None):
    """Graph list plus per-sample index into it."""
    if graphs is None:
        return [], np.zeros(len(dataset), dtype=np.int64)
    keys = sorted(int(k) for k in np.unique(dataset.rve_id))
    missing = [k for k in keys if k not in graphs]
    if missing:
        raise KeyError(f"no graph for RVE ids {missing}")
    pos = {k: i for i, k in enumerate(keys)}
    return [graphs[k] for k in keys], np.array([pos[int(r)] for r in dataset.rve_id], dtype=np.int64)


def _batch(dataset: Dataset, gidx, idx) -> Batch:
    return Batch(gidx[idx], dataset.C[idx], dataset.psi[idx], dataset.S[idx])


def evaluate_loss(params, glist, gidx, dataset: Dataset, kind: str) -> float:
    loss, _ = loss_and_param_grads(params, glist, _batch(dataset, gidx, np.arange(len(dataset))), kind)
    return loss


def validation_split(dataset: Dataset, config: TrainConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """(validation rows, training rows). Whole RVEs are held out when
    ``validation_unit`` is "rve" and there are at least two of them."""
    n = len(dataset)
    ids = dataset.rve_ids()
    if config.validation_unit == "rve" and len(ids) >= 2:
        n_val = min(max(int(round(config.validation_fraction * len(ids))), 1), len(ids) - 1)
        held = rng.permutation(ids)[:n_val] if config.validation_fraction > 0 else ids[:0]
        mask = np.isin(dataset.rve_id, held)
        return np.flatnonzero(mask), np.flatnonzero(~mask)
    perm = rng.permutation(n)
    n_val = int(round(config.validation_fraction * n)) if n >= 10 else 0
    return np.sort(perm[:n_val]), np.sort(perm[n_val:])


def train(
    config: TrainConfig,
    dataset: Dataset,
    graphs: dict[int, GraphInput] | None = None,
    arch: Architecture | None = None,
):
    """Train one variant; returns (best-validation params, History)."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    arch = config.architecture(arch)
    if arch.use_graph and graphs is None:
        raise ValueError(f"{config.variant} needs graph inputs")
    rng = np.random.default_rng([config.seed, 11])
    params = init_params(arch, seed=config.seed)
    if config.normalization == "minmax":
        params.norm = Normalization.fit(dataset.C, dataset.psi)
    history = History()
    if config.epochs == 0:
        return params, history

    glist, gidx = graph_table(dataset, graphs if arch.use_graph else None)
    val_idx, tr_idx = validation_split(dataset, config, rng)
    n_val = len(val_idx)
    kind = config.loss_kind
    opt = Adam(params.weights, lr=config.learning_rate)
    sched = ReduceOnPlateau(opt, config.patience, config.decay, config.min_learning_rate)
    best = params.copy()
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        order = tr_idx[rng.permutation(len(tr_idx))]
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_param_grads(
                params, glist, _batch(dataset, gidx, idx), kind, training=True, rng=rng
            )
            if not np.isfinite(loss):
                raise NumericError(f"loss became non-finite at epoch {epoch + 1}")
            opt.step(params.weights, grads)
            total += loss * len(idx)
        train_loss = total / len(order)
        if n_val:
            val_loss = evaluate_loss(params, glist, gidx[val_idx], dataset.subset(val_idx), kind)
        else:
            val_loss = train_loss
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.lr.append(opt.lr)
        if sched.step(val_loss):
            best = params.copy()
            history.best_epoch = epoch + 1
    history.wall_clock = time.perf_counter() - t0
    return best, history


def kfold(units, k: int, seed: int = 0) -> list[np.ndarray]:
    """Split unit labels into k disjoint test folds, sizes differing by at most one.

    ``units`` is either a count or an array of unit labels.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    labels = np.arange(units) if np.isscalar(units) else np.asarray(units)
    if len(labels) < k:
        raise ValueError(f"cannot make {k} folds from {len(labels)} units")
    order = labels[np.random.default_rng([seed, 7]).permutation(len(labels))]
    return [np.sort(order[i::k]) for i in range(k)]


def fold_masks(dataset: Dataset, k: int, unit: str = "sample", seed: int = 0):
    """Yield (fold index, train mask, test mask) over the dataset."""
    if unit not in UNITS:
        raise ValueError(f"unit must be one of {UNITS}")
    if unit == "sample":
        folds = kfold(len(dataset), k, seed)
        for i, test in enumerate(folds):
            mask = np.zeros(len(dataset), dtype=bool)
            mask[test] = True
            yield i, ~mask, mask
    else:
        folds = kfold(dataset.rve_ids(), k, seed)
        for i, test in enumerate(folds):
            mask = np.isin(dataset.rve_id, test)
            yield i, ~mask, mask


def predict_dataset(params: ModelParams, dataset: Dataset, graphs: dict | None):
    glist, gidx = graph_table(dataset, graphs if params.arch.use_graph else None)
    return predict(params, glist, gidx, dataset.C)


@dataclass
class Predictions:
    """Model outputs aligned with a dataset's rows."""

    psi: np.ndarray
    S: np.ndarray


@dataclass
class FoldResult:
    fold: int
    train_rows: np.ndarray
    test_rows: np.ndarray
    train_pred: Predictions
    test_pred: Predictions
    history: History
    params: ModelParams


@dataclass
class ErrorSummary:
    """Per-sample scaled errors for psi, principal values and directions."""

    psi: np.ndarray
    principal_values: np.ndarray
    principal_directions: np.ndarray

    def medians(self) -> dict:
        return {
            "psi": float(np.median(self.psi)),
            "principal_values": float(np.median(self.principal_values)),
            "principal_directions": float(np.median(self.principal_directions)),
        }

    def means(self) -> dict:
        return {
            "psi": float(np.mean(self.psi)),
            "principal_values": float(np.mean(self.principal_values)),
            "principal_directions": float(np.mean(self.principal_directions)),
        }


def error_summary(pred: Predictions, dataset: Dataset) -> ErrorSummary:
    pv, pd = metrics.principal_scaled_errors(pred.S, dataset.S)
    return ErrorSummary(metrics.scaled_errors(pred.psi, dataset.psi), pv, pd)


def cross_validate(
    config: TrainConfig,
    dataset: Dataset,
    graphs: dict | None,
    k: int,
    unit: str,
    arch: Architecture | None = None,
    folds: list[int] | None = None,
    split_seed: int | None = None,
) -> list[FoldResult]:
    """Train one model per fold and collect train and blind predictions."""
    split_seed = config.seed if split_seed is None else split_seed
    results = []
    for i, tr, te in fold_masks(dataset, k, unit, split_seed):
        if folds is not None and i not in folds:
            continue
        train_set = dataset.subset(tr)
        test_set = dataset.subset(te)
        params, hist = train(replace(config, seed=config.seed + i), train_set, graphs, arch)
        p_tr = Predictions(*predict_dataset(params, train_set, graphs))
        p_te = Predictions(*predict_dataset(params, test_set, graphs))
        results.append(
            FoldResult(i, np.flatnonzero(tr), np.flatnonzero(te), p_tr, p_te, hist, params)
        )
    return results


def pooled_blind(results: list[FoldResult], dataset: Dataset) -> tuple[Predictions, Dataset]:
    """Concatenate every fold's blind predictions into one aligned set."""
    rows = np.concatenate([r.test_rows for r in results])
    psi = np.concatenate([r.test_pred.psi for r in results])
    S = np.concatenate([r.test_pred.S for r in results])
    order = np.argsort(rows)
    return Predictions(psi[order], S[order]), dataset.subset(rows[order])
