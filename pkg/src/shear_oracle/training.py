"""Loss, AdamW, StepLR, gradient clipping, metrics, the training loop,
k-fold cross-validation, grid search and the architecture ablation harness.

Defaults mirror the deployed training protocol: initial learning rate
0.005 decayed by 0.8 every 300 epochs, global-norm gradient clipping at
1.0, decoupled weight decay 0.01 on weights only, full-batch updates for
1500 epochs, no early stopping.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .data import (
    Dataset,
    ValidationError,
    fit_minmax,
    inverse_transform,
    kfold_partition,
    transform_features,
    transform_target,
)
from .mlp import MlpConfig, MlpParams, backward, forward_eval, forward_train, init_params
from .model_io import ModelBundle
from .numeric import Rng, derive_seed

# Relative slack on the clipping comparison. Without it, re-clipping an
# already-clipped gradient would rescale by ~(1 - 1e-16) because the
# recomputed norm can land a few ulps above the threshold; with it,
# clipping is bit-exact idempotent while the post-clip norm stays within
# clip_norm*(1+1e-12).
_CLIP_SLACK = 1e-12


class TrainingDiverged(RuntimeError):
    """Raised when a loss becomes non-finite during training."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.005
    step_size: int = 300
    gamma: float = 0.8
    clip_norm: float = 1.0
    epochs: int = 1500
    weight_decay: float = 0.01
    batch_size: Optional[int] = None  # None = full batch
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be > 0, got {self.lr0}")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.clip_norm <= 0:
            raise ValueError(f"clip_norm must be > 0, got {self.clip_norm}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.step_size < 1:
            raise ValueError(f"step_size must be >= 1, got {self.step_size}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class Metrics:
    """MAE/MAPE/R2 in the target's native units. mape is None when any
    target is exactly zero (undefined for the dataset)."""

    mae: float
    mape: Optional[float]
    r2: float

    def describe(self) -> str:
        mape = "undefined (zero target present)" if self.mape is None else f"{self.mape:.4f}%"
        return f"MAE {self.mae:.4f} | MAPE {mape} | R2 {self.r2:.4f}"


@dataclass
class LossCurve:
    epochs: np.ndarray
    train_mse: np.ndarray
    test_mse: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.epochs) <= 0):
            raise ValueError("epochs must be strictly increasing")

    def to_csv(self, destination: Union[str, Path, io.IOBase]) -> None:
        fh = (
            open(destination, "w", encoding="utf-8", newline="")
            if isinstance(destination, (str, Path))
            else destination
        )
        try:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_mse_scaled", "test_mse_scaled"])
            for e, tr, te in zip(self.epochs, self.train_mse, self.test_mse):
                writer.writerow([int(e), repr(float(tr)), repr(float(te))])
        finally:
            if isinstance(destination, (str, Path)):
                fh.close()


def mse_loss(preds: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error (1/n) * sum((y_i - yhat_i)^2)."""
    preds = np.asarray(preds, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if preds.shape != targets.shape or preds.size == 0:
        raise ValueError(
            f"need equal nonzero lengths, got {preds.shape} and {targets.shape}"
        )
    return float(np.mean((targets - preds) ** 2))


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """Step-decay schedule: lr0 * gamma^floor(epoch / step_size).

    Computed by repeated multiplication: with the default constants the
    closed-form pow drifts one ulp off the exact decayed values (0.004,
    0.00256, ...) that chained step decay produces.
    """
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    lr = config.lr0
    for _ in range(epoch // config.step_size):
        lr *= config.gamma
    return lr


def gradient_global_norm(grads: MlpParams) -> float:
    total = 0.0
    for arr in itertools.chain(grads.weights, grads.biases):
        total += float(np.sum(arr * arr))
    return math.sqrt(total)


def clip_gradients(grads: MlpParams, clip_norm: float) -> MlpParams:
    """Scale all gradients by clip_norm/||g|| when the global L2 norm exceeds it."""
    if clip_norm <= 0:
        raise ValueError(f"clip_norm must be > 0, got {clip_norm}")
    norm = gradient_global_norm(grads)
    if norm <= clip_norm * (1.0 + _CLIP_SLACK):
        return grads
    factor = clip_norm / norm
    return MlpParams(
        weights=[w * factor for w in grads.weights],
        biases=[b * factor for b in grads.biases],
    )


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: MlpParams
    v: MlpParams
    t: int = 0

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "AdamState":
        def z(p):
            return MlpParams(
                weights=[np.zeros_like(w) for w in p.weights],
                biases=[np.zeros_like(b) for b in p.biases],
            )

        return cls(m=z(params), v=z(params))


def adamw_step(
    params: MlpParams,
    grads: MlpParams,
    state: AdamState,
    lr: float,
    config: TrainConfig,
) -> tuple[MlpParams, AdamState]:
    """One AdamW update, in place on params and state.

    Adam moments with bias correction, then decoupled weight decay applied
    to weight matrices only (biases are exempt):
    theta <- theta - lr * mhat/(sqrt(vhat)+eps) - lr * weight_decay * theta.
    """
    state.t += 1
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for group, decay in (("weights", config.weight_decay), ("biases", 0.0)):
        thetas = getattr(params, group)
        gs = getattr(grads, group)
        ms = getattr(state.m, group)
        vs = getattr(state.v, group)
        if len(gs) != len(thetas):
            raise ValueError(f"gradient/parameter layer count mismatch in {group}")
        for theta, g, m, v in zip(thetas, gs, ms, vs):
            if g.shape != theta.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {theta.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + eps)
            if decay:
                update = update + decay * theta  # decay reads the pre-step value
            theta -= lr * update
    return params, state


def _scaled_arrays(dataset: Dataset, scaler) -> tuple[np.ndarray, np.ndarray]:
    x = transform_features(scaler, dataset.feature_matrix())
    y = transform_target(scaler, dataset.targets())
    return x, y


def train(
    train_set: Dataset,
    test_set: Dataset,
    mlp_config: MlpConfig,
    train_config: TrainConfig,
    *,
    background_size: int = 20,
) -> tuple[ModelBundle, LossCurve]:
    """Run the full protocol and return (model bundle, per-epoch loss curve).

    The Min-Max scaler is fit on the training split only and reused for the
    test split. A seeded subsample of the scaled training features is
    embedded in the bundle as the default explanation background.
    """
    if len(train_set) == 0 or len(test_set) == 0:
        raise ValidationError("train and test sets must be nonempty")
    if train_set.target_name is None:
        raise ValidationError("train_set needs a selected target")
    if background_size < 1:
        raise ValidationError(f"background_size must be >= 1, got {background_size}")
    if len(train_set.schema) != mlp_config.input_size:
        raise ValidationError(
            f"schema has {len(train_set.schema)} features, config expects {mlp_config.input_size}"
        )

    scaler = fit_minmax(train_set)
    x_train, y_train = _scaled_arrays(train_set, scaler)
    x_test, y_test = _scaled_arrays(test_set, scaler)
    n = x_train.shape[0]

    params = init_params(mlp_config, Rng(derive_seed(train_config.seed, 0)))
    dropout_rng = Rng(derive_seed(train_config.seed, 1))
    batch_rng = Rng(derive_seed(train_config.seed, 2))
    state = AdamState.zeros_like(params)

    epochs = np.arange(train_config.epochs)
    train_curve = np.empty(train_config.epochs)
    test_curve = np.empty(train_config.epochs)

    for epoch in range(train_config.epochs):
        lr = lr_at_epoch(train_config, epoch)
        if train_config.batch_size is None or train_config.batch_size >= n:
            trace = forward_train(params, x_train, mlp_config, rng=dropout_rng)
            grads, epoch_mse = backward(params, trace, y_train)
            grads = clip_gradients(grads, train_config.clip_norm)
            adamw_step(params, grads, state, lr, train_config)
        else:
            perm = batch_rng.permutation(n)
            total, seen = 0.0, 0
            for start in range(0, n, train_config.batch_size):
                ix = perm[start : start + train_config.batch_size]
                trace = forward_train(params, x_train[ix], mlp_config, rng=dropout_rng)
                grads, batch_mse = backward(params, trace, y_train[ix])
                grads = clip_gradients(grads, train_config.clip_norm)
                adamw_step(params, grads, state, lr, train_config)
                total += batch_mse * len(ix)
                seen += len(ix)
            epoch_mse = total / seen
        test_mse = mse_loss(forward_eval(params, x_test), y_test)
        if not (math.isfinite(epoch_mse) and math.isfinite(test_mse)):
            raise TrainingDiverged(epoch, epoch_mse if not math.isfinite(epoch_mse) else test_mse)
        train_curve[epoch] = epoch_mse
        test_curve[epoch] = test_mse

    bg_seed = derive_seed(train_config.seed, 3)
    bg_size = min(background_size, n)
    bg_ix = np.sort(Rng(bg_seed).permutation(n)[:bg_size])
    bundle = ModelBundle(
        config=mlp_config,
        params=params,
        scaler=scaler,
        schema=train_set.schema,
        target_name=train_set.target_name,
        background=x_train[bg_ix],
        background_provenance={"seed": bg_seed, "source_size": n},
        metadata={
            "created_by": f"shear-oracle {__version__}",
            "target": train_set.target_name,
            "train_config": {
                "lr0": train_config.lr0,
                "step_size": train_config.step_size,
                "gamma": train_config.gamma,
                "clip_norm": train_config.clip_norm,
                "epochs": train_config.epochs,
                "weight_decay": train_config.weight_decay,
                "batch_size": train_config.batch_size,
                "seed": train_config.seed,
            },
            "n_train": n,
            "n_test": len(test_set),
        },
    )
    return bundle, LossCurve(epochs=epochs, train_mse=train_curve, test_mse=test_curve)


def evaluate(bundle: ModelBundle, dataset: Dataset) -> Metrics:
    """MAE, MAPE and R2 in native units on a dataset carrying targets."""
    ds = dataset if dataset.target_name == bundle.target_name else dataset.for_target(
        bundle.target_name
    )
    y = ds.targets()
    x_scaled = transform_features(bundle.scaler, ds.feature_matrix())
    preds = inverse_transform(bundle.scaler, np.atleast_1d(bundle.predict_scaled(x_scaled)))

    mae = float(np.mean(np.abs(y - preds)))
    mape = None
    if not np.any(y == 0.0):
        mape = float(100.0 * np.mean(np.abs((y - preds) / y)))
    ss_res = float(np.sum((y - preds) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return Metrics(mae=mae, mape=mape, r2=r2)


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass
class CvResult:
    fold_metrics: list[Metrics]
    mean_mae: float
    std_mae: float
    mean_mape: Optional[float]
    std_mape: Optional[float]
    mean_r2: float
    std_r2: float

    def describe(self) -> str:
        lines = [
            f"MAE  {self.mean_mae:.4f} ± {self.std_mae:.4f}",
            (
                "MAPE undefined (zero target present)"
                if self.mean_mape is None
                else f"MAPE {self.mean_mape:.4f} ± {self.std_mape:.4f} %"
            ),
            f"R2   {self.mean_r2:.4f} ± {self.std_r2:.4f}",
        ]
        return "\n".join(lines)


def _max_workers() -> int:
    raw = os.environ.get("SHEAR_ORACLE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def cross_validate(
    dataset: Dataset,
    mlp_config: MlpConfig,
    train_config: TrainConfig,
    k: int,
) -> CvResult:
    """k-fold protocol: per fold, fit scaler on the fold's training part,
    train, evaluate on the held-out part; aggregate mean +/- sample std.

    Folds may train concurrently when SHEAR_ORACLE_THREADS > 1; per-fold
    seeds are derived, so results are independent of scheduling.
    """
    folds = kfold_partition(dataset, k, Rng(derive_seed(train_config.seed, 500)))

    def run_fold(i: int) -> Metrics:
        fold_train, fold_val = folds[i]
        cfg = replace(train_config, seed=derive_seed(train_config.seed, 1000, i))
        bundle, _ = train(fold_train, fold_val, mlp_config, cfg)
        return evaluate(bundle, fold_val)

    workers = min(_max_workers(), len(folds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fold_metrics = list(pool.map(run_fold, range(len(folds))))
    else:
        fold_metrics = [run_fold(i) for i in range(len(folds))]

    mean_mae, std_mae = _mean_std([m.mae for m in fold_metrics])
    mean_r2, std_r2 = _mean_std([m.r2 for m in fold_metrics])
    if any(m.mape is None for m in fold_metrics):
        mean_mape = std_mape = None
    else:
        mean_mape, std_mape = _mean_std([m.mape for m in fold_metrics])
    return CvResult(
        fold_metrics=fold_metrics,
        mean_mae=mean_mae,
        std_mae=std_mae,
        mean_mape=mean_mape,
        std_mape=std_mape,
        mean_r2=mean_r2,
        std_r2=std_r2,
    )


# ---------------------------------------------------------------------------
# Grid search

_MLP_GRID_KEYS = {"dropout_p", "hidden_sizes"}


@dataclass
class GridPoint:
    values: dict
    mean_mae: float
    std_mae: float


def grid_search(
    dataset: Dataset,
    grids: dict[str, Sequence],
    mlp_config: MlpConfig,
    train_config: TrainConfig,
    k: int,
) -> list[GridPoint]:
    """Exhaustive search over the Cartesian product of the candidate sets.

    Enumeration is lexicographic over the input key order; every
    configuration is scored by mean k-fold validation MAE (native units)
    and the result is sorted ascending with enumeration order breaking
    ties (stable sort).
    """
    if not grids:
        raise ValueError("grid must name at least one hyperparameter")
    for name, values in grids.items():
        if len(values) == 0:
            raise ValueError(f"grid dimension {name!r} is empty")

    keys = list(grids.keys())
    points = []
    for combo in itertools.product(*(grids[key] for key in keys)):
        values = dict(zip(keys, combo))
        t_over = {k_: v for k_, v in values.items() if k_ not in _MLP_GRID_KEYS}
        m_over = {k_: v for k_, v in values.items() if k_ in _MLP_GRID_KEYS}
        if "hidden_sizes" in m_over:
            m_over["hidden_sizes"] = tuple(m_over["hidden_sizes"])
        cfg = replace(train_config, **t_over)
        mcfg = replace(mlp_config, **m_over) if m_over else mlp_config
        result = cross_validate(dataset, mcfg, cfg, k)
        points.append(GridPoint(values=values, mean_mae=result.mean_mae, std_mae=result.std_mae))
    return sorted(points, key=lambda p: p.mean_mae)


# ---------------------------------------------------------------------------
# Ablation harness

ABLATION_VARIANTS: tuple[tuple[str, tuple[int, ...]], ...] = (
    ("MLP [20, 200, 200, 8]", (20, 200, 200, 8)),
    ("MLP [64, 5000, 1000, 200, 8]", (64, 5000, 1000, 200, 8)),
    ("MLP [64, 1000, 200, 8] (proposed)", (64, 1000, 200, 8)),
)

TARGETS = ("friction", "cohesion")


@dataclass
class AblationRow:
    label: str
    mape: dict  # target -> Optional[float]
    external: bool = False


@dataclass
class AblationReport:
    rows: list[AblationRow]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"label": r.label, "external": r.external, "mape": r.mape} for r in self.rows
            ]
        }

    def render_table(self) -> str:
        width = max(len(r.label) for r in self.rows) + 2
        header = f"{'model':<{width}}friction MAPE (%)  cohesion MAPE (%)"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            cells = []
            for t in TARGETS:
                v = r.mape.get(t)
                cells.append("      n/a" if v is None else f"{v:9.2f}")
            lines.append(f"{r.label:<{width}}{cells[0]:>17}  {cells[1]:>17}")
        return "\n".join(lines)


def _read_external_predictions(path: Union[str, Path], label: str) -> dict[int, float]:
    preds: dict[int, float] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header] != ["sample_id", "prediction"]:
                raise ValidationError(
                    f"external prediction file for row {label!r} must have header sample_id,prediction"
                )
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                preds[int(row[0])] = float(row[1])
    except (ValueError, OSError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed external prediction file for row {label!r}: {exc}")
    if not preds:
        raise ValidationError(f"external prediction file for row {label!r} has no rows")
    return preds


def _external_mape(dataset: Dataset, target: str, preds: dict[int, float], label: str) -> float:
    ds = dataset.for_target(target)
    y = ds.targets()
    errs = []
    for sample_id, pred in sorted(preds.items()):
        if not (0 <= sample_id < len(y)):
            raise ValidationError(
                f"external row {label!r}: sample_id {sample_id} outside dataset of {len(y)}"
            )
        if y[sample_id] == 0.0:
            raise ValidationError(f"external row {label!r}: target is zero at sample {sample_id}")
        errs.append(abs((y[sample_id] - pred) / y[sample_id]))
    return float(100.0 * np.mean(errs))


def run_ablation(
    dataset: Dataset,
    variants: Sequence[tuple[str, tuple[int, ...]]],
    train_config: TrainConfig,
    k: int,
    external: Optional[dict[str, dict[str, Union[str, Path]]]] = None,
) -> AblationReport:
    """MAPE table per architecture variant per target.

    MLP variants are scored by k-fold cross-validation on each target;
    external rows (e.g. gradient-boosting baselines produced elsewhere)
    are scored directly from their prediction files without training.
    """
    rows: list[AblationRow] = []
    for label, hidden in variants:
        mlp_config = MlpConfig(input_size=len(dataset.schema), hidden_sizes=tuple(hidden))
        mape: dict[str, Optional[float]] = {}
        for target in TARGETS:
            result = cross_validate(dataset.for_target(target), mlp_config, train_config, k)
            mape[target] = result.mean_mape
        rows.append(AblationRow(label=label, mape=mape))
    for label, files in (external or {}).items():
        mape = {}
        for target in TARGETS:
            if target in files:
                preds = _read_external_predictions(files[target], label)
                mape[target] = _external_mape(dataset, target, preds, label)
            else:
                mape[target] = None
        rows.append(AblationRow(label=label, mape=mape, external=True))
    return AblationReport(rows=rows)
