"""Shapley-value feature attribution: exact enumeration and the kernel method.

The value of a feature coalition is the model's expected prediction with
the out-of-coalition features swapped for background rows (marginal
masking), inverse-transformed to native target units. Exact attributions
enumerate every coalition; the kernel method fits a weighted linear model
over coalition masks with the Shapley kernel weights, with the two
attribution constraints (intercept equals the empty-coalition value, the
attributions sum to the full prediction minus it) enforced by variable
substitution, so reconstruction is exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .data import inverse_transform, transform_features
from .model_io import ModelBundle
from .numeric import Rng, derive_seed, solve_weighted_least_squares

DEFAULT_EXACT_LIMIT = 15
_PREDICT_CHUNK = 8192
_FULL_ENUM_LIMIT = 22  # 2^22 coalition rows is the largest sane dense sweep


class ExplainerError(ValueError):
    """Raised for invalid explanation requests (limits, degenerate designs)."""


@dataclass
class BackgroundSet:
    """Scaled feature rows the value function averages over."""

    rows: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        if self.rows.size == 0:
            raise ExplainerError("background set must be nonempty")

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "BackgroundSet":
        return cls(rows=bundle.background, provenance=dict(bundle.background_provenance))


@dataclass
class Explanation:
    """Additive attribution of one prediction, in native target units."""

    base_value: float
    phi: np.ndarray
    prediction: float
    feature_values: np.ndarray
    feature_names: list[str]
    method: str  # "exact" | "kernel"
    n_samples: Optional[int] = None
    full_enumeration: bool = False
    background_provenance: dict = field(default_factory=dict)
    used_fallback_ridge: bool = False

    def reconstruction_residual(self) -> float:
        return abs(self.base_value + float(np.sum(self.phi)) - self.prediction)

    def to_dict(self) -> dict:
        return {
            "base_value": self.base_value,
            "prediction": self.prediction,
            "method": self.method,
            "n_samples": self.n_samples,
            "full_enumeration": self.full_enumeration,
            "background": self.background_provenance,
            "features": [
                {"name": n, "value": float(v), "phi": float(p)}
                for n, v, p in zip(self.feature_names, self.feature_values, self.phi)
            ],
        }


@dataclass
class WaterfallStep:
    label: str
    phi: float
    cumulative: float


@dataclass
class GlobalSummary:
    """Per-sample attributions plus the mean-|phi| feature ranking."""

    feature_names: list[str]
    phi_matrix: np.ndarray  # (n_samples, M)
    feature_values: np.ndarray  # (n_samples, M), native units
    mean_abs_phi: np.ndarray
    mean_signed_phi: np.ndarray
    ranking: list[str]

    def to_dict(self) -> dict:
        return {
            "feature_names": self.feature_names,
            "mean_abs_phi": self.mean_abs_phi.tolist(),
            "mean_signed_phi": self.mean_signed_phi.tolist(),
            "ranking": self.ranking,
            "points": {
                name: {
                    "values": self.feature_values[:, j].tolist(),
                    "phi": self.phi_matrix[:, j].tolist(),
                }
                for j, name in enumerate(self.feature_names)
            },
        }


# ---------------------------------------------------------------------------
# Value function


def _batched_predict(predict: Callable, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], _PREDICT_CHUNK):
        out[start : start + _PREDICT_CHUNK] = predict(x[start : start + _PREDICT_CHUNK])
    return out


def _coalition_values_scaled(
    predict: Callable, x_scaled: np.ndarray, masks: np.ndarray, background: np.ndarray
) -> np.ndarray:
    """Mean prediction per mask over hybrid rows (x where on, background where off)."""
    acc = np.zeros(masks.shape[0])
    for b in background:
        acc += _batched_predict(predict, np.where(masks, x_scaled, b))
    return acc / background.shape[0]


def value_function(
    bundle: ModelBundle,
    x_native: np.ndarray,
    mask,
    background: Optional[BackgroundSet] = None,
) -> float:
    """Coalition value: expected prediction with off-mask features masked
    by background rows; returned in native units."""
    bg = background or BackgroundSet.from_bundle(bundle)
    mask = np.asarray(mask, dtype=bool)
    x_scaled = transform_features(bundle.scaler, np.asarray(x_native, dtype=np.float64))
    if mask.shape[0] != x_scaled.shape[0] or bg.rows.shape[1] != x_scaled.shape[0]:
        raise ExplainerError(
            f"width mismatch: mask {mask.shape[0]}, instance {x_scaled.shape[0]}, "
            f"background {bg.rows.shape[1]}"
        )
    v = _coalition_values_scaled(bundle.predict_scaled, x_scaled, mask[None, :], bg.rows)
    return float(inverse_transform(bundle.scaler, v)[0])


# ---------------------------------------------------------------------------
# Exact enumeration


def _all_masks(m: int) -> np.ndarray:
    ids = np.arange(2**m, dtype=np.uint32)
    return ((ids[:, None] >> np.arange(m, dtype=np.uint32)) & 1).astype(bool)


def _exact_size_weights(m: int) -> np.ndarray:
    # coalition weight s!(m-1-s)!/m! for s = |S|, S excluding the feature
    fact = [math.factorial(i) for i in range(m + 1)]
    return np.array([fact[s] * fact[m - 1 - s] / fact[m] for s in range(m)])


def exact_shapley(
    bundle: ModelBundle,
    x_native: np.ndarray,
    background: Optional[BackgroundSet] = None,
    *,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
) -> Explanation:
    """Attribution by full coalition enumeration.

    Needs 2^M * |background| model evaluations; each distinct coalition is
    evaluated once. Rejected above ``exact_limit`` features; use
    ``kernel_shap`` for wider inputs.
    """
    x_native = np.asarray(x_native, dtype=np.float64)
    m = x_native.shape[0]
    if m > exact_limit:
        raise ExplainerError(
            f"{m} features exceeds the exact enumeration limit {exact_limit}; "
            "use kernel_shap instead"
        )
    bg = background or BackgroundSet.from_bundle(bundle)
    x_scaled = transform_features(bundle.scaler, x_native)

    masks = _all_masks(m)
    v = inverse_transform(
        bundle.scaler, _coalition_values_scaled(bundle.predict_scaled, x_scaled, masks, bg.rows)
    )
    sizes = masks.sum(axis=1)
    weights = _exact_size_weights(m)

    ids = np.arange(2**m, dtype=np.int64)
    phi = np.empty(m)
    for i in range(m):
        bit = 1 << i
        without = ids[(ids & bit) == 0]
        phi[i] = float(np.sum(weights[sizes[without]] * (v[without | bit] - v[without])))

    return Explanation(
        base_value=float(v[0]),
        phi=phi,
        prediction=float(v[-1]),
        feature_values=x_native,
        feature_names=bundle.schema.names,
        method="exact",
        background_provenance=dict(bg.provenance),
    )


# ---------------------------------------------------------------------------
# Kernel method


def shapley_kernel_weight(m: int, s: int) -> float:
    """Regression weight for a coalition of size s out of m features."""
    if s <= 0 or s >= m:
        raise ExplainerError(
            f"coalition size {s} of {m} is constraint-handled, not weighted"
        )
    return (m - 1) / (math.comb(m, s) * s * (m - s))


def _sampled_masks(m: int, n_samples: int, rng: Rng) -> np.ndarray:
    """Distinct non-trivial masks: sizes drawn proportional to the kernel
    mass per size, complements always paired, deduplicated."""
    sizes = np.arange(1, m)
    mass = (m - 1) / (sizes * (m - sizes))
    probs = mass / mass.sum()
    cdf = np.cumsum(probs)

    seen: set[int] = set()
    order: list[int] = []
    budget = min(n_samples, 2**m - 2)
    attempts = 0
    max_attempts = 200 * budget
    full = (1 << m) - 1
    while len(order) < budget and attempts < max_attempts:
        attempts += 1
        s = int(sizes[np.searchsorted(cdf, rng.uniform(0.0, 1.0))])
        subset = rng.permutation(m)[:s]
        mask_int = 0
        for j in subset:
            mask_int |= 1 << int(j)
        for candidate in (mask_int, full ^ mask_int):
            if len(order) < budget and candidate not in seen:
                seen.add(candidate)
                order.append(candidate)
    ids = np.array(order, dtype=np.uint32)
    return ((ids[:, None] >> np.arange(m, dtype=np.uint32)) & 1).astype(bool)


def kernel_shap(
    bundle: ModelBundle,
    x_native: np.ndarray,
    background: Optional[BackgroundSet] = None,
    n_samples: Union[int, str] = "full",
    *,
    seed: int = 0,
) -> Explanation:
    """Attribution by Shapley-kernel weighted linear regression.

    ``n_samples="full"`` (or any budget covering all 2^M - 2 non-trivial
    coalitions) enumerates the complete design and reproduces exact
    attributions; otherwise a sampled design of that many distinct
    coalitions is used. The intercept and sum constraints are enforced by
    substitution, so base + sum(phi) equals the prediction by construction.
    """
    x_native = np.asarray(x_native, dtype=np.float64)
    m = x_native.shape[0]
    bg = background or BackgroundSet.from_bundle(bundle)
    x_scaled = transform_features(bundle.scaler, x_native)

    full_count = 2**m - 2
    if isinstance(n_samples, str):
        if n_samples != "full":
            raise ExplainerError(f"n_samples must be an integer or 'full', got {n_samples!r}")
        full_enum = True
    else:
        if n_samples < 2 * m:
            raise ExplainerError(f"n_samples must be at least 2*M = {2 * m}, got {n_samples}")
        full_enum = n_samples >= full_count

    # Trivial coalitions pin the constraints.
    ends = inverse_transform(
        bundle.scaler,
        _coalition_values_scaled(
            bundle.predict_scaled,
            x_scaled,
            np.stack([np.zeros(m, dtype=bool), np.ones(m, dtype=bool)]),
            bg.rows,
        ),
    )
    v_empty, v_full = float(ends[0]), float(ends[1])

    if m == 1:
        # No non-trivial coalitions exist; the constraints fix everything.
        return Explanation(
            base_value=v_empty,
            phi=np.array([v_full - v_empty]),
            prediction=v_full,
            feature_values=x_native,
            feature_names=bundle.schema.names,
            method="kernel",
            n_samples=0,
            full_enumeration=True,
            background_provenance=dict(bg.provenance),
        )

    if full_enum:
        if m > _FULL_ENUM_LIMIT:
            raise ExplainerError(
                f"full kernel enumeration of {m} features is intractable; give n_samples"
            )
        ids = np.arange(1, 2**m - 1, dtype=np.uint32)
        masks = ((ids[:, None] >> np.arange(m, dtype=np.uint32)) & 1).astype(bool)
    else:
        masks = _sampled_masks(m, int(n_samples), Rng(derive_seed(seed, 0xC0A1)))

    if masks.shape[0] < 2 or np.all(masks == masks[0], axis=None):
        raise ExplainerError("degenerate coalition design: all masks identical")

    v = inverse_transform(
        bundle.scaler,
        _coalition_values_scaled(bundle.predict_scaled, x_scaled, masks, bg.rows),
    )
    sizes = masks.sum(axis=1)
    weights = np.array([shapley_kernel_weight(m, int(s)) for s in sizes])

    z = masks.astype(np.float64)
    # Substitute the last feature out using sum(phi) = v_full - v_empty.
    target = v - v_empty - z[:, -1] * (v_full - v_empty)
    design = z[:, :-1] - z[:, -1:]
    ridge = 0.0 if full_enum else 1e-10
    result = solve_weighted_least_squares(design, target, weights, ridge=ridge)
    phi = np.empty(m)
    phi[:-1] = result.beta
    phi[-1] = (v_full - v_empty) - float(np.sum(result.beta))

    return Explanation(
        base_value=v_empty,
        phi=phi,
        prediction=v_full,
        feature_values=x_native,
        feature_names=bundle.schema.names,
        method="kernel",
        n_samples=int(masks.shape[0]),
        full_enumeration=full_enum,
        background_provenance=dict(bg.provenance),
        used_fallback_ridge=result.used_fallback_ridge,
    )


# ---------------------------------------------------------------------------
# Presentation


def waterfall(explanation: Explanation) -> list[WaterfallStep]:
    """Base-to-prediction decomposition, largest |phi| first.

    Features with exactly zero attribution are omitted; ties in magnitude
    keep schema order. The final cumulative value is the prediction.
    """
    order = sorted(
        range(len(explanation.phi)), key=lambda i: (-abs(explanation.phi[i]), i)
    )
    steps = [WaterfallStep(label="base", phi=0.0, cumulative=explanation.base_value)]
    cumulative = explanation.base_value
    for i in order:
        contribution = float(explanation.phi[i])
        if contribution == 0.0:
            continue
        cumulative += contribution
        steps.append(
            WaterfallStep(
                label=explanation.feature_names[i], phi=contribution, cumulative=cumulative
            )
        )
    return steps


def global_summary(
    bundle: ModelBundle,
    dataset,
    background: Optional[BackgroundSet] = None,
    method: str = "kernel",
    *,
    n_samples: Union[int, str] = "full",
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    seed: int = 0,
) -> GlobalSummary:
    """Explain every sample; rank features by mean absolute attribution."""
    if len(dataset) == 0:
        raise ExplainerError("cannot summarize an empty dataset")
    bg = background or BackgroundSet.from_bundle(bundle)
    rows = []
    values = []
    for sample in dataset.samples:
        if method == "exact":
            expl = exact_shapley(bundle, sample.features, bg, exact_limit=exact_limit)
        elif method == "kernel":
            expl = kernel_shap(bundle, sample.features, bg, n_samples=n_samples, seed=seed)
        else:
            raise ExplainerError(f"unknown method {method!r}; expected exact or kernel")
        rows.append(expl.phi)
        values.append(sample.features)
    phi_matrix = np.array(rows)
    mean_abs = np.abs(phi_matrix).mean(axis=0)
    names = bundle.schema.names
    order = sorted(range(len(names)), key=lambda j: (-mean_abs[j], j))
    return GlobalSummary(
        feature_names=names,
        phi_matrix=phi_matrix,
        feature_values=np.array(values),
        mean_abs_phi=mean_abs,
        mean_signed_phi=phi_matrix.mean(axis=0),
        ranking=[names[j] for j in order],
    )
