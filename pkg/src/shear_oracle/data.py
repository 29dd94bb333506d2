"""Feature schema, dataset container, CSV ingestion, Min-Max scaling, splits.

The feature schema is data-driven: the default below has the seventeen
waste-characterization features the deployed predictor expects, but any
schema can be loaded from a JSON file (see ``load_schema``), so the count
is never hard-coded.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .numeric import Rng

FRACTION_KINDS = ("composition-fraction", "particle-size-fraction")
KINDS = FRACTION_KINDS + ("physical",)

TARGET_COLUMNS = {"friction": "friction_angle_deg", "cohesion": "cohesion_kpa"}


class ValidationError(ValueError):
    """Raised when input data violates a schema or sample invariant."""


@dataclass(frozen=True)
class FeatureSpec:
    """One feature descriptor: name, unit, kind and validation bounds.

    ``lower``/``upper`` default from the kind (fractions live in [0, 1],
    physical features are nonnegative and unbounded above) but can be set
    explicitly in a schema file, e.g. moisture content capped at 1.0.
    """

    name: str
    unit: str
    kind: str
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown feature kind {self.kind!r} for {self.name!r}")

    def bounds(self) -> tuple[float, float]:
        if self.kind in FRACTION_KINDS:
            lo, hi = 0.0, 1.0
        else:
            lo, hi = 0.0, float("inf")
        if self.lower is not None:
            lo = self.lower
        if self.upper is not None:
            hi = self.upper
        return lo, hi


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, uniquely-named feature descriptors; order defines model input order."""

    features: tuple[FeatureSpec, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate feature names in schema: {dupes}")
        if not self.features:
            raise ValidationError("schema must have at least one feature")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        return self.names.index(name)


DEFAULT_SCHEMA = FeatureSchema(
    features=(
        FeatureSpec("food_waste", "fraction by weight", "composition-fraction"),
        FeatureSpec("garden_waste", "fraction by weight", "composition-fraction"),
        FeatureSpec("paper_cardboard", "fraction by weight", "composition-fraction"),
        FeatureSpec("textiles", "fraction by weight", "composition-fraction"),
        FeatureSpec("plastics", "fraction by weight", "composition-fraction"),
        FeatureSpec("rubber", "fraction by weight", "composition-fraction"),
        FeatureSpec("nappies", "fraction by weight", "composition-fraction"),
        FeatureSpec("metal", "fraction by weight", "composition-fraction"),
        FeatureSpec("glass", "fraction by weight", "composition-fraction"),
        FeatureSpec("other", "fraction by weight", "composition-fraction"),
        FeatureSpec("size_10_15_mm", "fraction by weight", "particle-size-fraction"),
        FeatureSpec("size_5_10_mm", "fraction by weight", "particle-size-fraction"),
        FeatureSpec("size_2_5_mm", "fraction by weight", "particle-size-fraction"),
        FeatureSpec("size_lt_2_mm", "fraction by weight", "particle-size-fraction"),
        FeatureSpec("fine_fraction", "fraction by weight", "particle-size-fraction"),
        FeatureSpec("moisture_content", "fraction w/w", "physical", upper=1.0),
        FeatureSpec("density_kn_m3", "kN/m^3", "physical"),
    )
)


@dataclass(frozen=True)
class WasteSample:
    """One specimen: feature vector aligned to a schema plus optional targets."""

    features: np.ndarray
    friction_angle_deg: Optional[float] = None
    cohesion_kpa: Optional[float] = None

    def target(self, target_name: str) -> Optional[float]:
        if target_name == "friction":
            return self.friction_angle_deg
        if target_name == "cohesion":
            return self.cohesion_kpa
        raise ValidationError(f"unknown target {target_name!r}; expected friction or cohesion")


def validate_sample(schema: FeatureSchema, sample: WasteSample, row: Optional[int] = None) -> None:
    """Check every invariant; raise ValidationError naming value and bound."""
    where = f" (row {row})" if row is not None else ""
    if len(sample.features) != len(schema):
        raise ValidationError(
            f"sample has {len(sample.features)} features, schema expects {len(schema)}{where}"
        )
    for spec, value in zip(schema.features, sample.features):
        if not np.isfinite(value):
            raise ValidationError(f"{spec.name}={value} is not finite{where}")
        lo, hi = spec.bounds()
        if value < lo or value > hi:
            raise ValidationError(
                f"{spec.name}={value} out of [{lo}, {hi}] for kind {spec.kind}{where}"
            )
    for label, value in (
        ("friction_angle_deg", sample.friction_angle_deg),
        ("cohesion_kpa", sample.cohesion_kpa),
    ):
        if value is not None and not np.isfinite(value):
            raise ValidationError(f"{label}={value} is not finite{where}")
    phi = sample.friction_angle_deg
    if phi is not None and not (0.0 < phi < 90.0):
        raise ValidationError(f"friction_angle_deg={phi} out of (0, 90){where}")


@dataclass
class Dataset:
    """Samples plus the schema they are aligned to.

    ``target_name`` selects which of the two optional targets downstream
    operations (scaling, training, metrics) read; it is None straight after
    CSV load and set via ``for_target``.
    """

    schema: FeatureSchema
    samples: list[WasteSample] = field(default_factory=list)
    target_name: Optional[str] = None

    def __len__(self) -> int:
        return len(self.samples)

    def for_target(self, target_name: str) -> "Dataset":
        if target_name not in TARGET_COLUMNS:
            raise ValidationError(
                f"unknown target {target_name!r}; expected one of {sorted(TARGET_COLUMNS)}"
            )
        for i, s in enumerate(self.samples):
            if s.target(target_name) is None:
                raise ValidationError(f"sample {i} has no {target_name} target")
        return Dataset(schema=self.schema, samples=list(self.samples), target_name=target_name)

    def feature_matrix(self) -> np.ndarray:
        return np.array([s.features for s in self.samples], dtype=np.float64)

    def targets(self) -> np.ndarray:
        if self.target_name is None:
            raise ValidationError("dataset has no target selected; call for_target() first")
        return np.array([s.target(self.target_name) for s in self.samples], dtype=np.float64)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(
            schema=self.schema,
            samples=[self.samples[i] for i in indices],
            target_name=self.target_name,
        )


@dataclass(frozen=True)
class ScalerParams:
    """Per-dimension min/max enabling exact inverse transforms."""

    x_min: np.ndarray
    x_max: np.ndarray
    y_min: float
    y_max: float

    def __post_init__(self):
        if np.any(self.x_min > self.x_max) or self.y_min > self.y_max:
            raise ValidationError("scaler params require min <= max in every dimension")


# ---------------------------------------------------------------------------
# Schema file I/O (JSON; format documented in the README)


def schema_to_dict(schema: FeatureSchema) -> dict:
    return {
        "features": [
            {"name": f.name, "unit": f.unit, "kind": f.kind, "lower": f.lower, "upper": f.upper}
            for f in schema.features
        ]
    }


def schema_from_dict(doc: dict) -> FeatureSchema:
    try:
        entries = doc["features"]
    except (TypeError, KeyError):
        raise ValidationError("schema document must have a top-level 'features' list")
    specs = []
    for e in entries:
        specs.append(
            FeatureSpec(
                name=e["name"],
                unit=e.get("unit", ""),
                kind=e["kind"],
                lower=e.get("lower"),
                upper=e.get("upper"),
            )
        )
    return FeatureSchema(features=tuple(specs))


def load_schema(path: Union[str, Path]) -> FeatureSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))


def save_schema(schema: FeatureSchema, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_dict(schema), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# CSV ingestion


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    return source


def load_csv(
    source,
    schema: FeatureSchema = DEFAULT_SCHEMA,
    *,
    ignore_extra_columns: bool = False,
) -> Dataset:
    """Read a UTF-8 comma-separated file into a Dataset.

    Header names are matched case-insensitively against the schema; the two
    target columns are optional; unknown columns are rejected unless
    ``ignore_extra_columns`` is set. Every parse or invariant failure names
    the offending row and column.
    """
    fh = _open_text(source)
    close = isinstance(source, (str, Path, bytes, bytearray))
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty file: missing header row")
        header = [h.strip() for h in header]
        lower_to_pos: dict[str, int] = {}
        for pos, name in enumerate(header):
            key = name.lower()
            if key in lower_to_pos:
                raise ValidationError(f"duplicate column {name!r} in header")
            lower_to_pos[key] = pos

        feature_pos = []
        for spec in schema.features:
            if spec.name.lower() not in lower_to_pos:
                raise ValidationError(f"missing required column {spec.name!r}")
            feature_pos.append(lower_to_pos[spec.name.lower()])
        target_pos = {
            t: lower_to_pos.get(col.lower()) for t, col in TARGET_COLUMNS.items()
        }
        known = set(feature_pos) | {p for p in target_pos.values() if p is not None}
        extras = [header[p] for p in range(len(header)) if p not in known]
        if extras and not ignore_extra_columns:
            raise ValidationError(
                f"unknown columns {extras}; pass --ignore-extra-columns to skip them"
            )

        samples: list[WasteSample] = []
        for row_ix, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ValidationError(
                    f"row {row_ix} has {len(row)} cells, header has {len(header)}"
                )

            def parse(pos: int, label: str, required: bool) -> Optional[float]:
                cell = row[pos].strip()
                if not cell:
                    if required:
                        raise ValidationError(f"empty cell for {label!r} at row {row_ix}")
                    return None
                try:
                    return float(cell)
                except ValueError:
                    raise ValidationError(
                        f"unparseable value {cell!r} for {label!r} at row {row_ix}"
                    )

            values = np.array(
                [parse(p, schema.features[j].name, True) for j, p in enumerate(feature_pos)],
                dtype=np.float64,
            )
            targets = {
                t: (parse(p, TARGET_COLUMNS[t], False) if p is not None else None)
                for t, p in target_pos.items()
            }
            sample = WasteSample(
                features=values,
                friction_angle_deg=targets["friction"],
                cohesion_kpa=targets["cohesion"],
            )
            validate_sample(schema, sample, row=row_ix)
            samples.append(sample)
        return Dataset(schema=schema, samples=samples)
    finally:
        if close:
            fh.close()


def save_csv(dataset: Dataset, destination) -> None:
    """Write a Dataset in the same CSV dialect ``load_csv`` reads.

    Floats are written with repr so a load/save/load round trip reproduces
    the dataset bit-for-bit.
    """
    fh = open(destination, "w", encoding="utf-8", newline="") if isinstance(
        destination, (str, Path)
    ) else destination
    try:
        writer = csv.writer(fh)
        has_friction = any(s.friction_angle_deg is not None for s in dataset.samples)
        has_cohesion = any(s.cohesion_kpa is not None for s in dataset.samples)
        header = list(dataset.schema.names)
        if has_friction:
            header.append(TARGET_COLUMNS["friction"])
        if has_cohesion:
            header.append(TARGET_COLUMNS["cohesion"])
        writer.writerow(header)
        for s in dataset.samples:
            row = [repr(float(v)) for v in s.features]
            if has_friction:
                row.append("" if s.friction_angle_deg is None else repr(float(s.friction_angle_deg)))
            if has_cohesion:
                row.append("" if s.cohesion_kpa is None else repr(float(s.cohesion_kpa)))
            writer.writerow(row)
    finally:
        if isinstance(destination, (str, Path)):
            fh.close()


# ---------------------------------------------------------------------------
# Min-Max scaling


def fit_minmax(dataset: Dataset) -> ScalerParams:
    """Per-dimension min/max over the dataset; requires a selected target."""
    if len(dataset) == 0:
        raise ValidationError("cannot fit scaler on an empty dataset")
    x = dataset.feature_matrix()
    y = dataset.targets()
    return ScalerParams(
        x_min=x.min(axis=0),
        x_max=x.max(axis=0),
        y_min=float(y.min()),
        y_max=float(y.max()),
    )


def transform_features(params: ScalerParams, x: np.ndarray) -> np.ndarray:
    """Map features to [0, 1] per dimension; constant dimensions map to 0.0.

    Values outside the fit range extrapolate linearly (they may leave
    [0, 1]); clipping would silently distort what-if exploration.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.x_min.shape[0]:
        raise ValidationError(
            f"vector length {x.shape[-1]} does not match scaler dimension {params.x_min.shape[0]}"
        )
    span = params.x_max - params.x_min
    safe = np.where(span == 0.0, 1.0, span)
    scaled = (x - params.x_min) / safe
    return np.where(span == 0.0, 0.0, scaled)


def transform_target(params: ScalerParams, y) -> np.ndarray:
    span = params.y_max - params.y_min
    if span == 0.0:
        return np.zeros_like(np.asarray(y, dtype=np.float64))
    return (np.asarray(y, dtype=np.float64) - params.y_min) / span


def transform(params: ScalerParams, sample: WasteSample, target_name: Optional[str] = None):
    """Scale one sample; returns (scaled features, scaled target or None)."""
    x_scaled = transform_features(params, sample.features)
    y_scaled = None
    if target_name is not None:
        y = sample.target(target_name)
        if y is not None:
            y_scaled = float(transform_target(params, y))
    return x_scaled, y_scaled


def inverse_transform(params: ScalerParams, y_scaled) -> np.ndarray:
    """Undo the target scaling: y = y_scaled*(y_max - y_min) + y_min."""
    return np.asarray(y_scaled, dtype=np.float64) * (params.y_max - params.y_min) + params.y_min


# ---------------------------------------------------------------------------
# Deterministic partitioning


def split_train_test(dataset: Dataset, test_fraction: float, rng: Rng):
    """Disjoint covering split; test size = round(n*fraction), clamped to [1, n-1]."""
    n = len(dataset)
    if n < 2:
        raise ValidationError(f"need at least 2 samples to split, got {n}")
    if not (0.0 < test_fraction < 1.0):
        raise ValidationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(round(n * test_fraction))
    n_test = max(1, min(n_test, n - 1))
    perm = rng.permutation(n)
    test_ix = sorted(perm[:n_test].tolist())
    train_ix = sorted(perm[n_test:].tolist())
    return dataset.subset(train_ix), dataset.subset(test_ix)


def kfold_partition(dataset: Dataset, k: int, rng: Rng):
    """k (train, validation) pairs; validation folds disjoint, covering, sizes within 1."""
    n = len(dataset)
    if not (2 <= k <= n):
        raise ValidationError(f"k must satisfy 2 <= k <= n={n}, got {k}")
    perm = rng.permutation(n).tolist()
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(perm[start : start + size])
        start += size
    pairs = []
    for i in range(k):
        val_ix = sorted(folds[i])
        train_ix = sorted(ix for j, fold in enumerate(folds) if j != i for ix in fold)
        pairs.append((dataset.subset(train_ix), dataset.subset(val_ix)))
    return pairs
