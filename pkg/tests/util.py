"""Shared fixtures for explainer/service tests: tiny bundles, fake models."""

import itertools
import math

import numpy as np

from shear_oracle.data import FeatureSchema, FeatureSpec, ScalerParams
from shear_oracle.mlp import MlpConfig, MlpParams, init_params
from shear_oracle.model_io import ModelBundle
from shear_oracle.numeric import Rng


def make_schema(m, kind="physical"):
    return FeatureSchema(
        features=tuple(FeatureSpec(f"x{i}", "", kind) for i in range(m))
    )


def identity_scaler(m):
    return ScalerParams(x_min=np.zeros(m), x_max=np.ones(m), y_min=0.0, y_max=1.0)


def mlp_bundle(m, hidden=(8, 4), seed=0, background=None, scaler=None, target="friction"):
    """Real tiny MLP bundle with identity scaling unless overridden."""
    config = MlpConfig(input_size=m, hidden_sizes=hidden, dropout_p=0.2)
    params = init_params(config, Rng(seed))
    if background is None:
        background = Rng(seed + 1).uniform(0.0, 1.0, (5, m))
    return ModelBundle(
        config=config,
        params=params,
        scaler=scaler or identity_scaler(m),
        schema=make_schema(m),
        target_name=target,
        background=background,
        background_provenance={"seed": seed + 1, "source_size": int(np.shape(background)[0])},
    )


def fn_bundle(fn, m, background, seed=0):
    """Bundle whose prediction is an arbitrary callable on batches (n, m)."""
    bundle = mlp_bundle(m, hidden=(2,), seed=seed, background=background)
    bundle.predict_scaled = lambda x: np.asarray(fn(np.atleast_2d(np.asarray(x, dtype=float))))
    return bundle


def build_service_models(tmp_dir):
    """Train and save the deterministic tiny models the service tests use.

    Returns (friction_path, cohesion_path, dataset). Also the recipe behind
    the golden response files (see scripts/regen_golden.py).
    """
    from pathlib import Path

    from shear_oracle.data import split_train_test
    from shear_oracle.model_io import save_model
    from shear_oracle.synth import default_generator_spec, generate
    from shear_oracle.training import TrainConfig, train

    dataset, _ = generate(default_generator_spec(), 60, Rng(123))
    paths = {}
    for target, seed in (("friction", 21), ("cohesion", 22)):
        ds = dataset.for_target(target)
        tr, te = split_train_test(ds, 0.15, Rng(99))
        config = MlpConfig(input_size=17, hidden_sizes=(8,), dropout_p=0.1)
        bundle, _ = train(
            tr, te, config, TrainConfig(epochs=30, seed=seed), background_size=5
        )
        path = Path(tmp_dir) / f"{target}.model"
        save_model(bundle, path)
        paths[target] = path
    return paths["friction"], paths["cohesion"], dataset


def showcase_request():
    """A full 17-feature map using the deployed app's showcased values."""
    return {
        "food_waste": 0.31, "garden_waste": 0.01, "paper_cardboard": 0.05,
        "textiles": 0.08, "plastics": 0.35, "rubber": 0.01, "nappies": 0.02,
        "metal": 0.01, "glass": 0.01, "other": 0.05, "size_10_15_mm": 0.15,
        "size_5_10_mm": 0.15, "size_2_5_mm": 0.12, "size_lt_2_mm": 0.10,
        "fine_fraction": 0.08, "moisture_content": 0.55, "density_kn_m3": 7.23,
    }


def normalize_checksums(doc):
    """Replace checksum strings so golden comparisons survive retraining."""
    import copy

    doc = copy.deepcopy(doc)

    def walk(node):
        if isinstance(node, dict):
            for key, value in node.items():
                if key in ("models", "model_sha256"):
                    if isinstance(value, dict):
                        node[key] = {k: ("<checksum>" if v else None) for k, v in value.items()}
                    elif value is not None:
                        node[key] = "<checksum>"
                else:
                    walk(value)
        elif isinstance(node, list):
            for item in node:
                walk(item)

    walk(doc)
    return doc


def assert_json_close(actual, expected, tol=1e-10, path="$"):
    """Structural equality with numeric tolerance (floats drift across BLAS builds)."""
    if isinstance(expected, dict):
        assert isinstance(actual, dict), path
        assert set(actual) == set(expected), f"{path}: keys {set(actual)} != {set(expected)}"
        for key in expected:
            assert_json_close(actual[key], expected[key], tol, f"{path}.{key}")
    elif isinstance(expected, list):
        assert isinstance(actual, list) and len(actual) == len(expected), path
        for i, (a, e) in enumerate(zip(actual, expected)):
            assert_json_close(a, e, tol, f"{path}[{i}]")
    elif isinstance(expected, float) and not isinstance(expected, bool):
        assert isinstance(actual, (int, float)), path
        assert abs(actual - expected) <= tol * max(1.0, abs(expected)), (
            f"{path}: {actual} != {expected}"
        )
    else:
        assert actual == expected, f"{path}: {actual!r} != {expected!r}"


def brute_force_shapley(fn, x, background):
    """Independent oracle: textbook coalition enumeration, no memoization,
    weights from factorials, value = mean over background of the hybrid."""
    m = len(x)
    background = np.atleast_2d(background)

    def value(subset):
        total = 0.0
        for b in background:
            hybrid = np.array([x[j] if j in subset else b[j] for j in range(m)])
            total += float(fn(hybrid[None, :])[0])
        return total / background.shape[0]

    phi = np.zeros(m)
    for i in range(m):
        others = [j for j in range(m) if j != i]
        for size in range(m):
            for subset in itertools.combinations(others, size):
                s = set(subset)
                w = (
                    math.factorial(len(s))
                    * math.factorial(m - len(s) - 1)
                    / math.factorial(m)
                )
                phi[i] += w * (value(s | {i}) - value(s))
    return phi, value(set()), value(set(range(m)))
