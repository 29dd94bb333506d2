"""JSON-over-HTTP inference API: prediction and attribution for both targets.

Both target models load at startup and are immutable afterwards; request
handling is stateless, so any request order and any concurrency yield
identical per-request responses. All responses carry the model file
checksums for provenance.

Endpoints (all JSON):
    GET  /api/v1/health   liveness + loaded model checksums
    GET  /api/v1/schema   feature descriptors with fit ranges (the range a
                          value can take without an extrapolation warning,
                          i.e. the intersection of both models' fit ranges)
    POST /api/v1/predict  single feature map or batch; unknown fields rejected
    POST /api/v1/explain  attribution for one feature map and one target
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from . import __version__
from .explain import BackgroundSet, ExplainerError, exact_shapley, kernel_shap, waterfall
from .model_io import ModelBundle, load_model

TARGET_KEYS = {"friction": "friction_deg", "cohesion": "cohesion_kpa"}
DEFAULT_KERNEL_SAMPLES = 2048
DEFAULT_EXACT_LIMIT_SERVICE = 17  # the deployed models have 17 features
DEFAULT_MAX_BATCH = 1000


class PredictBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    features: Optional[dict[str, Any]] = None
    batch: Optional[list[dict[str, Any]]] = None


class ExplainBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    features: dict[str, Any]
    target: str
    method: str = "kernel"
    n_samples: Optional[int] = None


def _load_bundle(source) -> Optional[ModelBundle]:
    if source is None or isinstance(source, ModelBundle):
        return source
    return load_model(source)


def create_app(
    friction_model: Union[str, Path, ModelBundle, None] = None,
    cohesion_model: Union[str, Path, ModelBundle, None] = None,
    *,
    exact_limit: int = DEFAULT_EXACT_LIMIT_SERVICE,
    kernel_default_samples: int = DEFAULT_KERNEL_SAMPLES,
    max_batch: int = DEFAULT_MAX_BATCH,
    static_dir: Union[str, Path, None] = None,
) -> FastAPI:
    bundles: dict[str, Optional[ModelBundle]] = {
        "friction": _load_bundle(friction_model),
        "cohesion": _load_bundle(cohesion_model),
    }
    loaded = {t: b for t, b in bundles.items() if b is not None}
    schemas = {tuple(b.schema.names) for b in loaded.values()}
    if len(schemas) > 1:
        raise ValueError("friction and cohesion models disagree on the feature schema")

    app = FastAPI(title="shear-oracle inference service", version=__version__)

    def checksums() -> dict:
        return {t: (b.checksum if b else None) for t, b in bundles.items()}

    def any_bundle() -> ModelBundle:
        if not loaded:
            raise HTTPException(status_code=503, detail="no model loaded")
        return next(iter(loaded.values()))

    def require(target: str) -> ModelBundle:
        bundle = bundles.get(target)
        if bundle is None:
            raise HTTPException(status_code=503, detail=f"{target} model not loaded")
        return bundle

    def resolve_features(feature_map: Any) -> np.ndarray:
        schema = any_bundle().schema
        if not isinstance(feature_map, dict):
            raise HTTPException(status_code=400, detail="features must be an object")
        unknown = sorted(set(feature_map) - set(schema.names))
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown features: {unknown}")
        values = np.empty(len(schema))
        for i, name in enumerate(schema.names):
            if name not in feature_map:
                raise HTTPException(status_code=400, detail=f"missing feature {name!r}")
            value = feature_map[name]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise HTTPException(
                    status_code=400, detail=f"feature {name!r} must be a number, got {value!r}"
                )
            if not np.isfinite(value):
                raise HTTPException(status_code=400, detail=f"feature {name!r} must be finite")
            values[i] = float(value)
        return values

    def predict_row(values: np.ndarray) -> dict:
        schema = any_bundle().schema
        predictions = {}
        flagged: set[str] = set()
        for target, key in TARGET_KEYS.items():
            bundle = require(target)
            preds, out_of_range = bundle.predict_native(values[None, :])
            predictions[key] = float(preds[0])
            flagged.update(schema.names[j] for j in np.nonzero(out_of_range[0])[0])
        return {
            "features": {name: float(v) for name, v in zip(schema.names, values)},
            "predictions": predictions,
            "out_of_range": sorted(flagged),
        }

    @app.get("/api/v1/health")
    def health() -> dict:
        return {"status": "ok", "models": checksums()}

    @app.get("/api/v1/schema")
    def schema() -> dict:
        bundle = any_bundle()
        features = []
        for j, spec in enumerate(bundle.schema.features):
            fit_min = max(b.scaler.x_min[j] for b in loaded.values())
            fit_max = min(b.scaler.x_max[j] for b in loaded.values())
            features.append(
                {
                    "name": spec.name,
                    "unit": spec.unit,
                    "kind": spec.kind,
                    "fit_min": float(fit_min),
                    "fit_max": float(fit_max),
                }
            )
        return {"features": features, "models": checksums()}

    @app.post("/api/v1/predict")
    def predict(body: PredictBody) -> dict:
        if (body.features is None) == (body.batch is None):
            raise HTTPException(
                status_code=400, detail="provide exactly one of 'features' or 'batch'"
            )
        if body.features is not None:
            result = predict_row(resolve_features(body.features))
            result["models"] = checksums()
            return result
        if len(body.batch) > max_batch:
            raise HTTPException(
                status_code=400,
                detail=f"batch of {len(body.batch)} exceeds the limit of {max_batch} rows",
            )
        results = [predict_row(resolve_features(row)) for row in body.batch]
        return {"results": results, "models": checksums()}

    @app.post("/api/v1/explain")
    def explain(body: ExplainBody) -> dict:
        if body.target not in TARGET_KEYS:
            raise HTTPException(
                status_code=400, detail=f"target must be friction or cohesion, got {body.target!r}"
            )
        if body.method not in ("exact", "kernel"):
            raise HTTPException(
                status_code=400, detail=f"method must be exact or kernel, got {body.method!r}"
            )
        bundle = require(body.target)
        values = resolve_features(body.features)
        m = len(bundle.schema)
        background = BackgroundSet.from_bundle(bundle)
        try:
            if body.method == "exact":
                expl = exact_shapley(bundle, values, background, exact_limit=exact_limit)
            else:
                n_samples = body.n_samples if body.n_samples is not None else kernel_default_samples
                if n_samples < 2 * m:
                    raise HTTPException(
                        status_code=400,
                        detail=f"n_samples must be at least 2*M = {2 * m}, got {n_samples}",
                    )
                expl = kernel_shap(bundle, values, background, n_samples=n_samples, seed=0)
        except ExplainerError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        doc = expl.to_dict()
        doc["target"] = body.target
        doc["waterfall"] = [
            {"label": s.label, "phi": s.phi, "cumulative": s.cumulative}
            for s in waterfall(expl)
        ]
        doc["model_sha256"] = bundle.checksum
        return doc

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
