#!/usr/bin/env python3
"""Regenerate the golden service-response files under tests/golden/.

Run after any intentional change to the service response shapes or to the
deterministic fixture models (tests/util.py::build_service_models).
"""

import json
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from fastapi.testclient import TestClient  # noqa: E402

from shear_oracle.service import create_app  # noqa: E402
from util import build_service_models, showcase_request, normalize_checksums  # noqa: E402


def main() -> None:
    golden = REPO / "tests" / "golden"
    golden.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        friction_path, cohesion_path, _ = build_service_models(tmp)
        client = TestClient(create_app(friction_model=friction_path, cohesion_model=cohesion_path))

        row = showcase_request()
        low = dict(row, plastics=0.2, food_waste=0.05)
        outputs = {
            "predict_single.json": client.post(
                "/api/v1/predict", json={"features": row}
            ).json(),
            "predict_batch.json": client.post(
                "/api/v1/predict", json={"batch": [row, low]}
            ).json(),
            "explain_kernel.json": client.post(
                "/api/v1/explain",
                json={"features": row, "target": "friction", "method": "kernel", "n_samples": 64},
            ).json(),
            "explain_exact.json": client.post(
                "/api/v1/explain",
                json={"features": row, "target": "cohesion", "method": "exact"},
            ).json(),
        }
        for name, doc in outputs.items():
            path = golden / name
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(normalize_checksums(doc), fh, indent=2, sort_keys=True)
                fh.write("\n")
            print(f"wrote {path}")


if __name__ == "__main__":
    main()
