"""Self-describing, versioned model file: one trained regressor per file.

Byte layout (all integers little-endian):

    bytes 0-7    magic b"MSWSHEAR"
    bytes 8-11   u32 format version (currently 1)
    bytes 12-15  u32 header length H
    bytes 16-..  H bytes of UTF-8 JSON header: format version, creation
                 metadata, feature schema, network config, target name,
                 background provenance, and an ordered array directory
                 (name + shape per array)
    ...          payload: every array as float64, row-major, in directory
                 order (weights, biases, scaler vectors, y range,
                 embedded background rows)
    last 32      SHA-256 over every preceding byte

The header carries no wall-clock timestamp: training twice with the same
seed must produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .data import FeatureSchema, ScalerParams, inverse_transform, schema_from_dict, schema_to_dict, transform_features
from .mlp import MlpConfig, MlpParams, forward_eval

MAGIC = b"MSWSHEAR"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a model stream is malformed, corrupt or incompatible."""


@dataclass
class ModelBundle:
    """Everything needed to predict and explain: params, scaler, schema, background."""

    config: MlpConfig
    params: MlpParams
    scaler: ScalerParams
    schema: FeatureSchema
    target_name: str
    background: np.ndarray
    background_provenance: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    checksum: Optional[str] = None

    def __post_init__(self):
        self.params.validate_chain(self.config)
        if len(self.schema) != self.config.input_size:
            raise ModelFormatError(
                f"schema has {len(self.schema)} features, network expects {self.config.input_size}"
            )
        self.background = np.atleast_2d(np.asarray(self.background, dtype=np.float64))
        if self.background.shape[1] != self.config.input_size:
            raise ModelFormatError(
                f"background rows have width {self.background.shape[1]}, "
                f"expected {self.config.input_size}"
            )

    def predict_scaled(self, x_scaled: np.ndarray) -> np.ndarray:
        """Eval-mode forward in scaled space; scaled prediction(s)."""
        return forward_eval(self.params, x_scaled)

    def predict_native(self, x_native: np.ndarray):
        """Predict in native units from native-unit features.

        Returns (predictions, out_of_range mask) where the mask flags each
        feature that fell outside the scaler's fit range (such inputs
        extrapolate rather than clip).
        """
        x_native = np.atleast_2d(np.asarray(x_native, dtype=np.float64))
        out_of_range = (x_native < self.scaler.x_min) | (x_native > self.scaler.x_max)
        preds_scaled = np.atleast_1d(self.predict_scaled(transform_features(self.scaler, x_native)))
        return inverse_transform(self.scaler, preds_scaled), out_of_range


def _array_directory(bundle: ModelBundle) -> list[tuple[str, np.ndarray]]:
    arrays: list[tuple[str, np.ndarray]] = []
    for i, (w, b) in enumerate(zip(bundle.params.weights, bundle.params.biases), start=1):
        arrays.append((f"W{i}", w))
        arrays.append((f"b{i}", b))
    arrays.append(("x_min", bundle.scaler.x_min))
    arrays.append(("x_max", bundle.scaler.x_max))
    arrays.append(("y_range", np.array([bundle.scaler.y_min, bundle.scaler.y_max])))
    arrays.append(("background", bundle.background))
    return arrays


def save_model(bundle: ModelBundle, destination: Union[str, Path, io.IOBase]) -> str:
    """Serialize a bundle; returns the file's SHA-256 hex digest."""
    arrays = _array_directory(bundle)
    header = {
        "format_version": FORMAT_VERSION,
        "metadata": bundle.metadata,
        "schema": schema_to_dict(bundle.schema),
        "config": {
            "input_size": bundle.config.input_size,
            "hidden_sizes": list(bundle.config.hidden_sizes),
            "dropout_p": bundle.config.dropout_p,
        },
        "target_name": bundle.target_name,
        "background_provenance": bundle.background_provenance,
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(FORMAT_VERSION.to_bytes(4, "little"))
    buf.write(len(header_bytes).to_bytes(4, "little"))
    buf.write(header_bytes)
    for _, a in arrays:
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    digest = hashlib.sha256(buf.getvalue()).digest()
    buf.write(digest)

    data = buf.getvalue()
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            fh.write(data)
    else:
        destination.write(data)
    bundle.checksum = digest.hex()
    return digest.hex()


def load_model(source: Union[str, Path, bytes, io.IOBase]) -> ModelBundle:
    """Parse, checksum-verify and shape-check a model stream."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()

    if len(data) < len(MAGIC) + 8 + 32:
        raise ModelFormatError("stream too short to be a model file (truncated?)")
    if data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("bad magic: not a model file")
    body, stored_digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != stored_digest:
        raise ModelFormatError("checksum mismatch: file corrupt or truncated")

    pos = len(MAGIC)
    version = int.from_bytes(data[pos : pos + 4], "little")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}, expected {FORMAT_VERSION}")
    pos += 4
    header_len = int.from_bytes(data[pos : pos + 4], "little")
    pos += 4
    try:
        header = json.loads(data[pos : pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable header: {exc}")
    pos += header_len

    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        raw = data[pos : pos + nbytes]
        if len(raw) != nbytes:
            raise ModelFormatError(f"payload truncated while reading array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        pos += nbytes
    if pos != len(body):
        raise ModelFormatError("trailing bytes after declared arrays")

    config = MlpConfig(
        input_size=header["config"]["input_size"],
        hidden_sizes=tuple(header["config"]["hidden_sizes"]),
        dropout_p=header["config"]["dropout_p"],
    )
    n_layers = len(config.hidden_sizes) + 1
    try:
        params = MlpParams(
            weights=[arrays[f"W{i}"] for i in range(1, n_layers + 1)],
            biases=[arrays[f"b{i}"] for i in range(1, n_layers + 1)],
        )
        scaler = ScalerParams(
            x_min=arrays["x_min"],
            x_max=arrays["x_max"],
            y_min=float(arrays["y_range"][0]),
            y_max=float(arrays["y_range"][1]),
        )
        background = arrays["background"]
    except KeyError as exc:
        raise ModelFormatError(f"missing array {exc.args[0]!r} in model file")

    try:
        bundle = ModelBundle(
            config=config,
            params=params,
            scaler=scaler,
            schema=schema_from_dict(header["schema"]),
            target_name=header["target_name"],
            background=background,
            background_provenance=header.get("background_provenance", {}),
            metadata=header.get("metadata", {}),
            checksum=stored_digest.hex(),
        )
    except ValueError as exc:
        raise ModelFormatError(f"inconsistent shapes in model file: {exc}")
    return bundle
