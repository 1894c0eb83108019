"""JSON model files (schema version 1) and atomic-measure files.

Floats go through ``json``'s shortest round-trip repr, so a saved model
loads back bitwise identical.
"""
import json
import warnings

import numpy as np

from .measure import AtomicMeasure
from .models import ModelError, SpinModel

SCHEMA_VERSION = "1"
SYMMETRIZE_TOL = 1e-10
REJECT_TOL = 1e-6


class SchemaError(ModelError):
    pass


def model_to_dict(model):
    out = {
        "schema_version": SCHEMA_VERSION,
        "n": model.n,
        "k": model.k,
        "spin_space": model.spin_space,
        "J": model.J.tolist(),
        "h": model.h.tolist(),
        "metadata": model.metadata,
    }
    if model.spin_space == "atoms":
        out["alphabet"] = model.alphabet.tolist()
    return out


def dumps(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps(model_to_dict(model)))


def _matrix(data, name, shape):
    try:
        arr = np.asarray(data[name], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field '{name}': not a numeric array ({exc})") from None
    if arr.shape != shape:
        raise SchemaError(f"field '{name}': expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"field '{name}': non-finite entries")
    return arr


def model_from_dict(data):
    if not isinstance(data, dict):
        raise SchemaError("model file must contain a JSON object")
    required = ["schema_version", "n", "k", "spin_space", "J", "h"]
    missing = [f for f in required if f not in data]
    if missing:
        raise SchemaError(f"missing field(s): {', '.join(missing)}")
    if str(data["schema_version"]) != SCHEMA_VERSION:
        raise SchemaError(f"field 'schema_version': unsupported version {data['schema_version']!r}")
    n, k = data["n"], data["k"]
    if not isinstance(n, int) or n < 1:
        raise SchemaError(f"field 'n': expected a positive integer, got {n!r}")
    if not isinstance(k, int) or k < 1:
        raise SchemaError(f"field 'k': expected a positive integer, got {k!r}")
    space = data["spin_space"]
    J = _matrix(data, "J", (n, n))
    h = _matrix(data, "h", (n, k))
    asym = float(np.max(np.abs(J - J.T)))
    if asym > REJECT_TOL:
        raise SchemaError(f"field 'J': asymmetric beyond {REJECT_TOL:g} (max {asym:.3g})")
    if asym > SYMMETRIZE_TOL:
        warnings.warn(f"J asymmetric by {asym:.3g}; symmetrizing", stacklevel=2)
        J = 0.5 * (J + J.T)
    meta = data.get("metadata", {})
    if not isinstance(meta, dict):
        raise SchemaError("field 'metadata': expected an object")
    if space == "ising":
        if k != 1:
            raise SchemaError("field 'k': ising models have k = 1")
        return SpinModel.ising(J, h, meta)
    if space == "potts":
        return SpinModel.potts(J, k, h, meta)
    if space == "atoms":
        if "alphabet" not in data:
            raise SchemaError("missing field(s): alphabet")
        pts = np.asarray(data["alphabet"], dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != k:
            raise SchemaError(f"field 'alphabet': expected rows of length {k}")
        return SpinModel.atoms(J, pts, h, meta)
    raise SchemaError(f"field 'spin_space': unknown value {space!r}")


def _read_json(path):
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_model(path):
    try:
        return model_from_dict(_read_json(path))
    except SchemaError as exc:
        if str(exc).startswith(str(path)):
            raise
        raise SchemaError(f"{path}: {exc}") from None


def save_measure(mu, path):
    with open(path, "w") as fh:
        fh.write(dumps(mu.to_dict()))


def load_measure(path):
    data = _read_json(path)
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: measure file must contain a JSON object")
    try:
        return AtomicMeasure.from_dict(data)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None
