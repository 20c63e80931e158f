"""Readers and writers for model, data, heat-map, attribution and stats files."""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .attribution import PointwiseModel
from .errors import InputError
from .heatmap import HeatMap
from .latent_rank import ReadoutSpec
from .model import ACTIVATIONS, MlpSpec
from .ncde import DEFAULT_STEPS, NcdeModel, VectorFieldSpec
from .samples import Dataset, TimeSeriesSample


class ModelFormatError(InputError):
    pass


# -- models -----------------------------------------------------------------

def mlp_to_dict(spec: MlpSpec) -> dict:
    return {
        "type": "mlp",
        "dims": spec.layer_dims,
        "activations": list(spec.activations),
        "weights": [w.ravel().tolist() for w in spec.weights],
        "biases": [b.tolist() for b in spec.biases],
    }


def _field(doc, key, where):
    if key not in doc:
        raise ModelFormatError(f"{where}: missing field {key!r}")
    return doc[key]


def _floats(seq, n, where):
    if not isinstance(seq, list) or len(seq) != n:
        got = len(seq) if isinstance(seq, list) else type(seq).__name__
        raise ModelFormatError(f"{where}: expected {n} numbers, got {got}")
    try:
        arr = np.array(seq, dtype=np.float64)
    except (TypeError, ValueError):
        raise ModelFormatError(f"{where}: non-numeric entry") from None
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError(f"{where}: non-finite entry")
    return arr


def mlp_from_dict(doc: dict, where: str = "model") -> MlpSpec:
    dims = _field(doc, "dims", where)
    acts = _field(doc, "activations", where)
    weights = _field(doc, "weights", where)
    biases = _field(doc, "biases", where)
    if not isinstance(dims, list) or len(dims) < 2 or not all(isinstance(d, int) and d > 0 for d in dims):
        raise ModelFormatError(f"{where}.dims: expected a list of at least two positive integers")
    n = len(dims) - 1
    for name, seq in (("activations", acts), ("weights", weights), ("biases", biases)):
        if not isinstance(seq, list) or len(seq) != n:
            raise ModelFormatError(f"{where}.{name}: expected {n} entries, one per layer")
    for k, a in enumerate(acts):
        if a not in ACTIVATIONS:
            raise ModelFormatError(f"{where}.activations[{k}]: unknown activation {a!r}")
    Ws = [_floats(weights[k], dims[k] * dims[k + 1], f"{where}.weights[{k}]").reshape(dims[k + 1], dims[k])
          for k in range(n)]
    bs = [_floats(biases[k], dims[k + 1], f"{where}.biases[{k}]") for k in range(n)]
    return MlpSpec(tuple(Ws), tuple(bs), tuple(acts))


def model_to_dict(model) -> dict:
    if isinstance(model, PointwiseModel):
        return mlp_to_dict(model.mlp)
    if isinstance(model, MlpSpec):
        return mlp_to_dict(model)
    if isinstance(model, NcdeModel):
        doc = mlp_to_dict(model.field.mlp)
        doc.update(type="ncde_field", hidden=model.field.hidden, input_dim=model.field.input_dim,
                   n_steps=model.n_steps,
                   initial=None if model.initial is None else mlp_to_dict(model.initial))
        return doc
    if isinstance(model, ReadoutSpec):
        return {"type": "readout", "weights": model.weights.tolist(), "bias": model.bias}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict):
    """``MlpSpec``, ``NcdeModel`` or ``ReadoutSpec`` depending on ``doc["type"]``."""
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    kind = _field(doc, "type", "model")
    if kind == "mlp":
        return mlp_from_dict(doc)
    if kind == "ncde_field":
        H = _field(doc, "hidden", "model")
        D = _field(doc, "input_dim", "model")
        if not (isinstance(H, int) and isinstance(D, int) and H > 0 and D > 0):
            raise ModelFormatError("model.hidden/model.input_dim: expected positive integers")
        mlp = mlp_from_dict(doc)
        if mlp.input_dim != H + 1 or mlp.output_dim != H * D:
            raise ModelFormatError(
                f"model.dims: vector field must map {H + 1} inputs to {H * D} outputs")
        initial = doc.get("initial")
        init = None if initial is None else mlp_from_dict(initial, "model.initial")
        if init is not None and (init.input_dim != D or init.output_dim != H):
            raise ModelFormatError(f"model.initial: must map {D} features to {H} states")
        n_steps = doc.get("n_steps", DEFAULT_STEPS)
        if not isinstance(n_steps, int) or n_steps < 1:
            raise ModelFormatError("model.n_steps: expected a positive integer")
        return NcdeModel(VectorFieldSpec(mlp, H, D), init, n_steps)
    if kind == "readout":
        w = _field(doc, "weights", "model")
        if not isinstance(w, list) or not w:
            raise ModelFormatError("model.weights: expected a non-empty list")
        bias = doc.get("bias", 0.0)
        if not isinstance(bias, (int, float)):
            raise ModelFormatError("model.bias: expected a number")
        return ReadoutSpec(_floats(w, len(w), "model.weights"), float(bias))
    raise ModelFormatError(f"model.type: unknown model type {kind!r}")


def save_model(model, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips bit-exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return model_from_dict(doc)


def load_latent_model(path):
    """A model usable by the heat-map pipeline: per-step MLP or NCDE."""
    model = load_model(path)
    if isinstance(model, MlpSpec):
        return PointwiseModel(model)
    if isinstance(model, NcdeModel):
        return model
    raise ModelFormatError(f"{path}: expected an 'mlp' or 'ncde_field' model")


# -- data -------------------------------------------------------------------

_FIXED = ("sample_id", "time", "label")


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def read_dataset(path, fill_missing: bool = True) -> Dataset:
    """Rows grouped by ``sample_id`` in order of first appearance.

    Empty cells are missing values; with ``fill_missing`` they become 0 and
    the sample's mask records where they were.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header[:3]) != _FIXED:
            raise InputError(f"{path}: header must start with sample_id,time,label")
        names = [h.strip() for h in header[3:]]
        if not names:
            raise InputError(f"{path}: no feature columns")
        groups: dict[str, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            sid = row[0]
            try:
                t = float(row[1])
                label = int(row[2])
                vals = [float(c) if c.strip() else np.nan for c in row[3:]]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric time, label or feature value") from None
            groups.setdefault(sid, []).append((t, label, vals))
    samples = []
    for sid, rows in groups.items():
        labels = {r[1] for r in rows}
        if len(labels) != 1:
            raise InputError(f"{path}: sample {sid} has inconsistent labels {sorted(labels)}")
        times = np.array([r[0] for r in rows])
        values = np.array([r[2] for r in rows], dtype=np.float64)
        mask = np.isnan(values)
        if fill_missing:
            values = np.where(mask, 0.0, values)
        samples.append(TimeSeriesSample(sid, times, values, labels.pop(), mask))
    if not samples:
        raise InputError(f"{path}: no data rows")
    return Dataset(samples, names)


def write_dataset(dataset: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(_FIXED) + list(dataset.feature_names))
        for s in dataset.samples:
            values = s.values if s.mask is None else np.where(s.mask, np.nan, s.values)
            for t, row in zip(s.times, values):
                w.writerow([s.sample_id, repr(float(t)), s.label] + [_fmt(v) for v in row])


# -- heat maps and attributions --------------------------------------------

def row_label(state: int, time: int) -> str:
    return f"z{state}(t{time})"


_ROW = re.compile(r"^z(\d+)\(t(\d+)\)$")


def write_heatmap_csv(hm: HeatMap, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row"] + list(hm.col_labels))
        for (s, n), counts in zip(hm.row_labels, hm.counts):
            w.writerow([row_label(s, n)] + [int(c) for c in counts])


def read_heatmap_csv(path, direction: str = "positive") -> HeatMap:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"heat map file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["row"]:
        raise InputError(f"{path}: header must start with 'row'")
    cols = rows[0][1:]
    labels, counts = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        m = _ROW.match(row[0]) if row else None
        if m is None or len(row) != len(cols) + 1:
            raise InputError(f"{path}:{lineno}: malformed heat-map row")
        labels.append((int(m.group(1)), int(m.group(2))))
        try:
            counts.append([int(c) for c in row[1:]])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-integer count") from None
    arr = np.array(counts, dtype=np.int64).reshape(len(labels), len(cols))
    if np.any(arr < 0):
        raise InputError(f"{path}: negative count")
    return HeatMap(arr, direction, {}, 0, labels, cols)


def write_attribution_csv(pa, impacts, labels, feature_names, path) -> None:
    """One line per (latent row, feature): state_index, time_index, feature_name, j, p."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state_index", "time_index", "feature_name", "j", "p"])
        for r, (s, n) in enumerate(labels):
            for i, name in enumerate(feature_names):
                w.writerow([s, n, name, repr(float(pa.j[r, i])), repr(float(impacts.p[r, i]))])


# -- stats and config -------------------------------------------------------

def save_stats(stats, names, path) -> None:
    doc = {"features": list(names), "min": stats.mins.tolist(), "max": stats.maxs.tolist()}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_stats(path):
    from .features import MinMaxStats

    path = Path(path)
    if not path.is_file():
        raise InputError(f"stats file not found: {path}")
    try:
        doc = json.loads(path.read_text())
        names = list(doc["features"])
        mins = np.array(doc["min"], dtype=np.float64)
        maxs = np.array(doc["max"], dtype=np.float64)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise InputError(f"{path}: malformed stats file (needs features/min/max)") from None
    if not (len(names) == mins.size == maxs.size):
        raise InputError(f"{path}: features/min/max lengths differ")
    return MinMaxStats(mins, maxs, tuple(names))


def read_config(path) -> dict:
    """``key=value`` lines; blank lines and ``#`` comments are skipped."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out
