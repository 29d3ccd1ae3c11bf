"""On-disk formats for datasets, fitted pipelines and result tables.

Dataset directory::

    manifest.json  format_version, n_obs, n_channels, n_bands, target_kind,
                   has_groups, has_truth, byte_order, dtype
    covs.bin       N*B*P*P little-endian float64, (obs, band, row, col) order
    targets.csv    index,target[,group]
    truth.json     optional: A (rows), b, b0, q

Model directory::

    model.json     method, dims, hyperparameters, scaler, head, band blocks
    refs.bin       little-endian float64 arrays referenced from model.json
                   by (offset, shape), offsets counted in float64 elements
"""

import csv
import io
import json
import os
import tempfile

import numpy as np

from .covariance import SpatialReducer
from .dataset import CovarianceDataset, GroundTruth
from .errors import ContractError
from .linmodel import LinearHead, Standardizer
from .pipelines import BandModel, FittedPipeline

DATASET_FORMAT_VERSION = 1
MODEL_FORMAT_VERSION = 1


class FormatError(ContractError):
    """A file on disk does not match the expected format."""


def fmt_float(x):
    """17 significant digits, '.' decimal separator."""
    return format(float(x), ".17g")


def atomic_write_bytes(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, (float, np.floating))
                         else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write_text(path, csv_text(header, rows))


def _label_text(value):
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    return str(value.item() if isinstance(value, np.generic) else value)


def _parse_labels(tokens):
    try:
        return np.array([int(t) for t in tokens])
    except ValueError:
        pass
    try:
        return np.array([float(t) for t in tokens])
    except ValueError:
        return np.array(tokens)


# --- datasets ---------------------------------------------------------------

def save_dataset(ds, path):
    os.makedirs(path, exist_ok=True)
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "n_obs": ds.n_obs,
        "n_channels": ds.n_channels,
        "n_bands": ds.n_bands,
        "target_kind": ds.target_kind,
        "has_groups": ds.groups is not None,
        "has_truth": ds.truth is not None,
        "byte_order": "little",
        "dtype": "float64",
    }
    atomic_write_bytes(os.path.join(path, "covs.bin"),
                       np.ascontiguousarray(ds.covs, dtype="<f8").tobytes())
    header = ["index", "target"] + (["group"] if ds.groups is not None else [])
    rows = []
    for i in range(ds.n_obs):
        row = [str(i), _label_text(ds.targets[i])]
        if ds.groups is not None:
            row.append(_label_text(ds.groups[i]))
        rows.append(row)
    write_csv(os.path.join(path, "targets.csv"), header, rows)
    if ds.truth is not None:
        t = ds.truth
        write_json(os.path.join(path, "truth.json"), {
            "A": t.mixing.tolist(),
            "b": np.asarray(t.weights, dtype=float).tolist(),
            "b0": float(t.bias),
            "q": int(t.n_sources),
        })
    write_json(os.path.join(path, "manifest.json"), manifest)


def load_dataset(path):
    manifest = read_json(os.path.join(path, "manifest.json"))
    if manifest.get("format_version") != DATASET_FORMAT_VERSION:
        raise FormatError(
            f"dataset format_version {manifest.get('format_version')!r} is not "
            f"supported (expected {DATASET_FORMAT_VERSION})")
    if manifest.get("byte_order") != "little" or manifest.get("dtype") != "float64":
        raise FormatError("only little-endian float64 covariances are supported")
    n, b, p = manifest["n_obs"], manifest["n_bands"], manifest["n_channels"]
    raw = np.fromfile(os.path.join(path, "covs.bin"), dtype="<f8")
    if raw.size != n * b * p * p:
        raise FormatError(
            f"covs.bin holds {raw.size} values, manifest implies {n * b * p * p}")
    covs = raw.reshape(n, b, p, p).astype(np.float64)
    with open(os.path.join(path, "targets.csv"), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    expected = ["index", "target"] + (["group"] if manifest["has_groups"] else [])
    if header != expected:
        raise FormatError(f"targets.csv header {header} != {expected}")
    if len(body) != n:
        raise FormatError(f"targets.csv has {len(body)} rows, expected {n}")
    order = np.array([int(r[0]) for r in body])
    if not np.array_equal(np.sort(order), np.arange(n)):
        raise FormatError("targets.csv indices must be 0..N-1")
    body = [body[i] for i in np.argsort(order)]
    if manifest["target_kind"] == "continuous":
        targets = np.array([float(r[1]) for r in body])
    else:
        targets = _parse_labels([r[1] for r in body])
    groups = _parse_labels([r[2] for r in body]) if manifest["has_groups"] else None
    truth = None
    if manifest["has_truth"]:
        t = read_json(os.path.join(path, "truth.json"))
        truth = GroundTruth(mixing=np.array(t["A"], dtype=np.float64),
                            weights=np.array(t["b"], dtype=np.float64),
                            bias=float(t["b0"]), n_sources=int(t["q"]))
    return CovarianceDataset(covs=covs, targets=targets,
                             target_kind=manifest["target_kind"], groups=groups,
                             truth=truth)


# --- models -----------------------------------------------------------------

class _Blob:
    def __init__(self):
        self.parts = []
        self.size = 0

    def add(self, array):
        if array is None:
            return None
        array = np.ascontiguousarray(array, dtype="<f8")
        ref = {"offset": self.size, "shape": list(array.shape)}
        self.parts.append(array.ravel())
        self.size += array.size
        return ref

    def tobytes(self):
        if not self.parts:
            return b""
        return np.concatenate(self.parts).astype("<f8").tobytes()


def _floats(x):
    return [float(v) for v in np.asarray(x, dtype=np.float64).ravel()]


def save_model(pipeline, path):
    blob = _Blob()
    bands = []
    for model in pipeline.bands:
        bands.append({
            "reference": blob.add(model.reference),
            "reducer": blob.add(None if model.reducer is None
                                else model.reducer.filters),
            "filters": blob.add(model.filters),
            "eigenvalues": None if model.eigenvalues is None
            else _floats(model.eigenvalues),
        })
    head = pipeline.head
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "method": pipeline.method,
        "n_channels": pipeline.n_channels,
        "n_bands": len(pipeline.bands),
        "n_features": pipeline.n_features,
        "n_components": pipeline.n_components,
        "head_kind": pipeline.head_kind,
        "offsets": list(pipeline.offsets),
        "standardizer": {"means": _floats(pipeline.standardizer.means),
                         "stds": _floats(pipeline.standardizer.stds)},
        "head": {"kind": head.kind, "weights": _floats(head.weights),
                 "bias": float(head.bias), "alpha": float(head.alpha),
                 "classes": [c.item() if isinstance(c, np.generic) else c
                             for c in head.classes]},
        "bands": bands,
        "blob": {"file": "refs.bin", "dtype": "float64", "byte_order": "little",
                 "n_values": blob.size},
    }
    os.makedirs(path, exist_ok=True)
    atomic_write_bytes(os.path.join(path, "refs.bin"), blob.tobytes())
    write_json(os.path.join(path, "model.json"), doc)


def load_model(path):
    doc = read_json(os.path.join(path, "model.json"))
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"model format_version {doc.get('format_version')!r} is not "
            f"supported (expected {MODEL_FORMAT_VERSION})")
    raw = np.fromfile(os.path.join(path, doc["blob"]["file"]), dtype="<f8")
    if raw.size != doc["blob"]["n_values"]:
        raise FormatError("refs.bin size does not match model.json")

    def take(ref):
        if ref is None:
            return None
        count = int(np.prod(ref["shape"]))
        return raw[ref["offset"]:ref["offset"] + count].reshape(ref["shape"]).copy()

    bands = []
    for b in doc["bands"]:
        reducer = take(b["reducer"])
        bands.append(BandModel(
            reducer=None if reducer is None else SpatialReducer(filters=reducer),
            reference=take(b["reference"]),
            filters=take(b["filters"]),
            eigenvalues=None if b["eigenvalues"] is None
            else np.array(b["eigenvalues"], dtype=np.float64)))
    h = doc["head"]
    head = LinearHead(weights=np.array(h["weights"], dtype=np.float64),
                      bias=float(h["bias"]), kind=h["kind"],
                      alpha=float(h["alpha"]), classes=tuple(h["classes"]))
    scaler = Standardizer(means=np.array(doc["standardizer"]["means"], dtype=np.float64),
                          stds=np.array(doc["standardizer"]["stds"], dtype=np.float64))
    return FittedPipeline(method=doc["method"], n_channels=doc["n_channels"],
                          bands=tuple(bands), standardizer=scaler, head=head,
                          offsets=tuple(doc["offsets"]),
                          n_components=doc["n_components"],
                          head_kind=doc["head_kind"])
