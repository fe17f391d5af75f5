"""Versioned JSON model files.

Layout::

    {"header": {"format_version": 1, "kind": "qcfs" | "snn", "L": 4,
                "seed": 0, "linear_head": true},
     "layers": [{"rows": r, "cols": c, "weights": [... row-major ...],
                 "lambda": 1.0,
                 "theta": 1.0, "v0": [...]}]}      # theta/v0 only for kind=snn

Floats are written with ``repr`` precision, so a load of a save is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .convert import SnnNetwork
from .errors import ModelFormatError
from .ifcore import LayerParams
from .qcfs import QcfsLayer, QcfsNetwork

FORMAT_VERSION = 1


def _header(kind, L, seed, linear_head):
    return {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "L": int(L),
        "seed": seed,
        "linear_head": bool(linear_head),
    }


def _weights_entry(w: np.ndarray) -> dict:
    return {"rows": int(w.shape[0]), "cols": int(w.shape[1]), "weights": [float(v) for v in w.ravel()]}


def qcfs_to_dict(net: QcfsNetwork) -> dict:
    layers = []
    for layer in net.layers:
        entry = _weights_entry(layer.weights)
        entry["lambda"] = layer.lam
        layers.append(entry)
    return {"header": _header("qcfs", net.L, net.seed, net.linear_head), "layers": layers}


def snn_to_dict(snn: SnnNetwork, lams=None) -> dict:
    layers = []
    for i, layer in enumerate(snn.layers):
        entry = _weights_entry(layer.weights)
        entry["lambda"] = float(lams[i]) if lams is not None else layer.theta
        entry["theta"] = layer.theta
        entry["v0"] = [float(v) for v in layer.v0]
        layers.append(entry)
    return {"header": _header("snn", snn.L, snn.seed, snn.linear_head), "layers": layers}


def _read(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or "header" not in doc or "layers" not in doc:
        raise ModelFormatError(f"{path}: missing header or layers")
    version = doc["header"].get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format_version {version!r}")
    return doc


def _weights(entry, path):
    try:
        rows, cols = int(entry["rows"]), int(entry["cols"])
        w = np.array(entry["weights"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: bad layer entry ({exc})") from None
    if w.size != rows * cols:
        raise ModelFormatError(f"{path}: {w.size} weights for a {rows}x{cols} layer")
    return w.reshape(rows, cols)


def qcfs_from_dict(doc: dict, path="<dict>") -> QcfsNetwork:
    head = doc["header"]
    if head.get("kind", "qcfs") != "qcfs":
        raise ModelFormatError(f"{path}: expected a qcfs model, got {head.get('kind')!r}")
    try:
        layers = tuple(
            QcfsLayer(_weights(e, path), e["lambda"], head["L"]) for e in doc["layers"]
        )
        return QcfsNetwork(layers, linear_head=head.get("linear_head", True), seed=head.get("seed"))
    except ModelFormatError:
        raise
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


def snn_from_dict(doc: dict, path="<dict>") -> SnnNetwork:
    head = doc["header"]
    if head.get("kind") != "snn":
        raise ModelFormatError(f"{path}: expected an snn model, got {head.get('kind')!r}")
    try:
        layers = tuple(
            LayerParams(_weights(e, path), e["theta"], np.array(e["v0"], dtype=np.float64), i)
            for i, e in enumerate(doc["layers"])
        )
        return SnnNetwork(layers, L=int(head["L"]), linear_head=head.get("linear_head", True), seed=head.get("seed"))
    except ModelFormatError:
        raise
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


def _write(doc, path):
    Path(path).write_text(json.dumps(doc, allow_nan=False, indent=1))


def save_qcfs(net: QcfsNetwork, path) -> None:
    _write(qcfs_to_dict(net), path)


def load_qcfs(path) -> QcfsNetwork:
    return qcfs_from_dict(_read(path), path)


def save_snn(snn: SnnNetwork, path, lams=None) -> None:
    _write(snn_to_dict(snn, lams), path)


def load_snn(path) -> SnnNetwork:
    return snn_from_dict(_read(path), path)


def load_any(path):
    doc = _read(path)
    if doc["header"].get("kind") == "snn":
        return snn_from_dict(doc, path)
    return qcfs_from_dict(doc, path)
