"""JSON documents for networks, datasets, losses and games.

Floats are written with Python's shortest round-trip repr, so a value that
parses from a decimal with up to 17 significant digits survives
load -> dump -> load bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .dnn import Dataset, LayeredDnn, PowerLoss
from .game import CongestionGame, Population, Resource, Strategy

FORMAT_VERSION = 1


class DocumentError(ValueError):
    """A document is malformed; the message names the offending field."""


def _field(doc: dict, name: str, where: str = "document"):
    if name not in doc:
        raise DocumentError(f"{where}: missing field '{name}'")
    return doc[name]


def dnn_to_dict(dnn: LayeredDnn) -> dict:
    return {
        "layer_sizes": list(dnn.layer_sizes),
        "weights": [w.tolist() for w in dnn.weights],
        "activation": dnn.activation,
    }


def dnn_from_dict(doc: dict) -> LayeredDnn:
    sizes = _field(doc, "layer_sizes")
    weights = _field(doc, "weights")
    try:
        return LayeredDnn(
            tuple(sizes),
            tuple(np.array(w, dtype=np.float64) for w in weights),
            doc.get("activation", "identity"),
        )
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"field 'weights'/'layer_sizes': {exc}") from exc


def dataset_to_dict(data: Dataset) -> dict:
    return {
        "samples": [{"x": x.tolist(), "y": y.tolist()} for x, y in zip(data.X, data.Y)],
        "normalized_inputs": data.normalized_inputs,
    }


def dataset_from_dict(doc: dict) -> Dataset:
    samples = _field(doc, "samples")
    if not samples:
        raise DocumentError("field 'samples': empty")
    try:
        X = np.array([_field(s, "x", f"samples[{j}]") for j, s in enumerate(samples)], dtype=float)
        Y = np.array([_field(s, "y", f"samples[{j}]") for j, s in enumerate(samples)], dtype=float)
        return Dataset(X, Y, bool(doc.get("normalized_inputs", False)))
    except DocumentError:
        raise
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"field 'samples': {exc}") from exc


def loss_to_dict(loss: PowerLoss | None, classification: bool = False) -> dict:
    if classification:
        return {"beta": loss.beta if loss else 2.0, "coefficients": "classification"}
    return {"beta": loss.beta, "coefficients": loss.coefficients.tolist()}


def loss_from_dict(doc: dict, data: Dataset) -> PowerLoss:
    beta = _field(doc, "beta", "loss")
    coeffs = _field(doc, "coefficients", "loss")
    try:
        if coeffs == "classification":
            return PowerLoss.classification(data, beta)
        return PowerLoss(np.array(coeffs, dtype=np.float64), beta)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"field 'loss': {exc}") from exc


def problem_to_dict(dnn: LayeredDnn, data: Dataset, loss: PowerLoss | None = None,
                    classification: bool = False) -> dict:
    doc = {"version": FORMAT_VERSION, **dnn_to_dict(dnn), **dataset_to_dict(data)}
    if loss is not None or classification:
        doc["loss"] = loss_to_dict(loss, classification)
    return doc


def problem_from_dict(doc: dict) -> tuple[LayeredDnn, Dataset, PowerLoss | None]:
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object")
    version = doc.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise DocumentError(f"field 'version': unsupported version {version}")
    dnn = dnn_from_dict(doc)
    data = dataset_from_dict(doc)
    loss = loss_from_dict(doc["loss"], data) if "loss" in doc else None
    return dnn, data, loss


def game_to_dict(game: CongestionGame) -> dict:
    return {
        "version": FORMAT_VERSION,
        "resources": [
            {
                "id": e,
                "set": r.kind,
                "tail": r.tail,
                "head": r.head,
                **({"k": r.output, "j": r.sample} if r.kind == "T" else {}),
            }
            for e, r in enumerate(game.resources)
        ],
        "populations": [
            {
                "index": i,
                "source": p.source,
                "size": p.size,
                "classes": {
                    str(k): [list(s.edges) for s in p.strategies if s.output == k]
                    for k in range(game.n_classes)
                },
            }
            for i, p in enumerate(game.populations)
        ],
        "inputs": game.X.tolist(),
        "loss": {"beta": game.beta, "coefficients": game.coefficients.tolist()},
    }


def game_from_dict(doc: dict) -> CongestionGame:
    resources = tuple(
        Resource(r["set"], r["tail"], r["head"], r.get("k"), r.get("j"))
        for r in _field(doc, "resources")
    )
    pops = []
    for p in _field(doc, "populations"):
        strategies = tuple(
            Strategy(int(k), tuple(edges))
            for k, paths in p["classes"].items()
            for edges in paths
        )
        pops.append(Population(p["size"], p["source"], strategies))
    loss = _field(doc, "loss")
    return CongestionGame(
        resources, tuple(pops), np.array(_field(doc, "inputs")),
        np.array(loss["coefficients"]), float(loss["beta"]),
    )


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True)


def digest(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
