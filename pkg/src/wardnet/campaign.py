"""Seeded verification campaigns: instance generation, per-seed runs, persisted records.

A campaign document looks like::

    {
      "network": {"layer_sizes": [2, 3, 3], "seed": 0},      # or {"file": "problem.json"}
      "data": {"n_samples": 1, "seed": 1, "normalized": true},  # ignored with a network file
      "loss": {"beta": 2, "coefficients": "classification"},   # or "random", or a (C, M) matrix
      "train": {"mode": "weight", "restarts": 1, "max_iter": 100000, "tol": 1e-9},
      "seeds": [0, 1, 2, 3, 4]                                  # or an integer count
    }

Every seed trains the same instance from its own starting points and checks
the trained flow for equilibrium against the game's optimum.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Sequence

import numpy as np

from ._validation import InvariantViolation, rel_close
from .dnn import Dataset, LayeredDnn, PowerLoss
from .io import DocumentError, digest, problem_from_dict, read_json, write_json
from .optim import TrainConfig, verify_minima_are_equilibria

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "SeedResult",
    "generate_instance",
    "random_loss",
    "run_campaign",
    "write_record",
]

SPREAD_TOL = 1e-4
VALUE_TOL = 1e-6
TRAIN_KEYS = {"mode", "step0", "shrink", "armijo", "max_iter", "tol", "restarts"}


def _toolkit_version() -> str:
    try:
        return version("wardnet")
    except PackageNotFoundError:
        return "unknown"


def generate_instance(layer_sizes: Sequence[int], seeds: tuple[int, int], n_samples: int = 1,
                      normalized: bool = True) -> tuple[LayeredDnn, Dataset]:
    """Random network and dataset fully determined by ``(network_seed, data_seed)``.

    Weights are uniform draws normalized per column; inputs are uniform draws,
    normalized per sample when ``normalized``; labels are uniform over classes.
    """
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or any(n < 1 for n in sizes):
        raise ValueError(f"invalid layer sizes {list(sizes)}")
    C = sizes[-1]
    narrow = [n for n in sizes[1:-1] if n < C]
    if narrow:
        raise ValueError(f"hidden widths {list(sizes[1:-1])} must all be >= the number of classes {C}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    net_rng = np.random.default_rng(seeds[0])
    weights = []
    for l in range(len(sizes) - 1):
        w = net_rng.uniform(0.0, 1.0, (sizes[l + 1], sizes[l])) + 1e-3
        weights.append(w / w.sum(axis=0))
    data_rng = np.random.default_rng(seeds[1])
    X = data_rng.uniform(0.0, 1.0, (n_samples, sizes[0])) + 1e-3
    if normalized:
        X = X / X.sum(axis=1, keepdims=True)
    labels = data_rng.integers(0, C, n_samples)
    return LayeredDnn(sizes, tuple(weights)), Dataset.from_labels(X, labels, C, normalized)


def random_loss(data: Dataset, beta: float, seed: int) -> PowerLoss:
    """Strictly positive coefficients drawn from U(0.5, 2)."""
    rng = np.random.default_rng(seed)
    return PowerLoss(rng.uniform(0.5, 2.0, (data.n_classes, data.n_samples)), beta)


@dataclass
class ExperimentConfig:
    dnn: LayeredDnn
    data: Dataset
    loss: PowerLoss
    train: TrainConfig
    seeds: list[int]
    document: dict  # normalized config, the source of the digest
    out: Path | None = None

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None, out=None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise DocumentError("campaign document must be a JSON object")
        base_dir = Path(base_dir or ".")
        net = doc.get("network")
        if not isinstance(net, dict):
            raise DocumentError("field 'network': missing or not an object")
        data_doc = doc.get("data", {})
        if not isinstance(data_doc, dict):
            raise DocumentError("field 'data': not an object")
        file_loss = None
        if "file" in net:
            path = base_dir / net["file"]
            try:
                dnn, data, file_loss = problem_from_dict(read_json(path))
            except DocumentError as exc:
                raise DocumentError(f"field 'network.file' ({path}): {exc}") from exc
        else:
            sizes = net.get("layer_sizes")
            if not isinstance(sizes, list):
                raise DocumentError("field 'network.layer_sizes': missing or not a list")
            try:
                dnn, data = generate_instance(
                    sizes,
                    (int(net.get("seed", 0)), int(data_doc.get("seed", 0))),
                    int(data_doc.get("n_samples", 1)),
                    bool(data_doc.get("normalized", True)),
                )
            except (TypeError, ValueError) as exc:
                raise DocumentError(f"field 'network': {exc}") from exc

        loss_doc = doc.get("loss")
        if loss_doc is None and file_loss is not None:
            loss = file_loss
        else:
            if not isinstance(loss_doc, dict):
                raise DocumentError("field 'loss': missing or not an object")
            beta = loss_doc.get("beta", 2.0)
            coeffs = loss_doc.get("coefficients", "classification")
            try:
                if coeffs == "classification":
                    loss = PowerLoss.classification(data, beta)
                elif coeffs == "random":
                    loss = random_loss(data, beta, int(loss_doc.get("seed", 0)))
                else:
                    loss = PowerLoss(np.array(coeffs, dtype=np.float64), beta)
            except (TypeError, ValueError) as exc:
                raise DocumentError(f"field 'loss': {exc}") from exc

        train_doc = doc.get("train", {})
        if not isinstance(train_doc, dict):
            raise DocumentError("field 'train': not an object")
        unknown = set(train_doc) - TRAIN_KEYS
        if unknown:
            raise DocumentError(f"field 'train': unknown keys {sorted(unknown)}")
        try:
            train = TrainConfig(**train_doc)
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"field 'train': {exc}") from exc

        seeds = doc.get("seeds", 1)
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            if seeds < 1:
                raise DocumentError("field 'seeds': campaign size must be >= 1")
            seeds = list(range(seeds))
        elif isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds):
            seeds = list(seeds)
        else:
            raise DocumentError("field 'seeds': expected a positive count or a non-empty list of integers")
        return cls(dnn, data, loss, train, seeds, doc, Path(out) if out else None)


@dataclass
class SeedResult:
    seed: int
    passed: bool
    converged: bool | None = None
    final_loss: float | None = None
    final_losses: list[float] = field(default_factory=list)
    vi_residual: float | None = None
    equilibrium: bool | None = None
    definition_check: bool | None = None
    so: float | None = None
    we_value: float | None = None
    poa: float | None = None
    failures: list[dict] = field(default_factory=list)


@dataclass
class RunRecord:
    config_digest: str
    toolkit_version: str
    results: list[SeedResult]
    wall_clock: float = 0.0

    @property
    def n_passed(self) -> int:
        return sum(r.passed for r in self.results)

    @property
    def passed(self) -> bool:
        return self.n_passed == len(self.results)

    @property
    def loss_spread(self) -> float:
        """Largest pairwise gap of final losses over ``1 + min`` (absolute near zero)."""
        losses = [r.final_loss for r in self.results if r.final_loss is not None]
        if not losses:
            return float("nan")
        return (max(losses) - min(losses)) / (1.0 + abs(min(losses)))

    def numeric_dict(self) -> dict:
        """Everything except wall-clock time; identical across reruns of a config."""
        return {
            "config_digest": self.config_digest,
            "toolkit_version": self.toolkit_version,
            "n_seeds": len(self.results),
            "n_passed": self.n_passed,
            "passed": self.passed,
            "loss_spread": self.loss_spread,
            "results": [asdict(r) for r in self.results],
        }

    def to_dict(self) -> dict:
        return {**self.numeric_dict(), "wall_clock": self.wall_clock}


def _failure(check: str, detail: str, tolerance: float | None = None, operation="verify") -> dict:
    return {"module": "optim", "operation": operation, "check": check,
            "tolerance": tolerance, "detail": detail}


def _run_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    train_cfg = TrainConfig(**{**asdict(cfg.train), "seed": seed})
    try:
        rep = verify_minima_are_equilibria(cfg.dnn, cfg.data, cfg.loss, train_cfg)
    except (InvariantViolation, FloatingPointError, ValueError) as exc:
        return SeedResult(seed, False, failures=[_failure("exception", f"{type(exc).__name__}: {exc}")])
    checks = rep.checks
    failures = []
    for c in checks:
        if not c.converged:
            failures.append(_failure("converged", f"restart {c.seed}: projected-gradient norm "
                                     f"{c.grad_norm:.3g}", train_cfg.tol, "train"))
        if not c.equilibrium_vi:
            failures.append(_failure("wardrop_vi", f"restart {c.seed}: residual {c.vi_residual:.3g}", 1e-8))
        if not c.equilibrium_definition:
            failures.append(_failure("wardrop_definition", f"restart {c.seed}", 1e-8))
        if not (rel_close(c.loss, rep.so_value, VALUE_TOL) and rel_close(c.loss, rep.we_value, VALUE_TOL)):
            failures.append(_failure("value", f"restart {c.seed}: loss {c.loss!r}, SO {rep.so_value!r}, "
                                     f"WE {rep.we_value!r}", VALUE_TOL))
    if not (abs(rep.poa - 1.0) <= VALUE_TOL):
        failures.append(_failure("poa", f"PoA {rep.poa!r}", VALUE_TOL, "price_of_anarchy"))
    losses = [c.loss for c in checks]
    return SeedResult(
        seed=seed,
        passed=not failures,
        converged=all(c.converged for c in checks),
        final_loss=min(losses),
        final_losses=losses,
        vi_residual=min(c.vi_residual for c in checks),
        equilibrium=all(c.equilibrium_vi for c in checks),
        definition_check=all(c.equilibrium_definition for c in checks),
        so=rep.so_value,
        we_value=rep.we_value,
        poa=rep.poa,
        failures=failures,
    )


def run_campaign(cfg: ExperimentConfig, workers: int = 1) -> RunRecord:
    """Run every seed; a seed's failures are recorded and never stop the campaign."""
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        results = [_run_seed(cfg, s) for s in cfg.seeds]
    record = RunRecord(digest(cfg.document), _toolkit_version(), results)
    record.wall_clock = time.perf_counter() - start
    if cfg.out is not None:
        write_record(record, cfg.out)
    return record


SUMMARY_FIELDS = ["seed", "passed", "converged", "final_loss", "vi_residual", "equilibrium",
                  "definition_check", "so", "we_value", "poa", "n_failures"]


def write_record(record: RunRecord, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "run_record.json", record.to_dict())
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for r in record.results:
            w.writerow([r.seed, r.passed, r.converged, _num(r.final_loss), _num(r.vi_residual),
                        r.equilibrium, r.definition_check, _num(r.so), _num(r.we_value),
                        _num(r.poa), len(r.failures)])
    with open(out / "losses.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "restart", "final_loss"])
        for r in record.results:
            for i, v in enumerate(r.final_losses):
                w.writerow([r.seed, i, repr(v)])


def _num(v) -> str:
    return "" if v is None else repr(float(v))
