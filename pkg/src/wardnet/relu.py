"""Path-failure model of a ReLU network.

Each input-to-output path is kept independently with probability ``rho`` for
every sample, so expected outputs are ``rho`` times the linear outputs and a
power loss on expected outputs scales by ``rho**beta``. The module also
carries the structural descriptor of the congestion game with failures and a
probe comparing the model with an actual ReLU forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import InvariantViolation, freeze
from .dnn import Dataset, LayeredDnn, PowerLoss, enumerate_paths, forward, validate_dnn, weight_product
from .game import CongestionGame
from .reduction import build_game

__all__ = [
    "ReluPathModel",
    "OutputSample",
    "FailureGameDescriptor",
    "ReluGapReport",
    "ScalingReport",
    "expected_outputs",
    "sample_outputs",
    "relu_model_loss",
    "scaled_loss",
    "scaling_report",
    "build_failure_game",
    "real_relu_gap",
]

SCALING_TOL = 1e-12


@dataclass(frozen=True)
class ReluPathModel:
    base: LayeredDnn
    rho: float

    def __post_init__(self):
        rho = float(self.rho)
        if not 0.0 <= rho <= 1.0 or np.isnan(rho):
            raise ValueError(f"success probability must lie in [0, 1], got {self.rho}")
        object.__setattr__(self, "rho", rho)

    def linear_outputs(self, data: Dataset) -> np.ndarray:
        if data.n_features != self.base.n_inputs:
            raise ValueError(f"data has {data.n_features} features, network expects {self.base.n_inputs}")
        return weight_product(self.base.weights) @ data.X.T


def expected_outputs(model: ReluPathModel, data: Dataset) -> np.ndarray:
    """Expected outputs ``rho * b~`` (C, M)."""
    return model.rho * model.linear_outputs(data)


@dataclass(frozen=True)
class OutputSample:
    mean: np.ndarray  # (C, M)
    stderr: np.ndarray  # (C, M)
    n_samples: int


def _path_tables(dnn: LayeredDnn):
    inputs, outputs, weights = [], [], []
    for i, k, _, w in enumerate_paths(dnn):
        inputs.append(i)
        outputs.append(k)
        weights.append(w)
    return np.array(inputs), np.array(outputs), np.array(weights)


def sample_outputs(model: ReluPathModel, data: Dataset, n_samples: int, seed=None,
                   chunk: int = 4096) -> OutputSample:
    """Monte Carlo mean and standard error of the outputs under the path-failure model.

    Every path ``p`` and sample ``j`` gets its own Bernoulli(rho) keep flag per
    draw; the output is ``o_k^j = sum_{p ends at k} keep * x_{i(p)}^j * w_p``.
    Moments are accumulated relative to the first draw, so a constant output
    has a standard error of exactly zero.
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    rng = np.random.default_rng(seed)
    src, dst, w = _path_tables(model.base)
    C = model.base.n_outputs
    contrib = data.X[:, src].T * w[:, None]  # (P, M)
    route = np.zeros((C, len(w)))
    route[dst, np.arange(len(w))] = 1.0

    shift = None
    s1 = s2 = 0.0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        keep = rng.random((n, *contrib.shape)) < model.rho
        out = np.einsum("kp,npm->nkm", route, keep * contrib)
        if shift is None:
            shift = out[0].copy()
        dev = out - shift
        s1 = s1 + dev.sum(axis=0)
        s2 = s2 + (dev**2).sum(axis=0)
        done += n
    mean_dev = s1 / n_samples
    if n_samples > 1:
        var = np.maximum(s2 - n_samples * mean_dev**2, 0.0) / (n_samples - 1)
        stderr = np.sqrt(var / n_samples)
    else:
        stderr = np.zeros_like(shift)
    return OutputSample(freeze(shift + mean_dev), freeze(stderr), n_samples)


def scaled_loss(model: ReluPathModel, loss: PowerLoss) -> PowerLoss:
    """Power loss on linear outputs equal to ``loss`` on the model's expected outputs."""
    return PowerLoss(loss.coefficients * model.rho**loss.beta, loss.beta)


def relu_model_loss(model: ReluPathModel, data: Dataset, loss: PowerLoss) -> float:
    """Loss of the expected outputs; checks it equals ``rho**beta`` times the linear loss."""
    linear = loss.evaluate(model.linear_outputs(data))
    value = loss.evaluate(expected_outputs(model, data))
    expected = model.rho**loss.beta * linear
    if abs(value - expected) > SCALING_TOL * (1.0 + abs(linear)):
        raise InvariantViolation(
            f"model loss {value!r} differs from rho^beta * linear loss {expected!r} "
            f"beyond {SCALING_TOL:g}"
        )
    return value


@dataclass(frozen=True)
class ScalingReport:
    rho: float
    beta: float
    linear_loss: float
    model_loss: float

    @property
    def expected_ratio(self) -> float:
        return self.rho**self.beta

    @property
    def ratio(self) -> float:
        if self.linear_loss == 0.0:
            return float("nan")
        return self.model_loss / self.linear_loss

    @property
    def ok(self) -> bool:
        if self.linear_loss == 0.0:
            return self.model_loss == 0.0
        return abs(self.ratio - self.expected_ratio) <= SCALING_TOL

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "beta": self.beta,
            "linear_loss": self.linear_loss,
            "model_loss": self.model_loss,
            "ratio": self.ratio,
            "expected_ratio": self.expected_ratio,
            "ok": self.ok,
        }


def scaling_report(model: ReluPathModel, data: Dataset, loss: PowerLoss) -> ScalingReport:
    linear = loss.evaluate(model.linear_outputs(data))
    return ScalingReport(model.rho, loss.beta, linear, relu_model_loss(model, data, loss))


@dataclass(frozen=True)
class FailureGameDescriptor:
    """Congestion game whose J-edges may fail, with a per-population penalty.

    The penalty is stored as given; nothing downstream interprets it. Flows
    on the underlying game are raw (not failure-weighted) congestions.
    """

    game: CongestionGame
    failable_edges: tuple[int, ...]
    penalties: np.ndarray

    def __post_init__(self):
        kinds = {self.game.resources[e].kind for e in self.failable_edges}
        if kinds - {"J"}:
            raise ValueError("only J-edges may fail")

    def to_dict(self) -> dict:
        return {
            "failable_edges": list(self.failable_edges),
            "penalties": self.penalties.tolist(),
            "n_resources": len(self.game.resources),
        }


def build_failure_game(dnn: LayeredDnn, data: Dataset, loss: PowerLoss,
                       penalties=None) -> FailureGameDescriptor:
    base = dnn if dnn.activation == "identity" else dnn.with_activation("identity")
    game = build_game(base, data, loss)
    if penalties is None:
        penalties = np.zeros(dnn.n_inputs)
    penalties = np.asarray(penalties, dtype=np.float64)
    if penalties.shape != (dnn.n_inputs,):
        raise ValueError(f"need one penalty per input ({dnn.n_inputs}), got shape {penalties.shape}")
    if not np.all(np.isfinite(penalties)) or np.any(penalties < 0):
        raise ValueError("penalties must be finite and nonnegative")
    failable = tuple(e for e, r in enumerate(game.resources) if r.kind == "J")
    return FailureGameDescriptor(game, failable, freeze(penalties))


@dataclass(frozen=True)
class ReluGapReport:
    actual: np.ndarray  # (C, M) real ReLU outputs
    model_expected: np.ndarray  # (C, M) rho * b~
    model_sampled: OutputSample
    gap: np.ndarray  # actual - model_expected
    rho: float
    within_assumptions: bool

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "within_assumptions": self.within_assumptions,
            "actual": self.actual.tolist(),
            "model_expected": self.model_expected.tolist(),
            "model_sampled_mean": self.model_sampled.mean.tolist(),
            "model_sampled_stderr": self.model_sampled.stderr.tolist(),
            "gap": self.gap.tolist(),
            "max_abs_gap": float(np.max(np.abs(self.gap))),
        }


def real_relu_gap(dnn: LayeredDnn, data: Dataset, rho: float, n_samples: int = 10_000,
                  seed=None) -> ReluGapReport:
    """Compare an actual ReLU forward pass with the independent path-failure model.

    Diagnostic only. Networks with signed weights are accepted and flagged as
    outside the model's assumptions.
    """
    if dnn.activation != "relu":
        raise ValueError("real_relu_gap expects a relu-activation network")
    model = ReluPathModel(dnn, rho)
    actual = np.stack([forward(dnn, x).outputs for x in data.X], axis=1)
    expected = expected_outputs(model, data)
    sampled = sample_outputs(model, data, n_samples, seed)
    within = validate_dnn(dnn).passed and bool(np.all(data.X >= 0))
    return ReluGapReport(
        freeze(actual), freeze(expected), sampled, freeze(actual - expected), model.rho, within,
    )
