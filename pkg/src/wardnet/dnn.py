"""Layered networks with nonnegative, column-stochastic weights.

Weight matrix ``weights[l]`` has shape ``(layer_sizes[l + 1], layer_sizes[l])``;
entry ``(k, j)`` is the weight on the edge from node ``j`` of the earlier layer
to node ``k`` of the later one. Every column (a node's outgoing weights) sums to
one, so each input node spawns a probability tree over the output nodes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import (
    as_float_matrix,
    check_one_hot,
    column_sum_error,
    freeze,
)

ACTIVATIONS = ("identity", "relu")
NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class LayeredDnn:
    """A layered feed-forward network ``x -> W_L ... W_1 x``.

    Construction only checks shapes. Use :func:`validate_dnn` for the
    nonnegativity / normalization / width assumptions, which some callers
    (the ReLU gap probe) deliberately bypass.
    """

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    activation: str = "identity"

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output layer")
        if any(n < 1 for n in sizes):
            raise ValueError(f"layer sizes must be positive, got {list(sizes)}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if len(self.weights) != len(sizes) - 1:
            raise ValueError(
                f"expected {len(sizes) - 1} weight matrices for layer_sizes {list(sizes)}, "
                f"got {len(self.weights)}"
            )
        ws = []
        for l, w in enumerate(self.weights):
            w = as_float_matrix(w, f"weights[{l}]")
            expected = (sizes[l + 1], sizes[l])
            if w.shape != expected:
                raise ValueError(f"weights[{l}] has shape {w.shape}, expected {expected}")
            ws.append(freeze(w))
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(ws))

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def depth(self) -> int:
        """Number of weight matrices."""
        return len(self.weights)

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return self.layer_sizes[1:-1]

    def with_activation(self, activation: str) -> "LayeredDnn":
        return LayeredDnn(self.layer_sizes, self.weights, activation)


@dataclass(frozen=True)
class Dataset:
    """Training samples: ``X`` is (M, d) nonnegative, ``Y`` is (M, C) one-hot."""

    X: np.ndarray
    Y: np.ndarray
    normalized_inputs: bool = False

    def __post_init__(self):
        X = as_float_matrix(self.X, "X")
        Y = check_one_hot(self.Y)
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} samples but Y has {Y.shape[0]}")
        if X.shape[0] < 1:
            raise ValueError("dataset is empty")
        if np.any(X < 0):
            j, i = np.argwhere(X < 0)[0]
            raise ValueError(f"input x[{j}][{i}] = {X[j, i]} is negative")
        if self.normalized_inputs:
            err = np.abs(X.sum(axis=1) - 1.0)
            if np.any(err > NORMALIZATION_TOL):
                j = int(np.argmax(err))
                raise ValueError(f"sample {j} is not normalized (sum error {err[j]:.3g})")
        object.__setattr__(self, "X", freeze(X))
        object.__setattr__(self, "Y", freeze(Y))

    @classmethod
    def from_labels(cls, X, labels: Sequence[int], n_classes: int, normalized_inputs=False):
        labels = np.asarray(labels, dtype=int)
        Y = np.zeros((len(labels), n_classes))
        Y[np.arange(len(labels)), labels] = 1.0
        return cls(X, Y, normalized_inputs)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return self.Y.shape[1]

    @property
    def true_class(self) -> np.ndarray:
        return np.argmax(self.Y, axis=1)


@dataclass(frozen=True)
class PowerLoss:
    """Output-wise loss ``sum_{k,j} A[k, j] * o_k^j ** beta``.

    ``coefficients`` is a (C, M) array. The induced edge cost of the congestion
    game is ``A * xi ** (beta - 1)``, extended by 0 at ``xi = 0``.
    """

    coefficients: np.ndarray
    beta: float = 2.0

    def __post_init__(self):
        A = as_float_matrix(self.coefficients, "coefficients")
        beta = float(self.beta)
        if not beta >= 2.0:
            raise ValueError(f"beta must be >= 2, got {beta}")
        if np.any(A < 0):
            raise ValueError("loss coefficients must be nonnegative")
        object.__setattr__(self, "coefficients", freeze(A))
        object.__setattr__(self, "beta", beta)

    @classmethod
    def classification(cls, data: Dataset, beta: float = 2.0) -> "PowerLoss":
        """Penalize every output except the true class (A=1 off-label, 0 on-label)."""
        return cls(1.0 - data.Y.T, beta)

    @property
    def strict(self) -> bool:
        """True when every coefficient is positive."""
        return bool(np.all(self.coefficients > 0))

    def _check(self, outputs: np.ndarray) -> np.ndarray:
        outputs = np.asarray(outputs, dtype=np.float64)
        if outputs.shape != self.coefficients.shape:
            raise ValueError(
                f"outputs have shape {outputs.shape}, loss expects {self.coefficients.shape}"
            )
        return outputs

    def evaluate(self, outputs) -> float:
        outputs = self._check(outputs)
        return float(np.sum(self.coefficients * outputs**self.beta))

    def output_gradient(self, outputs) -> np.ndarray:
        outputs = self._check(outputs)
        return self.beta * self.coefficients * outputs ** (self.beta - 1.0)

    def cost(self, outputs) -> np.ndarray:
        """Edge costs ``c_k^j(xi) = A xi^(beta-1)``."""
        return self.coefficients * self._check(outputs) ** (self.beta - 1.0)

    def cost_derivative(self, outputs) -> np.ndarray:
        return (self.beta - 1.0) * self.coefficients * self._check(outputs) ** (self.beta - 2.0)


class ForwardTrace(NamedTuple):
    pre_activations: tuple[np.ndarray, ...]  # z^(l), l = 1..L
    activations: tuple[np.ndarray, ...]  # g^(l), l = 0..L (g^(0) = x)
    outputs: np.ndarray


class AggregateCoefficients(NamedTuple):
    b: np.ndarray  # (C, d) path-weight sums per (output, input)
    b_tilde: np.ndarray  # (C, M) per-sample outputs


@dataclass
class CheckResult:
    passed: bool
    detail: str = ""
    index: tuple | None = None


@dataclass
class ValidationReport:
    widths: list[int]
    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> dict[str, CheckResult]:
        return {k: c for k, c in self.checks.items() if not c.passed}

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "widths": list(self.widths),
            "checks": {
                k: {"passed": c.passed, "detail": c.detail, "index": list(c.index) if c.index else None}
                for k, c in self.checks.items()
            },
        }


def validate_dnn(dnn: LayeredDnn, tol: float = NORMALIZATION_TOL) -> ValidationReport:
    """Check nonnegativity, column normalization and hidden widths.

    Never raises; each failing check records the first offending index.
    """
    report = ValidationReport(widths=list(dnn.layer_sizes))
    C = dnn.n_outputs

    neg = CheckResult(True, "all weights >= 0")
    for l, w in enumerate(dnn.weights):
        bad = np.argwhere(w < 0)
        if len(bad):
            r, c = (int(v) for v in bad[0])
            neg = CheckResult(False, f"weights[{l}][{r}][{c}] = {w[r, c]:.6g} < 0", (l, r, c))
            break
    report.checks["nonnegative"] = neg

    norm = CheckResult(True, f"every column sums to 1 within {tol:g}")
    for l, w in enumerate(dnn.weights):
        err = np.abs(w.sum(axis=0) - 1.0)
        if np.any(err > tol):
            c = int(np.flatnonzero(err > tol)[0])
            norm = CheckResult(
                False, f"weights[{l}] column {c} sums to {w[:, c].sum():.17g}", (l, c)
            )
            break
    report.checks["column_stochastic"] = norm

    width = CheckResult(True, f"hidden widths {list(dnn.hidden_sizes)} >= C={C}")
    for pos, n in enumerate(dnn.hidden_sizes, start=1):
        if n < C:
            width = CheckResult(False, f"hidden layer {pos} has width {n} < C={C}", (pos,))
            break
    report.checks["hidden_width"] = width

    # A list of consecutive matrices is a layered DAG by construction: edges only
    # go from layer l to layer l+1, inputs have no predecessors, outputs no successors.
    report.checks["layered_dag"] = CheckResult(True, f"{dnn.depth} layers of edges")
    return report


def require_valid(dnn: LayeredDnn) -> None:
    report = validate_dnn(dnn)
    if not report.passed:
        name, res = next(iter(report.failures().items()))
        assumption = {
            "nonnegative": "the nonnegative-weights assumption",
            "column_stochastic": "the column-normalization assumption",
            "hidden_width": "the hidden-width assumption (every hidden width >= C)",
        }.get(name, name)
        raise ValueError(f"network violates {assumption}: {res.detail}")


def forward(dnn: LayeredDnn, x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dnn.n_inputs,):
        raise ValueError(f"input has shape {x.shape}, network expects ({dnn.n_inputs},)")
    g = x
    pre, acts = [], [x]
    for w in dnn.weights:
        z = w @ g
        g = z if dnn.activation == "identity" else np.maximum(z, 0.0)
        pre.append(z)
        acts.append(g)
    return ForwardTrace(tuple(pre), tuple(acts), g)


def weight_product(weights: Sequence[np.ndarray]) -> np.ndarray:
    """Ordered product ``W_L @ ... @ W_1``."""
    return reduce(lambda acc, w: w @ acc, weights[1:], np.asarray(weights[0]))


def aggregates(dnn: LayeredDnn, data: Dataset) -> AggregateCoefficients:
    if dnn.activation != "identity":
        raise ValueError("aggregate coefficients are defined for identity activation only")
    if data.n_features != dnn.n_inputs:
        raise ValueError(f"data has {data.n_features} features, network expects {dnn.n_inputs}")
    b = weight_product(dnn.weights)
    return AggregateCoefficients(b, b @ data.X.T)


def enumerate_paths(dnn: LayeredDnn):
    """Yield ``(input, output, nodes, weight)`` for every input-to-output path.

    ``nodes`` lists the node index in each layer. Exponential in depth; meant for
    desk-scale networks and as an oracle for the matrix formulation.
    """
    ranges = [range(n) for n in dnn.layer_sizes]
    for nodes in itertools.product(*ranges):
        wp = 1.0
        for l, w in enumerate(dnn.weights):
            wp *= w[nodes[l + 1], nodes[l]]
        yield nodes[0], nodes[-1], nodes, wp


def network_loss(dnn: LayeredDnn, data: Dataset, loss: PowerLoss) -> float:
    return loss.evaluate(aggregates(dnn, data).b_tilde)


def _as_b(b) -> np.ndarray:
    if isinstance(b, AggregateCoefficients):
        return b.b
    return np.asarray(b, dtype=np.float64)


def loss_gradient_b(b, data: Dataset, loss) -> np.ndarray:
    """Gradient of the loss with respect to the aggregate matrix ``b`` (C, d).

    Entry ``(k, i)`` is ``sum_j dloss/do_k^j * x_i^j``; for a power loss this is
    ``sum_j beta A_k^j (b~_k^j)^(beta-1) x_i^j``.
    """
    b = _as_b(b)
    if b.shape[1] != data.n_features:
        raise ValueError(f"b has {b.shape[1]} columns, data has {data.n_features} features")
    return loss.output_gradient(b @ data.X.T) @ data.X


def gradient_terms(b, data: Dataset, loss: PowerLoss) -> tuple[np.ndarray, np.ndarray]:
    """Split the gradient into ``sum_j x c'(b~) b~`` and ``sum_j x c(b~)``."""
    b = _as_b(b)
    bt = b @ data.X.T
    return (loss.cost_derivative(bt) * bt) @ data.X, loss.cost(bt) @ data.X
