"""Squared loss against one-hot labels, and its relation to the classification power loss.

With normalized inputs and column-stochastic weights, each sample's outputs
sum to 1, so the true-class output equals one minus the others. Expanding the
squared loss then gives ``squared = classification + const`` with
``const = sum_j (sum_{k != e_j} o_k^j)^2``; with two classes the constant equals
the classification loss itself and the squared loss is exactly twice it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import InvariantViolation
from .dnn import Dataset, LayeredDnn, PowerLoss, weight_product
from .optim import TrainConfig, train

__all__ = [
    "SquaredLoss",
    "Decomposition",
    "BinaryCheckReport",
    "squared_loss",
    "loss_decomposition",
    "decompose",
    "binary_squared_loss_check",
]

SUM_TOL = 1e-10
IDENTITY_TOL = 1e-12
RELATION_TOL = 1e-8


def _require_normalized(data: Dataset) -> None:
    if not data.normalized_inputs:
        raise ValueError("squared-loss identities need a dataset flagged normalized_inputs=True")
    err = float(np.max(np.abs(data.X.sum(axis=1) - 1.0)))
    if err > SUM_TOL:
        raise ValueError(f"inputs are not normalized: max |sum_i x_i - 1| = {err:.3g}")


@dataclass(frozen=True)
class SquaredLoss:
    """``sum_{k,j} (o_k^j - y_k^j)^2``; same duck type as :class:`PowerLoss` for training."""

    targets: np.ndarray  # (C, M), the transposed one-hot labels

    @classmethod
    def for_data(cls, data: Dataset) -> "SquaredLoss":
        _require_normalized(data)
        return cls(data.Y.T.copy())

    def evaluate(self, outputs) -> float:
        return float(np.sum((np.asarray(outputs) - self.targets) ** 2))

    def output_gradient(self, outputs) -> np.ndarray:
        return 2.0 * (np.asarray(outputs) - self.targets)


@dataclass(frozen=True)
class Decomposition:
    classification_loss: float
    const: float
    squared_loss: float

    @property
    def ratio(self) -> float:
        if self.classification_loss == 0.0:
            return float("nan")
        return self.squared_loss / self.classification_loss

    def to_dict(self, n_classes: int | None = None) -> dict:
        doc = {
            "classification_loss": self.classification_loss,
            "const": self.const,
            "squared_loss": self.squared_loss,
            "ratio": self.ratio,
        }
        if n_classes is not None:
            doc["c_equals_2"] = n_classes == 2
        return doc


def _outputs(b, data: Dataset) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (data.n_classes, data.n_features):
        raise ValueError(f"b has shape {b.shape}, expected {(data.n_classes, data.n_features)}")
    return b @ data.X.T


def decompose(b, data: Dataset) -> Decomposition:
    """Split the squared loss of the aggregate matrix ``b`` into classification loss + const.

    Raises :class:`InvariantViolation` if a sample's true-class output differs
    from one minus its other outputs by more than 1e-10 (inputs or weights not
    normalized), or if the three terms do not add up within 1e-12.
    """
    _require_normalized(data)
    out = _outputs(b, data)
    wrong = 1.0 - data.Y.T  # 1 on classes other than the label
    others = np.sum(wrong * out, axis=0)  # (M,)
    true_out = np.sum(data.Y.T * out, axis=0)
    gap = float(np.max(np.abs(true_out - (1.0 - others))))
    if gap > SUM_TOL:
        raise InvariantViolation(
            f"true-class output differs from 1 - sum of other outputs by {gap:.3g}; "
            "inputs or weights are not normalized"
        )
    cls_loss = PowerLoss(wrong, 2.0).evaluate(out)
    const = float(np.sum(others**2))
    sq = SquaredLoss(data.Y.T).evaluate(out)
    resid = abs(sq - cls_loss - const)
    if resid > IDENTITY_TOL * max(1.0, sq):
        raise InvariantViolation(f"squared loss differs from classification loss + const by {resid:.3g}")
    return Decomposition(cls_loss, const, sq)


def _network_b(dnn: LayeredDnn, data: Dataset) -> np.ndarray:
    if dnn.activation != "identity":
        raise ValueError("squared-loss identities are stated for identity-activation networks")
    if dnn.n_inputs != data.n_features or dnn.n_outputs != data.n_classes:
        raise ValueError("network and data dimensions differ")
    return weight_product(dnn.weights)


def squared_loss(dnn: LayeredDnn, data: Dataset) -> float:
    _require_normalized(data)
    return SquaredLoss(data.Y.T).evaluate(_network_b(dnn, data) @ data.X.T)


def loss_decomposition(dnn: LayeredDnn, data: Dataset, beta: float = 2.0) -> Decomposition:
    if beta != 2.0:
        raise ValueError("the decomposition holds for beta = 2 only")
    return decompose(_network_b(dnn, data), data)


@dataclass
class BinaryCheckReport:
    iterates_checked: int
    max_identity_error: float
    classification_loss: float
    squared_loss: float
    relation_error: float  # |squared - 2 * classification| between the two trained values

    @property
    def ok(self) -> bool:
        return self.max_identity_error <= IDENTITY_TOL and self.relation_error <= RELATION_TOL

    def to_dict(self) -> dict:
        return {
            "iterates_checked": self.iterates_checked,
            "max_identity_error": self.max_identity_error,
            "classification_loss": self.classification_loss,
            "squared_loss": self.squared_loss,
            "relation_error": self.relation_error,
            "ok": self.ok,
        }


def binary_squared_loss_check(dnn: LayeredDnn, data: Dataset,
                              cfg: TrainConfig | None = None) -> BinaryCheckReport:
    """Check ``squared = 2 * classification`` along training, for two classes.

    Trains once under each loss from the same seeds. At every iterate of both
    runs the pointwise identity is checked (absolute 1e-12, scaled by the loss
    when it exceeds 1); the two trained values must then satisfy the factor-2
    relation within 1e-8. Raises :class:`InvariantViolation` when an iterate
    breaks the identity.
    """
    if data.n_classes != 2:
        raise ValueError(f"the factor-2 relation needs exactly 2 classes, got {data.n_classes}")
    _require_normalized(data)
    cfg = cfg or TrainConfig()
    cls_loss = PowerLoss.classification(data, 2.0)
    sq_loss = SquaredLoss(data.Y.T)
    worst = 0.0
    count = 0

    def check(b):
        nonlocal worst, count
        d = decompose(b, data)
        err = abs(d.squared_loss - 2.0 * d.classification_loss) / max(1.0, d.squared_loss)
        if err > IDENTITY_TOL:
            raise InvariantViolation(f"squared loss is not twice the classification loss (error {err:.3g})")
        worst = max(worst, err)
        count += 1

    r_cls = train(dnn, data, cls_loss, cfg, callback=check)
    r_sq = train(dnn, data, sq_loss, cfg, callback=check)
    return BinaryCheckReport(
        iterates_checked=count,
        max_identity_error=worst,
        classification_loss=r_cls.final_loss,
        squared_loss=r_sq.final_loss,
        relation_error=abs(r_sq.final_loss - 2.0 * r_cls.final_loss),
    )
