"""Training on the constraint set, the brute-force grid oracle, and the
end-to-end check that trained networks land on Wardrop equilibria."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Callable

import numpy as np

from ._validation import rel_close
from .dnn import Dataset, LayeredDnn, PowerLoss, loss_gradient_b, weight_product
from .game import (
    EQ_TOL,
    MarginalFlow,
    find_equilibrium,
    price_of_anarchy,
    social_cost,
    social_optimum,
    wardrop_check_definition,
    wardrop_check_vi,
)
from .reduction import build_game, weights_to_flow
from .simplex import gradient_mapping_norm, project_simplex, projected_gradient_descent

__all__ = [
    "TrainConfig",
    "TrainReport",
    "RestartSummary",
    "MinimaReport",
    "grid_oracle",
    "lipschitz_slack",
    "project_simplex",
    "train",
    "verify_minima_are_equilibria",
]

MODES = ("weight", "marginal")
GRID_BUDGET = 10**7


@dataclass
class TrainConfig:
    mode: str = "weight"
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_iter: int = 100_000
    tol: float = 1e-9
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.step0 <= 0:
            raise ValueError("step size must be positive")
        if self.tol <= 0:
            raise ValueError("convergence threshold must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    def restart_seeds(self) -> list[int]:
        children = np.random.SeedSequence(self.seed).spawn(self.restarts)
        return [int(c.generate_state(1)[0]) for c in children]


@dataclass
class RestartSummary:
    seed: int
    initial_loss: float
    final_loss: float
    iterations: int
    grad_norm: float
    converged: bool
    backtracks: int
    monotone: bool


@dataclass
class TrainReport:
    mode: str
    final_loss: float
    iterations: int
    grad_norm: float
    converged: bool
    b: np.ndarray
    weights: list[np.ndarray] | None
    restarts: list[RestartSummary] = field(default_factory=list)
    runs: list[tuple[np.ndarray, list[np.ndarray] | None]] = field(default_factory=list, repr=False)

    @property
    def final_losses(self) -> list[float]:
        return [r.final_loss for r in self.restarts]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "final_loss": self.final_loss,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "b": self.b.tolist(),
            "restarts": [asdict(r) for r in self.restarts],
        }


def _initial_point(dnn: LayeredDnn, mode: str, rng: np.random.Generator) -> list[np.ndarray]:
    if mode == "marginal":
        C, d = dnn.n_outputs, dnn.n_inputs
        return [rng.dirichlet(np.ones(C), size=d).T]
    return [rng.dirichlet(np.ones(w.shape[0]), size=w.shape[1]).T for w in dnn.weights]


def _objective(data: Dataset, loss, mode: str):
    X = data.X

    if mode == "marginal":
        def fun(p):
            return loss.evaluate(p[0] @ X.T)

        def grad(p):
            return [loss.output_gradient(p[0] @ X.T) @ X]

        return fun, grad

    def fun(p):
        return loss.evaluate(weight_product(p) @ X.T)

    def grad(p):
        # prefix[l] = W_l ... W_1 (prefix[0] = I), suffix[l] = W_L ... W_{l+1}
        L = len(p)
        prefix = [np.eye(p[0].shape[1])]
        for w in p:
            prefix.append(w @ prefix[-1])
        suffix = [None] * L
        acc = np.eye(p[-1].shape[0])
        for l in range(L - 1, -1, -1):
            suffix[l] = acc
            acc = acc @ p[l]
        gb = loss.output_gradient(prefix[-1] @ X.T) @ X
        return [suffix[l].T @ gb @ prefix[l].T for l in range(L)]

    return fun, grad


def train(
    dnn: LayeredDnn,
    data: Dataset,
    loss,
    cfg: TrainConfig | None = None,
    *,
    callback: Callable[[np.ndarray], None] | None = None,
) -> TrainReport:
    """Full-batch projected gradient descent with Armijo backtracking.

    ``mode="weight"`` optimizes every weight matrix with per-column simplex
    projection; ``mode="marginal"`` optimizes the aggregate matrix ``b`` directly
    on the product of simplices. ``dnn`` supplies the architecture; each restart
    draws a Dirichlet-uniform starting point from a seed derived from ``cfg.seed``.
    ``loss`` is any object with ``evaluate`` and ``output_gradient`` on (C, M)
    outputs. ``callback`` receives the aggregate matrix ``b`` of every iterate.
    """
    cfg = cfg or TrainConfig()
    if dnn.activation != "identity":
        raise ValueError("training is defined for identity-activation networks")
    if data.n_features != dnn.n_inputs:
        raise ValueError("data and network dimensions differ")
    fun, grad = _objective(data, loss, cfg.mode)
    if callback is None:
        cb = None
    elif cfg.mode == "marginal":
        def cb(p):
            callback(p[0])
    else:
        def cb(p):
            callback(weight_product(p))

    summaries, runs = [], []
    best = None
    for seed in cfg.restart_seeds():
        x0 = _initial_point(dnn, cfg.mode, np.random.default_rng(seed))
        res = projected_gradient_descent(
            fun, grad, x0,
            step0=cfg.step0, shrink=cfg.shrink, armijo=cfg.armijo,
            max_iter=cfg.max_iter, tol=cfg.tol, callback=cb,
        )
        b = res.params[0] if cfg.mode == "marginal" else weight_product(res.params)
        weights = None if cfg.mode == "marginal" else res.params
        summaries.append(RestartSummary(
            seed, res.initial_value, res.value, res.n_iter, res.grad_norm,
            res.converged, res.n_backtracks, res.monotone,
        ))
        runs.append((b, weights))
        if best is None or res.value < best[0].value:
            best = (res, b, weights)
    res, b, weights = best
    return TrainReport(
        mode=cfg.mode,
        final_loss=res.value,
        iterations=res.n_iter,
        grad_norm=res.grad_norm,
        converged=res.converged,
        b=b,
        weights=weights,
        restarts=summaries,
        runs=runs,
    )


# ---- grid oracle -----------------------------------------------------------


def simplex_grid(n_classes: int, steps: int) -> np.ndarray:
    """All points of the ``n_classes``-simplex with coordinates in ``{0, 1/steps, ..., 1}``,
    in lexicographic order of their integer numerators."""
    rows = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], steps, n_classes)
    return np.array(rows, dtype=np.float64) / steps


def grid_size(n_classes: int, n_populations: int, h: float) -> int:
    steps = round(1.0 / h)
    return comb(steps + n_classes - 1, n_classes - 1) ** n_populations


def grid_oracle(data: Dataset, loss: PowerLoss, h: float = 1e-3,
                budget: int = GRID_BUDGET) -> tuple[MarginalFlow, float]:
    """Exhaustive minimization of the loss over a product of simplex grids.

    Evaluates every marginal point whose coordinates are multiples of ``h``
    (``1/h`` must be an integer) and returns the lexicographically first
    minimizer with its value.
    """
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    steps = round(1.0 / h)
    if abs(steps * h - 1.0) > 1e-9:
        raise ValueError(f"1/h must be an integer, got h={h}")
    C, d = loss.coefficients.shape[0], data.n_features
    size = grid_size(C, d, h)
    if size > budget:
        raise ValueError(f"grid has {size:.3g} points, budget is {budget:.3g}")
    grid = simplex_grid(C, steps)  # (G, C)
    X, A, beta = data.X, loss.coefficients, loss.beta
    # contrib[i][g] = outputs produced by population i at grid point g, shape (G, C, M)
    contrib = [grid[:, :, None] * X[:, i][None, None, :] for i in range(d)]

    best_val, best_idx = math.inf, None
    G = len(grid)
    # enumerate populations 0..d-2 explicitly, vectorize the last one
    for head in np.ndindex(*([G] * (d - 1))):
        base = np.zeros((C, X.shape[0]))
        for i, g in enumerate(head):
            base = base + contrib[i][g]
        outs = base[None] + contrib[d - 1]
        vals = np.sum(A * outs**beta, axis=(1, 2))
        g_last = int(np.argmin(vals))
        if vals[g_last] < best_val:
            best_val, best_idx = float(vals[g_last]), head + (g_last,)
    z = np.stack([grid[g] for g in best_idx], axis=1)
    return MarginalFlow(z), best_val


def lipschitz_slack(data: Dataset, loss: PowerLoss, h: float) -> float:
    """Bound on how far the grid minimum can sit above the true minimum.

    Uses ``|dL/dz[k, i]| <= beta sum_j A[k, j] x_i^j (sum_i x_i^j)^(beta-1)`` and
    the fact that every simplex point is within l1 distance ``C h`` of the grid.
    """
    X, A, beta = data.X, loss.coefficients, loss.beta
    out_max = X.sum(axis=1)  # outputs never exceed the input mass
    gbound = beta * (A * out_max[None, :] ** (beta - 1.0)) @ X  # (C, d)
    C = A.shape[0]
    return float(C * h * gbound.max(axis=0).sum())


# ---- end-to-end verification -----------------------------------------------


@dataclass
class RestartCheck:
    seed: int
    converged: bool
    grad_norm: float
    b_grad_norm: float  # projected-gradient norm of the induced b, in marginal space
    loss: float
    vi_residual: float
    equilibrium_vi: bool
    equilibrium_definition: bool


@dataclass
class MinimaReport:
    strict: bool
    mode: str
    so_value: float
    we_value: float
    poa: float
    checks: list[RestartCheck]

    @property
    def n_equilibria(self) -> int:
        """Runs whose flow passes the VI check."""
        return sum(c.equilibrium_vi for c in self.checks)

    @property
    def n_both_checks(self) -> int:
        return sum(c.equilibrium_vi and c.equilibrium_definition for c in self.checks)

    @property
    def success(self) -> bool:
        return all(
            c.converged
            and c.equilibrium_vi
            and c.equilibrium_definition
            and rel_close(c.loss, self.so_value, 1e-6)
            and rel_close(c.loss, self.we_value, 1e-6)
            for c in self.checks
        )

    def to_dict(self) -> dict:
        return {
            "strict": self.strict,
            "mode": self.mode,
            "so": self.so_value,
            "we_value": self.we_value,
            "poa": self.poa,
            "n_equilibria": self.n_equilibria,
            "n_both_checks": self.n_both_checks,
            "n_runs": len(self.checks),
            "success": self.success,
            "runs": [asdict(c) for c in self.checks],
        }


def verify_minima_are_equilibria(dnn: LayeredDnn, data: Dataset, loss: PowerLoss,
                    cfg: TrainConfig | None = None, tol: float = EQ_TOL) -> MinimaReport:
    """Train, map each converged network to its flow, and test it for equilibrium.

    The social optimum and an equilibrium are computed independently on the
    induced game; success needs every restart to converge, pass both Wardrop
    checks, and match both values within 1e-6 relative. A weight-space run can
    stop with its induced ``b`` still short of marginal-space stationarity, so
    each check also records ``b_grad_norm``.
    """
    cfg = cfg or TrainConfig()
    game = build_game(dnn, data, loss)
    report = train(dnn, data, loss, cfg)
    _, so = social_optimum(game)
    eq = find_equilibrium(game)
    we = social_cost(game, eq)
    poa = price_of_anarchy(game, equilibrium=eq, optimum=so)
    checks = []
    for summary, (b, weights) in zip(report.restarts, report.runs):
        if weights is not None:
            flow = weights_to_flow(LayeredDnn(dnn.layer_sizes, tuple(weights)), game)
        else:
            flow = MarginalFlow(b)
        vi = wardrop_check_vi(game, flow, tol)
        de = wardrop_check_definition(game, flow, tol)
        b_grad = gradient_mapping_norm([flow.z], [loss_gradient_b(flow.z, data, loss)])
        checks.append(RestartCheck(
            summary.seed, summary.converged, summary.grad_norm, b_grad,
            social_cost(game, flow), vi.vi_residual, vi.is_equilibrium, de.is_equilibrium,
        ))
    return MinimaReport(loss.strict, cfg.mode, so, we, poa, checks)
