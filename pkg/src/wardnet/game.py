"""Non-atomic congestion games induced by layered networks.

Strategies of population ``i`` are source-to-sink paths; every path through
output class ``k`` crosses the chain of sample edges ``e_k^1 .. e_k^M`` and only
those edges carry cost. Flows are therefore handled through their class
marginals ``z[k, i]``; per-path flows are available for cross-checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import InvariantViolation, as_float_matrix, freeze
from .simplex import PGDResult, projected_gradient_descent

EQ_TOL = 1e-8
VALUE_TOL = 1e-6
ZERO_SO_TOL = 1e-10


class Resource(NamedTuple):
    kind: str  # "B", "J" or "T"
    tail: str
    head: str
    output: int | None = None  # k, T-edges only
    sample: int | None = None  # j, T-edges only


class Strategy(NamedTuple):
    output: int
    edges: tuple[int, ...]


@dataclass(frozen=True)
class Population:
    size: float
    source: str
    strategies: tuple[Strategy, ...]


@dataclass(frozen=True)
class CongestionGame:
    """Resources, populations, rates and power costs of the induced game.

    Rates are 1 on B/J edges and ``X[j, i]`` on the sample edge ``e_k^j`` for
    population ``i``. Costs are 0 on B/J edges and ``A[k, j] xi^(beta-1)`` on
    ``e_k^j``.
    """

    resources: tuple[Resource, ...]
    populations: tuple[Population, ...]
    X: np.ndarray  # (M, d) inputs
    coefficients: np.ndarray  # (C, M)
    beta: float

    def __post_init__(self):
        X = as_float_matrix(self.X, "X")
        A = as_float_matrix(self.coefficients, "coefficients")
        if X.shape[1] != len(self.populations):
            raise ValueError("one population per input feature is required")
        if A.shape[1] != X.shape[0]:
            raise ValueError("coefficients must have one column per sample")
        if self.beta < 2:
            raise ValueError("beta must be >= 2")
        object.__setattr__(self, "X", freeze(X))
        object.__setattr__(self, "coefficients", freeze(A))
        t_index = {}
        for idx, r in enumerate(self.resources):
            if r.kind == "T":
                t_index[(r.output, r.sample)] = idx
        object.__setattr__(self, "_t_index", t_index)

    @property
    def n_populations(self) -> int:
        return len(self.populations)

    @property
    def n_classes(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    def count(self, kind: str) -> int:
        return sum(1 for r in self.resources if r.kind == kind)

    def t_edge(self, k: int, j: int) -> int:
        return self._t_index[(k, j)]

    def rate(self, population: int, strategy: Strategy, e: int) -> float:
        if e not in strategy.edges:
            return 0.0
        r = self.resources[e]
        if r.kind == "T":
            return float(self.X[r.sample, population])
        return 1.0

    def edge_cost(self, e: int, xi: float) -> float:
        r = self.resources[e]
        if r.kind != "T":
            return 0.0
        if xi <= 0.0:
            return 0.0
        return float(self.coefficients[r.output, r.sample] * xi ** (self.beta - 1.0))


@dataclass(frozen=True)
class MarginalFlow:
    """Mass ``z[k, i]`` of population ``i`` routed through output class ``k``."""

    z: np.ndarray

    def __post_init__(self):
        z = as_float_matrix(self.z, "flow")
        if np.any(z < 0):
            raise ValueError(f"flow has negative entries (min {z.min():.3g})")
        err = np.abs(z.sum(axis=0) - 1.0)
        if np.any(err > 1e-10):
            i = int(np.argmax(err))
            raise ValueError(f"population {i} mass is {z[:, i].sum():.17g}, expected 1")
        object.__setattr__(self, "z", freeze(z))

    def congestion(self, X: np.ndarray) -> np.ndarray:
        """Sample-edge congestion ``z~[k, j] = sum_i X[j, i] z[k, i]``."""
        return self.z @ np.asarray(X).T


@dataclass
class EquilibriumReport:
    is_equilibrium: bool
    vi_residual: float
    worst_population: int
    class_costs: np.ndarray  # (C, d)
    method: str = "vi"

    def to_dict(self) -> dict:
        return {
            "is_equilibrium": self.is_equilibrium,
            "vi_residual": self.vi_residual,
            "worst_population": self.worst_population,
            "class_costs": self.class_costs.tolist(),
            "method": self.method,
        }


def _as_flow(game: CongestionGame, flow) -> MarginalFlow:
    if not isinstance(flow, MarginalFlow):
        flow = MarginalFlow(flow)
    if flow.z.shape != (game.n_classes, game.n_populations):
        raise ValueError(
            f"flow has shape {flow.z.shape}, game needs {(game.n_classes, game.n_populations)}"
        )
    return flow


def class_costs(game: CongestionGame, flow) -> np.ndarray:
    """Matrix of ``c(i, k) = sum_j x_i^j A_k^j (z~_k^j)^(beta-1)``, shape (C, d)."""
    flow = _as_flow(game, flow)
    zt = flow.congestion(game.X)
    return (game.coefficients * zt ** (game.beta - 1.0)) @ game.X


def social_cost(game: CongestionGame, flow, *, check: bool = True) -> float:
    """Social cost, evaluated per sample and per resource; both must agree."""
    flow = _as_flow(game, flow)
    zt = flow.congestion(game.X)
    by_sample = float(np.sum(game.coefficients * zt**game.beta))
    if not check:
        return by_sample
    by_edge = 0.0
    for e, r in enumerate(game.resources):
        # B and J edges have zero cost and contribute nothing
        if r.kind != "T":
            continue
        xi = float(game.X[r.sample] @ flow.z[r.output])
        by_edge += game.edge_cost(e, xi) * xi
    if abs(by_edge - by_sample) > 1e-12 * (1.0 + abs(by_sample)):
        raise InvariantViolation(
            f"edge-sum social cost {by_edge!r} differs from sample-sum {by_sample!r}"
        )
    return by_sample


def potential(game: CongestionGame, flow) -> float:
    """Beckmann potential ``sum_e int_0^{z~_e} c_e``; equals SC / beta for power costs."""
    flow = _as_flow(game, flow)
    zt = flow.congestion(game.X)
    return float(np.sum(game.coefficients * zt**game.beta) / game.beta)


def path_cost(game: CongestionGame, flow, population: int, strategy: Strategy) -> float:
    """``c_S(z) = sum_{e in S} a_{S,e} c_e(z~_e)`` evaluated edge by edge."""
    flow = _as_flow(game, flow)
    total = 0.0
    for e in strategy.edges:
        r = game.resources[e]
        if r.kind == "T":
            xi = float(game.X[r.sample] @ flow.z[r.output])
        else:
            xi = 0.0  # cost is identically zero on B/J edges
        total += game.rate(population, strategy, e) * game.edge_cost(e, xi)
    return total


def strategy_class_cost(game: CongestionGame, flow, population: int, k: int) -> float:
    """Cost shared by every path of ``population`` through output ``k``.

    The closed form is cross-checked against an edge-by-edge evaluation of up
    to two distinct paths of that class.
    """
    flow = _as_flow(game, flow)
    if not 0 <= population < game.n_populations:
        raise IndexError(f"population {population} out of range")
    if not 0 <= k < game.n_classes:
        raise IndexError(f"class {k} out of range")
    value = float(class_costs(game, flow)[k, population])
    paths = [s for s in game.populations[population].strategies if s.output == k][:2]
    for s in paths:
        c = path_cost(game, flow, population, s)
        if abs(c - value) > 1e-12 * (1.0 + abs(value)):
            raise InvariantViolation(f"path {s.edges} costs {c!r}, class cost is {value!r}")
    return value


def vi_form(game: CongestionGame, flow_star, flow) -> float:
    """``sum_{i,k,j} x_i^j c_k^j(z~*) (z_{k,i} - z*_{k,i})``."""
    flow_star = _as_flow(game, flow_star)
    flow = _as_flow(game, flow)
    return float(np.sum(class_costs(game, flow_star) * (flow.z - flow_star.z)))


def wardrop_check_definition(game: CongestionGame, flow, tol: float = EQ_TOL) -> EquilibriumReport:
    """Check that no used class is costlier than an alternative by more than ``tol``.

    ``vi_residual`` holds minus the largest such cost gap, so the report satisfies
    ``is_equilibrium == (vi_residual >= -tol)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    flow = _as_flow(game, flow)
    costs = class_costs(game, flow)
    best = costs.min(axis=0)
    used = flow.z > tol
    gaps = np.where(used, costs - best, -np.inf).max(axis=0)
    gaps = np.maximum(gaps, 0.0)
    worst = int(np.argmax(gaps))
    residual = -float(gaps[worst])
    return EquilibriumReport(residual >= -tol, residual, worst, costs, "definition")


def wardrop_check_vi(game: CongestionGame, flow, tol: float = EQ_TOL) -> EquilibriumReport:
    """Minimize the variational form over the flow polytope.

    The form is linear in ``z`` and the polytope is a product of simplices, so the
    minimum sends each population entirely to its cheapest class.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    flow = _as_flow(game, flow)
    costs = class_costs(game, flow)
    per_pop = costs.min(axis=0) - np.sum(flow.z * costs, axis=0)
    residual = float(per_pop.sum())
    worst = int(np.argmin(per_pop))
    return EquilibriumReport(residual >= -tol, residual, worst, costs, "vi")


def _uniform_start(game: CongestionGame) -> np.ndarray:
    return np.full((game.n_classes, game.n_populations), 1.0 / game.n_classes)


def _random_start(game: CongestionGame, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(game.n_classes), size=game.n_populations).T


def _solve(game, objective, gradient, z0, max_iter, tol) -> PGDResult:
    return projected_gradient_descent(
        lambda p: objective(p[0]),
        lambda p: [gradient(p[0])],
        [z0],
        max_iter=max_iter,
        tol=tol,
        spectral=True,
    )


def social_optimum(
    game: CongestionGame, *, z0=None, seed=None, max_iter: int = 100_000, tol: float = 1e-10
) -> tuple[MarginalFlow, float]:
    """Minimize social cost over the marginal polytope by projected gradient descent.

    Warns (and returns the best iterate) if the iteration budget runs out.
    """
    if z0 is None:
        z0 = _uniform_start(game) if seed is None else _random_start(game, seed)
    A, X, beta = game.coefficients, game.X, game.beta
    res = _solve(
        game,
        lambda z: float(np.sum(A * (z @ X.T) ** beta)),
        lambda z: beta * (A * (z @ X.T) ** (beta - 1.0)) @ X,
        np.asarray(z0, dtype=np.float64),
        max_iter,
        tol,
    )
    if not res.converged:
        warnings.warn(
            f"social optimum solver stopped after {res.n_iter} iterations "
            f"with projected-gradient norm {res.grad_norm:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    flow = MarginalFlow(res.params[0])
    return flow, social_cost(game, flow)


def find_equilibrium(
    game: CongestionGame, *, z0=None, seed=None, max_iter: int = 100_000, tol: float = 1e-10
) -> MarginalFlow:
    """Wardrop equilibrium via descent on the Beckmann potential.

    The potential's gradient with respect to ``z[k, i]`` is the class cost
    ``c(i, k)``, so this is projected cost-descent; it does not use the social
    cost gradient.
    """
    if z0 is None:
        z0 = _uniform_start(game) if seed is None else _random_start(game, seed)
    A, X, beta = game.coefficients, game.X, game.beta
    res = _solve(
        game,
        lambda z: float(np.sum(A * (z @ X.T) ** beta) / beta),
        lambda z: (A * (z @ X.T) ** (beta - 1.0)) @ X,
        np.asarray(z0, dtype=np.float64),
        max_iter,
        tol,
    )
    if not res.converged:
        warnings.warn(
            f"equilibrium solver stopped after {res.n_iter} iterations "
            f"with projected-gradient norm {res.grad_norm:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return MarginalFlow(res.params[0])


def optimality_residual(game: CongestionGame, flow) -> float:
    """Min over polytope vertices of ``<grad SC(z), v - z>``; >= 0 at a social optimum."""
    flow = _as_flow(game, flow)
    g = game.beta * class_costs(game, flow)
    return float(np.sum(g.min(axis=0) - np.sum(flow.z * g, axis=0)))


def price_of_anarchy(game: CongestionGame, *, equilibrium=None, optimum=None) -> float:
    """Equilibrium social cost over the social optimum.

    When the optimum is zero the ratio is 1 if the equilibrium value is also
    below ``1e-10`` and ``inf`` otherwise.
    """
    eq = find_equilibrium(game) if equilibrium is None else _as_flow(game, equilibrium)
    if optimum is None:
        _, so = social_optimum(game)
    else:
        so = float(optimum)
    we = social_cost(game, eq)
    if so <= ZERO_SO_TOL:
        return 1.0 if we <= ZERO_SO_TOL else float("inf")
    return we / so


# ---- per-path flows -------------------------------------------------------


def path_flows_from_marginals(game: CongestionGame, flow) -> list[np.ndarray]:
    """Split each class marginal uniformly over the paths of that class."""
    flow = _as_flow(game, flow)
    out = []
    for i, pop in enumerate(game.populations):
        classes = np.array([s.output for s in pop.strategies])
        counts = np.bincount(classes, minlength=game.n_classes)
        out.append(flow.z[classes, i] / counts[classes])
    return out


def marginals_from_path_flows(game: CongestionGame, path_flows) -> np.ndarray:
    z = np.zeros((game.n_classes, game.n_populations))
    for i, (pop, zs) in enumerate(zip(game.populations, path_flows)):
        for s, v in zip(pop.strategies, zs):
            z[s.output, i] += v
    return z


def social_cost_from_paths(game: CongestionGame, path_flows) -> tuple[float, float]:
    """Social cost from an explicit per-path distribution, using only the game tuple.

    Returns ``(sum_e c_e(z~_e) z~_e, sum_S c_S(z) z_S)``.
    """
    congestion = np.zeros(len(game.resources))
    for i, (pop, zs) in enumerate(zip(game.populations, path_flows)):
        for s, v in zip(pop.strategies, zs):
            for e in s.edges:
                congestion[e] += game.rate(i, s, e) * v
    costs = np.array([game.edge_cost(e, xi) for e, xi in enumerate(congestion)])
    edge_form = float(costs @ congestion)
    strat_form = 0.0
    for i, (pop, zs) in enumerate(zip(game.populations, path_flows)):
        for s, v in zip(pop.strategies, zs):
            strat_form += v * sum(game.rate(i, s, e) * costs[e] for e in s.edges)
    return edge_form, strat_form


def game_report(game: CongestionGame, flow, tol: float = EQ_TOL) -> dict:
    """Summary document ``{sc, so, we_value, poa, vi_residual, is_equilibrium}``."""
    flow = _as_flow(game, flow)
    eq = find_equilibrium(game)
    _, so = social_optimum(game)
    vi = wardrop_check_vi(game, flow, tol)
    return {
        "sc": social_cost(game, flow),
        "so": so,
        "we_value": social_cost(game, eq),
        "poa": price_of_anarchy(game, equilibrium=eq, optimum=so),
        "vi_residual": vi.vi_residual,
        "is_equilibrium": vi.is_equilibrium,
    }


__all__ = [
    "CongestionGame",
    "EquilibriumReport",
    "MarginalFlow",
    "Population",
    "Resource",
    "Strategy",
    "class_costs",
    "find_equilibrium",
    "game_report",
    "optimality_residual",
    "path_cost",
    "potential",
    "price_of_anarchy",
    "social_cost",
    "social_optimum",
    "strategy_class_cost",
    "vi_form",
    "wardrop_check_definition",
    "wardrop_check_vi",
]
