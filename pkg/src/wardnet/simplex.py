"""Euclidean projection onto probability simplices and projected gradient descent.

Iterates are lists of matrices whose columns each live on a probability
simplex (weight matrices, or the (C, d) marginal flow matrix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# relative size of f changes below which the line search trusts gradients over f
APPROX_BAND = 1e-10


def project_simplex(v) -> np.ndarray:
    """Project a vector onto ``{u >= 0, sum(u) = 1}`` (sort-based algorithm)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("project_simplex expects a non-empty 1-D vector")
    return project_columns(v[:, None])[:, 0]


def project_columns(m) -> np.ndarray:
    """Project every column of ``m`` onto the probability simplex."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("cannot project non-finite values")
    n = m.shape[0]
    u = -np.sort(-m, axis=0)
    css = np.cumsum(u, axis=0) - 1.0
    ind = np.arange(1, n + 1)[:, None]
    cond = u - css / ind > 0
    # cond is true on a prefix; its length is the support size
    rho = n - np.argmax(cond[::-1], axis=0) - 1
    theta = css[rho, np.arange(m.shape[1])] / (rho + 1)
    return np.maximum(m - theta, 0.0)


def project_all(params: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [project_columns(p) for p in params]


def _support_inner(g, d, x, x_new) -> float:
    """``<g, d>`` with ``g`` centered per column over the union of supports.

    Projection round-off shifts every support entry of a column by the same
    tiny amount; centering over exactly those entries cancels that shift.
    """
    mask = (x > 0) | (x_new > 0)
    counts = np.maximum(mask.sum(axis=0), 1)
    m = np.sum(g * mask, axis=0) / counts
    return float(np.sum((g - m) * d * mask))


def _shifted(g: np.ndarray) -> np.ndarray:
    """``g`` minus its column minima.

    Projection ignores per-column constants, and without them ``x - t g``
    keeps the entries that survive projection small even for large ``t``,
    so no precision is lost to cancellation.
    """
    return g - g.min(axis=0)


def gradient_mapping_norm(params, grads) -> float:
    """Norm of ``x - P(x - grad)``; zero exactly at stationary points."""
    sq = 0.0
    for p, g in zip(params, grads):
        sq += float(np.sum((p - project_columns(p - _shifted(g))) ** 2))
    return math.sqrt(sq)


@dataclass
class PGDResult:
    params: list[np.ndarray]
    value: float
    initial_value: float
    n_iter: int
    grad_norm: float
    converged: bool
    n_backtracks: int = 0
    monotone: bool = True
    history: list[float] = field(default_factory=list)


def projected_gradient_descent(
    fun: Callable[[list[np.ndarray]], float],
    grad: Callable[[list[np.ndarray]], list[np.ndarray]],
    x0: Sequence[np.ndarray],
    *,
    step0: float = 1.0,
    shrink: float = 0.5,
    armijo: float = 1e-4,
    max_iter: int = 100_000,
    tol: float = 1e-9,
    min_step: float = 1e-30,
    spectral: bool = False,
    callback: Callable[[list[np.ndarray]], None] | None = None,
    keep_history: bool = False,
) -> PGDResult:
    """Projected gradient descent with backtracking Armijo search along the projection arc.

    Each search starts from ``step0``, or with ``spectral=True`` from the
    Barzilai-Borwein step ``<s, s> / <s, y>`` of the previous iteration, which
    does not stall where the curvature vanishes. Stops when the gradient
    mapping norm drops to ``tol``, when the line search cannot find a
    decreasing step, or after ``max_iter`` iterations.
    """
    if step0 <= 0 or not 0 < shrink < 1:
        raise ValueError("need step0 > 0 and 0 < shrink < 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = project_all(x0)
    f = fun(x)
    f0 = f
    g = grad(x)
    history = [f] if keep_history else []
    backtracks = 0
    monotone = True
    it = 0
    gnorm = math.inf
    t_first = step0
    while True:
        if not math.isfinite(f):
            raise FloatingPointError(f"objective became {f} at iteration {it}")
        if callback is not None:
            callback(x)
        gnorm = gradient_mapping_norm(x, g)
        if gnorm <= tol or it >= max_iter:
            break
        scale = max(1.0, abs(f))
        noise = APPROX_BAND * scale
        # f moves by up to eps * sum|g * x| when x is perturbed by relative round-off
        sensitivity = sum(float(np.sum(np.abs(gp * p))) for p, gp in zip(x, g))
        ulp_slack = 8 * np.finfo(float).eps * (scale + sensitivity)
        g_shift = [_shifted(gp) for gp in g]
        t = t_first
        while True:
            x_new = [project_columns(p - t * gp) for p, gp in zip(x, g_shift)]
            steps = [pn - p for p, pn in zip(x, x_new)]
            if max(float(np.max(np.abs(dp))) for dp in steps) <= 4 * np.finfo(float).eps:
                # the step no longer moves the iterate by more than round-off
                x_new = None
                break
            decrease = sum(_support_inner(gp, dp, p, pn) for p, pn, gp, dp in zip(x, x_new, g, steps))
            f_new = fun(x_new)
            if abs(f_new - f) > noise:
                if f_new <= f + armijo * decrease:
                    g_new = grad(x_new)
                    break
            else:
                # f differences are too close to round-off to trust: estimate the
                # change from gradients instead (exact for quadratics)
                g_new = grad(x_new)
                approx = sum(
                    0.5 * _support_inner(gp + gn, dp, p, pn)
                    for p, pn, gp, gn, dp in zip(x, x_new, g, g_new, steps)
                )
                if approx <= armijo * decrease and f_new <= f + ulp_slack:
                    break
            t *= shrink
            backtracks += 1
            if t < min_step:
                x_new = None
                break
        if x_new is None:
            break
        if f_new > f + ulp_slack:
            monotone = False
        if spectral:
            ss = sum(float(np.sum(dp * dp)) for dp in steps)
            sy = sum(_support_inner(gn - gp, dp, p, pn)
                     for p, pn, gp, gn, dp in zip(x, x_new, g, g_new, steps))
            t_first = min(max(ss / sy, 1e-10), 1e10) if sy > 0 else 1e10
        x, f, g = x_new, f_new, g_new
        it += 1
        if keep_history:
            history.append(f)
    return PGDResult(
        params=x,
        value=f,
        initial_value=f0,
        n_iter=it,
        grad_norm=gnorm,
        converged=gnorm <= tol,
        n_backtracks=backtracks,
        monotone=monotone,
        history=history,
    )
