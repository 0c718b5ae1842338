"""Independent reference computations used by the tests.

Everything here is written with plain Python loops or `fractions`, without
calling the package's matrix code, so agreement is evidence rather than a
tautology.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def path_aggregates(weights, layer_sizes):
    """b[k][i] as an explicit sum over all input-to-output paths."""
    d, C = layer_sizes[0], layer_sizes[-1]
    b = [[0.0] * d for _ in range(C)]
    for nodes in itertools.product(*(range(n) for n in layer_sizes)):
        w = 1.0
        for l, m in enumerate(weights):
            w *= float(m[nodes[l + 1]][nodes[l]])
        b[nodes[-1]][nodes[0]] += w
    return np.array(b)


def loss_by_loops(weights, layer_sizes, X, A, beta):
    b = path_aggregates(weights, layer_sizes)
    total = 0.0
    for j in range(len(X)):
        for k in range(len(A)):
            o = sum(X[j][i] * b[k][i] for i in range(len(X[j])))
            total += A[k][j] * o**beta
    return total


def class_cost_by_loops(z, X, A, beta):
    """c(i, k) = sum_j x_i^j A_k^j (sum_i' x_i'^j z[k, i'])^(beta-1)."""
    C, d = len(z), len(z[0])
    out = np.zeros((C, d))
    for k in range(C):
        for i in range(d):
            for j in range(len(X)):
                zt = sum(X[j][q] * z[k][q] for q in range(d))
                out[k, i] += X[j][i] * A[k][j] * zt ** (beta - 1)
    return out


def central_differences(f, b, h=1e-6):
    g = np.zeros_like(b)
    for idx in np.ndindex(*b.shape):
        e = np.zeros_like(b)
        e[idx] = h
        g[idx] = (f(b + e) - f(b - e)) / (2 * h)
    return g


def f1_loss_exact(p: Fraction) -> Fraction:
    """F1 loss at b = (p, 1-p): p^2 + 2 (1-p)^2, minimized at p = 2/3 with value 2/3."""
    return p * p + 2 * (1 - p) * (1 - p)


def random_stochastic(rng, rows, cols, sparsity=0.0):
    w = rng.uniform(0.0, 1.0, (rows, cols))
    if sparsity:
        w[rng.random((rows, cols)) < sparsity] = 0.0
        empty = w.sum(axis=0) == 0
        w[0, empty] = 1.0
    return w / w.sum(axis=0)


def random_problem(rng, *, d_max=4, c_max=4, width_max=6, depth_max=3, m_max=5,
                   beta_choices=(2.0, 2.5, 3.0), strict=True, normalized=False):
    """A random valid (layer_sizes, weights, X, Y, A, beta) tuple."""
    from wardnet import Dataset, LayeredDnn, PowerLoss

    d = int(rng.integers(1, d_max + 1))
    C = int(rng.integers(2, c_max + 1))
    n_hidden = int(rng.integers(0, depth_max))
    hidden = [int(rng.integers(C, max(C, width_max) + 1)) for _ in range(n_hidden)]
    sizes = (d, *hidden, C)
    weights = tuple(random_stochastic(rng, sizes[l + 1], sizes[l], sparsity=0.2)
                    for l in range(len(sizes) - 1))
    M = int(rng.integers(1, m_max + 1))
    X = rng.uniform(0.0, 1.0, (M, d))
    if normalized:
        X = X / X.sum(axis=1, keepdims=True)
    labels = rng.integers(0, C, M)
    data = Dataset.from_labels(X, labels, C, normalized)
    beta = float(rng.choice(beta_choices))
    if strict:
        loss = PowerLoss(rng.uniform(0.1, 2.0, (C, M)), beta)
    else:
        loss = PowerLoss.classification(data, beta)
    return LayeredDnn(sizes, weights), data, loss
