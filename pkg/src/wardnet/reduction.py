"""From a network to its congestion game, and between weights and flows."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._validation import column_sum_error
from .dnn import (
    Dataset,
    LayeredDnn,
    PowerLoss,
    aggregates,
    network_loss,
    require_valid,
    weight_product,
)
from .game import (
    CongestionGame,
    MarginalFlow,
    Population,
    Resource,
    Strategy,
    social_cost,
)
from .io import dnn_to_dict, digest, game_to_dict


def _node(layer: int, n: int, side: str) -> str:
    return f"v{layer}.{n}{side}"


def _hidden_paths(dnn: LayeredDnn):
    """Node sequences through layers 1..L, in a fixed (lexicographic) order."""
    return itertools.product(*(range(n) for n in dnn.layer_sizes[1:]))


def build_game(dnn: LayeredDnn, data: Dataset, loss: PowerLoss) -> CongestionGame:
    """Construct the non-atomic congestion game of an identity-activation network.

    - every network edge becomes a zero-cost resource in ``B``;
    - every hidden or output node ``v`` becomes a zero-cost resource ``v- -> v+`` in ``J``;
    - output node ``k`` is followed by the chain ``e_k^1 .. e_k^M`` (set ``T``)
      ending at the common sink ``F``; ``e_k^j`` costs ``A[k, j] xi^(beta-1)``;
    - input ``i`` becomes the source ``d_i`` of a population of size 1 whose
      strategies are all ``d_i -> F`` paths.
    """
    if dnn.activation != "identity":
        raise ValueError("build_game needs an identity-activation network; "
                         "use relu.build_failure_game for the ReLU model")
    require_valid(dnn)
    if data.n_features != dnn.n_inputs:
        raise ValueError(f"data has {data.n_features} features, network expects {dnn.n_inputs}")
    C, M = dnn.n_outputs, data.n_samples
    if loss.coefficients.shape != (C, M):
        raise ValueError(f"loss coefficients have shape {loss.coefficients.shape}, expected {(C, M)}")

    resources: list[Resource] = []
    b_index: dict[tuple[int, int, int], int] = {}
    j_index: dict[tuple[int, int], int] = {}
    L = dnn.depth
    for l in range(L):
        tail_layer, head_layer = l, l + 1
        for src in range(dnn.layer_sizes[tail_layer]):
            tail = f"d{src}" if tail_layer == 0 else _node(tail_layer, src, "+")
            for dst in range(dnn.layer_sizes[head_layer]):
                b_index[(head_layer, dst, src)] = len(resources)
                resources.append(Resource("B", tail, _node(head_layer, dst, "-")))
    for layer in range(1, L + 1):
        for n in range(dnn.layer_sizes[layer]):
            j_index[(layer, n)] = len(resources)
            resources.append(Resource("J", _node(layer, n, "-"), _node(layer, n, "+")))
    t_chain: dict[int, tuple[int, ...]] = {}
    for k in range(C):
        chain = []
        tail = _node(L, k, "+")
        for j in range(M):
            head = "F" if j == M - 1 else f"t{k}.{j + 1}"
            chain.append(len(resources))
            resources.append(Resource("T", tail, head, k, j))
            tail = head
        t_chain[k] = tuple(chain)

    populations = []
    for i in range(dnn.n_inputs):
        strategies = []
        for hidden in _hidden_paths(dnn):
            nodes = (i,) + hidden
            edges = []
            for l in range(L):
                edges.append(b_index[(l + 1, nodes[l + 1], nodes[l])])
                edges.append(j_index[(l + 1, nodes[l + 1])])
            k = nodes[-1]
            strategies.append(Strategy(k, tuple(edges) + t_chain[k]))
        populations.append(Population(1.0, f"d{i}", tuple(strategies)))
    return CongestionGame(tuple(resources), tuple(populations), data.X, loss.coefficients, loss.beta)


def path_weights(dnn: LayeredDnn) -> list[np.ndarray]:
    """Per-path weight products, ordered like the strategies of :func:`build_game`."""
    out = []
    for i in range(dnn.n_inputs):
        ws = []
        for hidden in _hidden_paths(dnn):
            nodes = (i,) + hidden
            wp = 1.0
            for l, w in enumerate(dnn.weights):
                wp *= w[nodes[l + 1], nodes[l]]
            ws.append(wp)
        out.append(np.array(ws))
    return out


def weights_to_flow(dnn: LayeredDnn, game: CongestionGame | None = None) -> MarginalFlow:
    """Marginal flow ``z[k, i] = b[k, i]`` induced by the network weights."""
    require_valid(dnn)
    b = weight_product(dnn.weights)
    err = column_sum_error(b)
    if err > 1e-10 or np.any(b < 0):
        raise ValueError(f"induced flow is infeasible (column-sum error {err:.3g})")
    if game is not None and b.shape != (game.n_classes, game.n_populations):
        raise ValueError("network and game dimensions differ")
    return MarginalFlow(b)


def factorize(w_prime, widths: Sequence[int]) -> list[np.ndarray]:
    """Column-stochastic matrices whose ordered product is ``w_prime``.

    ``widths`` is the full layer-size list ``[d, n_1, ..., n_{L-1}, C]``. The
    target sits in the top block of the first matrix; later layers pass the
    first ``C`` coordinates through unchanged and route the unused nodes to
    a single row so that every column stays normalized.
    """
    w_prime = np.asarray(w_prime, dtype=np.float64)
    widths = [int(n) for n in widths]
    if len(widths) < 2:
        raise ValueError("widths must list at least input and output sizes")
    C, d = widths[-1], widths[0]
    if w_prime.shape != (C, d):
        raise ValueError(f"target has shape {w_prime.shape}, widths imply {(C, d)}")
    if np.any(w_prime < 0):
        raise ValueError("target has negative entries")
    err = column_sum_error(w_prime)
    if err > 1e-12:
        raise ValueError(f"target is not column-stochastic: max column-sum error {err:.3g}")
    hidden = widths[1:-1]
    if any(n < C for n in hidden):
        raise ValueError(f"hidden widths {hidden} must all be >= C={C}")
    if not hidden:
        return [w_prime.copy()]

    first = np.zeros((widths[1], d))
    first[:C] = w_prime
    mats = [first]
    for l in range(2, len(widths)):
        rows, cols = widths[l], widths[l - 1]
        m = np.zeros((rows, cols))
        m[:C, :C] = np.eye(C)
        sink = C if rows > C else 0
        m[sink, C:] = 1.0
        mats.append(m)
    return mats


def flow_to_weights(flow, layer_sizes: Sequence[int]) -> LayeredDnn:
    z = flow.z if isinstance(flow, MarginalFlow) else np.asarray(flow, dtype=np.float64)
    return LayeredDnn(tuple(layer_sizes), tuple(factorize(z, layer_sizes)), "identity")


@dataclass
class ReductionCertificate:
    dnn_digest: str
    game_digest: str
    loss_terms: np.ndarray  # (C, M) per output and sample
    edge_terms: np.ndarray  # (C, M) c_e(z~_e) z~_e on the T-edges
    loss_value: float
    social_cost: float
    discrepancy: float
    tolerance: float = 1e-10
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.discrepancy <= self.tolerance * (1.0 + abs(self.loss_value))

    def to_dict(self) -> dict:
        return {
            "dnn_digest": self.dnn_digest,
            "game_digest": self.game_digest,
            "loss_terms": self.loss_terms.tolist(),
            "edge_terms": self.edge_terms.tolist(),
            "loss": self.loss_value,
            "social_cost": self.social_cost,
            "discrepancy": self.discrepancy,
            "tolerance": self.tolerance,
            "ok": self.ok,
        }


def certify(dnn: LayeredDnn, data: Dataset, loss: PowerLoss,
            game: CongestionGame | None = None) -> ReductionCertificate:
    """Compare the network loss with the social cost of the induced flow."""
    game = build_game(dnn, data, loss) if game is None else game
    flow = weights_to_flow(dnn, game)
    bt = aggregates(dnn, data).b_tilde
    loss_terms = loss.coefficients * bt**loss.beta
    edge_terms = np.zeros_like(loss_terms)
    for e, r in enumerate(game.resources):
        if r.kind == "T":
            xi = float(game.X[r.sample] @ flow.z[r.output])
            edge_terms[r.output, r.sample] = game.edge_cost(e, xi) * xi
    lv = network_loss(dnn, data, loss)
    sc = social_cost(game, flow)
    return ReductionCertificate(
        dnn_digest=digest(dnn_to_dict(dnn)),
        game_digest=digest(game_to_dict(game)),
        loss_terms=loss_terms,
        edge_terms=edge_terms,
        loss_value=lv,
        social_cost=sc,
        discrepancy=max(abs(lv - sc), float(np.max(np.abs(loss_terms - edge_terms)))),
    )
