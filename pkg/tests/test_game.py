import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import single_layer
from oracles import class_cost_by_loops, random_problem
from wardnet import (
    MarginalFlow,
    build_game,
    class_costs,
    find_equilibrium,
    price_of_anarchy,
    social_cost,
    social_optimum,
    wardrop_check_definition,
    wardrop_check_vi,
)
from wardnet.game import (
    game_report,
    marginals_from_path_flows,
    optimality_residual,
    path_flows_from_marginals,
    potential,
    social_cost_from_paths,
    strategy_class_cost,
    vi_form,
)
from wardnet.optim import grid_oracle


@pytest.fixture
def g1(f1):
    data, loss = f1
    return build_game(single_layer([[0.5], [0.5]]), data, loss)


@pytest.fixture
def g2(f2):
    data, loss = f2
    return build_game(single_layer([[0.5], [0.5]]), data, loss)


EQ = np.array([[2 / 3], [1 / 3]])
VERTEX = np.array([[1.0], [0.0]])


def test_social_cost_fixtures(g1, g2, f3):
    assert social_cost(g1, EQ) == pytest.approx(2 / 3, abs=1e-15)
    assert social_cost(g2, VERTEX) == 0.0
    dnn, data, loss = f3
    game = build_game(dnn, data, loss)
    assert social_cost(game, np.full((3, 2), 1 / 3)) == pytest.approx(2 / 9, abs=1e-15)


def test_flow_validation():
    with pytest.raises(ValueError):
        MarginalFlow(np.array([[1.2], [-0.2]]))
    with pytest.raises(ValueError):
        MarginalFlow(np.array([[0.5], [0.4]]))


def test_class_costs_fixture_values(g1):
    assert strategy_class_cost(g1, EQ, 0, 0) == pytest.approx(2 / 3)
    assert strategy_class_cost(g1, EQ, 0, 1) == pytest.approx(2 / 3)
    assert strategy_class_cost(g1, VERTEX, 0, 0) == 1.0
    assert strategy_class_cost(g1, VERTEX, 0, 1) == 0.0
    with pytest.raises(IndexError):
        strategy_class_cost(g1, EQ, 0, 5)


def test_class_costs_match_loop_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        dnn, data, loss = random_problem(rng)
        game = build_game(dnn, data, loss)
        z = rng.dirichlet(np.ones(dnn.n_outputs), size=dnn.n_inputs).T
        ref = class_cost_by_loops(z.tolist(), data.X.tolist(), loss.coefficients.tolist(), loss.beta)
        np.testing.assert_allclose(class_costs(game, z), ref, rtol=1e-12, atol=1e-15)
        for i in range(game.n_populations):
            for k in range(game.n_classes):
                strategy_class_cost(game, z, i, k)  # cross-checks two explicit paths


def test_wardrop_checks_fixtures(g1, g2):
    for check in (wardrop_check_definition, wardrop_check_vi):
        assert check(g1, EQ).is_equilibrium
        assert not check(g1, VERTEX).is_equilibrium
        assert check(g2, VERTEX).is_equilibrium
    assert wardrop_check_vi(g1, EQ).vi_residual == pytest.approx(0.0, abs=1e-15)
    assert wardrop_check_vi(g1, VERTEX).vi_residual == -1.0


def test_report_invariant_holds_for_both_checks(g1):
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = rng.dirichlet([1, 1])[:, None]
        for check in (wardrop_check_definition, wardrop_check_vi):
            rep = check(g1, z, 1e-8)
            assert rep.is_equilibrium == (rep.vi_residual >= -1e-8)


def test_vi_form_nonnegative_at_equilibrium(g1):
    rng = np.random.default_rng(1)
    for _ in range(20):
        z = rng.dirichlet([1, 1])[:, None]
        assert vi_form(g1, EQ, z) >= -1e-15


def test_social_optimum_and_poa_fixtures(g1, g2):
    flow, so = social_optimum(g1)
    np.testing.assert_allclose(flow.z, EQ, atol=1e-8)
    assert so == pytest.approx(2 / 3, abs=1e-12)
    flow2, so2 = social_optimum(g2)
    np.testing.assert_allclose(flow2.z, VERTEX, atol=1e-8)
    assert so2 <= 1e-12
    assert price_of_anarchy(g1) == pytest.approx(1.0, abs=1e-6)
    assert price_of_anarchy(g2) == 1.0


def test_poa_zero_optimum_convention(g2):
    assert price_of_anarchy(g2, equilibrium=VERTEX, optimum=0.0) == 1.0
    assert price_of_anarchy(g2, equilibrium=np.array([[0.5], [0.5]]), optimum=0.0) == float("inf")


def test_social_optimum_matches_grid_oracle_on_tiny_games():
    rng = np.random.default_rng(4)
    for _ in range(5):
        dnn, data, loss = random_problem(rng, d_max=2, c_max=2, m_max=2, depth_max=1)
        game = build_game(dnn, data, loss)
        _, so = social_optimum(game)
        _, grid = grid_oracle(data, loss, h=1e-3)
        assert so <= grid + 1e-12
        assert grid - so <= 1e-4


def test_equilibria_share_value_and_potential_is_sc_over_beta():
    rng = np.random.default_rng(6)
    for _ in range(10):
        dnn, data, loss = random_problem(rng)
        game = build_game(dnn, data, loss)
        vals = []
        for seed in range(3):
            eq = find_equilibrium(game, seed=seed)
            assert wardrop_check_vi(game, eq).is_equilibrium
            vals.append(social_cost(game, eq))
        assert max(vals) - min(vals) <= 1e-6 * (1 + min(vals))
        z = rng.dirichlet(np.ones(game.n_classes), size=game.n_populations).T
        assert potential(game, z) * loss.beta == pytest.approx(social_cost(game, z), rel=1e-14)
        opt, so = social_optimum(game)
        assert abs(so - vals[0]) <= 1e-8 * (1 + so)
        assert optimality_residual(game, opt) >= -1e-8


def test_path_flow_round_trip_and_generic_social_cost(f3):
    dnn, data, loss = f3
    game = build_game(dnn, data, loss)
    rng = np.random.default_rng(7)
    z = rng.dirichlet(np.ones(3), size=2).T
    paths = path_flows_from_marginals(game, z)
    assert [len(p) for p in paths] == [9, 9]
    np.testing.assert_allclose(marginals_from_path_flows(game, paths), z, atol=1e-15)
    edge_form, strat_form = social_cost_from_paths(game, paths)
    sc = social_cost(game, z)
    assert edge_form == pytest.approx(sc, rel=1e-12)
    assert strat_form == pytest.approx(sc, rel=1e-12)


def test_game_report_fields(g1):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = game_report(g1, EQ)
    assert set(rep) == {"sc", "so", "we_value", "poa", "vi_residual", "is_equilibrium"}
    assert rep["is_equilibrium"] and rep["poa"] == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sc_forms_agree_on_random_flows(seed):
    rng = np.random.default_rng(seed)
    dnn, data, loss = random_problem(rng)
    game = build_game(dnn, data, loss)
    z = rng.dirichlet(np.ones(game.n_classes), size=game.n_populations).T
    social_cost(game, z)  # raises if edge-sum and sample-sum forms disagree
