import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
from app.core.exceptions import DimensionMismatchError, SolverConvergenceError
from app.core.rng import RandomSource
from app.core.sets import FeasibleSet
from app.services.benchmark import (
    decompose_regret,
    expected_benchmark,
    max_over_simplex,
    per_slot_benchmark,
    solve_offline_minmax,
)
from app.services.functions import LogisticLosses, QuadraticForm
from app.services.losses import make_adversarial_pair, make_expert_losses, make_fair_classification, make_random_linear
from app.services.solver import golden_section, minimize_max


def test_max_over_simplex_examples():
    theta, value = max_over_simplex([3.0, 5.0])
    assert theta.probabilities.tolist() == [0.0, 1.0]
    assert value == 5.0
    theta, value = max_over_simplex([4.0, 4.0])
    assert theta.probabilities.tolist() == [1.0, 0.0]
    assert value == 4.0
    with pytest.raises(DimensionMismatchError):
        max_over_simplex([])


def test_max_over_simplex_dominates_random_mixtures():
    rng = RandomSource(3)
    s = rng.normal(size=6)
    _, value = max_over_simplex(s)
    for _ in range(1000):
        theta = rng.random(6)
        theta /= theta.sum()
        assert value >= theta @ s - 1e-12


def test_golden_section_finds_boundary_and_interior():
    x, value, _ = golden_section(lambda s: (s - 0.3) ** 2, 0.0, 1.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-9)
    x, value, _ = golden_section(lambda s: 2.0 - s, 0.0, 1.0, 1e-10)
    assert x == 1.0
    assert value == 1.0


@pytest.mark.parametrize("n", [10, 100, 1000])
def test_offline_minmax_adversarial_pair(n):
    oracle = make_adversarial_pair()
    saddle = solve_offline_minmax(oracle.rounds(2 * n), oracle.feasible_set)
    assert saddle.x[0] == pytest.approx(0.0, abs=1e-6)
    assert saddle.value == pytest.approx(1.2 * n, abs=1e-6)
    assert saddle.theta.probabilities.tolist() == [1.0, 0.0]


def test_offline_minmax_monotone_linear():
    rounds = [QuadraticForm.linear([[1.0]]) for _ in range(5)]
    saddle = solve_offline_minmax(rounds, FeasibleSet.interval(0.0, 1.0))
    assert saddle.x[0] == pytest.approx(0.0, abs=1e-9)
    assert saddle.value == pytest.approx(0.0, abs=1e-9)


def test_offline_minmax_symmetric_parabolas():
    rounds = [QuadraticForm.squared_distance([[0.0], [2.0]])]
    saddle = solve_offline_minmax(rounds, FeasibleSet.interval(0.0, 2.0))
    assert saddle.x[0] == pytest.approx(1.0, abs=1e-5)
    assert saddle.value == pytest.approx(1.0, abs=1e-5)


def test_per_slot_benchmark_gap():
    oracle = make_adversarial_pair()
    rounds = oracle.rounds(200)
    w = per_slot_benchmark(rounds, oracle.feasible_set)
    c_opt = solve_offline_minmax(rounds, oracle.feasible_set).value
    assert w == pytest.approx(180.0, abs=1e-6)
    assert w / c_opt == pytest.approx(1.5, abs=1e-6)


def test_per_slot_benchmark_single_sequence_is_below_offline():
    oracle = make_random_linear(3, 1, RandomSource(4))
    rounds = oracle.rounds(30)
    assert per_slot_benchmark(rounds, oracle.feasible_set) <= solve_offline_minmax(rounds, oracle.feasible_set).value + 1e-6


def test_solver_certificate_on_random_instances():
    rng = RandomSource(9)
    cases = [
        (make_random_linear(4, 3, RandomSource(10)), 40),
        (make_fair_classification(4, 3, 10, 1e-3, RandomSource(11)), 20),
    ]
    for oracle, horizon in cases:
        rounds = oracle.rounds(horizon)
        saddle = solve_offline_minmax(rounds, oracle.feasible_set)
        total = type(rounds[0]).aggregate(rounds)
        assert oracle.feasible_set.contains(saddle.x, tol=1e-12)
        for _ in range(1000):
            x = oracle.feasible_set.sample(rng)
            assert saddle.value <= float(total.values(x).max()) + 1e-6


def test_solver_handles_simplex_and_box():
    mean = QuadraticForm.linear(np.diag([0.5, 0.5, 0.5]))
    result = minimize_max(mean, FeasibleSet.simplex(3))
    assert result.value == pytest.approx(0.5 / 3, abs=1e-6)
    assert result.x == pytest.approx(np.full(3, 1 / 3), abs=1e-4)
    box = FeasibleSet.box([-1.0, 0.0], [1.0, 2.0])
    single = QuadraticForm.linear([[0.4, -0.7]])
    assert minimize_max(single, box).x == pytest.approx([-1.0, 2.0], abs=1e-6)


def test_unrefined_solve_returns_the_slsqp_point():
    family = LogisticLosses.minibatch(
        RandomSource(3).normal(size=(2, 30, 3)), np.where(RandomSource(4).random((2, 30)) < 0.5, 1.0, -1.0), 1e-3
    )
    ball = FeasibleSet.ball(np.zeros(3), 2.0)
    quick = minimize_max(family, ball, refine=False)
    full = minimize_max(family, ball)
    assert quick.method == "slsqp"
    assert ball.contains(quick.x, tol=1e-12)
    assert quick.value == pytest.approx(full.value, abs=1e-6)
    assert full.method == "slsqp+subgradient"


def test_solver_raises_with_best_iterate_at_cap():
    family = LogisticLosses.minibatch(
        RandomSource(1).normal(size=(2, 30, 3)), np.where(RandomSource(2).random((2, 30)) < 0.5, 1.0, -1.0), 1e-3
    )
    with pytest.raises(SolverConvergenceError) as info:
        minimize_max(family, FeasibleSet.ball(np.zeros(3), 2.0), max_iter=3, stall_window=200, use_polish=False, raise_on_cap=True)
    assert info.value.best_x is not None
    assert info.value.best_x.shape == (3,)


def test_expected_benchmark_experts():
    for k in (2, 3, 5):
        oracle = make_expert_losses(k, 0.2, 0.8, RandomSource(k))
        saddle, stderr = expected_benchmark(oracle)
        assert saddle.value == pytest.approx(0.5 / k, abs=1e-6)
        assert stderr == 0.0


def test_expected_benchmark_deterministic_oracle_has_no_error():
    oracle = make_adversarial_pair()
    saddle, stderr = expected_benchmark(oracle)
    assert stderr == 0.0
    # mean pair: 0.6 + 0.4x and 0.4 + 0.6x
    assert saddle.x[0] == pytest.approx(0.0, abs=1e-9)
    assert saddle.value == pytest.approx(0.6, abs=1e-9)


def test_expected_benchmark_linear_picks_a_vertex():
    box = FeasibleSet.box(np.zeros(3), np.ones(3))
    oracle = make_random_linear(3, 1, RandomSource(2), box)
    saddle, _ = expected_benchmark(oracle)
    assert saddle.x == pytest.approx(np.zeros(3), abs=1e-6)
    assert saddle.value == pytest.approx(0.0, abs=1e-6)


def test_expected_benchmark_monte_carlo():
    oracle = make_fair_classification(3, 2, 5, 1e-3, RandomSource(12))
    saddle, stderr = expected_benchmark(oracle, samples=200, rng=RandomSource(13))
    assert stderr > 0.0
    assert oracle.feasible_set.contains(saddle.x)


def test_decomposition_identity_on_adversarial_greedy_path():
    oracle = make_adversarial_pair()
    rounds = oracle.rounds(20)
    actions = np.array([[1.0] if t % 2 == 1 else [0.0] for t in range(1, 21)])
    thetas = np.full((20, 2), 0.5)
    report = decompose_regret(actions, thetas, rounds, oracle.feasible_set)
    assert report.c_alg == pytest.approx(18.0)
    assert report.c_opt == pytest.approx(12.0)
    assert report.r1 + report.r2 + report.r3 == pytest.approx(report.regret, rel=1e-9)
    assert report.r1 >= 0.0


def test_decomposition_at_the_saddle_point():
    oracle = make_adversarial_pair()
    rounds = oracle.rounds(10)
    actions = np.zeros((10, 1))
    thetas = np.tile([1.0, 0.0], (10, 1))
    report = decompose_regret(actions, thetas, rounds, oracle.feasible_set)
    assert report.regret == pytest.approx(0.0, abs=1e-9)
    assert report.r1 == pytest.approx(0.0, abs=1e-12)
    assert report.r2 >= -1e-9
    assert report.r3 <= 1e-9
    assert report.r1 + report.r2 + report.r3 == pytest.approx(0.0, abs=1e-9)


def test_decomposition_single_sequence_has_no_hedge_term():
    oracle = make_random_linear(3, 1, RandomSource(5))
    rounds = oracle.rounds(15)
    actions = np.array([oracle.feasible_set.sample(RandomSource(t)) for t in range(15)])
    report = decompose_regret(actions, np.ones((15, 1)), rounds, oracle.feasible_set)
    assert report.r1 == 0.0


def test_decomposition_length_mismatch():
    oracle = make_adversarial_pair()
    with pytest.raises(DimensionMismatchError):
        decompose_regret(np.zeros((3, 1)), np.full((4, 2), 0.5), oracle.rounds(4), oracle.feasible_set)
