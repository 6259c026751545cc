import logging
import math
import os
import sys
from collections import defaultdict

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
from app.core.rng import RandomSource, run_seed, sample_unit_sphere
from app.core.schedules import Schedules, ScheduleKind, StepSchedule
from app.models.experiment import AlgorithmKind, ExperimentConfig
from app.services.algorithms import (
    FeedbackMode,
    one_point_estimate,
    run_online,
    standalone_hedge,
    two_point_estimate,
)
from app.services.benchmark import decompose_regret, per_slot_benchmark, solve_offline_minmax
from app.services.losses import make_adversarial_pair
from app.services.runner import expected_regret, prepare, run_experiment

logger = logging.getLogger(__name__)

BASE_SEED = 20240601


def mean_regret_by(records, key=lambda r: r.T):
    grouped = defaultdict(list)
    for record in records:
        grouped[key(record)].append(record.regret)
    return {k: float(np.mean(v)) for k, v in grouped.items()}


def mean_expected_regret_by(config, records):
    grouped = defaultdict(list)
    for record, regret in zip(records, expected_regret(config, records)):
        grouped[record.T].append(regret)
    return {k: float(np.mean(v)) for k, v in grouped.items()}


def loglog_slope(horizons, regrets):
    return float(np.polyfit(np.log(horizons), np.log(regrets), 1)[0])


def greedy_on_adversarial_pair(n):
    oracle = make_adversarial_pair()
    bounds = oracle.problem_bounds()
    schedules = Schedules(
        StepSchedule(ScheduleKind.FULL_X, bounds, 2, 1), StepSchedule(ScheduleKind.FULL_THETA, bounds, 2, 1)
    )
    trajectory = run_online(AlgorithmKind.GREEDY, FeedbackMode.FULL, oracle, oracle.feasible_set, schedules, bounds, 2 * n)
    return oracle, trajectory


@pytest.mark.parametrize("n", [10, 100, 1000])
def test_greedy_regret_grows_linearly_on_adversarial_pair(n):
    oracle, trajectory = greedy_on_adversarial_pair(n)
    saddle = solve_offline_minmax(oracle.rounds(2 * n), oracle.feasible_set)
    assert trajectory.c_alg == pytest.approx(1.8 * n, abs=1e-9)
    assert saddle.value == pytest.approx(1.2 * n, abs=1e-6)
    assert saddle.x[0] == pytest.approx(0.0, abs=1e-6)
    assert trajectory.c_alg - saddle.value == pytest.approx(0.6 * n, abs=1e-6)


def test_per_slot_benchmark_overshoots_by_half():
    oracle = make_adversarial_pair()
    rounds = oracle.rounds(200)
    ratio = per_slot_benchmark(rounds, oracle.feasible_set) / solve_offline_minmax(rounds, oracle.feasible_set).value
    assert ratio == pytest.approx(1.5, abs=1e-6)


def random_configs(count=50):
    configs = []
    for i in range(count):
        experiment = ("linear", "quadratic", "experts", "fairclf")[i % 4]
        k = (1, 2, 10)[(i // 4) % 3]
        horizon = (100, 1000)[(i // 2) % 2]
        if experiment == "experts":
            k = max(k, 2)
        fields = {"horizons": [horizon], "k": k, "seeds": 1}
        if experiment == "linear":
            fields["d"] = 2 + i % 4
        if experiment == "fairclf":
            fields.update(d=3, m=5, horizons=[100])
        configs.append((ExperimentConfig.from_preset(experiment, **fields), run_seed(BASE_SEED, i)))
    return configs


def decomposed_run(config, seed):
    oracle, feasible_set, bounds, schedules = prepare(config, seed)
    horizon = config.horizons[0]
    trajectory = run_online(config.algo, FeedbackMode.FULL, oracle, feasible_set, schedules, bounds, horizon)
    report = decompose_regret(
        trajectory.actions,
        trajectory.thetas,
        oracle.rounds(horizon),
        feasible_set,
        final_theta=trajectory.final_theta,
        bounds=bounds,
        eta_x=trajectory.eta_x,
        eta_theta=trajectory.eta_theta,
    )
    return trajectory, report


@pytest.mark.parametrize("horizon", [200, 2000])
def test_weighted_benchmark_gap_bounds_on_adversarial_pair(horizon):
    config = ExperimentConfig.from_preset("adversarial", algo="hedge-ogd", horizons=[horizon], seeds=1)
    _, report = decomposed_run(config, run_seed(BASE_SEED, 0))
    diagnostics = report.diagnostics
    assert report.r3 <= diagnostics.adversarial_mismatch_bound
    assert report.r3 <= diagnostics.dispersion_bound
    assert diagnostics.dispersion_bound <= diagnostics.variation_bound
    assert diagnostics.theta_dispersion > 0.0


@pytest.mark.slow
def test_decomposition_and_bounds_on_random_configurations():
    for config, seed in random_configs():
        trajectory, report = decomposed_run(config, seed)
        label = f"{config.experiment.value} K={config.k} T={config.horizons[0]}"
        scale = max(1.0, abs(report.c_alg))
        assert report.c_alg == trajectory.c_alg, label
        assert report.r1 + report.r2 + report.r3 == pytest.approx(report.regret, abs=1e-9 * scale), label
        assert report.r1 >= 0.0, label

        diagnostics = report.diagnostics
        assert report.r1 <= diagnostics.hedge_regret_bound, label
        assert report.r2 <= diagnostics.ogd_regret_bound + 1e-6, label
        if report.r2 > diagnostics.ogd_regret_bound_tight:
            logger.info(f"{label}: R2 {report.r2:.4g} above the DG*sqrt(T) form")

        assert diagnostics.hedge_step_excess <= 1e-12, label
        assert diagnostics.pinsker_excess <= 1e-12, label


@pytest.mark.slow
def test_weighted_benchmark_gap_is_nonpositive_on_average():
    config = ExperimentConfig.from_preset("linear", k=10, horizons=[500], seeds=200)
    r3 = np.array([record.R3 for record in run_experiment(config)])
    stderr = r3.std(ddof=1) / math.sqrt(r3.size)
    assert r3.mean() <= 3.0 * stderr


@pytest.mark.slow
def test_full_information_regret_scales_like_sqrt_t_and_log_k():
    config = ExperimentConfig.from_preset("linear", horizons=[250, 1000, 4000], seeds=20, decompose=False)
    means = mean_expected_regret_by(config, run_experiment(config))
    slope = loglog_slope([250, 1000, 4000], [means[250], means[1000], means[4000]])
    assert 0.35 <= slope <= 0.70

    by_k = {}
    for k in (1, 10, 100):
        k_config = ExperimentConfig.from_preset("linear", k=k, horizons=[1000], seeds=20, decompose=False)
        by_k[k] = mean_expected_regret_by(k_config, run_experiment(k_config))[1000]
    assert by_k[1] <= by_k[10] <= by_k[100]
    assert by_k[100] / by_k[1] <= 4.0


def test_bandit_estimators_are_unbiased():
    rng = RandomSource(2718)
    g = np.array([1.0, -0.5, 0.25, 2.0, 0.0])
    delta = 0.5
    one_point = np.zeros(5)
    two_point = np.zeros(5)
    n = 100000
    for _ in range(n):
        u = sample_unit_sphere(rng, 5)
        one_point += one_point_estimate(g @ (delta * u), u, delta)
        two_point += two_point_estimate(g @ (delta * u), g @ (-delta * u), u, delta)
    for total in (one_point, two_point):
        assert np.linalg.norm(total / n - g) <= 0.05 * np.linalg.norm(g)


@pytest.mark.slow
def test_bandit_regret_scaling():
    horizons = [250, 1000, 4000]
    fields = dict(k=5, d=5, horizons=horizons, seeds=20, decompose=False)
    two = mean_regret_by(run_experiment(ExperimentConfig.from_preset("linear", feedback="bandit2", **fields)))
    one = mean_regret_by(run_experiment(ExperimentConfig.from_preset("linear", feedback="bandit1", **fields)))
    assert loglog_slope(horizons, [two[t] for t in horizons]) <= 0.75
    assert loglog_slope(horizons, [one[t] for t in horizons]) <= 0.95
    assert one[4000] > two[4000]


@pytest.mark.slow
def test_standalone_hedge_guarantee():
    rng = RandomSource(31415)
    horizon = 2000
    for n in (2, 16):
        eta = math.sqrt(2.0 * math.log(n) / horizon)
        limit = math.sqrt(2.0 * horizon * math.log(n))
        for _ in range(100):
            regret, _ = standalone_hedge(rng.random((horizon, n)), eta)
            assert regret <= limit


@pytest.mark.slow
@pytest.mark.parametrize("k", [2, 4])
def test_multi_and_hedge_ogd_are_both_sublinear_on_experts(k):
    config = ExperimentConfig.from_preset("experts", k=k, horizons=[1000], seeds=20, decompose=False)
    hedge = mean_regret_by(run_experiment(config))[1000]
    multi_config = ExperimentConfig.from_preset("experts", algo="multi", k=k, horizons=[1000], seeds=20, decompose=False)
    multi = mean_regret_by(run_experiment(multi_config))[1000]
    for regret in (hedge, multi):
        assert regret > 0.0
        assert regret / 1000 <= 0.05
    # MULTI keeps the cumulative losses balanced; its regret stays bounded in T
    assert multi < hedge
    assert abs(hedge - multi) / 1000 <= 0.01


@pytest.mark.slow
def test_strongly_convex_growth_depends_on_k():
    fields = dict(horizons=[1000, 4000], seeds=10, decompose=False, per_slot=False)
    single = mean_regret_by(run_experiment(ExperimentConfig.from_preset("quadratic", k=1, **fields)))
    many = mean_regret_by(run_experiment(ExperimentConfig.from_preset("quadratic", k=10, **fields)))
    assert single[4000] / single[1000] <= 1.8
    assert many[4000] / many[1000] >= 1.6
