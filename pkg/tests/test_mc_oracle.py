import numpy as np
import pytest

from core_model import (
    DataEnvironment,
    GroupedEnvironment,
    PolicyKind,
    PolicySpec,
    Scope,
    ValidationError,
)
from gaussian_engine import ObservationModel, build_observation
from mc_oracle import QUANTITIES, SHARD_SIZE, projection_check, simulate

DRAWS = 200_000


def test_same_seed_same_report(mixed):
    first = simulate(mixed, PolicySpec.complete(), 5000, seed=11)
    second = simulate(mixed, PolicySpec.complete(), 5000, seed=11)
    assert first.estimates == second.estimates
    assert simulate(mixed, PolicySpec.complete(), 5000, seed=12).estimates != first.estimates


def test_report_layout(mixed):
    report = simulate(mixed, PolicySpec.anonymized(), SHARD_SIZE + 10, seed=3)
    assert report.shards == 2
    assert report.shard_size == SHARD_SIZE
    assert set(report.estimates) == set(QUANTITIES)
    assert set(report.comparisons) == set(QUANTITIES)


@pytest.mark.parametrize('draws', [10, 999, 1000.0, True, '5000'])
def test_draw_count_is_validated(mixed, draws):
    with pytest.raises(ValidationError) as excinfo:
        simulate(mixed, PolicySpec.complete(), draws, seed=0)
    assert excinfo.value.field == 'draws'


@pytest.mark.parametrize('seed', [-1, 2 ** 64, 1.5, 'abc'])
def test_seed_is_validated(mixed, seed):
    with pytest.raises(ValidationError):
        simulate(mixed, PolicySpec.complete(), 1000, seed=seed)


def test_unsupported_markets(mixed):
    genv = GroupedEnvironment.symmetric(2, 2, 0.5, 0.5, 1.0)
    with pytest.raises(ValidationError):
        simulate(mixed, PolicySpec(PolicyKind.GROUPED, groups=genv), 1000, seed=0)
    with pytest.raises(ValidationError):
        simulate(mixed.replace(n_consumers=65), PolicySpec.complete(), 1000, seed=0)


def test_no_sharing_changes_nothing(mixed):
    report = simulate(mixed, PolicySpec.no_sharing(), 5000, seed=5)
    for name in ('gain_full', 'gain_loo', 'delta_pi', 'delta_u', 'delta_w', 'de', 'payment',
                 'offpath_price_var'):
        assert report.estimates[name] == (0.0, 0.0)
    assert report.passed()


@pytest.mark.parametrize('policy', [PolicySpec.complete(), PolicySpec.anonymized(),
                                    PolicySpec.noised(2.0, 0.5)])
def test_simulation_agrees_with_closed_forms(mixed, policy):
    report = simulate(mixed.replace(n_consumers=3), policy, DRAWS, seed=2024)
    assert report.passed(), report.comparisons


def test_common_preferences_simulation(common_preferences):
    report = simulate(common_preferences, PolicySpec.complete(), DRAWS, seed=7)
    mean, se = report.estimates['payment']
    assert mean == pytest.approx(1 / 16, abs=5 * se)
    assert report.comparisons['payment'][0] == pytest.approx(1 / 16)
    assert report.passed()


def test_offpath_price_uses_the_remaining_reports():
    env = DataEnvironment(n_consumers=4, alpha=0.5, beta=0.0, sigma=1.0)
    for policy in (PolicySpec.complete(), PolicySpec.anonymized()):
        report = simulate(env, policy, DRAWS, seed=19)
        analytic, z = report.comparisons['offpath_price']
        assert analytic == pytest.approx(env.mu / 2.0)
        assert abs(z) <= 4.0
        assert abs(report.comparisons['offpath_price_var'][1]) <= 4.0


def test_common_experience_externality():
    env = DataEnvironment(n_consumers=3, alpha=0.0, beta=1.0, sigma=2.0)
    for policy in (PolicySpec.complete(), PolicySpec.anonymized(), PolicySpec.noised(1.0, 0.25)):
        report = simulate(env, policy, DRAWS, seed=31)
        analytic, z = report.comparisons['de']
        if policy.kind is PolicyKind.COMPLETE:
            assert analytic > 0.0
        assert abs(z) <= 4.0
        assert report.passed(), report.comparisons


def test_standard_error_shrinks_with_draws(mixed):
    small = simulate(mixed, PolicySpec.complete(), 20_000, seed=1).estimates['producer_surplus'][1]
    large = simulate(mixed, PolicySpec.complete(), 80_000, seed=1).estimates['producer_surplus'][1]
    assert 0.4 < large / small < 0.6


def test_projection_of_a_single_signal():
    env = DataEnvironment(n_consumers=1, alpha=0.4, beta=0.0, sigma=1.0)
    check = projection_check(build_observation(env, PolicySpec.complete(), Scope.FULL), 100_000, seed=9)
    assert check.analytic == pytest.approx(0.5)
    assert abs(check.z) <= 4.0
    assert check.standard_error > 0.0


def test_projection_of_the_sum(mixed):
    check = projection_check(build_observation(mixed, PolicySpec.anonymized(), Scope.FULL), 100_000, seed=4)
    assert check.analytic == pytest.approx(0.45)
    assert abs(check.z) <= 4.0


def test_projection_with_a_degenerate_target():
    obs = ObservationModel(np.zeros(1), np.array([[1.0]]), 0.0)
    check = projection_check(obs, 1000, seed=0)
    assert (check.empirical, check.analytic, check.z) == (0.0, 0.0, 0.0)


def _panel():
    envs = [
        DataEnvironment(n_consumers=2, alpha=1.0, beta=0.0, sigma=1.0),
        DataEnvironment(n_consumers=3, alpha=0.0, beta=1.0, sigma=2.0),
        DataEnvironment(n_consumers=5, alpha=0.25, beta=0.5, sigma=2.0),
        DataEnvironment(n_consumers=10, alpha=0.75, beta=1.0, sigma=0.5, cost=2.0),
    ]
    policies = [PolicySpec.complete(), PolicySpec.anonymized(), PolicySpec.noised(1.0, 0.25)]
    return [(env, policy) for env in envs for policy in policies]


@pytest.mark.slow
@pytest.mark.parametrize('env, policy', _panel())
def test_million_draw_panel(env, policy):
    report = simulate(env, policy, 1_000_000, seed=20240101)
    assert report.passed(), report.comparisons
