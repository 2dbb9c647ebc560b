import numpy as np
import pytest

from conftest import environment_grid
from core_model import DataEnvironment, GroupedEnvironment, PolicyKind, PolicySpec, ValidationError
from gaussian_engine import gain_profile
from intermediation import (
    LARGE_MARKET_COLUMNS,
    SharingRegime,
    anonymization_dominance,
    classify_sharing,
    divide_and_conquer,
    equilibrium_outcome,
    large_market_report,
    payment_gains,
    profitability_onset,
)


def test_common_preferences_outcome(common_preferences):
    outcome = equilibrium_outcome(common_preferences, PolicySpec.complete())
    assert outcome.consumer_payment == pytest.approx(1 / 16)
    assert outcome.producer_fee == pytest.approx(1 / 3)
    assert outcome.revenue == pytest.approx(5 / 24)
    assert outcome.data_externality == pytest.approx(-5 / 48)
    assert outcome.profitable


def test_anonymized_outcome_can_lose_money(mixed):
    outcome = equilibrium_outcome(mixed, PolicySpec.anonymized())
    assert outcome.revenue == pytest.approx(-0.01875)
    assert not outcome.profitable


@pytest.mark.parametrize('n', [1, 2, 5, 10])
def test_independent_consumers_are_never_profitable(n):
    env = DataEnvironment(n_consumers=n, alpha=0.0, beta=0.0, sigma=1.0)
    for policy in (PolicySpec.complete(), PolicySpec.anonymized()):
        g = gain_profile(env, policy)
        outcome = equilibrium_outcome(env, policy, g)
        assert outcome.revenue == pytest.approx(-n * g.g_full / 8.0)
        assert not outcome.profitable


def test_no_sharing_earns_nothing(mixed):
    outcome = equilibrium_outcome(mixed, PolicySpec.no_sharing())
    assert (outcome.consumer_payment, outcome.producer_fee, outcome.revenue) == (0.0, 0.0, 0.0)
    assert not outcome.profitable


def test_grouped_policy_is_not_traded(mixed):
    genv = GroupedEnvironment.symmetric(2, 2, 0.5, 0.5, 1.0)
    with pytest.raises(ValidationError):
        equilibrium_outcome(mixed, PolicySpec(PolicyKind.GROUPED, groups=genv))


def test_revenue_is_fee_minus_compensation():
    for env in environment_grid():
        for policy in (PolicySpec.complete(), PolicySpec.anonymized(), PolicySpec.noised(1.0)):
            outcome = equilibrium_outcome(env, policy)
            n = env.n_consumers
            assert outcome.revenue == pytest.approx(
                outcome.producer_fee - n * outcome.consumer_payment, abs=1e-12)
            assert outcome.consumer_payment >= -1e-12
            assert outcome.profitable == (outcome.margin > 0.0)


def test_anonymization_weakly_dominates():
    for env in environment_grid():
        report = anonymization_dominance(env)
        assert report.revenue_anonymized >= report.revenue_complete - 1e-12


def test_anonymization_is_strict_whenever_it_loses_information():
    strict = 0
    for env in environment_grid():
        complete = gain_profile(env, PolicySpec.complete())
        anonymized = gain_profile(env, PolicySpec.anonymized())
        report = anonymization_dominance(env)
        if anonymized.g_full < complete.g_full - 1e-9:
            strict += 1
            assert report.strict
            assert report.revenue_anonymized > report.revenue_complete
    assert strict > 0


def test_anonymization_strictly_dominates_with_idiosyncratic_preferences():
    env = DataEnvironment(n_consumers=5, alpha=0.5, beta=0.0, sigma=1.0)
    report = anonymization_dominance(env)
    assert report.strict
    assert report.revenue_anonymized > report.revenue_complete


def test_anonymization_is_neutral_for_one_consumer():
    env = DataEnvironment(n_consumers=1, alpha=0.4, beta=0.3, sigma=1.0)
    report = anonymization_dominance(env)
    assert not report.strict
    assert report.revenue_anonymized == pytest.approx(report.revenue_complete)


def test_payment_gains_follow_market_size(mixed):
    assert payment_gains(mixed, PolicySpec.anonymized(), 2) == pytest.approx((0.45, 0.125))
    assert payment_gains(mixed, PolicySpec.no_sharing(), 7) == (0.0, 0.0)
    g = gain_profile(mixed.replace(n_consumers=6), PolicySpec.complete())
    assert payment_gains(mixed, PolicySpec.complete(), 6) == pytest.approx((g.g_full, g.g_loo))


def test_divide_and_conquer_with_common_preferences(common_preferences):
    schedule = divide_and_conquer(common_preferences, PolicySpec.complete())
    assert schedule.payments == pytest.approx((0.1875, 0.0625))
    assert schedule.total == pytest.approx(0.25)


def test_divide_and_conquer_single_consumer():
    env = DataEnvironment(n_consumers=1, alpha=1.0, beta=0.0, sigma=1.0)
    assert divide_and_conquer(env, PolicySpec.complete()).payments == pytest.approx((0.1875,))


def test_divide_and_conquer_payments_are_nonincreasing():
    for env in environment_grid(sizes=(2, 5, 10)):
        for policy in (PolicySpec.complete(), PolicySpec.anonymized()):
            schedule = divide_and_conquer(env, policy)
            payments = np.array(schedule.payments)
            assert np.all(np.diff(payments) <= 1e-15)
            assert schedule.total == pytest.approx(payments.sum())
            # The last consumer is paid the baseline amount.
            baseline = equilibrium_outcome(env, policy).consumer_payment
            assert payments[-1] == pytest.approx(baseline, abs=1e-9)
            assert schedule.total >= env.n_consumers * baseline - 1e-9


def test_divide_and_conquer_costs_more_than_uniform_payments(common_preferences):
    schedule = divide_and_conquer(common_preferences, PolicySpec.complete())
    assert schedule.total > 2 * equilibrium_outcome(common_preferences, PolicySpec.complete()).consumer_payment


@pytest.mark.parametrize('beta', [0.0, 1.0])
def test_complete_sharing_profitable_with_strong_common_preferences(beta):
    env = DataEnvironment(n_consumers=1, alpha=0.95, beta=beta, sigma=1.0)
    onset = profitability_onset(env, PolicySpec.complete(), 1000)
    assert onset is not None
    assert equilibrium_outcome(env.replace(n_consumers=onset), PolicySpec.complete()).profitable
    if onset > 1:
        assert not equilibrium_outcome(env.replace(n_consumers=onset - 1), PolicySpec.complete()).profitable


@pytest.mark.parametrize('alpha', [0.05, 0.1, 0.25])
def test_anonymized_sharing_becomes_profitable_in_large_markets(alpha):
    env = DataEnvironment(n_consumers=1, alpha=alpha, beta=0.0, sigma=1.0)
    onset = profitability_onset(env, PolicySpec.anonymized(), 1000)
    assert onset is not None and onset > 1
    for n in (onset, onset + 1, 1000):
        assert equilibrium_outcome(env.replace(n_consumers=n), PolicySpec.anonymized()).revenue > 0.0
    assert equilibrium_outcome(env.replace(n_consumers=onset - 1), PolicySpec.anonymized()).revenue <= 0.0


def test_onset_absent_without_correlation():
    env = DataEnvironment(n_consumers=1, alpha=0.0, beta=0.0, sigma=1.0)
    assert profitability_onset(env, PolicySpec.anonymized(), 50) is None
    with pytest.raises(ValidationError):
        profitability_onset(env, PolicySpec.anonymized(), 0)


def test_large_market_bounds_for_aggregate_data():
    env = DataEnvironment(n_consumers=1, alpha=0.5, beta=0.0, sigma=1.0)
    report = large_market_report(env, PolicySpec.anonymized(), [1, 10, 100, 1000, 10000])
    assert list(report.columns) == LARGE_MARKET_COLUMNS
    assert report['lm_ok'].all()
    assert report['dnc_ok'].all()
    last = report.iloc[-1]
    assert last['consumer_payment'] < 1e-3
    assert last['revenue_per_consumer'] == pytest.approx(last['revenue_limit'], rel=0.01)
    assert last['revenue_limit'] == pytest.approx(0.125)
    assert report['limrev_ok'].isna().all()


def test_compensation_bound_needs_independent_errors():
    env = DataEnvironment(n_consumers=1, alpha=0.5, beta=0.5, sigma=1.0)
    report = large_market_report(env, PolicySpec.anonymized(), [1, 10, 100])
    assert report['lm_ok'].isna().all()
    assert report['dnc_ok'].isna().all()
    assert report['dnc_total'].isna().all()
    assert report['total_compensation'].notna().all()


def test_correlated_errors_report_no_violation(caplog):
    env = DataEnvironment(n_consumers=1, alpha=0.9, beta=0.5, sigma=0.5)
    for policy in (PolicySpec.anonymized(), PolicySpec.noised(1.0)):
        report = large_market_report(env, policy, [2, 10, 100, 1000])
        assert not report['dnc_ok'].eq(False).any()
        assert not report['lm_ok'].eq(False).any()
    assert 'bounds violated' not in caplog.text


@pytest.mark.parametrize('alpha', [0.25, 0.5, 0.75])
def test_complete_sharing_keeps_paying_in_large_markets(alpha):
    env = DataEnvironment(n_consumers=1, alpha=alpha, beta=0.0, sigma=1.0)
    report = large_market_report(env, PolicySpec.complete(), [10, 10000])
    assert bool(report.iloc[-1]['limrev_ok'])
    assert report.iloc[-1]['consumer_payment'] >= report.iloc[-1]['limrev_bound']
    assert report.iloc[0]['limrev_ok'] is None or np.isnan(report.iloc[0]['limrev_ok'])
    assert report['lm_ok'].isna().all()


def test_large_market_report_needs_sizes(mixed):
    with pytest.raises(ValidationError):
        large_market_report(mixed, PolicySpec.anonymized(), [])
    with pytest.raises(ValidationError):
        large_market_report(mixed, PolicySpec.anonymized(), [0, 5])


def test_classify_sharing():
    env = DataEnvironment(n_consumers=3, alpha=0.0, beta=0.0, sigma=1.0)
    assert classify_sharing(env, PolicySpec.complete()) is SharingRegime.INEFFICIENT_UNPROFITABLE
    env = DataEnvironment(n_consumers=10, alpha=1.0, beta=0.0, sigma=1.0)
    assert classify_sharing(env, PolicySpec.complete()) is SharingRegime.EFFICIENT_PROFITABLE
