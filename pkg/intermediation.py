"""Equilibrium payments, producer fee and revenue of the data intermediary."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core_model import (
    DataEnvironment,
    ModelError,
    PolicyKind,
    PolicySpec,
    Scope,
    ValidationError,
    validate,
    validate_policy,
)
from gaussian_engine import (
    GainProfile,
    anonymized_gain_closed_form,
    build_reduced_observation,
    gain,
    gain_profile,
)
from product_market import data_externality, sharing_deltas

logger = logging.getLogger(__name__)

REVENUE_IDENTITY_TOLERANCE = 1e-9
DOMINANCE_TOLERANCE = 1e-12

LARGE_MARKET_COLUMNS = [
    'n', 'consumer_payment', 'total_compensation', 'revenue_per_consumer', 'revenue_limit',
    'lm_bound', 'lm_ok', 'dnc_total', 'dnc_bound', 'dnc_ok', 'limrev_bound', 'limrev_ok',
]


@dataclass(frozen=True)
class IntermediaryOutcome:
    consumer_payment: float
    producer_fee: float
    revenue: float
    data_externality: float
    profitable: bool
    margin: float


@dataclass(frozen=True)
class PaymentSchedule:
    payments: Tuple[float, ...]
    total: float


@dataclass(frozen=True)
class DominanceReport:
    revenue_complete: float
    revenue_anonymized: float
    strict: bool


class SharingRegime(Enum):
    EFFICIENT_PROFITABLE = 'efficient and profitable'
    INEFFICIENT_PROFITABLE = 'inefficient but profitable'
    EFFICIENT_UNPROFITABLE = 'efficient but unprofitable'
    INEFFICIENT_UNPROFITABLE = 'inefficient and unprofitable'


def _check_tradable(policy: PolicySpec) -> None:
    validate_policy(policy)
    if policy.kind is PolicyKind.GROUPED:
        raise ValidationError('policy', 'Grouped policies are compared by segmentation_compare')


def equilibrium_outcome(env: DataEnvironment, policy: PolicySpec,
                        profile: Optional[GainProfile] = None) -> IntermediaryOutcome:
    """Payments, fee and revenue when every consumer and the producer accept."""
    validate(env)
    _check_tradable(policy)
    g = profile if profile is not None else gain_profile(env, policy)
    n = env.n_consumers

    consumer_payment = 0.375 * (g.g_full - g.g_loo)
    producer_fee = n * g.g_full / 4.0
    revenue = producer_fee - n * consumer_payment
    margin = 3.0 * g.g_loo - g.g_full

    delta_w = sharing_deltas(env, policy, g).delta_w
    de = data_externality(env, policy, g)
    # Revenue also equals the welfare gain net of the data externalities.
    net_of_externalities = n * (delta_w - de)
    closed_form = n * margin / 8.0
    for other in (net_of_externalities, closed_form):
        if abs(revenue - other) > REVENUE_IDENTITY_TOLERANCE * max(1.0, n):
            raise ModelError(f"revenue identity failed: {revenue} vs {other}")

    return IntermediaryOutcome(
        consumer_payment=consumer_payment,
        producer_fee=producer_fee,
        revenue=revenue,
        data_externality=de,
        profitable=margin > 0.0,
        margin=margin,
    )


def anonymization_dominance(env: DataEnvironment) -> DominanceReport:
    """Compare revenue from identity-revealing and anonymized data collection."""
    validate(env)
    complete = gain_profile(env, PolicySpec.complete())
    anonymized = gain_profile(env, PolicySpec.anonymized())
    r_complete = equilibrium_outcome(env, PolicySpec.complete(), complete).revenue
    r_anonymized = equilibrium_outcome(env, PolicySpec.anonymized(), anonymized).revenue
    if r_anonymized < r_complete - DOMINANCE_TOLERANCE * max(1.0, env.n_consumers):
        raise ModelError(f"anonymized revenue {r_anonymized} below complete revenue {r_complete}")
    strict = anonymized.g_full < complete.g_full - DOMINANCE_TOLERANCE
    return DominanceReport(r_complete, r_anonymized, strict)


def payment_gains(env: DataEnvironment, policy: PolicySpec, n: int) -> Tuple[float, float]:
    """(g_full, g_loo) of an n-consumer market with env's correlation structure."""
    sized = env.replace(n_consumers=int(n))
    if policy.kind is PolicyKind.NO_SHARING:
        return 0.0, 0.0
    if policy.kind in (PolicyKind.ANONYMIZED, PolicyKind.NOISED):
        noise = policy.added_noise
        return anonymized_gain_closed_form(
            sized.var_common, sized.var_idio,
            sized.noise_common + noise.common_noise_var,
            sized.noise_idio + noise.idio_noise_var, sized.n_consumers,
        )
    return (gain(build_reduced_observation(sized, policy, Scope.FULL)),
            gain(build_reduced_observation(sized, policy, Scope.LEAVE_ONE_OUT)))


def _increments(env: DataEnvironment, policy: PolicySpec, n_max: int) -> np.ndarray:
    """Baseline payment of a k-consumer market for k = 1..n_max."""
    increments = np.empty(n_max)
    for k in range(1, n_max + 1):
        g_full, g_loo = payment_gains(env, policy, k)
        increments[k - 1] = 0.375 * (g_full - g_loo)
    return increments


def _schedule(increments: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(increments[::-1])[::-1]


def divide_and_conquer(env: DataEnvironment, policy: PolicySpec) -> PaymentSchedule:
    """Sequential-offer payments: the i-th consumer gets the largest tail increment."""
    validate(env)
    _check_tradable(policy)
    payments = _schedule(_increments(env, policy, env.n_consumers))
    return PaymentSchedule(tuple(float(p) for p in payments), float(payments.sum()))


def _limit_gain(env: DataEnvironment, policy: PolicySpec) -> float:
    """Gain of the aggregate statistic as the market grows without bound."""
    noise = policy.added_noise
    denominator = env.var_common + env.noise_common + noise.common_noise_var
    return env.var_common ** 2 / denominator if denominator > 0.0 else 0.0


def large_market_report(env: DataEnvironment, policy: PolicySpec,
                        n_list: Sequence[int]) -> pd.DataFrame:
    """Compensation and revenue across market sizes with the asymptotic bound checks.

    The bounded-total-compensation and divide-and-conquer bounds apply to the
    aggregate policies with independent errors (beta = 0); other rows carry
    no verdict. The complete-sharing lower bound is judged at the largest N.
    """
    validate(env)
    _check_tradable(policy)
    if len(n_list) == 0:
        raise ValidationError('n_list', 'at least one market size is required')
    sizes = [int(n) for n in n_list]
    for n in sizes:
        if n < 1:
            raise ValidationError('n_list', f'market sizes must be positive, got {n}')

    aggregate = policy.kind in (PolicyKind.ANONYMIZED, PolicyKind.NOISED)
    idio_total = env.var_idio + env.noise_idio
    lm_bound = 9.0 / 8.0 * idio_total
    increments = _increments(env, policy, max(sizes)) if aggregate and env.beta == 0.0 else None
    limrev_bound = 0.375 * env.var_idio ** 2 / (1.0 + env.sigma ** 2)
    largest = max(sizes)

    rows: List[dict] = []
    for n in sizes:
        g_full, g_loo = payment_gains(env, policy, n)
        payment = 0.375 * (g_full - g_loo)
        row = {
            'n': n,
            'consumer_payment': payment,
            'total_compensation': n * payment,
            'revenue_per_consumer': (3.0 * g_loo - g_full) / 8.0,
            'revenue_limit': _limit_gain(env, policy) / 4.0 if aggregate else None,
            'lm_bound': None, 'lm_ok': None,
            'dnc_total': None, 'dnc_bound': None, 'dnc_ok': None,
            'limrev_bound': None, 'limrev_ok': None,
        }
        if aggregate and env.beta == 0.0:
            dnc_total = float(_schedule(increments[:n]).sum())
            dnc_bound = 0.75 * (1.0 + math.log(n)) * idio_total
            row.update(dnc_total=dnc_total, dnc_bound=dnc_bound, dnc_ok=bool(dnc_total <= dnc_bound + 1e-12),
                       lm_bound=lm_bound, lm_ok=bool(n * payment <= lm_bound + 1e-12))
        if policy.kind is PolicyKind.COMPLETE and n == largest:
            row.update(limrev_bound=limrev_bound, limrev_ok=bool(payment >= limrev_bound))
        rows.append(row)

    report = pd.DataFrame(rows, columns=LARGE_MARKET_COLUMNS)
    failed = [c for c in ('lm_ok', 'dnc_ok', 'limrev_ok') if report[c].eq(False).any()]
    if failed:
        logger.warning(f"Large-market bounds violated: {', '.join(failed)}")
    return report


def classify_sharing(env: DataEnvironment, policy: PolicySpec) -> SharingRegime:
    """Place a market in one of the four welfare/profitability regimes."""
    profile = gain_profile(env, policy)
    efficient = sharing_deltas(env, policy, profile).delta_w > 0.0
    profitable = equilibrium_outcome(env, policy, profile).profitable
    if efficient:
        return SharingRegime.EFFICIENT_PROFITABLE if profitable else SharingRegime.EFFICIENT_UNPROFITABLE
    return SharingRegime.INEFFICIENT_PROFITABLE if profitable else SharingRegime.INEFFICIENT_UNPROFITABLE


def profitability_onset(env: DataEnvironment, policy: PolicySpec, n_max: int) -> Optional[int]:
    """Smallest N* with positive revenue for every N in [N*, n_max], or None."""
    validate(env)
    _check_tradable(policy)
    if n_max < 1:
        raise ValidationError('n_max', f'must be at least 1, got {n_max}')
    onset = None
    for n in range(n_max, 0, -1):
        g_full, g_loo = payment_gains(env, policy, n)
        if 3.0 * g_loo - g_full <= 0.0:
            break
        onset = n
    if onset is not None:
        logger.info(f"{policy.kind.value} intermediation profitable for {onset} <= N <= {n_max}")
    return onset
