"""Linear-quadratic product market: prices, quantities and expected surpluses."""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

from core_model import (
    ContractError,
    DataEnvironment,
    GroupedEnvironment,
    PolicyKind,
    PolicySpec,
    ValidationError,
    validate,
)
from gaussian_engine import GainProfile, gain_profile

logger = logging.getLogger(__name__)

# Slack allowed when checking that producer information is nested in the consumer's.
NESTING_TOLERANCE = 1e-10


@dataclass(frozen=True)
class MarketOutcome:
    producer_surplus: float
    consumer_surplus: float
    total_surplus: float
    g_consumer: float
    g_producer: float


class SharingDeltas(NamedTuple):
    delta_pi: float
    delta_u: float
    delta_w: float


def pointwise_equilibrium(w_hat_producer: float, w_hat_consumer: float, cost: float):
    """Return (price, quantity) for one consumer given both posterior means.

    Negative prices and quantities are valid outcomes and are not clipped.
    """
    price = (w_hat_producer + cost) / 2.0
    quantity = w_hat_consumer - price
    return price, quantity


def surpluses(g_consumer: float, g_producer: float,
              env: Union[DataEnvironment, GroupedEnvironment]) -> MarketOutcome:
    """Expected per-consumer surpluses when the producer prices on a coarser posterior."""
    if g_producer > g_consumer + NESTING_TOLERANCE * max(1.0, abs(g_consumer)):
        raise ContractError(
            f"producer gain {g_producer} exceeds consumer gain {g_consumer}; "
            "the producer must not be better informed than the consumer"
        )
    m2 = (env.mu - env.cost) ** 2
    producer = (g_producer + m2) / 4.0
    consumer = 0.5 * (g_consumer + m2) - 0.375 * (g_producer + m2)
    return MarketOutcome(
        producer_surplus=producer,
        consumer_surplus=consumer,
        total_surplus=producer + consumer,
        g_consumer=g_consumer,
        g_producer=g_producer,
    )


def _profile(env: DataEnvironment, policy: PolicySpec, profile: Optional[GainProfile]) -> GainProfile:
    validate(env)
    if policy.kind is PolicyKind.GROUPED:
        raise ValidationError('policy', 'Grouped policies are compared by segmentation_compare')
    return profile if profile is not None else gain_profile(env, policy)


def sharing_deltas(env: DataEnvironment, policy: PolicySpec,
                   profile: Optional[GainProfile] = None) -> SharingDeltas:
    """Per-consumer change in producer, consumer and total surplus against no sharing."""
    g = _profile(env, policy, profile)
    shared = surpluses(g.g_consumer, g.g_full, env)
    private = surpluses(g.g_individual, 0.0, env)
    learning = 0.5 * (g.g_consumer - g.g_individual)
    # Closed forms; the surplus differences above agree up to rounding in m^2.
    delta_pi = g.g_full / 4.0
    delta_u = learning - 0.375 * g.g_full
    delta_w = learning - 0.125 * g.g_full
    drift = abs((shared.total_surplus - private.total_surplus) - delta_w)
    if drift > 1e-6 * max(1.0, shared.total_surplus):
        logger.warning(f"Surplus difference drifts from closed form by {drift:.3e}")
    return SharingDeltas(delta_pi, delta_u, delta_w)


def data_externality(env: DataEnvironment, policy: PolicySpec,
                     profile: Optional[GainProfile] = None) -> float:
    """Change in consumer i's surplus caused by the other consumers' data alone."""
    g = _profile(env, policy, profile)
    return 0.5 * (g.g_consumer - g.g_individual) - 0.375 * g.g_loo
