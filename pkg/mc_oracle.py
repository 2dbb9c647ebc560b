"""Monte Carlo game simulator used to verify the closed forms.

Draws the Gaussian components, forms signals, lets the producer price and
the consumers buy, and averages realized profit and utility. Draws are
generated in fixed-size shards, each from its own PCG64 stream spawned from
the run seed, so results do not depend on how shards are scheduled.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

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
    ObservationModel,
    build_consumer_observation,
    build_reduced_observation,
    gain,
    gain_profile,
    projection_coefficients,
    psd_factor,
)

logger = logging.getLogger(__name__)

MIN_DRAWS = 1000
SHARD_SIZE = 65536
MAX_SIMULATED_CONSUMERS = 64
Z_THRESHOLD = 4.0

QUANTITIES = (
    'gain_full', 'gain_loo', 'producer_surplus', 'consumer_surplus', 'delta_pi',
    'delta_u', 'delta_w', 'de', 'payment', 'offpath_price', 'offpath_price_var',
)


@dataclass(frozen=True)
class SimReport:
    draws: int
    seed: int
    shard_size: int
    shards: int
    estimates: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    comparisons: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def max_abs_z(self) -> float:
        return max((abs(z) for _, z in self.comparisons.values()), default=0.0)

    def passed(self, threshold: float = Z_THRESHOLD) -> bool:
        return self.max_abs_z() <= threshold


@dataclass(frozen=True)
class ProjectionCheck:
    empirical: float
    analytic: float
    z: float
    standard_error: float


class _MomentAccumulator:
    """Running mean and sum of squared deviations, merged shard by shard."""

    def __init__(self, width: int):
        self.count = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def add(self, block: np.ndarray) -> None:
        n_b = block.shape[0]
        mean_b = block.mean(axis=0)
        m2_b = ((block - mean_b) ** 2).sum(axis=0)
        total = self.count + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (n_b / total)
        self.m2 = self.m2 + m2_b + delta ** 2 * (self.count * n_b / total)
        self.count = total

    def standard_errors(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


def _check_draws(draws: int) -> None:
    if isinstance(draws, bool) or not isinstance(draws, int):
        raise ValidationError('draws', f'expected an integer, got {draws!r}')
    if draws < MIN_DRAWS:
        raise ValidationError('draws', f'at least {MIN_DRAWS} draws are required, got {draws}')


def _check_seed(seed: int) -> None:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ValidationError('seed', f'expected an unsigned 64-bit integer, got {seed!r}')


def _z_score(estimate: float, standard_error: float, analytic: float) -> float:
    diff = estimate - analytic
    if standard_error > 0.0:
        return diff / standard_error
    if abs(diff) <= 1e-9 * max(1.0, abs(analytic)):
        return 0.0
    raise ModelError(f"zero standard error but estimate {estimate} differs from {analytic}")


class _Draws:
    """One shard of sampled components, in deviations from the mean."""

    def __init__(self, env: DataEnvironment, policy: PolicySpec, rng: np.random.Generator, size: int):
        n = env.n_consumers
        noise = policy.added_noise
        common_sd = np.sqrt([env.var_common, env.noise_common, noise.common_noise_var])
        idio_sd = np.sqrt([env.var_idio, env.noise_idio, noise.idio_noise_var])
        common = rng.standard_normal((size, 3)) * common_sd
        idio = rng.standard_normal((size, 3, n)) * idio_sd[None, :, None]

        self.w = common[:, 0:1] + idio[:, 0]
        self.s = self.w + common[:, 1:2] + idio[:, 1]
        self.x = self.s + common[:, 2:3] + idio[:, 2]
        self.t = self.s.sum(axis=1, keepdims=True)
        self.x_total = self.x.sum(axis=1, keepdims=True)

    def feature(self, label: str) -> np.ndarray:
        features: Dict[str, Callable[[], np.ndarray]] = {
            's_i': lambda: self.s,
            'x_i': lambda: self.x,
            'sum_others': lambda: self.t - self.s,
            'T': lambda: np.broadcast_to(self.t, self.s.shape),
            'T_minus_i': lambda: self.t - self.s,
            'X': lambda: np.broadcast_to(self.x_total, self.s.shape),
            'X_minus_i': lambda: self.x_total - self.x,
        }
        if label not in features:
            raise ModelError(f"no simulated feature for observable '{label}'")
        return features[label]()

    def posterior(self, mu: float, predictor: Tuple[np.ndarray, Tuple[str, ...]]) -> np.ndarray:
        coefficients, labels = predictor
        estimate = np.full(self.s.shape, mu)
        for coefficient, label in zip(coefficients, labels):
            estimate = estimate + coefficient * self.feature(label)
        return estimate


def _predictor(obs: ObservationModel) -> Tuple[np.ndarray, Tuple[str, ...]]:
    return projection_coefficients(obs), obs.labels


def _play(w: np.ndarray, w_hat_producer: np.ndarray, w_hat_consumer: np.ndarray, cost: float):
    """Realized profit and utility per consumer for the given posteriors."""
    price = (w_hat_producer + cost) / 2.0
    quantity = w_hat_consumer - price
    profit = (price - cost) * quantity
    utility = w * quantity - quantity ** 2 / 2.0 - price * quantity
    return price, profit, utility


def simulate(env: DataEnvironment, policy: PolicySpec, draws: int, seed: int) -> SimReport:
    """Estimate surpluses, gains and payments by playing the product-market stage."""
    validate(env)
    validate_policy(policy)
    _check_draws(draws)
    _check_seed(seed)
    if policy.kind is PolicyKind.GROUPED:
        raise ValidationError('policy', 'Grouped policies are not simulated')
    if env.n_consumers > MAX_SIMULATED_CONSUMERS:
        raise ValidationError('n_consumers', f'simulation supports at most {MAX_SIMULATED_CONSUMERS} consumers')

    mu, cost = env.mu, env.cost
    producer_full = _predictor(build_reduced_observation(env, policy, Scope.FULL))
    producer_loo = _predictor(build_reduced_observation(env, policy, Scope.LEAVE_ONE_OUT))
    consumer = _predictor(build_consumer_observation(env, policy, reduced=True))
    private = _predictor(build_reduced_observation(env, policy, Scope.INDIVIDUAL_ONLY))

    shards = math.ceil(draws / SHARD_SIZE)
    streams = np.random.SeedSequence(seed).spawn(shards)
    accumulator = _MomentAccumulator(len(QUANTITIES))
    for index, stream in enumerate(streams):
        size = min(SHARD_SIZE, draws - index * SHARD_SIZE)
        d = _Draws(env, policy, np.random.Generator(np.random.PCG64(stream)), size)
        w = mu + d.w
        w_full = d.posterior(mu, producer_full)
        w_loo = d.posterior(mu, producer_loo)
        w_consumer = d.posterior(mu, consumer)
        w_private = d.posterior(mu, private)
        prior = np.full(w.shape, mu)

        _, profit_on, utility_on = _play(w, w_full, w_consumer, cost)
        price_off, _, utility_off = _play(w, w_loo, w_consumer, cost)
        _, profit_none, utility_none = _play(w, prior, w_private, cost)

        columns: List[np.ndarray] = [
            ((w_full - mu) ** 2).mean(axis=1),
            ((w_loo - mu) ** 2).mean(axis=1),
            profit_on.mean(axis=1),
            utility_on.mean(axis=1),
            (profit_on - profit_none).mean(axis=1),
            (utility_on - utility_none).mean(axis=1),
            (profit_on + utility_on - profit_none - utility_none).mean(axis=1),
            (utility_off - utility_none).mean(axis=1),
            (utility_off - utility_on).mean(axis=1),
            price_off[:, 0],
            (price_off[:, 0] - (mu + cost) / 2.0) ** 2,
        ]
        accumulator.add(np.column_stack(columns))
        logger.debug(f"Simulated shard {index + 1}/{shards} ({size} draws)")

    g = gain_profile(env, policy, reduced=True)
    m2 = env.margin ** 2
    learning = 0.5 * (g.g_consumer - g.g_individual)
    analytic = {
        'gain_full': g.g_full,
        'gain_loo': g.g_loo,
        'producer_surplus': (g.g_full + m2) / 4.0,
        'consumer_surplus': 0.5 * (g.g_consumer + m2) - 0.375 * (g.g_full + m2),
        'delta_pi': g.g_full / 4.0,
        'delta_u': learning - 0.375 * g.g_full,
        'delta_w': learning - 0.125 * g.g_full,
        'de': learning - 0.375 * g.g_loo,
        'payment': 0.375 * (g.g_full - g.g_loo),
        'offpath_price': (mu + cost) / 2.0,
        'offpath_price_var': g.g_loo / 4.0,
    }

    errors = accumulator.standard_errors()
    estimates, comparisons = {}, {}
    for k, name in enumerate(QUANTITIES):
        mean, se = float(accumulator.mean[k]), float(errors[k])
        estimates[name] = (mean, se)
        comparisons[name] = (analytic[name], _z_score(mean, se, analytic[name]))
    report = SimReport(draws=draws, seed=seed, shard_size=SHARD_SIZE, shards=shards,
                       estimates=estimates, comparisons=comparisons)
    logger.info(f"Simulated {draws} draws of {policy.kind.value}: max |z| = {report.max_abs_z():.3f}")
    return report


def projection_check(obs: ObservationModel, draws: int, seed: int) -> ProjectionCheck:
    """Fit the linear projection by least squares on a Gaussian sample of the joint law."""
    _check_draws(draws)
    _check_seed(seed)
    analytic = gain(obs)
    if obs.dim == 0 or obs.target_var == 0.0:
        return ProjectionCheck(empirical=0.0, analytic=analytic, z=0.0, standard_error=0.0)
    if draws <= obs.dim:
        raise ModelError(f"{draws} draws cannot identify {obs.dim} projection coefficients")

    factor = psd_factor(obs.joint_cov())
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    sample = rng.standard_normal((draws, factor.shape[1])) @ factor.T
    target, observables = sample[:, 0], sample[:, 1:]
    coefficients, _, _, _ = np.linalg.lstsq(observables, target, rcond=None)
    fitted_sq = (observables @ coefficients) ** 2
    empirical = float(fitted_sq.mean())
    standard_error = float(fitted_sq.std(ddof=1) / math.sqrt(draws))
    return ProjectionCheck(
        empirical=empirical,
        analytic=analytic,
        z=_z_score(empirical, standard_error, analytic),
        standard_error=standard_error,
    )
