"""Domain parameter types shared by every other module.

The additive data structure: w_i = theta + theta_i, e_i = eps + eps_i and
s_i = w_i + sigma * e_i, with var[w_i] = var[e_i] = 1 and pairwise
correlations alpha (fundamentals) and beta (errors).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

logger = logging.getLogger(__name__)

DEFAULT_MU = 10.0
DEFAULT_COST = 0.0


class ValidationError(ValueError):
    """Raised when an input violates a model invariant; names the field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class ModelError(ArithmeticError):
    """Raised when a numerical computation cannot be carried out exactly."""


class ContractError(ValueError):
    """Raised when a formula is called outside the regime it holds in."""


class PolicyKind(Enum):
    NO_SHARING = 'NoSharing'
    COMPLETE = 'Complete'
    ANONYMIZED = 'Anonymized'
    GROUPED = 'Grouped'
    NOISED = 'Noised'

    @classmethod
    def parse(cls, text: str) -> 'PolicyKind':
        for kind in cls:
            if kind.value.lower() == text.strip().lower():
                return kind
        names = ', '.join(k.value for k in cls)
        raise ValidationError('policy', f"unknown policy '{text}' (expected one of {names})")


class Scope(Enum):
    FULL = 'Full'
    LEAVE_ONE_OUT = 'LeaveOneOut'
    INDIVIDUAL_ONLY = 'IndividualOnly'


@dataclass(frozen=True)
class DataEnvironment:
    n_consumers: int
    alpha: float
    beta: float
    sigma: float
    mu: float = DEFAULT_MU
    cost: float = DEFAULT_COST

    @property
    def var_common(self) -> float:
        return self.alpha

    @property
    def var_idio(self) -> float:
        return 1.0 - self.alpha

    @property
    def noise_common(self) -> float:
        """Variance of sigma * eps."""
        return self.sigma ** 2 * self.beta

    @property
    def noise_idio(self) -> float:
        """Variance of sigma * eps_i."""
        return self.sigma ** 2 * (1.0 - self.beta)

    @property
    def margin(self) -> float:
        return self.mu - self.cost

    def replace(self, **changes) -> 'DataEnvironment':
        values = {
            'n_consumers': self.n_consumers, 'alpha': self.alpha, 'beta': self.beta,
            'sigma': self.sigma, 'mu': self.mu, 'cost': self.cost,
        }
        values.update(changes)
        return DataEnvironment(**values)

    def signal_covariances(self) -> Tuple[float, float]:
        """Return (var(s_i), cov(s_i, s_j)) for i != j."""
        return 1.0 + self.sigma ** 2, self.alpha + self.sigma ** 2 * self.beta


@dataclass(frozen=True)
class NoiseDesign:
    common_noise_var: float = 0.0
    idio_noise_var: float = 0.0


@dataclass(frozen=True)
class GroupedEnvironment:
    group_sizes: Tuple[int, ...]
    common_vars: Tuple[float, ...]
    idio_vars: Tuple[float, ...]
    noise_scales: Tuple[float, ...]
    mu: float = DEFAULT_MU
    cost: float = DEFAULT_COST

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def n_consumers(self) -> int:
        return sum(self.group_sizes)

    @classmethod
    def symmetric(cls, n_groups: int, group_size: int, common_var: float,
                  idio_var: float, noise_scale: float, **kwargs) -> 'GroupedEnvironment':
        return cls(
            group_sizes=(group_size,) * n_groups,
            common_vars=(common_var,) * n_groups,
            idio_vars=(idio_var,) * n_groups,
            noise_scales=(noise_scale,) * n_groups,
            **kwargs,
        )

    def resized(self, group_size: int) -> 'GroupedEnvironment':
        return GroupedEnvironment(
            group_sizes=(group_size,) * self.n_groups,
            common_vars=self.common_vars,
            idio_vars=self.idio_vars,
            noise_scales=self.noise_scales,
            mu=self.mu,
            cost=self.cost,
        )


@dataclass(frozen=True)
class RecommenderEnvironment:
    mu_w: float = DEFAULT_MU
    var_w_common: float = 0.5
    var_w_idio: float = 0.5
    var_loc_common: float = 0.5
    var_loc_idio: float = 0.5
    loc_mean: float = 0.0

    @property
    def var_w_total(self) -> float:
        return self.var_w_common + self.var_w_idio

    @property
    def var_loc_total(self) -> float:
        return self.var_loc_common + self.var_loc_idio


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    noise: Optional[NoiseDesign] = None
    groups: Optional[GroupedEnvironment] = None

    @classmethod
    def complete(cls) -> 'PolicySpec':
        return cls(PolicyKind.COMPLETE)

    @classmethod
    def anonymized(cls) -> 'PolicySpec':
        return cls(PolicyKind.ANONYMIZED)

    @classmethod
    def no_sharing(cls) -> 'PolicySpec':
        return cls(PolicyKind.NO_SHARING)

    @classmethod
    def noised(cls, common_noise_var: float, idio_noise_var: float = 0.0) -> 'PolicySpec':
        return cls(PolicyKind.NOISED, noise=NoiseDesign(common_noise_var, idio_noise_var))

    @property
    def added_noise(self) -> NoiseDesign:
        return self.noise if self.noise is not None else NoiseDesign()


def _check_real(field: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(field, f"expected a real number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(field, f"must be finite, got {value}")
    return float(value)


def _check_unit(field: str, value) -> float:
    value = _check_real(field, value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(field, f"must lie in [0, 1], got {value}")
    return value


def _check_nonnegative(field: str, value) -> float:
    value = _check_real(field, value)
    if value < 0.0:
        raise ValidationError(field, f"must be nonnegative, got {value}")
    return value


def _check_count(field: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(field, f"expected a positive integer, got {value!r}")
    if value < 1:
        raise ValidationError(field, f"must be at least 1, got {value}")
    return value


def validate(env: DataEnvironment) -> DataEnvironment:
    """Return the environment unchanged if all invariants hold."""
    _check_count('n_consumers', env.n_consumers)
    _check_unit('alpha', env.alpha)
    _check_unit('beta', env.beta)
    _check_nonnegative('sigma', env.sigma)
    _check_real('mu', env.mu)
    _check_nonnegative('cost', env.cost)
    return env


def validate_noise(noise: NoiseDesign) -> NoiseDesign:
    _check_nonnegative('common_noise_var', noise.common_noise_var)
    _check_nonnegative('idio_noise_var', noise.idio_noise_var)
    return noise


def validate_policy(policy: PolicySpec) -> PolicySpec:
    if policy.kind is PolicyKind.NOISED:
        if policy.noise is None:
            raise ValidationError('policy', 'Noised policy requires a noise design')
        validate_noise(policy.noise)
    elif policy.noise is not None:
        raise ValidationError('policy', f'{policy.kind.value} policy carries no noise design')
    if policy.kind is PolicyKind.GROUPED:
        if policy.groups is None:
            raise ValidationError('policy', 'Grouped policy requires group parameters')
        validate_groups(policy.groups)
    elif policy.groups is not None:
        raise ValidationError('policy', f'{policy.kind.value} policy carries no group parameters')
    return policy


def validate_groups(genv: GroupedEnvironment) -> GroupedEnvironment:
    n_groups = len(genv.group_sizes)
    if n_groups < 1:
        raise ValidationError('group_sizes', 'at least one group is required')
    for name in ('common_vars', 'idio_vars', 'noise_scales'):
        if len(getattr(genv, name)) != n_groups:
            raise ValidationError(name, f'expected {n_groups} entries, got {len(getattr(genv, name))}')
    for size in genv.group_sizes:
        _check_count('group_sizes', size)
    for value in genv.common_vars:
        _check_nonnegative('common_vars', value)
    for value in genv.idio_vars:
        _check_nonnegative('idio_vars', value)
    for value in genv.noise_scales:
        _check_nonnegative('noise_scales', value)
    _check_real('mu', genv.mu)
    _check_nonnegative('cost', genv.cost)
    return genv


def validate_recommender(renv: RecommenderEnvironment) -> RecommenderEnvironment:
    _check_real('mu_w', renv.mu_w)
    _check_real('loc_mean', renv.loc_mean)
    for name in ('var_w_common', 'var_w_idio', 'var_loc_common', 'var_loc_idio'):
        _check_nonnegative(name, getattr(renv, name))
    return renv
