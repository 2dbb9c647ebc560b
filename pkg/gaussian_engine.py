"""Covariance structures of each policy's observables and exact linear projections.

Every random variable is written as a loading vector over mutually independent
components (common and idiosyncratic fundamentals, errors and added noise), so
cross covariances and observation covariances are plain matrix products. The
gain G(.) is the variance of the posterior mean, cross' cov^+ cross, computed
through a pivoted Cholesky factor so that exactly singular covariances
(noiseless or duplicated signals) are projected with minimum-norm semantics.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import lapack, qr, solve_triangular

from core_model import (
    DataEnvironment,
    GroupedEnvironment,
    ModelError,
    NoiseDesign,
    PolicyKind,
    PolicySpec,
    Scope,
    ValidationError,
    validate,
    validate_groups,
    validate_policy,
)

logger = logging.getLogger(__name__)

# Pivots below this fraction of the largest diagonal entry are exact zeros.
FACTOR_TOLERANCE = 1e-12
# Reconstruction error allowed before a covariance is declared indefinite.
PSD_TOLERANCE = 1e-9
GAIN_TOLERANCE = 1e-12
# Above this many consumers gain_profile switches to sufficient statistics.
FULL_OBSERVATION_LIMIT = 64

GROUP_MODES = ('pooled', 'grouped', 'identified')


@dataclass(frozen=True, eq=False)
class ObservationModel:
    cross: np.ndarray
    cov: np.ndarray
    target_var: float
    labels: Tuple[str, ...] = field(default=())

    @property
    def dim(self) -> int:
        return int(self.cross.shape[0])

    @classmethod
    def empty(cls, target_var: float) -> 'ObservationModel':
        return cls(np.zeros(0), np.zeros((0, 0)), float(target_var), ())

    def scaled(self, k: float) -> 'ObservationModel':
        """Multiply cross and cov by k (target variance scaled alike)."""
        return ObservationModel(self.cross * k, self.cov * k, self.target_var * k, self.labels)

    def joint_cov(self) -> np.ndarray:
        """Covariance of (target, observables)."""
        n = self.dim
        joint = np.empty((n + 1, n + 1))
        joint[0, 0] = self.target_var
        joint[0, 1:] = self.cross
        joint[1:, 0] = self.cross
        joint[1:, 1:] = self.cov
        return joint


@dataclass(frozen=True)
class GainProfile:
    g_full: float
    g_loo: float
    g_individual: float
    g_consumer: float


def _check_shapes(obs: ObservationModel) -> None:
    n = obs.dim
    if obs.cov.shape != (n, n):
        raise ModelError(f"cross has length {n} but cov has shape {obs.cov.shape}")
    if n and not np.allclose(obs.cov, obs.cov.T, rtol=0.0, atol=PSD_TOLERANCE * max(1.0, np.abs(obs.cov).max())):
        raise ModelError("observation covariance is not symmetric")


def psd_factor(cov: np.ndarray) -> np.ndarray:
    """Return R (n x rank) with cov = R R' using pivoted Cholesky.

    Raises ModelError if cov is not positive semidefinite beyond tolerance.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    diag = np.diag(cov)
    scale = float(diag.max())
    if float(diag.min()) < -PSD_TOLERANCE * max(scale, 1.0):
        raise ModelError(f"covariance has a negative variance {diag.min():.3e}")
    if scale <= 0.0:
        return np.zeros((n, 0))

    c, piv, rank, info = lapack.dpstrf(cov, tol=FACTOR_TOLERANCE * scale, lower=1)
    if info < 0:
        raise ModelError(f"dpstrf rejected argument {-info}")
    lower = np.tril(c)[:, :rank]
    factor = np.empty((n, rank))
    factor[piv - 1] = lower

    residual = float(np.abs(cov - factor @ factor.T).max())
    if residual > PSD_TOLERANCE * scale:
        raise ModelError(f"covariance is not positive semidefinite (residual {residual:.3e})")
    if rank < n:
        logger.debug(f"Rank-deficient covariance: rank {rank} of {n}")
    return factor


def _pseudo_solve(obs: ObservationModel) -> Tuple[np.ndarray, np.ndarray]:
    """Return (z, coefficients) with z = R^+ cross and coefficients = cov^+ cross."""
    _check_shapes(obs)
    factor = psd_factor(obs.cov)
    rank = factor.shape[1]
    if rank == 0:
        return np.zeros(0), np.zeros(obs.dim)
    q, r = qr(factor, mode='economic')
    z = solve_triangular(r, q.T @ obs.cross)
    coefficients = q @ solve_triangular(r, z, trans='T')
    return z, coefficients


def projection_coefficients(obs: ObservationModel) -> np.ndarray:
    """Coefficients of the best linear predictor of the target (minimum norm)."""
    if obs.dim == 0:
        return np.zeros(0)
    return _pseudo_solve(obs)[1]


def gain(obs: ObservationModel) -> float:
    """Variance of the posterior mean of the target given the observables."""
    if obs.dim == 0 or obs.target_var == 0.0:
        return 0.0
    z, _ = _pseudo_solve(obs)
    value = float(z @ z)
    tolerance = GAIN_TOLERANCE * max(1.0, obs.target_var)
    if value > obs.target_var + tolerance * 1e3:
        raise ModelError(f"gain {value} exceeds target variance {obs.target_var}")
    return min(value, obs.target_var)


class _FactorLayout:
    """Independent components of the additive structure seen from consumer 0.

    Full layout: theta, eps, xi, then theta_j, eps_j, xi_j for every consumer.
    Reduced layout: theta, eps, xi, theta_0, eps_0, xi_0, then the sums of the
    other consumers' idiosyncratic components.
    """

    def __init__(self, env: DataEnvironment, noise: NoiseDesign, reduced: bool):
        self.n = env.n_consumers
        self.reduced = reduced
        others = self.n - 1
        if reduced:
            self.variances = np.array([
                env.var_common, env.noise_common, noise.common_noise_var,
                env.var_idio, env.noise_idio, noise.idio_noise_var,
                others * env.var_idio, others * env.noise_idio, others * noise.idio_noise_var,
            ])
        else:
            self.variances = np.concatenate([
                [env.var_common, env.noise_common, noise.common_noise_var],
                np.full(self.n, env.var_idio),
                np.full(self.n, env.noise_idio),
                np.full(self.n, noise.idio_noise_var),
            ])

    def _row(self) -> np.ndarray:
        return np.zeros(self.variances.shape[0])

    def _idio_slots(self, j: int) -> Tuple[int, int, int]:
        if self.reduced:
            return 3, 4, 5
        return 3 + j, 3 + self.n + j, 3 + 2 * self.n + j

    def target(self) -> np.ndarray:
        row = self._row()
        theta_i, _, _ = self._idio_slots(0)
        row[0] = 1.0
        row[theta_i] = 1.0
        return row

    def report(self, j: int, noised: bool) -> np.ndarray:
        """Signal s_j, or x_j = s_j + xi + xi_j when noised."""
        if self.reduced and j != 0:
            raise ModelError("reduced layout only resolves consumer 0 individually")
        row = self._row()
        theta_j, eps_j, xi_j = self._idio_slots(j)
        row[0] = row[1] = 1.0
        row[theta_j] = row[eps_j] = 1.0
        if noised:
            row[2] = 1.0
            row[xi_j] = 1.0
        return row

    def others_sum(self, noised: bool) -> np.ndarray:
        """Sum of the reports of consumers 1..N-1."""
        if not self.reduced:
            row = self._row()
            for j in range(1, self.n):
                row += self.report(j, noised)
            return row
        others = self.n - 1
        row = self._row()
        row[0] = row[1] = float(others)
        row[6] = row[7] = 1.0
        if noised:
            row[2] = float(others)
            row[8] = 1.0
        return row

    def model(self, rows: List[np.ndarray], labels: List[str]) -> ObservationModel:
        target = self.target()
        weighted = self.variances * target
        target_var = float(target @ weighted)
        if not rows:
            return ObservationModel.empty(target_var)
        loadings = np.vstack(rows)
        cross = loadings @ weighted
        cov = (loadings * self.variances) @ loadings.T
        return ObservationModel(cross, 0.5 * (cov + cov.T), target_var, tuple(labels))


def _layout(env: DataEnvironment, policy: PolicySpec, reduced: bool) -> _FactorLayout:
    validate(env)
    validate_policy(policy)
    if policy.kind is PolicyKind.GROUPED:
        raise ValidationError('policy', 'Grouped policies are evaluated by build_group_observation')
    return _FactorLayout(env, policy.added_noise, reduced)


def _producer_rows(layout: _FactorLayout, policy: PolicySpec, scope: Scope) -> Tuple[List[np.ndarray], List[str]]:
    n = layout.n
    kind = policy.kind
    if scope is Scope.INDIVIDUAL_ONLY:
        return [layout.report(0, noised=False)], ['s_i']
    if kind is PolicyKind.NO_SHARING:
        return [], []

    noised = kind is PolicyKind.NOISED
    leave_one_out = scope is Scope.LEAVE_ONE_OUT
    if leave_one_out and n == 1:
        return [], []

    if kind is PolicyKind.COMPLETE:
        if layout.reduced:
            rows, labels = [], []
            if not leave_one_out:
                rows.append(layout.report(0, noised=False))
                labels.append('s_i')
            if n > 1:
                rows.append(layout.others_sum(noised=False))
                labels.append('sum_others')
            return rows, labels
        start = 1 if leave_one_out else 0
        return ([layout.report(j, noised=False) for j in range(start, n)],
                [f's_{j}' for j in range(start, n)])

    # Anonymized and Noised: the unweighted sum of submitted reports.
    name = 'X' if noised else 'T'
    others = layout.others_sum(noised) if n > 1 else layout._row()
    if leave_one_out:
        return [others], [f'{name}_minus_i']
    return [layout.report(0, noised) + others], [name]


def _consumer_rows(layout: _FactorLayout, policy: PolicySpec) -> Tuple[List[np.ndarray], List[str]]:
    n = layout.n
    own = layout.report(0, noised=False)
    kind = policy.kind
    if kind is PolicyKind.NO_SHARING or n == 1 and kind is not PolicyKind.NOISED:
        return [own], ['s_i']
    if kind is PolicyKind.COMPLETE and not layout.reduced:
        return [layout.report(j, noised=False) for j in range(n)], [f's_{j}' for j in range(n)]
    if kind is PolicyKind.NOISED:
        rows = [own, layout.report(0, noised=True)]
        labels = ['s_i', 'x_i']
        if n > 1:
            rows.append(layout.others_sum(noised=True))
            labels.append('X_minus_i')
        return rows, labels
    # Complete (reduced) and Anonymized: own signal plus the others' sum.
    return [own, layout.others_sum(noised=False)], ['s_i', 'sum_others']


def build_observation(env: DataEnvironment, policy: PolicySpec, scope: Scope) -> ObservationModel:
    """Covariance structure of the producer-relevant observables for target w_i."""
    layout = _layout(env, policy, reduced=False)
    return layout.model(*_producer_rows(layout, policy, scope))


def build_reduced_observation(env: DataEnvironment, policy: PolicySpec, scope: Scope) -> ObservationModel:
    """Same information as build_observation with the other consumers' reports summed.

    Exact because the best predictor of w_i weights every other consumer's
    report equally.
    """
    layout = _layout(env, policy, reduced=True)
    return layout.model(*_producer_rows(layout, policy, scope))


def build_consumer_observation(env: DataEnvironment, policy: PolicySpec, reduced: bool = False) -> ObservationModel:
    """The consumer's on-path information: own signal plus the data outflow."""
    layout = _layout(env, policy, reduced=reduced)
    return layout.model(*_consumer_rows(layout, policy))


def gain_profile(env: DataEnvironment, policy: PolicySpec, reduced: Optional[bool] = None) -> GainProfile:
    """Gains under Full, LeaveOneOut and IndividualOnly scopes plus the consumer's gain."""
    if reduced is None:
        reduced = env.n_consumers > FULL_OBSERVATION_LIMIT
    build = build_reduced_observation if reduced else build_observation
    g_full = gain(build(env, policy, Scope.FULL))
    g_loo = gain(build(env, policy, Scope.LEAVE_ONE_OUT))
    g_individual = gain(build(env, policy, Scope.INDIVIDUAL_ONLY))
    if policy.kind is PolicyKind.COMPLETE:
        g_consumer = g_full
    else:
        g_consumer = gain(build_consumer_observation(env, policy, reduced=reduced))
    return GainProfile(g_full=g_full, g_loo=g_loo, g_individual=g_individual, g_consumer=g_consumer)


def anonymized_gain_closed_form(var_common: float, var_idio: float, noise_common: float,
                                noise_idio: float, n: int) -> Tuple[float, float]:
    """(G(X), G(X_-i)) for the sum of n additive reports with the given variances."""
    def ratio(numerator: float, denominator: float) -> float:
        return numerator / denominator if denominator > 0.0 else 0.0

    full = ratio((n * var_common + var_idio) ** 2,
                 n ** 2 * (var_common + noise_common) + n * (noise_idio + var_idio))
    m = n - 1
    loo = ratio((m * var_common) ** 2,
                m ** 2 * (var_common + noise_common) + m * (noise_idio + var_idio)) if m > 0 else 0.0
    return full, loo


def complete_gain_closed_form(env: DataEnvironment, n: Optional[int] = None) -> float:
    """G(S) for n identity-revealing signals via the compound-symmetric inverse.

    Requires a positive idiosyncratic signal variance.
    """
    n = env.n_consumers if n is None else n
    a = env.var_idio + env.noise_idio
    b = env.var_common + env.noise_common
    if a <= 0.0:
        raise ModelError("compound-symmetric inverse needs var(theta_i) + var(sigma eps_i) > 0")
    alpha = env.alpha
    cross_sq = n * alpha ** 2 + 2 * alpha * (1 - alpha) + (1 - alpha) ** 2
    cross_sum = n * alpha + 1 - alpha
    return (cross_sq - b * cross_sum ** 2 / (a + n * b)) / a


class _GroupLayout:
    """Components of a grouped population seen from consumer 0 of one group.

    Per group k: theta_k and the sums of the idiosyncratic fundamentals and
    errors of its members other than the target; then the target's own
    theta_ij and eps_ij.
    """

    def __init__(self, genv: GroupedEnvironment, target_group: int):
        self.genv = genv
        self.j = target_group
        variances = []
        for k in range(genv.n_groups):
            members = genv.group_sizes[k] - (1 if k == target_group else 0)
            variances += [genv.common_vars[k],
                          members * genv.idio_vars[k],
                          members * genv.noise_scales[k] ** 2]
        variances += [genv.idio_vars[target_group], genv.noise_scales[target_group] ** 2]
        self.variances = np.array(variances)
        self.own = 3 * genv.n_groups

    def _row(self) -> np.ndarray:
        return np.zeros(self.variances.shape[0])

    def target(self) -> np.ndarray:
        row = self._row()
        row[3 * self.j] = 1.0
        row[self.own] = 1.0
        return row

    def own_signal(self) -> np.ndarray:
        row = self.target()
        row[self.own + 1] = 1.0
        return row

    def others_sum(self, k: int) -> np.ndarray:
        row = self._row()
        members = self.genv.group_sizes[k] - (1 if k == self.j else 0)
        if members:
            row[3 * k] = float(members)
            row[3 * k + 1] = row[3 * k + 2] = 1.0
        return row

    def group_sum(self, k: int) -> np.ndarray:
        row = self.others_sum(k)
        if k == self.j:
            row = row + self.own_signal()
        return row

    def model(self, rows: List[np.ndarray], labels: List[str]) -> ObservationModel:
        target = self.target()
        weighted = self.variances * target
        target_var = float(target @ weighted)
        if not rows:
            return ObservationModel.empty(target_var)
        loadings = np.vstack(rows)
        cov = (loadings * self.variances) @ loadings.T
        return ObservationModel(loadings @ weighted, 0.5 * (cov + cov.T), target_var, tuple(labels))


def build_group_observation(genv: GroupedEnvironment, target_group: int, mode: str,
                            scope: Scope) -> ObservationModel:
    """Producer observables for a consumer of target_group under a grouped data policy.

    mode 'pooled': one sum over all groups; 'grouped': one sum per group
    (group identities revealed); 'identified': individual signals within the
    groups. LeaveOneOut removes the target's report.
    """
    validate_groups(genv)
    if mode not in GROUP_MODES:
        raise ValidationError('mode', f"unknown grouping mode '{mode}'")
    if not 0 <= target_group < genv.n_groups:
        raise ValidationError('target_group', f"no group {target_group}")
    layout = _GroupLayout(genv, target_group)
    groups = range(genv.n_groups)
    if scope is Scope.INDIVIDUAL_ONLY:
        return layout.model([layout.own_signal()], ['s_ij'])

    leave_one_out = scope is Scope.LEAVE_ONE_OUT
    rows_of = layout.others_sum if leave_one_out else layout.group_sum
    if mode == 'pooled':
        rows = [sum(rows_of(k) for k in groups)]
        labels = ['A_minus_ij' if leave_one_out else 'A']
    elif mode == 'grouped':
        rows = [rows_of(k) for k in groups]
        labels = [f'A_{k}' for k in groups]
    else:
        rows = [layout.others_sum(k) for k in groups]
        labels = [f'others_{k}' for k in groups]
        if not leave_one_out:
            rows.insert(0, layout.own_signal())
            labels.insert(0, 's_ij')
    return layout.model(rows, labels)
