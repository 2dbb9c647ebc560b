"""Information design for the intermediary.

Covers added-noise optimization, the profitability threshold of noised
aggregate data, group segmentation of aggregate data and the recommender
aggregation rule.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from core_model import (
    DataEnvironment,
    GroupedEnvironment,
    ModelError,
    RecommenderEnvironment,
    Scope,
    ValidationError,
    validate,
    validate_groups,
    validate_recommender,
)
from gaussian_engine import build_group_observation, gain

logger = logging.getLogger(__name__)

NOISE_UPPER_LIMIT = 1e6
NOISE_GRID_FLOOR = 1e-4
GRID_POINTS_PER_DECADE = 32
REFINE_TOLERANCE = 1e-8
DOMINANCE_STEP = 1e-4
DOMINANCE_TOLERANCE = 1e-12
THRESHOLD_IDENTITY_TOLERANCE = 1e-12
RANGE_TOLERANCE = 1e-12


class Boundary(Enum):
    INTERIOR = 'Interior'
    AT_ZERO = 'AtZero'
    AT_UPPER_LIMIT = 'AtUpperLimit'


class Segmentation(Enum):
    POOLED = 'Pooled'
    GROUPED = 'Grouped'


@dataclass(frozen=True)
class NoiseOptimum:
    common_noise_var: float
    idio_noise_var: float
    revenue: float
    boundary: Boundary
    idio_noise_dominated: bool = True


@dataclass(frozen=True)
class SegmentationReport:
    revenue_pooled: float
    revenue_grouped: float
    recommended: Segmentation
    crossover_n: Optional[int] = None
    revenue_identified: Optional[float] = None


@dataclass(frozen=True)
class RecommenderReport:
    delta_u: float
    delta_pi: float
    delta_w: float
    recommended: Optional[str]
    valid: bool


def noised_revenue(sigma_theta2: float, sigma_thetai2: float, sigma_eps2: float,
                   sigma_epsi2: float, n: int) -> float:
    """Total intermediary revenue from the sum of n noised reports."""
    if n < 1:
        raise ValidationError('n', f'must be at least 1, got {n}')
    for name, value in (('sigma_theta2', sigma_theta2), ('sigma_thetai2', sigma_thetai2),
                        ('sigma_eps2', sigma_eps2), ('sigma_epsi2', sigma_epsi2)):
        if value < 0.0:
            raise ValidationError(name, f'must be nonnegative, got {value}')

    full_denominator = n * (sigma_eps2 + sigma_theta2) + sigma_epsi2 + sigma_thetai2
    if full_denominator <= 0.0:
        raise ModelError('noised_revenue is undefined when every variance is zero')
    penalty = (n * sigma_theta2 + sigma_thetai2) ** 2 / (8.0 * full_denominator)

    loo_denominator = (n - 1) * (sigma_eps2 + sigma_theta2) + sigma_epsi2 + sigma_thetai2
    if n == 1 or loo_denominator <= 0.0:
        return -penalty
    return 3.0 * (n - 1) * n * sigma_theta2 ** 2 / (8.0 * loo_denominator) - penalty


def _revenue_with_noise(env: DataEnvironment, common: float, idio: float = 0.0) -> float:
    return noised_revenue(env.var_common, env.var_idio, env.noise_common + common,
                          env.noise_idio + idio, env.n_consumers)


def noise_grid() -> np.ndarray:
    """Zero followed by a logarithmic grid from NOISE_GRID_FLOOR to NOISE_UPPER_LIMIT."""
    decades = math.log10(NOISE_UPPER_LIMIT / NOISE_GRID_FLOOR)
    points = int(round(decades * GRID_POINTS_PER_DECADE)) + 1
    return np.concatenate([[0.0], np.logspace(math.log10(NOISE_GRID_FLOOR),
                                              math.log10(NOISE_UPPER_LIMIT), points)])


def optimize_noise(env: DataEnvironment) -> NoiseOptimum:
    """Revenue-maximizing common noise added to the aggregate statistic.

    Scans the grid, then refines inside the bracket around the best grid
    point with bounded Brent (golden-section steps with parabolic
    acceleration) to REFINE_TOLERANCE. Idiosyncratic noise stays at zero;
    a finite-difference step checks that adding it never helps.
    """
    validate(env)
    grid = noise_grid()
    values = np.array([_revenue_with_noise(env, x) for x in grid])
    best = int(np.argmax(values))
    x_best, r_best = float(grid[best]), float(values[best])

    if best == len(grid) - 1:
        boundary = Boundary.AT_UPPER_LIMIT
    else:
        lower = float(grid[best - 1]) if best > 0 else 0.0
        upper = float(grid[best + 1])
        result = minimize_scalar(lambda x: -_revenue_with_noise(env, x), bounds=(lower, upper),
                                 method='bounded', options={'xatol': REFINE_TOLERANCE})
        if result.success and -result.fun >= r_best:
            x_best, r_best = float(result.x), float(-result.fun)
        r_zero = float(values[0])
        if r_zero >= r_best:
            x_best, r_best = 0.0, r_zero
            boundary = Boundary.AT_ZERO
        else:
            boundary = Boundary.INTERIOR

    perturbed = _revenue_with_noise(env, x_best, DOMINANCE_STEP)
    dominated = perturbed <= r_best + DOMINANCE_TOLERANCE
    if not dominated:
        logger.warning(
            f"Idiosyncratic noise raises revenue at sigma_xi^2={x_best:.6g} "
            f"({boundary.value}): {perturbed:.6g} > {r_best:.6g}"
        )
    if boundary is Boundary.AT_UPPER_LIMIT:
        logger.warning(f"Noise optimum at the search limit {NOISE_UPPER_LIMIT:g} (alpha={env.alpha})")
    logger.info(f"Optimal common noise {x_best:.6g} with revenue {r_best:.6g} ({boundary.value})")
    return NoiseOptimum(
        common_noise_var=x_best,
        idio_noise_var=0.0,
        revenue=r_best,
        boundary=boundary,
        idio_noise_dominated=dominated,
    )


def profitability_threshold(n: int) -> float:
    """Smallest alpha above which noised aggregate data can be sold at a profit."""
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValidationError('n', f'must be a positive integer, got {n!r}')
    root3 = math.sqrt(3.0)
    threshold = (n * (root3 + 1.0) - 1.0) / (2.0 * n * (n + 1.0) - 1.0)
    rationalized = 1.0 / (n * (root3 - 1.0) + 1.0)
    if abs(threshold - rationalized) > THRESHOLD_IDENTITY_TOLERANCE:
        raise ModelError(f"threshold forms disagree at N={n}: {threshold} vs {rationalized}")
    return threshold


def _group_revenue(genv: GroupedEnvironment, mode: str) -> float:
    revenue = 0.0
    for j, size in enumerate(genv.group_sizes):
        g_full = gain(build_group_observation(genv, j, mode, Scope.FULL))
        g_loo = gain(build_group_observation(genv, j, mode, Scope.LEAVE_ONE_OUT))
        revenue += size * (3.0 * g_loo - g_full) / 8.0
    return revenue


def _grouped_dominates(genv: GroupedEnvironment) -> Tuple[float, float, bool]:
    pooled = _group_revenue(genv, 'pooled')
    grouped = _group_revenue(genv, 'grouped')
    return pooled, grouped, grouped > pooled


def segmentation_compare(genv: GroupedEnvironment,
                         n_range: Optional[Iterable[int]] = None) -> SegmentationReport:
    """Revenue of one pooled sum against one sum per group.

    With n_range, every group is resized to each candidate size and the
    smallest size from which grouping dominates through the end of the
    range is reported.
    """
    validate_groups(genv)
    pooled, grouped, dominates = _grouped_dominates(genv)
    identified = _group_revenue(genv, 'identified')

    crossover = None
    if n_range is not None:
        sizes = sorted(int(n) for n in n_range)
        if not sizes:
            raise ValidationError('n_range', 'at least one group size is required')
        for size in reversed(sizes):
            if not _grouped_dominates(genv.resized(size))[2]:
                break
            crossover = size
        logger.info(f"Grouping dominates from group size {crossover}" if crossover is not None
                    else "Grouping never dominates through the end of the range")

    return SegmentationReport(
        revenue_pooled=pooled,
        revenue_grouped=grouped,
        recommended=Segmentation.GROUPED if dominates else Segmentation.POOLED,
        crossover_n=crossover,
        revenue_identified=identified,
    )


def recommender_policy(renv: RecommenderEnvironment, v_w: float, v_loc: float) -> RecommenderReport:
    """Surplus changes of a policy revealing posterior-mean variances v_w and v_loc."""
    validate_recommender(renv)
    if not -RANGE_TOLERANCE <= v_w <= renv.var_w_total + RANGE_TOLERANCE:
        raise ValidationError('v_w', f'must lie in [0, {renv.var_w_total}], got {v_w}')
    if not -RANGE_TOLERANCE <= v_loc <= renv.var_loc_total + RANGE_TOLERANCE:
        raise ValidationError('v_loc', f'must lie in [0, {renv.var_loc_total}], got {v_loc}')

    mu = renv.mu_w
    spread = v_loc ** 2 - 2.0 * v_loc * renv.var_loc_total
    delta_u = -0.375 * v_w + 0.25 * mu * v_loc + 9.0 / 8.0 * spread
    delta_pi = 0.25 * v_w + 0.5 * mu * v_loc + 0.25 * spread
    delta_w = -0.125 * v_w + 0.75 * mu * v_loc + 11.0 / 8.0 * spread
    valid = 3.0 * mu > 11.0 * renv.var_loc_total
    return RecommenderReport(
        delta_u=delta_u,
        delta_pi=delta_pi,
        delta_w=delta_w,
        recommended='aggregate vertical, reveal horizontal' if valid else None,
        valid=valid,
    )
