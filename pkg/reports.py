"""Tabular reports shared by the command line and the HTTP API."""
import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core_model import (
    DataEnvironment,
    GroupedEnvironment,
    PolicyKind,
    PolicySpec,
    Scope,
    ValidationError,
    validate,
)
from gaussian_engine import FULL_OBSERVATION_LIMIT, build_observation, build_reduced_observation, gain_profile
from intermediation import equilibrium_outcome, payment_gains
from mc_oracle import Z_THRESHOLD, projection_check, simulate
from policy_design import optimize_noise, segmentation_compare
from product_market import data_externality, sharing_deltas

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12
MIN_CHECK_DRAWS = 10000
CSV_FLOAT_FORMAT = f'%.{SIGNIFICANT_DIGITS}g'

EVAL_COLUMNS = [
    'g_full', 'g_loo', 'g_individual', 'g_consumer', 'delta_pi', 'delta_u', 'delta_w',
    'data_externality', 'consumer_payment', 'producer_fee', 'revenue', 'margin', 'profitable',
]
SWEEP_PARAMETERS = ('n_consumers', 'alpha', 'beta', 'sigma', 'mu', 'cost')
FIGURE_NAMES = ('compensation', 'marginal', 'noise')
COMPENSATION_COLUMNS = ['n', 'total_compensation']
MARGINAL_COLUMNS = ['n', 'marginal_pooled', 'marginal_grouped']
NOISE_COLUMNS = ['alpha', 'common_noise_var', 'revenue', 'boundary']

DEFAULT_COMPENSATION_N = tuple(range(1, 51))
DEFAULT_MARGINAL_N = tuple(range(1, 31))
DEFAULT_NOISE_ALPHAS = tuple(np.round(np.arange(41, 101) / 100.0, 2).tolist())
# Symmetric two-group population for the marginal-value series.
MARGINAL_GROUPS = 2
MARGINAL_COMMON_VAR = 0.5
MARGINAL_IDIO_VAR = 0.5
MARGINAL_NOISE_SCALE = 1.0


def rounded(value: float) -> float:
    """Round to SIGNIFICANT_DIGITS for platform-stable output."""
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


def _clean(record: Dict) -> Dict:
    cleaned = {}
    for key, value in record.items():
        if isinstance(value, (bool, np.bool_)):
            cleaned[key] = bool(value)
        elif isinstance(value, (float, np.floating)):
            cleaned[key] = rounded(float(value))
        elif isinstance(value, np.integer):
            cleaned[key] = int(value)
        else:
            cleaned[key] = value
    return cleaned


def records(frame: pd.DataFrame) -> List[Dict]:
    """DataFrame rows as JSON-ready dicts, missing values as None."""
    rows = frame.astype(object).where(frame.notna(), None).to_dict(orient='records')
    return [_clean(row) for row in rows]


def to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def evaluate(env: DataEnvironment, policy: PolicySpec) -> Dict:
    """Gains, surplus changes, externality, payments and revenue of one market."""
    validate(env)
    if policy.kind is PolicyKind.GROUPED:
        raise ValidationError('policy', "Grouped policies are evaluated with 'segment'")
    profile = gain_profile(env, policy)
    deltas = sharing_deltas(env, policy, profile)
    outcome = equilibrium_outcome(env, policy, profile)
    return _clean({
        'g_full': profile.g_full,
        'g_loo': profile.g_loo,
        'g_individual': profile.g_individual,
        'g_consumer': profile.g_consumer,
        'delta_pi': deltas.delta_pi,
        'delta_u': deltas.delta_u,
        'delta_w': deltas.delta_w,
        'data_externality': data_externality(env, policy, profile),
        'consumer_payment': outcome.consumer_payment,
        'producer_fee': outcome.producer_fee,
        'revenue': outcome.revenue,
        'margin': outcome.margin,
        'profitable': outcome.profitable,
    })


def _integral(field: str, value: float) -> int:
    if isinstance(value, bool) or not float(value).is_integer():
        raise ValidationError(field, f'market sizes must be integral, got {value}')
    return int(value)


def market_sizes(values: Iterable[float], field: str = 'grid') -> List[int]:
    """Grid values as integer market sizes; fractional values are rejected, not truncated."""
    return [_integral(field, value) for value in values]


def _sweep_value(param: str, value: float):
    if param != 'n_consumers':
        return float(value)
    return _integral('grid', value)


def sweep(env: DataEnvironment, policy: PolicySpec, param: str, grid: Sequence[float]) -> pd.DataFrame:
    """One evaluation per grid value of a single environment field, in grid order."""
    if param not in SWEEP_PARAMETERS:
        raise ValidationError('param', f"unknown parameter '{param}' (expected one of {', '.join(SWEEP_PARAMETERS)})")
    if len(grid) == 0:
        raise ValidationError('grid', 'the grid is empty')
    rows = []
    for value in grid:
        value = _sweep_value(param, value)
        point = env.replace(**{param: value})
        row = {'param': param, 'value': value}
        row.update(evaluate(point, policy))
        rows.append(row)
    logger.info(f"Swept {param} over {len(grid)} points")
    return pd.DataFrame(rows, columns=['param', 'value'] + EVAL_COLUMNS)


def compensation_series(alpha: float, n_values: Iterable[int] = DEFAULT_COMPENSATION_N) -> pd.DataFrame:
    """Total compensation N*m_i under anonymized data with noiseless signals."""
    env = validate(DataEnvironment(n_consumers=1, alpha=alpha, beta=0.0, sigma=0.0))
    rows = []
    for n in market_sizes(n_values):
        g_full, g_loo = payment_gains(env, PolicySpec.anonymized(), n)
        rows.append({'n': n, 'total_compensation': n * 0.375 * (g_full - g_loo)})
    return pd.DataFrame(rows, columns=COMPENSATION_COLUMNS)


def marginal_series(n_values: Iterable[int] = DEFAULT_MARGINAL_N) -> pd.DataFrame:
    """Revenue gained by adding one consumer to every group, pooled against grouped sums."""
    base = GroupedEnvironment.symmetric(MARGINAL_GROUPS, 1, MARGINAL_COMMON_VAR,
                                        MARGINAL_IDIO_VAR, MARGINAL_NOISE_SCALE)
    cache: Dict[int, Tuple[float, float]] = {0: (0.0, 0.0)}

    def revenues(n: int) -> Tuple[float, float]:
        if n not in cache:
            report = segmentation_compare(base.resized(n))
            cache[n] = (report.revenue_pooled, report.revenue_grouped)
        return cache[n]

    rows = []
    for n in sorted(market_sizes(n_values)):
        if n < 1:
            raise ValidationError('grid', f'group sizes must be positive, got {n}')
        current, before = revenues(n), revenues(n - 1)
        rows.append({'n': n, 'marginal_pooled': current[0] - before[0],
                     'marginal_grouped': current[1] - before[1]})
    return pd.DataFrame(rows, columns=MARGINAL_COLUMNS)


def noise_series(alphas: Iterable[float] = DEFAULT_NOISE_ALPHAS, n: int = 2, sigma: float = 1.0) -> pd.DataFrame:
    """Optimal added common noise across alpha."""
    rows = []
    for alpha in alphas:
        optimum = optimize_noise(DataEnvironment(n_consumers=n, alpha=float(alpha), beta=0.0, sigma=sigma))
        rows.append({'alpha': float(alpha), 'common_noise_var': optimum.common_noise_var,
                     'revenue': optimum.revenue, 'boundary': optimum.boundary.value})
    return pd.DataFrame(rows, columns=NOISE_COLUMNS)


def figure_series(name: str, alpha: Optional[float] = None,
                  grid: Optional[Sequence[float]] = None) -> pd.DataFrame:
    """Data series behind a figure; grid overrides the default x values."""
    if name == 'compensation':
        if alpha is None:
            raise ValidationError('alpha', 'the compensation figure requires an alpha value')
        return compensation_series(alpha, grid if grid is not None else DEFAULT_COMPENSATION_N)
    if name == 'marginal':
        return marginal_series(grid if grid is not None else DEFAULT_MARGINAL_N)
    if name == 'noise':
        return noise_series(grid if grid is not None else DEFAULT_NOISE_ALPHAS)
    raise ValidationError('figure', f"unknown figure '{name}' (expected one of {', '.join(FIGURE_NAMES)})")


def noise_report(env: DataEnvironment) -> Dict:
    optimum = optimize_noise(env)
    return _clean({
        'common_noise_var': optimum.common_noise_var,
        'idio_noise_var': optimum.idio_noise_var,
        'revenue': optimum.revenue,
        'boundary': optimum.boundary.value,
        'idio_noise_dominated': optimum.idio_noise_dominated,
    })


def segmentation_report(genv: GroupedEnvironment, n_range: Optional[Sequence[int]] = None) -> Dict:
    report = segmentation_compare(genv, market_sizes(n_range, 'n_range') if n_range is not None else None)
    return _clean({
        'revenue_pooled': report.revenue_pooled,
        'revenue_grouped': report.revenue_grouped,
        'revenue_identified': report.revenue_identified,
        'recommended': report.recommended.value,
        'crossover_n': report.crossover_n,
    })


def mc_check(env: DataEnvironment, policy: PolicySpec, draws: int, seed: int) -> Tuple[Dict, bool]:
    """Simulation and projection checks; passes when every |z| is within Z_THRESHOLD."""
    if isinstance(draws, int) and not isinstance(draws, bool) and draws < MIN_CHECK_DRAWS:
        raise ValidationError('draws', f'mc-check needs at least {MIN_CHECK_DRAWS} draws, got {draws}')
    sim = simulate(env, policy, draws, seed)
    build = build_observation if env.n_consumers <= FULL_OBSERVATION_LIMIT else build_reduced_observation
    projection = projection_check(build(env, policy, Scope.FULL), draws, seed)
    quantities = {}
    for name, (mean, se) in sim.estimates.items():
        analytic, z = sim.comparisons[name]
        quantities[name] = _clean({'estimate': mean, 'standard_error': se, 'analytic': analytic, 'z': z})
    quantities['projection_gain'] = _clean({
        'estimate': projection.empirical, 'standard_error': projection.standard_error,
        'analytic': projection.analytic, 'z': projection.z,
    })
    passed = sim.passed(Z_THRESHOLD) and abs(projection.z) <= Z_THRESHOLD
    report = {
        'draws': sim.draws, 'seed': sim.seed, 'shard_size': sim.shard_size, 'shards': sim.shards,
        'quantities': quantities, 'passed': passed,
    }
    return report, passed
