"""Scenario files: flat key=value text read with python-dotenv.

Example::

    # two consumers with common preferences
    n_consumers=2
    alpha=1.0
    beta=0.0
    sigma=1.0
    policy=Complete

Keys: n_consumers, alpha, beta, sigma, mu, cost, policy, common_noise_var,
idio_noise_var (Noised only), group_sizes, group_common_vars,
group_idio_vars, group_noise_scales (comma-separated, all four together),
draws, seed, n_list, alpha_grid. Unknown keys are rejected. Numbers use
plain decimal notation; floats are written with repr so a saved scenario
parses back exactly.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, TypeVar, Union

from dotenv import dotenv_values

from core_model import (
    DEFAULT_COST,
    DEFAULT_MU,
    DataEnvironment,
    GroupedEnvironment,
    NoiseDesign,
    PolicyKind,
    PolicySpec,
    ValidationError,
    validate,
    validate_groups,
    validate_policy,
)

logger = logging.getLogger(__name__)

ENVIRONMENT_KEYS = ('n_consumers', 'alpha', 'beta', 'sigma', 'mu', 'cost')
NOISE_KEYS = ('common_noise_var', 'idio_noise_var')
GROUP_KEYS = ('group_sizes', 'group_common_vars', 'group_idio_vars', 'group_noise_scales')
RUN_KEYS = ('draws', 'seed', 'n_list', 'alpha_grid')
SCENARIO_KEYS = ENVIRONMENT_KEYS + ('policy',) + NOISE_KEYS + GROUP_KEYS + RUN_KEYS
REQUIRED_KEYS = ('n_consumers', 'alpha', 'beta', 'sigma')

T = TypeVar('T')


@dataclass(frozen=True)
class Scenario:
    env: DataEnvironment
    policy: PolicySpec
    groups: Optional[GroupedEnvironment] = None
    draws: Optional[int] = None
    seed: Optional[int] = None
    n_list: Optional[Tuple[int, ...]] = None
    alpha_grid: Optional[Tuple[float, ...]] = None


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(key, f"not a decimal number: '{text}'")


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(key, f"not an integer: '{text}'")


def _parse_list(key: str, text: str, parse: Callable[[str, str], T]) -> Tuple[T, ...]:
    items = [item.strip() for item in text.split(',') if item.strip()]
    if not items:
        raise ValidationError(key, 'expected a comma-separated list')
    return tuple(parse(key, item) for item in items)


def parse_values(values: Dict[str, Optional[str]]) -> Scenario:
    """Build and validate a Scenario from raw key/value strings."""
    for key, value in values.items():
        if key not in SCENARIO_KEYS:
            raise ValidationError(key, 'unknown scenario key')
        if value is None or not value.strip():
            raise ValidationError(key, 'missing value')
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ValidationError(key, 'required key is missing')

    env = validate(DataEnvironment(
        n_consumers=_parse_int('n_consumers', values['n_consumers']),
        alpha=_parse_float('alpha', values['alpha']),
        beta=_parse_float('beta', values['beta']),
        sigma=_parse_float('sigma', values['sigma']),
        mu=_parse_float('mu', values['mu']) if 'mu' in values else DEFAULT_MU,
        cost=_parse_float('cost', values['cost']) if 'cost' in values else DEFAULT_COST,
    ))

    groups = None
    present = [key for key in GROUP_KEYS if key in values]
    if present:
        missing = [key for key in GROUP_KEYS if key not in values]
        if missing:
            raise ValidationError(missing[0], 'group keys must be given together')
        groups = validate_groups(GroupedEnvironment(
            group_sizes=_parse_list('group_sizes', values['group_sizes'], _parse_int),
            common_vars=_parse_list('group_common_vars', values['group_common_vars'], _parse_float),
            idio_vars=_parse_list('group_idio_vars', values['group_idio_vars'], _parse_float),
            noise_scales=_parse_list('group_noise_scales', values['group_noise_scales'], _parse_float),
            mu=env.mu,
            cost=env.cost,
        ))

    kind = PolicyKind.parse(values.get('policy', PolicyKind.COMPLETE.value))
    noise = None
    if kind is PolicyKind.NOISED:
        noise = NoiseDesign(
            common_noise_var=_parse_float('common_noise_var', values.get('common_noise_var', '0.0')),
            idio_noise_var=_parse_float('idio_noise_var', values.get('idio_noise_var', '0.0')),
        )
    else:
        for key in NOISE_KEYS:
            if key in values:
                raise ValidationError(key, 'only valid with the Noised policy')
    if kind is PolicyKind.GROUPED and groups is None:
        raise ValidationError('group_sizes', 'the Grouped policy requires group keys')
    policy = validate_policy(PolicySpec(kind, noise=noise,
                                        groups=groups if kind is PolicyKind.GROUPED else None))

    return Scenario(
        env=env,
        policy=policy,
        groups=groups,
        draws=_parse_int('draws', values['draws']) if 'draws' in values else None,
        seed=_parse_int('seed', values['seed']) if 'seed' in values else None,
        n_list=_parse_list('n_list', values['n_list'], _parse_int) if 'n_list' in values else None,
        alpha_grid=(_parse_list('alpha_grid', values['alpha_grid'], _parse_float)
                    if 'alpha_grid' in values else None),
    )


def parse_scenario(text: str) -> Scenario:
    return parse_values(dict(dotenv_values(stream=io.StringIO(text), interpolate=False)))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError('scenario', f"no such file: {path}")
    logger.info(f"Loading scenario {path}")
    return parse_scenario(path.read_text(encoding='utf-8'))


def _join(items) -> str:
    return ','.join(repr(float(x)) if isinstance(x, float) else str(x) for x in items)


def format_scenario(scenario: Scenario) -> str:
    """Serialize a scenario so that parse_scenario returns an equal one."""
    env = scenario.env
    lines: List[str] = [
        f"n_consumers={env.n_consumers}",
        f"alpha={float(env.alpha)!r}",
        f"beta={float(env.beta)!r}",
        f"sigma={float(env.sigma)!r}",
        f"mu={float(env.mu)!r}",
        f"cost={float(env.cost)!r}",
        f"policy={scenario.policy.kind.value}",
    ]
    if scenario.policy.kind is PolicyKind.NOISED:
        noise = scenario.policy.added_noise
        lines.append(f"common_noise_var={float(noise.common_noise_var)!r}")
        lines.append(f"idio_noise_var={float(noise.idio_noise_var)!r}")
    if scenario.groups is not None:
        groups = scenario.groups
        lines.append(f"group_sizes={_join(groups.group_sizes)}")
        lines.append(f"group_common_vars={_join(float(v) for v in groups.common_vars)}")
        lines.append(f"group_idio_vars={_join(float(v) for v in groups.idio_vars)}")
        lines.append(f"group_noise_scales={_join(float(v) for v in groups.noise_scales)}")
    if scenario.draws is not None:
        lines.append(f"draws={scenario.draws}")
    if scenario.seed is not None:
        lines.append(f"seed={scenario.seed}")
    if scenario.n_list is not None:
        lines.append(f"n_list={_join(scenario.n_list)}")
    if scenario.alpha_grid is not None:
        lines.append(f"alpha_grid={_join(float(a) for a in scenario.alpha_grid)}")
    return '\n'.join(lines) + '\n'


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(format_scenario(scenario), encoding='utf-8')
    logger.info(f"Scenario saved to {path}")
