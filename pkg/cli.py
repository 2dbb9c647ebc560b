"""Command line for the data intermediation analyzer.

Verbs:
    eval            gains, surplus changes, payments and revenue of a scenario
    sweep           the same report across a grid of one environment field
    figure          data series for the compensation, marginal and noise figures
    optimize-noise  revenue-maximizing added common noise
    segment         pooled against per-group aggregation of a grouped scenario
    mc-check        Monte Carlo verification of the closed forms

Scenario files use the key=value format documented in scenario.py.
Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 failed
Monte Carlo check. Logs go to standard error; standard output carries only
the report.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

import pandas as pd

from core_model import ContractError, ModelError, ValidationError
from reports import (
    FIGURE_NAMES,
    SWEEP_PARAMETERS,
    evaluate,
    figure_series,
    mc_check,
    noise_report,
    records,
    segmentation_report,
    sweep,
    to_csv,
)
from scenario import load_scenario

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_MC_FAILED = 4

DEFAULT_DRAWS = 100000
DEFAULT_SEED = 0


def parse_grid(text: str) -> List[float]:
    """Comma-separated numbers; 'a..b' expands to the integers a through b."""
    values: List[float] = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        try:
            if '..' in item:
                start, stop = (int(part) for part in item.split('..', 1))
                values.extend(range(start, stop + 1))
            else:
                values.append(float(item))
        except ValueError:
            raise ValidationError('grid', f"cannot parse grid item '{item}'")
    if not values:
        raise ValidationError('grid', 'the grid is empty')
    return values


def _emit_json(payload) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + '\n')


def _emit_table(frame: pd.DataFrame, out: str) -> None:
    if out == 'csv':
        sys.stdout.write(to_csv(frame))
    else:
        _emit_json(records(frame))


def _require_scenario(args):
    if not args.scenario:
        raise ValidationError('scenario', f"'{args.command}' requires --scenario")
    return load_scenario(args.scenario)


def cmd_eval(args) -> int:
    scenario = _require_scenario(args)
    report = evaluate(scenario.env, scenario.policy)
    if args.out == 'csv':
        sys.stdout.write(to_csv(pd.DataFrame([report])))
    else:
        _emit_json(report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _require_scenario(args)
    if not args.param:
        raise ValidationError('param', 'sweep requires --param')
    grid = parse_grid(args.grid) if args.grid else (list(scenario.alpha_grid) if scenario.alpha_grid else [])
    _emit_table(sweep(scenario.env, scenario.policy, args.param, grid), args.out or 'csv')
    return EXIT_OK


def cmd_figure(args) -> int:
    grid = parse_grid(args.grid) if args.grid else None
    _emit_table(figure_series(args.name, alpha=args.alpha, grid=grid), args.out or 'csv')
    return EXIT_OK


def cmd_optimize_noise(args) -> int:
    scenario = _require_scenario(args)
    report = noise_report(scenario.env)
    if args.out == 'csv':
        sys.stdout.write(to_csv(pd.DataFrame([report])))
    else:
        _emit_json(report)
    return EXIT_OK


def cmd_segment(args) -> int:
    scenario = _require_scenario(args)
    if scenario.groups is None:
        raise ValidationError('group_sizes', 'segment requires group keys in the scenario')
    n_range = parse_grid(args.grid) if args.grid else scenario.n_list
    report = segmentation_report(scenario.groups, n_range)
    if args.out == 'csv':
        sys.stdout.write(to_csv(pd.DataFrame([report])))
    else:
        _emit_json(report)
    return EXIT_OK


def cmd_mc_check(args) -> int:
    scenario = _require_scenario(args)
    draws = args.draws if args.draws is not None else (scenario.draws or DEFAULT_DRAWS)
    seed = args.seed if args.seed is not None else (scenario.seed if scenario.seed is not None else DEFAULT_SEED)
    report, passed = mc_check(scenario.env, scenario.policy, draws, seed)
    _emit_json(report)
    if not passed:
        logger.error("Monte Carlo check failed: some |z| exceeds the threshold")
        return EXIT_MC_FAILED
    return EXIT_OK


COMMANDS = {
    'eval': cmd_eval,
    'sweep': cmd_sweep,
    'figure': cmd_figure,
    'optimize-noise': cmd_optimize_noise,
    'segment': cmd_segment,
    'mc-check': cmd_mc_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='datamarket', description='Social-data intermediation analyzer')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p, default_out=None):
        p.add_argument('--scenario', help='scenario file (key=value)')
        p.add_argument('--out', choices=['json', 'csv'], default=default_out)
        return p

    common(sub.add_parser('eval', help='evaluate one scenario'), 'json')
    sweep_parser = common(sub.add_parser('sweep', help='sweep one environment field'))
    sweep_parser.add_argument('--param', help=f"one of {', '.join(SWEEP_PARAMETERS)}")
    sweep_parser.add_argument('--grid', help="comma-separated values, 'a..b' for integer ranges")

    figure_parser = common(sub.add_parser('figure', help='figure data series'))
    figure_parser.add_argument('name', help=f"one of {', '.join(FIGURE_NAMES)}")
    figure_parser.add_argument('--alpha', type=float, help='correlation of fundamentals (compensation)')
    figure_parser.add_argument('--grid', help='x values of the series')

    common(sub.add_parser('optimize-noise', help='optimal added common noise'), 'json')
    segment_parser = common(sub.add_parser('segment', help='pooled against grouped aggregation'), 'json')
    segment_parser.add_argument('--grid', help='group sizes searched for the crossover')

    mc_parser = common(sub.add_parser('mc-check', help='Monte Carlo verification'), 'json')
    mc_parser.add_argument('--draws', type=int)
    mc_parser.add_argument('--seed', type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        sys.stderr.write(f"error: {e.field}: {e.message}\n")
        return EXIT_VALIDATION
    except (ModelError, ContractError) as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
