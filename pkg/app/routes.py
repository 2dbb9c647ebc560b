from flask import Blueprint, Response, current_app, jsonify, request
import logging

from core_model import ContractError, ModelError, ValidationError
from reports import (
    evaluate,
    figure_series,
    mc_check,
    noise_report,
    records,
    segmentation_report,
    sweep,
    to_csv,
)
from scenario import parse_values

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
)
logger = logging.getLogger(__name__)

main = Blueprint('main', __name__)

REQUEST_ONLY_KEYS = ('param', 'grid', 'n_range')
DEFAULT_DRAWS = 100000


def _scenario_from_json(payload):
    """Turn a JSON body into a validated Scenario; lists become comma-separated values."""
    if not isinstance(payload, dict):
        raise ValidationError('body', 'expected a JSON object')
    values = {}
    for key, value in payload.items():
        if key in REQUEST_ONLY_KEYS:
            continue
        if isinstance(value, list):
            values[key] = ','.join(str(v) for v in value)
        elif value is None or isinstance(value, (dict, bool)):
            raise ValidationError(key, f'unsupported value {value!r}')
        else:
            values[key] = str(value)
    return parse_values(values)


def _grid(payload, key):
    grid = payload.get(key)
    if grid is None:
        return None
    if not isinstance(grid, list) or not grid:
        raise ValidationError(key, 'expected a non-empty list of numbers')
    if len(grid) > current_app.config['MAX_GRID_POINTS']:
        raise ValidationError(key, f"at most {current_app.config['MAX_GRID_POINTS']} points are allowed")
    for value in grid:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(key, f'not a number: {value!r}')
    return grid


def _table_response(frame):
    if request.args.get('format') == 'csv':
        return Response(to_csv(frame), mimetype='text/csv')
    return jsonify({'rows': records(frame)})


def _error_response(e):
    if isinstance(e, ValidationError):
        logger.warning(f"Rejected request: {e}")
        return jsonify({'error': e.message, 'field': e.field}), 400
    if isinstance(e, (ModelError, ContractError)):
        logger.error(f"Numerical failure: {str(e)}", exc_info=True)
        return jsonify({'error': str(e)}), 500
    logger.error(f"Error handling request: {str(e)}", exc_info=True)
    return jsonify({'error': str(e)}), 500


@main.route('/api/eval', methods=['POST'])
def eval_scenario():
    try:
        scenario = _scenario_from_json(request.get_json(silent=True))
        return jsonify(evaluate(scenario.env, scenario.policy))
    except Exception as e:
        return _error_response(e)


@main.route('/api/sweep', methods=['POST'])
def sweep_scenario():
    try:
        payload = request.get_json(silent=True)
        scenario = _scenario_from_json(payload)
        grid = _grid(payload, 'grid')
        if grid is None:
            raise ValidationError('grid', 'a grid is required')
        frame = sweep(scenario.env, scenario.policy, payload.get('param', ''), grid)
        logger.info(f"Sweep over {payload.get('param')} with {len(grid)} points")
        return _table_response(frame)
    except Exception as e:
        return _error_response(e)


@main.route('/api/figure/<name>')
def figure(name):
    try:
        alpha = request.args.get('alpha', type=float)
        grid = None
        if request.args.get('grid'):
            try:
                grid = [float(v) for v in request.args['grid'].split(',')]
            except ValueError:
                raise ValidationError('grid', 'expected comma-separated numbers')
            if len(grid) > current_app.config['MAX_GRID_POINTS']:
                raise ValidationError('grid', 'too many grid points')
        return _table_response(figure_series(name, alpha=alpha, grid=grid))
    except Exception as e:
        return _error_response(e)


@main.route('/api/optimize-noise', methods=['POST'])
def optimize():
    try:
        scenario = _scenario_from_json(request.get_json(silent=True))
        return jsonify(noise_report(scenario.env))
    except Exception as e:
        return _error_response(e)


@main.route('/api/segment', methods=['POST'])
def segment():
    try:
        payload = request.get_json(silent=True)
        scenario = _scenario_from_json(payload)
        if scenario.groups is None:
            raise ValidationError('group_sizes', 'group keys are required')
        n_range = _grid(payload, 'n_range')
        return jsonify(segmentation_report(scenario.groups, n_range))
    except Exception as e:
        return _error_response(e)


@main.route('/api/mc-check', methods=['POST'])
def monte_carlo_check():
    try:
        scenario = _scenario_from_json(request.get_json(silent=True))
        draws = scenario.draws or DEFAULT_DRAWS
        if draws > current_app.config['MAX_DRAWS']:
            raise ValidationError('draws', f"at most {current_app.config['MAX_DRAWS']} draws are allowed")
        report, passed = mc_check(scenario.env, scenario.policy, draws,
                                  scenario.seed if scenario.seed is not None else 0)
        if not passed:
            logger.warning(f"Monte Carlo check failed for {scenario.policy.kind.value}")
        return jsonify(report)
    except Exception as e:
        return _error_response(e)
