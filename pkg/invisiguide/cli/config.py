"""
Run configuration: defaults, JSON files and dotted overrides.
"""

import ast
import copy
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..designer.fixed_point import DesignConfig
from ..errors import ConfigError
from ..geometry.chimney_layout import Chimney, WaveguideSpec

COMMANDS = ('solve', 'design', 'predict', 'obstruction', 'sweep', 'oracle-compare')
SWEEP_KINDS = ('design', 'remainder', 'truncation')

DEFAULT_CONFIG: Dict[str, Any] = {
    'command': 'solve',
    'seed': 0,
    'threads': 1,
    'spec': {
        'k': '0.8*pi',
        'trunc_half_length': 5.0,
        'dtn_terms': 20,
        'mesh_target_h': 0.1,
        'min_cells_across_chimney': 4,
        'grade_junctions': True,
        'max_nodes': 2000000,
        'chimneys': [],
    },
    'design': {
        'eps': 0.3,
        'positions': None,
        'stop_tol': 1e-9,
        'max_iter': 50,
        'relaxation': 1.0,
        't_initial': [0.0, 0.0, 0.0],
    },
    'solver': {
        'residual_tol': 1e-10,
        'pivot_tol': 1e-14,
    },
    'obstruction': {
        'x_minus': None,
        'x_plus': None,
        'mesh_target_h': 0.05,
        'max_iter': 300,
        'tol': 1e-8,
        'shift': 0.0,
    },
    'sweep': {
        'kind': 'design',
        'eps_values': [0.3, 0.2, 0.1],
        'max_iter': 15,
        'x_minus_values': [1.0, 1.5, 2.0],
        'x_plus_values': [1.0, 1.5, 2.0],
    },
    'oracle': {
        'delta': 0.05,
        'n_random_specs': 3,
        'fem_h': None,
    },
}

_BINARY = {ast.Add: operator.add, ast.Sub: operator.sub,
           ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def evaluate_number(value: Any, key: str = 'value') -> float:
    """Numbers, or expressions of numbers, pi, + - * / and parentheses."""
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a number, got {value!r}")

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == 'pi':
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
            return _BINARY[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](walk(node.operand))
        raise ConfigError(f"{key}: unsupported expression {value!r}")

    try:
        tree = ast.parse(value.strip(), mode='eval')
    except SyntaxError:
        raise ConfigError(f"{key}: cannot parse {value!r}")
    try:
        return float(walk(tree))
    except ZeroDivisionError:
        raise ConfigError(f"{key}: division by zero in {value!r}")


def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge `update` into a copy of `base`."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text: str) -> Dict[str, Any]:
    """'a.b.c=value' -> {'a': {'b': {'c': value}}}; value parsed as JSON when possible."""
    if '=' not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split('=', 1)
    parts = [p for p in key.strip().split('.') if p]
    if not parts:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    nested: Dict[str, Any] = {parts[-1]: value}
    for part in reversed(parts[:-1]):
        nested = {part: nested}
    return nested


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> Dict[str, Any]:
    """Defaults, then the JSON file, then the overrides."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        settings_file = Path(path)
        if not settings_file.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            with open(settings_file, 'r') as f:
                user = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        config = deep_merge(config, user)
    for text in overrides:
        config = deep_merge(config, parse_override(text))
    return config


def _section(config: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = config.get(name)
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be an object")
    return value


def _int(value: Any, key: str, minimum: int = None) -> int:
    number = evaluate_number(value, key)
    if number != int(number):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if minimum is not None and number < minimum:
        raise ConfigError(f"{key}: must be at least {minimum}, got {value!r}")
    return int(number)


def _positive(value: Any, key: str) -> float:
    number = evaluate_number(value, key)
    if not number > 0:
        raise ConfigError(f"{key}: must be positive, got {value!r}")
    return number


def _numbers(values: Any, key: str) -> List[float]:
    if not isinstance(values, list):
        raise ConfigError(f"{key}: expected a list")
    return [evaluate_number(v, f"{key}[{i}]") for i, v in enumerate(values)]


def build_spec(section: Dict[str, Any]) -> WaveguideSpec:
    chimneys = []
    for i, entry in enumerate(section.get('chimneys') or []):
        if not isinstance(entry, dict):
            raise ConfigError(f"spec.chimneys[{i}] must be an object")
        try:
            chimneys.append(Chimney(evaluate_number(entry['x_center'], f"spec.chimneys[{i}].x_center"),
                                    evaluate_number(entry['height'], f"spec.chimneys[{i}].height"),
                                    evaluate_number(entry['width'], f"spec.chimneys[{i}].width")))
        except KeyError as exc:
            raise ConfigError(f"spec.chimneys[{i}] lacks {exc}")
    return WaveguideSpec(
        k=_positive(section.get('k'), 'spec.k'),
        chimneys=tuple(chimneys),
        trunc_half_length=_positive(section.get('trunc_half_length'), 'spec.trunc_half_length'),
        dtn_terms=_int(section.get('dtn_terms'), 'spec.dtn_terms', 1),
        mesh_target_h=_positive(section.get('mesh_target_h'), 'spec.mesh_target_h'),
        min_cells_across_chimney=_int(section.get('min_cells_across_chimney'),
                                      'spec.min_cells_across_chimney', 2),
        grade_junctions=bool(section.get('grade_junctions', True)),
        max_nodes=_int(section.get('max_nodes'), 'spec.max_nodes', 1),
    )


def spec_options(spec: WaveguideSpec) -> Dict[str, Any]:
    """Numerical options of a spec, reused for generated layouts."""
    return {
        'trunc_half_length': spec.trunc_half_length,
        'dtn_terms': spec.dtn_terms,
        'mesh_target_h': spec.mesh_target_h,
        'min_cells_across_chimney': spec.min_cells_across_chimney,
        'grade_junctions': spec.grade_junctions,
        'max_nodes': spec.max_nodes,
    }


@dataclass
class RunConfig:
    command: str
    spec: WaveguideSpec
    design: DesignConfig
    out_dir: str
    residual_tol: float = 1e-10
    pivot_tol: float = 1e-14
    seed: int = 0
    threads: int = 1
    obstruction: Dict[str, Any] = field(default_factory=dict)
    sweep: Dict[str, Any] = field(default_factory=dict)
    oracle: Dict[str, Any] = field(default_factory=dict)
    resolved: Dict[str, Any] = field(default_factory=dict)


def build_run_config(config: Dict[str, Any], out_dir: str = 'out') -> RunConfig:
    """Validate a merged configuration dictionary and type its sections."""
    command = config.get('command')
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")

    spec = build_spec(_section(config, 'spec'))

    design = _section(config, 'design')
    positions = design.get('positions')
    design_config = DesignConfig(
        k=spec.k,
        eps=_positive(design.get('eps'), 'design.eps'),
        positions=None if positions is None else tuple(_numbers(positions, 'design.positions')),
        stop_tol=_positive(design.get('stop_tol'), 'design.stop_tol'),
        max_iter=_int(design.get('max_iter'), 'design.max_iter', 1),
        relaxation=evaluate_number(design.get('relaxation'), 'design.relaxation'),
        t_initial=tuple(_numbers(design.get('t_initial'), 'design.t_initial')),
        spec_options=spec_options(spec),
    )

    solver = _section(config, 'solver')
    obstruction = dict(_section(config, 'obstruction'))
    for key in ('x_minus', 'x_plus'):
        if obstruction.get(key) is not None:
            obstruction[key] = _positive(obstruction[key], f'obstruction.{key}')
    obstruction['mesh_target_h'] = _positive(obstruction.get('mesh_target_h'), 'obstruction.mesh_target_h')
    obstruction['max_iter'] = _int(obstruction.get('max_iter'), 'obstruction.max_iter', 1)
    obstruction['tol'] = _positive(obstruction.get('tol'), 'obstruction.tol')
    obstruction['shift'] = evaluate_number(obstruction.get('shift'), 'obstruction.shift')

    sweep = dict(_section(config, 'sweep'))
    if sweep.get('kind') not in SWEEP_KINDS:
        raise ConfigError(f"sweep.kind must be one of {', '.join(SWEEP_KINDS)}, got {sweep.get('kind')!r}")
    sweep['eps_values'] = [_positive(v, 'sweep.eps_values') for v in _numbers(sweep.get('eps_values'), 'sweep.eps_values')]
    sweep['max_iter'] = _int(sweep.get('max_iter'), 'sweep.max_iter', 1)
    sweep['x_minus_values'] = _numbers(sweep.get('x_minus_values'), 'sweep.x_minus_values')
    sweep['x_plus_values'] = _numbers(sweep.get('x_plus_values'), 'sweep.x_plus_values')

    oracle = dict(_section(config, 'oracle'))
    oracle['delta'] = _positive(oracle.get('delta'), 'oracle.delta')
    oracle['n_random_specs'] = _int(oracle.get('n_random_specs'), 'oracle.n_random_specs', 0)
    if oracle.get('fem_h') is not None:
        oracle['fem_h'] = _positive(oracle['fem_h'], 'oracle.fem_h')

    return RunConfig(
        command=command,
        spec=spec,
        design=design_config,
        out_dir=out_dir,
        residual_tol=_positive(solver.get('residual_tol'), 'solver.residual_tol'),
        pivot_tol=_positive(solver.get('pivot_tol'), 'solver.pivot_tol'),
        seed=_int(config.get('seed', 0), 'seed'),
        threads=_int(config.get('threads', 1), 'threads', 1),
        obstruction=obstruction,
        sweep=sweep,
        oracle=oracle,
        resolved=config,
    )
