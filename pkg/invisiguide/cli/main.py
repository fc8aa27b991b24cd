"""
Command-line front end.

    python -m invisiguide <command> [--config PATH] [--out DIR]
                          [--override key=value]... [--threads N] [-v | -q]
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import List, Optional

import numpy as np
from colorama import Fore, Style, just_fix_windows_console

from .. import __version__
from ..asymptotics.first_order import first_order
from ..asymptotics.remainder_probe import residual_scaling_probe, write_remainder_csv
from ..designer.fixed_point import (design_sweep, fem_oracle, run_design, write_convergence_csv,
                                    write_final_spec)
from ..errors import ConfigError, ConvergenceError, GeometryError, InvisiguideError
from ..geometry.chimney_layout import WaveguideSpec, random_spec
from ..geometry.mesher import write_mesh
from ..obstruction.eigenproblem import obstruction_for_spec, obstruction_record, truncation_sweep
from ..oracle_fd.fd_solver import compare_with_fem
from ..scattering.coefficients import analyze, to_record, write_record
from ..solver.helmholtz import scattered_field, solve_spec, write_field
from .config import COMMANDS, RunConfig, build_run_config, load_config, spec_options
from .exporters import (config_header, write_first_order, write_oracle_compare, write_sweep_summary,
                        write_truncation_sweep)

logger = logging.getLogger('invisiguide')

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_NON_CONVERGENCE = 4


class ColoredFormatter(logging.Formatter):
    """Level names coloured for the terminal."""

    COLORS = {
        logging.DEBUG: Fore.CYAN,
        logging.INFO: Fore.GREEN,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Fore.RED + Style.BRIGHT,
    }

    def format(self, record: logging.LogRecord) -> str:
        color = self.COLORS.get(record.levelno, '')
        original = record.levelname
        record.levelname = f"{color}{original}{Style.RESET_ALL}"
        try:
            return super().format(record)
        finally:
            record.levelname = original


def setup_logging(verbose: bool = False, quiet: bool = False, stream=None):
    just_fix_windows_console()
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(ColoredFormatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger('invisiguide')
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)
    root.propagate = False


def exit_code_for(error: InvisiguideError) -> int:
    if isinstance(error, (ConfigError, GeometryError)):
        return EXIT_CONFIG
    if isinstance(error, ConvergenceError):
        return EXIT_NON_CONVERGENCE
    return EXIT_SOLVER


def _layout_spec(cfg: RunConfig) -> WaveguideSpec:
    """The configured chimneys, or the design layout at its starting heights."""
    if cfg.spec.chimneys:
        return cfg.spec
    return cfg.design.spec_for(cfg.design.heights_for(cfg.design.t_initial))


def _path(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _write_solution(cfg: RunConfig, spec: WaveguideSpec, header: str, with_scattered: bool = False):
    total, system = solve_spec(spec, cfg.residual_tol, cfg.pivot_tol)
    result = analyze(total, system)
    record = to_record(result, spec)
    record.update({'n_nodes': system.mesh.n_nodes, 'h_used': system.mesh.h_used,
                   'dtn_terms': spec.dtn_terms, 'L': spec.trunc_half_length})
    write_record(record, _path(cfg, 'coefficients.txt'), header)
    write_field(total, _path(cfg, 'field_nodes.txt'), _path(cfg, 'field_elements.txt'), header)
    if with_scattered:
        write_field(scattered_field(total), _path(cfg, 'scattered_nodes.txt'), header=header)
    return total, system, result


def run_solve(cfg: RunConfig, header: str):
    _, system, _ = _write_solution(cfg, cfg.spec, header)
    write_mesh(system.mesh, cfg.out_dir, header)


def run_design_command(cfg: RunConfig, header: str):
    oracle = fem_oracle(cfg.residual_tol, cfg.pivot_tol)
    try:
        state = run_design(cfg.design, oracle)
    except ConvergenceError as exc:
        if exc.state is not None:
            write_convergence_csv(exc.state, _path(cfg, 'convergence.csv'), header)
        raise
    write_convergence_csv(state, _path(cfg, 'convergence.csv'), header)
    write_final_spec(cfg.design, state, _path(cfg, 'final_spec.json'))
    _write_solution(cfg, cfg.design.spec_for(state.heights), header, with_scattered=True)


def run_predict(cfg: RunConfig, header: str):
    spec = _layout_spec(cfg)
    write_first_order(first_order(spec), spec, _path(cfg, 'first_order.csv'), header)


def _obstruction_options(cfg: RunConfig):
    o = cfg.obstruction
    return {'mesh_target_h': o['mesh_target_h'], 'min_cells': cfg.spec.min_cells_across_chimney,
            'shift': o['shift'], 'max_iter': o['max_iter'], 'tol': o['tol']}


def run_obstruction(cfg: RunConfig, header: str):
    result = obstruction_for_spec(cfg.spec, x_minus=cfg.obstruction.get('x_minus'),
                                  x_plus=cfg.obstruction.get('x_plus'), **_obstruction_options(cfg))
    record = obstruction_record(result)
    record['k'] = cfg.spec.k
    record['bound_below_k'] = result.k_star_bound < cfg.spec.k
    write_record(record, _path(cfg, 'obstruction.txt'), header)


def run_sweep(cfg: RunConfig, header: str):
    kind = cfg.sweep['kind']
    eps_values = cfg.sweep['eps_values']
    if kind == 'design':
        base = replace(cfg.design, require_convergence=False)
        states = design_sweep(base, eps_values, fem_oracle(cfg.residual_tol, cfg.pivot_tol),
                              threads=cfg.threads, max_iter=cfg.sweep['max_iter'])
        for eps, state in zip(eps_values, states):
            write_convergence_csv(state, _path(cfg, f'convergence_eps_{eps:g}.csv'), header)
        write_sweep_summary(eps_values, states, _path(cfg, 'sweep_summary.csv'), header)
    elif kind == 'remainder':
        probe = residual_scaling_probe(cfg.spec.k, cfg.design.positions, eps_values,
                                       fem_oracle(cfg.residual_tol, cfg.pivot_tol), threads=cfg.threads,
                                       **spec_options(cfg.spec))
        write_remainder_csv(probe, _path(cfg, 'remainder_sweep.csv'), header)
    else:
        results = truncation_sweep(_layout_spec(cfg).chimneys, cfg.sweep['x_minus_values'],
                                   cfg.sweep['x_plus_values'], threads=cfg.threads,
                                   **_obstruction_options(cfg))
        write_truncation_sweep(results, _path(cfg, 'truncation_sweep.csv'), header)


def run_oracle_compare(cfg: RunConfig, header: str):
    rng = np.random.default_rng(cfg.seed)
    options = {'dtn_terms': cfg.spec.dtn_terms, 'mesh_target_h': cfg.spec.mesh_target_h,
               'min_cells_across_chimney': cfg.spec.min_cells_across_chimney}
    specs = [cfg.spec] if cfg.spec.chimneys else []
    specs += [random_spec(rng, **options) for _ in range(cfg.oracle['n_random_specs'])]
    if not specs:
        raise ConfigError("oracle-compare needs spec.chimneys or oracle.n_random_specs > 0")

    def compare(spec):
        return compare_with_fem(spec, cfg.oracle['delta'], cfg.oracle.get('fem_h'))

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            comparisons = list(pool.map(compare, specs))
    else:
        comparisons = [compare(spec) for spec in specs]
    write_oracle_compare(specs, comparisons, _path(cfg, 'oracle_compare.csv'), header)


HANDLERS = {
    'solve': run_solve,
    'design': run_design_command,
    'predict': run_predict,
    'obstruction': run_obstruction,
    'sweep': run_sweep,
    'oracle-compare': run_oracle_compare,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; errors propagate as InvisiguideError subclasses."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    header = config_header(cfg.resolved)
    logger.info("running %s into %s", cfg.command, cfg.out_dir)
    HANDLERS[cfg.command](cfg, header)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='invisiguide',
        description='Thin-chimney waveguide scattering, invisibility design and obstruction bounds.')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', metavar='PATH', help='JSON configuration file')
    parser.add_argument('--out', metavar='DIR', default='out', help='output directory')
    parser.add_argument('--override', metavar='KEY=VALUE', action='append', default=[],
                        help='dotted configuration override, repeatable')
    parser.add_argument('--threads', type=int, metavar='N', help='worker threads for sweeps')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        overrides = [f'command="{args.command}"'] + list(args.override)
        if args.threads is not None:
            overrides.append(f'threads={args.threads}')
        config = load_config(args.config, overrides)
        return run(build_run_config(config, args.out))
    except InvisiguideError as error:
        print(f"error: {error.one_line()}", file=sys.stderr)
        return exit_code_for(error)
    except Exception as error:
        logger.debug("unexpected failure", exc_info=True)
        print(f"error: internal-error: {type(error).__name__}: {error}", file=sys.stderr)
        return EXIT_INTERNAL
