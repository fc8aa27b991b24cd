"""
Plain-text outputs of the command-line runs.

Every file starts with a `# config: {...}` line holding the resolved
configuration; floats are written with 17 significant digits.
"""

import csv
import json
import os
from typing import Dict, Iterable, List, Sequence

from ..asymptotics.first_order import FirstOrderPrediction
from ..designer.fixed_point import DesignState
from ..geometry.chimney_layout import WaveguideSpec
from ..obstruction.eigenproblem import ObstructionResult
from ..scattering.coefficients import format_value


def config_header(resolved: Dict[str, object]) -> str:
    return "config: " + json.dumps(resolved, sort_keys=True, separators=(',', ':'))


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence[object]],
              header: str = '') -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(columns)
        writer.writerows([format_value(v) for v in row] for row in rows)
    return path


def write_first_order(prediction: FirstOrderPrediction, spec: WaveguideSpec, path: str,
                      header: str = '') -> str:
    """One row per quantity: s1 coefficients, their eps multiples, then per-chimney data."""
    eps = spec.chimneys[0].width if spec.chimneys else 0.0
    p_minus, p_plus = prediction.predicted(eps)
    rows: List[Sequence[object]] = [
        ('s1_minus', '', prediction.s1_minus.real, prediction.s1_minus.imag),
        ('s1_plus', '', prediction.s1_plus.real, prediction.s1_plus.imag),
        ('eps_s1_minus', '', p_minus.real, p_minus.imag),
        ('eps_s1_plus', '', p_plus.real, p_plus.imag),
    ]
    for m, (a, w) in enumerate(zip(prediction.a, prediction.boundary_values), start=1):
        rows.append(('a', m, a.real, a.imag))
        rows.append(('w_plus_at_foot', m, w.real, w.imag))
    return write_csv(path, ('quantity', 'chimney', 're', 'im'), rows, header)


def write_sweep_summary(eps_values: Sequence[float], states: Sequence[DesignState], path: str,
                        header: str = '') -> str:
    rows = []
    for eps, state in zip(eps_values, states):
        rows.append((eps, state.iteration, state.converged, state.last_step,
                     abs(state.s_minus), abs(state.s_plus), *state.tau_vec,
                     float(max(abs(t) for t in state.tau_vec))))
    columns = ('eps', 'iterations', 'converged', 'final_step_norm', 'abs_s_minus', 'abs_s_plus',
               'tau1', 'tau2', 'tau3', 'max_abs_tau')
    return write_csv(path, columns, rows, header)


def write_truncation_sweep(results: Sequence[ObstructionResult], path: str, header: str = '') -> str:
    rows = [(r.x_minus, r.x_plus, r.mu1, r.k_star_bound, r.minmax_upper, r.residual)
            for r in results]
    return write_csv(path, ('x_minus', 'x_plus', 'mu1', 'k_star_bound', 'minmax_upper', 'residual'),
                     rows, header)


ORACLE_COLUMNS = ('spec', 'k', 'n_chimneys', 'delta', 'fem_h', 'max_snap',
                  're_fd_s_minus', 'im_fd_s_minus', 're_fem_s_minus', 'im_fem_s_minus',
                  're_fd_s_plus', 'im_fd_s_plus', 're_fem_s_plus', 'im_fem_s_plus',
                  'fd_error', 'fem_error', 'gap', 'error_bar', 'within_error_bars',
                  'fd_energy_defect', 'fem_energy_defect')


def write_oracle_compare(specs: Sequence[WaveguideSpec], comparisons: Sequence[Dict[str, object]],
                         path: str, header: str = '') -> str:
    """Richardson limits of both solvers side by side, one row per layout."""
    rows = []
    for index, (spec, c) in enumerate(zip(specs, comparisons)):
        rows.append((index, spec.k, len(spec.chimneys), c['delta'], c['fem_h'], c['max_snap'],
                     c['fd_s_minus'].real, c['fd_s_minus'].imag,
                     c['fem_s_minus'].real, c['fem_s_minus'].imag,
                     c['fd_s_plus'].real, c['fd_s_plus'].imag,
                     c['fem_s_plus'].real, c['fem_s_plus'].imag,
                     c['fd_error'], c['fem_error'], c['gap'], c['error_bar'],
                     c['within_error_bars'], c['fd_energy_defect'], c['fem_energy_defect']))
    return write_csv(path, ORACLE_COLUMNS, rows, header)
