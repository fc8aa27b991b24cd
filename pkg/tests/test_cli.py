import csv
import io
import json
import logging
import math

import pytest

from invisiguide.cli.config import (DEFAULT_CONFIG, build_run_config, deep_merge, evaluate_number,
                                    load_config, parse_override)
from invisiguide.cli.exporters import ORACLE_COLUMNS
from invisiguide.cli.main import (EXIT_CONFIG, EXIT_INTERNAL, EXIT_NON_CONVERGENCE, EXIT_SOLVER,
                                  HANDLERS, ColoredFormatter, exit_code_for, main)
from invisiguide.errors import ConfigError, ConvergenceError, GeometryError, SolverError


def read_record(path):
    record = {}
    for line in open(path):
        if line.startswith('#'):
            continue
        key, value = line.rstrip('\n').split(' = ')
        record[key] = value
    return record


def read_table(path):
    with open(path, newline='') as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith('#')))


@pytest.mark.parametrize("text, expected", [
    ("0.8*pi", 0.8 * math.pi),
    ("3*pi/(4*0.8*pi)", 3 / 3.2),
    ("-(1 + 2) / 4", -0.75),
    (2, 2.0),
])
def test_evaluate_number(text, expected):
    assert evaluate_number(text) == pytest.approx(expected)


@pytest.mark.parametrize("text", ["__import__('os')", "pi**2", "1/0", "e", True, None, "1 +"])
def test_evaluate_number_rejects(text):
    with pytest.raises(ConfigError):
        evaluate_number(text)


def test_parse_override():
    assert parse_override("spec.k=1.5") == {'spec': {'k': 1.5}}
    assert parse_override("spec.k=0.8*pi") == {'spec': {'k': '0.8*pi'}}
    assert parse_override('sweep.eps_values=[0.3, 0.1]') == {'sweep': {'eps_values': [0.3, 0.1]}}
    with pytest.raises(ConfigError):
        parse_override("spec.k")


def test_deep_merge_keeps_defaults():
    merged = deep_merge(DEFAULT_CONFIG, {'spec': {'k': 2.0}})
    assert merged['spec']['k'] == 2.0
    assert merged['spec']['dtn_terms'] == 20
    assert DEFAULT_CONFIG['spec']['k'] == '0.8*pi'


def test_load_config_layers(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'command': 'predict', 'design': {'eps': 0.2}}))
    config = load_config(str(path), ['design.eps=0.1'])
    assert config['command'] == 'predict'
    assert config['design']['eps'] == 0.1

    with pytest.raises(ConfigError):
        load_config(str(tmp_path / 'missing.json'))
    path.write_text('[1, 2]')
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_build_run_config():
    config = deep_merge(DEFAULT_CONFIG, {
        'spec': {'chimneys': [{'x_center': '-3*pi/(4*0.8*pi)', 'height': '1/0.8', 'width': 0.3}]}})
    cfg = build_run_config(config, 'results')
    assert cfg.spec.k == pytest.approx(0.8 * math.pi)
    assert cfg.spec.chimneys[0].x_center == pytest.approx(-0.9375)
    assert cfg.design.spec_options['mesh_target_h'] == 0.1
    assert cfg.out_dir == 'results'

    with pytest.raises(ConfigError):
        build_run_config(deep_merge(DEFAULT_CONFIG, {'command': 'plot'}))
    with pytest.raises(ConfigError):
        build_run_config(deep_merge(DEFAULT_CONFIG, {'spec': {'chimneys': [{'x_center': 0}]}}))
    with pytest.raises(ConfigError):
        build_run_config(deep_merge(DEFAULT_CONFIG, {'sweep': {'kind': 'mesh'}}))
    with pytest.raises(ConfigError):
        build_run_config(deep_merge(DEFAULT_CONFIG, {'spec': {'k': 0}}))


def test_exit_codes():
    assert exit_code_for(ConfigError("x")) == EXIT_CONFIG
    assert exit_code_for(GeometryError("x")) == EXIT_CONFIG
    assert exit_code_for(SolverError("x")) == EXIT_SOLVER
    assert exit_code_for(ConvergenceError("x")) == EXIT_NON_CONVERGENCE
    assert ConvergenceError("did not\n converge", reason="max-iter").one_line() == \
        "max-iter: did not converge"


def test_colored_formatter_keeps_the_message():
    stream = io.StringIO()
    handler = logging.StreamHandler(stream)
    handler.setFormatter(ColoredFormatter("%(levelname)s %(message)s"))
    record = logging.LogRecord('invisiguide', logging.WARNING, __file__, 1, "mesh %d", (3,), None)
    handler.emit(record)
    assert "WARNING" in stream.getvalue()
    assert stream.getvalue().rstrip().endswith("mesh 3")
    assert record.levelname == "WARNING"


def test_predict_writes_first_order_table(tmp_path):
    out = tmp_path / 'predict'
    assert main(['predict', '--out', str(out), '-q']) == 0
    lines = (out / 'first_order.csv').read_text().splitlines()
    assert lines[0].startswith('# config: {')
    assert lines[1] == 'quantity,chimney,re,im'
    assert len(lines) == 2 + 4 + 2 * 3
    s1_plus = lines[3].split(',')
    assert s1_plus[0] == 's1_plus'
    assert abs(float(s1_plus[3])) < 1e-12


def test_runs_are_deterministic(tmp_path):
    for name in ('a', 'b'):
        assert main(['predict', '--out', str(tmp_path / name), '-q',
                     '--override', 'design.t_initial=[0.2, -0.1, 0.05]']) == 0
    first = (tmp_path / 'a' / 'first_order.csv').read_bytes()
    assert first == (tmp_path / 'b' / 'first_order.csv').read_bytes()


def test_solve_pure_strip(tmp_path):
    out = tmp_path / 'solve'
    code = main(['solve', '--out', str(out), '-q',
                 '--override', 'spec.trunc_half_length=1',
                 '--override', 'spec.mesh_target_h=0.25'])
    assert code == 0
    for name in ('coefficients.txt', 'field_nodes.txt', 'field_elements.txt',
                 'mesh_vertices.txt', 'mesh_elements.txt', 'mesh_edges.txt'):
        assert (out / name).exists()
    record = read_record(out / 'coefficients.txt')
    assert float(record['abs_R']) < 1e-3
    assert float(record['abs_T']) == pytest.approx(1.0, abs=1e-2)
    assert int(record['n_nodes']) == 17 * 9


def test_invalid_spec_exits_with_config_code(tmp_path, capsys):
    code = main(['solve', '--out', str(tmp_path), '-q', '--override', 'spec.k=4'])
    assert code == EXIT_CONFIG
    assert capsys.readouterr().err.startswith("error: geometry-error:")


def test_missing_config_file(tmp_path, capsys):
    code = main(['solve', '--config', str(tmp_path / 'nope.json'), '--out', str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "config-error" in capsys.readouterr().err


def test_obstruction_command(tmp_path):
    out = tmp_path / 'obstruction'
    code = main(['obstruction', '--out', str(out), '-q',
                 '--override', 'obstruction.mesh_target_h=0.1'])
    assert code == 0
    record = read_record(out / 'obstruction.txt')
    assert float(record['mu1']) == pytest.approx(math.pi ** 2 / 4, rel=1e-3)
    assert record['bound_below_k'] == 'true'


def test_truncation_sweep_command(tmp_path):
    out = tmp_path / 'sweep'
    code = main(['sweep', '--out', str(out), '-q', '--threads', '2',
                 '--override', 'sweep.kind="truncation"',
                 '--override', 'sweep.x_minus_values=[2.0]',
                 '--override', 'sweep.x_plus_values=[2.0, 2.5]',
                 '--override', 'obstruction.mesh_target_h=0.2'])
    assert code == 0
    lines = (out / 'truncation_sweep.csv').read_text().splitlines()
    assert lines[1] == 'x_minus,x_plus,mu1,k_star_bound,minmax_upper,residual'
    assert len(lines) == 4


def test_zero_wavenumber_is_a_config_error(tmp_path, capsys):
    code = main(['predict', '--out', str(tmp_path), '-q', '--override', 'spec.k=0'])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.startswith("error: config-error:")
    assert "spec.k" in err


def test_unexpected_failure_exits_with_internal_code(tmp_path, capsys, monkeypatch):
    def broken(cfg, header):
        raise RuntimeError("lost the mesh")

    monkeypatch.setitem(HANDLERS, 'predict', broken)
    code = main(['predict', '--out', str(tmp_path), '-q'])
    assert code == EXIT_INTERNAL
    assert capsys.readouterr().err.startswith("error: internal-error: RuntimeError: lost the mesh")


@pytest.mark.slow
def test_design_command(tmp_path):
    out = tmp_path / 'design'
    code = main(['design', '--out', str(out), '-q',
                 '--override', 'spec.mesh_target_h=0.2',
                 '--override', 'design.eps=0.1'])
    assert code == 0
    rows = read_table(out / 'convergence.csv')
    assert float(rows[-1]['step_norm']) <= 1e-9
    final = json.load(open(out / 'final_spec.json'))
    assert final['converged'] is True
    assert len(final['chimneys']) == 3
    record = read_record(out / 'coefficients.txt')
    assert float(record['abs_R']) <= 1e-6
    assert (out / 'scattered_nodes.txt').exists()


@pytest.mark.slow
def test_oracle_compare_command(tmp_path):
    config = tmp_path / 'oracle.json'
    config.write_text(json.dumps({
        'spec': {'trunc_half_length': 3.0,
                 'chimneys': [{'x_center': 0.0, 'height': 1.0, 'width': 0.3}]},
        'oracle': {'delta': 0.05, 'fem_h': 0.1, 'n_random_specs': 0},
    }))
    out = tmp_path / 'oracle'
    assert main(['oracle-compare', '--config', str(config), '--out', str(out), '-q']) == 0
    lines = (out / 'oracle_compare.csv').read_text().splitlines()
    assert lines[1] == ','.join(ORACLE_COLUMNS)
    rows = read_table(out / 'oracle_compare.csv')
    assert len(rows) == 1
    assert float(rows[0]['gap']) <= 1e-3


@pytest.mark.slow
def test_design_sweep_command(tmp_path):
    out = tmp_path / 'sweep'
    code = main(['sweep', '--out', str(out), '-q', '--threads', '2',
                 '--override', 'spec.mesh_target_h=0.2',
                 '--override', 'sweep.eps_values=[0.2, 0.1]'])
    assert code == 0
    rows = read_table(out / 'sweep_summary.csv')
    assert [float(row['eps']) for row in rows] == [0.2, 0.1]
    assert all(row['converged'] == 'true' for row in rows)
    for eps in ('0.2', '0.1'):
        assert read_table(out / f'convergence_eps_{eps}.csv')


@pytest.mark.slow
def test_remainder_sweep_command(tmp_path):
    out = tmp_path / 'remainder'
    code = main(['sweep', '--out', str(out), '-q',
                 '--override', 'sweep.kind="remainder"',
                 '--override', 'sweep.eps_values=[0.2, 0.1, 0.05]'])
    assert code == 0
    text = (out / 'remainder_sweep.csv').read_text()
    assert '# slope = ' in text
    rows = read_table(out / 'remainder_sweep.csv')
    assert [float(row['eps']) for row in rows] == [0.2, 0.1, 0.05]
    assert all(float(row['abs_s_minus']) > 0 for row in rows)
