import math

import numpy as np
import pytest
import scipy.sparse as sp

from invisiguide.errors import ConfigError, SolverError
from invisiguide.geometry import (Chimney, WaveguideSpec, SIGMA_MINUS, build_mesh,
                                  generate_mesh)
from invisiguide.modal import ModalBasis
from invisiguide.scattering import fem_coefficients
from invisiguide.solver import (assemble, assemble_volume, field_at_stations, incident_forcing,
                                scattered_field, solve, solve_spec, write_field, ComplexField)

K = 0.8 * math.pi


@pytest.fixture(scope='module')
def strip_solution():
    spec = WaveguideSpec(K, trunc_half_length=1.0, mesh_target_h=0.1)
    return solve_spec(spec)


def test_volume_matrices_reproduce_constants():
    mesh = build_mesh(-1.0, 1.0, [Chimney(0.0, 0.8, 0.3)], 0.2)
    stiffness, mass = assemble_volume(mesh)
    ones = np.ones(mesh.n_nodes)
    assert np.abs(stiffness @ ones).max() < 1e-11
    assert ones @ (mass @ ones) == pytest.approx(2.0 + 0.3 * 0.8)
    x = mesh.nodes[:, 0]
    # int |grad x|^2 = area
    assert x @ (stiffness @ x) == pytest.approx(2.0 + 0.3 * 0.8)


def test_forcing_lives_on_sigma_minus_only():
    mesh = generate_mesh(WaveguideSpec(K, trunc_half_length=1.0, mesh_target_h=0.25))
    basis = ModalBasis(K, 20)
    system = assemble(mesh, basis)
    support = set(np.flatnonzero(system.rhs))
    assert support <= set(mesh.nodes_with_tag(SIGMA_MINUS))
    expected = -2j * K * np.exp(-1j * K) / math.sqrt(2 * K)
    assert incident_forcing(basis, -1.0) == pytest.approx(expected)
    assert system.rhs.sum() == pytest.approx(expected)


def test_system_is_complex_symmetric():
    spec = WaveguideSpec(K, (Chimney(0.0, 1.0, 0.3),), trunc_half_length=3.0, mesh_target_h=0.25)
    system = assemble(generate_mesh(spec), ModalBasis(K, spec.dtn_terms))
    assert system.symmetry_defect() <= 1e-12
    assert system.n_dofs == system.mesh.n_nodes
    assert set(system.dtn) == {1, 2}


def test_inconsistent_wavenumber():
    mesh = build_mesh(-1.0, 1.0, [], 0.5).with_k(1.0)
    with pytest.raises(ConfigError) as info:
        assemble(mesh, ModalBasis(2.0, 5))
    assert info.value.reason == 'inconsistent-k'


def test_pure_strip_reproduces_incident_wave(strip_solution):
    total, _ = strip_solution
    assert np.abs(total.values - total.incident()).max() <= 2e-3


def test_scattered_plus_incident_is_total(strip_solution):
    total, _ = strip_solution
    scattered = scattered_field(total)
    assert np.allclose(scattered.values + total.incident(), total.values, rtol=0, atol=1e-15)


def test_station_values(strip_solution):
    total, system = strip_solution
    (values,) = field_at_stations(total, [0.5])
    assert len(values) == 21
    assert np.allclose(values, system.basis.incident_wave(0.5), atol=2e-3)


def test_singular_system_is_reported(strip_solution):
    _, system = strip_solution
    n = system.n_dofs
    broken = assemble(system.mesh, system.basis)
    broken.matrix = sp.diags(np.r_[np.ones(n - 1), 0.0]).astype(complex).tocsc()
    with pytest.raises(SolverError) as info:
        solve(broken)
    assert info.value.reason == 'near-singular'


def test_field_rejects_wrong_shape(strip_solution):
    total, _ = strip_solution
    with pytest.raises(ValueError):
        ComplexField(total.mesh, np.zeros(3), K)
    bad = total.values.copy()
    bad[0] = np.nan
    with pytest.raises(SolverError):
        ComplexField(total.mesh, bad, K)


def test_write_field(strip_solution, tmp_path):
    total, _ = strip_solution
    nodes_path = str(tmp_path / 'field.txt')
    elements_path = str(tmp_path / 'elements.txt')
    written = write_field(total, nodes_path, elements_path, header='run')
    assert written == [nodes_path, elements_path]
    lines = open(nodes_path).read().splitlines()
    assert lines[:2] == ['# run', '# index x y re im abs']
    assert len(lines) == 2 + total.mesh.n_nodes
    fields = lines[2].split()
    assert len(fields) == 6
    assert float(fields[5]) == pytest.approx(abs(total.values[0]))


def chimney_spec(**options):
    options.setdefault('trunc_half_length', 3.0)
    options.setdefault('min_cells_across_chimney', 2)
    return WaveguideSpec(K, (Chimney(0.0, 1.0, 0.2),), **options)


def coefficient_change(a, b):
    return max(abs(a.s_minus - b.s_minus), abs(a.s_plus - b.s_plus))


@pytest.fixture(scope='module')
def refinement_levels():
    return {h: fem_coefficients(chimney_spec(mesh_target_h=h)) for h in (0.1, 0.05)}


def test_more_dtn_terms_change_less_than_the_mesh(refinement_levels):
    coarse = refinement_levels[0.1]
    more_terms = fem_coefficients(chimney_spec(mesh_target_h=0.1, dtn_terms=40))
    dtn_change = coefficient_change(coarse, more_terms)
    assert dtn_change <= 1e-6
    assert dtn_change < coefficient_change(coarse, refinement_levels[0.05])


@pytest.mark.slow
def test_coefficients_converge_under_refinement(refinement_levels):
    finest = fem_coefficients(chimney_spec(mesh_target_h=0.025))
    first = coefficient_change(refinement_levels[0.1], refinement_levels[0.05])
    second = coefficient_change(refinement_levels[0.05], finest)
    assert second <= 0.6 * first
    assert second <= 1e-3
