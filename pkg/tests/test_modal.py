import math

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from invisiguide.errors import ConfigError, GeometryError
from invisiguide.geometry import SIGMA_MINUS, SIGMA_PLUS, build_mesh
from invisiguide.modal import (ModalBasis, axial_wavenumber, branch_sqrt, dtn_apply, dtn_matrix,
                               end_trace, line_trace, trace_integrals, trace_mass_matrix,
                               trace_projections, transverse_mode)

K = 0.8 * math.pi


def test_transverse_mode_values():
    assert transverse_mode(0, 0.37) == 1.0
    assert transverse_mode(1, 0.0) == pytest.approx(math.sqrt(2))
    assert transverse_mode(1, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert transverse_mode(2, 1.0) == pytest.approx(math.sqrt(2))
    assert transverse_mode(3, np.array([0.0, 1.0])) == pytest.approx([math.sqrt(2), -math.sqrt(2)])
    with pytest.raises(ValueError):
        transverse_mode(-1, 0.0)


def test_axial_wavenumber_examples():
    assert axial_wavenumber(K, 0) == pytest.approx(K)
    assert axial_wavenumber(K, 1) == pytest.approx(0.6j * math.pi)
    assert axial_wavenumber(K, 2) == pytest.approx(1j * math.pi * math.sqrt(3.36))


def test_cut_off_and_bad_wavenumber():
    with pytest.raises(ConfigError) as info:
        axial_wavenumber(math.pi, 1)
    assert info.value.reason == 'cut-off-frequency'
    with pytest.raises(ConfigError):
        axial_wavenumber(0.0, 0)


def test_branch_sqrt_cut():
    assert branch_sqrt(4.0) == pytest.approx(2.0)
    assert branch_sqrt(-4.0) == pytest.approx(2.0j)
    assert branch_sqrt(complex(-4.0, -0.0)) == pytest.approx(2.0j)
    assert branch_sqrt(1.0 - 1e-12j).imag >= 0.0


def test_branch_nonnegative_imaginary_part():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        k = rng.uniform(0.01, math.pi - 0.01)
        n = int(rng.integers(0, 51))
        beta = axial_wavenumber(k, n)
        assert beta.imag >= 0.0
        assert beta * beta == pytest.approx(k * k - (n * math.pi) ** 2, rel=1e-12, abs=1e-12)


def test_modes_are_orthonormal():
    basis = ModalBasis(K, 20)
    t, w = leggauss(200)
    y, w = 0.5 * (t + 1.0), 0.5 * w
    table = basis.modes(y)
    gram = (table * w) @ table.T
    assert np.allclose(gram, np.eye(20), atol=1e-12)


def test_basis_amplitudes():
    basis = ModalBasis(K, 3)
    assert basis.mode_amplitude(0) == pytest.approx(1.0 / math.sqrt(2 * K))
    assert basis.incident_wave(0.0) * basis.w_minus(0.0) == pytest.approx(1.0 / (2 * K))
    assert basis.evanescent_wave(1, 0.0, 0.0) == pytest.approx(
        math.sqrt(2) / math.sqrt(2 * 0.6 * math.pi))
    with pytest.raises(ConfigError):
        ModalBasis(K, 0)


@pytest.fixture(scope='module')
def strip_mesh():
    return build_mesh(-1.0, 1.0, [], 0.05).with_k(K)


def test_trace_of_each_end(strip_mesh):
    for tag, x in ((SIGMA_MINUS, -1.0), (SIGMA_PLUS, 1.0)):
        trace = end_trace(strip_mesh, tag)
        assert trace.x == pytest.approx(x)
        assert trace.size == 41
        assert trace_integrals(trace).sum() == pytest.approx(1.0)
        assert trace_mass_matrix(trace).sum() == pytest.approx(1.0)


def test_line_trace_alignment(strip_mesh):
    assert line_trace(strip_mesh, 0.5).size == 41
    with pytest.raises(GeometryError) as info:
        line_trace(strip_mesh, 0.5123)
    assert info.value.reason == 'station-not-aligned'


def test_projections_recover_sampled_mode(strip_mesh):
    basis = ModalBasis(K, 5)
    trace = end_trace(strip_mesh, SIGMA_PLUS)
    projections = trace_projections(basis, trace, transverse_mode(2, trace.y))
    expected = np.zeros(5)
    expected[2] = 1.0
    assert np.allclose(projections, expected, atol=1e-3)


def test_dtn_of_constant_is_exact(strip_mesh):
    basis = ModalBasis(K, 1)
    trace = end_trace(strip_mesh, SIGMA_PLUS)
    c = 0.3 - 1.7j
    out = dtn_apply(basis, trace, np.full(trace.size, c))
    assert np.allclose(out, 1j * K * c, atol=1e-12)


def test_dtn_of_first_mode(strip_mesh):
    basis = ModalBasis(K, 4)
    trace = end_trace(strip_mesh, SIGMA_MINUS)
    beta1 = basis.betas[1]
    values = transverse_mode(1, trace.y)
    out = dtn_apply(basis, trace, values)
    assert np.max(np.abs(out - 1j * beta1 * values)) <= 1e-3 * abs(beta1)


def test_dtn_matrix_is_symmetric_and_dissipative(strip_mesh):
    basis = ModalBasis(K, 20)
    trace = end_trace(strip_mesh, SIGMA_PLUS)
    d = dtn_matrix(basis, trace)
    assert np.allclose(d, d.T, atol=1e-14)

    rng = np.random.default_rng(3)
    v = rng.standard_normal(trace.size)
    v -= trace_integrals(trace) @ v
    assert trace_projections(ModalBasis(K, 1), trace, v)[0] == pytest.approx(0.0, abs=1e-12)
    form = -(v @ d @ v)
    assert form.real >= -1e-12
    assert abs(form.imag) <= 1e-12

    single = dtn_matrix(ModalBasis(K, 1), trace)
    w = rng.standard_normal(trace.size)
    assert abs((w @ single @ w).real) <= 1e-12


def test_dtn_applied_twice_squares_the_symbols(strip_mesh):
    basis = ModalBasis(K, 3)
    trace = end_trace(strip_mesh, SIGMA_MINUS)
    rng = np.random.default_rng(11)
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    table = basis.modes(trace.y)
    values = table.T @ c
    twice = dtn_apply(basis, trace, dtn_apply(basis, trace, values))
    expected = table.T @ ((1j * basis.betas) ** 2 * c)
    assert np.max(np.abs(twice - expected)) <= 1e-3 * np.max(np.abs(expected))
