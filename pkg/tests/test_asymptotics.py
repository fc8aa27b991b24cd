import math

import numpy as np
import pytest

from invisiguide.asymptotics import (chimney_profile, chimney_profile_derivative, first_order,
                                     fit_exponent, residual_scaling_probe, write_remainder_csv)
from invisiguide.designer import default_positions, fem_oracle
from invisiguide.errors import GeometryError
from invisiguide.geometry import Chimney, WaveguideSpec, three_chimney_spec

K = 0.8 * math.pi


def test_heights_at_half_wavelength_give_zero():
    spec = three_chimney_spec(K, 0.3, default_positions(K))
    prediction = first_order(spec)
    assert abs(prediction.s1_minus) < 1e-12
    assert abs(prediction.s1_plus) < 1e-12
    assert all(abs(a) < 1e-12 for a in prediction.a)


def test_single_chimney_with_unit_tangent():
    spec = WaveguideSpec(K, (Chimney(0.0, math.pi / (4 * K), 0.3),))
    prediction = first_order(spec)
    assert 1j * prediction.s1_plus == pytest.approx(-0.5)
    assert 1j * prediction.s1_minus == pytest.approx(-0.5)
    assert prediction.predicted(0.3) == pytest.approx((0.15j, 0.15j))
    assert prediction.boundary_values[0] == pytest.approx(1 / math.sqrt(2 * K))


def test_s1_plus_is_purely_imaginary():
    rng = np.random.default_rng(11)
    for _ in range(25):
        k = rng.uniform(0.3 * math.pi, 0.9 * math.pi)
        heights = rng.uniform(0.3, 1.5, size=3)
        if any(abs(math.cos(k * h)) < 0.05 for h in heights):
            continue
        spec = three_chimney_spec(k, 0.2, (-1.0, 0.0, 1.0), heights)
        s1_plus = first_order(spec).s1_plus
        assert s1_plus.real == 0.0
        assert s1_plus.imag == pytest.approx(0.5 * sum(math.tan(k * h) for h in heights))


def test_translation_covariance():
    heights = (0.7, 1.1)
    base = WaveguideSpec(K, tuple(Chimney(x, h, 0.2) for x, h in zip((-0.6, 0.5), heights)))
    shift = 0.37
    moved = WaveguideSpec(K, tuple(Chimney(x + shift, h, 0.2) for x, h in zip((-0.6, 0.5), heights)))
    a, b = first_order(base), first_order(moved)
    assert b.s1_minus == pytest.approx(a.s1_minus * np.exp(2j * K * shift))
    assert b.s1_plus == pytest.approx(a.s1_plus)


def test_resonant_height_is_rejected():
    spec = WaveguideSpec(K, (Chimney(0.0, math.pi / (2 * K), 0.3),))
    with pytest.raises(GeometryError) as info:
        first_order(spec)
    assert info.value.reason == 'resonant-height'


@pytest.mark.parametrize("h", [0.4, 0.9, 1.25, 1.7])
def test_chimney_profile_solves_the_junction_problem(h):
    bv = 0.3 - 0.4j
    assert chimney_profile(K, h, bv, 1.0) == pytest.approx(bv)
    scale = abs(bv) * K * (1.0 + abs(math.tan(K * h)))
    assert abs(chimney_profile_derivative(K, h, bv, 1.0 + h)) <= 1e-12 * scale

    step = 1e-4
    y = np.linspace(1.0 + 2 * step, 1.0 + h - 2 * step, 25)
    v = lambda s: chimney_profile(K, h, bv, s)
    second = (v(y + step) - 2 * v(y) + v(y - step)) / step ** 2
    assert np.max(np.abs(second + K * K * v(y))) <= 1e-5 * scale


def test_profile_at_half_wavelength_flips_sign():
    bv = 1.0 + 0.5j
    assert chimney_profile(K, math.pi / K, bv, 1.0 + math.pi / K) == pytest.approx(-bv)


def test_fit_exponent_on_synthetic_data():
    eps = [0.4, 0.3, 0.2, 0.1, 0.05]
    values = [2.0 * e ** 1.5 for e in eps]
    assert fit_exponent(eps, values) == pytest.approx(1.5)
    assert math.isnan(fit_exponent(eps, [0.0] * 5))


def test_remainder_scan_with_synthetic_oracle(tmp_path):
    def oracle(spec):
        eps = spec.chimneys[0].width
        return 0.5 * eps ** 2, 1j * eps ** 2

    scan = residual_scaling_probe(K, default_positions(K), [0.4, 0.3, 0.2, 0.1], oracle, threads=2)
    assert scan.eps == [0.4, 0.3, 0.2, 0.1]
    assert scan.slope == pytest.approx(2.0)
    assert scan.slope_minus == pytest.approx(2.0)
    assert scan.s_plus[-1] == pytest.approx(0.01j)

    path = write_remainder_csv(scan, str(tmp_path / 'remainder.csv'), header='scan')
    lines = open(path).read().splitlines()
    assert lines[0] == '# scan'
    assert lines[1].startswith('# slope = ')
    assert float(lines[1].split(',')[0].split('=')[1]) == pytest.approx(2.0)
    assert lines[2] == 'eps,re_s_minus,im_s_minus,re_s_plus,im_s_plus,abs_s_minus,abs_s_plus'
    assert len(lines) == 7


@pytest.mark.slow
def test_remainder_exponent_on_the_default_mesh():
    scan = residual_scaling_probe(K, default_positions(K), [0.4, 0.3, 0.2, 0.1, 0.05],
                                   fem_oracle(), mesh_target_h=0.1)
    # close to 2 rather than 3/2: the eps^2 term dominates at these widths
    assert scan.slope == pytest.approx(1.88, abs=0.05)
