import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistkac import field as fld
from twistkac import nongaussian as ng
from twistkac import oscillator as osc
from twistkac.twist import DivergenceError, PolyPotential, TwistSpec

SPEC = fld.FieldSpec(1.0, 1.0, 1.7, (2 * math.pi,), (0.3,), k_cut=4.0)


def test_lattice_examples():
    ks = fld.momentum_lattice(fld.FieldSpec(1.0, 1.0, 0.5, k_cut=2.5))
    assert sorted(ks[:, 0]) == [-2, -1, 0, 1, 2]
    ks2 = fld.momentum_lattice(fld.FieldSpec(1.0, 1.0, 0.5, (2 * math.pi, math.pi), (0.0, 0.0), k_cut=2.1))
    rows = {tuple(k) for k in ks2}
    assert (0.0, 2.0) in rows and (0.0, -2.0) in rows
    assert (0.0, 1.0) not in rows


def test_lattice_count_grows_like_ball():
    counts = [len(fld.momentum_lattice(fld.FieldSpec(1.0, 1.0, 0.5, (2 * math.pi,) * 2, (0, 0), k_cut=R)))
              for R in (10.0, 20.0)]
    assert counts[1] / counts[0] == pytest.approx(4.0, rel=0.1)


def test_single_mode_reduction():
    spec = SPEC.replace(k_cut=0.5)
    assert fld.field_partition_function(spec) == pytest.approx(
        osc.partition_function(TwistSpec(1.0, 1.0, 1.7)), rel=1e-14)


def test_untwisted_product_and_factorization():
    spec = SPEC.replace(theta=0.0, tau=(0.0,))
    expected = 1.0
    for k in fld.momentum_lattice(spec)[:, 0]:
        expected *= osc.partition_function(TwistSpec(math.sqrt(1 + k * k), 1.0, 0.0))
    assert fld.field_partition_function(spec) == pytest.approx(expected, rel=1e-12)
    assert fld.field_partition_function(SPEC) == pytest.approx(fld.mode_product_partition_function(SPEC),
                                                               rel=1e-12)


def test_shell_tail_bound():
    small, big = SPEC, SPEC.replace(k_cut=8.0)
    delta = fld.log_field_partition_function(big) - fld.log_field_partition_function(small)
    assert 0 <= delta <= fld.shell_tail_bound(small, extra=8.0) + 1e-15


def test_zero_momentum_coefficient_is_oscillator_kernel():
    xi = np.linspace(-0.9, 0.9, 7)
    assert np.allclose(fld.field_covariance_coefficient(SPEC, 0, [0.0], xi),
                       osc.pair_correlation(TwistSpec(1.0, 1.0, 1.7), xi, 0))


@given(st.integers(-4, 4), st.floats(0.0, 1.0))
@settings(max_examples=20, deadline=None)
def test_mode_twist_relation(k, u):
    xi = -u * SPEC.beta
    lhs = complex(fld.field_covariance_coefficient(SPEC, 0, [k], xi + SPEC.beta))
    rhs = np.exp(-1j * (SPEC.theta + k * SPEC.tau[0])) * complex(fld.field_covariance_coefficient(SPEC, 0, [k], xi))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_mode_coefficient_fourier_form():
    for k in (0, 2):
        a = complex(fld.field_covariance_coefficient(SPEC, 0, [k], 0.3))
        b = complex(fld.field_fourier_coefficient_sum(SPEC, 0, [k], 0.3))
        assert abs(a - b) < 1e-7


@given(st.floats(-3, 3), st.floats(-0.9, 0.9))
@settings(max_examples=20, deadline=None)
def test_position_kernel_twist_and_hermiticity(dx, u):
    xi = u * SPEC.beta
    a = complex(fld.field_covariance(SPEC, 0, [dx], xi))
    b = complex(fld.field_covariance(SPEC, 0, [-dx], -xi))
    assert a == pytest.approx(b.conjugate(), abs=1e-12)
    if xi <= 0:
        lhs = complex(fld.field_covariance(SPEC, 0, [dx], xi + SPEC.beta))
        rhs = np.exp(-1j * SPEC.theta) * complex(fld.field_covariance(SPEC, 0, [dx - SPEC.tau[0]], xi))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_spectrum_examples():
    untwisted = SPEC.replace(theta=0.0, tau=(0.0,), m=0.5)
    assert fld.covariance_spectrum(untwisted, 50.0)[-1] == pytest.approx(4.0)
    massless = SPEC.replace(m=0.0)
    spec_vals = fld.covariance_spectrum(massless, 100.0)
    assert spec_vals.min() > 0
    assert spec_vals[-1] == pytest.approx(fld.cbound(massless))
    assert fld.covariance_spectrum(SPEC, 100.0)[-1] == pytest.approx(fld.spectrum_max_closed_form(SPEC))


def test_sample_wraparound():
    for spec in (SPEC, SPEC.replace(real_field=True), SPEC.replace(weights=(1.0, 2.0))):
        sample = fld.sample_random_field(spec, seed=2, M=32)
        assert sample.wrap_residual() < 1e-10


def test_real_field_is_real():
    sample = fld.sample_random_field(SPEC.replace(real_field=True), seed=3, M=16)
    assert np.max(np.abs(np.imag(sample.values))) == 0


def test_equal_point_variance():
    spec = SPEC.replace(k_cut=2.0)
    M = 16
    vals = np.array([fld.sample_random_field(spec, ([[0.4]], [0.2]), seed=s, M=M).values[0, 0, 0]
                     for s in range(3000)])
    ks = fld.sampling_lattice(spec)
    target = fld.field_mode_variances(spec, ks, M).sum() / spec.volume
    emp = np.abs(vals) ** 2
    assert abs(emp.mean() - target) <= 3 * emp.std(ddof=1) / math.sqrt(len(emp))
    exact = complex(fld.field_covariance(spec, 0, [0.0], 0.0)).real
    assert abs(target - exact) / exact < 0.05


def test_cutoff_field():
    sample = fld.sample_random_field(SPEC, seed=4, M=16)
    same = fld.cutoff_field(sample, "none")
    assert np.allclose(same.values, sample.values)
    cut = fld.cutoff_field(sample, "indicator:1.5")
    big = np.abs(cut.ks[:, 0]) > 1.5
    assert np.all(cut.modes[:, big, :] == 0)
    assert np.allclose(cut.modes[:, ~big, :], sample.modes[:, ~big, :])


def test_relative_partition_free_and_quadratic():
    assert fld.field_relative_partition_mc(SPEC, None, samples=10).value == 1
    spec = SPEC.replace(k_cut=2.0)
    V = PolyPotential.modulus_power(1, 1, 0.5)
    est = fld.field_relative_partition_mc(spec, V, chi="none", points=8, T=32, samples=20_000, seed=5)
    trunc = fld.truncated_field_mass_renormalized_Z(spec, math.sqrt(0.5), 32, chi="none")
    assert abs(est.value - trunc) <= 3 * est.stderr
    exact = fld.field_mass_renormalized_Z(spec, math.sqrt(0.5), chi="none")
    assert abs(trunc - exact) / exact < 0.05


def test_single_mode_field_reduces_to_oscillator():
    spec = SPEC.replace(k_cut=0.5)
    lam = 0.6
    V = PolyPotential.modulus_power(1, 2, lam)
    a = fld.field_relative_partition_mc(spec, V, points=4, T=64, samples=20_000, seed=6)
    b = ng.relative_partition_mc(TwistSpec(1.0, 1.0, 1.7), PolyPotential.modulus_power(1, 2, lam / spec.volume),
                                 T=64, samples=20_000, seed=7)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)


def test_zero_mass_field_sweep():
    table = fld.zero_mass_field_sweep(SPEC, [1e-1, 1e-2, 1e-3])
    for row in table.rows:
        assert row["spectrum_max"] == pytest.approx(row["cbound_shifted"])
    with pytest.raises(DivergenceError):
        fld.zero_mass_field_sweep(SPEC.replace(theta=0.0, tau=(0.0,)), [0.1])


def test_real_field_partition_exponent():
    spec = SPEC.replace(real_field=True)
    assert fld.log_field_partition_function(spec) == pytest.approx(
        0.5 * fld.log_field_partition_function(SPEC.replace(theta=0.0)), rel=1e-12)
