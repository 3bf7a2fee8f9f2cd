import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evolevel.oscillator import (
    OscillatorPoint,
    PhysicalConstants,
    ThermalSpec,
    TruncationWarning,
    baseline_dipole,
    effective_frequency,
    energy_gap,
    evo_d01,
    thermal_evo,
)
from evolevel.spectral import BasisSpec, exact_d01

# frozen from exact_d01 at n_basis=40 (see test_baseline_matches_oracle)
D01_W1 = 0.7071067811865476
D01_W2 = 0.5

omegas = st.floats(0.2, 5.0)
epsilons = st.floats(-0.9, 2.0)
bs = st.floats(-2.0, 2.0)


@pytest.mark.parametrize(
    "omega, eps, expected",
    [(1.0, 0.0, 1.0), (2.0, -0.19, 1.8), (1.0, 0.21, 1.1)],
)
def test_effective_frequency(omega, eps, expected):
    assert effective_frequency(OscillatorPoint(omega, eps)) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("eps", [-1.0, -1.5])
def test_epsilon_domain_rejected(eps):
    with pytest.raises(ValueError):
        OscillatorPoint(1.0, eps)


def test_constants_must_be_positive():
    with pytest.raises(ValueError):
        PhysicalConstants(hbar=0.0)
    with pytest.raises(ValueError):
        PhysicalConstants(mass=-1.0)


def test_baseline_matches_oracle():
    for omega, frozen in [(1.0, D01_W1), (2.0, D01_W2)]:
        exact = exact_d01(OscillatorPoint(omega), BasisSpec(40)).d01_exact
        assert exact == pytest.approx(frozen, abs=1e-10)
        assert baseline_dipole(omega) == pytest.approx(exact, abs=1e-12)


def test_baseline_scaling():
    assert baseline_dipole(1.0) / baseline_dipole(4.0) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        baseline_dipole(0.0)


def test_baseline_with_units():
    c = PhysicalConstants(hbar=2.0, mass=0.5)
    exact = exact_d01(OscillatorPoint(1.3), BasisSpec(40), c).d01_exact
    assert baseline_dipole(1.3, c) == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize(
    "omega, eps, hbar, expected",
    [(1.0, 0.0, 1.0, 1.0), (1.0, 0.21, 1.0, 1.1), (3.0, 0.0, 2.0, 6.0)],
)
def test_energy_gap(omega, eps, hbar, expected):
    got = energy_gap(OscillatorPoint(omega, eps), PhysicalConstants(hbar=hbar))
    assert got == pytest.approx(expected, rel=1e-15)


def test_evo_d01_reductions():
    r = evo_d01(OscillatorPoint(1.0, 0.0, 0.0))
    assert r.d01 == pytest.approx(D01_W1, abs=1e-15)
    assert r.normalization_N == 1.0 and r.correction_numerator == 1.0
    r = evo_d01(OscillatorPoint(1.0, 0.1, 0.0))
    assert r.d01 == pytest.approx(1.1 * D01_W1, rel=1e-15)


def test_evo_d01_small_b_hand_evaluated():
    t = 1e-4 * D01_W1
    expected = D01_W1 * (1 - t) / (1 + t)
    assert evo_d01(OscillatorPoint(1.0, 0.0, 0.01)).d01 == pytest.approx(expected, rel=1e-14)


def test_breakdown_fields():
    r = evo_d01(OscillatorPoint(0.7, 0.3, 0.4))
    assert r.omega_prime == pytest.approx(0.7 * math.sqrt(1.3), rel=1e-15)
    assert r.delta == r.omega_prime
    t = 0.16 * r.d01_unperturbed / r.delta**2
    assert r.correction_numerator == pytest.approx(1 - t)
    assert r.normalization_N == pytest.approx(1 + t)


@given(omegas, epsilons, bs)
def test_evo_even_in_b(omega, eps, b):
    assert evo_d01(OscillatorPoint(omega, eps, b)).d01 == evo_d01(OscillatorPoint(omega, eps, -b)).d01


@given(omegas, epsilons, bs)
def test_normalization_at_least_one(omega, eps, b):
    assert evo_d01(OscillatorPoint(omega, eps, b)).normalization_N >= 1.0


@given(omegas, epsilons)
def test_b_zero_reduction_exact(omega, eps):
    got = evo_d01(OscillatorPoint(omega, eps, 0.0)).d01
    assert got == pytest.approx((1 + eps) * baseline_dipole(omega), rel=1e-15)


def test_thermal_zero_temperature_limits():
    assert thermal_evo(OscillatorPoint(1.0), ThermalSpec(1e-6)) == pytest.approx(D01_W1, abs=1e-12)
    # exact ground element at omega' = 1.1
    exact = exact_d01(OscillatorPoint(1.0, 0.21), BasisSpec(60)).d01_exact
    assert exact == pytest.approx(0.674200, abs=1e-6)
    assert thermal_evo(OscillatorPoint(1.0, 0.21), ThermalSpec(1e-6)) == pytest.approx(exact, abs=1e-10)


def test_thermal_truncation_convergence():
    p = OscillatorPoint(1.0)
    a = thermal_evo(p, ThermalSpec(1.0, 50))
    b = thermal_evo(p, ThermalSpec(1.0, 100))
    assert abs(a - b) < 1e-10


@pytest.mark.filterwarnings("ignore::evolevel.oscillator.TruncationWarning")
def test_thermal_tail_shrinks_geometrically():
    p = OscillatorPoint(1.0, 0.1, 0.2)
    diffs = [abs(thermal_evo(p, ThermalSpec(2.0, n)) - thermal_evo(p, ThermalSpec(2.0, 2 * n))) for n in (4, 8, 16)]
    ratios = [diffs[k + 1] / diffs[k] for k in range(2)]
    assert all(r < 0.2 for r in ratios)


def test_thermal_approaches_evo_as_temperature_drops():
    # epsilon = 0: thermal ladder elements at omega' and the d01 model coincide for n = 0
    p = OscillatorPoint(0.8, 0.0, 0.3)
    target = evo_d01(p).d01
    delta = energy_gap(p)
    gaps = [abs(thermal_evo(p, ThermalSpec(f * delta)) - target) for f in (0.3, 0.1, 0.03, 1e-3)]
    assert all(gaps[k + 1] <= gaps[k] for k in range(3))
    assert gaps[-1] < 1e-8


def test_thermal_truncation_warning():
    with pytest.warns(TruncationWarning):
        thermal_evo(OscillatorPoint(1.0), ThermalSpec(50.0, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        thermal_evo(OscillatorPoint(1.0), ThermalSpec(1.0))


def test_thermal_rejects_bad_spec():
    with pytest.raises(ValueError):
        ThermalSpec(0.0)
    with pytest.raises(ValueError):
        ThermalSpec(1.0, 1)


@settings(max_examples=30)
@given(st.floats(0.3, 3.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_thermal_is_finite_and_bounded(omega, eps, b):
    p = OscillatorPoint(omega, eps, b)
    v = thermal_evo(p, ThermalSpec(1.0))
    ladder_max = math.sqrt(512 / (2 * effective_frequency(p)))
    assert np.isfinite(v) and abs(v) <= ladder_max
