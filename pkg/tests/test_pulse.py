import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rubyqsl.geometry import Species
from rubyqsl.pulse import ConstantDrive, SweepQuenchSweep, detuning_at, rabi_at, sweep_rate

TAU = 2.5


def make_pulse(**kw):
    base = dict(
        tau=TAU,
        t_q=0.25,
        delta_initial=-8.0,
        delta_quench=0.0,
        delta_final_rb=12.0,
        nu=2.0,
        omega0=2.0,
    )
    base.update(kw)
    return SweepQuenchSweep(**base)


# --- segment endpoints ------------------------------------------------------

def test_detuning_holds_and_endpoints():
    p = make_pulse()
    for s in Species:
        assert detuning_at(p, 0.0, s) == pytest.approx(-8.0)
        assert detuning_at(p, 0.1 * TAU, s) == pytest.approx(-8.0)
        # sweep 1 lands exactly on the quench value at tau/2
        assert detuning_at(p, 0.5 * TAU, s) == pytest.approx(0.0, abs=1e-12)
        assert detuning_at(p, 0.5 * TAU + p.t_q, s) == pytest.approx(0.0, abs=1e-12)
    # sweep 2 lands exactly on the species-split final value at 0.9 tau
    assert detuning_at(p, 0.9 * TAU, Species.RB) == pytest.approx(12.0)
    assert detuning_at(p, 0.9 * TAU, Species.CS) == pytest.approx(24.0)
    assert detuning_at(p, TAU, Species.RB) == pytest.approx(12.0)
    assert detuning_at(p, TAU, Species.CS) == pytest.approx(24.0)


def test_final_detuning_ratio():
    p = make_pulse(nu=0.1)
    assert detuning_at(p, TAU, Species.CS) == pytest.approx(
        0.1 * detuning_at(p, TAU, Species.RB)
    )
    # initial and quench values are shared between species
    for t in (0.0, 0.2 * TAU, 0.5 * TAU + 0.1):
        assert detuning_at(p, t, Species.RB) == detuning_at(p, t, Species.CS)


def test_rabi_envelope():
    p = make_pulse()
    assert rabi_at(p, 0.0) == 0.0
    assert rabi_at(p, 0.05 * TAU) == pytest.approx(1.0)  # sin^2(pi/4) = 1/2
    assert rabi_at(p, 0.1 * TAU) == pytest.approx(2.0)
    assert rabi_at(p, 0.5 * TAU) == pytest.approx(2.0)
    assert rabi_at(p, 0.9 * TAU) == pytest.approx(2.0)
    assert rabi_at(p, 0.95 * TAU) == pytest.approx(1.0)
    assert rabi_at(p, TAU) == pytest.approx(0.0, abs=1e-12)


def test_ramp_constants():
    assert make_pulse(t_q=0.0).alpha2 == pytest.approx(5.0 * math.pi / 4.0)
    assert make_pulse().alpha1 == pytest.approx(5.0 * math.pi / 4.0)
    # t_q = tau/10 compresses the second sweep: pi / (2*(2/5 - 1/10))
    assert make_pulse(t_q=0.25).alpha2 == pytest.approx(5.0 * math.pi / 3.0)


def test_chi_constants():
    p = make_pulse()
    assert p.chi1 == pytest.approx(8.0)
    assert p.chi2(Species.RB) == pytest.approx(12.0)
    assert p.chi2(Species.CS) == pytest.approx(24.0)


# --- continuity and smoothness ----------------------------------------------

@settings(max_examples=60, deadline=None)
@given(
    t_q=st.floats(min_value=0.0, max_value=0.1 * TAU),
    nu=st.floats(min_value=0.05, max_value=2.5),
)
def test_detuning_continuous_at_boundaries(t_q, nu):
    p = make_pulse(t_q=t_q, nu=nu)
    eps = 1e-9
    boundaries = [0.1 * TAU, 0.5 * TAU, 0.5 * TAU + t_q, 0.9 * TAU]
    for s in Species:
        for tb in boundaries:
            left = detuning_at(p, max(tb - eps, 0.0), s)
            right = detuning_at(p, min(tb + eps, TAU), s)
            assert abs(left - right) < 1e-6


def test_sweeps_are_monotone():
    p = make_pulse()
    for s in Species:
        seg1 = detuning_at(p, np.linspace(0.1 * TAU, 0.5 * TAU, 400), s)
        assert np.all(np.diff(seg1) >= -1e-12)
        seg2 = detuning_at(p, np.linspace(0.5 * TAU + p.t_q, 0.9 * TAU, 400), s)
        assert np.all(np.diff(seg2) >= -1e-12)


def test_vectorized_matches_scalar():
    p = make_pulse()
    ts = np.linspace(0.0, TAU, 101)
    for s in Species:
        vec = detuning_at(p, ts, s)
        assert vec.shape == ts.shape
        for k in (0, 13, 50, 100):
            assert vec[k] == detuning_at(p, float(ts[k]), s)
    vec = rabi_at(p, ts)
    for k in (0, 13, 50, 100):
        assert vec[k] == rabi_at(p, float(ts[k]))


# --- sweep rate ---------------------------------------------------------------

def test_sweep_rate_zero_on_holds():
    p = make_pulse()
    for s in Species:
        for t in (0.0, 0.05 * TAU, 0.5 * TAU + 0.5 * p.t_q, 0.95 * TAU, TAU):
            assert sweep_rate(p, t, s) == 0.0


@pytest.mark.parametrize("species", list(Species))
@pytest.mark.parametrize("t_q", [0.0, 0.1, 0.25])
def test_sweep_rate_matches_finite_difference(species, t_q):
    p = make_pulse(t_q=t_q)
    h = 1e-7
    # interior points of both sweep segments, away from the kinks
    ts = np.concatenate([
        np.linspace(0.1 * TAU + 0.01, 0.5 * TAU - 0.01, 23),
        np.linspace(0.5 * TAU + t_q + 0.01, 0.9 * TAU - 0.01, 23),
    ])
    for t in ts:
        num = (detuning_at(p, t + h, species) - detuning_at(p, t - h, species)) / (2 * h)
        ana = sweep_rate(p, t, species)
        assert ana == pytest.approx(num, rel=1e-6, abs=1e-6)


def test_sweep_rate_frozen_midpoint():
    # segment-1 midpoint t = 0.3*tau: rate = chi1*alpha1/tau * sin(2*alpha1*0.2)
    p = make_pulse()
    a1 = 5.0 * math.pi / 4.0
    expected = 8.0 * a1 / TAU * math.sin(2.0 * a1 * 0.2)
    assert sweep_rate(p, 0.3 * TAU, Species.RB) == pytest.approx(expected, rel=1e-12)


# --- validation ----------------------------------------------------------------

def test_quench_duration_bounds():
    make_pulse(t_q=0.0)
    make_pulse(t_q=0.1 * TAU)
    with pytest.raises(ValueError):
        make_pulse(t_q=0.11 * TAU)
    with pytest.raises(ValueError):
        make_pulse(t_q=-0.01)


def test_parameter_validation():
    with pytest.raises(ValueError):
        make_pulse(tau=-1.0)
    with pytest.raises(ValueError):
        make_pulse(delta_initial=1.0)
    with pytest.raises(ValueError):
        make_pulse(delta_final_rb=-5.0)
    with pytest.raises(ValueError):
        make_pulse(omega0=0.0)
    with pytest.raises(ValueError):
        make_pulse(ramp_fraction=0.5)


def test_time_out_of_range_rejected():
    p = make_pulse()
    with pytest.raises(ValueError):
        detuning_at(p, -0.1, Species.RB)
    with pytest.raises(ValueError):
        rabi_at(p, TAU + 0.1)


def test_with_quench():
    p = make_pulse(t_q=0.0)
    q = p.with_quench(0.2)
    assert q.t_q == 0.2
    assert q.delta_initial == p.delta_initial
    assert p.t_q == 0.0


# --- the flat escape hatch -----------------------------------------------------

def test_constant_drive():
    d = ConstantDrive(tau=1.0, omega0=3.0, delta_rb=-2.0, delta_cs=5.0)
    assert d.rabi(0.5) == 3.0
    assert d.detuning(0.0, Species.RB) == -2.0
    assert d.detuning(1.0, Species.CS) == 5.0
    arr = d.detuning(np.linspace(0, 1, 5), Species.RB)
    assert np.all(arr == -2.0)
    with pytest.raises(ValueError):
        d.rabi(1.5)


def test_constant_drive_shares_detuning_without_cs_value():
    d = ConstantDrive(tau=1.0, delta_rb=4.0)
    assert d.detuning(0.3, Species.CS) == 4.0
