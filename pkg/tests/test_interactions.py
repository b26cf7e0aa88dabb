import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import rubyqsl as rq
from rubyqsl.geometry import Species
from rubyqsl.interactions import (
    TWO_PI,
    C6Table,
    InteractionTable,
    blockade_radius,
    interaction_table,
    vdw_energy,
)

# Frozen reference values (rad/us), computed once by hand from
# V = 2*pi * (C6/2pi)[GHz um^6] * 1e3 / r^6.
FROZEN = [
    (3700.0, 4.5, 2799.667847870462),   # Rb-Cs at a = 4.5
    (2550.0, 8.0, 61.11954701731852),   # Rb-Rb at 2a, a = 4
    (2350.0, 4.0 * math.sqrt(3.0), 133.51314264930585),  # Cs-Cs at sqrt3*a
    (2550.0, 4.0, 3911.651009108385),   # Rb-Rb nearest neighbour, a = 4
]


@pytest.mark.parametrize(("c6", "r", "expected"), FROZEN)
def test_vdw_energy_frozen_values(c6, r, expected):
    assert vdw_energy(c6, r) == pytest.approx(expected, rel=1e-12)


def test_vdw_energy_power_law():
    assert vdw_energy(3700.0, 9.0) == pytest.approx(vdw_energy(3700.0, 4.5) / 64.0)


def test_vdw_energy_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        vdw_energy(3700.0, 0.0)


def test_default_coefficients():
    t = C6Table()
    assert t.coefficient(Species.RB, Species.RB) == 2550.0
    assert t.coefficient(Species.CS, Species.CS) == 2350.0
    assert t.coefficient(Species.RB, Species.CS) == 3700.0
    assert t.coefficient(Species.CS, Species.RB) == 3700.0


def test_c6_table_rejects_nonpositive():
    with pytest.raises(ValueError):
        C6Table(c6_rb_rb=-1.0)


def test_blockade_radius_frozen():
    # Rb-Rb at Omega0 = 2pi x 2 MHz
    assert blockade_radius(2550.0, TWO_PI * 2.0) == pytest.approx(
        10.413219687613903, rel=1e-12
    )


@given(
    c6=st.floats(min_value=1.0, max_value=1e5),
    omega0=st.floats(min_value=1e-3, max_value=1e4),
)
def test_blockade_radius_defining_identity(c6, omega0):
    # vdw_energy(c6, R_b) == omega0, the definition of R_b.
    rb = blockade_radius(c6, omega0)
    assert vdw_energy(c6, rb) == pytest.approx(omega0, rel=1e-9)


def test_interaction_table_all_rubidium_triangle():
    p = rq.build_ruby_patch("triangle-3", a=4.0)
    tab = interaction_table(p)
    v_nn = 3911.651009108385
    expected = v_nn * (np.ones((3, 3)) - np.eye(3))
    assert np.allclose(tab.v, expected, rtol=1e-12)


def test_interaction_table_species_resolved():
    p = rq.build_ruby_patch("triangle-3", a=4.0, species=["Rb", "Cs", "Cs"])
    tab = interaction_table(p)
    assert tab.v[0, 1] == pytest.approx(vdw_energy(3700.0, 4.0))
    assert tab.v[0, 2] == pytest.approx(vdw_energy(3700.0, 4.0))
    assert tab.v[1, 2] == pytest.approx(vdw_energy(2350.0, 4.0))


def test_interaction_table_symmetric_zero_diagonal():
    p = rq.build_ruby_patch("kagome-9", a=4.0)
    tab = interaction_table(p)
    assert np.array_equal(tab.v, tab.v.T)
    assert np.all(np.diag(tab.v) == 0.0)
    assert tab.n_sites == 9


def test_interaction_table_full_tail_by_default():
    p = rq.build_ruby_patch("kagome-9", a=4.0)
    tab = interaction_table(p)
    off = tab.v[~np.eye(9, dtype=bool)]
    assert np.all(off > 0.0)


def test_interaction_table_cutoff_zeroes_long_pairs():
    p = rq.build_ruby_patch("kagome-9", a=4.0)
    tab = interaction_table(p, cutoff=1.9 * p.a)
    full = interaction_table(p)
    for i in range(9):
        for j in range(9):
            if i == j:
                continue
            r = rq.pair_distance(p, i, j)
            if r > 1.9 * p.a:
                assert tab.v[i, j] == 0.0
            else:
                assert tab.v[i, j] == full.v[i, j]
    # the cutoff must actually bite: kagome-9 has pairs at 2a
    assert np.count_nonzero(tab.v) < np.count_nonzero(full.v)


def test_interaction_table_validation():
    with pytest.raises(ValueError, match="symmetric"):
        InteractionTable(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError, match="diagonal"):
        InteractionTable(np.array([[1.0, 2.0], [2.0, 0.0]]))
    with pytest.raises(ValueError, match="square"):
        InteractionTable(np.zeros((2, 3)))


def test_custom_coefficients_flow_through():
    p = rq.build_ruby_patch("triangle-3", a=4.0)
    tab = interaction_table(p, c6=C6Table(c6_rb_rb=1000.0))
    assert tab.v[0, 1] == pytest.approx(vdw_energy(1000.0, 4.0))
