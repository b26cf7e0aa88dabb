"""Species-resolved van der Waals couplings and the blockade radius.

Unit conventions (used package-wide): dispersion coefficients are quoted as
C6/2pi in GHz*um^6 (so the default Rb-Cs value is the plain number 3700);
energies and frequencies are stored internally as angular frequencies in
rad/us.  Conversion happens in exactly one place, :func:`vdw_energy`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rubyqsl.geometry import LatticePatch, Species

__all__ = [
    "C6Table",
    "InteractionTable",
    "vdw_energy",
    "blockade_radius",
    "interaction_table",
    "TWO_PI",
]

TWO_PI = 2.0 * math.pi

#: 1 GHz*um^6 expressed in MHz*um^6 (frequency part only; the 2pi of the
#: angular convention is applied separately).
_GHZ_TO_MHZ = 1.0e3


@dataclass(frozen=True)
class C6Table:
    """van der Waals coefficients per species pair, as C6/2pi in GHz*um^6."""

    c6_rb_rb: float = 2550.0
    c6_cs_cs: float = 2350.0
    c6_rb_cs: float = 3700.0

    def __post_init__(self) -> None:
        for name in ("c6_rb_rb", "c6_cs_cs", "c6_rb_cs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def coefficient(self, s1: Species, s2: Species) -> float:
        if s1 is s2:
            return self.c6_rb_rb if s1 is Species.RB else self.c6_cs_cs
        return self.c6_rb_cs


@dataclass(frozen=True)
class InteractionTable:
    """Symmetric pairwise interaction energies in rad/us, zero diagonal."""

    v: np.ndarray

    def __post_init__(self) -> None:
        v = self.v
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("interaction table must be a square matrix")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ValueError("interaction table must be symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("interaction table must have zero diagonal")

    @property
    def n_sites(self) -> int:
        return self.v.shape[0]


def vdw_energy(c6: float, r: float) -> float:
    """Pair interaction C6/r^6 as an angular frequency (rad/us).

    ``c6`` follows the C6/2pi-in-GHz*um^6 convention of :class:`C6Table`;
    ``r`` is in micrometres.
    """
    if r <= 0:
        raise ValueError("pair separation must be positive")
    return TWO_PI * c6 * _GHZ_TO_MHZ / r**6


def blockade_radius(c6: float, omega0: float) -> float:
    """Distance at which the pair interaction equals the drive strength.

    ``omega0`` is an angular frequency in rad/us; returns micrometres.
    The defining identity vdw_energy(c6, R_b) == omega0 holds exactly.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be strictly positive")
    return (TWO_PI * c6 * _GHZ_TO_MHZ / omega0) ** (1.0 / 6.0)


def interaction_table(
    patch: LatticePatch,
    c6: C6Table | None = None,
    cutoff: float | None = None,
) -> InteractionTable:
    """Full pairwise interaction matrix for a patch.

    Every pair gets the coefficient of its species combination; pairs
    farther apart than ``cutoff`` (micrometres) are zeroed when a cutoff is
    given.  By default the full 1/r^6 tail is kept — truncating the basis
    (module ``hilbert``) forbids close double excitations but does not
    delete long-range energy shifts.
    """
    c6 = c6 or C6Table()
    n = patch.n_sites
    pos = patch.positions()
    labels = patch.species_labels()
    v = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            r = math.dist(pos[i], pos[j])
            if cutoff is not None and r > cutoff:
                continue
            v[i, j] = v[j, i] = vdw_energy(c6.coefficient(labels[i], labels[j]), r)
    return InteractionTable(v)
