"""Dual-species Rydberg arrays on the ruby lattice.

Simulation and analysis toolkit for sweep-quench-sweep state preparation on
finite kagome-derived (ruby) patches of Rb/Cs atoms: blockade-constrained
exact dynamics, density and correlation diagnostics, and entanglement
measures (mutual information, Kitaev-Preskill topological entropy).
"""

from rubyqsl.geometry import (
    LatticePatch,
    Site,
    Species,
    SpeciesAssignment,
    StarClass,
    build_ruby_patch,
    classify_star,
    pair_distance,
)
from rubyqsl.interactions import C6Table, InteractionTable, blockade_radius, interaction_table, vdw_energy
from rubyqsl.pulse import SweepQuenchSweep, detuning_at, rabi_at, sweep_rate
from rubyqsl.hilbert import ConstrainedBasis, StateVector, apply_hamiltonian, build_basis, dense_hamiltonian
from rubyqsl.evolve import EvolutionConfig, Trajectory, propagate
from rubyqsl.observables import (
    CorrelationFit,
    CorrelationSeries,
    DensityWindow,
    average_density,
    config_probability,
    density_window,
    fit_correlation_length,
    g2_correlation,
    site_densities,
    star_statistics,
)
from rubyqsl.entanglement import (
    EntropyReport,
    SubsetSpec,
    mutual_information,
    mutual_information_curve,
    reduced_density,
    tqee,
    von_neumann_entropy,
)

__version__ = "0.1.0"
