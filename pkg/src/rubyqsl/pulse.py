"""The sweep-quench-sweep drive profile.

A single pulse of duration tau consists of five segments (f denotes the
ramp fraction, 1/10 by default)::

    [0, f*tau]                hold delta_i       (Rabi ramps up)
    [f*tau, tau/2]            sweep to delta_q   sin^2 ramp, rate chi1
    [tau/2, tau/2 + t_q]      hold delta_q       (the quench)
    [tau/2 + t_q, (1-f)*tau]  sweep to delta_f   sin^2 ramp, species-split
    [(1-f)*tau, tau]          hold delta_f       (Rabi ramps down)

Each sin^2 ramp is pinned to reach its maximum exactly at the segment end
(argument pi/2), which fixes the otherwise underdetermined constants::

    chi1      = delta_q - delta_i          alpha_1   = pi / (2*(1/2 - f))
    chi2_s    = delta_f_s - delta_q        alpha_2_s = pi / (2*(1/2 - f - t_q/tau))

with delta_f_Cs = nu * delta_f_Rb.  At the defaults (f = 1/10) these are
the familiar alpha_1 = 5*pi/4 and alpha_2 = pi/(2*(2/5 - t_q/tau)).

All frequencies here are plain MHz (and MHz/us for rates); the angular 2pi
is applied downstream where the Hamiltonian is assembled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from rubyqsl.geometry import Species

__all__ = ["SweepQuenchSweep", "ConstantDrive", "detuning_at", "rabi_at", "sweep_rate"]


@dataclass(frozen=True)
class SweepQuenchSweep:
    """Pulse parameters; times in us, frequencies in MHz (not angular)."""

    tau: float = 2.5
    t_q: float = 0.25
    delta_initial: float = -8.0
    delta_quench: float = 0.0
    delta_final_rb: float = 8.0
    nu: float = 1.0
    omega0: float = 2.0
    ramp_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.ramp_fraction < 0.5:
            raise ValueError("ramp_fraction must lie in (0, 1/2)")
        if not 0.0 <= self.t_q <= self.ramp_fraction * self.tau + 1e-12:
            raise ValueError("t_q must lie in [0, ramp_fraction*tau]")
        if not self.delta_initial < 0.0:
            raise ValueError("delta_initial must be negative")
        if not self.delta_final_rb > 0.0:
            raise ValueError("delta_final_rb must be positive")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")

    # -- derived constants -------------------------------------------------

    def delta_final(self, species: Species) -> float:
        return self.delta_final_rb * (self.nu if species is Species.CS else 1.0)

    @property
    def chi1(self) -> float:
        return self.delta_quench - self.delta_initial

    def chi2(self, species: Species) -> float:
        return self.delta_final(species) - self.delta_quench

    @property
    def alpha1(self) -> float:
        return math.pi / (2.0 * (0.5 - self.ramp_fraction))

    @property
    def alpha2(self) -> float:
        return math.pi / (2.0 * (0.5 - self.ramp_fraction - self.t_q / self.tau))

    def with_quench(self, t_q: float) -> "SweepQuenchSweep":
        return replace(self, t_q=t_q)

    # duck-typed drive interface shared with ConstantDrive
    def detuning(self, t, species: Species):
        return detuning_at(self, t, species)

    def rabi(self, t):
        return rabi_at(self, t)


@dataclass(frozen=True)
class ConstantDrive:
    """Flat drive over [0, tau]; the trivial-waveform escape hatch.

    Useful for analytic checks (free diagonal evolution, resonant Rabi
    flopping) that the sweep profile's own invariants rule out.  Frequencies
    in MHz like everywhere else.
    """

    tau: float
    omega0: float = 0.0
    delta_rb: float = 0.0
    delta_cs: float | None = None

    def detuning(self, t, species: Species):
        _check_range(self, t)
        d = self.delta_rb if species is Species.RB else (
            self.delta_rb if self.delta_cs is None else self.delta_cs)
        return d * np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else float(d)

    def rabi(self, t):
        _check_range(self, t)
        w = self.omega0
        return w * np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else float(w)


def _check_range(p: SweepQuenchSweep, t) -> None:
    t = np.asarray(t)
    if np.any(t < -1e-12) or np.any(t > p.tau + 1e-12):
        raise ValueError(f"time {t} outside the pulse window [0, {p.tau}]")


def detuning_at(p: SweepQuenchSweep, t, species: Species):
    """Detuning of one species at time(s) t, in MHz."""
    _check_range(p, t)
    t = np.asarray(t, dtype=float)
    tau, f = p.tau, p.ramp_fraction
    t1, t2, t3, t4 = f * tau, 0.5 * tau, 0.5 * tau + p.t_q, (1.0 - f) * tau
    chi2 = p.chi2(species)

    out = np.select(
        [t <= t1, t <= t2, t <= t3, t <= t4],
        [
            p.delta_initial,
            p.delta_initial + p.chi1 * np.sin(p.alpha1 * (t - t1) / tau) ** 2,
            p.delta_quench,
            p.delta_quench + chi2 * np.sin(p.alpha2 * (t - t3) / tau) ** 2,
        ],
        default=p.delta_final(species),
    )
    return float(out) if out.ndim == 0 else out


def rabi_at(p: SweepQuenchSweep, t):
    """Rabi envelope at time(s) t, in MHz: sin^2 ramps over the first and
    last ramp_fraction*tau, flat omega0 in between."""
    _check_range(p, t)
    t = np.asarray(t, dtype=float)
    tau, f = p.tau, p.ramp_fraction
    t1, t4 = f * tau, (1.0 - f) * tau
    out = np.select(
        [t <= t1, t <= t4],
        [
            p.omega0 * np.sin(0.5 * math.pi * t / t1) ** 2,
            p.omega0,
        ],
        default=p.omega0 * np.sin(0.5 * math.pi * (tau - t) / (tau - t4)) ** 2,
    )
    return float(out) if out.ndim == 0 else out


def sweep_rate(p: SweepQuenchSweep, t, species: Species):
    """Analytic time derivative of :func:`detuning_at`, in MHz/us.

    Nonzero only on the two sweep segments:
    chi * alpha / tau * sin(2*alpha*(t - t_start)/tau); zero on every hold.
    """
    _check_range(p, t)
    t = np.asarray(t, dtype=float)
    tau, f = p.tau, p.ramp_fraction
    t1, t2, t3, t4 = f * tau, 0.5 * tau, 0.5 * tau + p.t_q, (1.0 - f) * tau
    chi2 = p.chi2(species)
    out = np.select(
        [t <= t1, t <= t2, t <= t3, t <= t4],
        [
            0.0,
            p.chi1 * p.alpha1 / tau * np.sin(2.0 * p.alpha1 * (t - t1) / tau),
            0.0,
            chi2 * p.alpha2 / tau * np.sin(2.0 * p.alpha2 * (t - t3) / tau),
        ],
        default=0.0,
    )
    return float(out) if out.ndim == 0 else out
