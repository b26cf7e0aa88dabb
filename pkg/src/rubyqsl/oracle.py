"""Brute-force references in the unconstrained 2^N product space.

Everything here is deliberately written against the full tensor-product
space with its own matvec (diagonal pass + axis flips) and its own small
Arnoldi/matrix-exponential stepper, sharing no enumeration or operator
machinery with the constrained-basis modules.  Agreement between the two
routes is then evidence, not tautology.  Test/validation use only; the
hard cap N <= 12 keeps the 2^N vectors small.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from rubyqsl.evolve import EvolutionConfig
from rubyqsl.geometry import LatticePatch, Species
from rubyqsl.interactions import TWO_PI, C6Table

__all__ = [
    "FullSpaceState",
    "full_propagate",
    "full_partial_trace",
    "embed_constrained",
]

MAX_FULL_SITES = 12


@dataclass
class FullSpaceState:
    """Amplitudes over all 2^N occupancies; index bit i = site i excited."""

    patch: LatticePatch
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        n = self.patch.n_sites
        if n > MAX_FULL_SITES:
            raise ValueError(f"full-space states limited to {MAX_FULL_SITES} sites")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**n,):
            raise ValueError("amplitude vector must cover all 2^N occupancies")
        nrm = np.linalg.norm(self.amplitudes)
        if abs(nrm - 1.0) > 1e-6:
            raise ValueError(f"full-space state has norm {nrm}, expected 1")

    @property
    def n_sites(self) -> int:
        return self.patch.n_sites

    def site_densities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        idx = np.arange(2**self.n_sites)
        return np.array([p[(idx >> i) & 1 == 1].sum() for i in range(self.n_sites)])


def _flip_sum(amps: np.ndarray, n: int) -> np.ndarray:
    """Sum over single-site bit flips, via axis reversal of the rank-n tensor."""
    t = amps.reshape((2,) * n)
    out = np.zeros_like(t)
    for axis in range(n):
        out += np.flip(t, axis=axis)
    return out.reshape(-1)


def _arnoldi_expm_apply(matvec, dt: float, amps: np.ndarray, m: int) -> np.ndarray:
    """exp(-i*dt*H) @ amps through an Arnoldi decomposition plus a dense
    small-matrix exponential (scipy expm), independent of the Lanczos /
    tridiagonal-eigensolver route used by the production integrator."""
    beta0 = np.linalg.norm(amps)
    if beta0 == 0.0:
        return amps.copy()
    m = min(m, amps.size)
    q = np.zeros((m, amps.size), dtype=np.complex128)
    h = np.zeros((m, m), dtype=np.complex128)
    q[0] = amps / beta0
    used = m
    for k in range(m):
        w = matvec(q[k])
        for j in range(k + 1):
            h[j, k] = np.vdot(q[j], w)
            w -= h[j, k] * q[j]
        # second orthogonalization pass for stability
        for j in range(k + 1):
            c = np.vdot(q[j], w)
            h[j, k] += c
            w -= c * q[j]
        if k == m - 1:
            break
        b = np.linalg.norm(w)
        if b < 1e-12:
            used = k + 1
            break
        h[k + 1, k] = b
        q[k + 1] = w / b
    hs = h[:used, :used]
    small = scipy.linalg.expm(-1j * dt * hs)[:, 0]
    return beta0 * (small @ q[:used])


def full_propagate(
    patch: LatticePatch,
    c6: C6Table,
    pulse,
    cfg: EvolutionConfig | None = None,
) -> FullSpaceState:
    """Propagate the all-ground state through the drive with no basis
    truncation, returning the final full-space state.

    Uses the full interaction table (no cutoff) built directly from the
    dispersion coefficients and pair distances.
    """
    cfg = cfg or EvolutionConfig()
    n = patch.n_sites
    if n > MAX_FULL_SITES:
        raise ValueError(f"full-space propagation limited to {MAX_FULL_SITES} sites")

    pos = patch.positions()
    labels = patch.species_labels()
    idx = np.arange(2**n)
    bits = np.stack([(idx >> i) & 1 for i in range(n)]).astype(np.float64)

    u = np.zeros(2**n)
    for i in range(n):
        for j in range(i + 1, n):
            r = float(np.hypot(*(pos[i] - pos[j])))
            v_ij = TWO_PI * (c6.coefficient(labels[i], labels[j]) * 1e3) / r**6
            u += v_ij * bits[i] * bits[j]
    k_rb = sum(bits[i] for i in range(n) if labels[i] is Species.RB)
    k_cs = sum(bits[i] for i in range(n) if labels[i] is Species.CS)
    sign = cfg.detuning_sign

    def matvec_at(t: float):
        om = TWO_PI * pulse.rabi(t)
        drb = TWO_PI * pulse.detuning(t, Species.RB)
        dcs = TWO_PI * pulse.detuning(t, Species.CS)
        diag = u + sign * (drb * k_rb + dcs * k_cs)

        def mv(y: np.ndarray) -> np.ndarray:
            out = diag * y
            if om != 0.0:
                out = out + (0.5 * om) * _flip_sum(y, n)
            return out

        return mv

    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    t_end = float(pulse.tau)
    n_steps = max(1, int(np.ceil(t_end / cfg.dt - 1e-9))) if t_end > 0 else 0
    t = 0.0
    for step in range(n_steps):
        dt = min(cfg.dt, t_end - t)
        if cfg.method == "krylov_midpoint":
            amps = _arnoldi_expm_apply(
                matvec_at(t + 0.5 * dt), dt, amps, cfg.krylov_dim
            )
        else:
            mv_lo = matvec_at(t)
            mv_mid = matvec_at(t + 0.5 * dt)
            mv_hi = matvec_at(t + dt)
            k1 = -1j * mv_lo(amps)
            k2 = -1j * mv_mid(amps + 0.5 * dt * k1)
            k3 = -1j * mv_mid(amps + 0.5 * dt * k2)
            k4 = -1j * mv_hi(amps + dt * k3)
            amps = amps + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t_end if step == n_steps - 1 else t + dt
        if cfg.renormalize:
            amps /= np.linalg.norm(amps)
    return FullSpaceState(patch, amps)


def full_partial_trace(state: FullSpaceState, subset: Sequence[int]) -> np.ndarray:
    """Textbook partial trace over the complement of ``subset``.

    Returns the 2^|subset| density matrix; row/column index bit k is the
    occupancy of the k-th smallest subset site, matching the pattern packing
    of the constrained-basis reduction.
    """
    n = state.n_sites
    sub = sorted(int(s) for s in subset)
    if len(sub) == 0:
        raise ValueError("cannot trace onto an empty subset")
    if len(set(sub)) != len(sub) or sub[0] < 0 or sub[-1] >= n:
        raise ValueError("subset must be distinct valid site ids")

    # bit i of the flat index lives on tensor axis n-1-i (C order); the
    # output pattern wants subset bit k (k-th smallest site) as the k-th
    # LSB, i.e. the largest subset site slowest
    sub_axes = [n - 1 - s for s in reversed(sub)]
    comp_axes = [ax for ax in range(n) if ax not in sub_axes]
    t = state.amplitudes.reshape((2,) * n)
    m = np.transpose(t, sub_axes + comp_axes).reshape(2 ** len(sub), -1)
    return m @ m.conj().T


def embed_constrained(psi) -> FullSpaceState:
    """Zero-pad a constrained-basis state vector into the full product space."""
    full = np.zeros(2 ** psi.basis.n_sites, dtype=np.complex128)
    full[psi.basis.states.astype(np.int64)] = psi.amplitudes
    return FullSpaceState(psi.basis.patch, full)
