"""Time evolution of constrained-basis states under a time-dependent drive.

Two integrators share one interface:

``krylov_midpoint``
    Default.  Each step applies exp(-i*dt*H(t_mid)) to the current state
    through a Lanczos decomposition of H(t_mid) restricted to the Krylov
    space K_m(H, psi).  Exact for time-independent H up to the Krylov
    truncation; second-order in dt for time-dependent drives via the
    midpoint evaluation.  Unconditionally norm-preserving up to
    orthogonalization roundoff, so norm drift is a genuine error signal
    and is checked, not silently repaired.

``rk4``
    Classical explicit Runge-Kutta on dpsi/dt = -i H(t) psi.  Much smaller
    stability region (|lambda|*dt < 2.8), so it needs far smaller steps at
    realistic interaction strengths; kept as an independent cross-check by
    an entirely different numerical route.

Probes are evaluated on the fly so long sweeps do not need to keep every
intermediate state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.linalg

from rubyqsl.hilbert import ConstrainedBasis, HamiltonianAction, StateVector
from rubyqsl.interactions import InteractionTable

__all__ = [
    "EvolutionConfig",
    "Trajectory",
    "NormDriftError",
    "propagate",
]

#: Probe signature: (time, state) -> float
Probe = Callable[[float, StateVector], float]


class NormDriftError(RuntimeError):
    """State norm moved away from 1 by more than the configured budget."""


@dataclass(frozen=True)
class EvolutionConfig:
    """Integrator settings.

    ``dt`` is the time step in us (default tau/4000 of the driven pulse,
    chosen by the caller; here a plain required-ish default of 1/1600).
    ``record_every`` controls how often probes run (every k-th step plus
    the endpoints).  ``renormalize`` rescales the state after each step;
    it is off by default so integration error stays visible.
    """

    method: str = "krylov_midpoint"
    dt: float = 6.25e-4
    krylov_dim: int = 12
    record_every: int = 20
    renormalize: bool = False
    norm_budget: float = 1e-7
    detuning_sign: float = -1.0

    def __post_init__(self) -> None:
        if self.method not in ("krylov_midpoint", "rk4"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.krylov_dim < 2:
            raise ValueError("krylov_dim must be at least 2")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.norm_budget <= 0:
            raise ValueError("norm_budget must be positive")


@dataclass
class Trajectory:
    """Evolution record: probe series at the recorded times plus the result."""

    times: np.ndarray
    norms: np.ndarray
    probes: dict[str, np.ndarray]
    final_state: StateVector
    steps: int = 0


def _lanczos_expm_apply(action, t: float, dt: float, amps: np.ndarray, m: int) -> np.ndarray:
    """exp(-i*dt*H(t)) @ amps via an m-dimensional Lanczos decomposition.

    Full reorthogonalization keeps the Krylov basis orthonormal at small m;
    a happy breakdown (invariant subspace reached) truncates early, where
    the small-matrix exponential is then exact.
    """
    beta0 = np.linalg.norm(amps)
    if beta0 == 0.0:
        return amps.copy()
    m_eff = min(m, amps.size)
    v = np.empty((m_eff, amps.size), dtype=np.complex128)
    alpha = np.zeros(m_eff)
    beta = np.zeros(m_eff - 1) if m_eff > 1 else np.zeros(0)

    v[0] = amps / beta0
    k_used = m_eff
    for k in range(m_eff):
        w = action.matvec(t, v[k])
        a = np.vdot(v[k], w).real
        alpha[k] = a
        w -= a * v[k]
        if k > 0:
            w -= beta[k - 1] * v[k - 1]
        # full reorthogonalization against the whole block; cheap at m<=12
        # and keeps the norm-preservation contract honest
        w -= (v[: k + 1].conj() @ w) @ v[: k + 1]
        if k == m_eff - 1:
            break
        b = np.linalg.norm(w)
        if b < 1e-12 * max(1.0, abs(a)):
            k_used = k + 1
            break
        beta[k] = b
        v[k + 1] = w / b

    alpha = alpha[:k_used]
    betak = beta[: k_used - 1]
    if k_used == 1:
        small = np.exp(-1j * dt * alpha[0]).reshape(1)
    else:
        evals, evecs = scipy.linalg.eigh_tridiagonal(alpha, betak)
        small = evecs @ (np.exp(-1j * dt * evals) * evecs[0].conj())
    return beta0 * (small @ v[:k_used])


def _rk4_step(action, t: float, dt: float, amps: np.ndarray) -> np.ndarray:
    def f(tt: float, y: np.ndarray) -> np.ndarray:
        return -1j * action.matvec(tt, y)

    k1 = f(t, amps)
    k2 = f(t + 0.5 * dt, amps + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, amps + 0.5 * dt * k2)
    k4 = f(t + dt, amps + dt * k3)
    return amps + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate(
    basis: ConstrainedBasis,
    vtab: InteractionTable,
    pulse,
    psi0: StateVector | None = None,
    config: EvolutionConfig | None = None,
    probes: Mapping[str, Probe] | None = None,
    t_final: float | None = None,
) -> Trajectory:
    """Integrate the driven dynamics from t=0 to the end of the pulse.

    ``psi0`` defaults to the all-ground state; ``t_final`` defaults to the
    drive duration ``pulse.tau``.  The last step is shortened to land on
    t_final exactly.  Probe values and norms are recorded every
    ``config.record_every`` steps and at both endpoints.
    """
    config = config or EvolutionConfig()
    probes = dict(probes or {})
    psi = (psi0 or StateVector.all_ground(basis)).copy()
    if psi.basis.dim != basis.dim:
        raise ValueError("initial state dimension does not match the basis")
    t_end = float(pulse.tau if t_final is None else t_final)
    if t_end < 0:
        raise ValueError("t_final must be nonnegative")

    action = HamiltonianAction(basis, vtab, pulse, config.detuning_sign)

    times: list[float] = []
    norms: list[float] = []
    series: dict[str, list[float]] = {name: [] for name in probes}

    def record(t: float, state: StateVector) -> None:
        times.append(t)
        norms.append(state.norm)
        for name, fn in probes.items():
            series[name].append(float(fn(t, state)))

    record(0.0, psi)
    n_steps = max(1, int(np.ceil(t_end / config.dt - 1e-9))) if t_end > 0 else 0
    t = 0.0
    for step in range(n_steps):
        dt = min(config.dt, t_end - t)
        if config.method == "krylov_midpoint":
            psi.amplitudes = _lanczos_expm_apply(
                action, t + 0.5 * dt, dt, psi.amplitudes, config.krylov_dim
            )
        else:
            psi.amplitudes = _rk4_step(action, t, dt, psi.amplitudes)
        t = t_end if step == n_steps - 1 else t + dt

        nrm = psi.norm
        if abs(nrm - 1.0) > config.norm_budget:
            raise NormDriftError(
                f"norm drifted to {nrm:.12f} at t={t:.6f} us "
                f"(budget {config.norm_budget:g}); reduce dt or switch methods"
            )
        if config.renormalize and nrm > 0:
            psi.amplitudes /= nrm
        if (step + 1) % config.record_every == 0 and step != n_steps - 1:
            record(t, psi)
    if n_steps > 0:
        record(t_end, psi)

    return Trajectory(
        times=np.asarray(times),
        norms=np.asarray(norms),
        probes={name: np.asarray(vals) for name, vals in series.items()},
        final_state=psi,
        steps=n_steps,
    )
