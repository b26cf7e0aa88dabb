"""Reduced density matrices, von Neumann entropies, mutual information, and
the three-region topological entanglement entropy.

Reduced densities are built directly in the constrained basis: states are
grouped by their complement-restricted pattern, and each group contributes
one outer product over the subset-restricted patterns it realizes.  Only
patterns realized in the basis appear as matrix rows; unrealized patterns
carry zero weight, so the spectrum (hence every entropy) is unchanged.

Entropies are in nats throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from rubyqsl.hilbert import StateVector

__all__ = [
    "SubsetSpec",
    "EntropyReport",
    "reduced_density",
    "von_neumann_entropy",
    "mutual_information",
    "mutual_information_curve",
    "tqee",
    "load_subset_triple",
]

#: eigenvalues below this are treated as exact zeros in the entropy sum
EIGEN_FLOOR = 1e-12
#: eigenvalues below this are a genuine positivity violation, not round-off
NEGATIVITY_BUDGET = -1e-10

_ONE = np.uint64(1)


@dataclass(frozen=True)
class SubsetSpec:
    """Named ordered set of site ids."""

    name: str
    sites: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.name not in ("A", "B", "C", "custom"):
            raise ValueError(f"subset name must be A, B, C or custom, got {self.name!r}")
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("subset sites must be distinct")
        if any(s < 0 for s in self.sites):
            raise ValueError("subset sites must be nonnegative")

    def __len__(self) -> int:
        return len(self.sites)

    def union(self, *others: "SubsetSpec") -> "SubsetSpec":
        sites: list[int] = list(self.sites)
        for o in others:
            sites.extend(o.sites)
        return SubsetSpec("custom", tuple(sorted(set(sites))))


@dataclass(frozen=True)
class EntropyReport:
    """Entropies of the seven subset unions plus the derived invariant.

    ``gamma`` follows the inclusion-exclusion combination
    S_AB + S_AC + S_BC - S_A - S_B - S_C - S_ABC, so a positive value means
    long-range entanglement not accounted for by boundary terms.
    """

    entropies: dict[str, float]
    gamma: float | None = None
    mutual_information: float | None = None
    eigen_floor: float = EIGEN_FLOOR

    def __post_init__(self) -> None:
        for label, s in self.entropies.items():
            if s < -1e-10:
                raise ValueError(f"entropy S_{label} = {s} is negative")

    @property
    def quantum_dimension(self) -> float | None:
        """exp(gamma); interpretation aid only."""
        return None if self.gamma is None else math.exp(self.gamma)

    def csv(self) -> str:
        labels = sorted(self.entropies)
        header = ",".join(f"S_{l}" for l in labels)
        row = ",".join(f"{self.entropies[l]:.12g}" for l in labels)
        if self.gamma is not None:
            header += ",gamma"
            row += f",{self.gamma:.12g}"
        return header + "\n" + row + "\n"


def _as_sites(subset: SubsetSpec | Iterable[int]) -> tuple[int, ...]:
    if isinstance(subset, SubsetSpec):
        return subset.sites
    return tuple(int(s) for s in subset)


def _subset_codes(states: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """Pack the restriction of each basis state to ``sites`` into integers.

    Bit k of the code is the occupancy of the k-th smallest subset site, so
    codes are comparable across functions (and with the brute-force oracle).
    """
    codes = np.zeros(states.size, dtype=np.uint64)
    for k, site in enumerate(sorted(sites)):
        codes |= ((states >> np.uint64(site)) & _ONE) << np.uint64(k)
    return codes


def reduced_density(
    psi: StateVector, subset: SubsetSpec | Iterable[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Reduced density matrix over the realized subset patterns.

    Returns ``(rho, patterns)``: ``patterns[i]`` is the packed occupancy
    pattern labeling row/column i of ``rho`` (bit k = k-th smallest subset
    site).  Errors on an empty subset and on the full site set (the state
    is then pure by construction; callers wanting S = 0 handle that case).
    """
    sites = _as_sites(subset)
    n = psi.basis.n_sites
    if len(sites) == 0:
        raise ValueError("cannot reduce onto an empty subset")
    if any(s < 0 or s >= n for s in sites):
        raise ValueError("subset references sites outside the patch")
    site_set = set(sites)
    if site_set == set(range(n)):
        raise ValueError("subset must be a proper subset of the sites")

    states = psi.basis.states
    amps = psi.amplitudes
    codes = _subset_codes(states, sites)
    comp_mask = np.uint64(0)
    for s in range(n):
        if s not in site_set:
            comp_mask |= _ONE << np.uint64(s)
    comp_keys = states & comp_mask

    patterns, pattern_idx = np.unique(codes, return_inverse=True)
    p_dim = patterns.size
    rho = np.zeros((p_dim, p_dim), dtype=np.complex128)

    order = np.argsort(comp_keys, kind="stable")
    sorted_keys = comp_keys[order]
    # run boundaries: one run per distinct complement pattern
    boundaries = np.nonzero(np.diff(sorted_keys))[0] + 1
    starts = np.concatenate([[0], boundaries])
    stops = np.concatenate([boundaries, [sorted_keys.size]])
    for lo, hi in zip(starts, stops):
        members = order[lo:hi]
        rows = pattern_idx[members]
        a = amps[members]
        rho[np.ix_(rows, rows)] += np.outer(a, a.conj())
    return rho, patterns


def von_neumann_entropy(rho: np.ndarray, eigen_floor: float = EIGEN_FLOOR) -> float:
    """-Tr(rho ln rho) in nats, with round-off guards.

    Eigenvalues in (NEGATIVITY_BUDGET, eigen_floor] are treated as zero;
    anything more negative, or a trace off 1 by more than 1e-8, is an error
    rather than a silent repair.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("density matrix is not Hermitian within tolerance")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"density matrix trace is {tr}, expected 1")
    evals = scipy.linalg.eigvalsh(rho)
    if evals.min() < NEGATIVITY_BUDGET:
        raise ValueError(f"density matrix has eigenvalue {evals.min()}, not PSD")
    lam = evals[evals > eigen_floor]
    return float(-np.sum(lam * np.log(lam)))


def _subset_entropy(psi: StateVector, sites: Sequence[int]) -> float:
    """Entropy of the reduction onto ``sites``; 0 for the full site set
    (pure state, nothing traced out)."""
    if set(sites) == set(range(psi.basis.n_sites)):
        return 0.0
    rho, _ = reduced_density(psi, sites)
    return von_neumann_entropy(rho)


def mutual_information(
    psi: StateVector,
    a: SubsetSpec | Iterable[int],
    b: SubsetSpec | Iterable[int],
) -> float:
    """I(A:B) = S_A + S_B - S_AB; symmetric and nonnegative up to round-off."""
    sa = _as_sites(a)
    sb = _as_sites(b)
    if set(sa) & set(sb):
        raise ValueError("mutual information needs disjoint subsets")
    return (
        _subset_entropy(psi, sa)
        + _subset_entropy(psi, sb)
        - _subset_entropy(psi, tuple(sorted(set(sa) | set(sb))))
    )


def mutual_information_curve(
    psi: StateVector, ordering: Sequence[int] | None = None
) -> list[tuple[int, float]]:
    """I between the first k sites of ``ordering`` and their complement, for
    k = 1..N-1.  ``ordering`` defaults to site-id order and must be a
    permutation of all sites."""
    n = psi.basis.n_sites
    ordering = list(range(n)) if ordering is None else [int(s) for s in ordering]
    if sorted(ordering) != list(range(n)):
        raise ValueError("ordering must be a permutation of all site ids")
    out = []
    for k in range(1, n):
        a = ordering[:k]
        b = ordering[k:]
        out.append((k, mutual_information(psi, a, b)))
    return out


def tqee(
    psi: StateVector,
    a: SubsetSpec | Iterable[int],
    b: SubsetSpec | Iterable[int],
    c: SubsetSpec | Iterable[int],
) -> EntropyReport:
    """Three-region topological entanglement entropy.

    The three regions must be pairwise disjoint; their union may leave
    sites out.  All seven entropies are recorded so the combination can be
    re-derived from the report.
    """
    sa, sb, sc = _as_sites(a), _as_sites(b), _as_sites(c)
    for x, y, names in ((sa, sb, "A/B"), (sa, sc, "A/C"), (sb, sc, "B/C")):
        if set(x) & set(y):
            raise ValueError(f"regions {names} overlap")

    def u(*groups: Sequence[int]) -> tuple[int, ...]:
        out: set[int] = set()
        for g in groups:
            out |= set(g)
        return tuple(sorted(out))

    entropies = {
        "A": _subset_entropy(psi, sa),
        "B": _subset_entropy(psi, sb),
        "C": _subset_entropy(psi, sc),
        "AB": _subset_entropy(psi, u(sa, sb)),
        "AC": _subset_entropy(psi, u(sa, sc)),
        "BC": _subset_entropy(psi, u(sb, sc)),
        "ABC": _subset_entropy(psi, u(sa, sb, sc)),
    }
    gamma = (
        entropies["AB"]
        + entropies["AC"]
        + entropies["BC"]
        - entropies["A"]
        - entropies["B"]
        - entropies["C"]
        - entropies["ABC"]
    )
    return EntropyReport(entropies=entropies, gamma=gamma)


def load_subset_triple(spec: str | Path) -> tuple[SubsetSpec, SubsetSpec, SubsetSpec]:
    """Load a named A/B/C region triple (bundled name or explicit path).

    Bundled triples live next to the patch files; the JSON holds the patch
    name plus the three site lists.
    """
    path = Path(spec)
    if not path.suffix:
        candidate = (
            Path(__file__).resolve().parent / "patches" / "subsets" / f"{spec}.json"
        )
        if candidate.exists():
            path = candidate
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        bundled = sorted(
            p.stem
            for p in (Path(__file__).resolve().parent / "patches" / "subsets").glob(
                "*.json"
            )
        )
        raise ValueError(
            f"no subset file {spec!r}; bundled triples: {', '.join(bundled)}"
        ) from None
    triple = tuple(
        SubsetSpec(label, tuple(payload[label])) for label in ("A", "B", "C")
    )
    union = [s for sub in triple for s in sub.sites]
    if len(set(union)) != len(union):
        raise ValueError(f"subset file {spec!r} has overlapping regions")
    return triple
