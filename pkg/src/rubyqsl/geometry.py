"""Finite dual-species patches of the ruby lattice.

Atoms sit on the midpoints of the edges of a kagome lattice (corner-sharing
triangles) whose edge length is 2a, so that

* the three atoms of each triangle are mutually separated by ``a``,
* the four atoms surrounding an interior kagome vertex (a "vertex star")
  have pair distances ``{a, sqrt(3)*a, 2a}``, the collinear pair sitting
  at ``2a``.

The kagome lattice itself is generated as the medial lattice of a
triangular lattice with side 4a, which keeps the bookkeeping to one level
of midpoint-taking per stage (triangular -> kagome -> atoms).

Shipped patches live as JSON files under ``rubyqsl/patches/`` and are
loaded by name through :func:`build_ruby_patch`.  They are data, not code:
the files can be edited to explore other clusters, and
:func:`assemble_ruby_patch` re-creates each of them from a list of
triangular-lattice faces (the construction used to generate the files in
the first place).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Species",
    "Site",
    "LatticePatch",
    "SpeciesAssignment",
    "StarClass",
    "GeometryError",
    "build_ruby_patch",
    "assemble_ruby_patch",
    "pair_distance",
    "pair_distance_histogram",
    "classify_star",
    "load_patch_file",
    "save_patch_file",
    "load_species_assignment",
    "shipped_patch_names",
]

SQRT3 = math.sqrt(3.0)

#: Relative tolerance used to bucket geometric distances.  Patch distances are
#: exact algebraic multiples of a; this only absorbs floating-point noise.
DISTANCE_RTOL = 1e-6


class GeometryError(ValueError):
    """Raised for invalid patch descriptors or invariant violations."""


class Species(str, Enum):
    RB = "Rb"
    CS = "Cs"


class StarClass(str, Enum):
    """Occupancy classes of a 4-site vertex star."""

    MONOMER = "monomer"          # no excitation on the star
    DIMER = "dimer"              # exactly one excitation
    DOUBLE_DIMER = "double_dimer"  # two non-adjacent excitations (2a or sqrt3*a)
    OTHER = "other"


@dataclass(frozen=True)
class Site:
    """One atom: integer id, position in micrometres, species label."""

    id: int
    pos: tuple[float, float]
    species: Species
    is_edge: bool = False


@dataclass(frozen=True)
class SpeciesAssignment:
    """A named per-site species layout for one patch."""

    patch_name: str
    labels: tuple[Species, ...]

    @property
    def fraction_cs(self) -> float:
        return sum(1 for s in self.labels if s is Species.CS) / len(self.labels)


@dataclass(frozen=True)
class LatticePatch:
    """An immutable finite cluster of atoms with its vertex-star structure.

    ``sites`` are ordered by id (0..N-1), ``vertex_stars`` lists the 4-site
    groups around each interior kagome vertex, and ``a`` is the lattice
    constant in micrometres (the intra-triangle spacing).
    """

    name: str
    a: float
    sites: tuple[Site, ...]
    vertex_stars: tuple[tuple[int, int, int, int], ...]

    def __post_init__(self) -> None:
        _validate_patch(self)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def edge_sites(self) -> frozenset[int]:
        return frozenset(s.id for s in self.sites if s.is_edge)

    def positions(self) -> np.ndarray:
        """(N, 2) array of positions in micrometres."""
        return np.array([s.pos for s in self.sites], dtype=float)

    def species_labels(self) -> tuple[Species, ...]:
        return tuple(s.species for s in self.sites)

    def rb_mask(self) -> np.ndarray:
        return np.array([s.species is Species.RB for s in self.sites])

    def with_species(self, labels: Sequence[Species | str]) -> "LatticePatch":
        """Same geometry with a different species layout."""
        if len(labels) != self.n_sites:
            raise GeometryError(
                f"species list has length {len(labels)}, patch has {self.n_sites} sites"
            )
        coerced = tuple(Species(l) for l in labels)
        sites = tuple(
            Site(s.id, s.pos, coerced[s.id], s.is_edge) for s in self.sites
        )
        return LatticePatch(self.name, self.a, sites, self.vertex_stars)

    def scaled(self, a: float) -> "LatticePatch":
        """Same topology at a different lattice constant."""
        if a <= 0:
            raise GeometryError("lattice constant must be positive")
        f = a / self.a
        sites = tuple(
            Site(s.id, (s.pos[0] * f, s.pos[1] * f), s.species, s.is_edge)
            for s in self.sites
        )
        return LatticePatch(self.name, a, sites, self.vertex_stars)


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def _tri_vertex(ij: tuple[int, int]) -> tuple[float, float]:
    """Vertex (i, j) of the parent triangular lattice, side 4 (units of a)."""
    i, j = ij
    return (4.0 * i + 2.0 * j, 2.0 * SQRT3 * j)


def _midpoint(p: tuple[float, float], q: tuple[float, float]) -> tuple[float, float]:
    return ((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0)


def up_face(i: int, j: int) -> tuple[tuple[int, int], ...]:
    """Upward triangular-lattice face with lower-left corner (i, j)."""
    return ((i, j), (i + 1, j), (i, j + 1))


def down_face(i: int, j: int) -> tuple[tuple[int, int], ...]:
    """Downward face adjacent to up_face(i, j) across its long diagonal."""
    return ((i + 1, j), (i, j + 1), (i + 1, j + 1))


def assemble_ruby_patch(
    faces: Sequence[tuple[tuple[int, int], ...]],
    a: float,
    name: str = "custom",
    species: Sequence[Species | str] | None = None,
    vertex_orders: dict[int, tuple[tuple[int, int], ...]] | None = None,
) -> LatticePatch:
    """Build a patch from faces of the parent triangular lattice.

    Each face contributes one atom triangle (the midpoints of the kagome
    edges living on that face).  An interior kagome vertex -- and with it a
    4-site star -- appears wherever two chosen faces share a triangular-
    lattice edge.  Atoms of a face are keyed by the face vertex their two
    kagome edges meet at; ``vertex_orders`` optionally fixes the listing
    order of the three atoms of a face (default: lexicographic by position).

    Atoms whose own kagome edge has an endpoint that is not a complete star
    are flagged as edge sites.
    """
    atoms: list[tuple[float, float]] = []
    atom_kedges: list[tuple[tuple, tuple]] = []  # T-edge keys of each atom's kagome edge
    per_face_atom_ids: list[list[int]] = []

    for fi, face in enumerate(faces):
        if len(set(face)) != 3:
            raise GeometryError(f"face {fi} does not have three distinct vertices")
        candidates = []
        for v in face:
            u, w = (x for x in face if x != v)
            k1 = _midpoint(_tri_vertex(v), _tri_vertex(u))
            k2 = _midpoint(_tri_vertex(v), _tri_vertex(w))
            pos = _midpoint(k1, k2)
            edges = (tuple(sorted((v, u))), tuple(sorted((v, w))))
            candidates.append((v, pos, edges))
        if vertex_orders and fi in vertex_orders:
            order = list(vertex_orders[fi])
            candidates.sort(key=lambda c: order.index(c[0]))
        else:
            candidates.sort(key=lambda c: (round(c[1][0], 9), round(c[1][1], 9)))
        ids = []
        for _, pos, edges in candidates:
            ids.append(len(atoms))
            atoms.append(pos)
            atom_kedges.append(edges)
        per_face_atom_ids.append(ids)

    # triangular-lattice edge -> adjacent chosen faces
    edge_faces: dict[tuple, list[int]] = {}
    for fi, face in enumerate(faces):
        for u, v in itertools.combinations(face, 2):
            edge_faces.setdefault(tuple(sorted((u, v))), []).append(fi)

    stars: list[tuple[int, int, int, int]] = []
    star_edges: set[tuple] = set()
    for edge, fis in sorted(edge_faces.items()):
        if len(fis) != 2:
            continue
        members = [
            i
            for fi in fis
            for i in per_face_atom_ids[fi]
            if edge in atom_kedges[i]
        ]
        if len(members) != 4:
            raise GeometryError(f"star at shared edge {edge} has {len(members)} atoms")
        stars.append(tuple(sorted(members)))
        star_edges.add(edge)

    edge_ids = {
        i
        for i, kedges in enumerate(atom_kedges)
        if not all(k in star_edges for k in kedges)
    }

    coords = [(x * a, y * a) for x, y in atoms]
    labels = _coerce_species(species, len(atoms))
    sites = tuple(
        Site(i, coords[i], labels[i], i in edge_ids) for i in range(len(atoms))
    )
    return LatticePatch(name, a, sites, tuple(stars))


def _coerce_species(
    species: Sequence[Species | str] | None, n: int
) -> tuple[Species, ...]:
    if species is None:
        return (Species.RB,) * n
    if len(species) != n:
        raise GeometryError(f"species list has length {len(species)}, need {n}")
    return tuple(Species(s) for s in species)


def _validate_patch(patch: LatticePatch) -> None:
    n = len(patch.sites)
    if n == 0:
        raise GeometryError("patch has no sites")
    if patch.a <= 0:
        raise GeometryError("lattice constant must be positive")
    if [s.id for s in patch.sites] != list(range(n)):
        raise GeometryError("site ids must be consecutive 0..N-1 in order")
    pos = [s.pos for s in patch.sites]
    tol = DISTANCE_RTOL * patch.a
    for i, j in itertools.combinations(range(n), 2):
        d = math.dist(pos[i], pos[j])
        if d < tol:
            raise GeometryError(f"sites {i} and {j} coincide")
        if d < patch.a - tol:
            raise GeometryError(
                f"sites {i} and {j} are {d:.6g} um apart, closer than a = {patch.a}"
            )
    for star in patch.vertex_stars:
        if len(set(star)) != 4:
            raise GeometryError(f"vertex star {star} does not have 4 distinct sites")
        if not all(0 <= s < n for s in star):
            raise GeometryError(f"vertex star {star} references unknown sites")


# --------------------------------------------------------------------------
# shipped patches
# --------------------------------------------------------------------------

def _patch_dir():
    return resources.files("rubyqsl") / "patches"


def shipped_patch_names() -> tuple[str, ...]:
    """Names of the patch files bundled with the package."""
    return tuple(
        sorted(p.name[: -len(".json")] for p in _patch_dir().iterdir()
               if p.name.endswith(".json"))
    )


def build_ruby_patch(
    descriptor: str | Sequence[Sequence[float]],
    a: float,
    species: Sequence[Species | str] | None = None,
) -> LatticePatch:
    """Build a patch from a shipped name or an explicit coordinate list.

    ``descriptor`` is either the name of a bundled patch file (for example
    ``"kagome-21"`` or ``"triangle-3"``) or a sequence of (x, y) pairs in
    units of ``a``.  Explicit coordinate lists carry no star structure and
    default to all-Rb unless ``species`` is given.
    """
    if isinstance(descriptor, str):
        candidate = _patch_dir() / f"{descriptor}.json"
        try:
            text = candidate.read_text()
        except FileNotFoundError:
            raise GeometryError(
                f"unknown patch {descriptor!r}; shipped: {', '.join(shipped_patch_names())}"
            ) from None
        patch = _patch_from_dict(json.loads(text), name=descriptor)
        if abs(patch.a - a) > 1e-12:
            patch = patch.scaled(a)
        if species is not None:
            patch = patch.with_species(species)
        return patch

    coords = [(float(x) * a, float(y) * a) for x, y in descriptor]
    labels = _coerce_species(species, len(coords))
    sites = tuple(Site(i, c, labels[i]) for i, c in enumerate(coords))
    return LatticePatch("custom", a, sites, ())


def _patch_from_dict(data: dict, name: str) -> LatticePatch:
    a = float(data["a_um"])
    coords = data["coords"]
    labels = _coerce_species(data.get("species"), len(coords))
    edge = set(data.get("edge_sites", ()))
    sites = tuple(
        Site(i, (float(x) * a, float(y) * a), labels[i], i in edge)
        for i, (x, y) in enumerate(coords)
    )
    stars = tuple(tuple(int(s) for s in star) for star in data.get("stars", ()))
    return LatticePatch(data.get("name", name), a, sites, stars)


def load_patch_file(path: str | Path) -> LatticePatch:
    """Load a patch from an explicit JSON file path."""
    path = Path(path)
    return _patch_from_dict(json.loads(path.read_text()), name=path.stem)


def save_patch_file(patch: LatticePatch, path: str | Path) -> None:
    """Write a patch in the shipped JSON format (coords in units of a)."""
    data = {
        "name": patch.name,
        "a_um": patch.a,
        "coords": [
            [s.pos[0] / patch.a, s.pos[1] / patch.a] for s in patch.sites
        ],
        "species": [s.species.value for s in patch.sites],
        "edge_sites": sorted(patch.edge_sites),
        "stars": [list(star) for star in patch.vertex_stars],
    }
    Path(path).write_text(json.dumps(data, indent=1))


def load_species_assignment(spec: str | Path) -> SpeciesAssignment:
    """Load a named species layout (bundled name or explicit file path)."""
    path = Path(spec)
    if not path.suffix:
        candidate = _patch_dir() / "assignments" / f"{spec}.json"
        try:
            text = candidate.read_text()
        except FileNotFoundError:
            raise GeometryError(f"unknown species assignment {spec!r}") from None
    else:
        text = path.read_text()
    data = json.loads(text)
    return SpeciesAssignment(
        patch_name=data["patch"],
        labels=tuple(Species(s) for s in data["labels"]),
    )


# --------------------------------------------------------------------------
# queries
# --------------------------------------------------------------------------

def pair_distance(patch: LatticePatch, i: int, j: int) -> float:
    """Euclidean distance between two distinct sites, in micrometres."""
    if i == j:
        raise GeometryError("pair_distance needs two distinct sites")
    try:
        si, sj = patch.sites[i], patch.sites[j]
    except IndexError:
        raise GeometryError(f"invalid site id in ({i}, {j})") from None
    if i < 0 or j < 0:
        raise GeometryError(f"invalid site id in ({i}, {j})")
    return math.dist(si.pos, sj.pos)


def pair_distance_histogram(
    patch: LatticePatch, sites: Iterable[int] | None = None
) -> dict[float, int]:
    """Counts of unordered pairs per distinct distance.

    Distances are bucketed with an absolute tolerance of ``1e-6 * a``; the
    returned keys are the bucket representatives in micrometres, ascending.
    """
    ids = sorted(sites) if sites is not None else range(patch.n_sites)
    tol = DISTANCE_RTOL * patch.a
    reps: list[float] = []
    counts: list[int] = []
    for i, j in itertools.combinations(ids, 2):
        d = pair_distance(patch, i, j)
        for k, r in enumerate(reps):
            if abs(d - r) <= tol:
                counts[k] += 1
                break
        else:
            reps.append(d)
            counts.append(1)
    order = np.argsort(reps)
    return {reps[k]: counts[k] for k in order}


def classify_star(
    occupancy: int | Sequence[int],
    patch: LatticePatch,
    star: Sequence[int],
) -> StarClass:
    """Classify the occupancy of one vertex star.

    ``occupancy`` is either a 4-bit integer (bit k = k-th star site excited)
    or a sequence of four 0/1 flags in star order.  Two excitations count as
    a double dimer only when they sit on a non-adjacent pair of the star
    (mutual distance 2a or sqrt(3)*a, never the intra-triangle a).
    """
    star = tuple(star)
    if star not in patch.vertex_stars:
        raise GeometryError(f"{star} is not a registered vertex star")
    if isinstance(occupancy, (int, np.integer)):
        bits = [(int(occupancy) >> k) & 1 for k in range(4)]
    else:
        bits = [int(b) for b in occupancy]
        if len(bits) != 4:
            raise GeometryError("occupancy must cover exactly 4 star sites")
    excited = [star[k] for k, b in enumerate(bits) if b]
    if len(excited) == 0:
        return StarClass.MONOMER
    if len(excited) == 1:
        return StarClass.DIMER
    if len(excited) == 2:
        d = pair_distance(patch, *excited)
        tol = DISTANCE_RTOL * patch.a
        if abs(d - 2.0 * patch.a) <= tol or abs(d - SQRT3 * patch.a) <= tol:
            return StarClass.DOUBLE_DIMER
    return StarClass.OTHER
