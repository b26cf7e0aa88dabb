"""Command-line front end: config parsing, runs, sweeps, validation, and
bit-stable result export.

Commands
--------
run       one propagation; trajectory CSV + final-state observables JSON,
          optionally the raw amplitude vector (complex64 LE + JSON sidecar)
sweep     Cartesian grid of propagations; one long-format CSV
          (axis columns ..., metric, value, status)
validate  invariant suite incl. brute-force oracle comparisons (N <= 12)
lattice   emit patch geometry and star tables as CSV
entropy   mutual-information curve and three-region entropy from a saved
          amplitude file

Config is a flat JSON file; every key can be overridden on the command line
with ``--set key=value`` (dotted keys reach into nested sections, values are
parsed as JSON with a plain-string fallback).  All output files carry the
sha256 of the fully resolved config for provenance.

Exit codes: 0 success, 1 config error, 2 invariant/validation failure,
3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from rubyqsl.entanglement import (
    load_subset_triple,
    mutual_information_curve,
    reduced_density,
    tqee,
    von_neumann_entropy,
)
from rubyqsl.evolve import EvolutionConfig, NormDriftError, propagate
from rubyqsl.geometry import (
    GeometryError,
    StarClass,
    build_ruby_patch,
    load_species_assignment,
)
from rubyqsl.hilbert import (
    BasisSizeError,
    StateVector,
    build_basis,
    dense_hamiltonian,
    HamiltonianAction,
)
from rubyqsl.interactions import C6Table, interaction_table
from rubyqsl.observables import (
    average_density,
    config_probability,
    fit_correlation_length,
    g2_correlation,
    site_densities,
    star_statistics,
)
from rubyqsl.oracle import MAX_FULL_SITES, embed_constrained, full_partial_trace, full_propagate
from rubyqsl.pulse import SweepQuenchSweep

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_validate", "cmd_lattice", "cmd_entropy", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_BUDGET = 3


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


DEFAULT_CONFIG: dict = {
    "patch": "kagome-9",
    "a_um": 4.0,
    "species": None,
    "r_s_over_a": 1.5,
    "c6_rbrb_ghz": 2550.0,
    "c6_cscs_ghz": 2350.0,
    "c6_rbcs_ghz": 3700.0,
    "interaction_cutoff_um": None,
    "detuning_sign": -1.0,
    "tau_us": 2.5,
    "t_q_us": 0.25,
    "delta_initial_mhz": -8.0,
    "delta_quench_mhz": 0.0,
    "delta_final_rb_mhz": 8.0,
    "nu": 1.0,
    "omega0_mhz": 2.0,
    "ramp_fraction": 0.1,
    "integrator": {
        "method": "krylov_midpoint",
        "dt_us": None,          # None -> tau/4000
        "krylov_dim": 12,
        "record_every": 20,
        "renormalize": False,
        "norm_budget": 1e-7,
    },
    "probes": ["n_bar"],
    "patterns": {},             # name -> list of excited site ids
    "axes": [],                 # [{"parameter": ..., "values": [...]}]
    "subsets": None,            # name/path of an A/B/C region file
    "fit_correlation": False,
    "site_filter": None,        # None (all) | "interior" | list of ids
    "export_state": False,
    "state_file": None,         # input for the entropy command
    "output_dir": "out",
    "threads": 1,
    "rng_seed": 0,
    "max_states": 3_000_000,
}

#: sweep axes resolvable to physical parameters (resolution order matters:
#: geometry first, then drive amplitude, then ratios that reference it)
SWEEP_AXES = (
    "a_um",
    "omega0_mhz",
    "rb_over_a",
    "nu",
    "tq_us",
    "tq_over_tau",
    "delta_f_over_omega0",
)


# --------------------------------------------------------------------------
# configuration plumbing
# --------------------------------------------------------------------------

def _merge_section(base: dict, incoming: dict, path: str) -> None:
    for key, value in incoming.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge_section(base[key], value, where)
        else:
            base[key] = value


def load_config(path: str | Path | None, sets: list[str] | None = None) -> dict:
    """Defaults, overlaid by the JSON file, overlaid by --set pairs."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})"
            ) from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        _merge_section(cfg, data, "")
    for pair in sets or []:
        if "=" not in pair:
            raise ConfigError(f"--set needs key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config section {part!r} in {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: dict) -> None:
    if not isinstance(cfg["patch"], str) or not cfg["patch"]:
        raise ConfigError("'patch' must be a patch name or file path")
    for axis in cfg["axes"]:
        if not isinstance(axis, dict) or set(axis) != {"parameter", "values"}:
            raise ConfigError(
                "each sweep axis needs exactly the keys 'parameter' and 'values'"
            )
        if axis["parameter"] not in SWEEP_AXES:
            raise ConfigError(
                f"unknown sweep axis {axis['parameter']!r}; "
                f"known: {', '.join(SWEEP_AXES)}"
            )
        values = axis["values"]
        if not values or not all(
            isinstance(v, (int, float)) and math.isfinite(v) for v in values
        ):
            raise ConfigError(f"axis {axis['parameter']!r} needs finite values")
    if int(cfg["threads"]) < 1:
        raise ConfigError("'threads' must be at least 1")
    for name, sites in cfg["patterns"].items():
        if not isinstance(sites, list) or not all(isinstance(s, int) for s in sites):
            raise ConfigError(f"pattern {name!r} must be a list of site ids")
    for probe in cfg["probes"]:
        if probe != "n_bar" and not probe.startswith("pattern:"):
            raise ConfigError(
                f"unknown probe {probe!r}; use 'n_bar' or 'pattern:<name>'"
            )
        if probe.startswith("pattern:") and probe[8:] not in cfg["patterns"]:
            raise ConfigError(f"probe {probe!r} references an undefined pattern")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def resolve_axis_point(cfg: dict, point: dict[str, float]) -> dict:
    """Apply one sweep-grid assignment, resolving dimensionless axes."""
    out = copy.deepcopy(cfg)
    if "a_um" in point:
        out["a_um"] = float(point["a_um"])
    if "omega0_mhz" in point:
        out["omega0_mhz"] = float(point["omega0_mhz"])
    if "rb_over_a" in point:
        # blockade radius x*a fixes the drive amplitude through V(R_b) = Omega0
        x = float(point["rb_over_a"])
        if x <= 0:
            raise ConfigError("rb_over_a must be positive")
        out["omega0_mhz"] = out["c6_rbrb_ghz"] * 1e3 / (x * out["a_um"]) ** 6
    if "nu" in point:
        out["nu"] = float(point["nu"])
    if "tq_us" in point:
        out["t_q_us"] = float(point["tq_us"])
    if "tq_over_tau" in point:
        out["t_q_us"] = float(point["tq_over_tau"]) * out["tau_us"]
    if "delta_f_over_omega0" in point:
        out["delta_final_rb_mhz"] = float(point["delta_f_over_omega0"]) * out["omega0_mhz"]
    return out


# --------------------------------------------------------------------------
# object assembly
# --------------------------------------------------------------------------

def make_patch(cfg: dict):
    patch = build_ruby_patch(cfg["patch"], a=float(cfg["a_um"]))
    if cfg["species"]:
        assignment = load_species_assignment(cfg["species"])
        patch = patch.with_species(assignment.labels)
    return patch


def make_c6(cfg: dict) -> C6Table:
    return C6Table(
        c6_rb_rb=float(cfg["c6_rbrb_ghz"]),
        c6_cs_cs=float(cfg["c6_cscs_ghz"]),
        c6_rb_cs=float(cfg["c6_rbcs_ghz"]),
    )


def make_pulse(cfg: dict) -> SweepQuenchSweep:
    return SweepQuenchSweep(
        tau=float(cfg["tau_us"]),
        t_q=float(cfg["t_q_us"]),
        delta_initial=float(cfg["delta_initial_mhz"]),
        delta_quench=float(cfg["delta_quench_mhz"]),
        delta_final_rb=float(cfg["delta_final_rb_mhz"]),
        nu=float(cfg["nu"]),
        omega0=float(cfg["omega0_mhz"]),
        ramp_fraction=float(cfg["ramp_fraction"]),
    )


def make_evolution_config(cfg: dict) -> EvolutionConfig:
    integ = cfg["integrator"]
    dt = integ["dt_us"]
    if dt is None:
        dt = float(cfg["tau_us"]) / 4000.0
    return EvolutionConfig(
        method=integ["method"],
        dt=float(dt),
        krylov_dim=int(integ["krylov_dim"]),
        record_every=int(integ["record_every"]),
        renormalize=bool(integ["renormalize"]),
        norm_budget=float(integ["norm_budget"]),
        detuning_sign=float(cfg["detuning_sign"]),
    )


def make_basis(cfg: dict, patch=None):
    patch = patch if patch is not None else make_patch(cfg)
    vtab = interaction_table(
        patch,
        make_c6(cfg),
        cutoff=cfg["interaction_cutoff_um"],
    )
    return build_basis(
        patch,
        r_s=float(cfg["r_s_over_a"]) * patch.a,
        vtab=vtab,
        max_states=int(cfg["max_states"]),
    )


def _pattern_bits(cfg: dict, name: str, n_sites: int) -> int:
    try:
        sites = cfg["patterns"][name]
    except KeyError:
        raise ConfigError(f"pattern {name!r} is not defined") from None
    if any(s < 0 or s >= n_sites for s in sites):
        raise ConfigError(f"pattern {name!r} references sites outside the patch")
    return sum(1 << s for s in sites)


def make_probes(cfg: dict, n_sites: int) -> dict:
    probes = {}
    for spec in cfg["probes"]:
        if spec == "n_bar":
            probes["n_bar"] = lambda t, s: average_density(s)
        else:
            name = spec[8:]
            bits = _pattern_bits(cfg, name, n_sites)
            probes[spec] = lambda t, s, b=bits: config_probability(s, b)
    return probes


def _resolve_site_filter(cfg: dict, patch) -> list[int] | None:
    flt = cfg["site_filter"]
    if flt is None:
        return None
    if flt == "interior":
        return [s.id for s in patch.sites if not s.is_edge]
    if isinstance(flt, list):
        return [int(s) for s in flt]
    raise ConfigError("site_filter must be null, 'interior', or a list of ids")


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------

def final_state_metrics(cfg: dict, basis, psi: StateVector) -> list[tuple[str, float]]:
    """Scalar metrics of one final state, in a fixed deterministic order."""
    patch = basis.patch
    rows: list[tuple[str, float]] = [("n_bar", average_density(psi))]
    if patch.vertex_stars:
        stats = star_statistics(psi, patch)
        for cls in StarClass:
            mean = float(np.mean([s[cls] for s in stats]))
            rows.append((f"star_{cls.value}", mean))
    for name in sorted(cfg["patterns"]):
        bits = _pattern_bits(cfg, name, patch.n_sites)
        rows.append((f"pattern:{name}", config_probability(psi, bits)))
    if cfg["fit_correlation"]:
        series = g2_correlation(psi, patch, _resolve_site_filter(cfg, patch))
        fit = fit_correlation_length(series, rng_seed=int(cfg["rng_seed"]))
        rows += [
            ("xi_over_a", fit.xi / patch.a),
            ("kappa_a", fit.kappa * patch.a),
            ("fit_A", fit.A),
            ("fit_B", fit.B),
            ("fit_rms", fit.rms_residual),
            ("fit_degenerate", float(fit.degenerate)),
        ]
    if cfg["subsets"]:
        a, b, c = load_subset_triple(cfg["subsets"])
        report = tqee(psi, a, b, c)
        for label in ("A", "B", "C", "AB", "AC", "BC", "ABC"):
            rows.append((f"S_{label}", report.entropies[label]))
        rows.append(("gamma", report.gamma))
    return rows


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_run(cfg: dict) -> int:
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)

    patch = make_patch(cfg)
    basis = make_basis(cfg, patch)
    drive = make_pulse(cfg)
    evo = make_evolution_config(cfg)
    probes = make_probes(cfg, patch.n_sites)
    vtab = basis.vtab

    traj = propagate(basis, vtab, drive, None, evo, probes)

    names = list(probes)
    lines = [f"# config_sha256: {digest}", "t_us,norm" + "".join(f",{n}" for n in names)]
    for k, t in enumerate(traj.times):
        row = f"{t:.9g},{traj.norms[k]:.12g}"
        for n in names:
            row += f",{traj.probes[n][k]:.12g}"
        lines.append(row)
    (out_dir / "trajectory.csv").write_text("\n".join(lines) + "\n")

    psi = traj.final_state
    summary = {
        "config_sha256": digest,
        "patch": patch.name,
        "n_sites": patch.n_sites,
        "basis_dim": basis.dim,
        "final_norm": psi.norm,
        "site_densities": [float(x) for x in site_densities(psi)],
        "n_bar": average_density(psi),
        "star_statistics": [
            {cls.value: probs[cls] for cls in probs}
            for probs in (star_statistics(psi, patch) if patch.vertex_stars else [])
        ],
        "patterns": {
            name: config_probability(psi, _pattern_bits(cfg, name, patch.n_sites))
            for name in sorted(cfg["patterns"])
        },
    }
    (out_dir / "observables.json").write_text(json.dumps(summary, indent=2) + "\n")

    if cfg["export_state"]:
        amps = psi.amplitudes.astype("<c8")
        (out_dir / "state.bin").write_bytes(amps.tobytes())
        sidecar = {
            "format": "complex64-le-interleaved",
            "dim": basis.dim,
            "n_sites": patch.n_sites,
            "patch": cfg["patch"],
            "species": cfg["species"],
            "a_um": cfg["a_um"],
            "r_s_over_a": cfg["r_s_over_a"],
            "basis_order": "popcount-then-value",
            "states_sha256": hashlib.sha256(
                basis.states.astype("<u8").tobytes()
            ).hexdigest(),
            "config_sha256": digest,
        }
        (out_dir / "state.json").write_text(json.dumps(sidecar, indent=2) + "\n")

    print(
        f"run: patch={patch.name} dim={basis.dim} n_bar={summary['n_bar']:.6f} "
        f"-> {out_dir}"
    )
    return EXIT_OK


def _sweep_point(cfg: dict, point: dict[str, float], shared_basis) -> list[tuple[str, float, str]]:
    resolved = resolve_axis_point(cfg, point)
    basis = shared_basis if shared_basis is not None else make_basis(resolved)
    drive = make_pulse(resolved)
    evo = make_evolution_config(resolved)
    traj = propagate(basis, basis.vtab, drive, None, evo, probes={})
    return [(m, v, "ok") for m, v in final_state_metrics(resolved, basis, traj.final_state)]


def cmd_sweep(cfg: dict) -> int:
    if not cfg["axes"]:
        raise ConfigError("sweep needs at least one axis")
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)

    axis_names = [ax["parameter"] for ax in cfg["axes"]]
    if len(set(axis_names)) != len(axis_names):
        raise ConfigError("sweep axes must be distinct parameters")
    grids = [ax["values"] for ax in cfg["axes"]]
    points = sorted(itertools.product(*grids))

    # the basis only depends on geometry/interactions: reuse it across the
    # grid unless an axis moves the lattice constant
    shared_basis = None
    if "a_um" not in axis_names:
        shared_basis = make_basis(cfg)
        shared_basis.hop_matrix()  # materialize before threads share it

    def task(values) -> list[tuple[str, float, str]]:
        point = dict(zip(axis_names, values))
        try:
            return _sweep_point(cfg, point, shared_basis)
        except BasisSizeError:
            return [("run", math.nan, "budget_exceeded")]
        except NormDriftError:
            return [("run", math.nan, "norm_drift")]

    results: list[list[tuple[str, float, str]]]
    if int(cfg["threads"]) > 1:
        with ThreadPoolExecutor(max_workers=int(cfg["threads"])) as pool:
            results = list(pool.map(task, points))
    else:
        results = [task(v) for v in points]

    lines = [
        f"# config_sha256: {digest}",
        ",".join(axis_names) + ",metric,value,status",
    ]
    failed = 0
    for values, rows in zip(points, results):
        prefix = ",".join(f"{v:.9g}" for v in values)
        for metric, value, status in rows:
            lines.append(f"{prefix},{metric},{value:.12g},{status}")
        if rows and rows[0][2] != "ok":
            failed += 1
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"sweep: {len(points)} points ({failed} failed) -> {out_dir / 'sweep.csv'}")
    if failed == len(points):
        return EXIT_BUDGET
    return EXIT_OK


def _check(name: str, ok: bool, detail: str, report: list[str]) -> bool:
    report.append(f"{'PASS' if ok else 'FAIL'} {name}" + ("" if ok else f": {detail}"))
    return ok


def cmd_validate(cfg: dict, corrupt_basis: bool = False) -> int:
    patch = make_patch(cfg)
    if patch.n_sites > MAX_FULL_SITES:
        raise ConfigError(
            f"validate needs a patch with at most {MAX_FULL_SITES} sites"
        )
    basis = make_basis(cfg, patch)
    if corrupt_basis:
        # negative-control hook: replace the last basis state with a pattern
        # that violates the exclusion rule (two sites of one triangle)
        bad = np.uint64(0b11)
        states = basis.states.copy()
        states[-1] = bad if bad not in states else np.uint64(0b111)
        basis.states = states

    drive = make_pulse(cfg)
    evo = make_evolution_config(cfg)
    report: list[str] = []
    all_ok = True

    n = patch.n_sites
    if patch.vertex_stars and n % 3 == 0:
        expected = 4 ** (n // 3)
        all_ok &= _check(
            "basis-dimension-law",
            basis.dim == expected,
            f"dim {basis.dim} != 4^(N/3) = {expected}",
            report,
        )

    closed = True
    detail = ""
    state_set = set(int(s) for s in basis.states)
    for s in state_set:
        t = s
        while t:
            bit = t & -t
            if (s ^ bit) not in state_set:
                closed = False
                detail = f"state {s:b} minus bit {bit:b} leaves the basis"
                break
            t ^= bit
        if not closed:
            break
    all_ok &= _check("basis-closure-under-clears", closed, detail, report)

    pairs_ok = True
    detail = ""
    pos = patch.positions()
    for s in itertools.islice(state_set, 2000):
        sites = [i for i in range(n) if (s >> i) & 1]
        for x in range(len(sites)):
            for y in range(x + 1, len(sites)):
                d = float(np.hypot(*(pos[sites[x]] - pos[sites[y]])))
                if d < basis.r_s:
                    pairs_ok = False
                    detail = f"state {s:b} has excluded pair {sites[x]},{sites[y]}"
                    break
    all_ok &= _check("basis-exclusion-rule", pairs_ok, detail, report)

    rng = np.random.default_rng(int(cfg["rng_seed"]))
    action = HamiltonianAction(basis, basis.vtab, drive, cfg["detuning_sign"])
    worst = 0.0
    for t in (0.0, drive.tau / 3.0, drive.tau):
        h = dense_hamiltonian(basis, basis.vtab, drive, t, cfg["detuning_sign"])
        v = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        v /= np.linalg.norm(v)
        diff = np.max(np.abs(action.matvec(t, v) - h @ v))
        scale = max(1.0, float(np.max(np.abs(h))))
        worst = max(worst, diff / scale)
    all_ok &= _check(
        "matvec-vs-dense", worst < 1e-12, f"relative deviation {worst:.3e}", report
    )

    try:
        traj = propagate(basis, basis.vtab, drive, None, evo)
        drift = abs(traj.final_state.norm - 1.0)
        all_ok &= _check(
            "norm-conservation", drift < evo.norm_budget, f"drift {drift:.3e}", report
        )
        psi = traj.final_state
    except NormDriftError as exc:
        all_ok &= _check("norm-conservation", False, str(exc), report)
        psi = None

    if psi is not None:
        full = full_propagate(patch, make_c6(cfg), drive, evo)
        diff = float(
            np.max(np.abs(full.site_densities() - site_densities(psi)))
        )
        all_ok &= _check(
            "constrained-vs-full-densities",
            diff < 0.05,
            f"max site-density deviation {diff:.4f}",
            report,
        )

        subset = list(range(min(3, n - 1)))
        rho, patterns = reduced_density(psi, subset)
        rho_full = full_partial_trace(embed_constrained(psi), subset)
        sub = rho_full[np.ix_(patterns.astype(int), patterns.astype(int))]
        dev = float(np.max(np.abs(rho - sub)))
        all_ok &= _check(
            "reduced-density-vs-full-trace",
            dev < 1e-10,
            f"max element deviation {dev:.3e}",
            report,
        )
        s_val = von_neumann_entropy(rho)
        comp = [i for i in range(n) if i not in subset]
        rho_c, _ = reduced_density(psi, comp)
        s_comp = von_neumann_entropy(rho_c)
        all_ok &= _check(
            "pure-state-complement-entropy",
            abs(s_val - s_comp) < 1e-8,
            f"S={s_val:.10f} vs S_comp={s_comp:.10f}",
            report,
        )

    print("\n".join(report))
    return EXIT_OK if all_ok else EXIT_VALIDATION


def cmd_lattice(cfg: dict) -> int:
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)
    patch = make_patch(cfg)

    lines = [f"# config_sha256: {digest}", "id,x_um,y_um,species,is_edge"]
    for s in patch.sites:
        lines.append(
            f"{s.id},{s.pos[0]:.9g},{s.pos[1]:.9g},{s.species.value},{int(s.is_edge)}"
        )
    (out_dir / "lattice.csv").write_text("\n".join(lines) + "\n")

    lines = [f"# config_sha256: {digest}", "star,site0,site1,site2,site3"]
    for k, star in enumerate(patch.vertex_stars):
        lines.append(f"{k}," + ",".join(str(s) for s in star))
    (out_dir / "stars.csv").write_text("\n".join(lines) + "\n")
    print(f"lattice: {patch.name} N={patch.n_sites} -> {out_dir}")
    return EXIT_OK


def cmd_entropy(cfg: dict) -> int:
    if not cfg["state_file"]:
        raise ConfigError("entropy needs 'state_file' (state.json or state.bin)")
    sidecar_path = Path(cfg["state_file"])
    if sidecar_path.suffix == ".bin":
        sidecar_path = sidecar_path.with_suffix(".json")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read state file: {exc}") from exc
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(
            f"{sidecar_path} is not a state sidecar (pass the .json or .bin "
            f"written by a run with export_state): {exc}"
        ) from exc

    for key in ("patch", "a_um", "r_s_over_a", "dim", "states_sha256"):
        if key not in sidecar:
            raise ConfigError(f"state sidecar is missing {key!r}")
    rebuild = dict(
        cfg,
        patch=sidecar["patch"],
        species=sidecar.get("species"),
        a_um=sidecar["a_um"],
        r_s_over_a=sidecar["r_s_over_a"],
    )
    basis = make_basis(rebuild)
    digest_states = hashlib.sha256(basis.states.astype("<u8").tobytes()).hexdigest()
    if digest_states != sidecar["states_sha256"]:
        print("basis rebuilt from sidecar does not match the stored state order", file=sys.stderr)
        return EXIT_VALIDATION

    amps = np.fromfile(sidecar_path.with_suffix(".bin"), dtype="<c8").astype(
        np.complex128
    )
    if amps.size != basis.dim:
        print(
            f"state file holds {amps.size} amplitudes, basis has {basis.dim}",
            file=sys.stderr,
        )
        return EXIT_VALIDATION
    nrm = float(np.linalg.norm(amps))
    if abs(nrm - 1.0) > 1e-3:
        print(f"stored state norm {nrm} too far from 1", file=sys.stderr)
        return EXIT_VALIDATION
    psi = StateVector(basis, amps / nrm)

    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)

    curve = mutual_information_curve(psi)
    lines = [f"# config_sha256: {digest}", "k,mutual_information"]
    lines += [f"{k},{val:.12g}" for k, val in curve]
    (out_dir / "mi_curve.csv").write_text("\n".join(lines) + "\n")

    if cfg["subsets"]:
        a, b, c = load_subset_triple(cfg["subsets"])
        report = tqee(psi, a, b, c)
        text = f"# config_sha256: {digest}\n" + report.csv()
        (out_dir / "entropy.csv").write_text(text)
        print(f"entropy: gamma={report.gamma:.6f} -> {out_dir}")
    else:
        print(f"entropy: mutual-information curve -> {out_dir / 'mi_curve.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rubyqsl",
        description="Dual-species Rydberg array simulator on ruby-lattice patches",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "single propagation with trajectory output"),
        ("sweep", "Cartesian parameter sweep"),
        ("validate", "invariant and oracle check suite"),
        ("lattice", "emit patch geometry tables"),
        ("entropy", "entanglement analysis of a saved state"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (JSON value or bare string)",
        )
        if name == "validate":
            p.add_argument(
                "--corrupt-basis",
                action="store_true",
                help=argparse.SUPPRESS,  # negative-control test hook
            )
        if name == "entropy":
            p.add_argument("--state", default=None, help="state sidecar JSON path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.command == "entropy" and args.state:
            cfg = dict(cfg, state_file=args.state)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "validate":
            return cmd_validate(cfg, corrupt_basis=args.corrupt_basis)
        if args.command == "lattice":
            return cmd_lattice(cfg)
        return cmd_entropy(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BasisSizeError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    raise SystemExit(main())
