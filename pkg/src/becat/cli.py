"""Command-line entry point and run-file serialisation.

Subcommands::

    hat       quasi-momentum occupation distribution of the triple Fock state
    ground    Bose-Hubbard ground states for a list of U/J values
    detect    sequential detection run, written as a JSON run file
    phase     joint relative-phase grid and cat peaks of a run file
    number    (N_a, N_b) distribution and fringe report of a run file
    coherent  coherent-state interference pattern and phase-swap check

Exit codes: 0 success, 1 usage error, 2 numerical failure.  Every number
is written with ``repr`` so files are locale-independent and round-trip
exactly.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .detection import EtaDistribution, run_sequence
from .errors import NumericalError
from .fock import QuantumState, basis_build, fock_state
from .hubbard import Boundary, HamiltonianParams, quasimomentum_profile, solve
from .modes import hat_distribution
from .number import fringe_analysis, number_distribution, coherent_pattern, pattern_swap_check
from .phase import find_cat_peaks, phase_distribution, swap_asymmetry

log = logging.getLogger("becat")

RUN_FORMAT = "becat-run"
RUN_VERSION = 1
THREADS_ENV = "BECAT_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    """Everything needed to reproduce a detection run."""

    sites: int = 3
    atoms_per_site: int = 100
    detections: int = 100
    eta_dist: str = "delta:1.0"
    grid_points: int = 1024
    seed: int = 0


# -- run files ---------------------------------------------------------------

def run_to_dict(config: RunConfig, run, created: str | None = None) -> dict:
    state = run.final_state
    return {
        "format": RUN_FORMAT,
        "version": RUN_VERSION,
        "created": created or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": asdict(config),
        "seed": run.seed,
        "eta_dist": run.eta_dist.spec(),
        "events": [{"k": e.k, "u": e.u, "eta": e.eta, "theta": e.theta} for e in run.events],
        "basis": {
            "n_modes": state.n_modes,
            "total_atoms": state.total_atoms,
            "order": "lexicographic-descending",
            "dimension": state.basis.dimension,
        },
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def write_run(path: Path, data: dict) -> None:
    # json writes floats with repr, i.e. the shortest string that round-trips
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def read_run(path: Path) -> tuple[dict, QuantumState]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format") != RUN_FORMAT:
        raise UsageError(f"{path} is not a run file")
    if data.get("version") != RUN_VERSION:
        raise UsageError(f"unsupported run file version {data.get('version')!r}")
    b = data["basis"]
    basis = basis_build(int(b["n_modes"]), int(b["total_atoms"]))
    amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
    if len(amps) != basis.dimension:
        raise UsageError(f"run file has {len(amps)} amplitudes, basis needs {basis.dimension}")
    return data, QuantumState(basis, amps)


# -- output helpers ----------------------------------------------------------

def _open_out(path: str | None):
    if path in (None, "-"):
        return _NoClose(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


class _NoClose:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        self.fh.flush()


def _write_simplex_csv(path, P: np.ndarray, names: tuple[str, str], lead: list | None = None, header=True, fh=None):
    """Rows (N_x, N_y, probability) for N_x + N_y <= T in lexicographic order."""
    T = P.shape[0] - 1
    def emit(w):
        if header:
            w.writerow(([lead[0]] if lead else []) + [*names, "probability"])
        for a in range(T + 1):
            for b in range(T + 1 - a):
                w.writerow(([lead[1]] if lead else []) + [a, b, repr(float(P[a, b]))])
    if fh is not None:
        emit(csv.writer(fh, lineterminator="\n"))
        return
    with _open_out(path) as out:
        emit(csv.writer(out, lineterminator="\n"))


def _check_format(args):
    if args.format != "csv":
        raise UsageError(f"unsupported format {args.format!r}; only csv is available")


# -- commands ----------------------------------------------------------------

def cmd_hat(args) -> int:
    _check_format(args)
    if args.sites != 3:
        raise UsageError("the occupation distribution is defined for three sites")
    if args.atoms_per_site < 0:
        raise UsageError("--atoms-per-site must be >= 0")
    P = hat_distribution(args.atoms_per_site, args.xi)
    _write_simplex_csv(args.out, P, ("N_alpha", "N_beta"))
    return 0


def _solve_one(sites: int, atoms: int, uj: float, boundary: str):
    params = HamiltonianParams(sites, atoms, J=1.0, U=uj, boundary=Boundary(boundary))
    gs = solve(params)
    return uj, gs, quasimomentum_profile(gs.state)


def cmd_ground(args) -> int:
    _check_format(args)
    if args.sites != 3:
        raise UsageError("the occupation distribution is defined for three sites")
    if args.atoms < 0 or any(u < 0 for u in args.uj):
        raise UsageError("--atoms and --uj values must be non-negative")
    threads = int(os.environ.get(THREADS_ENV, "0")) or min(len(args.uj), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        results = list(pool.map(lambda u: _solve_one(args.sites, args.atoms, u, args.boundary), args.uj))
    with _open_out(args.out) as fh:
        for i, (uj, _, P) in enumerate(results):
            _write_simplex_csv(None, P, ("N_alpha", "N_beta"), lead=["uj", repr(float(uj))], header=i == 0, fh=fh)
    meta = {
        "sites": args.sites,
        "atoms": args.atoms,
        "boundary": args.boundary,
        "results": [
            {"uj": uj, "energy": gs.energy, "residual": gs.residual, "gap": gs.gap, "near_degenerate": gs.near_degenerate}
            for uj, gs, _ in results
        ],
    }
    meta_path = args.meta or (f"{args.out}.meta.json" if args.out not in (None, "-") else None)
    if meta_path:
        Path(meta_path).write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    else:
        print(json.dumps(meta, indent=1), file=sys.stderr)
    return 0


def cmd_detect(args) -> int:
    if args.detections < 0:
        raise UsageError("--detections must be >= 0")
    if args.atoms_per_site < 0 or args.sites < 2:
        raise UsageError("need at least two sites and a non-negative atom count")
    total = args.sites * args.atoms_per_site
    if args.detections > total:
        raise UsageError(f"cannot detect {args.detections} of {total} atoms")
    try:
        eta = EtaDistribution.parse(args.eta_dist)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = RunConfig(args.sites, args.atoms_per_site, args.detections, eta.spec(), args.grid_points, args.seed)
    run = run_sequence(fock_state([args.atoms_per_site] * args.sites), args.detections, eta, args.seed, args.grid_points)
    data = run_to_dict(config, run)
    if args.out in (None, "-"):
        json.dump(data, sys.stdout, indent=1)
        sys.stdout.write("\n")
    else:
        write_run(Path(args.out), data)
    return 0


def cmd_phase(args) -> int:
    _check_format(args)
    _, state = read_run(Path(args.run))
    if state.n_modes != 3:
        raise UsageError("relative-phase grids need a three-site run")
    grid = phase_distribution(state, args.grid)
    phis = grid.phis
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi_ba", "phi_cb", "probability"])
        for i in range(grid.M):
            for j in range(grid.M):
                w.writerow([repr(float(phis[i])), repr(float(phis[j])), repr(float(grid.values[i, j]))])
    report = sys.stderr if args.out in (None, "-") else sys.stdout
    print(f"swap_asymmetry {swap_asymmetry(grid)!r}", file=report)
    peaks = find_cat_peaks(grid)
    for name in ("phi1", "phi2", "peak_height", "mirror_height", "separation", "valley_ratio", "degenerate"):
        print(f"{name} {getattr(peaks, name)!r}", file=report)
    return 0


def cmd_number(args) -> int:
    _check_format(args)
    _, state = read_run(Path(args.run))
    if state.n_modes != 3:
        raise UsageError("the (N_a, N_b) distribution needs a three-site run")
    dist = number_distribution(state)
    _write_simplex_csv(args.out, dist.values, ("N_a", "N_b"))
    if args.no_fringes:
        return 0
    report = sys.stderr if args.out in (None, "-") else sys.stdout
    peaks = find_cat_peaks(phase_distribution(state, args.grid))
    rep = fringe_analysis(dist, peaks)
    for name in (
        "predicted_frequency",
        "dominant_frequency_b",
        "contrast_b",
        "dominant_frequency_a",
        "contrast_a",
        "delta_estimate",
        "spectral_peak_b",
        "spectral_bin",
        "frequency_error_bins",
    ):
        print(f"{name} {getattr(rep, name)!r}", file=report)
    return 0


def cmd_coherent(args) -> int:
    _check_format(args)
    phases = args.phases if args.phases is not None else [0.0] * args.modes
    if len(phases) != args.modes:
        raise UsageError(f"--phases needs {args.modes} values")
    if not 0.0 <= args.F <= 1.0:
        raise UsageError("--F must lie in [0, 1]")
    u = -np.pi + 2 * np.pi * np.arange(args.grid) / args.grid
    pattern = coherent_pattern(args.modes, phases, args.F, u)
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "density"])
        for x, y in zip(u, pattern):
            w.writerow([repr(float(x)), repr(float(y))])
    report = sys.stderr if args.out in (None, "-") else sys.stdout
    pair = tuple(args.swap) if args.swap else None
    diff = pattern_swap_check(args.modes, phases, args.F, args.grid, pair)
    verdict = "invariant" if diff < 1e-12 else "changed"
    print(f"swap_difference {diff!r} {verdict}", file=report)
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="becat", description=__doc__.split("\n\n")[0], formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help="output CSV path ('-' for stdout)"):
        sp.add_argument("--out", default="-", help=out_help)
        sp.add_argument("--format", default="csv", help="output format")

    s = sub.add_parser("hat", help="hat-state occupation distribution", formatter_class=fmt)
    s.add_argument("--sites", type=int, default=3, help="number of lattice sites")
    s.add_argument("--atoms-per-site", type=int, default=20, help="atoms in each initial Fock state")
    s.add_argument("--xi", type=float, default=0.0, help="quasi-momentum phase offset")
    common(s)
    s.set_defaults(func=cmd_hat)

    s = sub.add_parser("ground", help="Bose-Hubbard ground-state profiles", formatter_class=fmt)
    s.add_argument("--sites", type=int, default=3, help="number of lattice sites")
    s.add_argument("--atoms", type=int, default=60, help="total number of atoms")
    s.add_argument("--uj", type=float, nargs="+", default=[0.0], help="U/J values (J = 1)")
    s.add_argument("--boundary", choices=[b.value for b in Boundary], default="periodic", help="boundary condition")
    s.add_argument("--meta", default=None, help="metadata JSON path; None writes OUT.meta.json")
    common(s)
    s.set_defaults(func=cmd_ground)

    s = sub.add_parser("detect", help="sequential detection run", formatter_class=fmt)
    s.add_argument("--sites", type=int, default=3, help="number of lattice sites")
    s.add_argument("--atoms-per-site", type=int, default=100, help="atoms in each initial Fock state")
    s.add_argument("--detections", type=int, default=100, help="number of atoms to detect")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.add_argument("--eta-dist", default="delta:1.0", help="delta:ETA | gauss:MEAN,SD | table:V1,V2;W1,W2")
    s.add_argument("--grid-points", type=int, default=1024, help="u grid used for sampling")
    s.add_argument("--out", default="-", help="run file path ('-' for stdout)")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("phase", help="relative-phase grid of a run file", formatter_class=fmt)
    s.add_argument("--run", required=True, help="run file written by detect")
    s.add_argument("--grid", type=int, default=256, help="grid points per phase axis")
    common(s)
    s.set_defaults(func=cmd_phase)

    s = sub.add_parser("number", help="number distribution and fringes of a run file", formatter_class=fmt)
    s.add_argument("--run", required=True, help="run file written by detect")
    s.add_argument("--grid", type=int, default=256, help="phase grid used to locate the cat peaks")
    s.add_argument("--no-fringes", action="store_true", help="write the distribution only")
    common(s)
    s.set_defaults(func=cmd_number)

    s = sub.add_parser("coherent", help="coherent-state interference pattern", formatter_class=fmt)
    s.add_argument("--modes", type=int, default=4, help="number of condensates")
    s.add_argument("--phases", type=float, nargs="+", default=None, help="absolute phases, one per mode")
    s.add_argument("--F", type=float, default=1.0, help="fringe visibility factor F in [0, 1]")
    s.add_argument("--grid", type=int, default=1024, help="number of u points")
    s.add_argument("--swap", type=int, nargs=2, default=None, metavar=("I", "J"),
                   help="relative phases to exchange; None exchanges the first and last")
    common(s)
    s.set_defaults(func=cmd_coherent)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError, KeyError) as exc:
        print(f"becat {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError) as exc:
        print(f"becat {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
