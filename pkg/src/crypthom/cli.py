"""Command line: ``crypthom [--config FILE] [--out DIR] SUBCOMMAND``.

Subcommands and the files they leave in the output directory:

``cell``     coeffs.txt, density.vtk, density.csv
``fine``     fine_eps<eps>/trajectory.npz plus CSV/VTK per output time
``homog``    homog/trajectory.npz plus CSV/VTK (needs coeffs.txt)
``compare``  tables/<quantity>_<norm>.csv, report.txt (needs the trajectories)
``full``     all of the above over the configured eps list
``gnuplot``  gnuplot/*.dat column files from the error tables

Every invocation merges its phase timings and a SHA-256 of every file it
wrote into ``manifest.json``.
"""
import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .cell_problem import HomCoeffs, solve_cell_problem
from .config import RunConfig, parse_config
from .errors import ConfigError, CrypthomError, DependencyError
from .export import write_trajectory_vtk, write_vtk
from .fine_solver import run_fine
from .homog_solver import run_homog
from .report import NORMS, QUANTITIES, convergence_table, runtime_summary
from .sim import Trajectory, trajectory_csv_files

log = logging.getLogger("crypthom")

SUBCOMMANDS = ("cell", "fine", "homog", "compare", "full", "gnuplot")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import scipy
    out = {"python": platform.python_version(), "crypthom": __version__,
           "numpy": np.__version__, "scipy": scipy.__version__,
           "numba": _accel.numba.__version__ if _accel.HAS_NUMBA else None,
           "numba_enabled": _accel.USE_NUMBA}
    return out


class Run:
    """State shared by the phases of one invocation."""

    def __init__(self, cfg: RunConfig, outdir: Path):
        self.cfg = cfg
        self.out = Path(outdir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {self.out} is not writable: {exc}") from None
        self.files = []
        self.phases = {}

    def phase(self, name, func, *args):
        t = time.perf_counter()
        result = func(*args)
        self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - t
        return result

    def wrote(self, *paths):
        self.files.extend(Path(p) for p in paths)

    @property
    def coeffs_file(self):
        return self.out / "coeffs.txt"

    def fine_dir(self, eps):
        return self.out / f"fine_eps{eps:g}"

    @property
    def homog_dir(self):
        return self.out / "homog"

    def write_manifest(self, command, extra=None):
        path = self.out / "manifest.json"
        manifest = json.loads(path.read_text()) if path.exists() else {}
        manifest.setdefault("runs", []).append({
            "command": command, "config": self.cfg.echo(), "versions": _versions(),
            "phase_seconds": self.phases, **(extra or {})})
        files = manifest.get("files", {})
        for f in self.files:
            files[str(f.relative_to(self.out))] = _sha256(f)
        manifest["files"] = dict(sorted(files.items()))
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

def do_cell(run):
    cfg = run.cfg
    m, hc = run.phase("cell", solve_cell_problem, cfg.n_ref, cfg.coeffs)
    hc.save(run.coeffs_file)
    mesh = m.mesh
    write_vtk(run.out / "density.vtk", mesh.nodes, mesh.tris, {"m": m.nodal}, title="invariant density")
    np.savetxt(run.out / "density.csv", np.column_stack([np.arange(mesh.n_nodes), mesh.nodes, m.nodal]),
               delimiter=",", header="node,Y1,Y2,m", comments="", fmt=["%d", "%.17g", "%.17g", "%.17g"])
    run.wrote(run.coeffs_file, run.out / "density.vtk", run.out / "density.csv")
    log.info("homogenized coefficients: %s", hc.as_dict())
    return hc


def _save_trajectory(run, traj, directory, prefix):
    directory.mkdir(parents=True, exist_ok=True)
    traj.save(directory / "trajectory.npz")
    files = [directory / "trajectory.npz"]
    files += trajectory_csv_files(traj, directory, prefix)
    files += write_trajectory_vtk(directory, prefix, traj)
    (directory / "steps.json").write_text(json.dumps(
        {"step_seconds": traj.meta.get("step_seconds", []),
         "setup_seconds": traj.meta.get("setup_seconds")}, indent=1) + "\n")
    files.append(directory / "steps.json")
    run.wrote(*files)


def do_fine(run, eps):
    cfg = run.cfg
    traj = run.phase(f"fine eps={eps:g}", run_fine, cfg.sim_for(eps), cfg.coeffs)
    _save_trajectory(run, traj, run.fine_dir(eps), "fine")
    return traj


def load_coeffs(run):
    if not run.coeffs_file.exists():
        raise DependencyError(f"{run.coeffs_file} is missing; run `crypthom cell` first")
    return HomCoeffs.load(run.coeffs_file).validate()


def do_homog(run):
    hc = load_coeffs(run)
    traj = run.phase("homog", run_homog, hc, run.cfg.sim)
    _save_trajectory(run, traj, run.homog_dir, "homog")
    return traj


def _load_trajectory(path, producer):
    if not path.exists():
        raise DependencyError(f"{path} is missing; run `crypthom {producer}` first")
    return Trajectory.load(path)


def do_compare(run, assert_monotone=False):
    cfg = run.cfg
    ref = _load_trajectory(run.homog_dir / "trajectory.npz", "homog")
    runs = [(eps, _load_trajectory(run.fine_dir(eps) / "trajectory.npz", f"fine --eps {eps:g}"))
            for eps in cfg.eps_list]
    tables = run.phase("compare", convergence_table, runs, ref, list(cfg.sim.output_times))
    tdir = run.out / "tables"
    tdir.mkdir(exist_ok=True)
    for q in QUANTITIES:
        for nm in NORMS:
            f = tdir / f"{q}_{nm}.csv"
            f.write_text(tables.to_csv(q, nm))
            run.wrote(f)
    steps = {}
    try:
        fine_steps = json.loads((run.fine_dir(cfg.eps_list[-1]) / "steps.json").read_text())["step_seconds"]
        homog_steps = json.loads((run.homog_dir / "steps.json").read_text())["step_seconds"]
        if fine_steps and homog_steps:
            steps = runtime_summary(fine_steps, homog_steps)
    except (OSError, KeyError, ValueError):
        pass
    text = tables.to_text()
    if steps:
        text += (f"\nseconds per step: fine {steps['fine_step_seconds']:.4g}, "
                 f"homogenized {steps['homog_step_seconds']:.4g}, ratio {steps['ratio']:.3g}\n")
    c_monotone = tables.monotone(quantities=("C",))
    text += f"\nC errors decrease with eps at every time: {'yes' if c_monotone else 'NO'}\n"
    (run.out / "report.txt").write_text(text)
    run.wrote(run.out / "report.txt")
    print(text, end="")
    if assert_monotone and not c_monotone:
        return 1
    return 0


def do_gnuplot(run):
    tdir = run.out / "tables"
    if not tdir.exists():
        raise DependencyError(f"{tdir} is missing; run `crypthom compare` first")
    gdir = run.out / "gnuplot"
    gdir.mkdir(exist_ok=True)
    for f in sorted(tdir.glob("*.csv")):
        rows = [ln.split(",") for ln in f.read_text().splitlines()]
        out = gdir / (f.stem + ".dat")
        lines = ["# " + " ".join(rows[0][:-1])]
        lines += [" ".join("nan" if v == "undefined" else v for v in r[:-1]) for r in rows[1:]]
        out.write_text("\n".join(lines) + "\n")
        run.wrote(out)
    return 0


def dispatch(subcommand, cfg, outdir=None, eps=None, assert_monotone=False):
    """Run one subcommand; returns the process exit status."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    run = Run(cfg, outdir or cfg.output_dir)
    status = 0
    if subcommand == "cell":
        do_cell(run)
    elif subcommand == "fine":
        if eps is None:
            raise ConfigError("`fine` needs --eps")
        cfg.sim_for(eps).check_resolution(cfg.geometry.a)
        do_fine(run, eps)
    elif subcommand == "homog":
        do_homog(run)
    elif subcommand == "compare":
        status = do_compare(run, assert_monotone)
    elif subcommand == "gnuplot":
        status = do_gnuplot(run)
    elif subcommand == "full":
        do_cell(run)
        do_homog(run)
        workers = min(_accel.num_threads(), len(cfg.eps_list))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(lambda e: do_fine(run, e), cfg.eps_list))
        else:
            for e in cfg.eps_list:
                do_fine(run, e)
        status = do_compare(run, assert_monotone)
        do_gnuplot(run)
    run.write_manifest(subcommand, {"exit_status": status})
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="crypthom", description=__doc__.split("\n")[0])
    p.add_argument("--config", type=Path, help="run configuration file (default: built-in crypt model values)")
    p.add_argument("--out", type=Path, help="output directory (overrides experiment.output_dir)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("cell", help="solve the cell problem, write the averaged coefficients")
    f = sub.add_parser("fine", help="run the heterogeneous model for one eps")
    f.add_argument("--eps", type=float, required=True)
    sub.add_parser("homog", help="run the homogenized model")
    c = sub.add_parser("compare", help="error tables from stored trajectories")
    c.add_argument("--assert-monotone", action="store_true",
                   help="exit 1 unless the C errors decrease with eps at every time")
    full = sub.add_parser("full", help="cell, homog, fine for every eps, compare")
    full.add_argument("--assert-monotone", action="store_true")
    sub.add_parser("gnuplot", help="gnuplot data files from the error tables")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else RunConfig.default()
        return dispatch(args.command, cfg, args.out, eps=getattr(args, "eps", None),
                        assert_monotone=getattr(args, "assert_monotone", False))
    except CrypthomError as exc:
        print(f"crypthom: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
