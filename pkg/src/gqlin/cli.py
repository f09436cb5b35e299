"""Experiment drivers and output serialization.

Subcommands:

    gqlin verify  [--config PATH] [--out DIR]
    gqlin run1d   [--config PATH] [--out DIR]
    gqlin run2d   [--config PATH] [--out DIR]
    gqlin blast   [--config PATH] [--out DIR] [--ablate k=off ...]
    gqlin jet     [--config PATH] [--out DIR] [--ablate k=off ...]

Configuration files are plain text ``key = value`` lines with ``#`` comments
and flat dotted keys (``grid.nx``, ``time.cfl``); consult the built-in
defaults printed by each driver for the recognized keys.  Artifacts are CSV
snapshots (primitive per-cell dumps), a per-step bounds log, a final report,
and optional grayscale PGM renderings of a snapshot column.  Exit codes:
0 success, 2 usage error, 3 bound violation or numeric failure.

Reruns with an identical configuration are bit-identical: evaluation order is
fixed and all sampling is seeded.  BLAS threading is pinned to one thread
(faster at these sizes and immune to thread-count dependent reductions).
"""

from __future__ import annotations

import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import argparse
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import NumericError
from .dg2d import MmhdDg2d
from .fv import (Grid1d, Grid2d, step_euler_1d, step_mmhd_first_order,
                 step_ns_1d, step_tenmoment_2d)
from .limiters import LimiterError
from .oracles import (AUDIT_NAMES, EQUIVALENCE_SYSTEMS,
                      audit_theorem_inequalities, check_equivalence,
                      check_gradient_normals, write_reports_csv)
from .systems import gasdyn, mhd, moment

__all__ = ["main", "RunConfig", "load_config", "emit_snapshot",
           "emit_bounds_log", "emit_pgm", "blast_config", "jet_config"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VIOLATION = 3


@dataclass
class RunConfig:
    """Flattened experiment configuration (see module docstring)."""

    experiment: str = "blast"
    system: str = "mmhd"
    nx: int = 100
    ny: int = 100
    x0: float = -0.5
    x1: float = 0.5
    y0: float = -0.5
    y1: float = 0.5
    t_end: float = 0.01
    target_cfl: float = 0.15
    limiter: bool = True
    source_term: bool = True
    tvb: float = 50.0          # < 0 disables the TVB limiter
    output_cadence: int = 0    # snapshot every N steps; 0 = first/last only
    outdir: str = "out"
    seed: int = 0
    pgm_column: str = ""
    flux: str = "lf"
    n_cells: int = 200

    def __post_init__(self):
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if min(self.nx, self.ny, self.n_cells) < 1:
            raise ValueError("grid sizes must be positive")


_KEYMAP = {
    "experiment": ("experiment", str),
    "system": ("system", str),
    "grid.nx": ("nx", int),
    "grid.ny": ("ny", int),
    "grid.n_cells": ("n_cells", int),
    "domain.x0": ("x0", float),
    "domain.x1": ("x1", float),
    "domain.y0": ("y0", float),
    "domain.y1": ("y1", float),
    "time.t_end": ("t_end", float),
    "time.cfl": ("target_cfl", float),
    "limiter.enabled": ("limiter", lambda s: s.lower() in ("1", "true", "on")),
    "source_term.enabled": ("source_term",
                            lambda s: s.lower() in ("1", "true", "on")),
    "limiter.tvb": ("tvb", float),
    "output.cadence": ("output_cadence", int),
    "output.dir": ("outdir", str),
    "output.pgm_column": ("pgm_column", str),
    "flux": ("flux", str),
    "seed": ("seed", int),
}


def load_config(path: str, base: RunConfig) -> RunConfig:
    """Apply ``key = value`` overrides from a config file to ``base``."""
    updates = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _KEYMAP:
                raise ValueError(f"{path}:{ln}: unknown key {key!r}")
            attr, conv = _KEYMAP[key]
            updates[attr] = conv(value)
    return replace(base, **updates)


# ---------------------------------------------------------------------------
# Built-in experiment setups
# ---------------------------------------------------------------------------

BLAST_SPEC = mhd.MixtureSpec((2.42, 0.72), (5.0 / 3.0, 1.4))
JET_SPEC = mhd.MixtureSpec((0.72, 2.42), (1.4, 5.0 / 3.0))
_B_BLAST = 100.0 / np.sqrt(4.0 * np.pi)
_B_JET = np.sqrt(4000.0)


def blast_config() -> RunConfig:
    return RunConfig(experiment="blast", nx=100, ny=100,
                     x0=-0.5, x1=0.5, y0=-0.5, y1=0.5, t_end=0.01)


def jet_config() -> RunConfig:
    return RunConfig(experiment="jet", nx=50, ny=150,
                     x0=0.0, x1=0.5, y0=0.0, y1=1.5, t_end=0.002)


def blast_data(x, y):
    """Magnetized two-species explosion: (rho, p, Y1, Y2) = (1, 1000, 1, 0)
    inside x^2 + y^2 <= 0.01, ambient (1, 0.1, 0, 1), B = (100/sqrt(4 pi), 0, 0)."""
    inner = x * x + y * y <= 0.01
    rho = np.ones_like(x)
    p = np.where(inner, 1000.0, 0.1)
    Y1 = np.where(inner, 1.0, 0.0)
    v = np.zeros(x.shape + (3,))
    B = np.zeros(x.shape + (3,))
    B[..., 0] = _B_BLAST
    return mhd.mmhd_prim_to_cons(rho, v, B, p, Y1[..., None], BLAST_SPEC)


def jet_ambient(x, y):
    """Static ambient fluid (0.14, 1, 0, 1) with B = (0, sqrt(4000), 0)."""
    rho = 0.14 * np.ones_like(x)
    p = np.ones_like(x)
    v = np.zeros(x.shape + (3,))
    B = np.zeros(x.shape + (3,))
    B[..., 1] = _B_JET
    return mhd.mmhd_prim_to_cons(rho, v, B, p, np.zeros(x.shape + (1,)),
                                 JET_SPEC)


_JET_INLET = None


def jet_inlet_state() -> np.ndarray:
    """Inflow state (1.4, 1, 1, 0) with v = (0, 800, 0)."""
    global _JET_INLET
    if _JET_INLET is None:
        v = np.zeros(3)
        v[1] = 800.0
        B = np.zeros(3)
        B[1] = _B_JET
        _JET_INLET = mhd.mmhd_prim_to_cons(
            np.array(1.4), v, B, np.array(1.0), np.array([1.0]), JET_SPEC)
    return _JET_INLET


def jet_bottom_bc(interior: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Inflow on |x| < 0.05 of the bottom edge, outflow elsewhere."""
    ghost = interior.copy()
    inlet = np.abs(coords) < 0.05
    ghost[inlet] = jet_inlet_state()
    return ghost


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_snapshot(means: np.ndarray, spec: mhd.MixtureSpec, path: str,
                  xc: np.ndarray, yc: np.ndarray) -> None:
    """Primitive per-cell CSV dump of a 2D multicomponent MHD field.

    Header ``x,y,rho,vx,vy,vz,Bx,By,Bz,p,Y1,...,Y{n_c-1}``; one row per cell
    center, 17 significant digits, rows ordered j-major then i.
    """
    nx, ny = means.shape[:2]
    rho = means[..., spec.i_rho]
    v = means[..., spec.sl_m] / rho[..., None]
    B = means[..., spec.sl_b]
    p = mhd.mmhd_pressure(means, spec)
    Y = means[..., spec.sl_ry] / rho[..., None]
    cols = ["x", "y", "rho", "vx", "vy", "vz", "Bx", "By", "Bz", "p"]
    cols += [f"Y{k + 1}" for k in range(spec.n_c - 1)]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for j in range(ny):
            for i in range(nx):
                row = [xc[i], yc[j], rho[i, j], v[i, j, 0], v[i, j, 1],
                       v[i, j, 2], B[i, j, 0], B[i, j, 1], B[i, j, 2],
                       p[i, j]] + [Y[i, j, k] for k in range(spec.n_c - 1)]
                fh.write(",".join(_fmt(val) for val in row) + "\n")


def read_snapshot(path: str):
    """Parse a snapshot CSV back into (header, array)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(tok) for tok in line.strip().split(",")]
                         for line in fh if line.strip()])
    return header, data


def emit_bounds_log(records: list, path: str) -> None:
    """Per-step CSV log: step,t,dt,min_rho,min_p,min_Y,max_Y,max_absdiv,eps."""
    with open(path, "w") as fh:
        fh.write("step,t,dt,min_rho,min_p,min_Y,max_Y,max_absdiv,eps\n")
        for r in records:
            fh.write(",".join([str(r["step"])] + [
                _fmt(r[k]) for k in ("t", "dt", "min_rho", "min_p", "min_Y",
                                     "max_Y", "max_absdiv", "eps")]) + "\n")


def emit_pgm(path: str, snapshot_path: str, column: str,
             nx: int, ny: int) -> None:
    """Grayscale PGM of one snapshot column with linear min/max scaling
    recorded in a sidecar text file."""
    header, data = read_snapshot(snapshot_path)
    if column not in header:
        raise ValueError(f"column {column!r} not in snapshot")
    vals = data[:, header.index(column)].reshape(ny, nx)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    span = hi - lo if hi > lo else 1.0
    pix = np.rint((vals - lo) / span * 255.0).astype(int)
    with open(path, "w") as fh:
        fh.write(f"P2\n{nx} {ny}\n255\n")
        for j in range(ny - 1, -1, -1):
            fh.write(" ".join(str(int(p)) for p in pix[j]) + "\n")
    with open(path + ".txt", "w") as fh:
        fh.write(f"column={column}\nmin={_fmt(lo)}\nmax={_fmt(hi)}\n")


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


def _dg_driver(cfg: RunConfig, spec: mhd.MixtureSpec, data_fn, bc: dict,
               label: str) -> int:
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    nx, ny = cfg.nx, cfg.ny
    dx = (cfg.x1 - cfg.x0) / nx
    dy = (cfg.y1 - cfg.y0) / ny
    grid = Grid2d(nx, ny, dx, dy, bc)
    solver = MmhdDg2d(grid, spec, target_cfl=cfg.target_cfl,
                      use_limiter=cfg.limiter, use_source=cfg.source_term,
                      tvb_m=cfg.tvb if cfg.tvb >= 0 else None,
                      x0=cfg.x0, y0=cfg.y0)
    xc, yc = solver.cell_centers()
    C = solver.project_initial(data_fn)
    emit_snapshot(C[..., 0], spec, str(outdir / f"{label}_t0.csv"), xc, yc)

    records = []
    t = 0.0
    step = 0
    status = EXIT_OK
    t_wall = time.time()
    while t < cfg.t_end:
        try:
            C, rep = solver.step(C, dt=cfg.t_end - t)
        except (LimiterError, NumericError) as exc:
            print(f"{label}: bound violation or numeric failure at "
                  f"t={t:.6g} step {step}: {exc}", file=sys.stderr)
            status = EXIT_VIOLATION
            break
        t += rep.dt
        step += 1
        records.append({
            "step": step, "t": t, "dt": rep.dt,
            "min_rho": rep.bounds["min_rho"], "min_p": rep.bounds["min_p"],
            "min_Y": rep.bounds["min_y"], "max_Y": rep.bounds["max_y"],
            "max_absdiv": rep.bounds["max_absdiv"],
            "eps": rep.bounds["eps"],
        })
        if rep.violation:
            status = EXIT_VIOLATION
            break
        if cfg.output_cadence and step % cfg.output_cadence == 0:
            emit_snapshot(C[..., 0], spec,
                          str(outdir / f"{label}_step{step:06d}.csv"), xc, yc)
    emit_bounds_log(records, str(outdir / f"{label}_bounds.csv"))
    final = str(outdir / f"{label}_final.csv")
    emit_snapshot(C[..., 0], spec, final, xc, yc)
    if cfg.pgm_column:
        emit_pgm(str(outdir / f"{label}_final.pgm"), final, cfg.pgm_column,
                 nx, ny)
    dm, _, _ = solver.discrete_divergence(C)
    with open(outdir / f"{label}_report.txt", "w") as fh:
        fh.write(f"experiment = {label}\n"
                 f"steps = {step}\n"
                 f"t_final = {_fmt(t)}\n"
                 f"status = {status}\n"
                 f"wall_seconds = {time.time() - t_wall:.1f}\n"
                 f"max_absdiv_minus_final = {_fmt(np.abs(dm).max())}\n")
    print(f"{label}: {step} steps to t={t:.6g}, "
          f"status={'ok' if status == EXIT_OK else 'violation'}")
    return status


def run_blast(cfg: RunConfig) -> int:
    bc = {k: "outflow" for k in ("left", "right", "bottom", "top")}
    return _dg_driver(cfg, BLAST_SPEC, blast_data, bc, "blast")


def run_jet(cfg: RunConfig) -> int:
    bc = {"left": "reflect", "right": "outflow", "top": "outflow",
          "bottom": jet_bottom_bc}
    return _dg_driver(cfg, JET_SPEC, jet_ambient, bc, "jet")


def run_verify(cfg: RunConfig) -> int:
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ok = True
    for system in EQUIVALENCE_SYSTEMS:
        rep = check_equivalence(system, 10_000, seed=cfg.seed,
                                n_violators=1000)
        frac_excluded = rep.excluded_degenerate / rep.samples
        line = (f"equivalence {system}: {rep.agreements}/{rep.samples} agree, "
                f"{len(rep.disagreements)} disagree, "
                f"{rep.excluded_degenerate} degenerate")
        print(line)
        ok &= rep.ok and frac_excluded <= 1e-3
    for system in ("euler", "ideal-mhd", "entropy-rhd"):
        dev = check_gradient_normals(system, 200, seed=cfg.seed)
        print(f"gradient normals {system}: max deviation {dev:.3e} rad")
        ok &= dev <= 1e-5
    reports = []
    for which in AUDIT_NAMES:
        trials = 100 if which.startswith("MMHD") else 100_000
        if which == "MMHD-6.2":
            trials = 20
        rep = audit_theorem_inequalities(which, trials, seed=cfg.seed)
        reports.append(rep)
        print(f"audit {which}: trials={rep.trials} failures={rep.failures} "
              f"min_margin={rep.min_margin:.3e}")
        ok &= rep.ok
    write_reports_csv(reports, str(outdir / "audits.csv"))
    return EXIT_OK if ok else EXIT_VIOLATION


def _emit_1d_snapshot(U: np.ndarray, path: str, dx: float, x0: float,
                      gamma: float) -> None:
    with open(path, "w") as fh:
        fh.write("x,rho,v,p\n")
        for j in range(U.shape[0]):
            x = x0 + (j + 0.5) * dx
            rho, m, E = U[j]
            v = m / rho
            p = (gamma - 1.0) * (E - 0.5 * m * v)
            fh.write(",".join(_fmt(val) for val in (x, rho, v, p)) + "\n")


def run_1d(cfg: RunConfig) -> int:
    """Double-rarefaction regressions: Euler (LF or gas-kinetic) or NS."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    gamma = 1.4
    n = cfg.n_cells
    dx = 1.0 / n
    x = -0.5 + (np.arange(n) + 0.5) * dx
    v = np.where(x < 0.0, -2.0, 2.0)
    U = gasdyn.euler_prim_to_cons(np.ones(n), v, 0.1 * np.ones(n), gamma)
    grid = Grid1d(n, dx, "outflow")
    params = gasdyn.NsParams(1.0, 100.0, 0.72)
    t = 0.0
    step = 0
    records = []
    status = EXIT_OK
    while t < cfg.t_end:
        if cfg.system == "ns":
            U, rep = step_ns_1d(U, grid, params, gamma, cfl=1.0)
        else:
            U, rep = step_euler_1d(U, grid, gamma, flux_kind=cfg.flux,
                                   cfl=1.0)
        if t + rep.dt > cfg.t_end:
            pass  # final partial step already limited by CFL; accept overrun
        t += rep.dt
        step += 1
        records.append({"step": step, "t": t, "dt": rep.dt,
                        "min_rho": rep.bounds["min_rho"],
                        "min_p": rep.bounds["min_g"] * (gamma - 1.0),
                        "min_Y": float("nan"), "max_Y": float("nan"),
                        "max_absdiv": float("nan"), "eps": float("nan")})
        if rep.violation:
            status = EXIT_VIOLATION
            break
    emit_bounds_log(records, str(outdir / "run1d_bounds.csv"))
    _emit_1d_snapshot(U, str(outdir / "run1d_final.csv"), dx, -0.5, gamma)
    print(f"run1d[{cfg.system}/{cfg.flux}]: {step} steps to t={t:.6g}, "
          f"status={'ok' if status == EXIT_OK else 'violation'}")
    return status


def run_2d(cfg: RunConfig) -> int:
    """First-order 2D regressions: ten-moment quadrants or random-field
    multicomponent MHD."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    nx, ny = cfg.nx, cfg.ny
    records = []
    status = EXIT_OK
    if cfg.system == "tenmoment":
        grid = Grid2d(nx, ny, 1.0 / nx, 1.0 / ny)
        quads = []
        for _ in range(4):
            rho = rng.uniform(0.1, 2.0)
            v1, v2 = rng.uniform(-1, 1, 2)
            p11, p22 = rng.uniform(0.1, 2.0, 2)
            p12 = rng.uniform(-0.9, 0.9) * np.sqrt(p11 * p22)
            quads.append(moment.tm_prim_to_cons(rho, v1, v2, p11, p12, p22))
        U = np.empty((nx, ny, 6))
        U[:nx // 2, :ny // 2] = quads[0]
        U[nx // 2:, :ny // 2] = quads[1]
        U[:nx // 2, ny // 2:] = quads[2]
        U[nx // 2:, ny // 2:] = quads[3]
        t = 0.0
        for step in range(1, 21):
            U, rep = step_tenmoment_2d(U, grid)
            t += rep.dt
            records.append({"step": step, "t": t, "dt": rep.dt,
                            "min_rho": rep.bounds["min_rho"],
                            "min_p": rep.bounds["min_eig"],
                            "min_Y": float("nan"), "max_Y": float("nan"),
                            "max_absdiv": float("nan"), "eps": float("nan")})
            if rep.violation:
                status = EXIT_VIOLATION
                break
    elif cfg.system == "mmhd1":
        spec = BLAST_SPEC
        grid = Grid2d(nx, ny, 1.0 / nx, 1.0 / ny,
                      {k: "periodic" for k in
                       ("left", "right", "bottom", "top")})
        rho = rng.uniform(0.2, 2.0, (nx, ny))
        v = rng.uniform(-1, 1, (nx, ny, 3))
        B = rng.uniform(-1, 1, (nx, ny, 3))
        p = rng.uniform(0.1, 2.0, (nx, ny))
        Y = rng.uniform(0, 1, (nx, ny, 1))
        U = mhd.mmhd_prim_to_cons(rho, v, B, p, Y, spec)
        t = 0.0
        for step in range(1, 21):
            U, rep = step_mmhd_first_order(U, grid, spec, cfl=1.0,
                                           probe_tuples=100, seed=cfg.seed)
            t += rep.dt
            records.append({"step": step, "t": t, "dt": rep.dt,
                            "min_rho": rep.bounds["min_rho"],
                            "min_p": rep.bounds["min_p"],
                            "min_Y": rep.bounds["min_ry"],
                            "max_Y": float("nan"),
                            "max_absdiv": rep.bounds["max_absdiv"],
                            "eps": float("nan")})
            if rep.violation:
                status = EXIT_VIOLATION
                break
    else:
        print(f"run2d: unknown system {cfg.system!r}", file=sys.stderr)
        return EXIT_USAGE
    emit_bounds_log(records, str(outdir / "run2d_bounds.csv"))
    print(f"run2d[{cfg.system}]: {len(records)} steps, "
          f"status={'ok' if status == EXIT_OK else 'violation'}")
    return status


def _apply_ablations(cfg: RunConfig, ablations: list) -> RunConfig:
    for item in ablations:
        if "=" not in item:
            raise ValueError(f"bad --ablate value {item!r}")
        key, val = item.split("=", 1)
        on = val.strip().lower() not in ("off", "0", "false")
        if key.strip() == "source_term":
            cfg = replace(cfg, source_term=on)
        elif key.strip() == "limiter":
            cfg = replace(cfg, limiter=on)
        else:
            raise ValueError(f"unknown ablation target {key!r}")
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gqlin",
        description="Bound-preserving solvers built on equivalent linear "
                    "representations of invariant regions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify", "run1d", "run2d", "blast", "jet"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        if name in ("blast", "jet"):
            p.add_argument("--ablate", action="append", default=[],
                           help="source_term=off or limiter=off; outcomes "
                                "are recorded, never asserted")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    defaults = {
        "verify": RunConfig(experiment="verify", outdir="out"),
        "run1d": RunConfig(experiment="run1d", system="euler", t_end=0.1,
                           outdir="out"),
        "run2d": RunConfig(experiment="run2d", system="tenmoment", nx=50,
                           ny=50, t_end=1.0, outdir="out"),
        "blast": blast_config(),
        "jet": jet_config(),
    }
    cfg = defaults[args.command]
    try:
        if args.config:
            cfg = load_config(args.config, cfg)
        if args.out:
            cfg = replace(cfg, outdir=args.out)
        if getattr(args, "ablate", None):
            cfg = _apply_ablations(cfg, args.ablate)
    except (ValueError, OSError) as exc:
        print(f"gqlin: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "verify":
            return run_verify(cfg)
        if args.command == "run1d":
            return run_1d(cfg)
        if args.command == "run2d":
            return run_2d(cfg)
        if args.command == "blast":
            return run_blast(cfg)
        if args.command == "jet":
            return run_jet(cfg)
    except NumericError as exc:
        print(f"gqlin: numeric failure: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
