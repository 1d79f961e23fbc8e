"""Command-line front end: ``solitary solve|sweep|evolve|phase|fit``.

Settings come from an optional config file (``key = value`` lines, or a
``run.json`` written by a previous run) and are overridden by flags.  The
output directory defaults to ``$SOLITARY_OUTPUT`` when that is set.

Exit codes: 0 success, 1 error, 2 solver stopped at max_iter.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import SweepSpec, fit_power_law, phase_portrait, speed_amplitude_sweep
from .errors import ContractError, SolitaryError
from .evolution import EvolutionSpec, evolve, measure_speed
from .extrapolation import ExtrapolationConfig, accelerated_solve
from .petviashvili import ProblemSpec, solve
from .spectral import Field, Fractional, Grid, WhithamExtended

OUTPUT_ENV = "SOLITARY_OUTPUT"

log = logging.getLogger("solitary")


class UsageError(Exception):
    """Bad input to the command line (reported with exit code 1)."""


@dataclass
class RunConfig:
    # equation
    p: int = 1
    alpha: float = 2.0
    gamma: Optional[float] = None
    # domain
    l: float = 256.0
    N: int = 4096
    # solver
    c: float = 1.0
    eps: Optional[float] = None
    tol: float = 1e-10
    max_iter: int = 1000
    mw: int = 6
    safeguard: bool = True
    # evolution
    dt: float = 0.01
    tfinal: float = 10.0
    stride: int = 100
    inner_tol: float = 1e-12
    dealias: bool = False
    # output
    out: str = "."

    SECTIONS = {
        "equation": ("p", "alpha", "gamma"),
        "domain": ("l", "N"),
        "solver": ("c", "eps", "tol", "max_iter", "mw", "safeguard"),
        "evolution": ("dt", "tfinal", "stride", "inner_tol", "dealias"),
        "output": ("out",),
    }

    def validate(self) -> "RunConfig":
        if self.N <= 0 or self.N & (self.N - 1):
            raise ContractError(f"N must be a positive power of two, got {self.N}")
        if not self.l > 0:
            raise ContractError(f"l must be positive, got {self.l}")
        if not self.tol > 0:
            raise ContractError(f"tol must be positive, got {self.tol}")
        if self.mw < 0:
            raise ContractError("mw must be >= 0 (0 runs the plain iteration)")
        # constructing the specs re-runs every module-level check
        self.problem()
        self.evolution()
        return self

    @property
    def grid(self) -> Grid:
        return Grid(self.l, self.N)

    @property
    def symbol(self):
        if self.gamma is not None:
            return WhithamExtended(self.gamma)
        return Fractional(self.alpha)

    def problem(self, **overrides) -> ProblemSpec:
        kw = dict(
            grid=self.grid, p=self.p, c=self.c, symbol=self.symbol,
            eps=self.eps, tol=self.tol, max_iter=self.max_iter,
        )
        kw.update(overrides)
        return ProblemSpec(**kw)

    def extrapolation(self) -> Optional[ExtrapolationConfig]:
        return ExtrapolationConfig(self.mw, self.safeguard) if self.mw > 0 else None

    def evolution(self) -> EvolutionSpec:
        return EvolutionSpec(
            grid=self.grid, p=self.p, symbol=self.symbol, dt=self.dt,
            t_final=self.tfinal, inner_tol=self.inner_tol,
            snapshot_stride=self.stride, dealias=self.dealias,
        )

    def nested(self) -> dict:
        flat = asdict(self)
        return {sec: {k: flat[k] for k in keys} for sec, keys in self.SECTIONS.items()}

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f.type for f in fields(cls)}


def _coerce(name: str, raw, where: str = ""):
    types = RunConfig.field_types()
    if name not in types:
        raise UsageError(f"unknown config key {name!r}{where}")
    kind = types[name]
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("none", "null", "")):
        if "Optional" in str(kind):
            return None
        raise UsageError(f"config key {name!r} cannot be empty{where}")
    try:
        if "bool" in str(kind):
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in str(kind):
            v = float(raw)
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        if "float" in str(kind):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise UsageError(f"bad value {raw!r} for {name}{where}") from None


def load_config_file(path) -> dict:
    """Read ``key = value`` text or a (possibly sectioned) JSON object."""
    path = Path(path)
    text = path.read_text()
    values = {}
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        for key, val in data.items():
            if isinstance(val, dict):
                for k, v in val.items():
                    values[k] = _coerce(k, v, f" in {path}")
            else:
                values[key] = _coerce(key, val, f" in {path}")
        return values
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, val, f" at {path}:{lineno}")
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    env_out = os.environ.get(OUTPUT_ENV)
    if env_out:
        values["out"] = env_out
    for name in RunConfig.field_types():
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "no_safeguard", False):
        values["safeguard"] = False
    if getattr(args, "dealias_flag", False):
        values["dealias"] = True
    return RunConfig(**values).validate()


# ---------------------------------------------------------------- file helpers

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_csv(path: Path, header, rows, meta: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={v}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, allow_nan=True)
        fh.write("\n")


def read_csv(path, ncols: int):
    """Parse a numeric CSV; returns (array, meta) with ``# key=value`` metadata."""
    meta = {}
    rows = []
    header_seen = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                for item in s[1:].split():
                    if "=" in item:
                        k, v = item.split("=", 1)
                        meta[k.strip()] = v.strip()
                continue
            parts = [t.strip() for t in s.split(",")]
            try:
                vals = [float(t) for t in parts]
            except ValueError:
                if not header_seen and not rows:
                    header_seen = True
                    continue
                raise UsageError(f"{path}:{lineno}: malformed numeric row {s!r}") from None
            if len(vals) != ncols:
                raise UsageError(
                    f"{path}:{lineno}: expected {ncols} columns, found {len(vals)}"
                )
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, ncols), meta


def write_profile(path: Path, field: Field) -> None:
    grid = field.grid
    write_csv(
        path, ("x", "phi"), zip(grid.nodes, field.values),
        meta={"l": _fmt(grid.half_length), "N": grid.size},
    )


def read_profile(path, cfg: RunConfig, explicit_grid: bool) -> Field:
    data, meta = read_csv(path, 2)
    n = data.shape[0]
    if n == 0:
        raise UsageError(f"{path}: profile file has no rows")
    try:
        l = float(meta["l"]) if "l" in meta else -float(data[0, 0])
        size = int(meta["N"]) if "N" in meta else n
    except ValueError:
        raise UsageError(f"{path}: bad grid metadata {meta}") from None
    grid = Grid(l, size)
    if explicit_grid and grid != cfg.grid:
        raise ContractError(
            f"profile grid (l={grid.half_length:g}, N={grid.size}) does not match "
            f"config (l={cfg.l:g}, N={cfg.N})"
        )
    if n != grid.size:
        raise ContractError(f"{path}: header says N={grid.size} but file has {n} rows")
    if not np.allclose(data[:, 0], grid.nodes, rtol=0, atol=1e-9 * max(1.0, l)):
        raise ContractError(f"{path}: x column does not match the grid nodes")
    return Field(grid, data[:, 1])


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _floats(text: Optional[str]):
    if text is None:
        return None
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


# ------------------------------------------------------------------- commands

def cmd_solve(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    spec = cfg.problem()
    t0 = time.perf_counter()
    ext = cfg.extrapolation()
    sol = accelerated_solve(spec, ext) if ext else solve(spec)
    wall = time.perf_counter() - t0
    write_profile(out / "profile.csv", sol.profile)
    report = {
        "converged": sol.report.converged,
        "converged_by": sol.report.converged_by.value,
        "iterations": sol.report.iterations,
        "cycles": sol.report.cycles,
        "residual": sol.residual,
        "amplitude": sol.amplitude,
        "peak_position": sol.peak_position,
        "min_value": sol.min_value,
        "eps": spec.eps,
        "histories": {
            "m": sol.report.m_history,
            "error_c": sol.report.diff_history,
            "residual": sol.report.residual_history,
        },
        "rejected_extrapolations": sol.report.rejected_extrapolations,
        "degenerate_cycles": sol.report.degenerate_cycles,
        "metadata": {"wall_time_s": wall},
    }
    write_json(out / "report.json", report)
    write_json(out / "run.json", cfg.nested())
    print(
        f"{sol.report.converged_by.value}: amplitude={sol.amplitude:.12g} "
        f"iterations={sol.report.iterations} residual={sol.residual:.3e}"
    )
    return 0 if sol.report.converged else 2


def cmd_sweep(cfg: RunConfig, c_list, alpha_list, p_list, do_fit: bool, jobs: int) -> int:
    if cfg.gamma is not None:
        raise UsageError("sweep supports the fractional symbol only (omit --gamma)")
    out = _outdir(cfg)
    c_list = c_list or [cfg.c]
    alpha_list = alpha_list or [cfg.alpha]
    p_list = p_list or [cfg.p]
    rows = []
    for p in sorted(set(int(q) for q in p_list)):
        sweep = SweepSpec(
            p=p, alphas=alpha_list, speeds=c_list,
            template=cfg.problem(p=p), config=cfg.extrapolation(),
        )
        rows.extend(speed_amplitude_sweep(sweep, jobs=jobs))
    rows.sort(key=lambda r: (r.alpha, r.p, r.c))
    write_csv(
        out / "sweep.csv", ("alpha", "p", "c", "amplitude", "iterations", "converged"),
        [(r.alpha, r.p, r.c, r.amplitude, r.iterations, r.converged) for r in rows],
    )
    write_json(out / "run.json", cfg.nested())
    if do_fit:
        groups = []
        for key in sorted({(r.alpha, r.p) for r in rows}):
            pts = [(r.c, r.amplitude) for r in rows
                   if (r.alpha, r.p) == key and r.converged and math.isfinite(r.amplitude)]
            if len(pts) < 3:
                print(f"alpha={key[0]:g} p={key[1]}: {len(pts)} points, no fit", file=sys.stderr)
                continue
            fit = fit_power_law(pts)
            groups.append({"alpha": key[0], "p": key[1], **fit.as_dict()})
            print(f"alpha={key[0]:g} p={key[1]}: a={fit.a:.6g} b={fit.b:.6g} "
                  f"sse={fit.sse:.3e} r2={fit.r_squared:.12g} rmse={fit.rmse:.3e}")
        if groups:
            write_json(out / "fit.json", {"fits": groups})
    failed = sum(not r.converged for r in rows)
    print(f"{len(rows)} rows, {failed} not converged")
    return 1 if failed == len(rows) else 0


def cmd_evolve(cfg: RunConfig, profile: Field, order_check: bool = False) -> int:
    out = _outdir(cfg)
    spec = cfg.evolution()
    if profile.grid != spec.grid:
        spec = replace(spec, grid=profile.grid)
    traj = evolve(profile, spec)
    diag_rows = [
        (t, a, x, d.C, d.M, d.E)
        for t, a, x, d in zip(traj.times, traj.amplitude_series,
                              traj.peak_position_series, traj.diagnostics)
    ]
    write_csv(out / "trajectory.csv", ("t", "amplitude", "peak_position", "C", "M", "E"), diag_rows)
    snaps = np.column_stack([profile.grid.nodes] + [s.values for s in traj.snapshots])
    write_csv(out / "snapshots.csv", ["x"] + ["u_t=%.17g" % t for t in traj.times], snaps)
    amp0 = traj.amplitude_series[0]
    amps = np.asarray(traj.amplitude_series)
    m = np.array([d.M for d in traj.diagnostics])
    e = np.array([d.E for d in traj.diagnostics])
    summary = {
        "amplitude0": amp0,
        "amplitude_drift": float(np.max(np.abs(amps - amp0))),
        "relative_amplitude_drift": float(np.max(np.abs(amps - amp0)) / abs(amp0)) if amp0 else 0.0,
        "M_drift": float(np.max(np.abs(m - m[0]))),
        "E_drift": float(np.max(np.abs(e - e[0]))),
    }
    try:
        summary["speed"] = measure_speed(traj)
    except SolitaryError:
        summary["speed"] = None
    if order_check:
        half = replace(spec, dt=spec.dt / 2, snapshot_stride=2 * spec.snapshot_stride)
        traj2 = evolve(profile, half)
        e2 = np.array([d.E for d in traj2.diagnostics])
        d1 = abs(e[-1] - e[0])
        d2 = abs(e2[-1] - e2[0])
        summary["E_drift_half_dt"] = float(d2)
        summary["E_drift_ratio"] = float(d1 / d2) if d2 > 0 else None
    write_json(out / "evolve.json", summary)
    write_json(out / "run.json", cfg.nested())
    speed = summary["speed"]
    print(f"speed={'undefined' if speed is None else '%.10g' % speed} "
          f"amplitude_drift={summary['amplitude_drift']:.3e} "
          f"(relative {summary['relative_amplitude_drift']:.3e}) "
          f"M_drift={summary['M_drift']:.3e}")
    if order_check:
        ratio = summary["E_drift_ratio"]
        print(f"E_drift_ratio={'undefined' if ratio is None else '%.4g' % ratio}")
    return 0


def cmd_phase(cfg: RunConfig, profile: Field) -> int:
    out = _outdir(cfg)
    write_csv(out / "phase.csv", ("phi", "dphi"), phase_portrait(profile))
    return 0


def cmd_fit(cfg: RunConfig, points_file) -> int:
    out = _outdir(cfg)
    data, _ = read_csv(points_file, 2)
    fit = fit_power_law(data)
    write_json(out / "fit.json", fit.as_dict())
    print(f"a={fit.a:.10g} b={fit.b:.10g} sse={fit.sse:.3e} "
          f"r2={fit.r_squared:.12g} rmse={fit.rmse:.3e} n={fit.n_points}")
    return 0


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("equation and solver")
    g.add_argument("--config", metavar="FILE", help="key = value file or run.json")
    g.add_argument("--alpha", type=float, help="fractional exponent of |xi|^alpha")
    g.add_argument("--gamma", type=float, help="use the extended Whitham symbol with this surface tension")
    g.add_argument("--p", type=int, help="nonlinearity power")
    g.add_argument("--c", type=float, help="wave speed")
    g.add_argument("--l", type=float, help="half length of the periodic interval")
    g.add_argument("--N", type=int, help="number of nodes (power of two)")
    g.add_argument("--eps", type=float, help="stabilizing exponent (default (p+1)/p)")
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--mw", type=int, help="extrapolation width; 0 disables MPE")
    g.add_argument("--no-safeguard", action="store_true")
    g.add_argument("--dt", type=float)
    g.add_argument("--tfinal", type=float)
    g.add_argument("--stride", type=int, help="snapshot every STRIDE steps")
    g.add_argument("--inner-tol", dest="inner_tol", type=float)
    g.add_argument("--dealias", dest="dealias_flag", action="store_true")
    g.add_argument("--out", metavar="DIR", help=f"output directory (env {OUTPUT_ENV})")
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="solitary", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="compute one profile")
    sw = sub.add_parser("sweep", parents=[common], help="speed-amplitude sweep")
    sw.add_argument("--c-list", help="comma-separated speeds")
    sw.add_argument("--alpha-list", help="comma-separated alphas")
    sw.add_argument("--p-list", help="comma-separated nonlinearity powers")
    sw.add_argument("--fit", action="store_true", help="fit a*c^b per (alpha, p)")
    ev = sub.add_parser("evolve", parents=[common], help="time-evolve a profile")
    ev.add_argument("--profile", required=True)
    ev.add_argument("--order-check", action="store_true",
                    help="rerun with dt/2 and report the energy-drift ratio")
    ph = sub.add_parser("phase", parents=[common], help="phase portrait of a profile")
    ph.add_argument("--profile", required=True)
    ft = sub.add_parser("fit", parents=[common], help="power-law fit of x,y points")
    ft.add_argument("--points", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="[%(levelname)s] %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            p_list = _floats(args.p_list)
            return cmd_sweep(cfg, _floats(args.c_list), _floats(args.alpha_list),
                             p_list, args.fit, args.jobs)
        if args.command == "fit":
            return cmd_fit(cfg, args.points)
        explicit = args.l is not None or args.N is not None
        profile = read_profile(args.profile, cfg, explicit)
        if args.command == "evolve":
            return cmd_evolve(cfg, profile, args.order_check)
        return cmd_phase(cfg, profile)
    except (SolitaryError, UsageError, OSError, json.JSONDecodeError) as exc:
        print(f"solitary {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
