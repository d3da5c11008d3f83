"""Command-line interface: ``driftlab <command> [options]``.

Commands read an optional INI configuration (``--config``), write their
tables into ``--out-dir`` and finish with a ``manifest.json`` that lists
every resolved input and the SHA-256 digest of every output.  Exit codes:
0 success, 1 failed verification, 2 configuration or usage error,
3 convergence failure, 4 domain error.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .asym import small_beta_speed, theorem1_profile
from .csvio import write_csv
from .dynamics import Frame, IntegratorConfig, Method, integrate
from .errors import BranchEndError, ConfigError, DomainError, DriftlabError
from .model import BiasKind, BiasModel, LatticeState, TwoSiteParty, one_site_party, uniform_state
from .spectral import spreading_speed

# ---------------------------------------------------------------------------
# configuration

SCHEMA = {
    "simulate": {
        "model": {"bias": ("str", "self_incitement"), "beta": ("float", 0.0), "range": ("int", 1)},
        "initial": {
            "kind": ("str", "one_site"), "mass": ("float", 1.0), "site": ("int", 0),
            "alpha": ("float", 0.5), "size": ("int", 64), "periodic": ("bool", True),
            "perturbation": ("float", 1e-3), "perturb_site": ("int", 0),
        },
        "integrator": {
            "t_end": ("float", 100.0), "dt": ("float?", None), "method": ("str", "rk4"),
            "rtol": ("float", 1e-9), "atol": ("float", 1e-13), "frame": ("str", "fixed"),
            "output_dt": ("float", 1.0),
        },
    },
    "continue": {
        "continuation": {
            "start_beta": ("float", 0.3), "targets": ("floats", [0.05, 1.95]),
            "seed": ("str", "simulation"), "L": ("int", 10), "ell_g": ("int", 103),
            "party_mass": ("float", 1.0), "background": ("float", 1.0),
            "dbeta0": ("float", 0.01), "max_dbeta": ("float", 0.05), "tol": ("float", 1e-11),
            "background_from": ("float?", 1.5), "refine": ("bool", True),
            "audit": ("bool", False), "normalizations": ("strs", []),
            "format": ("str", "binary"),
        },
    },
}


def _convert(kind, raw, where):
    try:
        if kind == "str":
            return raw.strip()
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float?":
            return None if raw.strip().lower() in ("", "none") else float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return [float(x) for x in raw.split(",") if x.strip()]
        if kind == "strs":
            return [x.strip() for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind.rstrip('?')}") from None
    raise AssertionError(kind)


def load_config(path, command: str) -> dict:
    """Resolved settings for ``command``: defaults overlaid with the file, if any."""
    schema = SCHEMA.get(command, {})
    cfg = {sec: {k: v[1] for k, v in keys.items()} for sec, keys in schema.items()}
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for sec in parser.sections():
        if sec not in schema:
            raise ConfigError(f"{path}: unknown section [{sec}] for '{command}'")
        for key, raw in parser.items(sec):
            if key not in schema[sec]:
                raise ConfigError(f"{path}: unknown key '{key}' in section [{sec}]")
            cfg[sec][key] = _convert(schema[sec][key][0], raw, f"{path} [{sec}] {key}")
    return cfg


def thread_count(flag) -> int:
    raw = flag if flag is not None else os.environ.get("DRIFTLAB_THREADS", "1")
    try:
        n = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"thread count must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


def parse_beta_grid(text: str) -> list:
    """``"0,0.5,1"`` or an inclusive range ``"start:stop:step"``."""
    text = (text or "").strip()
    if not text:
        raise ConfigError("empty beta grid")
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            start, stop, step = parts
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            vals = [start + i * step for i in range(max(count, 0))]
        else:
            vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse beta grid {text!r}") from None
    if not vals:
        raise ConfigError("empty beta grid")
    return vals


# ---------------------------------------------------------------------------
# manifest


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, inputs: dict, outputs: list) -> Path:
    canonical = json.dumps(inputs, sort_keys=True, default=str).encode("utf-8")
    manifest = {
        "command": command,
        "config_hash": hashlib.sha256(canonical).hexdigest(),
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "inputs": inputs,
        "outputs": [{"path": Path(p).name, "sha256": sha256_file(p)} for p in outputs],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    return path


def _common_inputs(args, threads):
    return {"config": str(args.config) if args.config else None, "threads": threads,
            "seed": args.seed}


# ---------------------------------------------------------------------------
# simulate


def initial_state(section: dict, seed: int) -> LatticeState:
    kind = section["kind"]
    m = section["mass"]
    if kind == "one_site":
        return one_site_party(site=section["site"], mass=m)
    if kind == "two_site":
        return TwoSiteParty(section["site"], section["alpha"], m).to_state()
    if kind in ("uniform", "uniform_perturbed", "uniform_random"):
        state = uniform_state(m, section["size"], periodic=section["periodic"])
        values = state.values.copy()
        eps = section["perturbation"]
        if kind == "uniform_perturbed":
            i = section["perturb_site"] - state.origin_index
            if not 0 <= i < values.size:
                raise ConfigError("[initial] perturb_site lies outside the window")
            values[i] += eps
        elif kind == "uniform_random":
            rng = np.random.default_rng(seed)
            values += eps * rng.uniform(-1.0, 1.0, values.size)
        return state.replace(values=values)
    raise ConfigError(f"[initial] kind: unknown initial state {kind!r}")


def _bias(section) -> BiasModel:
    try:
        kind = BiasKind(section["bias"])
    except ValueError:
        raise ConfigError(f"[model] bias: unknown bias {section['bias']!r}; choose from "
                          f"{[k.value for k in BiasKind]}") from None
    return BiasModel(kind, section["beta"], section["range"])


def _integrator(section) -> IntegratorConfig:
    try:
        method, frame = Method(section["method"]), Frame(section["frame"])
    except ValueError as exc:
        raise ConfigError(f"[integrator] {exc}") from None
    return IntegratorConfig(t_end=section["t_end"], dt=section["dt"], method=method,
                            rtol=section["rtol"], atol=section["atol"], frame=frame,
                            output_dt=section["output_dt"])


def cmd_simulate(args, out_dir: Path, threads: int) -> int:
    cfg = load_config(args.config, "simulate")
    bias = _bias(cfg["model"])
    icfg = _integrator(cfg["integrator"])
    state = initial_state(cfg["initial"], args.seed)
    rec = integrate(state, bias, icfg)

    def site_index(s):
        idx = np.rint(s.indices).astype(int)
        return idx

    lo = min(int(site_index(s).min()) for s in rec.snapshots)
    hi = max(int(site_index(s).max()) for s in rec.snapshots)
    fill = np.nan if state.periodic else 0.0
    snap_rows, grid_rows = [], []
    for t, s in zip(rec.times, rec.snapshots):
        idx = site_index(s)
        row = np.full(hi - lo + 1, fill)
        row[idx - lo] = s.values
        grid_rows.append([t, *row])
        snap_rows.extend([t, n, v] for n, v in zip(idx, s.values))
    diag_rows = [[t, s.mean_opinion(), pk, *part]
                 for t, s, pk, part in zip(rec.times, rec.snapshots, rec.peak_positions,
                                            rec.mass_partition)]
    outputs = [
        write_csv(out_dir / "snapshots.csv", ["t", "n", "P"], snap_rows),
        write_csv(out_dir / "spacetime.csv", ["t", *(str(n) for n in range(lo, hi + 1))],
                  grid_rows),
        write_csv(out_dir / "diagnostics.csv",
                  ["t", "mean_opinion", "peak_pos", "mass_party", "mass_trailing", "mass_leading"],
                  diag_rows),
    ]
    inputs = {**_common_inputs(args, threads), **cfg}
    write_manifest(out_dir, "simulate", inputs, outputs)
    return 0


# ---------------------------------------------------------------------------
# continue

SPEED_COLUMNS = ["beta", "c", "m_infinity", "peak", "N", "L", "h_error", "L_error"]
SCALINGS = ("party_mass", "background_mass", "total_mass")


def _scale_for(p, kind: str) -> float:
    if kind == "party_mass":
        return 1.0 / p.party_mass
    if kind == "background_mass":
        return 1.0 / p.background
    return 1.0 / float(np.sum(p.Q) * p.grid.h)


def _speed_rows(points, audits, scale_kind=None):
    rows = []
    for pt, (he, le) in zip(points, audits):
        p = pt.profile
        k = 1.0 if scale_kind is None else _scale_for(p, scale_kind)
        rows.append([p.beta, k * p.c, k * p.background, k * p.peak, p.grid.N, p.grid.L, he, le])
    return rows


def cmd_continue(args, out_dir: Path, threads: int) -> int:
    from .tw import (Grid, Normalization, continue_branch, error_audit, newton_solve,
                     save_branch, simulation_seed, soliton_seed)

    cfg = load_config(args.config, "continue")
    c = cfg["continuation"]
    start = c["start_beta"]
    if not 0 < start < 2:
        raise DomainError(f"start_beta must lie in (0, 2), got {start}")
    if not c["targets"]:
        raise ConfigError("[continuation] targets: at least one target is required")
    for t in c["targets"]:
        if not 0 < t < 2:
            raise DomainError(f"continuation target {t} outside (0, 2)")
    for kind in c["normalizations"]:
        if kind not in SCALINGS:
            raise ConfigError(f"[continuation] normalizations: unknown {kind!r}; "
                              f"choose from {list(SCALINGS)}")
    if c["format"] not in ("binary", "csv"):
        raise ConfigError("[continuation] format must be 'binary' or 'csv'")

    grid = Grid(c["L"], c["ell_g"])
    if c["seed"] == "simulation":
        p0 = newton_solve(simulation_seed(start, grid, c["party_mass"]), tol=c["tol"])
    elif c["seed"] == "soliton":
        p0 = soliton_seed(start, c["background"])
        p0 = newton_solve(p0.with_(normalization=Normalization.background(c["background"])),
                          tol=c["tol"])
    else:
        raise ConfigError(f"[continuation] seed must be 'simulation' or 'soliton', got {c['seed']!r}")

    branch, failure = None, None
    for target in c["targets"]:
        bg_from = c["background_from"] if target > start else None
        try:
            piece = continue_branch(p0, target, c["dbeta0"], c["max_dbeta"], c["tol"],
                                    background_from=bg_from, refine_grid=c["refine"])
        except BranchEndError as exc:
            piece, failure = exc.branch, exc
        if piece is not None and piece.points:
            branch = piece if branch is None else branch.merged(piece)
        if failure is not None:
            break

    if branch is None:
        raise failure
    points = sorted(branch.points, key=lambda pt: pt.beta)
    branch.points = points
    if c["audit"]:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            audits = list(pool.map(lambda pt: error_audit(pt.profile, c["tol"]), points))
    else:
        audits = [(float("nan"), float("nan"))] * len(points)

    suffix = ".csv" if c["format"] == "csv" else ".dlb"
    outputs = [save_branch(branch, out_dir / f"branch{suffix}", c["tol"]),
               write_csv(out_dir / "speeds.csv", SPEED_COLUMNS, _speed_rows(points, audits))]
    for kind in c["normalizations"]:
        outputs.append(write_csv(out_dir / f"speeds_{kind}.csv", SPEED_COLUMNS,
                                 _speed_rows(points, audits, kind)))
    inputs = {**_common_inputs(args, threads), **cfg}
    write_manifest(out_dir, "continue", inputs, outputs)
    if failure is not None:
        print(f"driftlab: {failure}; last converged beta = {points[-1].beta:.10g}",
              file=sys.stderr)
        return failure.exit_code
    return 0


# ---------------------------------------------------------------------------
# spectral

SPECTRAL_COLUMNS = ["beta", "m", "re_sigma", "im_sigma", "v", "residual", "v_left", "stable_background"]


def _branch_table(path):
    """``(beta, c, m_inf)`` of a stored branch, scaled to unit party mass and sorted."""
    from .tw import load_branch

    rows = sorted(load_branch(path).unit_party_mass())
    return np.array(rows)


def _interp_branch(table, beta):
    b, c, m = table.T
    if not b[0] - 1e-12 <= beta <= b[-1] + 1e-12:
        raise DomainError(f"beta={beta} outside the stored branch [{b[0]:g}, {b[-1]:g}]")
    # the background varies exponentially along the branch
    return float(np.interp(beta, b, c)), float(np.exp(np.interp(beta, b, np.log(m))))


def _spectral_row(beta, m):
    right = spreading_speed(beta, m, direction="right")
    left = spreading_speed(beta, m, direction="left")
    return [beta, m, right.sigma.real, right.sigma.imag, right.v, right.residual, left.v,
            int(right.stable_background)]


def cmd_spectral(args, out_dir: Path, threads: int) -> int:
    if args.m_mode == "from-branch":
        if not args.branch:
            raise ConfigError("--m-mode from-branch needs --branch")
        table = _branch_table(args.branch)
        betas = list(table[:, 0]) if args.beta_grid == "branch" else parse_beta_grid(args.beta_grid)
        joined = [(b, *_interp_branch(table, b)) for b in betas]
        cases = [(b, m) for b, _, m in joined]
    else:
        betas = parse_beta_grid(args.beta_grid)
        if args.m <= 0:
            raise DomainError("--m must be positive")
        cases = [(b, args.m) for b in betas]
    for b, _ in cases:
        if b < 0:
            raise DomainError(f"beta must be >= 0, got {b}")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(lambda bm: _spectral_row(*bm), cases))
    header = list(SPECTRAL_COLUMNS)
    if args.m_mode == "from-branch":
        header += ["c_party", "spreading_below_party"]
        rows = [r + [c, int(r[6] < c)] for r, (_, c, _) in zip(rows, joined)]
    outputs = [write_csv(out_dir / "spreading.csv", header, rows)]
    inputs = {**_common_inputs(args, threads), "beta_grid": args.beta_grid, "m": args.m,
              "m_mode": args.m_mode, "branch": args.branch}
    write_manifest(out_dir, "spectral", inputs, outputs)
    return 0


# ---------------------------------------------------------------------------
# predict

PREDICT_COLUMNS = ["beta", "m", "c_small_beta", "c_small_beta_corrected", "c_theorem1", "peak",
                   "decay"]


def _prediction_row(beta, m):
    nan = float("nan")
    if 0 < beta <= 0.5:
        small = small_beta_speed(beta, m)
        corrected = small_beta_speed(beta, m, with_correction=True)
    else:
        small = corrected = nan
    if 0 < 2.0 - beta < 0.5:
        peak, decay, c = theorem1_profile(beta, m)
    else:
        peak = decay = c = nan
    return [beta, m, small, corrected, c, peak, decay]


def cmd_predict(args, out_dir: Path, threads: int) -> int:
    betas = parse_beta_grid(args.beta_grid)
    if args.m <= 0:
        raise DomainError("--m must be positive")
    rows = [_prediction_row(b, args.m) for b in betas]
    outputs = [write_csv(out_dir / "predictions.csv", PREDICT_COLUMNS, rows)]
    inputs = {**_common_inputs(args, threads), "beta_grid": args.beta_grid, "m": args.m}
    write_manifest(out_dir, "predict", inputs, outputs)
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args, out_dir: Path, threads: int) -> int:
    from . import verify

    numbers = None
    if args.only:
        try:
            numbers = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--only expects criterion numbers, got {args.only!r}") from None
    try:
        results = verify.run(numbers, quick=args.quick, fault=args.inject_fault, report=print)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [[r.number, r.name, int(r.passed), r.measured, r.expected, r.seconds] for r in results]
    outputs = [write_csv(out_dir / "verify.csv",
                         ["criterion", "name", "passed", "measured", "expected", "seconds"], rows)]
    inputs = {**_common_inputs(args, threads), "only": args.only, "quick": args.quick,
              "inject_fault": args.inject_fault}
    write_manifest(out_dir, "verify", inputs, outputs)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# export-branch


def cmd_export_branch(args, out_dir: Path, threads: int) -> int:
    from .tw import load_branch, save_branch

    if not args.branch:
        raise ConfigError("export-branch needs --branch")
    branch = load_branch(args.branch)
    outputs = []
    if args.point is not None:
        try:
            p = branch.points[args.point].profile
        except IndexError:
            raise ConfigError(f"--point {args.point} out of range (branch has "
                              f"{len(branch.points)} points)") from None
        outputs.append(write_csv(out_dir / "profile.csv", ["xi", "Q", "q"],
                                 zip(p.grid.xi, p.Q, p.q)))
    else:
        suffix = ".csv" if args.format == "csv" else ".dlb"
        outputs.append(save_branch(branch, out_dir / f"branch{suffix}"))
    inputs = {**_common_inputs(args, threads), "branch": args.branch, "format": args.format,
              "point": args.point}
    write_manifest(out_dir, "export-branch", inputs, outputs)
    return 0


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "simulate": cmd_simulate,
    "continue": cmd_continue,
    "spectral": cmd_spectral,
    "predict": cmd_predict,
    "verify": cmd_verify,
    "export-branch": cmd_export_branch,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for outputs")
    common.add_argument("--threads", help="worker threads (default: $DRIFTLAB_THREADS or 1)")
    common.add_argument("--seed", type=int, default=0, help="seed for random initial data")

    parser = argparse.ArgumentParser(prog="driftlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"driftlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate the lattice model")
    sub.add_parser("continue", parents=[common], help="continue traveling waves in beta")
    sp = sub.add_parser("spectral", parents=[common], help="linear spreading speeds")
    sp.add_argument("--beta-grid", required=True,
                    help="comma list or start:stop:step; 'branch' uses the branch points")
    sp.add_argument("--m", type=float, default=1.0, help="background mass in fixed mode")
    sp.add_argument("--m-mode", choices=("fixed", "from-branch"), default="fixed")
    sp.add_argument("--branch", help="branch file for --m-mode from-branch")
    pp = sub.add_parser("predict", parents=[common], help="tabulate asymptotic formulas")
    pp.add_argument("--beta-grid", required=True)
    pp.add_argument("--m", type=float, default=1.0)
    vp = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    vp.add_argument("--quick", action="store_true", help="skip the slower checks")
    vp.add_argument("--only", help="comma-separated criterion numbers")
    vp.add_argument("--inject-fault", help=argparse.SUPPRESS)
    ep = sub.add_parser("export-branch", parents=[common], help="convert or extract branch data")
    ep.add_argument("--branch", help="input branch file (.dlb or .csv)")
    ep.add_argument("--format", choices=("csv", "binary"), default="csv")
    ep.add_argument("--point", type=int, help="export one profile instead of the whole branch")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = thread_count(args.threads)
        out_dir = args.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out_dir, threads)
    except DriftlabError as exc:
        print(f"driftlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
