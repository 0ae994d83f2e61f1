"""Command line entry point: ``favardlab {scan,dichotomy,simulate,experiment}``.

Exit codes: 0 pass, 1 failure, 2 usage or config error, 3 no dichotomy.
Every run writes ``manifest.json`` in the output directory, also on failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .almost_periods import relative_density_gap, scan_almost_periods
from .cocycle import fit_dichotomy, verify_dichotomy_bounds
from .errors import ConfigError, NoDichotomyError
from .harness import run_experiment
from .sde import moment_odes, simulate_paths

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NO_DICHOTOMY = 0, 1, 2, 3


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("favardlab")
    except Exception:
        return "unknown"


def _write_json(path: Path, doc: dict) -> str:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_plain) + "\n")
    return str(path)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def cmd_scan(args, out: Path, run: dict) -> int:
    c = cfgmod.load_scan(args.config)
    report = scan_almost_periods(c.signal, c.epsilon, c.window, c.scan_step, c.verify_span, c.mode, c.verify_step)
    path = out / "periods.csv"
    report.to_csv(path)
    run["artifacts"].append(str(path))
    summary = {
        "epsilon": c.epsilon,
        "window": list(c.window),
        "mode": c.mode,
        "n_periods": int(report.periods.size),
        "representatives": report.representatives,
        "relative_density_gap": relative_density_gap(report),
    }
    run["artifacts"].append(_write_json(out / "scan_summary.json", summary))
    return EXIT_OK


def cmd_dichotomy(args, out: Path, run: dict) -> int:
    c = cfgmod.load_dichotomy(args.config, args.seed)
    run["seeds"] = {"base": c.seed}
    cert = fit_dichotomy(c.system, c.horizon, c.step, c.samples, c.seed)
    doc = cert.to_dict()
    doc["verify_violation"] = verify_dichotomy_bounds(cert, c.samples)
    doc["stable_rank"] = cert.stable_rank
    run["artifacts"].append(_write_json(out / "certificate.json", doc))
    # decay curve: ||U(t,0) P|| for t > 0 and ||U(t,0) Q|| for t < 0 against the fitted bound
    times = cert.sample_times()
    mid = times.size // 2
    idx = np.arange(times.size)
    norms = cert.pair_norms(idx, np.full(times.size, mid))
    path = out / "decay.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "norm", "bound"])
        for t, n in zip(times, norms):
            w.writerow([f"{t:.12g}", f"{n:.12g}", f"{cert.N_const * np.exp(-cert.nu * abs(t)):.12g}"])
    run["artifacts"].append(str(path))
    return EXIT_OK


def cmd_simulate(args, out: Path, run: dict) -> int:
    c = cfgmod.load_simulate(args.config, args.seed, args.paths)
    run["seeds"] = {"base": c.seed}
    ens = simulate_paths(c.system, c.t0, c.t1, c.initial_law, c.n_paths, c.step, c.seed, c.record_stride,
                         args.workers or c.workers)
    path = out / "paths.csv"
    ens.to_csv(path)
    run["artifacts"].append(str(path))
    if c.moments:
        m0, v0 = c.initial_law.moments(c.system.dim)
        curve = moment_odes(c.system, c.t0, c.t1, m0, v0, c.step, c.record_stride)
        path = out / "moments.csv"
        curve.to_csv(path)
        run["artifacts"].append(str(path))
    return EXIT_OK


def cmd_experiment(args, out: Path, run: dict) -> int:
    c = cfgmod.load_experiment(args.config, args.seed, args.paths)
    run["seeds"] = dict(c.seeds)
    report = run_experiment(c, out, args.workers or 1)
    run["artifacts"].extend(report.artifacts)
    run["pass"] = report.passed
    run["expect_pass"] = c.expect_pass
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {"scan": cmd_scan, "dichotomy": cmd_dichotomy, "simulate": cmd_simulate, "experiment": cmd_experiment}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="favardlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config document")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument("--paths", type=int, default=None, help="override the number of paths")
        p.add_argument("--workers", type=int, default=None, help="simulation threads")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = {
        "command_line": ["favardlab"] + argv,
        "command": args.command,
        "config": str(args.config),
        "config_digest": None,
        "seeds": {},
        "version": _version(),
        "artifacts": [],
    }
    start = time.time()
    try:
        run["config_digest"] = cfgmod.config_digest(args.config)
        code = COMMANDS[args.command](args, out, run)
    except ConfigError as exc:
        run["error"] = str(exc)
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except OSError as exc:
        if run["config_digest"] is None:
            run["error"] = f"cannot read config: {exc}"
            print(f"config error: {run['error']}", file=sys.stderr)
            code = EXIT_CONFIG
        else:
            run["error"] = repr(exc)
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_FAIL
    except NoDichotomyError as exc:
        run["error"] = str(exc)
        print(str(exc), file=sys.stderr)
        code = EXIT_NO_DICHOTOMY
    except Exception as exc:
        run["error"] = repr(exc)
        run["traceback"] = traceback.format_exc()
        print(f"error: {exc!r}", file=sys.stderr)
        code = EXIT_FAIL
    run["exit_code"] = code
    run["wall_time"] = time.time() - start
    _write_json(out / "manifest.json", run)
    return code


if __name__ == "__main__":
    sys.exit(main())
