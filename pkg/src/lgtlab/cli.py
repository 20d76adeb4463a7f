"""Command-line driver: ``lgtlab <experiment> --config PATH --out DIR --seed N``.

Exit status is 0 when every check passes, 1 when a check fails and 2 for
invalid input or a refused (infeasible) run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import tempfile
import time
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy
import sympy

from . import __version__
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config, parse_config
from .dynamics import DynamicsError, InfeasibleDimension
from .experiments import RUNNERS, ExperimentOutput, Table
from .groundstate import GroundStateError
from .hamiltonian import HamiltonianError
from .lattice import LatticeError
from .liebrobinson import LRBoundError

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2

_REFUSALS = (ConfigError, InfeasibleDimension, DynamicsError, GroundStateError, HamiltonianError, LatticeError, LRBoundError)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def render_csv(table: Table, sha256: str, seed: int = 0) -> str:
    """CSV text: a ``#`` provenance line, the header row, then data rows."""
    buf = io.StringIO()
    buf.write(f"# config_sha256={sha256} seed={seed} units: {table.units}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _versions() -> dict[str, str]:
    return {
        "lgtlab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
    }


def run(cfg: ExperimentConfig, out: Path, subadditivity: bool = False, stream=sys.stdout) -> int:
    """Run every experiment listed in ``cfg`` and write artifacts under ``out``."""
    manifest = {
        "config_sha256": cfg.sha256,
        "config": cfg.source,
        "seed": cfg.seed,
        "versions": _versions(),
        "experiments": [],
    }
    status = EXIT_OK
    for name in cfg.experiments:
        t0 = time.perf_counter()
        try:
            res: ExperimentOutput = (
                RUNNERS[name](cfg, subadditivity) if name == "ground" else RUNNERS[name](cfg)
            )
        except _REFUSALS as exc:
            print(f"{name}: refused: {exc}", file=sys.stderr)
            manifest["experiments"].append({"name": name, "status": "refused", "error": str(exc)})
            _write_manifest(out, manifest)
            return EXIT_INVALID
        elapsed = time.perf_counter() - t0
        files = []
        for fname, table in res.tables.items():
            write_atomic(out / fname, render_csv(table, cfg.sha256, cfg.seed))
            files.append(fname)
        for fname, text in res.texts.items():
            write_atomic(out / fname, text)
            files.append(fname)
        manifest["experiments"].append(
            {"name": name, "passed": res.passed, "files": files, "seconds": round(elapsed, 3), "meta": res.meta}
        )
        print(f"{name}: {'PASS' if res.passed else 'FAIL'} ({elapsed:.1f} s) -> {', '.join(files)}", file=stream)
        if not res.passed:
            status = EXIT_FAILED
    manifest["status"] = status
    _write_manifest(out, manifest)
    return status


def _write_manifest(out: Path, manifest: dict) -> None:
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgtlab", description="Finite-volume lattice gauge theory experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*EXPERIMENTS, "run"):
        sp = sub.add_parser(name, help="all experiments listed in the config" if name == "run" else f"the {name} experiment")
        sp.add_argument("--config", type=Path, default=None, help="configuration file (defaults apply when omitted)")
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: [run] out, else ./out)")
        sp.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
        if name in ("ground", "run"):
            sp.add_argument("--subadditivity", action="store_true", help="also run the subadditivity table")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed: must be nonnegative")
        cfg = load_config(args.config, args.seed) if args.config else parse_config("", args.seed)
    except ConfigError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command != "run":
        cfg.experiments = [args.command]
    out = args.out or Path(cfg.out or "out")
    return run(cfg, out, subadditivity=getattr(args, "subadditivity", False))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
