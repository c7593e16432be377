"""Command-line front end: one subcommand per experiment kind.

Exit codes: 0 when every grid point succeeded, 2 when the run completed with
some failed points recorded in the manifest, 1 on configuration or runtime
errors that prevented a run.
"""

import argparse
import sys
from pathlib import Path

from ._version import __version__
from .config import EXPERIMENT_KINDS, load_config
from .errors import QskyrmError
from .experiments import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qskyrm",
        description="Quantum skyrmion spectra, topology, driving, and "
                    "Otto-cycle thermodynamics on small lattices.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="KIND")
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, type=Path,
                       help="YAML experiment config")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default: config output.directory)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; one grid point per task")
        p.add_argument("--strict", action="store_true",
                       help="abort on the first failed grid point")
        p.add_argument("--no-cache", action="store_true",
                       help="skip the on-disk spectrum cache")
        p.add_argument("--cache-dir", type=Path, default=None,
                       help="spectrum cache directory (default: "
                            "$QSKYRM_CACHE_DIR or ~/.cache/qskyrm)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise QskyrmError(
                f"config kind {cfg.kind!r} does not match "
                f"subcommand {args.command!r}")
        if args.threads < 1:
            raise QskyrmError(f"--threads must be >= 1, got {args.threads}")
        manifest = run_experiment(
            cfg, out_dir=args.out, threads=args.threads,
            use_cache=not args.no_cache, strict=args.strict,
            cache_dir=args.cache_dir)
    except (QskyrmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.out if args.out is not None else Path(cfg.output.directory)
    failed = manifest["points_failed"]
    total = manifest["points_total"]
    print(f"{cfg.kind}: {total - failed}/{total} points ok -> {out}")
    if failed:
        print(f"{failed} point(s) failed; see manifest.yaml", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
