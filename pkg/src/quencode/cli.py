"""Command-line entry point: run, grid, plot, fetch-data."""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import urllib.request
from pathlib import Path
from typing import List, Optional

from .config import DEFAULT_CONFIG_TEXT, GridSpec, load_config
from .errors import ConfigError, QuencodeError

log = logging.getLogger("quencode")

EXIT_OK, EXIT_RUN, EXIT_CONFIG = 0, 1, 2

MNIST_FILES = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}
MNIST_MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML config file (default: built-in)")
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", type=str)
    p.add_argument("--encoding", choices=["basis", "rotation", "amplitude"])
    p.add_argument("--scenario", choices=["pure", "noisy", "noisy_dd"])
    p.add_argument("--noise-preset", type=str)
    p.add_argument("--mnist-dir", type=str)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quencode", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate one (encoding, scenario) cell")
    _add_common(run)

    grid = sub.add_parser("grid", help="run the encoding x scenario grid and write summary.csv")
    _add_common(grid)
    grid.add_argument("--encodings", nargs="+", choices=["basis", "rotation", "amplitude"])
    grid.add_argument("--scenarios", nargs="+", choices=["pure", "noisy", "noisy_dd"])
    grid.add_argument("--repeats", type=int)

    plot = sub.add_parser("plot", help="render metrics CSVs to SVG")
    plot.add_argument("csv", nargs="+", type=Path)
    plot.add_argument("--output-dir", type=Path)

    fetch = sub.add_parser("fetch-data", help="download MNIST and verify checksums")
    fetch.add_argument("--dest", type=Path, default=Path("data/mnist"))
    fetch.add_argument("--mirror", action="append", help="base URL to try first (repeatable)")

    sub.add_parser("show-config", help="print the default configuration")
    return parser


def _config_from_args(args):
    cfg, grid = load_config(args.config)
    data = cfg.data
    if args.mnist_dir:
        from dataclasses import replace

        data = replace(data, mnist_dir=args.mnist_dir)
    cfg = cfg.with_overrides(
        seed=args.seed,
        output_dir=args.output_dir,
        encoding=args.encoding,
        scenario=args.scenario,
        noise_preset=args.noise_preset,
        workers=args.workers,
        data=data,
    )
    return cfg, grid


def cmd_run(args) -> int:
    from .experiment import run_experiment

    cfg, _ = _config_from_args(args)
    report = run_experiment(cfg)
    print(f"{cfg.encoding.value}/{cfg.scenario.value} seed={cfg.seed}: "
          f"accuracy={report.final_accuracy:.4f} ({report.total_wall_time:.1f}s)")
    print(f"outputs in {cfg.output_dir}")
    return EXIT_OK


def cmd_grid(args) -> int:
    from .experiment import run_grid

    cfg, grid = _config_from_args(args)
    grid = GridSpec(
        encodings=args.encodings or grid.encodings,
        scenarios=args.scenarios or grid.scenarios,
        repeats=args.repeats if args.repeats is not None else grid.repeats,
    )
    results, summary = run_grid(cfg, grid)
    print(summary.read_text(), end="")
    print(f"summary written to {summary}")
    return EXIT_RUN if any(r.error for r in results) else EXIT_OK


def cmd_plot(args) -> int:
    from .experiment import emit_plots

    for path in emit_plots(args.csv, args.output_dir):
        print(path)
    return EXIT_OK


def _download(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=60) as resp:
        return resp.read()


def fetch_mnist(dest: Path, mirrors=MNIST_MIRRORS, download=_download) -> List[Path]:
    """Fetch the four MNIST archives into ``dest``, checking each MD5."""
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for name, md5 in MNIST_FILES.items():
        target = dest / name
        if target.is_file() and hashlib.md5(target.read_bytes()).hexdigest() == md5:
            written.append(target)
            continue
        errors = []
        for base in mirrors:
            try:
                blob = download(base + name)
            except Exception as exc:  # network failures are reported, then the next mirror is tried
                errors.append(f"{base}: {exc}")
                continue
            digest = hashlib.md5(blob).hexdigest()
            if digest != md5:
                errors.append(f"{base}: checksum {digest} != {md5}")
                continue
            target.write_bytes(blob)
            written.append(target)
            break
        else:
            raise QuencodeError(f"could not fetch {name}: " + "; ".join(errors))
    return written


def cmd_fetch(args) -> int:
    mirrors = tuple(args.mirror or ()) + MNIST_MIRRORS
    for path in fetch_mnist(args.dest, mirrors):
        print(path)
    return EXIT_OK


def cmd_show_config(args) -> int:
    print(DEFAULT_CONFIG_TEXT, end="")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "grid": cmd_grid,
    "plot": cmd_plot,
    "fetch-data": cmd_fetch,
    "show-config": cmd_show_config,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuencodeError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
