"""Command-line front end: ``diffusense {simulate,sweep,analyze}``.

Exit statuses: 0 success, 2 usage error, 3 validation error, 4 I/O error.
"""
import argparse
import csv
import io as _io
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import io
from .covariance import eigenvalues, estimate_covariance
from .estimators import ESTIMATORS, profile
from .experiments import SweepError, UsageError, run_sweep, run_transition
from .field_sim import ConfigError, synthesize
from .sh_math import n_channels, order_from_channels

log = logging.getLogger("diffusense")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


class ValidationError(ValueError):
    pass


@dataclass
class AnalysisFrameReport:
    frame: int
    start_time: float
    profiles: dict
    spectrum: np.ndarray


def frame_starts(total, frame_len, hop):
    """Start indices of frames tiling ``total`` samples; a single frame if too short."""
    if frame_len is None or frame_len >= total:
        return [0], total
    return list(range(0, total - frame_len + 1, hop)), frame_len


def analyze_signals(data, order, frame_len=None, hop=None, estimators=("comedie",), rate=48000.0):
    """Framewise diffuseness profiles of ``(L+1)**2 x T`` SH signals."""
    data = np.asarray(data, dtype=float)
    expected = n_channels(order)
    if data.shape[0] != expected:
        raise ValidationError(f"order {order} needs (L+1)**2 = {expected} channels, "
                              f"input has {data.shape[0]}")
    if order < 1:
        raise ValidationError("analysis needs order >= 1")
    total = data.shape[1]
    if total < 1:
        raise ValidationError("input has no samples")
    if frame_len is not None and frame_len > total:
        log.warning("frame length %d exceeds input length %d; analysing one full-length frame",
                    frame_len, total)
    hop = hop or frame_len
    starts, length = frame_starts(total, frame_len, hop)
    reports = []
    for i, start in enumerate(starts):
        cov = estimate_covariance(data[:, start:start + length])
        profs = {name: profile(cov, name) for name in estimators}
        reports.append(AnalysisFrameReport(i, start / rate, profs, eigenvalues(cov)))
    return reports


def reports_to_csv(reports, order, estimators, with_spectrum=False):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["frame", "time"]
    for name in estimators:
        header += [f"{name}_d{l}" for l in range(1, order + 1)]
    if with_spectrum:
        header += [f"eig_{i}" for i in range(1, n_channels(order) + 1)]
    w.writerow(header)
    for r in reports:
        row = [r.frame, repr(r.start_time)]
        for name in estimators:
            row += [repr(float(v)) for v in r.profiles[name].values]
        if with_spectrum:
            row += [repr(float(v)) for v in r.spectrum]
        w.writerow(row)
    return buf.getvalue()


# --- commands --------------------------------------------------------------

def _format_for(path, fmt):
    if fmt:
        return fmt
    return "wav" if os.fspath(path).lower().endswith(".wav") else "raw"


def cmd_simulate(args):
    config = io.load_scenario(args.config)
    if args.seed is not None:
        config = config.with_(seed=args.seed)
    block = synthesize(config)
    fmt = _format_for(args.out, args.format)
    sidecar = io.write_block(args.out, block, fmt=fmt, config=config)
    log.info("wrote %s (%d channels x %d samples) and %s", args.out, block.data.shape[0],
             block.samples, sidecar)
    return EXIT_OK


def cmd_sweep(args):
    kind, spec = io.load_sweep(args.config)
    os.makedirs(args.out, exist_ok=True)
    if kind == "transition":
        result = run_transition(spec["orders"], spec["q_values"], samples=spec["samples"],
                                seeds=spec["seeds"], seed=spec["seed"], threads=args.threads)
        io.atomic_write_text(os.path.join(args.out, "transition.csv"), result.to_transition_csv())
        io.atomic_write_text(os.path.join(args.out, "transition_long.csv"), result.to_long_csv())
    else:
        result = run_sweep(spec, threads=args.threads)
        io.atomic_write_text(os.path.join(args.out, "sweep_long.csv"), result.to_long_csv())
        for name in spec.estimators:
            for order in spec.orders:
                path = os.path.join(args.out, f"{name}_L{order}.csv")
                io.atomic_write_text(path, result.to_matrix_csv(name, order))
    meta = dict(result.metadata, experiment=kind)
    io.atomic_write_text(os.path.join(args.out, "metadata.json"), json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def _parse_estimators(text):
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [n for n in names if n not in ESTIMATORS]
    if not names or bad:
        raise UsageError(f"--estimators must be a comma list drawn from {', '.join(ESTIMATORS)}")
    return names


def cmd_analyze(args):
    estimators = _parse_estimators(args.estimators)
    if args.frame_len is not None and args.frame_len < 1:
        raise UsageError("--frame-len must be >= 1")
    if args.hop is not None and args.hop < 1:
        raise UsageError("--hop must be >= 1")
    try:
        data, rate = io.read_signals(args.input)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    if args.order is None:
        try:
            order = order_from_channels(data.shape[0])
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    else:
        order = args.order
    reports = analyze_signals(data, order, args.frame_len, args.hop, estimators, rate)
    text = reports_to_csv(reports, order, estimators, args.with_spectrum)
    if args.out:
        io.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="diffusense",
                                     description="SH-domain sound field diffuseness analysis")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize SH signals from a scenario config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("wav", "raw"), default=None,
                   help="default: wav for *.wav outputs, raw otherwise")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a diffuseness sweep or mismatch transition")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $DIFFUSENSE_THREADS or 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="framewise diffuseness profiles of an SH signal file")
    p.add_argument("input")
    p.add_argument("--order", type=int, default=None,
                   help="SH order (default: inferred from the channel count)")
    p.add_argument("--frame-len", type=int, default=None, help="samples per frame (default: whole file)")
    p.add_argument("--hop", type=int, default=None, help="hop in samples (default: frame length)")
    p.add_argument("--estimators", default="comedie")
    p.add_argument("--with-spectrum", action="store_true", help="append eigenvalue columns")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="diffusense: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"diffusense: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.ConfigFileError, ConfigError, ValidationError, SweepError) as exc:
        print(f"diffusense: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"diffusense: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
