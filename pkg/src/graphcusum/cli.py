"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 data or parse error, 3 calibration
failure (no correction parameter separates the nominal and post-change
drift).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detector import (
    CalibrationError,
    DetectorConfig,
    calibrate_c,
    drift_sequence,
    estimate_block_subspaces,
    iter_blocks,
    renewal_run_lengths,
)
from .experiments import (
    DEFAULTS,
    ExperimentSpec,
    detect_on_matrix,
    detection_summary,
    replay,
    run_experiment,
    write_arl_csv,
    write_json,
    write_trace_csv,
)
from .filtering import (
    FilterCoefficients,
    SignalFormatError,
    StreamConfig,
    dominant_subspace_of,
    read_signal_csv,
    synthesize_stream,
    write_signal_csv,
)
from .graphs import (
    GraphFormatError,
    barabasi_albert,
    er_density,
    erdos_renyi,
    planted_dense_block,
    shift_operator,
    write_edge_list,
)
from .subspace import SubspaceFamily, SubspaceFormatError, read_subspace_csv, write_subspace_csv

EXIT_USAGE, EXIT_DATA, EXIT_CALIBRATION = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _eta(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("eta must be nonnegative")
    return v


def _add_detector_args(p: argparse.ArgumentParser, *, need_c: bool = True):
    p.add_argument("--u0", type=Path, help="nominal subspace CSV")
    p.add_argument("--family", choices=["spike", "blind", "catalog"], default="spike")
    p.add_argument("--catalog", type=Path, nargs="+", help="subspace CSV files forming a catalog family")
    p.add_argument("--b", type=int, default=1, help="block size")
    p.add_argument("--k", type=int, default=None, help="subspace dimension (default: from --u0)")
    p.add_argument("--windowing", choices=["disjoint", "sliding"], default="disjoint")
    if need_c:
        p.add_argument("--c", type=float, default=None, help="correction parameter")


# experiment parameter -> argparse type; flags are --<key with dashes>
_EXPERIMENT_FLAGS = {
    "n": int, "p": float, "q": float, "q_factor": float, "m": int, "n0": int, "n0_grid": _ints,
    "b": int, "k": int, "tau": int, "length": int, "c_list": _floats, "eta_grid": _floats,
    "n_eta": int, "trials": int, "nominal_samples": int, "post_samples": int, "calib_length": int,
    "filter": _floats, "family": str, "input": str, "u0": str, "warmup": int, "c": float,
    "eta": float, "margin": float, "ground_truth": int, "windowing": str,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphcusum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="synthesize a signal stream with one change point")
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--p", type=float, default=None, help="ER density (default 2 ln n / n)")
    g.add_argument("--post", choices=["ba", "planted", "er"], default="ba")
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--n0", type=int, default=20)
    g.add_argument("--q", type=float, default=None, help="planted block density (default 5p)")
    g.add_argument("--p1", type=float, default=None, help="post-change ER density")
    g.add_argument("--kind", choices=["adjacency", "laplacian"], default="adjacency")
    g.add_argument("--filter", type=_floats, default=[0.0, 0.0, 1.0])
    g.add_argument("--tau", type=int, default=600)
    g.add_argument("--length", type=int, default=1000)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--noise-seed", type=int, default=None, help="separate seed for the noise (graphs still follow --seed)")
    g.add_argument("--k", type=int, default=1)
    g.add_argument("--output", type=Path, default=None, help="signal CSV (default stdout)")
    g.add_argument("--u0-out", type=Path, default=None)
    g.add_argument("--graphs-out", type=Path, default=None)

    d = sub.add_parser("detect", help="run the CUSUM detector on a signal CSV")
    d.add_argument("--input", default="-", help="signal CSV path or - for stdin")
    _add_detector_args(d)
    d.add_argument("--eta", type=_eta, default=math.inf)
    d.add_argument("--warmup", type=int, default=0, help="prefix used to estimate u0 and/or c")
    d.add_argument("--margin", type=float, default=2.0)
    d.add_argument("--ground-truth", type=int, default=None)
    d.add_argument("--full-trace", action="store_true")
    d.add_argument("--trace-out", type=Path, default=None)
    d.add_argument("--summary-out", type=Path, default=None)

    c = sub.add_parser("calibrate", help="choose the correction parameter from nominal (and post-change) data")
    c.add_argument("--nominal", type=Path, required=True)
    c.add_argument("--post", type=Path, default=None)
    _add_detector_args(c, need_c=False)
    c.add_argument("--margin", type=float, default=2.0)
    c.add_argument("--min-separation", type=float, default=2.0)

    a = sub.add_parser("arl", help="run lengths to alarm on nominal and post-change CSV streams")
    a.add_argument("--nominal", type=Path, required=True)
    a.add_argument("--post", type=Path, required=True)
    _add_detector_args(a)
    a.add_argument("--eta-grid", type=_floats, required=True)
    a.add_argument("--output", type=Path, default=None)

    e = sub.add_parser("experiment", help="run an experiment recipe")
    e.add_argument("name", choices=sorted(DEFAULTS))
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--out", type=Path, default=None)
    for key, typ in _EXPERIMENT_FLAGS.items():
        e.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)

    r = sub.add_parser("replay", help="re-run an experiment from its provenance record")
    r.add_argument("--provenance", type=Path, required=True)
    r.add_argument("--out", type=Path, required=True)
    return parser


def cli_parse(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse ``argv``; for ``experiment`` the namespace carries a ready :class:`ExperimentSpec` as ``spec``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "experiment":
        overrides = {k: getattr(args, k) for k in _EXPERIMENT_FLAGS if getattr(args, k) is not None}
        unknown = sorted(set(overrides) - set(DEFAULTS[args.name]))
        if unknown:
            parser.error(f"experiment {args.name} does not accept {', '.join('--' + u.replace('_', '-') for u in unknown)}")
        args.spec = ExperimentSpec(args.name, args.seed, overrides, args.out)
    return args


def _family(args) -> SubspaceFamily:
    if args.family == "spike":
        return SubspaceFamily.delta_spike()
    if args.family == "blind":
        return SubspaceFamily.blind()
    if not args.catalog:
        raise UsageError("--family catalog needs --catalog FILE [FILE ...]")
    return SubspaceFamily.catalog([(p.stem, read_subspace_csv(p)) for p in args.catalog])


def _read_stream(src: str):
    if src == "-":
        return read_signal_csv(sys.stdin)
    return read_signal_csv(Path(src))


def _config(args, *, c: float = 0.0, eta: float = math.inf) -> DetectorConfig:
    if args.u0 is None:
        raise UsageError("--u0 is required")
    u0 = read_subspace_csv(args.u0)
    if args.k is not None and args.k != u0.k:
        raise UsageError(f"--k {args.k} disagrees with u0 dimension {u0.k}")
    return DetectorConfig(u0, _family(args), c, eta, args.b, args.windowing)


def cmd_generate(args) -> int:
    n = args.n
    p = er_density(n) if args.p is None else args.p
    ss = np.random.SeedSequence(args.seed)
    s_g0, s_g1, s_noise = ss.spawn(3)
    if args.noise_seed is not None:
        s_noise = np.random.SeedSequence(args.noise_seed)
    g0 = erdos_renyi(n, p, s_g0)
    if args.post == "ba":
        g1 = barabasi_albert(n, args.m, s_g1)
    elif args.post == "planted":
        q = min(1.0, 5 * p) if args.q is None else args.q
        g1 = g0 if q == p else planted_dense_block(g0, args.n0, q, s_g1)
    else:
        g1 = erdos_renyi(n, p if args.p1 is None else args.p1, s_g1)
    S0, S1 = shift_operator(g0, args.kind), shift_operator(g1, args.kind)
    H = FilterCoefficients(tuple(args.filter))
    stream = synthesize_stream(StreamConfig(S0, S1, H, H, args.tau, args.length, s_noise))
    write_signal_csv(stream, args.output if args.output is not None else sys.stdout, tau=args.tau)
    if args.u0_out is not None:
        write_subspace_csv(dominant_subspace_of(H, S0, args.k), args.u0_out)
    if args.graphs_out is not None:
        args.graphs_out.mkdir(parents=True, exist_ok=True)
        write_edge_list(g0, args.graphs_out / "graph0.txt")
        write_edge_list(g1, args.graphs_out / "graph1.txt")
    return 0


def cmd_detect(args) -> int:
    Y, meta = _read_stream(args.input)
    u0 = read_subspace_csv(args.u0) if args.u0 is not None else None
    k = args.k if args.k is not None else (u0.k if u0 is not None else 1)
    if u0 is not None and k != u0.k:
        raise UsageError(f"--k {k} disagrees with u0 dimension {u0.k}")
    cfg, res, info = detect_on_matrix(
        Y, family=_family(args), c=args.c, eta=args.eta, b=args.b, k=k, windowing=args.windowing,
        u0=u0, warmup=args.warmup, margin=args.margin, ground_truth=args.ground_truth,
        full_trace=args.full_trace,
    )
    summary = detection_summary(cfg, res, None, **info)
    if args.trace_out is not None:
        write_trace_csv(args.trace_out, res.statistic, cfg.eta)
    else:
        _trace_to_stdout(res.statistic, cfg.eta)
    text = json.dumps(summary, sort_keys=True)
    if args.summary_out is not None:
        write_json(args.summary_out, summary)
    print(text)
    return 0


def _trace_to_stdout(S, eta):
    sys.stdout.write("ell,S,alarm\n")
    for ell, s in enumerate(S, start=1):
        sys.stdout.write(f"{ell},{format(float(s), '.17g')},{int(s >= eta)}\n")


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    Y0, _ = read_signal_csv(args.nominal)
    blocks1 = None
    if args.post is not None:
        Y1, _ = read_signal_csv(args.post)
        blocks1 = iter_blocks(Y1, cfg.b, cfg.windowing)
    c, est = calibrate_c(cfg, iter_blocks(Y0, cfg.b, cfg.windowing), blocks1,
                         margin=args.margin, min_separation=args.min_separation)
    print(json.dumps({"c": c, **est.__dict__, "config": cfg.with_c(c).echo()}, sort_keys=True))
    return 0


def cmd_arl(args) -> int:
    if args.c is None:
        raise UsageError("--c is required")
    cfg = _config(args, c=args.c)
    Y0, _ = read_signal_csv(args.nominal)
    Y1, _ = read_signal_csv(args.post)
    d0 = drift_sequence(cfg, estimate_block_subspaces(Y0, cfg.k, cfg.b, cfg.windowing))
    d1 = drift_sequence(cfg, estimate_block_subspaces(Y1, cfg.k, cfg.b, cfg.windowing))
    rows = []
    for eta in args.eta_grid:
        r0 = _renewal_mean(d0, cfg.c, eta)
        r1 = _renewal_mean(d1, cfg.c, eta)
        rows.append(dict(eta=eta, arl0=r0[0], arl0_censored_frac=r0[1], arl1=r1[0], arl1_censored_frac=r1[1], family=cfg.family.name))
    write_arl_csv(args.output if args.output is not None else sys.stdout, rows)
    return 0


def _renewal_mean(drifts, c, eta) -> tuple[float, float]:
    """Mean completed run length and the censored share of runs; the open tail alone if no run completed."""
    runs, tail = renewal_run_lengths(drifts, c, eta)
    if not runs:
        return float(tail), 1.0
    n_cens = 1 if tail else 0
    return float(np.mean(runs)), n_cens / (len(runs) + n_cens)


def cmd_experiment(args) -> int:
    art = run_experiment(args.spec)
    print(json.dumps(art.summary, sort_keys=True, default=str))
    return 0


def cmd_replay(args) -> int:
    art = replay(args.provenance, args.out)
    print(json.dumps(art.summary, sort_keys=True, default=str))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "detect": cmd_detect,
    "calibrate": cmd_calibrate,
    "arl": cmd_arl,
    "experiment": cmd_experiment,
    "replay": cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = cli_parse(argv)
    except SystemExit as exc:
        # argparse exits for usage errors, --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except KeyError as exc:
        print(f"graphcusum: error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"graphcusum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CalibrationError as exc:
        print(f"graphcusum: calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (SignalFormatError, SubspaceFormatError, GraphFormatError, FileNotFoundError, ValueError) as exc:
        print(f"graphcusum: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
