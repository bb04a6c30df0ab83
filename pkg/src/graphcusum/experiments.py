"""Experiment recipes and their on-disk artifacts.

Every recipe is a pure function of ``(params, seed)``: all randomness is
drawn from children of ``numpy.random.SeedSequence(seed)``, so a run can be
regenerated byte for byte from its ``provenance.json``.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence, TextIO

import numpy as np

from . import __version__
from .detector import (
    DetectionResult,
    DetectorConfig,
    cusum_trace,
    calibrate_c,
    drift_sequence,
    estimate_block_subspaces,
    first_alarm,
    iter_blocks,
    run_detector,
)
from .filtering import (
    FilterCoefficients,
    StreamConfig,
    dominant_subspace_of,
    read_signal_csv,
    stream_matrix,
    synthesize_stream,
    write_signal_csv,
)
from .graphs import (
    Graph,
    ShiftOperator,
    barabasi_albert,
    er_density,
    erdos_renyi,
    planted_dense_block,
    shift_operator,
    write_edge_list,
)
from .subspace import (
    DegenerateSpectrumWarning,
    SignalBlock,
    Subspace,
    SubspaceFamily,
    estimate_dominant_subspace,
    read_subspace_csv,
    write_subspace_csv,
)

SQUARED_ADJACENCY = (0.0, 0.0, 1.0)

DEFAULTS: dict[str, dict[str, Any]] = {
    "spike-trace": dict(
        n=100, p=None, m=1, filter=list(SQUARED_ADJACENCY), b=1, k=1, family="spike",
        tau=600, length=1000, c_list=[0.01, 0.05, 0.1], calibrate=True, calib_length=1000,
    ),
    "spike-arl": dict(
        n=100, p=None, m=1, filter=list(SQUARED_ADJACENCY), b=1, k=1, families=["spike", "blind"],
        nominal_samples=2000, post_samples=2000, trials=20, n_eta=10, eta_grid=None,
        calib_length=1000, c_list=None,
    ),
    "community-arl": dict(
        n=100, p=None, q=None, q_factor=5.0, n0=20, n0_grid=list(range(10, 101, 10)),
        filter=list(SQUARED_ADJACENCY), b=50, k=2, families=["catalog", "blind"],
        nominal_samples=2000, post_samples=2000, trials=20, n_eta=10, eta_grid=None,
        calib_length=5000, c_list=None,
    ),
    "csv-detect": dict(
        input=None, u0=None, warmup=1000, family="spike", b=36, k=1, windowing="sliding",
        c=None, margin=2.0, eta=1.0, ground_truth=None,
        n=10, p=None, m=1, filter=list(SQUARED_ADJACENCY), tau=2000, length=3000,
    ),
}


def resolve_params(name: str, overrides: dict | None = None) -> dict:
    """Experiment defaults updated with ``overrides``; unknown keys are rejected."""
    if name not in DEFAULTS:
        raise KeyError(f"unknown experiment {name!r}; choose from {sorted(DEFAULTS)}")
    params = json.loads(json.dumps(DEFAULTS[name]))
    for key, val in (overrides or {}).items():
        if key not in params:
            raise KeyError(f"experiment {name!r} has no parameter {key!r}")
        params[key] = val
    return params


@dataclass
class ExperimentSpec:
    name: str
    seed: int
    params: dict = field(default_factory=dict)
    out_dir: Path | None = None

    def __post_init__(self):
        self.params = resolve_params(self.name, self.params)
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)


@dataclass
class RunArtifacts:
    summary: dict
    files: dict[str, Path] = field(default_factory=dict)
    traces: dict[str, np.ndarray] = field(default_factory=dict)
    curves: list[dict] = field(default_factory=list)


# -- artifact io ------------------------------------------------------------


def _g(x) -> str:
    return format(float(x), ".17g")


def write_trace_csv(path: Path, S: Sequence[float], eta: float = math.inf):
    """``ell,S,alarm`` rows; ``alarm`` is 1 where the statistic is at or above ``eta``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ell", "S", "alarm"])
        for ell, s in enumerate(S, start=1):
            w.writerow([ell, _g(s), int(s >= eta)])


def read_trace_csv(path: Path) -> list[tuple[int, float, int]]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["ell", "S", "alarm"]:
            raise ValueError(f"{path}: unexpected trace header {r.fieldnames}")
        return [(int(row["ell"]), float(row["S"]), int(row["alarm"])) for row in r]


ARL_FIELDS = ["eta", "arl0", "arl0_censored_frac", "arl1", "arl1_censored_frac", "family"]


def write_arl_csv(dest: Path | TextIO, rows: Sequence[dict]):
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as fh:
            return write_arl_csv(fh, rows)
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(ARL_FIELDS)
    for r in rows:
        w.writerow([_g(r["eta"]), _g(r["arl0"]), _g(r["arl0_censored_frac"]),
                    _g(r["arl1"]), _g(r["arl1_censored_frac"]), r["family"]])


def read_arl_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ARL_FIELDS:
            raise ValueError(f"{path}: unexpected ARL header {r.fieldnames}")
        return [{k: (row[k] if k == "family" else float(row[k])) for k in ARL_FIELDS} for row in r]


def write_json(path: Path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _provenance(spec: ExperimentSpec) -> dict:
    return {"experiment": spec.name, "params": spec.params, "seed": spec.seed, "version": __version__}


def _finish(spec: ExperimentSpec, art: RunArtifacts, writers: Callable[[Path], dict[str, Path]]) -> RunArtifacts:
    if spec.out_dir is None:
        return art
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    art.files.update(writers(out))
    write_json(out / "summary.json", art.summary)
    write_json(out / "provenance.json", _provenance(spec))
    art.files["summary"] = out / "summary.json"
    art.files["provenance"] = out / "provenance.json"
    return art


# -- shared pieces ----------------------------------------------------------


def _density(params) -> float:
    return er_density(params["n"]) if params.get("p") is None else float(params["p"])


def _stream(S0, S1, H, tau, length, seed) -> np.ndarray:
    return stream_matrix(synthesize_stream(StreamConfig(S0, S1, H, H, tau, length, seed)))


def _family(name: str, catalog: SubspaceFamily | None = None) -> SubspaceFamily:
    if name == "spike":
        return SubspaceFamily.delta_spike()
    if name == "blind":
        return SubspaceFamily.blind()
    if name == "catalog":
        if catalog is None:
            raise ValueError("catalog family requested without a catalog")
        return catalog
    raise ValueError(f"unknown family {name!r}")


def _blocks(Y: np.ndarray, b: int, windowing="disjoint") -> list[SignalBlock]:
    return list(iter_blocks(Y, b, windowing))


def expected_community_adjacency(n: int, p: float, q: float, n0: int) -> np.ndarray:
    """``p (J - I)`` with its leading ``n0 x n0`` block replaced by ``q (J - I)``."""
    E = p * (np.ones((n, n)) - np.eye(n))
    E[:n0, :n0] = q * (np.ones((n0, n0)) - np.eye(n0))
    return E


def community_catalog(n, p, q, n0_grid, k, coeffs=SQUARED_ADJACENCY) -> tuple[SubspaceFamily, list[int]]:
    """Catalog of dominant subspaces of the expected post-change adjacency, one per cutoff.

    Returns the family and the cutoffs whose expected spectrum had no gap at
    ``k`` (their member is one valid choice among several).
    """
    members, degenerate = [], []
    for n0 in n0_grid:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateSpectrumWarning)
            u = dominant_subspace_of(coeffs, ShiftOperator(expected_community_adjacency(n, p, q, int(n0))), k)
        if any(issubclass(w.category, DegenerateSpectrumWarning) for w in caught):
            degenerate.append(int(n0))
        members.append((int(n0), u))
    return SubspaceFamily.catalog(members), degenerate


def _run_lengths(traces: Sequence[np.ndarray], eta: float) -> tuple[float, float, float]:
    lengths, cens = [], []
    for S in traces:
        a = first_alarm(S, eta)
        lengths.append(len(S) if a is None else a)
        cens.append(a is None)
    x = np.asarray(lengths, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se, float(np.mean(cens))


def _nominal_top(nominal_traces, post_traces) -> float:
    """Smallest threshold above which no nominal trial alarms.

    If the nominal statistic never leaves zero every positive threshold is
    fully censored; the smallest positive post-change value is used instead
    so the grid still resolves ARL1 near its minimum.
    """
    top = max((float(S.max(initial=0.0)) for S in nominal_traces), default=0.0)
    if top > 0:
        return top
    pos = [float(S[S > 0].min()) for S in post_traces if np.any(S > 0)]
    return min(pos) if pos else 1.0


def eta_grid(nominal_traces: Sequence[np.ndarray], post_traces: Sequence[np.ndarray], n_eta: int) -> np.ndarray:
    """``n_eta`` evenly spaced thresholds up to the largest nominal maximum.

    At the top threshold every nominal trial runs to censoring, so the grid
    covers the whole range over which ARL0 can be measured.
    """
    top = _nominal_top(nominal_traces, post_traces)
    return top * np.arange(1, n_eta + 1) / n_eta


def arl_rows(nominal_traces, post_traces, etas, family: str) -> list[dict]:
    rows = []
    for eta in etas:
        a0, se0, c0 = _run_lengths(nominal_traces, eta)
        a1, se1, c1 = _run_lengths(post_traces, eta)
        rows.append(dict(eta=float(eta), arl0=a0, arl0_se=se0, arl0_censored_frac=c0,
                         arl1=a1, arl1_se=se1, arl1_censored_frac=c1, family=family))
    return rows


def reference_curve(nominal_traces, post_traces, n_points: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """ARL0 and ARL1 on a fine threshold grid reaching full nominal censoring.

    On fixed traces both curves are non-decreasing in the threshold.
    """
    top = _nominal_top(nominal_traces, post_traces)
    etas = np.linspace(0.0, top * (1 + 1e-9), n_points)
    a0 = np.array([_run_lengths(nominal_traces, e)[0] for e in etas])
    a1 = np.array([_run_lengths(post_traces, e)[0] for e in etas])
    return a0, a1


def dominance_fraction(rows: Sequence[dict], ref_arl0: np.ndarray, ref_arl1: np.ndarray, rtol: float = 1e-9) -> float:
    """Share of ``rows`` whose ARL1 is at or below the reference ARL1 at matched ARL0.

    The matched reference value is the smallest reference ARL1 among
    thresholds whose ARL0 is at least the row's ARL0, i.e. the reference must
    false-alarm no more often than the row does.
    """
    ref_arl0, ref_arl1 = np.asarray(ref_arl0), np.asarray(ref_arl1)
    hits = 0
    for r in rows:
        ok = ref_arl0 >= r["arl0"] * (1 - rtol)
        ref = float(ref_arl1[ok].min()) if ok.any() else float(ref_arl1.max())
        hits += r["arl1"] <= ref * (1 + rtol)
    return hits / len(rows)


@dataclass
class _Setting:
    S0: ShiftOperator
    S1: ShiftOperator
    H: FilterCoefficients
    u0: Subspace
    families: dict[str, SubspaceFamily]
    extra: dict


def _arl_experiment(spec: ExperimentSpec, setting: _Setting, seeds) -> RunArtifacts:
    P = spec.params
    b, k = P["b"], P["k"]
    cal_seed0, cal_seed1, trial_seeds = seeds
    L = P["calib_length"]
    cal0 = _blocks(_stream(setting.S0, setting.S1, setting.H, L + 1, L, cal_seed0), b)
    cal1 = _blocks(_stream(setting.S0, setting.S1, setting.H, 1, L, cal_seed1), b)

    def est(tau, length, s):
        Y = _stream(setting.S0, setting.S1, setting.H, tau, length, s)
        return estimate_block_subspaces(Y, k, b)

    trials = []
    for s_nom, s_post in trial_seeds:
        trials.append((est(P["nominal_samples"] + 1, P["nominal_samples"], s_nom), est(1, P["post_samples"], s_post)))

    summary: dict[str, Any] = {"families": {}, "seed": spec.seed, "version": __version__, **setting.extra}
    curves: list[dict] = []
    refs = {}
    for fname, fam in setting.families.items():
        cfg = DetectorConfig(setting.u0, fam, b=b)
        entry: dict[str, Any] = {}
        if P["c_list"] is None:
            c, est_ = calibrate_c(cfg, cal0, cal1)
            c_values = [c]
            entry["calibration"] = est_.__dict__
        else:
            c_values = [float(c) for c in P["c_list"]]
        entry["c"] = c_values
        for c in c_values:
            T0 = [cusum_trace(drift_sequence(cfg, nom), c) for nom, _ in trials]
            T1 = [cusum_trace(drift_sequence(cfg, post), c) for _, post in trials]
            etas = P["eta_grid"] if P["eta_grid"] is not None else eta_grid(T0, T1, P["n_eta"])
            rows = arl_rows(T0, T1, [float(e) for e in etas], fname)
            for r in rows:
                r["c"] = c
            curves.extend(rows)
            refs[(fname, c)] = reference_curve(T0, T1)
        summary["families"][fname] = entry

    names = list(setting.families)
    prior, ref_name = names[0], names[-1]
    if P["c_list"] is None and prior != ref_name:
        c_r = summary["families"][ref_name]["c"][0]
        rows_p = [r for r in curves if r["family"] == prior]
        summary["dominance"] = {
            "family": prior,
            "reference": ref_name,
            "fraction": dominance_fraction(rows_p, *refs[(ref_name, c_r)]),
        }
    art = RunArtifacts(summary, curves=curves)

    def writers(out: Path) -> dict[str, Path]:
        files = {}
        if P["c_list"] is None:
            write_arl_csv(out / "arl.csv", curves)
            files["arl"] = out / "arl.csv"
        else:
            for i, c in enumerate(float(c) for c in P["c_list"]):
                name = f"arl_c{i}.csv"
                write_arl_csv(out / name, [r for r in curves if r["c"] == c])
                files[name] = out / name
        write_edge_list_pair(out, setting)
        write_subspace_csv(setting.u0, out / "u0.csv")
        files["u0"] = out / "u0.csv"
        return files

    return _finish(spec, art, writers)


def write_edge_list_pair(out: Path, setting: _Setting):
    write_edge_list(Graph.from_adjacency(setting.S0.matrix), out / "graph0.txt")
    write_edge_list(Graph.from_adjacency(setting.S1.matrix), out / "graph1.txt")


# -- recipes ----------------------------------------------------------------


def spike_trace_setting(params: dict, seed: int):
    """Graphs, filter and nominal subspace for the ER to BA experiment."""
    ss = np.random.SeedSequence(seed)
    s_g0, s_g1, s_stream, s_cal0, s_cal1 = ss.spawn(5)
    n = params["n"]
    g0 = erdos_renyi(n, _density(params), s_g0)
    g1 = barabasi_albert(n, params["m"], s_g1)
    S0, S1 = shift_operator(g0), shift_operator(g1)
    H = FilterCoefficients(tuple(params["filter"]))
    u0 = dominant_subspace_of(H, S0, params["k"])
    return S0, S1, H, u0, (s_stream, s_cal0, s_cal1)


def experiment_spike_trace(spec: ExperimentSpec) -> RunArtifacts:
    """CUSUM traces of one ER to BA stream for several correction parameters."""
    P = spec.params
    S0, S1, H, u0, (s_stream, s_cal0, s_cal1) = spike_trace_setting(P, spec.seed)
    fam = _family(P["family"])
    base = DetectorConfig(u0, fam, b=P["b"])
    Y = _stream(S0, S1, H, P["tau"], P["length"], s_stream)

    c_values = {f"c{_g(c)}": float(c) for c in P["c_list"]}
    summary: dict[str, Any] = {"seed": spec.seed, "version": __version__, "tau": P["tau"]}
    if P["calibrate"]:
        L = P["calib_length"]
        cal0 = _blocks(_stream(S0, S1, H, L + 1, L, s_cal0), P["b"])
        cal1 = _blocks(_stream(S0, S1, H, 1, L, s_cal1), P["b"])
        c, est = calibrate_c(base, cal0, cal1)
        c_values["calibrated"] = c
        summary["calibration"] = est.__dict__
    summary["c"] = c_values

    traces = {}
    for label, c in c_values.items():
        res = run_detector(base.with_c(c), Y, full_trace=True)
        traces[label] = res.statistic
    art = RunArtifacts(summary, traces=traces)

    def writers(out: Path) -> dict[str, Path]:
        files = {}
        for label, S in traces.items():
            path = out / f"trace_{label}.csv"
            write_trace_csv(path, S)
            files[label] = path
        write_edge_list_pair(out, _Setting(S0, S1, H, u0, {}, {}))
        write_subspace_csv(u0, out / "u0.csv")
        return files

    return _finish(spec, art, writers)


def _trial_seeds(ss_children, trials):
    return [tuple(s.spawn(2)) for s in ss_children[:trials]]


def experiment_spike_arl(spec: ExperimentSpec) -> RunArtifacts:
    """ARL0/ARL1 curves for the spike prior and the blind detector on shared streams."""
    P = spec.params
    ss = np.random.SeedSequence(spec.seed)
    s_g0, s_g1, s_cal0, s_cal1, s_trials = ss.spawn(5)
    n = P["n"]
    g0 = erdos_renyi(n, _density(P), s_g0)
    g1 = barabasi_albert(n, P["m"], s_g1)
    S0, S1 = shift_operator(g0), shift_operator(g1)
    H = FilterCoefficients(tuple(P["filter"]))
    u0 = dominant_subspace_of(H, S0, P["k"])
    fams = {f: _family(f) for f in P["families"]}
    setting = _Setting(S0, S1, H, u0, fams, {})
    return _arl_experiment(spec, setting, (s_cal0, s_cal1, _trial_seeds(s_trials.spawn(P["trials"]), P["trials"])))


def community_setting(params: dict, seed: int):
    ss = np.random.SeedSequence(seed)
    s_g0, s_g1, s_cal0, s_cal1, s_trials = ss.spawn(5)
    n = params["n"]
    p = _density(params)
    q = params["q"] if params.get("q") is not None else min(1.0, params["q_factor"] * p)
    g0 = erdos_renyi(n, p, s_g0)
    # equal densities mean no change; a redraw would still swap ~n0^2 p edges
    g1 = g0 if q == p else planted_dense_block(g0, params["n0"], q, s_g1)
    S0, S1 = shift_operator(g0), shift_operator(g1)
    H = FilterCoefficients(tuple(params["filter"]))
    u0 = dominant_subspace_of(H, S0, params["k"])
    catalog, degenerate = community_catalog(n, p, q, params["n0_grid"], params["k"], H.alpha)
    fams = {f: _family(f, catalog) for f in params["families"]}
    extra = {"p": p, "q": q, "n0": params["n0"], "degenerate_catalog_cutoffs": degenerate}
    return _Setting(S0, S1, H, u0, fams, extra), (s_cal0, s_cal1, s_trials)


def experiment_community_arl(spec: ExperimentSpec) -> RunArtifacts:
    """ARL curves for an emerging dense community: cutoff catalog versus blind."""
    P = spec.params
    setting, (s_cal0, s_cal1, s_trials) = community_setting(P, spec.seed)
    return _arl_experiment(spec, setting, (s_cal0, s_cal1, _trial_seeds(s_trials.spawn(P["trials"]), P["trials"])))


def false_alarm_rate(S: np.ndarray, end_times: Sequence[int], eta: float, ground_truth: int) -> float:
    """Fraction of blocks ending before ``ground_truth`` whose statistic is at or above ``eta``."""
    S = np.asarray(S)
    before = np.asarray(end_times) < ground_truth
    if not before.any():
        return 0.0
    return float(np.mean(S[before] >= eta))


def detection_delay(S: np.ndarray, end_times: Sequence[int], eta: float, ground_truth: int) -> int | None:
    """Samples from ``ground_truth`` up to the first block at or after it with ``S >= eta``."""
    for s, t in zip(S, end_times):
        if t >= ground_truth and s >= eta:
            return int(t - ground_truth + 1)
    return None


def detect_on_matrix(
    Y: np.ndarray,
    *,
    family: SubspaceFamily,
    c: float | None,
    eta: float,
    b: int,
    k: int,
    windowing: str,
    u0: Subspace | None = None,
    warmup: int = 0,
    margin: float = 2.0,
    ground_truth: int | None = None,
    full_trace: bool = True,
) -> tuple[DetectorConfig, DetectionResult, dict]:
    """Run the detector on a ``(T, n)`` array, estimating ``u0`` and ``c`` from a warm-up prefix if needed.

    Times in the returned summary are 1-based sample indices into ``Y``.
    """
    warmup = int(warmup or 0)
    if warmup >= len(Y):
        raise ValueError(f"warm-up of {warmup} samples leaves no data in a stream of {len(Y)}")
    info: dict[str, Any] = {}
    if u0 is None:
        if warmup < 1:
            raise ValueError("either u0 or a positive warm-up length is required")
        u0 = estimate_dominant_subspace(SignalBlock(Y[:warmup]), k)
        info["u0_source"] = f"warmup:{warmup}"
    if c is None:
        if warmup < 1:
            raise ValueError("either c or a positive warm-up length is required")
        cfg0 = DetectorConfig(u0, family, 0.0, eta, b, windowing)
        c, est = calibrate_c(cfg0, iter_blocks(Y[:warmup], b, windowing), margin=margin)
        info["calibration"] = est.__dict__
    cfg = DetectorConfig(u0, family, float(c), eta, b, windowing)
    res = run_detector(cfg, Y[warmup:], full_trace=full_trace or ground_truth is not None)
    res.end_times = [t + warmup for t in res.end_times]
    if ground_truth is not None:
        S = res.statistic
        info["ground_truth"] = int(ground_truth)
        info["false_alarm_rate"] = false_alarm_rate(S, res.end_times, eta, ground_truth)
        info["run_length"] = detection_delay(S, res.end_times, eta, ground_truth)
    return cfg, res, info


def detection_summary(cfg: DetectorConfig, res: DetectionResult, seed=None, **extra) -> dict:
    out = {
        "alarm_block": res.alarm_block,
        "alarm_time": res.end_times[res.alarm_block - 1] if res.alarm_block else None,
        "blocks_consumed": res.blocks_consumed,
        "config": cfg.echo(),
        "seed": seed,
        "version": __version__,
    }
    out.update(extra)
    return out


def experiment_csv_detect(spec: ExperimentSpec) -> RunArtifacts:
    """Sliding-window detection on a CSV stream; without ``input`` a spike-change stream is synthesized."""
    P = spec.params
    synthesized = None
    if P["input"] is None:
        ss = np.random.SeedSequence(spec.seed)
        s_g0, s_g1, s_stream = ss.spawn(3)
        n = P["n"]
        S0 = shift_operator(erdos_renyi(n, _density(P), s_g0))
        S1 = shift_operator(barabasi_albert(n, P["m"], s_g1))
        H = FilterCoefficients(tuple(P["filter"]))
        Y = _stream(S0, S1, H, P["tau"], P["length"], s_stream)
        synthesized = Y
        ground_truth = P["ground_truth"] if P["ground_truth"] is not None else P["tau"]
    else:
        Y, meta = read_signal_csv(P["input"])
        ground_truth = P["ground_truth"] if P["ground_truth"] is not None else meta.get("tau")
    u0 = read_subspace_csv(P["u0"]) if P["u0"] is not None else None
    fam = _family(P["family"])
    cfg, res, info = detect_on_matrix(
        Y, family=fam, c=P["c"], eta=float(P["eta"]), b=P["b"], k=P["k"], windowing=P["windowing"],
        u0=u0, warmup=P["warmup"] if (u0 is None or P["c"] is None) else 0,
        margin=P["margin"], ground_truth=ground_truth,
    )
    summary = detection_summary(cfg, res, spec.seed, **info)
    art = RunArtifacts(summary, traces={"trace": res.statistic})

    def writers(out: Path) -> dict[str, Path]:
        files = {}
        write_trace_csv(out / "trace.csv", res.statistic, cfg.eta)
        files["trace"] = out / "trace.csv"
        if synthesized is not None:
            write_signal_csv(synthesized, out / "stream.csv", tau=P["tau"])
            files["stream"] = out / "stream.csv"
        write_subspace_csv(cfg.u0, out / "u0.csv")
        files["u0"] = out / "u0.csv"
        return files

    return _finish(spec, art, writers)


EXPERIMENTS: dict[str, Callable[[ExperimentSpec], RunArtifacts]] = {
    "spike-trace": experiment_spike_trace,
    "spike-arl": experiment_spike_arl,
    "community-arl": experiment_community_arl,
    "csv-detect": experiment_csv_detect,
}


def run_experiment(spec: ExperimentSpec) -> RunArtifacts:
    return EXPERIMENTS[spec.name](spec)


def replay(provenance: str | Path, out_dir: str | Path) -> RunArtifacts:
    """Re-run an experiment from its ``provenance.json`` into ``out_dir``."""
    record = json.loads(Path(provenance).read_text())
    spec = ExperimentSpec(record["experiment"], record["seed"], record["params"], Path(out_dir))
    return run_experiment(spec)
