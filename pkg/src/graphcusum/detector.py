"""CUSUM detection of a change in the dominant subspace of a signal stream.

Each block of signals gives a subspace estimate ``vhat``. The drift for the
block is ``d(u0, u1) - d(vhat, u1)`` where ``u1`` is the family member
closest to ``vhat``; the statistic is ``S <- max(0, S + drift - c)`` and an
alarm is raised the first time ``S >= eta``.
"""
from __future__ import annotations

import logging
import math
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Literal, Sequence

import numpy as np

from .subspace import (
    DegenerateBlockError,
    SignalBlock,
    Subspace,
    SubspaceFamily,
    estimate_dominant_subspace,
    nearest_family_member,
)

logger = logging.getLogger(__name__)

Windowing = Literal["disjoint", "sliding"]


class CalibrationError(RuntimeError):
    """Nominal and post-change drift means are not separated, so no valid ``c`` exists."""


class DegenerateBlockWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class DetectorConfig:
    u0: Subspace
    family: SubspaceFamily
    c: float = 0.0
    eta: float = math.inf
    b: int = 1
    windowing: Windowing = "disjoint"

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.b < 1:
            raise ValueError(f"block size must be >= 1, got {self.b}")
        if self.windowing not in ("disjoint", "sliding"):
            raise ValueError(f"unknown windowing {self.windowing!r}")
        if not math.isfinite(self.c):
            raise ValueError("c must be finite")
        self.family.check_compatible(self.u0)

    @property
    def k(self) -> int:
        return self.u0.k

    @property
    def n(self) -> int:
        return self.u0.n

    def with_c(self, c: float) -> "DetectorConfig":
        return replace(self, c=float(c))

    def with_eta(self, eta: float) -> "DetectorConfig":
        return replace(self, eta=float(eta))

    def echo(self) -> dict:
        """JSON-friendly view of the scalar settings (infinite ``eta`` becomes ``None``)."""
        return {
            "family": self.family.name,
            "c": self.c,
            "eta": self.eta if math.isfinite(self.eta) else None,
            "k": self.k,
            "b": self.b,
            "windowing": self.windowing,
            "n": self.n,
        }


@dataclass(frozen=True)
class CusumState:
    s: float = 0.0
    ell: int = 0
    alarm_at: int | None = None


@dataclass(frozen=True)
class DriftEstimate:
    mean_nominal: float
    std_nominal: float
    n_nominal: int
    mean_post: float | None = None
    std_post: float | None = None
    n_post: int = 0


def drift_statistic(cfg: DetectorConfig, vhat: Subspace) -> float:
    """``d(u0, u1) - d(vhat, u1)`` for the member ``u1`` nearest to ``vhat``."""
    m = nearest_family_member(cfg.family, vhat, cfg.u0)
    return m.d_u0_u1 - m.d_vhat_u1


def cusum_step(state: CusumState, cfg: DetectorConfig, vhat: Subspace) -> CusumState:
    return _advance(state, drift_statistic(cfg, vhat), cfg.c, cfg.eta)


def _advance(state: CusumState, drift: float, c: float, eta: float) -> CusumState:
    s = max(0.0, state.s + (drift - c))
    ell = state.ell + 1
    alarm = state.alarm_at
    if alarm is None and s >= eta:
        alarm = ell
    return CusumState(s, ell, alarm)


# -- blocking ---------------------------------------------------------------


def _values(sig) -> np.ndarray:
    return np.asarray(getattr(sig, "values", sig), dtype=float)


def iter_blocks(stream: Iterable, b: int, windowing: Windowing = "disjoint") -> Iterator[SignalBlock]:
    """Cut a stream into blocks of ``b`` signals.

    ``disjoint`` emits consecutive non-overlapping blocks and drops a
    trailing partial block. ``sliding`` emits a block for every sample once
    the first ``b`` have arrived (stride one).
    """
    buf: deque[np.ndarray] = deque(maxlen=b)
    ell = 0
    n = None
    for sig in stream:
        y = _values(sig)
        if n is None:
            n = y.shape[0]
        elif y.shape[0] != n:
            raise ValueError(f"signal of length {y.shape[0]} in a stream of dimension {n}")
        buf.append(y)
        if len(buf) == b:
            ell += 1
            yield SignalBlock(np.vstack(buf), ell)
            if windowing == "disjoint":
                buf.clear()


def block_end_time(ell: int, b: int, windowing: Windowing = "disjoint") -> int:
    """1-based index of the last sample in block ``ell``."""
    return ell * b if windowing == "disjoint" else b + ell - 1


def estimate_block_subspaces(stream: Iterable, k: int, b: int, windowing: Windowing = "disjoint") -> list[Subspace | None]:
    """Subspace estimate per block; ``None`` marks an all-zero block."""
    out = []
    for block in iter_blocks(stream, b, windowing):
        try:
            out.append(estimate_dominant_subspace(block, k))
        except DegenerateBlockError:
            out.append(None)
    return out


def drift_sequence(cfg: DetectorConfig, subspaces: Sequence[Subspace | None]) -> np.ndarray:
    """Drift values per block, skipping degenerate (``None``) blocks."""
    return np.array([drift_statistic(cfg, v) for v in subspaces if v is not None], dtype=float)


def cusum_trace(drifts: Sequence[float], c: float) -> np.ndarray:
    """The statistic after every block, never stopping."""
    S = np.empty(len(drifts))
    s = 0.0
    for i, d in enumerate(drifts):
        s = max(0.0, s + (float(d) - c))
        S[i] = s
    return S


def first_alarm(S: np.ndarray, eta: float) -> int | None:
    """1-based index of the first block with ``S >= eta``."""
    hits = np.flatnonzero(np.asarray(S) >= eta)
    return int(hits[0]) + 1 if hits.size else None


def renewal_run_lengths(drifts: Sequence[float], c: float, eta: float) -> tuple[list[int], int]:
    """Run lengths of a CUSUM restarted from zero after each alarm.

    Returns the completed run lengths and the length of the unfinished run at
    the end of the sequence.
    """
    runs, s, cur = [], 0.0, 0
    for d in drifts:
        cur += 1
        s = max(0.0, s + (float(d) - c))
        if s >= eta:
            runs.append(cur)
            s, cur = 0.0, 0
    return runs, cur


# -- running ----------------------------------------------------------------


@dataclass
class DetectionResult:
    alarm_block: int | None
    trace: list[tuple[int, float]] = field(default_factory=list)
    end_times: list[int] = field(default_factory=list)
    gammas: list = field(default_factory=list)
    drifts: list[float] = field(default_factory=list)
    skipped: int = 0

    @property
    def blocks_consumed(self) -> int:
        return len(self.trace)

    @property
    def statistic(self) -> np.ndarray:
        return np.array([s for _, s in self.trace])


def run_detector(cfg: DetectorConfig, stream: Iterable, *, full_trace: bool = False) -> DetectionResult:
    """Run the CUSUM recursion over ``stream``.

    Stops at the first alarm unless ``full_trace`` is set, in which case the
    whole stream is consumed and ``alarm_block`` still reports the first
    crossing. All-zero blocks are skipped with a warning and leave the state
    untouched.
    """
    state = CusumState()
    res = DetectionResult(None)
    for block in iter_blocks(stream, cfg.b, cfg.windowing):
        if state.alarm_at is not None and not full_trace:
            break
        try:
            vhat = estimate_dominant_subspace(block, cfg.k)
        except DegenerateBlockError:
            warnings.warn(f"skipping all-zero block {block.block_index}", DegenerateBlockWarning, stacklevel=2)
            res.skipped += 1
            continue
        m = nearest_family_member(cfg.family, vhat, cfg.u0)
        drift = m.d_u0_u1 - m.d_vhat_u1
        state = _advance(state, drift, cfg.c, cfg.eta)
        res.trace.append((state.ell, state.s))
        res.end_times.append(block_end_time(block.block_index, cfg.b, cfg.windowing))
        res.gammas.append(m.gamma)
        res.drifts.append(drift)
    res.alarm_block = state.alarm_at
    return res


def calibrate_c(
    cfg: DetectorConfig,
    nominal_blocks: Iterable[SignalBlock],
    post_blocks: Iterable[SignalBlock] | None = None,
    *,
    margin: float = 2.0,
    min_separation: float = 2.0,
) -> tuple[float, DriftEstimate]:
    """Choose ``c`` so the expected increment is negative before and positive after the change.

    With post-change blocks the midpoint of the two drift means is returned.
    The means must be separated by more than ``min_separation`` standard
    errors of their difference, otherwise :class:`CalibrationError` is
    raised (``min_separation=0`` only requires the post mean to be larger).
    Without post-change data, ``c = mean + margin * std`` of the nominal
    drift. ``cfg.c`` is ignored.
    """
    d0 = _block_drifts(cfg, nominal_blocks)
    if d0.size < 30:
        raise ValueError(f"need at least 30 nominal blocks, got {d0.size}")
    m0, s0 = float(d0.mean()), float(d0.std(ddof=1))
    if post_blocks is None:
        est = DriftEstimate(m0, s0, d0.size)
        return m0 + margin * s0, est
    d1 = _block_drifts(cfg, post_blocks)
    if d1.size < 2:
        raise ValueError(f"need at least 2 post-change blocks, got {d1.size}")
    m1, s1 = float(d1.mean()), float(d1.std(ddof=1))
    est = DriftEstimate(m0, s0, d0.size, m1, s1, d1.size)
    se = math.sqrt(s0**2 / d0.size + s1**2 / d1.size)
    if not m1 - m0 > min_separation * se:
        raise CalibrationError(
            f"post-change drift mean {m1:.6g} is not above nominal mean {m0:.6g} "
            f"by {min_separation:g} standard errors ({se:.3g})"
        )
    return 0.5 * (m0 + m1), est


def _block_drifts(cfg: DetectorConfig, blocks: Iterable[SignalBlock]) -> np.ndarray:
    out = []
    for block in blocks:
        try:
            out.append(drift_statistic(cfg, estimate_dominant_subspace(block, cfg.k)))
        except DegenerateBlockError:
            continue
    return np.array(out, dtype=float)


@dataclass(frozen=True)
class RunLengthEstimate:
    mean: float
    stderr: float
    censored_frac: float
    run_lengths: tuple[int, ...]
    censored: tuple[bool, ...]

    @property
    def n_trials(self) -> int:
        return len(self.run_lengths)


def summarize_run_lengths(lengths: Sequence[int], censored: Sequence[bool]) -> RunLengthEstimate:
    x = np.asarray(lengths, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return RunLengthEstimate(
        float(x.mean()), se, float(np.mean(censored)), tuple(int(v) for v in lengths), tuple(bool(v) for v in censored)
    )


def measure_run_lengths(
    cfg: DetectorConfig,
    stream_factory: Callable[[int, str], Iterable],
    n_trials: int,
    mode: Literal["nominal", "post"] = "nominal",
    *,
    max_blocks: int | None = None,
) -> RunLengthEstimate:
    """Average blocks to alarm over independent trials.

    ``stream_factory(trial, mode)`` must return a fresh stream: purely
    nominal for ``mode="nominal"`` and post-change from the first sample for
    ``mode="post"``. Trials without an alarm count their consumed blocks (or
    ``max_blocks``) and are reported as censored.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    lengths, censored = [], []
    for trial in range(n_trials):
        stream = stream_factory(trial, mode)
        if max_blocks is not None:
            stream = _take_blocks(stream, max_blocks, cfg)
        res = run_detector(cfg, stream)
        if res.alarm_block is None:
            lengths.append(res.blocks_consumed)
            censored.append(True)
        else:
            lengths.append(res.alarm_block)
            censored.append(False)
    return summarize_run_lengths(lengths, censored)


def _take_blocks(stream: Iterable, max_blocks: int, cfg: DetectorConfig) -> Iterator:
    n_samples = block_end_time(max_blocks, cfg.b, cfg.windowing)
    for t, sig in enumerate(stream):
        if t >= n_samples:
            return
        yield sig
