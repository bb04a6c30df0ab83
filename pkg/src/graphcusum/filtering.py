"""Polynomial graph filters and synthetic graph-signal streams.

A filter ``H(S) = sum_k alpha_k S^k`` is applied without forming matrix
powers. Streams emit ``H0(S0) w`` before the change time and ``H1(S1) w``
from it onwards, where ``w`` is white noise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence, TextIO

import numpy as np

from .graphs import ShiftOperator, eigendecompose
from .subspace import DegenerateSpectrumWarning, Subspace

NoiseSampler = Callable[[np.random.Generator, int], np.ndarray]


class SignalFormatError(ValueError):
    """Raised for malformed signal CSV input; the message carries the line number."""


@dataclass(frozen=True)
class FilterCoefficients:
    """Polynomial coefficients ``(alpha_0, ..., alpha_T)`` of a graph filter."""

    alpha: tuple[float, ...]
    allow_zero: bool = False

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        if not alpha:
            raise ValueError("filter needs at least one coefficient")
        if not np.all(np.isfinite(alpha)):
            raise ValueError("filter coefficients must be finite")
        if not self.allow_zero and not any(alpha):
            raise ValueError("all-zero filter; pass allow_zero=True to permit it")
        object.__setattr__(self, "alpha", alpha)

    @property
    def degree(self) -> int:
        return len(self.alpha) - 1


def _coeffs(c) -> FilterCoefficients:
    return c if isinstance(c, FilterCoefficients) else FilterCoefficients(tuple(c))


def filter_response(coeffs: FilterCoefficients | Sequence[float], lam: float | np.ndarray):
    """Scalar extension ``h(lambda) = sum_k alpha_k lambda^k`` (Horner form)."""
    alpha = _coeffs(coeffs).alpha
    lam = np.asarray(lam, dtype=float)
    out = np.full_like(lam, alpha[-1])
    for a in reversed(alpha[:-1]):
        out = out * lam + a
    return float(out) if out.ndim == 0 else out


def apply_filter(coeffs: FilterCoefficients | Sequence[float], shift: ShiftOperator, x: np.ndarray) -> np.ndarray:
    """Compute ``H(S) x`` by Horner recursion on shift-vector products.

    ``x`` may be a single signal of length ``n`` or an ``(n, m)`` stack of
    signals in columns.
    """
    alpha = _coeffs(coeffs).alpha
    S = shift.matrix
    x = np.asarray(x, dtype=float)
    if x.shape[0] != S.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} does not match shift dimension {S.shape[0]}")
    y = alpha[-1] * x
    for a in reversed(alpha[:-1]):
        y = S @ y + a * x
    return y


def theoretical_covariance(coeffs: FilterCoefficients | Sequence[float], shift: ShiftOperator) -> np.ndarray:
    """Covariance ``sum_i h(lambda_i)^2 v_i v_i^T`` of ``H(S) w`` for white ``w``."""
    dec = eigendecompose(shift)
    h2 = filter_response(coeffs, dec.eigenvalues) ** 2
    V = dec.eigenvectors
    C = (V * h2) @ V.T
    return 0.5 * (C + C.T)


def dominant_subspace_of(
    coeffs: FilterCoefficients | Sequence[float], shift: ShiftOperator, k: int, *, gap_tol: float = 1e-9
) -> Subspace:
    """Top-``k`` eigenvectors of the filtered-signal covariance.

    Eigenvectors are ranked by ``h(lambda)^2``; equal keys keep the lowest
    eigendecomposition index. A :class:`DegenerateSpectrumWarning` is issued
    when the k-th and (k+1)-th covariance eigenvalues are closer than
    ``gap_tol``, since the dominant subspace is then not unique.
    """
    n = shift.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    dec = eigendecompose(shift)
    h2 = np.asarray(filter_response(coeffs, dec.eigenvalues)) ** 2
    order = np.argsort(-h2, kind="stable")
    if k < n and h2[order[k - 1]] - h2[order[k]] < gap_tol:
        warnings.warn(
            f"covariance eigenvalues {k} and {k + 1} coincide; dominant subspace is not unique",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    return Subspace(dec.eigenvectors[:, order[:k]])


@dataclass(frozen=True)
class GraphSignal:
    values: np.ndarray
    time: int


def standard_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n)


@dataclass(frozen=True, eq=False)
class StreamConfig:
    """Single-change stream: samples ``t < tau`` come from the nominal pair.

    ``tau = length + 1`` means the change never happens inside the stream;
    ``tau = 1`` means every sample is post-change. Times are 1-based.
    """

    shift0: ShiftOperator
    shift1: ShiftOperator
    filter0: FilterCoefficients
    filter1: FilterCoefficients
    tau: int
    length: int
    noise_seed: int | np.random.SeedSequence | None = None
    noise: NoiseSampler = standard_normal

    def __post_init__(self):
        object.__setattr__(self, "filter0", _coeffs(self.filter0))
        object.__setattr__(self, "filter1", _coeffs(self.filter1))
        if self.shift0.n != self.shift1.n:
            raise ValueError("nominal and post-change shifts differ in dimension")
        if self.length < 0:
            raise ValueError("length must be nonnegative")
        if not 1 <= self.tau <= self.length + 1:
            raise ValueError(f"tau must lie in [1, length + 1] = [1, {self.length + 1}], got {self.tau}")

    @property
    def n(self) -> int:
        return self.shift0.n


def synthesize_stream(cfg: StreamConfig) -> Iterator[GraphSignal]:
    """Lazily yield ``cfg.length`` filtered-noise signals.

    The noise sequence depends only on ``noise_seed``, so two configs that
    differ only in ``tau`` agree on every sample before the earlier change.
    """
    rng = np.random.default_rng(cfg.noise_seed)
    for t in range(1, cfg.length + 1):
        w = np.asarray(cfg.noise(rng, cfg.n), dtype=float)
        if t < cfg.tau:
            y = apply_filter(cfg.filter0, cfg.shift0, w)
        else:
            y = apply_filter(cfg.filter1, cfg.shift1, w)
        yield GraphSignal(y, t)


def stream_matrix(signals: Iterable[GraphSignal | np.ndarray]) -> np.ndarray:
    """Stack a signal stream into a ``(T, n)`` array."""
    rows = [np.asarray(getattr(s, "values", s), dtype=float) for s in signals]
    if not rows:
        return np.zeros((0, 0))
    return np.vstack(rows)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_signal_csv(signals: Iterable[GraphSignal | np.ndarray], dest: str | Path | TextIO, *, tau: int | None = None):
    """Write one comma-separated row per time step under a ``# n=... tau=...`` header."""
    Y = stream_matrix(signals)
    header = f"# n={Y.shape[1]}" + (f" tau={tau}" if tau is not None else "")
    lines = [header] + [",".join(_fmt(v) for v in row) for row in Y]
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def parse_signal_csv(lines: Iterable[str], source: str = "<input>") -> tuple[np.ndarray, dict]:
    """Parse signal CSV text into a ``(T, n)`` array and header metadata.

    Comment lines start with ``#``; ``key=value`` tokens in the first comment
    line become integer metadata. Ragged rows and non-numeric cells raise
    :class:`SignalFormatError` naming the offending line.
    """
    meta: dict[str, int] = {}
    rows: list[list[float]] = []
    width = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not rows and not meta:
                for tok in line[1:].split():
                    key, sep, val = tok.partition("=")
                    if sep:
                        try:
                            meta[key] = int(val)
                        except ValueError:
                            raise SignalFormatError(f"{source}:{lineno}: bad header value {tok!r}") from None
            continue
        cells = line.split(",")
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise SignalFormatError(f"{source}:{lineno}: non-numeric cell in {line[:60]!r}") from None
        if not np.all(np.isfinite(row)):
            raise SignalFormatError(f"{source}:{lineno}: non-finite value")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SignalFormatError(f"{source}:{lineno}: expected {width} values, got {len(row)}")
        rows.append(row)
    if "n" in meta and width is not None and meta["n"] != width:
        raise SignalFormatError(f"{source}: header says n={meta['n']} but rows have {width} values")
    Y = np.array(rows, dtype=float) if rows else np.zeros((0, meta.get("n", 0)))
    return Y, meta


def read_signal_csv(src: str | Path | TextIO) -> tuple[np.ndarray, dict]:
    if hasattr(src, "read"):
        return parse_signal_csv(src.read().splitlines(), getattr(src, "name", "<stream>"))
    return parse_signal_csv(Path(src).read_text().splitlines(), str(src))
