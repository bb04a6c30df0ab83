"""Subspaces, block-wise subspace estimation and post-change subspace families."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, NamedTuple, Sequence, TextIO

import numpy as np

ORTHO_TOL = 1e-10


class DegenerateSpectrumWarning(UserWarning):
    """The requested dominant subspace is not uniquely defined."""


class DegenerateBlockError(ValueError):
    """A signal block has an all-zero sample covariance."""


class SubspaceFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Subspace:
    """Span of the orthonormal columns of ``basis`` (shape ``(n, k)``)."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2:
            raise ValueError(f"basis must be 2-D, got shape {B.shape}")
        n, k = B.shape
        if not 1 <= k <= n:
            raise ValueError(f"need 1 <= k <= n, got basis of shape {B.shape}")
        err = np.max(np.abs(B.T @ B - np.eye(k)))
        if err > ORTHO_TOL:
            raise ValueError(f"basis columns are not orthonormal (max error {err:.3g})")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_vector(cls, v) -> "Subspace":
        v = np.asarray(v, dtype=float)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise DegenerateBlockError("cannot span a subspace with the zero vector")
        return cls((v / nrm)[:, None])

    @classmethod
    def from_columns(cls, M) -> "Subspace":
        """Orthonormalize arbitrary full-rank columns with QR."""
        Q, _ = np.linalg.qr(np.asarray(M, dtype=float))
        return cls(Q)

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


def one_hot(n: int, i: int) -> Subspace:
    e = np.zeros(n)
    e[i] = 1.0
    return Subspace(e)


# -- distances --------------------------------------------------------------


def _check_pair(u: Subspace, v: Subspace):
    if u.basis.shape != v.basis.shape:
        raise ValueError(f"subspace shapes differ: {u.basis.shape} vs {v.basis.shape}")


def sin_theta_distance(u: Subspace, v: Subspace) -> float:
    """Frobenius norm of the sines of the principal angles between ``u`` and ``v``.

    Mathematically ``sqrt(k - ||U^T V||_F^2)``. It is evaluated as the norm of
    the residual ``V - U (U^T V)``, which is the same quantity for orthonormal
    bases but keeps full relative precision when the subspaces nearly
    coincide. The result is clipped to ``[0, sqrt(k)]``.
    """
    _check_pair(u, v)
    U, V = u.basis, v.basis
    if np.array_equal(U, V):
        return 0.0
    d = float(np.linalg.norm(V - U @ (U.T @ V)))
    return min(d, float(np.sqrt(u.k)))


def sin_theta_distance_gram(u: Subspace, v: Subspace) -> float:
    """``sqrt(k - ||U^T V||_F^2)`` evaluated literally, clamped at zero."""
    _check_pair(u, v)
    G = u.basis.T @ v.basis
    return float(np.sqrt(max(0.0, u.k - float(np.sum(G * G)))))


def principal_angles(u: Subspace, v: Subspace) -> np.ndarray:
    """Principal angles (radians, ascending).

    Cosines are the singular values of ``U^T V`` and sines those of the
    residual ``V - U U^T V``. Angles below 45 degrees are taken from the
    sines, larger ones from the cosines, so both ends keep full precision.
    """
    _check_pair(u, v)
    G = u.basis.T @ v.basis
    cos = np.clip(np.linalg.svd(G, compute_uv=False), 0.0, 1.0)
    sin = np.clip(np.sort(np.linalg.svd(v.basis - u.basis @ G, compute_uv=False)), 0.0, 1.0)
    return np.where(cos**2 >= 0.5, np.arcsin(sin), np.arccos(cos))


# -- block estimation -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SignalBlock:
    """``b`` consecutive signals stored as rows of ``samples`` (shape ``(b, n)``)."""

    samples: np.ndarray
    block_index: int = 1

    def __post_init__(self):
        Y = np.asarray(self.samples, dtype=float)
        if Y.ndim == 1:
            Y = Y[None, :]
        if Y.ndim != 2 or Y.shape[0] < 1:
            raise ValueError("a signal block needs at least one signal")
        object.__setattr__(self, "samples", Y)

    @property
    def b(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]


def sample_covariance(block: SignalBlock) -> np.ndarray:
    """Uncentered sample covariance ``(1/b) sum_t y_t y_t^T``."""
    Y = block.samples
    C = Y.T @ Y / Y.shape[0]
    return 0.5 * (C + C.T)


def estimate_dominant_subspace(block: SignalBlock, k: int) -> Subspace:
    """Span of the ``k`` leading eigenvectors of the block's sample covariance.

    A single signal with ``k = 1`` is returned as the signal scaled to unit
    norm, which is exactly the leading eigenvector of its rank-one
    covariance.
    """
    if not 1 <= k <= block.n:
        raise ValueError(f"k must lie in [1, {block.n}], got {k}")
    Y = block.samples
    if not np.any(Y):
        raise DegenerateBlockError(f"block {block.block_index} is identically zero")
    if block.b == 1 and k == 1:
        return Subspace.from_vector(Y[0])
    w, V = np.linalg.eigh(sample_covariance(block))
    return Subspace(V[:, ::-1][:, :k])


# -- post-change families ---------------------------------------------------


class FamilyKind(enum.Enum):
    BLIND = "blind"
    DELTA_SPIKE = "spike"
    CATALOG = "catalog"


class FamilyMatch(NamedTuple):
    gamma: Hashable | None
    u1: Subspace
    d_vhat_u1: float
    d_u0_u1: float


@dataclass(frozen=True, eq=False)
class SubspaceFamily:
    """Prior on the post-change dominant subspace.

    ``BLIND`` is the set of all k-dimensional subspaces, ``DELTA_SPIKE`` the
    one-hot lines ``e_gamma`` (k = 1 only) and ``CATALOG`` an explicit list of
    ``(gamma, subspace)`` members.
    """

    kind: FamilyKind
    members: tuple[tuple[Hashable, Subspace], ...] = ()

    def __post_init__(self):
        if self.kind is FamilyKind.CATALOG:
            if not self.members:
                raise ValueError("catalog family needs at least one member")
            shapes = {s.basis.shape for _, s in self.members}
            if len(shapes) != 1:
                raise ValueError(f"catalog members disagree in shape: {sorted(shapes)}")
        elif self.members:
            raise ValueError(f"{self.kind.value} family takes no members")

    @classmethod
    def blind(cls) -> "SubspaceFamily":
        return cls(FamilyKind.BLIND)

    @classmethod
    def delta_spike(cls) -> "SubspaceFamily":
        return cls(FamilyKind.DELTA_SPIKE)

    @classmethod
    def catalog(cls, members: Sequence[tuple[Hashable, Subspace]] | Sequence[Subspace]) -> "SubspaceFamily":
        items = []
        for i, m in enumerate(members):
            items.append((i, m) if isinstance(m, Subspace) else (m[0], m[1]))
        return cls(FamilyKind.CATALOG, tuple(items))

    @property
    def name(self) -> str:
        return self.kind.value

    def check_compatible(self, u0: Subspace):
        if self.kind is FamilyKind.DELTA_SPIKE and u0.k != 1:
            raise ValueError("delta-spike family requires k = 1")
        if self.kind is FamilyKind.CATALOG:
            shape = self.members[0][1].basis.shape
            if u0.basis.shape != shape:
                raise ValueError(f"u0 shape {u0.basis.shape} does not match catalog shape {shape}")


def nearest_family_member(family: SubspaceFamily, vhat: Subspace, u0: Subspace) -> FamilyMatch:
    """Member of ``family`` closest to ``vhat`` plus the two distances the drift needs.

    For the delta-spike family the closest spike sits at the largest-magnitude
    entry of ``vhat`` and both distances have closed forms; catalog scans
    break ties towards the earliest member.
    """
    _check_pair(u0, vhat)
    if family.kind is FamilyKind.BLIND:
        return FamilyMatch(None, vhat, 0.0, sin_theta_distance(u0, vhat))

    if family.kind is FamilyKind.DELTA_SPIKE:
        if vhat.k != 1:
            raise ValueError("delta-spike family requires k = 1")
        v = vhat.basis[:, 0]
        g = int(np.argmax(np.abs(v)))
        d_v = float(np.sqrt(max(0.0, 1.0 - v[g] ** 2)))
        d_u0 = float(np.sqrt(max(0.0, 1.0 - u0.basis[g, 0] ** 2)))
        return FamilyMatch(g, one_hot(vhat.n, g), d_v, d_u0)

    family.check_compatible(vhat)
    dists = [sin_theta_distance(m, vhat) for _, m in family.members]
    i = int(np.argmin(dists))
    gamma, u1 = family.members[i]
    return FamilyMatch(gamma, u1, dists[i], sin_theta_distance(u0, u1))


# -- serialization ----------------------------------------------------------


def write_subspace_csv(u: Subspace, dest: str | Path | TextIO):
    """``# n=<n> k=<k>`` header then ``n`` rows of ``k`` comma-separated values."""
    lines = [f"# n={u.n} k={u.k}"]
    lines += [",".join(format(float(x), ".17g") for x in row) for row in u.basis]
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def read_subspace_csv(src: str | Path) -> Subspace:
    lines = Path(src).read_text().splitlines()
    meta, rows = {}, []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                if key in ("n", "k"):
                    meta[key] = int(val)
            continue
        try:
            rows.append([float(c) for c in line.split(",")])
        except ValueError:
            raise SubspaceFormatError(f"{src}:{lineno}: non-numeric cell") from None
        if len(rows[-1]) != len(rows[0]):
            raise SubspaceFormatError(f"{src}:{lineno}: ragged row")
    if not rows:
        raise SubspaceFormatError(f"{src}: no data rows")
    B = np.array(rows)
    if meta.get("n", B.shape[0]) != B.shape[0] or meta.get("k", B.shape[1]) != B.shape[1]:
        raise SubspaceFormatError(f"{src}: header {meta} does not match data shape {B.shape}")
    try:
        return Subspace(B)
    except ValueError as exc:
        raise SubspaceFormatError(f"{src}: {exc}") from None
