"""Random graph models, shift operators and their spectral decompositions.

Nodes are labelled ``0..n-1``. Every generator takes an explicit seed and is
deterministic given its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

ShiftKind = Literal["adjacency", "laplacian"]


class GraphFormatError(ValueError):
    """Raised when an edge-list file cannot be parsed."""


def _normalize_edges(n: int, edges: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"self-loop at node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) outside node range [0, {n})")
        out.add((i, j) if i < j else (j, i))
    return frozenset(out)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored once as ``(i, j)`` with ``i < j``; the pair ``(j, i)``
    is implied.
    """

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be positive, got {self.n}")
        object.__setattr__(self, "edges", _normalize_edges(self.n, self.edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        if self.edges:
            idx = np.array(sorted(self.edges))
            A[idx[:, 0], idx[:, 1]] = 1.0
            A[idx[:, 1], idx[:, 0]] = 1.0
        return A

    @classmethod
    def from_adjacency(cls, A: np.ndarray) -> "Graph":
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValueError("adjacency must have zero diagonal")
        i, j = np.nonzero(np.triu(A, 1))
        return cls(A.shape[0], frozenset(zip(i.tolist(), j.tolist())))


def _check_prob(name: str, p: float):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def _upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def erdos_renyi(n: int, p: float, seed: int | None = None) -> Graph:
    """G(n, p) graph: each unordered pair is an edge independently with prob. ``p``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _check_prob("p", p)
    rng = np.random.default_rng(seed)
    i, j = _upper_pairs(n)
    keep = rng.random(i.size) < p
    return Graph(n, frozenset(zip(i[keep].tolist(), j[keep].tolist())))


def barabasi_albert(n: int, m: int = 1, seed: int | None = None) -> Graph:
    """Preferential-attachment graph grown from ``m`` isolated seed nodes.

    Node ``m`` links to every seed node (their zero degrees count as one, so
    the draw is forced). Each later node links to ``m`` distinct existing
    nodes chosen with probability proportional to degree. For ``m = 1`` the
    result is a random tree with ``n - 1`` edges; in general it has
    ``(n - m) * m`` edges.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    deg = np.zeros(n)
    edges = []
    for t in range(m, n):
        if t == m:
            targets = np.arange(m)
        else:
            w = deg[:t]
            targets = rng.choice(t, size=m, replace=False, p=w / w.sum())
        for s in targets:
            edges.append((int(s), t))
            deg[s] += 1
        deg[t] += m
    return Graph(n, frozenset(edges))


def planted_dense_block(base: Graph, n0: int, q: float, seed: int | None = None) -> Graph:
    """Redraw every pair inside the leading ``n0 x n0`` block with probability ``q``.

    Pairs with at least one endpoint ``>= n0`` are copied from ``base``.
    """
    if not 1 <= n0 <= base.n:
        raise ValueError(f"n0 must lie in [1, {base.n}], got {n0}")
    _check_prob("q", q)
    rng = np.random.default_rng(seed)
    outside = {(i, j) for (i, j) in base.edges if j >= n0}
    i, j = _upper_pairs(n0)
    keep = rng.random(i.size) < q
    inside = set(zip(i[keep].tolist(), j[keep].tolist()))
    return Graph(base.n, frozenset(outside | inside))


@dataclass(frozen=True, eq=False)
class ShiftOperator:
    """Symmetric matrix whose off-diagonal support is the edge set of a graph."""

    matrix: np.ndarray
    kind: ShiftKind = "adjacency"

    def __post_init__(self):
        S = np.array(self.matrix, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError(f"shift operator must be square, got shape {S.shape}")
        if not np.array_equal(S, S.T):
            raise ValueError("shift operator must be exactly symmetric")
        S.setflags(write=False)
        object.__setattr__(self, "matrix", S)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def shift_operator(g: Graph, kind: ShiftKind = "adjacency") -> ShiftOperator:
    """Adjacency ``A`` or combinatorial Laplacian ``L = diag(A 1) - A`` of ``g``."""
    A = g.adjacency()
    if kind == "adjacency":
        return ShiftOperator(A, "adjacency")
    if kind == "laplacian":
        return ShiftOperator(np.diag(A.sum(axis=1)) - A, "laplacian")
    raise ValueError(f"unknown shift kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs sorted by descending signed eigenvalue; ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive.

    Ties go to the lowest row index (``argmax`` semantics).
    """
    V = np.array(V, dtype=float, copy=True)
    if V.size == 0:
        return V
    rows = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[rows, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def eigendecompose(s: ShiftOperator | np.ndarray, *, atol: float = 1e-12) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition with a deterministic sign convention.

    Accepts a :class:`ShiftOperator` or any square array that is symmetric up
    to ``atol`` relative to its largest entry (sample covariances are only
    symmetric up to roundoff).
    """
    M = s.matrix if isinstance(s, ShiftOperator) else np.asarray(s, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > atol * scale:
        raise ValueError("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(-w, kind="stable")
    return SpectralDecomposition(w[order], fix_signs(V[:, order]))


def write_edge_list(g: Graph, path: str | Path):
    """Write ``n=<count>`` followed by one ``i j`` line per edge."""
    lines = [f"n={g.n}"] + [f"{i} {j}" for i, j in sorted(g.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> Graph:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].strip().startswith("n="):
        raise GraphFormatError(f"{path}:1: missing 'n=<count>' header")
    try:
        n = int(text[0].strip()[2:])
    except ValueError:
        raise GraphFormatError(f"{path}:1: bad node count {text[0]!r}") from None
    edges = []
    for lineno, line in enumerate(text[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'i j', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: non-integer node in {line!r}") from None
    try:
        return Graph(n, frozenset(edges))
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None


def er_density(n: int) -> float:
    """Default ER density ``2 ln(n) / n`` used by the experiments."""
    return min(1.0, 2.0 * math.log(n) / n)
