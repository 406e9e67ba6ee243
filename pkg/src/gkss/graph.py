"""Simple undirected graphs stored as edge-indicator vectors.

Vertex pairs ``i < j`` are enumerated lexicographically, so a graph on ``n``
vertices is a boolean vector of length ``N = n(n-1)/2``. The module also holds
subgraph counts, change statistics and the summary histograms used by the
baseline tests and some kernels.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse


class InvalidPairError(ValueError):
    pass


class EdgeListParseError(ValueError):
    pass


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """Lexicographic index of the vertex pair ``(i, j)`` with ``i < j``."""
    if not (0 <= i < j < n):
        raise InvalidPairError(f"invalid vertex pair ({i}, {j}) for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def pair_of(s: int, n: int) -> tuple[int, int]:
    N = n_pairs(n)
    if not (0 <= s < N):
        raise InvalidPairError(f"edge index {s} out of range for n={n}")
    # number of pairs (a, b) with a >= i is (n-i)(n-i-1)/2; invert for i
    r = N - 1 - s
    k = int((math.isqrt(8 * r + 1) - 1) // 2)
    i = n - 2 - k
    j = s - (i * n - i * (i + 1) // 2) + i + 1
    return i, j


@functools.lru_cache(maxsize=64)
def _pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(n, 1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint arrays ``(I, J)`` such that edge ``s`` joins ``I[s]`` and ``J[s]``."""
    return _pair_arrays(n)


class Graph:
    """An immutable simple undirected graph on vertices ``0..n-1``.

    ``edges`` is the length-``N`` indicator vector; ``degrees`` is kept in step
    with it. Use :meth:`with_edge` to obtain modified copies.
    """

    __slots__ = ("n", "edges", "degrees", "_adj", "_key")

    def __init__(self, n: int, edges=None, degrees=None):
        if n < 1:
            raise ValueError("a graph needs at least one vertex")
        N = n_pairs(n)
        if edges is None:
            edges = np.zeros(N, dtype=bool)
        else:
            edges = np.array(edges, dtype=bool).reshape(-1)
            if edges.shape[0] != N:
                raise ValueError(f"expected {N} edge indicators for n={n}, got {edges.shape[0]}")
        edges.setflags(write=False)
        if degrees is None:
            degrees = _degrees_from_edges(n, edges)
        else:
            degrees = np.array(degrees, dtype=np.int64)
        degrees.setflags(write=False)
        self.n = n
        self.edges = edges
        self.degrees = degrees
        self._adj = None
        self._key = None

    # constructors -------------------------------------------------------

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, np.ones(n_pairs(n), dtype=bool))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "Graph":
        x = np.zeros(n_pairs(n), dtype=bool)
        for i, j in pairs:
            i, j = (i, j) if i < j else (j, i)
            x[pair_index(i, j, n)] = True
        return cls(n, x)

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        adj = np.asarray(adj)
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ValueError("adjacency matrix must be square")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("self-loops are not representable")
        rows, cols = pair_arrays(n)
        return cls(n, adj[rows, cols] != 0)

    # derived views ------------------------------------------------------

    @property
    def N(self) -> int:
        return self.edges.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        if self._adj is None:
            adj = np.zeros((self.n, self.n), dtype=bool)
            rows, cols = pair_arrays(self.n)
            adj[rows, cols] = self.edges
            adj |= adj.T
            adj.setflags(write=False)
            self._adj = adj
        return self._adj

    def sparse_adjacency(self) -> sparse.csr_matrix:
        rows, cols = pair_arrays(self.n)
        r, c = rows[self.edges], cols[self.edges]
        data = np.ones(2 * r.size)
        return sparse.csr_matrix(
            (data, (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(self.n, self.n)
        )

    @property
    def edge_count(self) -> int:
        return int(self.edges.sum())

    def edge_pairs(self) -> list[tuple[int, int]]:
        rows, cols = pair_arrays(self.n)
        return list(zip(rows[self.edges].tolist(), cols[self.edges].tolist()))

    def neighbours(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[v])

    # modification -------------------------------------------------------

    def with_edge(self, s: int, bit: bool) -> "Graph":
        """Copy with indicator ``s`` set to ``bit`` (``x^{(s,1)}`` / ``x^{(s,0)}``)."""
        if not (0 <= s < self.N):
            raise InvalidPairError(f"edge index {s} out of range for n={self.n}")
        bit = bool(bit)
        if bool(self.edges[s]) == bit:
            return self
        edges = self.edges.copy()
        edges[s] = bit
        i, j = pair_of(s, self.n)
        degrees = self.degrees.copy()
        step = 1 if bit else -1
        degrees[i] += step
        degrees[j] += step
        return Graph(self.n, edges, degrees)

    def toggled(self, s: int) -> "Graph":
        return self.with_edge(s, not self.edges[s])

    def check_degrees(self) -> bool:
        """Recompute degrees from scratch and compare with the cache."""
        return bool(np.array_equal(self.degrees, _degrees_from_edges(self.n, self.edges)))

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with vertex ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm)
        adj = np.zeros_like(self.adjacency)
        adj[np.ix_(perm, perm)] = self.adjacency
        return Graph.from_adjacency(adj)

    # identity -----------------------------------------------------------

    def key(self) -> bytes:
        if self._key is None:
            self._key = self.n.to_bytes(4, "little") + np.packbits(self.edges).tobytes()
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edge_count})"


def _degrees_from_edges(n: int, edges: np.ndarray) -> np.ndarray:
    rows, cols = pair_arrays(n)
    return (np.bincount(rows[edges], minlength=n) + np.bincount(cols[edges], minlength=n)).astype(
        np.int64
    )


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    return Graph(n, rng.random(n_pairs(n)) < p)


# ---------------------------------------------------------------------------
# sufficient statistics

STAT_KINDS = ("edges", "2star", "triangle", "kstar", "altkstar", "homophily")
SCALINGS = ("raw", "injection")


@dataclass(frozen=True)
class StatisticSpec:
    """One ERGM sufficient statistic.

    ``kind`` is one of ``edges``, ``2star``, ``triangle``, ``kstar`` (needs
    ``k``), ``altkstar`` (needs ``lam``) or ``homophily`` (needs the symmetric
    pair-weight matrix ``P``). ``scaling`` is ``raw`` (plain counts) or
    ``injection`` (edge-preserving injection counts divided by
    ``n(n-1)...(n-v_H+3)``).
    """

    kind: str
    scaling: str = "raw"
    k: int | None = None
    lam: float | None = None
    P: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"unknown scaling {self.scaling!r}")
        if self.kind == "kstar":
            if self.k is None or self.k < 2:
                raise ValueError("kstar needs k >= 2")
        if self.kind == "altkstar":
            if self.lam is None or not self.lam > 0:
                raise ValueError("altkstar needs lambda > 0")
        if self.kind == "homophily":
            if self.P is None:
                raise ValueError("homophily needs a pair-weight matrix P")
            P = np.asarray(self.P, dtype=float)
            if P.ndim != 2 or P.shape[0] != P.shape[1]:
                raise ValueError("homophily matrix must be square")
            if not np.allclose(P, P.T) or np.any(np.diag(P) != 0):
                raise ValueError("homophily matrix must be symmetric with zero diagonal")
            object.__setattr__(self, "P", P)
        if self.scaling == "injection" and self.kind in ("altkstar", "homophily"):
            raise ValueError(f"{self.kind} is not a subgraph count; injection scaling undefined")

    @property
    def edge_count(self) -> int:
        """Number of edges of the counted subgraph (``e_l``)."""
        return {"edges": 1, "2star": 2, "triangle": 3}.get(self.kind, self.k or 0)

    @property
    def is_subgraph_count(self) -> bool:
        return self.kind in ("edges", "2star", "triangle", "kstar")

    def validate_for(self, n: int) -> None:
        if self.kind == "kstar" and not (2 <= self.k <= n - 1):
            raise ValueError(f"kstar needs 2 <= k <= n-1, got k={self.k} for n={n}")
        if self.kind == "homophily" and self.P.shape[0] != n:
            raise ValueError(f"homophily matrix is {self.P.shape[0]}x{self.P.shape[0]}, graph has n={n}")

    def scale_factor(self, n: int) -> float:
        """Multiplier turning the raw count into the injection-scaled count."""
        if self.scaling == "raw":
            return 1.0
        if self.kind == "edges":
            return 2.0
        # t(H, x) = |Aut-free orderings| * raw count; divisor has v_H - 2 factors
        k = self.edge_count if self.kind != "triangle" else None
        if self.kind == "triangle":
            injections, v_h = 6, 3
        else:
            injections, v_h = math.factorial(k), k + 1
        divisor = math.prod(range(n - v_h + 3, n + 1))
        return injections / divisor

    def label(self) -> str:
        if self.kind == "kstar":
            return f"kstar:{self.k}"
        if self.kind == "altkstar":
            return f"altkstar:{self.lam}"
        return self.kind

    @classmethod
    def parse(cls, text: str, scaling: str = "raw", P=None) -> "StatisticSpec":
        """Parse ``edges``, ``2star``, ``triangle``, ``kstar:4``, ``altkstar:0.5`` or ``homophily``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        if name in ("edges", "2star", "triangle"):
            return cls(name, scaling)
        if name == "kstar":
            return cls("kstar", scaling, k=int(arg))
        if name == "altkstar":
            return cls("altkstar", scaling, lam=float(arg))
        if name == "homophily":
            return cls("homophily", scaling, P=P)
        raise ValueError(f"cannot parse statistic {text!r}")


def _altkstar_vertex(d: np.ndarray, lam: float) -> np.ndarray:
    # sum_{k>=2} r^{k-2} C(d, k) with r = -1/lam, by the binomial theorem
    r = -1.0 / lam
    d = np.asarray(d, dtype=float)
    return ((1.0 + r) ** d - 1.0 - r * d) / (r * r)


def _comb(d: np.ndarray, k: int) -> np.ndarray:
    from scipy.special import comb

    return comb(np.asarray(d), k, exact=False)


def _triangle_count(g: Graph) -> float:
    if g.n < 3 or g.edge_count == 0:
        return 0.0
    A = g.sparse_adjacency()
    return float((A @ A).multiply(A).sum() / 6.0)


def count_statistic(g: Graph, spec: StatisticSpec) -> float:
    spec.validate_for(g.n)
    d = g.degrees
    kind = spec.kind
    if kind == "edges":
        raw = float(g.edge_count)
    elif kind == "2star":
        raw = float(np.sum(d * (d - 1)) / 2)
    elif kind == "triangle":
        raw = _triangle_count(g)
    elif kind == "kstar":
        raw = float(np.sum(_comb(d, spec.k)))
    elif kind == "altkstar":
        raw = float(np.sum(_altkstar_vertex(d, spec.lam)))
    else:
        rows, cols = pair_arrays(g.n)
        raw = float(spec.P[rows[g.edges], cols[g.edges]].sum())
    return raw * spec.scale_factor(g.n)


def change_statistics(g: Graph, spec: StatisticSpec, indices=None) -> np.ndarray:
    """Change statistics ``t(x^{(s,1)}) - t(x^{(s,0)})`` for many edge indices.

    Closed forms on degrees / common neighbours; the value never depends on the
    current state of indicator ``s``.
    """
    spec.validate_for(g.n)
    rows, cols = pair_arrays(g.n)
    if indices is None:
        indices = np.arange(g.N)
    indices = np.asarray(indices, dtype=np.int64)
    I, J = rows[indices], cols[indices]
    present = g.edges[indices].astype(np.int64)
    kind = spec.kind
    if kind == "edges":
        out = np.ones(indices.shape[0])
    elif kind == "2star":
        out = (g.degrees[I] + g.degrees[J] - 2 * present).astype(float)
    elif kind == "triangle":
        adj = g.adjacency
        out = np.count_nonzero(adj[I] & adj[J], axis=1).astype(float)
    elif kind == "kstar":
        di = g.degrees[I] - present
        dj = g.degrees[J] - present
        out = _comb(di, spec.k - 1) + _comb(dj, spec.k - 1)
    elif kind == "altkstar":
        di = g.degrees[I] - present
        dj = g.degrees[J] - present
        f = functools.partial(_altkstar_vertex, lam=spec.lam)
        out = (f(di + 1) - f(di)) + (f(dj + 1) - f(dj))
    else:
        out = spec.P[I, J].astype(float)
    return out * spec.scale_factor(g.n)


def change_statistic(g: Graph, s: int, spec: StatisticSpec) -> float:
    if not (0 <= s < g.N):
        raise InvalidPairError(f"edge index {s} out of range for n={g.n}")
    return float(change_statistics(g, spec, [s])[0])


# ---------------------------------------------------------------------------
# summary histograms

SUMMARIES = ("degree", "espart", "dspart", "triad", "geodesic")


def shortest_path_matrix(g: Graph) -> np.ndarray:
    """All-pairs hop distances; unreachable pairs hold ``np.inf``."""
    return _distance_stack(g.adjacency[None])[0]


def _distance_stack(adj: np.ndarray) -> np.ndarray:
    # frontier expansion on a stack of adjacency matrices (G, n, n)
    G, n, _ = adj.shape
    dist = np.full((G, n, n), np.inf)
    idx = np.arange(n)
    dist[:, idx, idx] = 0.0
    reached = np.broadcast_to(np.eye(n, dtype=bool), (G, n, n)).copy()
    frontier = reached.copy()
    A = adj.astype(np.float32)
    for step in range(1, n):
        nxt = (frontier.astype(np.float32) @ A) > 0
        nxt &= ~reached
        if not nxt.any():
            break
        dist[nxt] = step
        reached |= nxt
        frontier = nxt
    return dist


def summary_distribution(g: Graph, which: str) -> np.ndarray:
    """Integer histogram of a network summary.

    ``degree``: vertices per degree ``0..n-1``. ``espart`` / ``dspart``:
    adjacent (resp. all) pairs per number of common neighbours ``0..n-2``.
    ``triad``: triples with 0, 1, 2, 3 edges. ``geodesic``: pairs per hop
    distance, index ``n`` counting unreachable pairs (index 0 stays empty).
    """
    n = g.n
    if which == "degree":
        return np.bincount(g.degrees, minlength=n).astype(np.int64)
    if which in ("espart", "dspart"):
        adj = g.adjacency.astype(np.int64)
        common = adj @ adj
        rows, cols = pair_arrays(n)
        cn = common[rows, cols]
        if which == "espart":
            cn = cn[g.edges]
        return np.bincount(cn, minlength=max(n - 1, 1)).astype(np.int64)
    if which == "triad":
        d = g.degrees
        t3 = int(round(_triangle_count(g)))
        t2 = int(np.sum(d * (d - 1)) // 2) - 3 * t3
        if g.edge_count:
            adj = g.adjacency
            rows, cols = pair_arrays(n)
            I, J = rows[g.edges], cols[g.edges]
            cn = np.count_nonzero(adj[I] & adj[J], axis=1)
            t1 = int(np.sum(n - d[I] - d[J] + cn))
        else:
            t1 = 0
        t0 = math.comb(n, 3) - t1 - t2 - t3
        return np.array([t0, t1, t2, t3], dtype=np.int64)
    if which == "geodesic":
        dist = shortest_path_matrix(g)
        rows, cols = pair_arrays(n)
        dd = dist[rows, cols]
        bins = np.where(np.isinf(dd), n, dd).astype(np.int64)
        return np.bincount(bins, minlength=n + 1).astype(np.int64)
    raise ValueError(f"unknown summary {which!r}; choose from {SUMMARIES}")


# ---------------------------------------------------------------------------
# edge-list text format


def parse_edge_list(text: str) -> Graph:
    """Parse ``n <count>`` followed by one ``i j`` pair per line (0-based)."""
    lines = text.splitlines()
    n = None
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise EdgeListParseError(f"line {lineno}: expected header 'n <count>', got {raw!r}")
            try:
                n = int(parts[1])
            except ValueError:
                raise EdgeListParseError(f"line {lineno}: vertex count is not an integer") from None
            if n < 1:
                raise EdgeListParseError(f"line {lineno}: vertex count must be positive")
            continue
        if len(parts) != 2:
            raise EdgeListParseError(f"line {lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(f"line {lineno}: vertex ids must be integers") from None
        if i == j:
            raise EdgeListParseError(f"line {lineno}: self-loop {i} {j}")
        if not (0 <= i < n and 0 <= j < n):
            raise EdgeListParseError(f"line {lineno}: vertex out of range for n={n}")
        pair = (min(i, j), max(i, j))
        if pair in seen:
            raise EdgeListParseError(f"line {lineno}: duplicate edge {pair[0]} {pair[1]}")
        seen.add(pair)
    if n is None:
        raise EdgeListParseError("empty edge list: missing 'n <count>' header")
    return Graph.from_pairs(n, seen)


def format_edge_list(g: Graph) -> str:
    out = [f"n {g.n}"]
    out.extend(f"{i} {j}" for i, j in g.edge_pairs())
    return "\n".join(out) + "\n"


def read_edge_list(path) -> Graph:
    with open(path) as fh:
        return parse_edge_list(fh.read())


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_edge_list(g))
