"""Graph kernels evaluated on batches of graphs.

Every kernel works on a :class:`GraphBatch` and can return a plain Gram
matrix. The Stein statistics only ever need weighted sums of kernel sections,
``sum_{a in I, b in J} w_a w_b k(g_a, g_b)``, so kernels also implement
:meth:`GraphKernel.group_gram`; kernels with an explicit feature map do this
without forming the full Gram matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .graph import Graph, _distance_stack, n_pairs, pair_arrays


class KernelDivergenceError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# batches


class GraphBatch:
    """A list of graphs stored as a flat edge table.

    ``edge_graph[e]`` is the graph an edge belongs to and ``edge_pair[e]`` its
    pair index in that graph's own ``n``-vertex enumeration.
    """

    def __init__(self, sizes, edge_graph, edge_pair):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self.edge_graph = np.asarray(edge_graph, dtype=np.int64)
        self.edge_pair = np.asarray(edge_pair, dtype=np.int64)
        self._endpoints = None

    def __len__(self) -> int:
        return self.sizes.shape[0]

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph]) -> "GraphBatch":
        sizes = [g.n for g in graphs]
        eg, ep = [], []
        for idx, g in enumerate(graphs):
            p = np.flatnonzero(g.edges)
            eg.append(np.full(p.shape[0], idx))
            ep.append(p)
        if not graphs:
            raise ValueError("empty batch")
        return cls(sizes, np.concatenate(eg), np.concatenate(ep))

    @classmethod
    def from_edge_matrix(cls, n: int, E: np.ndarray) -> "GraphBatch":
        E = np.asarray(E, dtype=bool)
        eg, ep = np.nonzero(E)
        return cls(np.full(E.shape[0], n), eg, ep)

    @classmethod
    def from_toggles(cls, base: Graph, toggles: np.ndarray) -> "GraphBatch":
        """Copies of ``base``, copy ``t`` with indicator ``toggles[t]`` flipped (``-1``: none)."""
        toggles = np.asarray(toggles, dtype=np.int64)
        G = toggles.shape[0]
        base_pairs = np.flatnonzero(base.edges)
        E0 = base_pairs.shape[0]
        eg = np.repeat(np.arange(G), E0)
        ep = np.tile(base_pairs, G)
        keep = ep != np.repeat(toggles, E0)
        added = (toggles >= 0) & ~base.edges[np.maximum(toggles, 0)]
        eg = np.concatenate([eg[keep], np.flatnonzero(added)])
        ep = np.concatenate([ep[keep], toggles[added]])
        return cls(np.full(G, base.n), eg, ep)

    @classmethod
    def concat(cls, batches: Sequence["GraphBatch"]) -> "GraphBatch":
        offs = np.cumsum([0] + [len(b) for b in batches[:-1]])
        return cls(
            np.concatenate([b.sizes for b in batches]),
            np.concatenate([b.edge_graph + o for b, o in zip(batches, offs)]),
            np.concatenate([b.edge_pair for b in batches]),
        )

    def graph(self, idx: int) -> Graph:
        n = int(self.sizes[idx])
        x = np.zeros(n_pairs(n), dtype=bool)
        x[self.edge_pair[self.edge_graph == idx]] = True
        return Graph(n, x)

    @property
    def n_max(self) -> int:
        return int(self.sizes.max())

    @property
    def uniform(self) -> bool:
        return bool(np.all(self.sizes == self.sizes[0]))

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Local endpoint arrays ``(u, v)``, ``u < v``, for every edge."""
        if self._endpoints is None:
            u = np.empty_like(self.edge_pair)
            v = np.empty_like(self.edge_pair)
            esize = self.sizes[self.edge_graph]
            for n in np.unique(esize):
                sel = esize == n
                rows, cols = pair_arrays(int(n))
                u[sel] = rows[self.edge_pair[sel]]
                v[sel] = cols[self.edge_pair[sel]]
            self._endpoints = (u, v)
        return self._endpoints

    def vertex_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]])

    def block_adjacency(self) -> sparse.csr_matrix:
        u, v = self.endpoints()
        off = self.vertex_offsets()[self.edge_graph]
        a, b = u + off, v + off
        V = int(self.sizes.sum())
        data = np.ones(2 * a.shape[0])
        return sparse.csr_matrix(
            (data, (np.concatenate([a, b]), np.concatenate([b, a]))), shape=(V, V)
        )

    def incidence(self) -> sparse.csr_matrix:
        """``(G, N(n_max))`` indicator matrix, pairs re-indexed for ``n_max`` vertices."""
        u, v = self.endpoints()
        n = self.n_max
        col = u * n - u * (u + 1) // 2 + (v - u - 1)
        data = np.ones(col.shape[0])
        return sparse.csr_matrix((data, (self.edge_graph, col)), shape=(len(self), n_pairs(n)))

    def edge_counts(self) -> np.ndarray:
        return np.bincount(self.edge_graph, minlength=len(self)).astype(float)

    def dense_adjacency(self, indices=None) -> np.ndarray:
        """Stack of ``n_max x n_max`` adjacency matrices (padding vertices isolated)."""
        if indices is None:
            indices = np.arange(len(self))
        indices = np.asarray(indices)
        n = self.n_max
        pos = np.full(len(self), -1)
        pos[indices] = np.arange(indices.shape[0])
        u, v = self.endpoints()
        sel = pos[self.edge_graph] >= 0
        out = np.zeros((indices.shape[0], n, n), dtype=bool)
        gi = pos[self.edge_graph[sel]]
        out[gi, u[sel], v[sel]] = True
        out[gi, v[sel], u[sel]] = True
        return out


def as_batch(graphs) -> GraphBatch:
    if isinstance(graphs, GraphBatch):
        return graphs
    if isinstance(graphs, Graph):
        return GraphBatch.from_graphs([graphs])
    return GraphBatch.from_graphs(list(graphs))


# ---------------------------------------------------------------------------
# kernel base


class GraphKernel:
    """Base class. Subclasses implement ``_gram`` and optionally ``_features``."""

    normalize: bool = False
    name = "kernel"

    # explicit feature map, or None
    def _features(self, batch: GraphBatch):
        return None

    def _gram(self, batch: GraphBatch) -> np.ndarray:
        F = self._features(batch)
        K = F @ F.T
        return np.asarray(K.todense()) if sparse.issparse(K) else np.asarray(K)

    def _self(self, batch: GraphBatch) -> np.ndarray:
        F = self._features(batch)
        if F is not None:
            if sparse.issparse(F):
                return np.asarray(F.multiply(F).sum(axis=1)).ravel()
            return np.einsum("ij,ij->i", F, F)
        return np.array([self._gram(_subset(batch, [i]))[0, 0] for i in range(len(batch))])

    def self_kernels(self, graphs) -> np.ndarray:
        batch = as_batch(graphs)
        if self.normalize:
            return np.ones(len(batch))
        return self._self(batch)

    def gram(self, graphs) -> np.ndarray:
        batch = as_batch(graphs)
        K = self._gram(batch)
        if self.normalize:
            d = np.sqrt(np.diag(K))
            with np.errstate(divide="ignore", invalid="ignore"):
                K = np.where(np.outer(d, d) > 0, K / np.outer(d, d), 0.0)
        return 0.5 * (K + K.T)

    def cross(self, a, b) -> np.ndarray:
        a, b = as_batch(a), as_batch(b)
        K = self.gram(GraphBatch.concat([a, b]))
        return K[: len(a), len(a):]

    def __call__(self, g: Graph, h: Graph) -> float:
        return float(self.cross([g], [h])[0, 0])

    def group_gram(self, batch: GraphBatch, groups: np.ndarray, weights: np.ndarray,
                   n_groups: int | None = None, block_diagonal: bool = False) -> np.ndarray:
        """``H[i, j] = sum_{a in i, b in j} w_a w_b k(g_a, g_b)``.

        With ``block_diagonal`` only the diagonal ``H[i, i]`` is computed and
        returned as a vector.
        """
        groups = np.asarray(groups, dtype=np.int64)
        weights = np.asarray(weights, dtype=float)
        if n_groups is None:
            n_groups = int(groups.max()) + 1
        if self.normalize:
            d = self._self(batch)
            with np.errstate(divide="ignore"):
                weights = np.where(d > 0, weights / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
        F = self._features(batch)
        if F is not None:
            W = sparse.csr_matrix((weights, (groups, np.arange(len(batch)))),
                                  shape=(n_groups, len(batch)))
            V = W @ F
            if sparse.issparse(V):
                if block_diagonal:
                    return np.asarray(V.multiply(V).sum(axis=1)).ravel()
                return np.asarray((V @ V.T).todense())
            V = np.asarray(V)
            if block_diagonal:
                return np.einsum("ij,ij->i", V, V)
            return V @ V.T
        if block_diagonal:
            out = np.zeros(n_groups)
            order = np.argsort(groups, kind="stable")
            bounds = np.searchsorted(groups[order], np.arange(n_groups + 1))
            for i in range(n_groups):
                idx = order[bounds[i]:bounds[i + 1]]
                if idx.size:
                    w = weights[idx]
                    out[i] = w @ self._gram(_subset(batch, idx)) @ w
            return out
        W = sparse.csr_matrix((weights, (groups, np.arange(len(batch)))),
                              shape=(n_groups, len(batch)))
        return np.asarray(W @ self._gram(batch) @ W.T.toarray()).reshape(n_groups, n_groups)

    def describe(self) -> str:
        return self.name + (":norm" if self.normalize else "")


def _subset(batch: GraphBatch, idx) -> GraphBatch:
    idx = np.asarray(idx)
    pos = np.full(len(batch), -1)
    pos[idx] = np.arange(idx.shape[0])
    sel = pos[batch.edge_graph] >= 0
    return GraphBatch(batch.sizes[idx], pos[batch.edge_graph[sel]], batch.edge_pair[sel])


# ---------------------------------------------------------------------------
# Weisfeiler-Lehman subtree kernel

_MASK40 = np.uint64((1 << 40) - 1)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x += np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return x


def wl_label_levels(batch: GraphBatch, levels: int) -> list[np.ndarray]:
    """Compressed WL labels of every vertex in the batch, one array per level.

    Level 0 is the constant label. Level ``r+1`` compresses the pair (own
    label, multiset of neighbour labels). The multiset is fingerprinted by two
    independent sums of 40-bit label hashes (exact integer arithmetic in
    float64 for degrees below 4096), and the compression dictionary is shared
    by all graphs in the batch.
    """
    V = int(batch.sizes.sum())
    labels = np.zeros(V, dtype=np.int64)
    out = [labels]
    if levels == 0:
        return out
    A = batch.block_adjacency()
    for r in range(1, levels + 1):
        base = labels.astype(np.uint64) * np.uint64(4) + np.uint64(r << 20)
        h = np.column_stack([_splitmix(base) & _MASK40,
                             _splitmix(base + np.uint64(1)) & _MASK40]).astype(np.float64)
        S = (A @ h).astype(np.uint64)
        with np.errstate(over="ignore"):
            key = _splitmix(labels.astype(np.uint64) ^ _splitmix(S[:, 0]))
            key = _splitmix(key ^ (_splitmix(S[:, 1]) * np.uint64(0x2545F4914F6CDD1D)))
        _, labels = np.unique(key, return_inverse=True)
        labels = labels.astype(np.int64).ravel()
        out.append(labels)
    return out


@dataclass
class WlFeature:
    """Sparse WL histogram of one graph: ``blocks[r]`` maps label -> count."""

    blocks: list

    def dot(self, other: "WlFeature") -> float:
        total = 0
        for a, b in zip(self.blocks, other.blocks):
            total += sum(c * b.get(lab, 0) for lab, c in a.items())
        return float(total)


@dataclass(frozen=True)
class WLKernel(GraphKernel):
    levels: int = 5
    normalize: bool = False

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError("WL levels must be >= 0")

    @property
    def name(self):
        return f"wl:{self.levels}"

    def _features(self, batch):
        levels = wl_label_levels(batch, self.levels)
        gid = np.repeat(np.arange(len(batch)), batch.sizes)
        cols, col_off = [], 0
        for lab in levels:
            cols.append(lab + col_off)
            col_off += int(lab.max()) + 1 if lab.size else 1
        rows = np.tile(gid, len(levels))
        cols = np.concatenate(cols)
        F = sparse.csr_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(len(batch), col_off))
        F.sum_duplicates()
        return F

    def features(self, graphs) -> list[WlFeature]:
        """Per-graph sparse histograms under a dictionary shared by ``graphs``."""
        batch = as_batch(graphs)
        levels = wl_label_levels(batch, self.levels)
        bounds = np.concatenate([[0], np.cumsum(batch.sizes)])
        feats = []
        for g in range(len(batch)):
            blocks = []
            for lab in levels:
                vals, cnt = np.unique(lab[bounds[g]:bounds[g + 1]], return_counts=True)
                blocks.append(dict(zip(vals.tolist(), cnt.tolist())))
            feats.append(WlFeature(blocks))
        return feats


def wl_features(g: Graph, levels: int) -> WlFeature:
    return WLKernel(levels).features([g])[0]


# ---------------------------------------------------------------------------
# shortest-path kernel


@dataclass(frozen=True)
class ShortestPathKernel(GraphKernel):
    """1-step walk kernel on Floyd-transformed graphs.

    The transformed graph is complete with each vertex pair labelled by its
    hop distance (unreachable pairs share one extra label); product-graph
    edges pair up equally-labelled ordered pairs, so the kernel is the inner
    product of ordered-pair distance histograms.
    """

    normalize: bool = False
    name = "sp"

    def _features(self, batch):
        n = batch.n_max
        F = np.zeros((len(batch), n + 1))
        chunk = max(1, 2_000_000 // max(n * n, 1))
        for n_g in np.unique(batch.sizes):
            idx = np.flatnonzero(batch.sizes == n_g)
            rows, cols = pair_arrays(int(n_g))
            for start in range(0, idx.shape[0], chunk):
                sub = idx[start:start + chunk]
                adj = batch.dense_adjacency(sub)[:, :n_g, :n_g]
                dist = _distance_stack(adj)[:, rows, cols]
                bins = np.where(np.isinf(dist), n, dist).astype(np.int64)
                flat = bins + (n + 1) * np.arange(sub.shape[0])[:, None]
                F[sub] = 2.0 * np.bincount(flat.ravel(), minlength=(n + 1) * sub.shape[0]).reshape(
                    sub.shape[0], n + 1)
        return F


# ---------------------------------------------------------------------------
# vertex-edge histogram Gaussian kernel


def _hamming(batch: GraphBatch) -> np.ndarray:
    inc = batch.incidence()
    common = np.asarray((inc @ inc.T).todense())
    cnt = np.asarray(inc.sum(axis=1)).ravel()
    return np.maximum(cnt[:, None] + cnt[None, :] - 2.0 * common, 0.0)


def veg_histogram(g: Graph) -> dict:
    """Vertex-edge label histogram with vertex labels = vertex index, edge label 1.

    Each undirected edge is counted once with its endpoint labels ordered.
    """
    return {(1, i, j): 1 for i, j in g.edge_pairs()}


@dataclass(frozen=True)
class VEGKernel(GraphKernel):
    sigma: float = 1.0
    normalize: bool = False

    @property
    def name(self):
        return f"veg:{self.sigma:g}"

    def _gram(self, batch):
        # index labels make every histogram cell an edge indicator
        return np.exp(-_hamming(batch) / (2.0 * self.sigma ** 2))

    def _self(self, batch):
        return np.ones(len(batch))


@dataclass(frozen=True)
class GaussAdjKernel(GraphKernel):
    sigma: float = 1.0
    normalize: bool = False

    @property
    def name(self):
        return f"gaussadj:{self.sigma:g}"

    def _gram(self, batch):
        return np.exp(-_hamming(batch) / self.sigma ** 2)

    def _self(self, batch):
        return np.ones(len(batch))


# ---------------------------------------------------------------------------
# random-walk kernels on the direct product graph


def _walk_counts(batch: GraphBatch, steps: int) -> np.ndarray:
    """``1' A^t 1`` for ``t = 0..steps`` per graph."""
    out = np.zeros((len(batch), steps + 1))
    out[:, 0] = batch.sizes
    A = batch.block_adjacency()
    gid = np.repeat(np.arange(len(batch)), batch.sizes)
    vec = np.ones(A.shape[0])
    for t in range(1, steps + 1):
        vec = A @ vec
        out[:, t] = np.bincount(gid, weights=vec, minlength=len(batch))
    return out


@dataclass(frozen=True)
class KStepRWKernel(GraphKernel):
    """``sum_t w_t 1'(A x A')^t 1``, which factorises into per-graph walk counts."""

    weights: tuple = (1.0, 1.0, 1.0)
    normalize: bool = False

    @property
    def name(self):
        return "kstep:" + ",".join(f"{w:g}" for w in self.weights)

    def _gram(self, batch):
        W = _walk_counts(batch, len(self.weights) - 1)
        return (W * np.asarray(self.weights)) @ W.T

    def _features(self, batch):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            return None
        return _walk_counts(batch, len(w) - 1) * np.sqrt(w)


@dataclass(frozen=True)
class GeometricRWKernel(GraphKernel):
    """``1'(I - lam A_x)^{-1} 1`` on the unlabelled direct product graph.

    Evaluated through the eigendecompositions of the two factors:
    ``A_x = A kron A'`` has eigenpairs ``(mu_i nu_j, u_i kron v_j)``.
    """

    lam: float = 1.0 / 3.0
    normalize: bool = False

    @property
    def name(self):
        return f"grw:{self.lam:g}"

    def _spectra(self, batch):
        out = []
        for idx in range(len(batch)):
            n = int(batch.sizes[idx])
            A = batch.dense_adjacency([idx])[0, :n, :n].astype(float)
            mu, U = np.linalg.eigh(A)
            c = (U.T @ np.ones(n)) ** 2
            out.append((mu, c))
        return out

    def _gram(self, batch):
        spec = self._spectra(batch)
        rho = np.array([np.max(np.abs(mu)) if mu.size else 0.0 for mu, _ in spec])
        worst = self.lam * np.max(np.outer(rho, rho))
        if worst >= 1.0:
            raise KernelDivergenceError(
                f"geometric walk series diverges: lam * rho(A x A') = {worst:.4g} >= 1"
            )
        G = len(batch)
        K = np.empty((G, G))
        for a in range(G):
            mu_a, c_a = spec[a]
            for b in range(a, G):
                mu_b, c_b = spec[b]
                val = c_a @ (1.0 / (1.0 - self.lam * np.outer(mu_a, mu_b))) @ c_b
                K[a, b] = K[b, a] = val
        return K


def grw_dense(g: Graph, h: Graph, lam: float) -> float:
    """Direct linear solve on the ``n^2``-vertex product graph."""
    Ax = np.kron(g.adjacency.astype(float), h.adjacency.astype(float))
    M = np.eye(Ax.shape[0]) - lam * Ax
    rho = np.max(np.abs(np.linalg.eigvalsh(Ax))) if Ax.size else 0.0
    if lam * rho >= 1.0:
        raise KernelDivergenceError(f"lam * rho = {lam * rho:.4g} >= 1")
    try:
        sol = np.linalg.solve(M, np.ones(Ax.shape[0]))
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(f"singular product-graph system: {err}") from err
    return float(sol.sum())


# ---------------------------------------------------------------------------
# edge count


@dataclass(frozen=True)
class EdgeCountKernel(GraphKernel):
    """``|E(g)| * |E(h)|``."""

    normalize: bool = False
    name = "edgecount"

    def _features(self, batch):
        return batch.edge_counts()[:, None]


# ---------------------------------------------------------------------------
# selection strings


def parse_kernel(text: str) -> GraphKernel:
    """Build a kernel from ``wl:5``, ``sp``, ``veg:1.0``, ``grw:0.3333``,
    ``gaussadj:1.0``, ``edgecount`` or ``kstep:1,0.5,0.25``; append ``:norm``
    for cosine normalisation."""
    parts = text.strip().lower().split(":")
    normalize = parts[-1] == "norm"
    if normalize:
        parts = parts[:-1]
    name, args = parts[0], parts[1:]
    if len(args) > 1:
        raise ValueError(f"cannot parse kernel {text!r}")
    arg = args[0] if args else None
    if name == "wl":
        return WLKernel(int(arg) if arg else 5, normalize)
    if name == "sp":
        return ShortestPathKernel(normalize)
    if name == "veg":
        return VEGKernel(float(arg) if arg else 1.0, normalize)
    if name == "grw":
        return GeometricRWKernel(float(arg) if arg else 1.0 / 3.0, normalize)
    if name == "gaussadj":
        return GaussAdjKernel(float(arg) if arg else 1.0, normalize)
    if name == "edgecount":
        return EdgeCountKernel(normalize)
    if name == "kstep":
        w = tuple(float(v) for v in arg.split(",")) if arg else (1.0, 1.0, 1.0)
        return KStepRWKernel(w, normalize)
    raise ValueError(f"unknown kernel {text!r}")


def kernel_eval(kernel: GraphKernel, g: Graph, h: Graph) -> float:
    return kernel(g, h)


def gram(kernel: GraphKernel, graphs) -> np.ndarray:
    batch = as_batch(graphs)
    if len(batch) == 0:
        raise ValueError("gram needs at least one graph")
    return kernel.gram(batch)


def gram_min_eigenvalue(kernel: GraphKernel, graphs) -> float:
    return float(np.linalg.eigvalsh(gram(kernel, graphs)).min())


def spectral_radius(g: Graph) -> float:
    if g.edge_count == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(g.adjacency.astype(float)))))


def max_grw_lambda(graphs) -> float:
    """Largest ``lam`` (exclusive) for which the geometric series converges on all pairs."""
    rho = max(spectral_radius(g) for g in graphs)
    return math.inf if rho == 0 else 1.0 / (rho * rho)
