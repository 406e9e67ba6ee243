"""Exponential random graph models: densities, conditionals, sampling, a*.

Only ratios of the unnormalised density are ever needed, so the normalising
constant is never computed except by :func:`exact_distribution`, which
enumerates all graphs for tiny ``n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy.special import expit

from .graph import Graph, StatisticSpec, change_statistics, count_statistic, n_pairs, pair_arrays
from .rng import make_rng


class CapacityError(RuntimeError):
    pass


class UnsupportedStatisticError(ValueError):
    pass


DEFAULT_BURN_IN = 200
DEFAULT_THIN = 10


@dataclass(frozen=True)
class ErgmModel:
    """ERGM(beta, t) on ``n`` vertices. The first statistic must be ``edges``."""

    beta: tuple
    stats: tuple
    n: int

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        stats = tuple(self.stats)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "stats", stats)
        if len(beta) != len(stats) or not beta:
            raise ValueError("beta and stats must be non-empty and of equal length")
        if stats[0].kind != "edges":
            raise ValueError("the first statistic must be edges")
        if len({s.scaling for s in stats}) != 1:
            raise ValueError("all statistics must share one scaling convention")
        for s in stats:
            s.validate_for(self.n)

    @property
    def scaling(self) -> str:
        return self.stats[0].scaling

    @property
    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta)

    def with_beta(self, beta: Sequence[float]) -> "ErgmModel":
        return ErgmModel(tuple(beta), self.stats, self.n)

    def describe(self) -> str:
        terms = ", ".join(f"{s.label()}={b:g}" for s, b in zip(self.stats, self.beta))
        return f"ERGM(n={self.n}, {self.scaling}: {terms})"


def edges_only(beta1: float, n: int, scaling: str = "raw") -> ErgmModel:
    return ErgmModel((beta1,), (StatisticSpec("edges", scaling),), n)


def e2st(beta: Sequence[float], n: int, scaling: str = "raw") -> ErgmModel:
    """Edges / two-stars / triangles model."""
    stats = tuple(StatisticSpec(k, scaling) for k in ("edges", "2star", "triangle"))
    return ErgmModel(tuple(beta), stats, n)


def er_model(p: float, n: int) -> ErgmModel:
    return edges_only(math.log(p / (1.0 - p)), n)


# ---------------------------------------------------------------------------
# densities and conditionals


def change_matrix(model: ErgmModel, g: Graph, indices=None) -> np.ndarray:
    """``(len(indices), k)`` matrix of change statistics."""
    return np.column_stack([change_statistics(g, spec, indices) for spec in model.stats])


def edge_log_odds(model: ErgmModel, g: Graph, indices=None) -> np.ndarray:
    return change_matrix(model, g, indices) @ model.beta_array


def conditional_edge_probs(model: ErgmModel, g: Graph, indices=None) -> np.ndarray:
    """``q(x^{(s,1)} | x_{-s})`` for each requested edge index."""
    if g.n != model.n:
        raise ValueError(f"model is on n={model.n} vertices, graph has n={g.n}")
    return expit(edge_log_odds(model, g, indices))


def conditional_edge_prob(model: ErgmModel, g: Graph, s: int) -> float:
    return float(conditional_edge_probs(model, g, [s])[0])


def log_unnormalized_density(model: ErgmModel, g: Graph) -> float:
    return float(sum(b * count_statistic(g, spec) for b, spec in zip(model.beta, model.stats)))


# ---------------------------------------------------------------------------
# Glauber dynamics

_KIND_CODES = {"edges": 0, "2star": 1, "triangle": 2, "kstar": 3, "altkstar": 4, "homophily": 5}


def _encode(model: ErgmModel):
    n = model.n
    kinds = np.array([_KIND_CODES[s.kind] for s in model.stats], dtype=np.int64)
    ks = np.array([s.k or 0 for s in model.stats], dtype=np.int64)
    lams = np.array([s.lam or 1.0 for s in model.stats], dtype=np.float64)
    scales = np.array([s.scale_factor(n) for s in model.stats], dtype=np.float64)
    P = np.zeros((n, n))
    for s in model.stats:
        if s.kind == "homophily":
            P = np.ascontiguousarray(s.P, dtype=np.float64)
    return kinds, ks, lams, scales, P


@numba.njit(cache=True)
def _comb_nb(d, k):
    if k < 0 or d < k:
        return 0.0
    out = 1.0
    for t in range(k):
        out = out * (d - t) / (t + 1)
    return out


@numba.njit(cache=True)
def _altk_nb(d, lam):
    r = -1.0 / lam
    return ((1.0 + r) ** d - 1.0 - r * d) / (r * r)


@numba.njit(cache=True)
def _glauber_run(adj, deg, rows, cols, beta, kinds, ks, lams, scales, P, picks, uniforms, stride, out):
    # with stride > 0 the state is written to out[r] after every stride steps
    n = adj.shape[0]
    for step in range(picks.shape[0]):
        s = picks[step]
        i = rows[s]
        j = cols[s]
        present = adj[i, j]
        di = deg[i] - present
        dj = deg[j] - present
        eta = 0.0
        for l in range(kinds.shape[0]):
            kind = kinds[l]
            if kind == 0:
                delta = 1.0
            elif kind == 1:
                delta = di + dj
            elif kind == 2:
                c = 0
                for v in range(n):
                    c += adj[i, v] & adj[j, v]
                delta = c
            elif kind == 3:
                delta = _comb_nb(di, ks[l] - 1) + _comb_nb(dj, ks[l] - 1)
            elif kind == 4:
                lam = lams[l]
                delta = (_altk_nb(di + 1, lam) - _altk_nb(di, lam)) + (
                    _altk_nb(dj + 1, lam) - _altk_nb(dj, lam)
                )
            else:
                delta = P[i, j]
            eta += beta[l] * delta * scales[l]
        if eta >= 0:
            p = 1.0 / (1.0 + math.exp(-eta))
        else:
            e = math.exp(eta)
            p = e / (1.0 + e)
        new = 1 if uniforms[step] < p else 0
        if new != present:
            adj[i, j] = new
            adj[j, i] = new
            deg[i] += new - present
            deg[j] += new - present
        if stride > 0 and (step + 1) % stride == 0:
            r = (step + 1) // stride - 1
            for t in range(rows.shape[0]):
                out[r, t] = adj[rows[t], cols[t]] == 1


class GlauberSampler:
    """Single-site heat-bath chain for an ERGM.

    Each elementary step picks ``s`` uniformly from ``[N]`` and redraws
    ``x_s`` from its conditional law; a sweep is ``N`` steps. The chain is
    started from independent edges with the edges-only conditional
    probability. All randomness comes from ``rng``.
    """

    def __init__(self, model: ErgmModel, rng):
        self.model = model
        self.rng = make_rng(rng)
        self.N = n_pairs(model.n)
        self._enc = _encode(model)
        rows, cols = pair_arrays(model.n)
        self._rows = rows.astype(np.int64)
        self._cols = cols.astype(np.int64)
        p0 = expit(model.beta[0] * model.stats[0].scale_factor(model.n))
        x0 = self.rng.random(self.N) < p0
        adj = np.zeros((model.n, model.n), dtype=np.int64)
        adj[self._rows, self._cols] = x0
        adj += adj.T
        self.adj = adj
        self.deg = adj.sum(axis=1).astype(np.int64)
        self._no_record = np.empty((0, self.N), dtype=bool)

    def sweep(self, count: int = 1) -> None:
        kinds, ks, lams, scales, P = self._enc
        beta = self.model.beta_array
        remaining = count * self.N
        chunk = max(self.N, 1 << 20)
        while remaining > 0:
            size = min(chunk, remaining)
            picks = self.rng.integers(0, self.N, size=size)
            uniforms = self.rng.random(size)
            _glauber_run(self.adj, self.deg, self._rows, self._cols, beta, kinds, ks, lams,
                         scales, P, picks, uniforms, 0, self._no_record)
            remaining -= size

    def record(self, m: int, thin: int) -> np.ndarray:
        """Current state followed by ``m - 1`` states ``thin`` sweeps apart."""
        out = np.empty((m, self.N), dtype=bool)
        out[0] = self.state()
        stride = thin * self.N
        if stride == 0:
            out[1:] = out[0]
            return out
        kinds, ks, lams, scales, P = self._enc
        beta = self.model.beta_array
        per_chunk = max(1, (1 << 20) // stride)
        r = 1
        while r < m:
            k = min(per_chunk, m - r)
            picks = self.rng.integers(0, self.N, size=k * stride)
            uniforms = self.rng.random(k * stride)
            _glauber_run(self.adj, self.deg, self._rows, self._cols, beta, kinds, ks, lams,
                         scales, P, picks, uniforms, stride, out[r:r + k])
            r += k
        return out

    def state(self) -> np.ndarray:
        return self.adj[self._rows, self._cols].astype(bool)


def glauber_sample_edges(model: ErgmModel, m: int, burn_in: int = DEFAULT_BURN_IN,
                         thin: int = DEFAULT_THIN, seed=0) -> np.ndarray:
    """``(m, N)`` boolean matrix of thinned chain states."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if burn_in < 0 or thin < 0:
        raise ValueError("burn_in and thin must be non-negative")
    sampler = GlauberSampler(model, seed)
    sampler.sweep(burn_in)
    return sampler.record(m, thin)


def glauber_sample(model: ErgmModel, m: int, burn_in: int = DEFAULT_BURN_IN,
                   thin: int = DEFAULT_THIN, seed=0) -> list[Graph]:
    states = glauber_sample_edges(model, m, burn_in, thin, seed)
    return [Graph(model.n, row) for row in states]


# ---------------------------------------------------------------------------
# exact enumeration

MAX_EXACT_PAIRS = 15


@dataclass
class ExactDistribution:
    """Probability of every graph on ``n`` vertices.

    Row ``k`` of ``states`` has ``states[k, s] = (k >> s) & 1``.
    """

    n: int
    states: np.ndarray
    probs: np.ndarray
    log_weights: np.ndarray = field(repr=False)

    def index_of(self, edges) -> int:
        edges = np.asarray(edges, dtype=np.int64)
        return int(np.sum(edges << np.arange(edges.shape[0])))

    def prob(self, g: Graph) -> float:
        return float(self.probs[self.index_of(g.edges)])

    def graphs(self) -> list[Graph]:
        return [Graph(self.n, row) for row in self.states]


def exact_distribution(model: ErgmModel) -> ExactDistribution:
    N = n_pairs(model.n)
    if N > MAX_EXACT_PAIRS:
        raise CapacityError(f"exact enumeration needs N <= {MAX_EXACT_PAIRS}, got N={N}")
    codes = np.arange(2 ** N)
    states = ((codes[:, None] >> np.arange(N)) & 1).astype(bool)
    logw = np.array([log_unnormalized_density(model, Graph(model.n, row)) for row in states])
    w = np.exp(logw - logw.max())
    return ExactDistribution(model.n, states, w / w.sum(), logw)


# ---------------------------------------------------------------------------
# Bernoulli approximation


@dataclass(frozen=True)
class ErApproximation:
    a_star: float
    converged: bool
    iterations: int
    assumption1_margin: float
    convention: str
    residual: float
    trace: tuple = field(default=(), repr=False)

    @property
    def satisfies_assumption1(self) -> bool:
        return self.assumption1_margin > 0


CONVENTIONS = ("tanh", "sigmoid")


def default_convention(model: ErgmModel) -> str:
    return "sigmoid" if model.scaling == "raw" else "tanh"


def phi_function(model: ErgmModel, convention: str):
    """Return ``(Phi, phi)`` for the model's subgraph counts."""
    for spec in model.stats:
        if not spec.is_subgraph_count:
            raise UnsupportedStatisticError(
                f"statistic {spec.label()!r} is not a subgraph count; a* is undefined"
            )
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    beta = model.beta_array
    e = np.array([s.edge_count for s in model.stats], dtype=float)

    def Phi(a):
        return float(np.sum(beta * e * a ** (e - 1)))

    if convention == "tanh":
        def phi(a):
            return 0.5 * (1.0 + math.tanh(Phi(a)))
    else:
        def phi(a):
            return float(expit(Phi(a)))
    return Phi, phi


def assumption1_margin(model: ErgmModel) -> float:
    e = np.array([s.edge_count for s in model.stats], dtype=float)
    return float(1.0 - 0.5 * np.sum(np.abs(model.beta_array) * e * (e - 1)))


def solve_a_star(model: ErgmModel, convention: str | None = None, tol: float = 1e-12,
                 max_iter: int = 10_000) -> ErApproximation:
    """Fixed point of ``phi`` by (damped when oscillating) iteration from 0.5."""
    convention = convention or default_convention(model)
    _, phi = phi_function(model, convention)
    margin = assumption1_margin(model)
    if margin <= 0:
        warnings.warn(f"contraction condition 1 - |Phi|'(1)/2 > 0 violated (margin {margin:.4g}); iterating anyway",
                      RuntimeWarning, stacklevel=2)
    a = 0.5
    damped = False
    prev_step = 0.0
    trace = [a]
    residual = abs(phi(a) - a)
    it = 0
    while it < max_iter and residual >= tol:
        target = phi(a)
        step = target - a
        if not damped and prev_step * step < 0 and abs(step) > 0.5 * abs(prev_step):
            damped = True
        a = 0.5 * (a + target) if damped else target
        prev_step = step
        it += 1
        residual = abs(phi(a) - a)
        trace.append(a)
    return ErApproximation(a, residual < tol, it, margin, convention, residual, tuple(trace))
