"""Stein operator of the ERGM Glauber dynamics and the kernel Stein statistics.

For one edge index ``s`` the operator only ever compares ``x`` with the graph
``x ^ s`` that has indicator ``s`` flipped:

    A^(s) f(x) = pi_s(x) * (f(x ^ s) - f(x)),

where ``pi_s(x)`` is the conditional probability of the flipped state. Kernel
sections ``A^(s) K(x, .)`` are therefore weighted combinations of
``K(x, .)`` and ``K(x ^ s, .)``, and every statistic reduces to a weighted
group Gram computed by the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .ergm import CapacityError, ErgmModel, conditional_edge_probs, edge_log_odds
from .graph import Graph, n_pairs
from .kernels import GraphBatch, GraphKernel
from .rng import make_rng

NEGATIVE_TOL = 1e-10
DEFAULT_MAX_PAIRS = 2000

OPERATORS = ("glauber", "kdsd", "composite")

# ||l(1,.) - l(0,.)||^2 for the binary kernel l(a, b) = exp(-(a - b)^2)
_COMPOSITE_SCALE = math.sqrt(2.0 - 2.0 * math.exp(-1.0))


class IncompleteFunctionError(KeyError):
    pass


@dataclass
class GkssResult:
    value: float
    B: int | str
    sampled_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    seed: int | None = None

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("gKSS^2 must be non-negative")

    def __float__(self):
        return float(self.value)


def _clamp(value: float, scale: float = 1.0) -> float:
    if value >= 0:
        return value
    if value > -NEGATIVE_TOL * max(1.0, scale):
        return 0.0
    raise ArithmeticError(f"negative squared statistic {value:.3e}: kernel not positive definite?")


# ---------------------------------------------------------------------------
# explicit Stein kernel h_x(s, s')


class SteinKernelCache:
    """Per-graph quantities for ``h_x(s, s')``.

    ``q1[s]`` is ``q(x^{(s,1)} | x_{-s})``; kernel values between perturbed
    graphs are memoised by ``(s, bit, s', bit')``.
    """

    def __init__(self, model: ErgmModel, g: Graph, kernel: GraphKernel):
        if model.n != g.n:
            raise ValueError(f"model is on n={model.n} vertices, graph has n={g.n}")
        self.model = model
        self.g = g
        self.kernel = kernel
        self.x_bits = g.edges
        self._q1 = None
        self._memo: dict = {}

    @property
    def q1(self) -> np.ndarray:
        if self._q1 is None:
            self._q1 = conditional_edge_probs(self.model, self.g)
        return self._q1

    def perturbed(self, s: int, bit: int) -> Graph:
        return self.g.with_edge(s, bool(bit))

    def k(self, s: int, b: int, t: int, c: int) -> float:
        key = (s, b, t, c)
        val = self._memo.get(key)
        if val is None:
            val = self.kernel(self.perturbed(s, b), self.perturbed(t, c))
            self._memo[key] = val
            self._memo[(t, c, s, b)] = val
        return val


def stein_h(cache: SteinKernelCache, s: int, t: int) -> float:
    """``(q1_s - x_s)(q1_t - x_t)`` times the four-term kernel bracket."""
    q1 = cache.q1
    cs = q1[s] - cache.x_bits[s]
    ct = q1[t] - cache.x_bits[t]
    if cs == 0 or ct == 0:
        return 0.0
    bracket = cache.k(s, 1, t, 1) - cache.k(s, 1, t, 0) - cache.k(s, 0, t, 1) + cache.k(s, 0, t, 0)
    return float(cs * ct * bracket)


# ---------------------------------------------------------------------------
# section weights


def _flip_prob(q1: np.ndarray, bits: np.ndarray) -> np.ndarray:
    return np.where(bits, 1.0 - q1, q1)


def section_weights(model: ErgmModel, g: Graph, draws: np.ndarray, operator: str = "glauber"):
    """Weights of ``(1/B) sum_b A^(s_b) K(x, .)`` over ``[x] + [x ^ s for s in toggles]``.

    Returns ``(toggles, weights)``; ``toggles[0] == -1`` stands for ``x``.
    """
    draws = np.asarray(draws, dtype=np.int64)
    B = draws.shape[0]
    uniq, inverse, counts = np.unique(draws, return_inverse=True, return_counts=True)
    bits = g.edges[uniq]
    if operator == "glauber":
        pi = _flip_prob(conditional_edge_probs(model, g, uniq), bits)
        w_flip = pi
        w_base = -pi
    elif operator == "kdsd":
        eta = edge_log_odds(model, g, uniq)
        w_base = np.exp(np.where(bits, -eta, eta))
        w_flip = -np.ones(uniq.shape[0])
    elif operator == "composite":
        u = conditional_edge_probs(model, g, uniq) - bits
        w_flip = _COMPOSITE_SCALE * u
        w_base = _COMPOSITE_SCALE * u
    else:
        raise ValueError(f"unknown operator {operator!r}")
    weights = np.empty(uniq.shape[0] + 1)
    weights[0] = np.sum(counts * w_base) / B
    weights[1:] = counts * w_flip / B
    toggles = np.concatenate([[-1], uniq])
    return toggles, weights


def _stacked(model, graphs, draws_list, operator):
    batches, groups, weights = [], [], []
    for gi, (g, draws) in enumerate(zip(graphs, draws_list)):
        toggles, w = section_weights(model, g, draws, operator)
        batches.append(GraphBatch.from_toggles(g, toggles))
        groups.append(np.full(toggles.shape[0], gi))
        weights.append(w)
    return GraphBatch.concat(batches), np.concatenate(groups), np.concatenate(weights)


def stein_values(model: ErgmModel, graphs, draws_list, kernel: GraphKernel,
                 operator: str = "glauber") -> np.ndarray:
    """Squared RKHS norms ``||(1/B) sum_b A^(s_b) K(x_i, .)||^2`` for each graph."""
    batch, groups, weights = _stacked(model, graphs, draws_list, operator)
    vals = kernel.group_gram(batch, groups, weights, len(graphs), block_diagonal=True)
    return np.array([_clamp(v) for v in vals])


def stein_cross_gram(model: ErgmModel, graphs, draws_list, kernel: GraphKernel,
                     operator: str = "glauber") -> np.ndarray:
    """Matrix of inner products between the Stein sections of several graphs."""
    batch, groups, weights = _stacked(model, graphs, draws_list, operator)
    H = kernel.group_gram(batch, groups, weights, len(graphs))
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# statistics


def gkss_full(model: ErgmModel, g: Graph, kernel: GraphKernel,
              max_pairs: int = DEFAULT_MAX_PAIRS, operator: str = "glauber") -> GkssResult:
    """``(1/N^2) sum_{s,s'} h_x(s, s')`` over all vertex pairs."""
    N = n_pairs(g.n)
    if N > max_pairs:
        raise CapacityError(
            f"full gKSS needs O(N^2) kernel terms (N={N} > {max_pairs}); use gkss_resampled"
        )
    value = stein_values(model, [g], [np.arange(N)], kernel, operator)[0]
    return GkssResult(float(value), "full")


def draw_indices(N: int, B: int, rng, stratified: bool = False) -> np.ndarray:
    if B < 1:
        raise ValueError("B must be >= 1")
    if stratified:
        if B % N:
            raise ValueError("stratified resampling needs B to be a multiple of N")
        return np.repeat(np.arange(N), B // N)
    return rng.integers(0, N, size=B)


def gkss_resampled(model: ErgmModel, g: Graph, kernel: GraphKernel, B: int, seed=None,
                   stratified: bool = False, operator: str = "glauber") -> GkssResult:
    """``(1/B^2) sum_{b,b'} h_x(s_b, s_b')`` with ``s_b`` uniform on ``[N]``, with replacement.

    ``stratified=True`` draws every index exactly ``B/N`` times (a debug mode
    that reproduces :func:`gkss_full`).
    """
    rng = make_rng(seed)
    draws = draw_indices(n_pairs(g.n), B, rng, stratified)
    value = stein_values(model, [g], [draws], kernel, operator)[0]
    return GkssResult(float(value), B, draws, seed if isinstance(seed, (int, np.integer)) else None)


def gkss_resampled_many(model: ErgmModel, graphs, kernel: GraphKernel, B: int, rng,
                        operator: str = "glauber") -> np.ndarray:
    """Re-sampled statistic for each graph, fresh index draws per graph from ``rng``."""
    rng = make_rng(rng)
    graphs = list(graphs)
    draws = [rng.integers(0, n_pairs(g.n), size=B) for g in graphs]
    return stein_values(model, graphs, draws, kernel, operator)


def gkss_double_sum(cache: SteinKernelCache, indices) -> float:
    """``(1/B^2) sum_{b,b'} h(s_b, s_b')`` from :func:`stein_h` term by term."""
    indices = list(indices)
    total = 0.0
    for s in indices:
        for t in indices:
            total += stein_h(cache, s, t)
    return total / len(indices) ** 2


def optimal_witness_norm(model: ErgmModel, g: Graph, kernel: GraphKernel, draws) -> float:
    """RKHS norm of ``(1/B) sum_b A^(s_b) K(x, .)``; the maximising witness is this
    element divided by its norm, and is taken as zero when the norm vanishes."""
    return math.sqrt(stein_values(model, [g], [draws], kernel)[0])


# ---------------------------------------------------------------------------
# operator on explicit functions


def _lookup(f, graph: Graph) -> float:
    if callable(f):
        return float(f(graph))
    for key in (graph.key(), tuple(int(b) for b in graph.edges)):
        if key in f:
            return float(f[key])
    raise IncompleteFunctionError(f"test function undefined on {graph!r} (edges {graph.edge_pairs()})")


def stein_component(model: ErgmModel, f, g: Graph, s: int) -> float:
    """``q1 f(x^{(s,1)}) + q0 f(x^{(s,0)}) - f(x)`` for one edge index."""
    q1 = conditional_edge_probs(model, g, [s])[0]
    f1 = _lookup(f, g.with_edge(s, True))
    f0 = _lookup(f, g.with_edge(s, False))
    return q1 * f1 + (1.0 - q1) * f0 - _lookup(f, g)


def stein_apply(model: ErgmModel, f: Callable[[Graph], float] | Mapping, g: Graph) -> float:
    """Average of :func:`stein_component` over all edge indices.

    ``f`` is a callable on graphs or a mapping keyed by :meth:`Graph.key`
    or by the 0/1 edge tuple.
    """
    N = n_pairs(g.n)
    return float(sum(stein_component(model, f, g, s) for s in range(N)) / N)
