"""Goodness-of-fit tests for a fully specified ERGM.

Single-network tests are Monte Carlo tests: the observed statistic is compared
with the statistics of networks simulated from the null model. The
multi-sample tests calibrate a V-statistic with a Rademacher wild bootstrap.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ergm import DEFAULT_BURN_IN, DEFAULT_THIN, ErgmModel, glauber_sample, glauber_sample_edges
from .graph import Graph, count_statistic, n_pairs, pair_arrays
from .kernels import GraphKernel
from .rng import child_seeds, make_rng
from .stein import gkss_resampled, gkss_resampled_many, stein_cross_gram

MIN_SIMULATIONS = 20


class ConfigurationError(ValueError):
    pass


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


@dataclass
class TestReport:
    """Outcome of one test. Construction checks the decision and p-value rules."""

    __test__ = False  # not a pytest class

    test_name: str
    observed_statistic: float
    null_statistics: np.ndarray
    threshold: float
    p_value: float
    reject: bool
    alpha: float
    seed: int | None = None
    wall_time_ms: float = 0.0
    B: int | None = None
    kernel: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.null_statistics = np.asarray(self.null_statistics, dtype=float)
        m = self.null_statistics.shape[0]
        if self.reject != (self.observed_statistic > self.threshold):
            raise AssertionError("reject must equal observed > threshold")
        expected_p = (1 + np.sum(self.null_statistics >= self.observed_statistic)) / (m + 1)
        if not math.isclose(self.p_value, expected_p, rel_tol=0, abs_tol=1e-12):
            raise AssertionError("p-value does not follow the (1 + #{null >= obs}) / (m + 1) rule")
        if not 0 < self.p_value <= 1:
            raise AssertionError("p-value outside (0, 1]")

    @property
    def m(self) -> int:
        return int(self.null_statistics.shape[0])

    def to_dict(self) -> dict:
        return {
            "test": self.test_name,
            "statistic": float(self.observed_statistic),
            "null_stats": [float(v) for v in self.null_statistics],
            "threshold": float(self.threshold),
            "p_value": float(self.p_value),
            "reject": bool(self.reject),
            "alpha": float(self.alpha),
            "B": self.B,
            "m": self.m,
            "seed": self.seed,
            "kernel": self.kernel,
            "wall_time_ms": float(self.wall_time_ms),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["test", "statistic", "null_stats", "threshold", "p_value", "reject", "alpha",
                 "B", "m", "seed", "kernel", "wall_time_ms"],
    "properties": {
        "test": {"type": "string"},
        "statistic": {"type": "number"},
        "null_stats": {"type": "array", "items": {"type": "number"}},
        "threshold": {"type": "number"},
        "p_value": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "reject": {"type": "boolean"},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "B": {"type": ["integer", "null"]},
        "m": {"type": "integer", "minimum": 1},
        "seed": {"type": ["integer", "null"]},
        "kernel": {"type": ["string", "null"]},
        "wall_time_ms": {"type": "number", "minimum": 0},
    },
}


def empirical_threshold(null_stats, alpha: float) -> float:
    """``(1-alpha)`` quantile: ascending order statistic ``ceil((1-alpha) m) - 1``."""
    s = np.sort(np.asarray(null_stats, dtype=float))
    idx = max(math.ceil((1.0 - alpha) * s.shape[0] - 1e-12) - 1, 0)
    return float(s[idx])


def monte_carlo_p_value(observed: float, null_stats) -> float:
    null_stats = np.asarray(null_stats, dtype=float)
    return float((1 + np.sum(null_stats >= observed)) / (null_stats.shape[0] + 1))


def decide(name: str, observed: float, null_stats, alpha: float, **meta) -> TestReport:
    threshold = empirical_threshold(null_stats, alpha)
    return TestReport(
        test_name=name,
        observed_statistic=float(observed),
        null_statistics=np.asarray(null_stats, dtype=float),
        threshold=threshold,
        p_value=monte_carlo_p_value(observed, null_stats),
        reject=bool(observed > threshold),
        alpha=alpha,
        **meta,
    )


def _check(model: ErgmModel, observed: Graph, m: int, alpha: float):
    if model.n != observed.n:
        raise ConfigurationError(f"model has n={model.n}, observed network has n={observed.n}")
    if m < MIN_SIMULATIONS:
        raise ConfigurationError(f"need at least {MIN_SIMULATIONS} simulated networks, got m={m}")
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must lie in (0, 1)")


def _seed_int(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


# ---------------------------------------------------------------------------
# kernel Stein test


def simulate_null_statistics(model: ErgmModel, kernel: GraphKernel, B: int, m: int, seed,
                             burn_in: int = DEFAULT_BURN_IN, thin: int = DEFAULT_THIN) -> np.ndarray:
    """Re-sampled statistics of ``m`` networks simulated from ``model``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sim_seed, draw_seed = ss.spawn(2)
    Z = glauber_sample(model, m, burn_in, thin, seed=np.random.Generator(np.random.PCG64(sim_seed)))
    return gkss_resampled_many(model, Z, kernel, B, np.random.Generator(np.random.PCG64(draw_seed)))


def gkss_test(model: ErgmModel, observed: Graph, kernel: GraphKernel, B: int = 100,
              alpha: float = 0.05, m: int = 200, seed: int = 0, burn_in: int = DEFAULT_BURN_IN,
              thin: int = DEFAULT_THIN, null_statistics=None) -> TestReport:
    """Monte Carlo kernel Stein test of ``observed ~ model``.

    Draws ``B`` edge indices for the observed statistic, simulates ``m`` null
    networks and gives each fresh index draws, then rejects when the observed
    statistic exceeds the empirical ``(1-alpha)`` quantile of the null
    statistics. A precomputed ``null_statistics`` array (same model, kernel
    and ``B``) may be passed to skip the simulation.
    """
    _check(model, observed, m if null_statistics is None else len(null_statistics), alpha)
    t0 = time.perf_counter()
    obs_seed, null_seed = child_seeds(seed, 2)
    tau = gkss_resampled(model, observed, kernel, B, np.random.Generator(np.random.PCG64(obs_seed)))
    if null_statistics is None:
        null_statistics = simulate_null_statistics(model, kernel, B, m, null_seed, burn_in, thin)
    elapsed = 1e3 * (time.perf_counter() - t0)
    return decide("gkss", tau.value, null_statistics, alpha, seed=_seed_int(seed),
                  wall_time_ms=elapsed, B=B, kernel=kernel.describe())


# ---------------------------------------------------------------------------
# summary-statistic baselines


def _adjacency_stack(n: int, E: np.ndarray) -> np.ndarray:
    rows, cols = pair_arrays(n)
    A = np.zeros((E.shape[0], n, n), dtype=np.float32)
    A[:, rows, cols] = E
    A[:, cols, rows] = E
    return A


def degree_matrix(n: int, E: np.ndarray) -> np.ndarray:
    rows, cols = pair_arrays(n)
    E = np.asarray(E, dtype=np.int64)
    D = np.zeros((E.shape[0], n), dtype=np.int64)
    np.add.at(D.T, rows, E.T)
    np.add.at(D.T, cols, E.T)
    return D


def histogram_matrix(n: int, E: np.ndarray, which: str) -> np.ndarray:
    """Summary histograms (rows) for a stack of edge vectors."""
    E = np.asarray(E, dtype=bool)
    G = E.shape[0]
    if which == "degree":
        D = degree_matrix(n, E)
        flat = D + n * np.arange(G)[:, None]
        return np.bincount(flat.ravel(), minlength=n * G).reshape(G, n)
    if which == "espart":
        A = _adjacency_stack(n, E)
        rows, cols = pair_arrays(n)
        common = np.rint((A @ A)[:, rows, cols]).astype(np.int64)
        L = max(n - 1, 1)
        gi = np.nonzero(E)
        flat = common[gi] + L * gi[0]
        return np.bincount(flat, minlength=L * G).reshape(G, L)
    raise ValueError(f"unsupported summary {which!r}")


def _normalise_rows(H: np.ndarray) -> np.ndarray:
    tot = H.sum(axis=1, keepdims=True).astype(float)
    return np.divide(H, tot, out=np.zeros(H.shape, dtype=float), where=tot > 0)


def tv_distance(p, q) -> float:
    """Half the L1 distance between two probability vectors on a common support."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    L = max(p.shape[0], q.shape[0])
    p = np.pad(p, (0, L - p.shape[0]))
    q = np.pad(q, (0, L - q.shape[0]))
    return 0.5 * float(np.abs(p - q).sum())


def degree_variance(g: Graph) -> float:
    return float(np.var(g.degrees, ddof=1)) if g.n > 1 else 0.0


def degree_variance_test(model: ErgmModel, observed: Graph, m: int = 200, alpha: float = 0.05,
                         seed: int = 0, two_sided: bool = False, burn_in: int = DEFAULT_BURN_IN,
                         thin: int = DEFAULT_THIN) -> TestReport:
    """Monte Carlo test on the sample variance of the degree sequence.

    One-sided upper by default; ``two_sided`` uses the distance to the mean
    of the simulated variances.
    """
    _check(model, observed, m, alpha)
    t0 = time.perf_counter()
    E = glauber_sample_edges(model, m, burn_in, thin, seed=seed)
    null = np.var(degree_matrix(model.n, E), axis=1, ddof=1)
    obs = degree_variance(observed)
    if two_sided:
        centre = null.mean()
        null, obs = np.abs(null - centre), abs(obs - centre)
    elapsed = 1e3 * (time.perf_counter() - t0)
    return decide("degree", obs, null, alpha, seed=_seed_int(seed), wall_time_ms=elapsed,
                  extra={"two_sided": two_sided})


def mean_tv(hist_ref: np.ndarray, hist_obs: np.ndarray) -> np.ndarray:
    """Mean TV distance between each observed histogram and all reference histograms.

    ``hist_ref`` is ``(m', L)`` or ``(k, m', L)`` (one reference batch per
    observation); ``hist_obs`` is ``(k, L)``.
    """
    P_obs = _normalise_rows(hist_obs)
    if hist_ref.ndim == 2:
        P_ref = _normalise_rows(hist_ref)
        return 0.5 * np.abs(P_ref[None, :, :] - P_obs[:, None, :]).sum(axis=2).mean(axis=1)
    k, mp, L = hist_ref.shape
    P_ref = _normalise_rows(hist_ref.reshape(k * mp, L)).reshape(k, mp, L)
    return 0.5 * np.abs(P_ref - P_obs[:, None, :]).sum(axis=2).mean(axis=1)


def mgra_tv_test(model: ErgmModel, observed: Graph, stat_kind: str = "degree", m_prime: int = 100,
                 m: int = 200, alpha: float = 0.05, seed: int = 0, burn_in: int = DEFAULT_BURN_IN,
                 thin: int = DEFAULT_THIN) -> TestReport:
    """Mean total-variation distance between summary distributions.

    The observed network is compared with ``m_prime`` simulated networks; each
    of the ``m`` null replicates gets its own independent batch of
    ``m_prime`` reference networks.
    """
    _check(model, observed, m, alpha)
    if m_prime < 10:
        raise ConfigurationError("m_prime must be at least 10")
    if stat_kind not in ("degree", "espart"):
        raise ConfigurationError("stat_kind must be 'degree' or 'espart'")
    t0 = time.perf_counter()
    ref_seed, null_seed = child_seeds(seed, 2)
    n = model.n
    R = glauber_sample_edges(model, m_prime, burn_in, thin, np.random.Generator(np.random.PCG64(ref_seed)))
    h_obs = histogram_matrix(n, observed.edges[None, :], stat_kind)
    obs = float(mean_tv(histogram_matrix(n, R, stat_kind), h_obs)[0])
    # one chain: m null replicates followed by m * m_prime reference networks
    Z = glauber_sample_edges(model, m * (1 + m_prime), burn_in, thin,
                             np.random.Generator(np.random.PCG64(null_seed)))
    H = histogram_matrix(n, Z, stat_kind)
    h_null = H[:m]
    h_ref = H[m:].reshape(m, m_prime, -1)
    null = mean_tv(h_ref, h_null)
    elapsed = 1e3 * (time.perf_counter() - t0)
    return decide(f"mgra-{stat_kind}", obs, null, alpha, seed=_seed_int(seed), wall_time_ms=elapsed,
                  extra={"m_prime": m_prime})


def _summary_vectors(n: int, E: np.ndarray, stat_vector) -> np.ndarray:
    if isinstance(stat_vector, str):
        return histogram_matrix(n, E, stat_vector).astype(float)
    graphs = [Graph(n, row) for row in E]
    return np.array([[count_statistic(g, spec) for spec in stat_vector] for g in graphs])


def mahalanobis_distances(S: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    dim = cov.shape[0]
    tr = float(np.trace(cov))
    if tr <= 0:
        raise RankDeficiencyError(
            f"covariance is zero; all coordinates {list(range(dim))} are constant under the null"
        )
    reg = cov + (1e-8 * tr / dim) * np.eye(dim)
    try:
        L = np.linalg.cholesky(reg)
    except np.linalg.LinAlgError:
        bad = np.flatnonzero(np.diag(cov) <= 1e-12 * tr).tolist()
        raise RankDeficiencyError(f"regularised covariance is singular; offending coordinates {bad}")
    Z = np.linalg.solve(L, (np.atleast_2d(S) - mu).T)
    return np.sum(Z * Z, axis=0)


def mahalanobis_test(model: ErgmModel, observed: Graph, stat_vector="degree", m: int = 200,
                     alpha: float = 0.05, seed: int = 0, burn_in: int = DEFAULT_BURN_IN,
                     thin: int = DEFAULT_THIN) -> TestReport:
    """Mahalanobis distance of a summary vector from its simulated null moments.

    ``stat_vector`` is ``"degree"`` (degree histogram) or a sequence of
    :class:`StatisticSpec`. Mean and covariance come from one batch of ``m``
    simulations; the null distribution of the distance from a second,
    disjoint batch.
    """
    _check(model, observed, m, alpha)
    dim = model.n if stat_vector == "degree" else len(stat_vector)
    if m <= dim:
        raise ConfigurationError(f"need m > statistic dimension ({dim}), got m={m}")
    t0 = time.perf_counter()
    moment_seed, null_seed = child_seeds(seed, 2)
    n = model.n
    S1 = _summary_vectors(n, glauber_sample_edges(model, m, burn_in, thin,
                                                  np.random.Generator(np.random.PCG64(moment_seed))),
                          stat_vector)
    mu = S1.mean(axis=0)
    cov = (S1 - mu).T @ (S1 - mu) / m
    s_obs = _summary_vectors(n, observed.edges[None, :], stat_vector)
    obs = float(mahalanobis_distances(s_obs, mu, cov)[0])
    S2 = _summary_vectors(n, glauber_sample_edges(model, m, burn_in, thin,
                                                  np.random.Generator(np.random.PCG64(null_seed))),
                          stat_vector)
    null = mahalanobis_distances(S2, mu, cov)
    elapsed = 1e3 * (time.perf_counter() - t0)
    name = "md-degree" if stat_vector == "degree" else "md"
    return decide(name, obs, null, alpha, seed=_seed_int(seed), wall_time_ms=elapsed)


# ---------------------------------------------------------------------------
# multi-sample tests


def bootstrap_statistics(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``(1/m^2) sum_ij W_i W_j H_ij`` for each row of multipliers ``W``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    return np.einsum("bi,ij,bj->b", W, H, W) / H.shape[0] ** 2


def wild_bootstrap(H: np.ndarray, n_boot: int, rng) -> np.ndarray:
    """V-statistic replicates with i.i.d. Rademacher multipliers."""
    rng = make_rng(rng)
    W = rng.choice(np.array([-1.0, 1.0]), size=(n_boot, H.shape[0]))
    return bootstrap_statistics(H, W)


def _multi_test(name, operator, model, observations, kernel, alpha, n_boot, seed, B):
    observations = list(observations)
    if len(observations) < 1:
        raise ConfigurationError("need at least one observation")
    for g in observations:
        if g.n != model.n:
            raise ConfigurationError("all observations must have the model's vertex count")
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must lie in (0, 1)")
    t0 = time.perf_counter()
    draw_seed, boot_seed = child_seeds(seed, 2)
    N = n_pairs(model.n)
    if B is None:
        draws = [np.arange(N)] * len(observations)
    else:
        rng = np.random.Generator(np.random.PCG64(draw_seed))
        draws = [rng.integers(0, N, size=B) for _ in observations]
    H = stein_cross_gram(model, observations, draws, kernel, operator)
    stat = float(H.mean())
    reps = wild_bootstrap(H, n_boot, np.random.Generator(np.random.PCG64(boot_seed)))
    elapsed = 1e3 * (time.perf_counter() - t0)
    report = decide(name, stat, reps, alpha, seed=_seed_int(seed), wall_time_ms=elapsed, B=B,
                    kernel=kernel.describe(), extra={"n_obs": len(observations)})
    report.extra["H"] = H
    return report


def gksd_multi_test(model: ErgmModel, observations: Sequence[Graph], kernel: GraphKernel,
                    alpha: float = 0.05, n_boot: int = 300, seed: int = 0,
                    B: int | None = None) -> TestReport:
    """Graph kernel Stein discrepancy test for i.i.d. networks.

    ``B`` optionally subsamples edge indices per network instead of using all
    ``N`` of them.
    """
    if len(observations) < 2:
        raise ConfigurationError("the multi-sample test needs at least two networks")
    return _multi_test("gksd", "glauber", model, observations, kernel, alpha, n_boot, seed, B)


def kdsd_multi_test(model: ErgmModel, observations: Sequence[Graph], kernel: GraphKernel,
                    alpha: float = 0.05, n_boot: int = 300, seed: int = 0,
                    B: int | None = None) -> TestReport:
    """Same envelope as :func:`gksd_multi_test` with the cyclic-flip discrete operator."""
    if len(observations) < 2:
        raise ConfigurationError("the multi-sample test needs at least two networks")
    return _multi_test("kdsd", "kdsd", model, observations, kernel, alpha, n_boot, seed, B)


def gksd_statistic(model, observations, kernel, B=None, seed=0) -> float:
    """V-statistic alone (no bootstrap); allows a single observation."""
    N = n_pairs(model.n)
    observations = list(observations)
    if B is None:
        draws = [np.arange(N)] * len(observations)
    else:
        rng = make_rng(seed)
        draws = [rng.integers(0, N, size=B) for _ in observations]
    return float(stein_cross_gram(model, observations, draws, kernel).mean())
