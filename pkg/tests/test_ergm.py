import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps
from scipy.special import expit

import oracles
from gkss.ergm import (
    CapacityError,
    ErgmModel,
    UnsupportedStatisticError,
    assumption1_margin,
    conditional_edge_prob,
    conditional_edge_probs,
    e2st,
    edges_only,
    er_model,
    exact_distribution,
    glauber_sample,
    glauber_sample_edges,
    log_unnormalized_density,
    phi_function,
    solve_a_star,
)
from gkss.graph import Graph, StatisticSpec, n_pairs


def tv(p, q):
    return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum()


def empirical(exact, E):
    idx = (E.astype(np.int64) << np.arange(E.shape[1])).sum(axis=1)
    return np.bincount(idx, minlength=exact.probs.shape[0]) / E.shape[0]


class TestModel:
    def test_first_stat_must_be_edges(self):
        with pytest.raises(ValueError):
            ErgmModel((1.0,), (StatisticSpec("2star"),), 5)

    def test_mixed_scaling_rejected(self):
        with pytest.raises(ValueError):
            ErgmModel((1.0, 1.0), (StatisticSpec("edges"), StatisticSpec("2star", "injection")), 5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ErgmModel((1.0, 2.0), (StatisticSpec("edges"),), 5)

    def test_er_model(self):
        m = er_model(0.25, 6)
        assert expit(m.beta[0]) == pytest.approx(0.25)


class TestConditionals:
    def test_examples(self, rng):
        g = oracles.random_graph(7, 0.4, rng)
        assert conditional_edge_prob(edges_only(-2.0, 7), g, 3) == pytest.approx(0.119203, abs=1e-6)
        assert conditional_edge_prob(edges_only(0.0, 7), g, 3) == 0.5
        q = conditional_edge_probs(e2st((-2, 0, 0.01), 20), Graph.empty(20))
        np.testing.assert_allclose(q, expit(-2.0))

    def test_extreme_arguments_stable(self):
        q = conditional_edge_probs(edges_only(700.0, 4), Graph.empty(4))
        assert np.all(q == 1.0)
        q = conditional_edge_probs(edges_only(-700.0, 4), Graph.empty(4))
        assert np.all((q >= 0) & (q < 1e-300))

    @given(st.integers(0, 2 ** 15 - 1), st.integers(0, 14))
    def test_independent_of_own_indicator(self, code, s):
        model = e2st((-1.0, 0.3, -0.2), 6)
        g = Graph(6, ((code >> np.arange(15)) & 1).astype(bool))
        a = conditional_edge_prob(model, g.with_edge(s, True), s)
        b = conditional_edge_prob(model, g.with_edge(s, False), s)
        assert a == b

    def test_log_density_examples(self):
        assert log_unnormalized_density(e2st((-2, 0, 0.01), 5), Graph.empty(5)) == 0
        assert log_unnormalized_density(edges_only(1.0, 3), Graph.complete(3)) == 3

    def test_log_density_difference_is_change(self, rng):
        P = rng.random((6, 6))
        P = P + P.T
        np.fill_diagonal(P, 0)
        model = ErgmModel((-0.5, 0.2, 0.3, -0.1, 0.4),
                          (StatisticSpec("edges"), StatisticSpec("2star"), StatisticSpec("triangle"),
                           StatisticSpec("altkstar", lam=0.8), StatisticSpec("homophily", P=P)), 6)
        for _ in range(50):
            g = oracles.random_graph(6, 0.5, rng)
            s = int(rng.integers(g.N))
            diff = log_unnormalized_density(model, g.with_edge(s, True)) - \
                log_unnormalized_density(model, g.with_edge(s, False))
            q1 = conditional_edge_prob(model, g, s)
            assert math.log(q1 / (1 - q1)) == pytest.approx(diff, abs=1e-12)


class TestExact:
    def test_uniform(self):
        ex = exact_distribution(edges_only(0.0, 3))
        np.testing.assert_allclose(ex.probs, 1 / 8)

    def test_bernoulli_factorisation(self):
        ex = exact_distribution(edges_only(-2.0, 3))
        p = expit(-2.0)
        e = ex.states.sum(axis=1)
        np.testing.assert_allclose(ex.probs, p ** e * (1 - p) ** (3 - e), rtol=1e-12)

    def test_sums_to_one_and_argmax(self):
        ex = exact_distribution(e2st((-1, 0.2, 0.3), 5))
        assert ex.probs.sum() == pytest.approx(1.0, abs=1e-12)
        ex5 = exact_distribution(edges_only(5.0, 5))
        assert ex5.states[np.argmax(ex5.probs)].all()

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            exact_distribution(edges_only(0.0, 7))

    def test_detailed_balance(self):
        model = e2st((-0.7, 0.25, -0.4), 4)
        ex = exact_distribution(model)
        N = n_pairs(4)
        for k, g in enumerate(ex.graphs()):
            q1 = conditional_edge_probs(model, g)
            for s in range(N):
                h = g.toggled(s)
                j = ex.index_of(h.edges)
                fwd = q1[s] if not g.edges[s] else 1 - q1[s]
                q1h = conditional_edge_prob(model, h, s)
                back = q1h if not h.edges[s] else 1 - q1h
                assert ex.probs[k] * fwd / N == pytest.approx(ex.probs[j] * back / N, abs=1e-14, rel=1e-10)


class TestSampler:
    def test_reproducible(self):
        m = e2st((-2, 0.1, 0.05), 12)
        a = glauber_sample_edges(m, 5, 20, 2, seed=7)
        b = glauber_sample_edges(m, 5, 20, 2, seed=7)
        c = glauber_sample_edges(m, 5, 20, 2, seed=8)
        assert (a == b).all() and not (a == c).all()

    def test_uniform_density(self):
        E = glauber_sample_edges(edges_only(0.0, 8), 2000, 10, 2, seed=1)
        dens = E.mean(axis=1)
        assert abs(dens.mean() - 0.5) < 3 * dens.std() / math.sqrt(2000)

    def test_edges_only_density(self):
        E = glauber_sample_edges(edges_only(-2.0, 8), 2000, 10, 2, seed=2)
        dens = E.mean(axis=1)
        assert abs(dens.mean() - 0.1192) < 3 * dens.std() / math.sqrt(2000)

    def test_edges_only_pairwise_independence(self):
        E = glauber_sample_edges(edges_only(-1.0, 5), 5000, 10, 3, seed=3)
        N = E.shape[1]
        pvals = []
        for s in range(N):
            for t in range(s + 1, N):
                table = np.array([[np.sum(~E[:, s] & ~E[:, t]), np.sum(~E[:, s] & E[:, t])],
                                  [np.sum(E[:, s] & ~E[:, t]), np.sum(E[:, s] & E[:, t])]])
                pvals.append(sps.chi2_contingency(table)[1])
        assert min(pvals) > 0.01 / len(pvals)

    @pytest.mark.parametrize("stats_", [
        ("edges", "2star", "triangle"),
        ("edges", "kstar:3", "altkstar:0.6"),
    ])
    def test_matches_exact_all_kinds(self, stats_):
        specs = tuple(StatisticSpec.parse(s) for s in stats_)
        model = ErgmModel((-0.4, 0.3, -0.25), specs, 4)
        ex = exact_distribution(model)
        E = glauber_sample_edges(model, 30000, 50, 3, seed=11)
        assert tv(empirical(ex, E), ex.probs) < 0.02

    def test_homophily_matches_exact(self):
        P = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)
        model = ErgmModel((-0.5, 1.2), (StatisticSpec("edges"), StatisticSpec("homophily", P=P)), 4)
        ex = exact_distribution(model)
        E = glauber_sample_edges(model, 30000, 50, 3, seed=12)
        assert tv(empirical(ex, E), ex.probs) < 0.02

    def test_injection_scaled_matches_exact(self):
        model = e2st((-0.3, 0.5, 0.4), 4, scaling="injection")
        ex = exact_distribution(model)
        E = glauber_sample_edges(model, 30000, 50, 3, seed=13)
        assert tv(empirical(ex, E), ex.probs) < 0.02

    def test_graph_output(self):
        gs = glauber_sample(edges_only(-1.0, 6), 3, seed=0)
        assert len(gs) == 3 and all(g.check_degrees() for g in gs)

    @pytest.mark.parametrize("kw", [dict(m=0), dict(m=1, burn_in=-1), dict(m=1, thin=-1)])
    def test_bad_arguments(self, kw):
        with pytest.raises(ValueError):
            glauber_sample_edges(edges_only(0.0, 4), **kw)


class TestAStar:
    def test_edges_only_sigmoid(self):
        res = solve_a_star(edges_only(-2.0, 10), "sigmoid")
        assert res.converged and res.a_star == pytest.approx(0.119203, abs=1e-6)

    def test_zero_beta(self):
        for conv in ("tanh", "sigmoid"):
            res = solve_a_star(e2st((0, 0, 0), 10), conv)
            assert res.a_star == pytest.approx(0.5)

    def test_e2st_both_conventions(self):
        m = e2st((-2, 0, 0.01), 20)
        tanh = solve_a_star(m, "tanh")
        sig = solve_a_star(m, "sigmoid")
        assert tanh.a_star == pytest.approx(0.017987, abs=1e-6)
        assert sig.a_star == pytest.approx(0.119248, abs=1e-6)
        assert tanh.assumption1_margin == pytest.approx(0.97)

    def test_default_convention(self):
        assert solve_a_star(e2st((-2, 0, 0.01), 20)).convention == "sigmoid"
        assert solve_a_star(e2st((-2, 0, 0.01), 20, "injection")).convention == "tanh"

    def test_violation_warns(self):
        m = e2st((-2, 2.0, 0.0), 20)
        assert assumption1_margin(m) < 0
        with pytest.warns(RuntimeWarning):
            res = solve_a_star(m, "tanh")
        assert not res.satisfies_assumption1

    def test_unsupported(self):
        m = ErgmModel((-1, 0.1), (StatisticSpec("edges"), StatisticSpec("altkstar", lam=0.5)), 10)
        with pytest.raises(UnsupportedStatisticError):
            solve_a_star(m)

    def test_nonconvergence_reports_last_iterate(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = solve_a_star(e2st((-2, 0.1, 0.0), 10), "tanh", tol=1e-300, max_iter=3)
        assert not res.converged and res.iterations == 3

    @given(st.lists(st.floats(-0.3, 0.3), min_size=2, max_size=2), st.floats(-3, 3),
           st.sampled_from(["tanh", "sigmoid"]))
    def test_fixed_point_residual(self, b, b1, conv):
        m = e2st((b1, b[0], b[1] / 3), 10)
        if assumption1_margin(m) <= 0:
            return
        res = solve_a_star(m, conv)
        _, phi = phi_function(m, conv)
        assert res.converged and abs(phi(res.a_star) - res.a_star) < 1e-10
