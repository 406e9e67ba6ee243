import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gkss.graph import Graph
from gkss.kernels import (
    EdgeCountKernel,
    GaussAdjKernel,
    GeometricRWKernel,
    GraphBatch,
    KernelDivergenceError,
    KStepRWKernel,
    ShortestPathKernel,
    VEGKernel,
    WLKernel,
    gram,
    gram_min_eigenvalue,
    grw_dense,
    max_grw_lambda,
    parse_kernel,
    wl_features,
)

LABEL_FREE = [WLKernel(3), ShortestPathKernel(), KStepRWKernel((1.0, 0.5, 0.25)),
              GeometricRWKernel(0.01), EdgeCountKernel()]


def random_graphs(rng, count, n=8, p=None):
    return [oracles.random_graph(n, rng.random() * 0.6 if p is None else p, rng) for _ in range(count)]


class TestExamples:
    def test_veg_identical(self, rng):
        g = oracles.random_graph(6, 0.5, rng)
        assert VEGKernel(1.0)(g, g) == 1.0

    def test_wl_level_zero(self, rng):
        g, h = random_graphs(rng, 2, n=7)
        assert WLKernel(0)(g, h) == 49
        assert WLKernel(0, normalize=True)(g, h) == pytest.approx(1.0)

    def test_edgecount(self):
        k3 = Graph.complete(3)
        p3 = Graph.from_pairs(3, [(0, 1), (1, 2)])
        assert EdgeCountKernel()(k3, p3) == 6

    def test_grw_single_edges(self):
        e = Graph.complete(2)
        val = GeometricRWKernel(1 / 3)(e, e)
        assert val == pytest.approx(oracles.grw_series(e, e, 1 / 3), abs=1e-10)

    def test_wl_k3_features(self):
        f = wl_features(Graph.complete(3), 1)
        assert [sorted(b.values()) for b in f.blocks] == [[3], [3]]

    def test_wl_star_vs_triangle(self):
        star = Graph.from_pairs(4, [(0, 1), (0, 2), (0, 3)])
        tri = Graph.from_pairs(4, [(0, 1), (0, 2), (1, 2)])
        fa, fb = WLKernel(1).features([star, tri])
        assert fa.blocks[0] == fb.blocks[0]
        assert fa.blocks[1] != fb.blocks[1]

    def test_single_and_duplicated_gram(self, rng):
        g = oracles.random_graph(7, 0.4, rng)
        for k in LABEL_FREE + [VEGKernel(1.0)]:
            assert gram(k, [g]).shape == (1, 1)
            K = gram(k, [g, g, g])
            assert np.allclose(K, K[0, 0])

    def test_gram_empty(self):
        with pytest.raises(ValueError):
            gram(WLKernel(2), [])


class TestOracles:
    def test_wl_matches_exact_refinement(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 9))
            g, h = random_graphs(rng, 2, n=n)
            for levels in (0, 1, 3, 5):
                assert WLKernel(levels)(g, h) == oracles.wl_kernel(g, h, levels)

    def test_wl_feature_dot(self, rng):
        g, h = random_graphs(rng, 2)
        fg, fh = WLKernel(4).features([g, h])
        assert fg.dot(fh) == WLKernel(4)(g, h)
        assert sum(fg.blocks[0].values()) == g.n

    def test_sp_matches_enumeration(self, rng):
        for _ in range(20):
            g, h = random_graphs(rng, 2, n=int(rng.integers(2, 9)))
            assert ShortestPathKernel()(g, h) == oracles.sp_kernel(g, h)

    def test_sp_unequal_sizes(self, rng):
        g = oracles.random_graph(5, 0.4, rng)
        h = oracles.random_graph(7, 0.4, rng)
        assert ShortestPathKernel()(g, h) == oracles.sp_kernel(g, h)

    def test_veg_matches_histograms(self, rng):
        for _ in range(20):
            g, h = random_graphs(rng, 2, n=int(rng.integers(2, 9)))
            for sigma in (0.5, 1.0, 3.0):
                assert VEGKernel(sigma)(g, h) == pytest.approx(oracles.veg_kernel(g, h, sigma), rel=1e-12)

    def test_gaussadj(self, rng):
        g, h = random_graphs(rng, 2)
        d = np.sum(g.edges != h.edges)
        assert GaussAdjKernel(2.0)(g, h) == pytest.approx(np.exp(-d / 4.0))

    def test_grw_matches_dense_and_series(self, rng):
        for _ in range(10):
            g, h = random_graphs(rng, 2, n=6, p=0.3)
            lam = 0.5 * max_grw_lambda([g, h])
            if not np.isfinite(lam):
                lam = 0.1
            val = GeometricRWKernel(lam)(g, h)
            assert val == pytest.approx(grw_dense(g, h, lam), rel=1e-10)
            assert val == pytest.approx(oracles.grw_series(g, h, lam, 2000), rel=1e-8)

    def test_kstep_matches_product_graph(self, rng):
        g, h = random_graphs(rng, 2, n=6)
        w = (1.0, 0.3, 0.1, 0.05)
        assert KStepRWKernel(w)(g, h) == pytest.approx(oracles.kstep_product(g, h, w), rel=1e-12)

    def test_grw_small_lambda_limit(self, rng):
        g, h = random_graphs(rng, 2, n=7, p=0.4)
        lam = 1e-4
        a = GeometricRWKernel(lam)(g, h)
        b = KStepRWKernel((1.0, lam))(g, h)
        assert abs(a - b) / abs(b) < 1e-6

    def test_grw_divergence(self):
        k4 = Graph.complete(4)
        with pytest.raises(KernelDivergenceError):
            GeometricRWKernel(1 / 3)(k4, k4)
        with pytest.raises(KernelDivergenceError):
            grw_dense(k4, k4, 1 / 3)


class TestProperties:
    @pytest.mark.parametrize("kernel", LABEL_FREE, ids=lambda k: k.describe())
    def test_relabel_invariance(self, kernel, rng):
        for _ in range(5):
            g, h = random_graphs(rng, 2)
            perm = rng.permutation(g.n)
            assert kernel(g.relabel(perm), h.relabel(perm)) == pytest.approx(kernel(g, h), rel=1e-9)
            assert kernel(g.relabel(perm), h) == pytest.approx(kernel(g, h), rel=1e-9)

    def test_veg_label_sensitive(self):
        g = Graph.from_pairs(4, [(0, 1)])
        h = Graph.from_pairs(4, [(2, 3)])
        assert VEGKernel(1.0)(g, h) < 1.0
        assert WLKernel(3, normalize=True)(g, h) == pytest.approx(1.0)

    @pytest.mark.parametrize("spec", ["wl:3", "sp", "veg:1.0", "gaussadj:1.0", "kstep:1,0.5",
                                      "edgecount", "grw:0.01"])
    def test_psd_and_symmetric(self, spec, rng):
        gs = random_graphs(rng, 10, n=10, p=0.25)
        K = gram(parse_kernel(spec), gs)
        assert np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * max(1.0, np.abs(K).max())

    @pytest.mark.parametrize("spec", ["wl:3:norm", "sp:norm", "kstep:1,0.5:norm", "edgecount:norm"])
    def test_normalisation(self, spec, rng):
        gs = random_graphs(rng, 6, n=8, p=0.4)
        K = gram(parse_kernel(spec), gs)
        np.testing.assert_allclose(np.diag(K), 1.0)
        assert np.all(np.abs(K) <= 1 + 1e-12)

    def test_wl_order_independent(self, rng):
        gs = random_graphs(rng, 6)
        perm = rng.permutation(6)
        K = gram(WLKernel(4), gs)
        Kp = gram(WLKernel(4), [gs[i] for i in perm])
        np.testing.assert_array_equal(K[np.ix_(perm, perm)], Kp)

    @given(st.integers(0, 2 ** 21 - 1), st.integers(0, 2 ** 21 - 1))
    def test_wl_collision_free(self, a, b):
        g = Graph(7, ((a >> np.arange(21)) & 1).astype(bool))
        h = Graph(7, ((b >> np.arange(21)) & 1).astype(bool))
        assert WLKernel(3)(g, h) == oracles.wl_kernel(g, h, 3)


class TestBatchAndGroups:
    def test_from_toggles(self, rng):
        g = oracles.random_graph(7, 0.4, rng)
        toggles = np.array([-1, 0, 5, 20, 5])
        batch = GraphBatch.from_toggles(g, toggles)
        for i, t in enumerate(toggles):
            expect = g if t < 0 else g.toggled(int(t))
            assert batch.graph(i) == expect

    @pytest.mark.parametrize("spec", ["wl:3", "sp", "veg:1.0", "edgecount", "grw:0.02", "wl:2:norm"])
    def test_group_gram_matches_dense(self, spec, rng):
        kernel = parse_kernel(spec)
        gs = random_graphs(rng, 9, n=7, p=0.3)
        groups = np.array([0, 0, 1, 2, 2, 2, 1, 0, 2])
        w = rng.normal(size=9)
        K = gram(kernel, gs)
        W = np.zeros((3, 9))
        W[groups, np.arange(9)] = w
        expect = W @ K @ W.T
        got = kernel.group_gram(GraphBatch.from_graphs(gs), groups, w, 3)
        np.testing.assert_allclose(got, expect, rtol=1e-10, atol=1e-10)
        diag = kernel.group_gram(GraphBatch.from_graphs(gs), groups, w, 3, block_diagonal=True)
        np.testing.assert_allclose(diag, np.diag(expect), rtol=1e-10, atol=1e-10)

    def test_parse_errors(self):
        for bad in ("nope", "wl:3:4", "wl:x"):
            with pytest.raises(ValueError):
                parse_kernel(bad)
        assert parse_kernel("grw").lam == pytest.approx(1 / 3)
        assert parse_kernel("wl:2:norm").describe() == "wl:2:norm"


def test_gram_min_eigenvalue_helper(rng):
    gs = random_graphs(rng, 5)
    assert gram_min_eigenvalue(WLKernel(2), gs) >= -1e-8
