"""Acceptance criteria. Each test prints one PASS/FAIL line."""

import os
import time

import numpy as np
import pytest

import oracles
from gkss import gof
from gkss.config import load_model
from gkss.ergm import (
    CONVENTIONS,
    e2st,
    exact_distribution,
    glauber_sample,
    glauber_sample_edges,
    phi_function,
    solve_a_star,
)
from gkss.graph import n_pairs, read_edge_list
from gkss.kernels import WLKernel, gram, max_grw_lambda, parse_kernel
from gkss.power import ExperimentPlan, run_power
from gkss.rng import derive_seed
from gkss.stein import (
    SteinKernelCache,
    gkss_full,
    gkss_resampled,
    stein_component,
    stein_h,
    stein_values,
)

pytestmark = pytest.mark.acceptance

NULL20 = e2st((-2, 0, 0.01), 20)
FAMILIES = ["wl:3", "sp", "veg:1.0", "gaussadj:1.0", "edgecount", "grw:0.02", "kstep:1,0.5"]


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def test_c1_stein_identity(verdict):
    rng = np.random.default_rng(1)
    model = e2st((-0.6, 0.3, -0.2), 4)
    start = time.perf_counter()
    ex = exact_distribution(model)
    graphs = ex.graphs()
    worst = 0.0
    for _ in range(20):
        table = {g.key(): v for g, v in zip(graphs, rng.normal(size=len(graphs)))}
        for s in range(n_pairs(4)):
            total = sum(p * stein_component(model, table, g, s) for p, g in zip(ex.probs, graphs))
            worst = max(worst, abs(total))
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-10 and elapsed < 1.0, f"max |E_q A f| = {worst:.2e}, {elapsed:.2f} s")


def test_c2_sampler(verdict):
    model = e2st((-0.5, 0.3, -0.4), 4)
    glauber_sample_edges(model, 1, 1, 1, seed=0)  # compile outside the timer
    start = time.perf_counter()
    E = glauber_sample_edges(model, 50_000, seed=2)
    elapsed = time.perf_counter() - start
    ex = exact_distribution(model)
    codes = (E.astype(np.int64) << np.arange(E.shape[1])).sum(axis=1)
    emp = np.bincount(codes, minlength=ex.probs.size) / E.shape[0]
    tv = 0.5 * np.abs(emp - ex.probs).sum()
    verdict(2, tv < 0.02 and elapsed < 30, f"TV = {tv:.4f}, {elapsed:.1f} s")


def test_c3_algebraic_equivalence(verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    for spec in FAMILIES:
        kernel = parse_kernel(spec)
        for _ in range(50):
            g = oracles.random_graph(7, 0.3, rng)
            cache = SteinKernelCache(e2st((-1.0, 0.1, 0.2), 7), g, kernel)
            s, t = (int(v) for v in rng.integers(0, g.N, size=2))
            nine = oracles.stein_h_nine(kernel, cache.q1, g, s, t)
            worst = max(worst, abs(stein_h(cache, s, t) - nine) / max(1.0, abs(kernel(g, g))))
    model8 = e2st((-1.0, 0.1, 0.2), 8)
    strat = 0.0
    for spec in FAMILIES:
        kernel = parse_kernel(spec)
        g = oracles.random_graph(8, 0.3, rng)
        full = gkss_full(model8, g, kernel).value
        res = gkss_resampled(model8, g, kernel, 2 * g.N, stratified=True).value
        strat = max(strat, abs(full - res) / max(1.0, abs(full)))
    verdict(3, worst < 1e-12 and strat < 1e-12,
            f"4 vs 9 terms max rel diff {worst:.1e}; stratified vs full {strat:.1e}")


def test_c4_resampling_expectation(verdict):
    rng = np.random.default_rng(4)
    model = e2st((-1.0, 0.1, 0.1), 10)
    kernel = WLKernel(3)
    g = oracles.random_graph(10, 0.3, rng)
    N, B, reps = g.N, 20, 20_000
    cache = SteinKernelCache(model, g, kernel)
    diag = np.array([stein_h(cache, s, s) for s in range(N)])
    full = gkss_full(model, g, kernel).value
    expect = diag.sum() / (B * N) + (B - 1) / B * full
    draws = [rng.integers(0, N, size=B) for _ in range(reps)]
    vals = stein_values(model, [g] * reps, draws, kernel)
    mean, se = vals.mean(), vals.std(ddof=1) / np.sqrt(reps)
    z = (mean - expect) / se
    verdict(4, abs(z) < 3, f"mean {mean:.6g} vs {expect:.6g}, z = {z:+.2f}")


def test_c5_level_calibration(verdict):
    kernel = WLKernel(5)
    start = time.perf_counter()
    gof.simulate_null_statistics(NULL20, kernel, 100, 500, seed=50)
    per_500 = time.perf_counter() - start
    rej = []
    for t in range(500):
        x = glauber_sample(NULL20, 1, seed=derive_seed(5, t))[0]
        rej.append(gof.gkss_test(NULL20, x, kernel, B=100, m=200, seed=t).reject)
    rate = float(np.mean(rej))
    verdict(5, 0.02 <= rate <= 0.09 and per_500 <= 60,
            f"rejection rate {rate:.3f} over 500 trials; 500 null statistics in {per_500:.1f} s")


def test_c6_power_shape(verdict):
    values = [-0.5, -0.3, -0.02, 0.02, 0.3, 0.5]
    plan = ExperimentPlan(NULL20, 1, values, 200, ["gkss"], seed=6, B=100, m=200,
                          kernel="wl:5", share_null=True)
    rates = {r["grid_value"]: r["rejection_rate"] for r in run_power(plan)}
    small = max(rates[-0.02], rates[0.02])
    big = [rates[v] for v in (-0.5, -0.3, 0.3, 0.5)]
    ok = min(big) > small and min(big) > 2 * 0.05
    verdict(6, ok, "rates " + ", ".join(f"{v:+.2f}:{rates[v]:.3f}" for v in values))


def test_c7_multi_sample_table(verdict):
    kernel = WLKernel(3)

    def rate(test, b2):
        model = e2st((-2, b2, 0.01), 20)
        rej = []
        for t in range(100):
            xs = glauber_sample(model, 30, seed=derive_seed(7, int(round(b2 * 100)), t))
            rej.append(test(NULL20, xs, kernel, seed=t).reject)
        return float(np.mean(rej))

    g0 = rate(gof.gksd_multi_test, 0.0)
    g1 = rate(gof.gksd_multi_test, 0.1)
    k1 = rate(gof.kdsd_multi_test, 0.1)
    ok = abs(g0 - 0.04) <= 0.06 and abs(g1 - 0.54) <= 0.15 and abs(k1 - 0.16) <= 0.12
    verdict(7, ok, f"gKSD b2=0: {g0:.2f} (0.04+-0.06), gKSD b2=0.1: {g1:.2f} (0.54+-0.15), "
                   f"KDSD b2=0.1: {k1:.2f} (0.16+-0.12)")


def test_c8_kernel_psd(verdict):
    rng = np.random.default_rng(8)
    gs = [oracles.random_graph(12, 0.25, rng) for _ in range(10)]
    lam = 0.5 * max_grw_lambda(gs)
    specs = ["wl:3", "sp", "veg:1.0", f"grw:{lam!r}", "gaussadj:1.0"]
    mins = {}
    for spec in specs:
        K = gram(parse_kernel(spec), gs)
        mins[spec.split(":")[0]] = np.linalg.eigvalsh(K).min()
    ok = all(v >= -1e-8 for v in mins.values())
    verdict(8, ok, "min eigenvalues " + ", ".join(f"{k}:{v:.2e}" for k, v in mins.items()))


def test_c9_a_star(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    count = 0
    while count < 20:
        beta = (rng.uniform(-3, 3), rng.uniform(-0.5, 0.5), rng.uniform(-0.15, 0.15))
        if abs(beta[1]) + 3 * abs(beta[2]) >= 1:
            continue
        model = e2st(beta, 20)
        for conv in CONVENTIONS:
            res = solve_a_star(model, conv)
            _, phi = phi_function(model, conv)
            worst = max(worst, abs(phi(res.a_star) - res.a_star))
        count += 1
    ref = {c: solve_a_star(NULL20, c).a_star for c in CONVENTIONS}
    verdict(9, worst < 1e-10,
            f"max residual {worst:.1e}; E2ST(-2,0,0.01) a* tanh {ref['tanh']:.6f}, "
            f"sigmoid {ref['sigmoid']:.6f}, reported reference 0.1176 (not a criterion)")


@pytest.mark.skipif(not os.environ.get("GKSS_LAZEGA"), reason="set GKSS_LAZEGA to a Lazega edge list")
def test_c10_lazega(verdict):
    root = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
    g = read_edge_list(os.environ["GKSS_LAZEGA"])
    kernel = WLKernel(3)
    er = load_model(os.path.join(root, "lawyer_er.toml"))
    fit = load_model(os.path.join(root, "lawyer_e2st.toml"))
    er_rej = np.mean([gof.gkss_test(er, g, kernel, B=200, seed=s).reject for s in range(100)])
    fit_rej = np.mean([gof.gkss_test(fit, g, kernel, B=200, seed=s).reject for s in range(100)])
    ok = 1 - er_rej >= 0.5 and fit_rej >= 0.5
    verdict(10, ok, f"ER non-rejection {1 - er_rej:.2f}, E2ST rejection {fit_rej:.2f}")
