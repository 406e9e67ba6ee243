"""
Summary-statistic baselines
===========================

The same observed network is checked with the degree-variance test, the
graphical TV tests on degree and edgewise-shared-partner histograms, and the
Mahalanobis test on the degree histogram.
"""

from gkss import gof
from gkss.ergm import e2st, glauber_sample

null = e2st((-2, 0, 0.01), 20)
x = glauber_sample(e2st((-2, 0.1, 0.01), 20), 1, seed=3)[0]
print(f"observed: {x.edges.sum()} edges, degree variance {gof.degree_variance(x):.2f}")

reports = [
    gof.degree_variance_test(null, x, m=200, seed=1),
    gof.mgra_tv_test(null, x, "degree", m_prime=100, m=200, seed=1),
    gof.mgra_tv_test(null, x, "espart", m_prime=100, m=200, seed=1),
    gof.mahalanobis_test(null, x, "degree", m=200, seed=1),
]
for rep in reports:
    print(f"{rep.test_name:>12}: stat {rep.observed_statistic:8.4f}  p = {rep.p_value:.3f}  reject = {rep.reject}")
