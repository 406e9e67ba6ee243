"""
Many observed networks
======================

With 30 networks we can average the Stein kernel over the sample and
calibrate with a wild bootstrap. Both the graph-kernel version and the
discrete-Stein (KDSD) version are shown.
"""

from gkss import gof
from gkss.ergm import e2st, glauber_sample
from gkss.kernels import WLKernel

null = e2st((-2, 0, 0.01), 20)
kernel = WLKernel(3)

for beta2 in (0.0, 0.1):
    xs = glauber_sample(e2st((-2, beta2, 0.01), 20), 30, seed=11)
    for test in (gof.gksd_multi_test, gof.kdsd_multi_test):
        rep = test(null, xs, kernel, n_boot=300, seed=2)
        print(f"beta2 = {beta2:.1f} {rep.test_name:>5}: stat {rep.observed_statistic:.4g}, "
              f"p = {rep.p_value:.3f}, reject = {rep.reject}")
