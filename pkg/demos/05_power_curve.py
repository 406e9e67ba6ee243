"""
A small power curve
===================

The power harness runs every test in a roster over a grid of one model
coefficient. Each trial is seeded from (seed, grid index, trial), so the
rejection counts do not depend on the number of worker processes.
"""

import sys

from gkss.ergm import e2st
from gkss.power import ExperimentPlan, run_power, write_csv

plan = ExperimentPlan(
    e2st((-2, 0, 0.01), 20), index=1, values=[-0.3, 0.0, 0.3], trials=20,
    tests=["gkss", "degree", "md-degree"], seed=1, B=100, m=100, kernel="wl:5",
    share_null=True,
)
rows = run_power(plan, workers=1)
write_csv(rows, sys.stdout)
