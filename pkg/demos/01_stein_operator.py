"""
The ERGM Stein operator on a tiny graph
=======================================

At four vertices there are only 64 graphs, so the model can be enumerated
exactly. This lets us check the two facts the test is built on: the Stein
operator has mean zero under the model, and Glauber dynamics samples from it.
"""

import numpy as np

from gkss.ergm import e2st, exact_distribution, glauber_sample_edges
from gkss.graph import n_pairs
from gkss.stein import stein_component

# edges, 2-stars and triangles with raw counts
model = e2st((-0.6, 0.3, -0.2), 4)
ex = exact_distribution(model)
graphs = ex.graphs()
print(f"{len(graphs)} graphs, most likely has {graphs[ex.probs.argmax()].edges.sum()} edges")

# any function on graphs will do; here a random lookup table
rng = np.random.default_rng(0)
table = {g.key(): v for g, v in zip(graphs, rng.normal(size=len(graphs)))}
for s in range(n_pairs(4)):
    mean = sum(p * stein_component(model, table, g, s) for p, g in zip(ex.probs, graphs))
    print(f"edge {s}: E_q[A^(s) f] = {mean:+.1e}")

# the chain whose generator is this operator
E = glauber_sample_edges(model, 50_000, seed=1)
codes = (E.astype(np.int64) << np.arange(E.shape[1])).sum(axis=1)
emp = np.bincount(codes, minlength=ex.probs.size) / len(codes)
print(f"TV(Glauber, exact) over 50k samples = {0.5 * np.abs(emp - ex.probs).sum():.4f}")
