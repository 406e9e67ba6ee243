"""Seeded power experiments: perturb one coefficient, test against the null.

Every trial draws its randomness from ``derive_seed(master, grid_index,
trial, ...)``, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gof
from .config import ConfigError, load_model, load_toml, model_from_dict
from .ergm import DEFAULT_BURN_IN, DEFAULT_THIN, ErgmModel, glauber_sample
from .kernels import parse_kernel
from .rng import derive_seed

TESTS = ("gkss", "degree", "mgra-degree", "mgra-espart", "md-degree", "gksd", "kdsd")
CSV_HEADER = ["grid_value", "test", "trials", "rejections", "rejection_rate", "mean_runtime_ms"]


@dataclass
class ExperimentPlan:
    null_model: ErgmModel
    index: int
    values: list
    trials: int
    tests: list
    seed: int = 0
    B: int = 100
    m: int = 200
    kernel: str = "wl:5"
    alpha: float = 0.05
    m_prime: int = 100
    n_obs: int = 30
    n_boot: int = 300
    share_null: bool = False
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.values:
            raise ConfigError("perturbation grid is empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.index < len(self.null_model.beta):
            raise ConfigError(f"grid index {self.index} out of range")
        unknown = [t for t in self.tests if t not in TESTS]
        if unknown or not self.tests:
            raise ConfigError(f"unknown or empty test roster {unknown or self.tests}; choose from {TESTS}")

    def model_at(self, value: float) -> ErgmModel:
        beta = list(self.null_model.beta)
        beta[self.index] = value
        return self.null_model.with_beta(beta)


def load_plan(path) -> ExperimentPlan:
    """Read a TOML plan with ``[null]`` (or ``model = <path>``), ``[grid]`` and ``[params]``."""
    path = Path(path)
    cfg = load_toml(path)
    if "model" in cfg:
        model_path = Path(cfg["model"])
        model = load_model(model_path if model_path.is_absolute() else path.parent / model_path)
    elif "null" in cfg:
        model = model_from_dict(cfg["null"], path.parent)
    else:
        raise ConfigError("plan needs a [null] table or a 'model' path")
    grid = cfg.get("grid", {})
    params = dict(cfg.get("params", {}))
    known = {k: params.pop(k) for k in list(params) if k in ExperimentPlan.__dataclass_fields__}
    try:
        return ExperimentPlan(
            null_model=model,
            index=int(grid["index"]),
            values=[float(v) for v in grid["values"]],
            trials=int(cfg.get("trials", 1)),
            tests=list(cfg.get("tests", ["gkss"])),
            seed=int(cfg.get("seed", 0)),
            out=cfg.get("out"),
            extra=params,
            **known,
        )
    except KeyError as exc:
        raise ConfigError(f"plan is missing {exc.args[0]!r}")


def _run_one(plan: ExperimentPlan, test: str, model: ErgmModel, obs, seed: int, null_bank):
    null = plan.null_model
    kernel = parse_kernel(plan.kernel)
    if test == "gkss":
        return gof.gkss_test(null, obs[0], kernel, plan.B, plan.alpha, plan.m, seed,
                             plan.burn_in, plan.thin, null_statistics=null_bank)
    if test == "degree":
        return gof.degree_variance_test(null, obs[0], plan.m, plan.alpha, seed,
                                        burn_in=plan.burn_in, thin=plan.thin)
    if test in ("mgra-degree", "mgra-espart"):
        return gof.mgra_tv_test(null, obs[0], test.split("-")[1], plan.m_prime, plan.m, plan.alpha,
                                seed, plan.burn_in, plan.thin)
    if test == "md-degree":
        return gof.mahalanobis_test(null, obs[0], "degree", plan.m, plan.alpha, seed,
                                    plan.burn_in, plan.thin)
    if test == "gksd":
        return gof.gksd_multi_test(null, obs, kernel, plan.alpha, plan.n_boot, seed)
    if test == "kdsd":
        return gof.kdsd_multi_test(null, obs, kernel, plan.alpha, plan.n_boot, seed)
    raise ConfigError(f"unknown test {test!r}")


def run_trial(plan: ExperimentPlan, gi: int, trial: int, null_bank=None) -> list:
    """Reports (one per roster entry) for one simulated observation."""
    value = plan.values[gi]
    model = plan.model_at(value)
    n_obs = plan.n_obs if any(t in ("gksd", "kdsd") for t in plan.tests) else 1
    obs = glauber_sample(model, n_obs, plan.burn_in, plan.thin, seed=derive_seed(plan.seed, gi, trial))
    out = []
    for ti, test in enumerate(plan.tests):
        try:
            rep = _run_one(plan, test, model, obs, derive_seed(plan.seed, gi, trial, ti + 1), null_bank)
        except Exception as exc:
            raise RuntimeError(f"grid value {value}, trial {trial}, test {test}: {exc}") from exc
        out.append(rep)
    return out


def null_bank_for(plan: ExperimentPlan):
    """Shared null statistics for the kernel Stein test, or ``None``."""
    if not (plan.share_null and "gkss" in plan.tests):
        return None
    return gof.simulate_null_statistics(plan.null_model, parse_kernel(plan.kernel), plan.B, plan.m,
                                        derive_seed(plan.seed, 2 ** 31), plan.burn_in, plan.thin)


def _trial_job(args):
    plan, gi, trial, bank = args
    return gi, trial, [(r.reject, r.wall_time_ms) for r in run_trial(plan, gi, trial, bank)]


def worker_count() -> int:
    cap = os.environ.get("GKSS_THREADS")
    cpus = os.cpu_count() or 1
    return max(1, min(int(cap), cpus) if cap else cpus)


def run_power(plan: ExperimentPlan, workers: int | None = None, progress=None) -> list[dict]:
    """Rejection rate and mean runtime per (grid value, test)."""
    bank = null_bank_for(plan)
    jobs = [(plan, gi, t, bank) for gi in range(len(plan.values)) for t in range(plan.trials)]
    workers = worker_count() if workers is None else workers
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            for gi, t, recs in pool.map(_trial_job, jobs, chunksize=4):
                results[gi, t] = recs
    else:
        for job in jobs:
            gi, t, recs = _trial_job(job)
            results[gi, t] = recs
            if progress:
                progress(gi, t)
    rows = []
    for gi, value in enumerate(plan.values):
        for ti, test in enumerate(plan.tests):
            rej = [results[gi, t][ti][0] for t in range(plan.trials)]
            ms = [results[gi, t][ti][1] for t in range(plan.trials)]
            rows.append({
                "grid_value": value,
                "test": test,
                "trials": plan.trials,
                "rejections": int(np.sum(rej)),
                "rejection_rate": float(np.mean(rej)),
                "mean_runtime_ms": float(np.mean(ms)),
            })
    return rows


def write_csv(rows, path_or_file) -> None:
    def _write(fh):
        w = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "rejection_rate": f"{r['rejection_rate']:.6f}",
                        "mean_runtime_ms": f"{r['mean_runtime_ms']:.3f}"})
    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)
