"""Model configuration files (TOML) and sparse pair-weight lists.

A model file looks like::

    n = 36
    beta = [-2.8547, -0.0003, 0.6882]
    stats = ["edges", "2star", "triangle"]
    scaling = "raw"

Homophily terms reference a pair list relative to the config file,
``"homophily:party_pairs.txt"``, with lines ``i j [weight]``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .ergm import ErgmModel
from .graph import StatisticSpec


class ConfigError(ValueError):
    pass


def read_pair_weights(path, n: int) -> np.ndarray:
    """Symmetric ``n x n`` matrix from lines ``i j [w]``; ``#`` starts a comment."""
    P = np.zeros((n, n))
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("n "):
            continue
        parts = line.split()
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) > 2 else 1.0
        except (ValueError, IndexError):
            raise ConfigError(f"{path}:{lineno}: expected 'i j [weight]', got {raw!r}")
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ConfigError(f"{path}:{lineno}: invalid pair ({i}, {j}) for n={n}")
        P[i, j] = P[j, i] = w
    return P


def model_from_dict(cfg: dict, base_dir=None) -> ErgmModel:
    try:
        n = int(cfg["n"])
        beta = [float(b) for b in cfg["beta"]]
        stat_names = list(cfg["stats"])
    except KeyError as exc:
        raise ConfigError(f"model config is missing {exc.args[0]!r}")
    scaling = cfg.get("scaling", "raw")
    if scaling not in ("raw", "injection"):
        raise ConfigError(f"scaling must be 'raw' or 'injection', got {scaling!r}")
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    stats = []
    for name in stat_names:
        if name.startswith("homophily"):
            _, _, rel = name.partition(":")
            if not rel:
                raise ConfigError("homophily needs a pair-list path: 'homophily:<path>'")
            path = Path(rel) if Path(rel).is_absolute() else base_dir / rel
            stats.append(StatisticSpec("homophily", scaling, P=read_pair_weights(path, n)))
        else:
            try:
                stats.append(StatisticSpec.parse(name, scaling))
            except ValueError as exc:
                raise ConfigError(str(exc))
    try:
        return ErgmModel(tuple(beta), tuple(stats), n)
    except ValueError as exc:
        raise ConfigError(str(exc))


def load_model(path) -> ErgmModel:
    path = Path(path)
    with path.open("rb") as fh:
        cfg = tomllib.load(fh)
    return model_from_dict(cfg, path.parent)


def load_toml(path) -> dict:
    with Path(path).open("rb") as fh:
        return tomllib.load(fh)
