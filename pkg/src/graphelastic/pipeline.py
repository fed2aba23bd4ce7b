"""Glue shared by the CLI, the experiment scripts and the acceptance suite."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .fung import FungConstants
from .graph import build_graph, feature_matrix, permute_graph
from .homogenization import Dataset, FftConfig, build_dataset
from .microstructure import Polycrystal, contacts, generate_polycrystal, random_odf
from .nn import Architecture, GraphInput, graph_input


def grain_counts(seed: int, n_rves: int, grains_min: int, grains_max: int) -> list[int]:
    rng = np.random.default_rng([seed, 3])
    return [int(n) for n in rng.integers(grains_min, grains_max + 1, size=n_rves)]


def make_family(
    seed: int,
    n_rves: int,
    grains_min: int = 10,
    grains_max: int = 20,
    grid=(16, 16, 16),
    half_width: float = np.deg2rad(10.0),
    threads: int = 1,
) -> list[Polycrystal]:
    """RVE ``i`` is generated from seed ``seed + i`` with its own random ODF."""
    counts = grain_counts(seed, n_rves, grains_min, grains_max)

    def one(i):
        s = seed + i
        return generate_polycrystal(s, counts[i], tuple(grid), random_odf(s, half_width))

    return _map(one, range(n_rves), threads)


def make_dataset(
    rves: list[Polycrystal],
    n_samples_per_rve: int,
    homogenizer: str = "taylor",
    seed: int = 0,
    fft_cfg: FftConfig = FftConfig(),
    k: FungConstants = FungConstants(),
    threads: int = 1,
) -> Dataset:
    """Per-RVE labelling, optionally threaded; rows come back in RVE order so
    the result does not depend on ``threads``."""
    parts = _map(
        lambda i: build_dataset([rves[i]], n_samples_per_rve, homogenizer, seed, fft_cfg, k, rve_ids=[i]),
        range(len(rves)),
        threads,
    )
    meta = dict(parts[0].meta)
    if homogenizer == "fft":
        meta["fft"]["max_iters_used"] = max(p.meta["fft"]["max_iters_used"] for p in parts)
    return Dataset(
        np.concatenate([p.rve_id for p in parts]),
        np.concatenate([p.C for p in parts]),
        np.concatenate([p.psi for p in parts]),
        np.concatenate([p.S for p in parts]),
        meta,
    )


def volume_order(X: np.ndarray) -> np.ndarray:
    """Node permutation listing grains by decreasing volume fraction (stable)."""
    return np.argsort(-X[:, 0], kind="stable")


FEATURE_SCALE = np.array([1.0, 1.0 / (2 * np.pi), 1.0 / np.pi, 1.0 / (2 * np.pi)])


def scale_features(X: np.ndarray) -> np.ndarray:
    """Fixed rescaling to O(1) columns: volume fraction times grain count, and
    each Bunge angle over its range."""
    out = X * FEATURE_SCALE
    out[:, 0] *= len(X)
    return out


def rve_graph_input(p: Polycrystal, arch: Architecture, canonical: bool = True, scaled: bool = True) -> GraphInput:
    """Padded graph descriptor of an RVE.

    With ``canonical`` the nodes are relabelled by decreasing grain volume, so
    a given slot of the flattened encoder input refers to a comparable grain
    across RVEs. ``scaled`` applies :func:`scale_features`.
    """
    g = build_graph(p.n_grains, contacts(p))
    X = feature_matrix(p)
    if scaled:
        X = scale_features(X)
    if canonical:
        order = volume_order(X)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        g, X = permute_graph(g, rank), X[order]
    return graph_input(g, X, arch.n_max, arch.propagation_mode)


def graph_inputs(
    rves: list[Polycrystal], arch: Architecture, canonical: bool = True, scaled: bool = True
) -> dict[int, GraphInput]:
    return {i: rve_graph_input(p, arch, canonical, scaled) for i, p in enumerate(rves)}


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
