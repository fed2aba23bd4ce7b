"""Consistency checks on learned (or reference) energy functionals."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .fung import FungConstants, fung_energy_and_stress
from .homogenization import STRAIN_RANGE
from .nn import GraphInput, ModelParams, predict
from .tensors import (
    VOIGT_LABELS,
    from_voigt,
    right_cauchy_green,
    rotation_z,
    random_rotations,
    stress_from_energy_gradient,
    to_voigt,
    voigt_contract,
)


@dataclass
class CheckReport:
    name: str
    n_cases: int
    max_deviation: float
    fraction_satisfied: float
    threshold: float
    passed: bool

    def row(self) -> dict:
        return asdict(self)


class NetworkModel:
    """A trained network bound to one graph; maps C_voigt batches to psi and S."""

    def __init__(self, params: ModelParams, graph: GraphInput | None = None):
        if params.arch.use_graph and graph is None:
            raise ValueError("hybrid model needs a graph")
        self.params = params
        self.graphs = [graph] if graph is not None else []

    def _run(self, C, with_stress):
        C = np.atleast_2d(C)
        return predict(self.params, self.graphs, np.zeros(len(C), dtype=np.int64), C, with_stress)

    def energy(self, C):
        return self._run(C, False)[0]

    def stress(self, C):
        return self._run(C, True)[1]


class FungModel:
    """Single-crystal Fung material as a function of C_voigt."""

    def __init__(self, euler, k: FungConstants = FungConstants()):
        self.euler = np.asarray(euler, dtype=float)
        self.k = k

    def _run(self, C):
        E = 0.5 * (from_voigt(np.atleast_2d(C)) - np.eye(3))
        return fung_energy_and_stress(E, self.euler, self.k)

    def energy(self, C):
        return self._run(C)[0]

    def stress(self, C):
        return to_voigt(self._run(C)[1])


def _random_F(rng, n):
    return np.eye(3) + rng.uniform(*STRAIN_RANGE, size=(n, 3, 3))


def check_objectivity(model, n_rotations: int = 100, seed: int = 0, threshold: float = 1e-10) -> CheckReport:
    """psi(C(QF)) against psi(C(F)) for random F and Haar-random Q."""
    rng = np.random.default_rng([seed, 21])
    F = _random_F(rng, n_rotations)
    Q = random_rotations(rng, n_rotations)
    a = model.energy(to_voigt(right_cauchy_green(F)))
    b = model.energy(to_voigt(right_cauchy_green(Q @ F)))
    dev = np.abs(a - b)
    return CheckReport(
        "objectivity", n_rotations, float(dev.max()), float(np.mean(dev < threshold)),
        threshold, bool(dev.max() < threshold),
    )


ROTATION_SWEEP_DEG = (0.0, 30.0, 60.0)


def check_isotropy(model, F=None, rotations=None, n_random: int = 10, seed: int = 0, threshold: float = 1e-2) -> CheckReport:
    """Relative change of psi(C(FQ)) over a rotation sweep.

    Passes when the deviation exceeds ``threshold``: the learned response is
    expected to be anisotropic.
    """
    rng = np.random.default_rng([seed, 22])
    if F is None:
        F = _random_F(rng, 1)[0]
    if rotations is None:
        rotations = [rotation_z(np.deg2rad(a)) for a in ROTATION_SWEEP_DEG]
        rotations += list(random_rotations(rng, n_random))
    Qs = np.asarray(rotations)
    psi0 = model.energy(to_voigt(right_cauchy_green(F))[None])[0]
    psi = model.energy(to_voigt(right_cauchy_green(F[None] @ Qs)))
    scale = max(abs(psi0), np.finfo(float).tiny)
    rel = np.abs(psi - psi0) / scale
    return CheckReport(
        "anisotropy", len(Qs), float(rel.max()), float(np.mean(rel > threshold)),
        threshold, bool(rel.max() > threshold),
    )


def sample_C_pool(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng([seed, 23])
    return to_voigt(right_cauchy_green(_random_F(rng, n)))


def gradient_inequality_margins(model, C_alpha, C_beta) -> np.ndarray:
    """psi(Ca) - psi(Cb) - dpsi/dC(Cb) : (Ca - Cb), one value per pair."""
    # dpsi/dC : dC = S : dC / 2 as a full tensor contraction
    first_order = 0.5 * voigt_contract(model.stress(C_beta), C_alpha - C_beta)
    return model.energy(C_alpha) - model.energy(C_beta) - first_order


def check_convexity(
    model,
    n_pairs: int = 10_000,
    C_pool=None,
    pool_size: int = 200,
    seed: int = 0,
    slack: float = 1e-10,
    min_fraction: float = 0.99,
) -> CheckReport:
    """Gradient-inequality test over random ordered pairs from a C pool.

    The pool defaults to C = F^T F with F - I uniform over the sampling range;
    pass training/test deformations to mirror the dataset.
    """
    rng = np.random.default_rng([seed, 24])
    pool = sample_C_pool(pool_size, seed) if C_pool is None else np.asarray(C_pool)
    ia = rng.integers(0, len(pool), n_pairs)
    ib = rng.integers(0, len(pool), n_pairs)
    margins = gradient_inequality_margins(model, pool[ia], pool[ib])
    frac = float(np.mean(margins >= -slack))
    return CheckReport("convexity", n_pairs, float(-margins.min()), frac, min_fraction, frac >= min_fraction)


def finite_difference_stress(model, C, h: float = 1e-5) -> np.ndarray:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    g = np.empty_like(C)
    for k in range(6):
        d = np.zeros(6)
        d[k] = h
        g[:, k] = (model.energy(C + d) - model.energy(C - d)) / (2 * h)
    return stress_from_energy_gradient(g)


def gradient_check(model, n_probes: int = 50, seed: int = 0, h: float = 1e-5, threshold: float = 1e-5) -> CheckReport:
    """Analytic stress against central differences of the energy.

    Relative error per probe is max|S - S_fd| / max|S_fd|; zero-vs-zero
    counts as exact.
    """
    C = sample_C_pool(n_probes, seed + 1)
    S = model.stress(C)
    S_fd = finite_difference_stress(model, C, h)
    num = np.max(np.abs(S - S_fd), axis=1)
    den = np.max(np.abs(S_fd), axis=1)
    rel = np.where(num == 0.0, 0.0, num / np.maximum(den, np.finfo(float).tiny))
    return CheckReport(
        "gradient", n_probes, float(rel.max()), float(np.mean(rel < threshold)),
        threshold, bool(rel.max() < threshold),
    )


def proportional_paths(model, n_paths: int = 6, n_points: int = 41, seed: int = 0, t_max: float = 1.0):
    """psi and S along F(t) = I + t U for random directions U in the sampling box.

    Returns (t, psi, S) with shapes (n_points,), (n_paths, n_points),
    (n_paths, n_points, 6).
    """
    rng = np.random.default_rng([seed, 25])
    U = rng.uniform(*STRAIN_RANGE, size=(n_paths, 3, 3))
    t = np.linspace(0.0, t_max, n_points)
    F = np.eye(3) + t[None, :, None, None] * U[:, None]
    C = to_voigt(right_cauchy_green(F.reshape(-1, 3, 3)))
    psi = model.energy(C).reshape(n_paths, n_points)
    S = model.stress(C).reshape(n_paths, n_points, 6)
    return t, psi, S


def surface_rows(t, psi, S) -> list[dict]:
    rows = []
    for p in range(psi.shape[0]):
        for i, ti in enumerate(t):
            row = {"path": p, "t": float(ti), "psi": float(psi[p, i])}
            row.update({f"S{k}": float(S[p, i, j]) for j, k in enumerate(VOIGT_LABELS)})
            rows.append(row)
    return rows


def second_difference_oscillations(values, tol: float = 1e-6) -> int:
    """Sign changes of the second difference along each path, ignoring
    second differences with magnitude at most ``tol``."""
    d2 = np.diff(np.atleast_2d(values), n=2, axis=-1)
    sign = np.where(np.abs(d2) > tol, np.sign(d2), 0.0)
    count = 0
    for row in sign:
        nz = row[row != 0]
        count += int(np.sum(nz[1:] != nz[:-1]))
    return count
