"""Orthotropic generalized Fung hyperelasticity at a material point.

Energy W = c/2 (exp(Q) - 1) with

    Q = (1/c) sum_a [ 2 mu_a A_a:E^2 + sum_b lambda_ab (A_a:E)(A_b:E) ],
    A_a = a_a (x) a_a,  a_a = R(euler) e_a.

Everything is evaluated in the crystal frame E' = R^T E R, where A_a:E is
E'_aa and A_a:E^2 is (E'^2)_aa. Inputs broadcast over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FungConstants:
    c: float = 2.0
    lam: np.ndarray = field(
        default_factory=lambda: np.array(
            [[0.6, 0.7, 0.6], [0.7, 1.4, 0.7], [0.6, 0.7, 0.5]]
        )
    )
    mu: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.7, 0.5]))

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if self.c <= 0:
            raise ValueError("c must be positive")
        if lam.shape != (3, 3) or not np.allclose(lam, lam.T, atol=0, rtol=0):
            raise ValueError("lambda must be a symmetric 3x3 matrix")
        if mu.shape != (3,):
            raise ValueError("mu must be a 3-vector")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    def to_dict(self) -> dict:
        return {"c": float(self.c), "lam": self.lam.tolist(), "mu": self.mu.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FungConstants":
        return cls(c=float(d["c"]), lam=np.array(d["lam"]), mu=np.array(d["mu"]))


def bunge_matrix(euler) -> np.ndarray:
    """Rotation R = Rz(phi1) Rx(Phi) Rz(phi2); columns are crystal axes in
    the sample frame. Broadcasts over leading axes of ``euler`` (..., 3)."""
    euler = np.asarray(euler, dtype=float)
    p1, P, p2 = euler[..., 0], euler[..., 1], euler[..., 2]
    c1, s1 = np.cos(p1), np.sin(p1)
    c, s = np.cos(P), np.sin(P)
    c2, s2 = np.cos(p2), np.sin(p2)
    R = np.empty(euler.shape[:-1] + (3, 3))
    R[..., 0, 0] = c1 * c2 - s1 * c * s2
    R[..., 0, 1] = -c1 * s2 - s1 * c * c2
    R[..., 0, 2] = s1 * s
    R[..., 1, 0] = s1 * c2 + c1 * c * s2
    R[..., 1, 1] = -s1 * s2 + c1 * c * c2
    R[..., 1, 2] = -c1 * s
    R[..., 2, 0] = s * s2
    R[..., 2, 1] = s * c2
    R[..., 2, 2] = c
    return R


def structural_tensors(euler) -> np.ndarray:
    """The three A_a^0 stacked on axis -3: shape (..., 3, 3, 3)."""
    R = bunge_matrix(euler)
    axes = np.swapaxes(R, -1, -2)  # axes[..., a, :] = a_a
    return axes[..., :, :, None] * axes[..., :, None, :]


def _check_symmetric(E: np.ndarray) -> None:
    if not np.allclose(E, np.swapaxes(E, -1, -2), rtol=0.0, atol=1e-12):
        raise ValueError("Green strain must be symmetric")


def _crystal_frame(E: np.ndarray, euler) -> np.ndarray:
    R = bunge_matrix(euler)
    return np.swapaxes(R, -1, -2) @ E @ R, R


def _q_and_dq(Ep: np.ndarray, k: FungConstants, need_grad: bool):
    e = np.diagonal(Ep, axis1=-2, axis2=-1)  # A_a : E
    sq = np.sum(Ep * Ep, axis=-1)  # (E'^2)_aa
    Q = (2.0 * sq @ k.mu + np.einsum("...a,ab,...b->...", e, k.lam, e)) / k.c
    if not need_grad:
        return Q, None
    mu = k.mu
    # dQ/dE' = (1/c) [2 (M E' + E' M) + 2 diag(lambda e')]
    dQ = 2.0 * (mu[:, None] + mu[None, :]) * Ep
    idx = np.arange(3)
    dQ[..., idx, idx] += 2.0 * (e @ k.lam)
    return Q, dQ / k.c


def fung_energy(E, euler, k: FungConstants = FungConstants()) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    _check_symmetric(E)
    Ep, _ = _crystal_frame(E, euler)
    Q, _ = _q_and_dq(Ep, k, need_grad=False)
    return 0.5 * k.c * np.expm1(Q)


def fung_stress(E, euler, k: FungConstants = FungConstants()) -> np.ndarray:
    """Second Piola-Kirchhoff stress S = dW/dE = 2 dW/dC."""
    return fung_energy_and_stress(E, euler, k)[1]


def fung_energy_and_stress(E, euler, k: FungConstants = FungConstants()):
    E = np.asarray(E, dtype=float)
    _check_symmetric(E)
    Ep, R = _crystal_frame(E, euler)
    Q, dQ = _q_and_dq(Ep, k, need_grad=True)
    W = 0.5 * k.c * np.expm1(Q)
    Sp = 0.5 * k.c * np.exp(Q)[..., None, None] * dQ
    S = R @ Sp @ np.swapaxes(R, -1, -2)
    return W, S
