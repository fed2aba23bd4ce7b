"""Homogenized (psi, S) labels for polycrystal RVEs.

Two label generators: a uniform-deformation (Taylor) average, which is cheap
and keeps S exactly equal to 2 d(psi)/dC, and a finite-strain FFT solver of the
periodic Lippmann-Schwinger equation in the deformation-gradient form

    F + Gamma0 * (P(F) - C0 : F) = F_bar.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fung import FungConstants, fung_energy_and_stress
from .microstructure import Polycrystal
from .tensors import green_strain, right_cauchy_green, to_voigt

STRAIN_RANGE = (0.0, 0.1)
HOMOGENIZERS = ("taylor", "fft")


class NonConvergenceError(RuntimeError):
    pass


def sample_deformation(seed, rve_id: int = 0, index: int = 0) -> np.ndarray:
    """F = I + U, every U_ij uniform in [0, 0.1]; redrawn until det F > 0."""
    rng = np.random.default_rng([int(seed), int(rve_id), int(index)])
    while True:
        F = np.eye(3) + rng.uniform(*STRAIN_RANGE, size=(3, 3))
        if np.linalg.det(F) > 0:
            return F


def taylor_homogenize(p: Polycrystal, F, k: FungConstants = FungConstants()):
    """Volume-weighted grain average at a shared deformation.

    ``F`` may carry leading batch axes; returns psi (...) and S_voigt (..., 6).
    """
    F = np.asarray(F, dtype=float)
    E = green_strain(F)[..., None, :, :]  # broadcast against grains
    W, S = fung_energy_and_stress(E, p.orientations, k)
    v = p.volume_fractions()
    psi = W @ v
    S_bar = np.einsum("...gij,g->...ij", S, v)
    return psi, to_voigt(S_bar)


@dataclass(frozen=True)
class FftConfig:
    ref_stiffness_scale: float = 2.0
    max_iter: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class FftResult:
    psi: float
    S_voigt: np.ndarray
    residual: float
    iters: int
    converged: bool
    residual_history: list = field(default_factory=list)


def reference_lame(k: FungConstants, scale: float = 1.0) -> tuple[float, float]:
    """Isotropic reference medium from the arithmetic mean of the Fung constants."""
    return scale * float(np.mean(k.lam)), scale * float(np.mean(k.mu))


def _unit_wavevectors(grid) -> np.ndarray:
    """Unit wave directions; zero at the mean and at Nyquist modes of even axes.

    A Nyquist mode's Hermitian partner has a different direction, so the
    operator there would not map real fields to real fields.
    """
    freqs = [np.fft.fftfreq(n) * n for n in grid]
    xi = np.stack(np.meshgrid(*freqs, indexing="ij"), axis=-1)
    drop = np.zeros(xi.shape[:-1], dtype=bool)
    for axis, n in enumerate(grid):
        if n % 2 == 0:
            drop |= xi[..., axis] == -(n // 2)
    norm = np.linalg.norm(xi, axis=-1)
    drop |= norm == 0
    return np.where(drop[..., None], 0.0, xi / np.where(drop, 1.0, norm)[..., None])


def _apply_gamma(tau_hat: np.ndarray, n: np.ndarray, lam0: float, mu0: float) -> np.ndarray:
    # Gamma_ijkl = [K^-1]_ik xi_j xi_l, K the acoustic tensor of the reference
    # medium; only the unit direction survives the |xi|^2 cancellation.
    beta = (lam0 + mu0) / (lam0 + 2.0 * mu0)
    v = np.einsum("...kl,...l->...k", tau_hat, n)
    w = (v - beta * n * np.einsum("...k,...k->...", n, v)[..., None]) / mu0
    return w[..., :, None] * n[..., None, :]


def _ref_stress(F: np.ndarray, lam0: float, mu0: float) -> np.ndarray:
    out = mu0 * (F + np.swapaxes(F, -1, -2))
    tr = np.trace(F, axis1=-2, axis2=-1)
    idx = np.arange(3)
    out[..., idx, idx] += lam0 * tr[..., None]
    return out


def _fft(a: np.ndarray) -> np.ndarray:
    return np.fft.fftn(a, axes=(0, 1, 2))


def _ifft(a: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(a, axes=(0, 1, 2)).real


def fft_homogenize(
    p: Polycrystal,
    F_bar,
    cfg: FftConfig = FftConfig(),
    k: FungConstants = FungConstants(),
) -> FftResult:
    """Basic fixed-point spectral scheme at prescribed mean deformation.

    Convergence is measured as the L2 norm over nonzero frequencies of the
    projected divergence P_hat . n, relative to the norm of the mean stress.
    """
    F_bar = np.asarray(F_bar, dtype=float)
    if np.linalg.det(F_bar) <= 0:
        raise ValueError("det F_bar must be positive")
    grid = p.grid
    euler = p.orientations[p.labels.astype(np.intp)]  # (nx, ny, nz, 3)
    lam0, mu0 = reference_lame(k, cfg.ref_stiffness_scale)
    n = _unit_wavevectors(grid)

    F = np.broadcast_to(F_bar, tuple(grid) + (3, 3)).copy()
    history = []
    for it in range(1, cfg.max_iter + 1):
        W, S = fung_energy_and_stress(green_strain(F), euler, k)
        P = F @ S
        P_hat = _fft(P)
        div = np.einsum("...kl,...l->...k", P_hat, n)
        num = np.sqrt(np.sum(np.abs(div) ** 2))
        den = np.linalg.norm(P_hat[0, 0, 0])
        residual = 0.0 if num == 0.0 else num / max(den, np.finfo(float).tiny)
        history.append(residual)
        if residual < cfg.tol:
            return _finish(W, S, residual, it, True, history)
        if it == cfg.max_iter:
            break
        tau_hat = P_hat - _fft(_ref_stress(F, lam0, mu0))
        F_next = F_bar - _ifft(_apply_gamma(tau_hat, n, lam0, mu0))
        if not np.all(np.isfinite(F_next)):
            return _finish(W, S, np.inf, it, False, history)
        F = F_next
    return _finish(W, S, residual, cfg.max_iter, False, history)


def _finish(W, S, residual, iters, converged, history) -> FftResult:
    return FftResult(
        psi=float(np.mean(W)),
        S_voigt=to_voigt(S.reshape(-1, 3, 3).mean(axis=0)),
        residual=float(residual),
        iters=int(iters),
        converged=converged,
        residual_history=history,
    )


@dataclass
class Dataset:
    rve_id: np.ndarray  # (n,) int
    C: np.ndarray  # (n, 6) Voigt
    psi: np.ndarray  # (n,)
    S: np.ndarray  # (n, 6) Voigt
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.psi.shape[0])

    def subset(self, mask_or_idx) -> "Dataset":
        return Dataset(
            self.rve_id[mask_or_idx],
            self.C[mask_or_idx],
            self.psi[mask_or_idx],
            self.S[mask_or_idx],
            dict(self.meta),
        )

    def rve_ids(self) -> np.ndarray:
        return np.unique(self.rve_id)


def build_dataset(
    rves: list[Polycrystal],
    n_samples_per_rve: int,
    homogenizer: str = "taylor",
    seed: int = 0,
    fft_cfg: FftConfig = FftConfig(),
    k: FungConstants = FungConstants(),
    rve_ids: list[int] | None = None,
) -> Dataset:
    if not rves:
        raise ValueError("need at least one RVE")
    if n_samples_per_rve < 1:
        raise ValueError("n_samples_per_rve must be >= 1")
    if homogenizer not in HOMOGENIZERS:
        raise ValueError(f"unknown homogenizer {homogenizer!r}")
    ids = list(range(len(rves))) if rve_ids is None else list(rve_ids)
    rid, Cs, psis, Ss = [], [], [], []
    fft_stats = []
    for rve_id, p in zip(ids, rves):
        F = np.stack([sample_deformation(seed, rve_id, i) for i in range(n_samples_per_rve)])
        if homogenizer == "taylor":
            psi, S = taylor_homogenize(p, F, k)
        else:
            psi = np.empty(n_samples_per_rve)
            S = np.empty((n_samples_per_rve, 6))
            for i in range(n_samples_per_rve):
                res = fft_homogenize(p, F[i], fft_cfg, k)
                if not res.converged:
                    raise NonConvergenceError(
                        f"FFT solver did not converge for RVE {rve_id}, sample {i}: "
                        f"residual {res.residual:.3e} after {res.iters} iterations"
                    )
                psi[i], S[i] = res.psi, res.S_voigt
                fft_stats.append(res.iters)
        rid.append(np.full(n_samples_per_rve, rve_id))
        Cs.append(to_voigt(right_cauchy_green(F)))
        psis.append(psi)
        Ss.append(S)
    meta = {"homogenizer": homogenizer, "seed": int(seed), "n_samples_per_rve": int(n_samples_per_rve)}
    if homogenizer == "fft":
        lam0, mu0 = reference_lame(k, fft_cfg.ref_stiffness_scale)
        meta["fft"] = {
            "tol": fft_cfg.tol,
            "max_iter": fft_cfg.max_iter,
            "reference_lame": [lam0, mu0],
            "max_iters_used": int(max(fft_stats)),
        }
    return Dataset(
        np.concatenate(rid).astype(np.int64),
        np.concatenate(Cs),
        np.concatenate(psis),
        np.concatenate(Ss),
        meta,
    )
