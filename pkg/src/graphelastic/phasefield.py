"""Phase-field damage at a single material point.

Tension/compression split through F = F_iso F_vol, quadratic degradation of
the tensile part, a history variable, and a backward-Euler update of the
local (gradient-free) damage balance

    (g_c / l_0) d + eta d' = 2 (1 - d) H.

``model`` arguments are anything with ``energy(C_voigt)`` and
``stress(C_voigt)`` methods (see ``verification.NetworkModel``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import from_voigt, right_cauchy_green, to_voigt


@dataclass(frozen=True)
class PhaseFieldParams:
    g_c: float = 1.2e-4  # MPa m; g_c / l_0 = 0.1 MPa
    l_0: float = 1.2e-3  # m
    eta: float = 1e-6  # MPa s
    r: float = 0.0
    dt: float = 5e-8  # s

    def __post_init__(self):
        if min(self.g_c, self.l_0, self.eta, self.dt) <= 0:
            raise ValueError("g_c, l_0, eta and dt must be positive")
        if self.r < 0:
            raise ValueError("residual factor r must be nonnegative")


@dataclass(frozen=True)
class DamageState:
    d: float = 0.0
    H: float = 0.0


def degradation(d):
    return (1.0 - d) ** 2


def split_deformation(F):
    F = np.asarray(F, dtype=float)
    J = np.linalg.det(F)
    if J <= 0:
        raise ValueError(f"det F must be positive, got {J}")
    F_vol = np.cbrt(J) * np.eye(3)
    F_iso = F / np.cbrt(J)
    return F_vol, F_iso


def _C(F):
    return to_voigt(right_cauchy_green(F))[None]


def energy_split(model, F):
    """(psi_plus, psi_minus); compression only loads the volumetric part."""
    F = np.asarray(F, dtype=float)
    F_vol, _ = split_deformation(F)
    psi = float(model.energy(_C(F))[0])
    if np.linalg.det(F) >= 1.0:
        return psi, 0.0
    psi_vol = float(model.energy(_C(F_vol))[0])
    return psi - psi_vol, psi_vol


def split_energy_gradients(model, F):
    """(dpsi+/dC, dpsi-/dC) as 3x3 tensors, assembled from the stress at F
    and at F_vol. Under J < 1 the compressive gradient is the model's
    gradient evaluated at C(F_vol)."""
    F = np.asarray(F, dtype=float)
    g = 0.5 * from_voigt(model.stress(_C(F))[0])  # dpsi/dC = S / 2
    if np.linalg.det(F) >= 1.0:
        return g, np.zeros((3, 3))
    F_vol, _ = split_deformation(F)
    g_vol = 0.5 * from_voigt(model.stress(_C(F_vol))[0])
    return g - g_vol, g_vol


def degraded_stress(model, F, d: float, params: PhaseFieldParams = PhaseFieldParams()) -> np.ndarray:
    """First Piola-Kirchhoff stress 2F[(g(d) + r) dpsi+/dC + dpsi-/dC]."""
    if not 0.0 <= d <= 1.0:
        raise ValueError("damage must lie in [0, 1]")
    F = np.asarray(F, dtype=float)
    g_plus, g_minus = split_energy_gradients(model, F)
    return 2.0 * F @ ((degradation(d) + params.r) * g_plus + g_minus)


def evolve_damage(state: DamageState, psi_plus: float, dt: float, params: PhaseFieldParams = PhaseFieldParams()) -> DamageState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    H = max(state.H, float(psi_plus))
    k = params.g_c / params.l_0
    d = (params.eta * state.d + 2.0 * dt * H) / (params.eta + dt * (k + 2.0 * H))
    d = min(max(d, state.d, 0.0), 1.0)  # irreversible, bounded
    return DamageState(d=d, H=H)


def steady_state_damage(H: float, params: PhaseFieldParams = PhaseFieldParams()) -> float:
    return 2.0 * H / (params.g_c / params.l_0 + 2.0 * H)


def strain_ramp(F_end, n_steps: int, t_ramp: float | None = None, dt: float = 5e-8):
    """Deformation gradients I + (t/t_ramp)(F_end - I), held after t_ramp."""
    F_end = np.asarray(F_end, dtype=float)
    t = dt * np.arange(1, n_steps + 1)
    t_ramp = t[-1] if t_ramp is None else t_ramp
    s = np.minimum(t / t_ramp, 1.0)
    return t, np.eye(3)[None] + s[:, None, None] * (F_end - np.eye(3))[None]


def run_point(model, F_path, params: PhaseFieldParams = PhaseFieldParams(), times=None):
    """March damage along a deformation path; one row per step."""
    state = DamageState()
    rows = []
    n = len(F_path)
    times = params.dt * np.arange(1, n + 1) if times is None else times
    for t, F in zip(times, F_path):
        psi_plus, psi_minus = energy_split(model, F)
        state = evolve_damage(state, psi_plus, params.dt, params)
        P = degraded_stress(model, F, state.d, params)
        row = {"t": float(t), "psi_plus": psi_plus, "psi_minus": psi_minus, "H": state.H, "d": state.d}
        for i in range(3):
            for j in range(3):
                row[f"P{i + 1}{j + 1}"] = float(P[i, j])
        rows.append(row)
    return rows
