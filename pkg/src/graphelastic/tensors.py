"""Voigt bookkeeping and small rotation helpers.

Voigt order is [11, 22, 33, 12, 23, 13] with raw tensor components (no
factor 2 on shear entries).
"""
import numpy as np

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))
VOIGT_LABELS = ("11", "22", "33", "12", "23", "13")
# weight of each Voigt slot in a full double contraction A:B
VOIGT_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
IDENTITY_VOIGT = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def to_voigt(T: np.ndarray) -> np.ndarray:
    """(..., 3, 3) -> (..., 6)."""
    T = np.asarray(T)
    return np.stack([T[..., i, j] for i, j in VOIGT_PAIRS], axis=-1)


def from_voigt(v: np.ndarray) -> np.ndarray:
    """(..., 6) -> symmetric (..., 3, 3)."""
    v = np.asarray(v, dtype=float)
    T = np.empty(v.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(VOIGT_PAIRS):
        T[..., i, j] = v[..., k]
        T[..., j, i] = v[..., k]
    return T


def right_cauchy_green(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    return np.swapaxes(F, -1, -2) @ F


def green_strain(F: np.ndarray) -> np.ndarray:
    return 0.5 * (right_cauchy_green(F) - np.eye(3))


def stress_from_energy_gradient(g: np.ndarray) -> np.ndarray:
    """Map dψ/d(C_voigt) to S_voigt = 2 dψ/dC.

    A shear slot of C_voigt feeds two symmetric tensor entries, so its
    derivative already carries the factor 2.
    """
    g = np.asarray(g, dtype=float)
    return g * np.array([2.0, 2.0, 2.0, 1.0, 1.0, 1.0])


def energy_gradient_from_stress(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return S * np.array([0.5, 0.5, 0.5, 1.0, 1.0, 1.0])


def voigt_contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full tensor double contraction A:B from two Voigt vectors."""
    return np.sum(VOIGT_WEIGHTS * np.asarray(a) * np.asarray(b), axis=-1)


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-uniform rotations from normalized Gaussian quaternions."""
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    R = np.empty((n, 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def rotation_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
