"""Periodic voxel polycrystals: Voronoi grains, textured orientations, contacts."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

TWO_PI = 2.0 * np.pi
MAX_SEED_RETRIES = 100


class TessellationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Polycrystal:
    grid: tuple[int, int, int]
    labels: np.ndarray  # (nx, ny, nz) uint16 grain index per voxel
    orientations: np.ndarray  # (n_grains, 3) Bunge angles, radians
    seed: int

    @property
    def n_grains(self) -> int:
        return int(self.orientations.shape[0])

    def volume_fractions(self) -> np.ndarray:
        counts = np.bincount(self.labels.ravel(), minlength=self.n_grains)
        return counts / counts.sum()


@dataclass(frozen=True)
class OdfParams:
    w: float = 0.66
    modal: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_width: float = np.deg2rad(10.0)

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"ODF weight must lie in [0, 1], got {self.w}")
        if self.half_width < 0:
            raise ValueError("half_width must be nonnegative")


def voxel_centers(grid) -> np.ndarray:
    """Voxel centers in the unit cell, row-major (C order) over (nx, ny, nz)."""
    axes = [(np.arange(n) + 0.5) / n for n in grid]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def tessellate(points: np.ndarray, grid) -> np.ndarray:
    """Nearest-seed labels under the periodic (torus) metric of the unit cell."""
    points = np.mod(np.asarray(points, dtype=float), 1.0)
    tree = cKDTree(points, boxsize=1.0)
    _, idx = tree.query(voxel_centers(grid))
    return idx.reshape(tuple(grid)).astype(np.uint16)


def generate_labels(seed: int, n_grains: int, grid) -> np.ndarray:
    grid = tuple(int(n) for n in grid)
    if n_grains < 1:
        raise ValueError("need at least one grain")
    if len(grid) != 3 or min(grid) < 2:
        raise ValueError(f"grid dims must be >= 2, got {grid}")
    if n_grains > int(np.prod(grid)):
        raise ValueError("more grains than voxels")
    if n_grains > np.iinfo(np.uint16).max:
        raise ValueError("grain count exceeds 16-bit label range")
    rng = np.random.default_rng([seed, 0])
    for _ in range(MAX_SEED_RETRIES):
        labels = tessellate(rng.random((n_grains, 3)), grid)
        if np.bincount(labels.ravel(), minlength=n_grains).min() > 0:
            return labels
    raise TessellationError(
        f"could not place {n_grains} nonempty grains on {grid} after "
        f"{MAX_SEED_RETRIES} attempts"
    )


def euler_from_matrices(R: np.ndarray) -> np.ndarray:
    """Bunge angles wrapped to [0, 2pi) x [0, pi] x [0, 2pi)."""
    with warnings.catch_warnings():
        # Phi = 0 or pi: scipy folds phi2 into phi1, which is still exact
        warnings.simplefilter("ignore", UserWarning)
        eul = Rotation.from_matrix(R).as_euler("ZXZ")
    eul = np.atleast_2d(eul)
    eul[:, 0] = np.mod(eul[:, 0], TWO_PI)
    eul[:, 2] = np.mod(eul[:, 2], TWO_PI)
    return eul


def sample_orientations(seed: int, n_grains: int, odf: OdfParams) -> np.ndarray:
    """Draw per-grain orientations from a uniform + unimodal mixture.

    A grain is uniform with probability ``w``. Otherwise it is the modal
    orientation composed with a rotation whose rotation vector is isotropic
    Gaussian; its misorientation density falls to half its peak at
    ``half_width``.
    """
    rng = np.random.default_rng([seed, 1])
    uniform = rng.random(n_grains) < odf.w
    R_uniform = Rotation.random(n_grains, random_state=rng).as_matrix()
    sigma = odf.half_width / np.sqrt(2.0 * np.log(2.0))
    rotvec = sigma * rng.standard_normal((n_grains, 3))
    R_pert = Rotation.from_rotvec(rotvec).as_matrix()
    R_modal = Rotation.from_euler("ZXZ", np.asarray(odf.modal, dtype=float)).as_matrix()
    R = np.where(uniform[:, None, None], R_uniform, R_pert @ R_modal)
    return euler_from_matrices(R)


def random_odf(seed: int, half_width: float = np.deg2rad(10.0)) -> OdfParams:
    """Random mixture weight and random modal orientation."""
    rng = np.random.default_rng([seed, 2])
    w = float(rng.random())
    modal = euler_from_matrices(Rotation.random(random_state=rng).as_matrix()[None])[0]
    return OdfParams(w=w, modal=tuple(float(a) for a in modal), half_width=half_width)


def generate_polycrystal(seed: int, n_grains: int, grid=(16, 16, 16), odf: OdfParams | None = None) -> Polycrystal:
    labels = generate_labels(seed, n_grains, grid)
    if odf is None:
        odf = random_odf(seed)
    orientations = sample_orientations(seed, n_grains, odf)
    return Polycrystal(tuple(int(n) for n in grid), labels, orientations, int(seed))


def contacts(p: Polycrystal) -> list[tuple[int, int]]:
    """Grain pairs sharing at least one voxel face, periodic wrap included."""
    lab = p.labels.astype(np.int64)
    n = p.n_grains
    codes = []
    for axis in range(3):
        nb = np.roll(lab, -1, axis=axis)
        diff = lab != nb
        a, b = lab[diff], nb[diff]
        codes.append(np.minimum(a, b) * n + np.maximum(a, b))
    if not codes:
        return []
    uniq = np.unique(np.concatenate(codes))
    return [(int(c // n), int(c % n)) for c in uniq]
