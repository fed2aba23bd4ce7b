import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphelastic.fung import FungConstants, fung_energy_and_stress
from graphelastic.homogenization import (
    FftConfig,
    NonConvergenceError,
    build_dataset,
    fft_homogenize,
    reference_lame,
    sample_deformation,
    taylor_homogenize,
)
from graphelastic.microstructure import Polycrystal, generate_polycrystal
from graphelastic.tensors import green_strain, to_voigt


def uniform_crystal(grid, euler, n_grains=1, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_grains, size=grid).astype(np.uint16)
    labels.flat[:n_grains] = np.arange(n_grains)
    return Polycrystal(grid, labels, np.tile(euler, (n_grains, 1)), seed)


def test_sample_deformation_range_and_determinism():
    F = sample_deformation(3, 2, 7)
    np.testing.assert_array_equal(F, sample_deformation(3, 2, 7))
    U = F - np.eye(3)
    assert U.min() >= 0 and U.max() <= 0.1
    assert np.linalg.det(F) > 0
    assert not np.array_equal(F, sample_deformation(3, 2, 8))


def test_taylor_single_grain_is_fung():
    eul = np.array([0.3, 0.9, 1.7])
    p = uniform_crystal((4, 4, 4), eul)
    F = sample_deformation(0)
    psi, S = taylor_homogenize(p, F)
    W, S_ref = fung_energy_and_stress(green_strain(F), eul)
    assert psi == pytest.approx(float(W), rel=1e-14)
    np.testing.assert_allclose(S, to_voigt(S_ref), rtol=1e-14)


def test_taylor_matches_voxel_brute_force():
    p = generate_polycrystal(11, 45, (16, 16, 16))
    F = sample_deformation(1)
    psi, S = taylor_homogenize(p, F)
    eul = p.orientations[p.labels.ravel()]
    W, Sv = fung_energy_and_stress(green_strain(F)[None], eul)
    assert psi == pytest.approx(W.mean(), abs=1e-12)
    np.testing.assert_allclose(S, to_voigt(Sv.mean(axis=0)), atol=1e-12)


def test_taylor_batched_matches_loop():
    p = generate_polycrystal(2, 5, (6, 6, 6))
    F = np.stack([sample_deformation(0, 0, i) for i in range(4)])
    psi, S = taylor_homogenize(p, F)
    for i in range(4):
        a, b = taylor_homogenize(p, F[i])
        assert psi[i] == pytest.approx(a, rel=1e-14)
        np.testing.assert_allclose(S[i], b, rtol=1e-14)


def test_taylor_duplicated_grain_invariance():
    p = generate_polycrystal(4, 3, (6, 6, 6))
    labels = p.labels.copy()
    # split grain 0 into two grains with the same orientation
    idx = np.flatnonzero(labels.ravel() == 0)
    flat = labels.ravel()
    flat[idx[: len(idx) // 2]] = 3
    q = Polycrystal(p.grid, flat.reshape(p.grid), np.vstack([p.orientations, p.orientations[:1]]), 0)
    F = sample_deformation(5)
    a, b = taylor_homogenize(p, F), taylor_homogenize(q, F)
    assert a[0] == pytest.approx(b[0], rel=1e-14)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(0, 2 * np.pi), st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_taylor_energy_invariant_to_rigid_prerotation(i, a, b, c):
    from scipy.spatial.transform import Rotation

    p = generate_polycrystal(7, 6, (6, 6, 6))
    F = sample_deformation(9, 0, i)
    Q = Rotation.from_euler("ZXZ", [a, b, c]).as_matrix()
    assert taylor_homogenize(p, Q @ F)[0] == pytest.approx(taylor_homogenize(p, F)[0], rel=1e-12)


def test_taylor_stress_is_energy_gradient():
    p = generate_polycrystal(8, 7, (6, 6, 6))
    F = sample_deformation(2)
    C = F.T @ F
    _, S = taylor_homogenize(p, F)
    h = 1e-6
    for a, (i, j) in enumerate([(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]):
        d = np.zeros((3, 3))
        d[i, j] += h / 2
        d[j, i] += h / 2
        # F from C via the symmetric square root keeps C exact
        from scipy.linalg import sqrtm

        up = taylor_homogenize(p, np.real(sqrtm(C + d)))[0]
        dn = taylor_homogenize(p, np.real(sqrtm(C - d)))[0]
        assert 2 * (up - dn) / (2 * h) == pytest.approx(S[a], rel=1e-6, abs=1e-10)


def test_fft_homogeneous_medium():
    eul = np.array([1.0, 0.4, 2.2])
    p = uniform_crystal((8, 8, 8), eul, n_grains=3)
    F = sample_deformation(4)
    res = fft_homogenize(p, F)
    assert res.converged and res.iters <= 2 and res.residual < 1e-10
    W, S = fung_energy_and_stress(green_strain(F), eul)
    assert res.psi == pytest.approx(float(W), abs=1e-10)
    np.testing.assert_allclose(res.S_voigt, to_voigt(S), atol=1e-10)


def test_fft_single_grain_equals_taylor():
    p = uniform_crystal((8, 8, 8), np.array([0.5, 0.5, 0.5]))
    F = sample_deformation(6)
    res = fft_homogenize(p, F)
    psi, S = taylor_homogenize(p, F)
    assert res.psi == pytest.approx(psi, abs=1e-14)
    np.testing.assert_allclose(res.S_voigt, S, atol=1e-14)


def test_fft_below_taylor_small_strain():
    p = generate_polycrystal(21, 4, (8, 8, 8))
    rng = np.random.default_rng(0)
    F = np.eye(3) + 0.01 * rng.random((3, 3))
    res = fft_homogenize(p, F, FftConfig(tol=1e-10))
    assert res.converged
    assert res.psi <= taylor_homogenize(p, F)[0] + 1e-12


def test_fft_full_range_converges_and_stays_near_taylor():
    p = generate_polycrystal(22, 6, (8, 8, 8))
    F = np.eye(3) + 0.1 * np.ones((3, 3)) * np.eye(3) + 0.1 * np.triu(np.ones((3, 3)), 1)
    res = fft_homogenize(p, F)
    assert res.converged
    psi_t, _ = taylor_homogenize(p, F)
    assert res.psi <= psi_t and res.psi > 0.8 * psi_t


def test_fft_odd_grid():
    p = generate_polycrystal(23, 5, (7, 7, 7))
    res = fft_homogenize(p, sample_deformation(8))
    assert res.converged
    assert np.all(np.diff(res.residual_history[-5:]) < 0)


def test_fft_reports_nonconvergence():
    p = generate_polycrystal(24, 5, (8, 8, 8))
    res = fft_homogenize(p, sample_deformation(1), FftConfig(max_iter=3))
    assert not res.converged and res.iters == 3
    with pytest.raises(NonConvergenceError):
        build_dataset([p], 1, "fft", fft_cfg=FftConfig(max_iter=3))


def test_fft_rejects_inverted_mean():
    p = uniform_crystal((4, 4, 4), np.zeros(3))
    with pytest.raises(ValueError):
        fft_homogenize(p, -np.eye(3))


def test_reference_lame():
    lam0, mu0 = reference_lame(FungConstants(), 2.0)
    assert lam0 == pytest.approx(2 * 6.5 / 9)
    assert mu0 == pytest.approx(2 * 1.3 / 3)


def test_build_dataset():
    rves = [generate_polycrystal(s, 4, (6, 6, 6)) for s in range(3)]
    ds = build_dataset(rves, 5, seed=9)
    assert len(ds) == 15
    np.testing.assert_array_equal(ds.rve_id, np.repeat([0, 1, 2], 5))
    again = build_dataset(rves, 5, seed=9)
    for a, b in ((ds.C, again.C), (ds.psi, again.psi), (ds.S, again.S)):
        np.testing.assert_array_equal(a, b)
    assert ds.meta["homogenizer"] == "taylor"
    sub = ds.subset(ds.rve_id == 1)
    assert len(sub) == 5 and list(sub.rve_ids()) == [1]


def test_build_dataset_fft_metadata():
    ds = build_dataset([generate_polycrystal(1, 3, (6, 6, 6))], 2, "fft")
    assert ds.meta["homogenizer"] == "fft"
    assert ds.meta["fft"]["tol"] == FftConfig().tol
    assert len(ds.meta["fft"]["reference_lame"]) == 2


@pytest.mark.parametrize("kw", [dict(n_samples_per_rve=0), dict(homogenizer="voigt"), dict(rves=[])])
def test_build_dataset_rejects(kw):
    args = dict(rves=[generate_polycrystal(0, 2, (4, 4, 4))], n_samples_per_rve=2)
    args.update(kw)
    with pytest.raises(ValueError):
        build_dataset(**args)
