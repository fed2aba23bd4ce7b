import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from graphelastic.tensors import (
    energy_gradient_from_stress,
    from_voigt,
    random_rotations,
    rotation_z,
    stress_from_energy_gradient,
    to_voigt,
    voigt_contract,
)
from graphelastic.verification import FungModel, gradient_inequality_margins, sample_C_pool

vec6 = arrays(float, 6, elements=st.floats(-10, 10))


@settings(max_examples=60, deadline=None)
@given(vec6)
def test_voigt_round_trip(v):
    np.testing.assert_array_equal(to_voigt(from_voigt(v)), v)


@settings(max_examples=60, deadline=None)
@given(vec6, vec6)
def test_contract_is_tensor_double_dot(a, b):
    assert voigt_contract(a, b) == pytest.approx(np.sum(from_voigt(a) * from_voigt(b)), rel=1e-12, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(vec6)
def test_gradient_maps_invert(g):
    np.testing.assert_allclose(energy_gradient_from_stress(stress_from_energy_gradient(g)), g)


def test_first_order_expansion_uses_half_stress():
    m = FungModel([0.5, 0.8, 1.9])
    C = sample_C_pool(4, 3)
    rng = np.random.default_rng(0)
    dC = 1e-4 * rng.standard_normal((4, 6))
    # margins are second order in dC only if the linear term is exact
    marg = gradient_inequality_margins(m, C + dC, C)
    assert np.abs(marg).max() < 1e-7
    wrong = m.energy(C + dC) - m.energy(C) - voigt_contract(energy_gradient_from_stress(m.stress(C)), dC)
    assert np.abs(wrong).max() > 1e-6


def test_random_rotations_are_rotations():
    R = random_rotations(np.random.default_rng(0), 100)
    np.testing.assert_allclose(R @ np.swapaxes(R, 1, 2), np.broadcast_to(np.eye(3), R.shape), atol=1e-14)
    np.testing.assert_allclose(np.linalg.det(R), 1.0)
    # Haar: the mean rotation vanishes
    big = random_rotations(np.random.default_rng(1), 20_000)
    assert np.abs(big.mean(axis=0)).max() < 0.03


def test_rotation_z():
    np.testing.assert_allclose(rotation_z(np.pi / 2) @ [1, 0, 0], [0, 1, 0], atol=1e-15)
