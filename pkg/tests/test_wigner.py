import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_hermite

from fockstab.fock import DensityMatrix, make_space, thermal_dm
from fockstab.wigner import (
    GridError,
    MAX_FOCK_N,
    negativity_metrics,
    symmetry_residual,
    wigner_fock,
    wigner_grid,
    wigner_origin,
)


def _single(matrix):
    space = make_space([matrix.shape[0]], ["c"])
    return DensityMatrix(space, matrix)


def _fock(n, dim=None):
    dim = dim or n + 1
    m = np.zeros((dim, dim), dtype=complex)
    m[n, n] = 1
    return _single(m)


def _hermite_function(n, x):
    norm = 1.0 / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
    return norm * eval_hermite(n, x) * np.exp(-x * x / 2)


def _wigner_quadrature(rho, q, p, y_max=8.0, n_y=1601):
    """W(q,p) = 1/pi int <q+y|rho|q-y> exp(-2ipy) dy with Hermite wavefunctions."""
    y = np.linspace(-y_max, y_max, n_y)
    dim = rho.shape[0]
    plus = np.array([_hermite_function(n, q + y) for n in range(dim)])
    minus = np.array([_hermite_function(n, q - y) for n in range(dim)])
    integrand = np.einsum("my,mn,ny->y", plus, rho, minus) * np.exp(-2j * p * y)
    return float(np.real(np.trapezoid(integrand, y)) / math.pi)


def _random_state(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = z @ z.conj().T
    return m / np.trace(m)


# ---- closed forms ---------------------------------------------------------


def test_vacuum_and_single_phonon_closed_forms():
    q = np.linspace(-3, 3, 7)
    p = np.linspace(-2, 2, 7)
    r2 = q**2 + p**2
    assert np.allclose(wigner_fock(0, q, p), np.exp(-r2) / math.pi, atol=1e-15)
    assert np.allclose(wigner_fock(1, q, p), (2 * r2 - 1) * np.exp(-r2) / math.pi, atol=1e-15)
    assert wigner_fock(1, 0, 0) == pytest.approx(-1 / math.pi, abs=1e-15)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
def test_grid_matches_fock_closed_form(n):
    w = wigner_grid(_fock(n, n + 2), q_range=5, n_points=41)
    Q, P = np.meshgrid(w.q_axis, w.p_axis, indexing="ij")
    assert np.allclose(w.values, wigner_fock(n, Q, P), atol=1e-12)


def test_fock_origin_values():
    for n in range(MAX_FOCK_N + 1):
        assert wigner_fock(n, 0.0, 0.0) == pytest.approx((-1) ** n / math.pi, abs=1e-12)


def test_fock_range_errors():
    with pytest.raises(ValueError):
        wigner_fock(MAX_FOCK_N + 1, 0.0, 0.0)
    with pytest.raises(ValueError):
        wigner_fock(-1, 0.0, 0.0)


# ---- independent oracle: direct quadrature of the defining integral --------


def test_grid_matches_quadrature_for_random_state():
    rng = np.random.default_rng(7)
    rho = _random_state(rng, 5)
    w = wigner_grid(_single(rho), q_range=3, n_points=7, check_normalization=False)
    for i, q in enumerate(w.q_axis):
        for j, p in enumerate(w.p_axis):
            assert w.values[i, j] == pytest.approx(_wigner_quadrature(rho, q, p), abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_bounded_and_real(dim, seed):
    rho = _random_state(np.random.default_rng(seed), dim)
    w = wigner_grid(_single(rho), q_range=4, n_points=41, check_normalization=False)
    assert np.isrealobj(w.values)
    assert np.abs(w.values).max() <= 1 / math.pi + 1e-12


def test_diagonal_state_equals_weighted_fock_sum():
    P = np.array([0.2, 0.55, 0.18, 0.05, 0.02])
    w = wigner_grid(_single(np.diag(P).astype(complex)), n_points=51)
    Q, Pg = np.meshgrid(w.q_axis, w.p_axis, indexing="ij")
    expected = sum(P[n] * wigner_fock(n, Q, Pg) for n in range(P.size))
    assert np.abs(w.values - expected).max() < 1e-10


def test_wigner_origin_matches_grid():
    rng = np.random.default_rng(3)
    rho = _single(_random_state(rng, 6))
    w = wigner_grid(rho, n_points=51)
    assert w.value_at_origin() == pytest.approx(wigner_origin(rho), abs=1e-12)


# ---- normalization and grid checks ----------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_normalization_default_grid(n):
    w = wigner_grid(_fock(n))
    assert abs(w.normalization - 1) < 1e-6


def test_normalization_converges_under_refinement():
    rho = thermal_dm(make_space([8], ["c"]), 0.8)
    errs = [
        abs(wigner_grid(rho, q_range=6, n_points=n, check_normalization=False).normalization - 1)
        for n in (9, 13, 25)
    ]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-8


def test_small_grid_is_rejected():
    with pytest.raises(GridError):
        wigner_grid(_fock(3), q_range=1.0, n_points=41)


def test_multimode_input_needs_mode():
    space = make_space([2, 3], ["a", "c"])
    m = np.zeros((6, 6), dtype=complex)
    m[1, 1] = 1  # |0,1>
    rho = DensityMatrix(space, m)
    with pytest.raises(ValueError):
        wigner_grid(rho)
    w = wigner_grid(rho, mode="c", n_points=41)
    assert w.value_at_origin() == pytest.approx(-1 / math.pi, abs=1e-12)


def test_bad_axis():
    with pytest.raises(GridError):
        wigner_grid(_fock(0), q_range=(1, -1))


# ---- negativity and symmetry ----------------------------------------------


def test_single_phonon_negative_volume():
    # radial integral of the negative part of W_1: 2 exp(-1/2) - 1
    w = wigner_grid(_fock(1), n_points=401)
    metrics = negativity_metrics(w)
    assert metrics["negative_volume"] == pytest.approx(2 * math.exp(-0.5) - 1, abs=2e-4)
    assert metrics["min_value"] == pytest.approx(-1 / math.pi, abs=1e-12)
    assert metrics["min_location"] == (0.0, 0.0)


def test_positive_state_has_no_negative_volume():
    w = wigner_grid(_fock(0))
    assert negativity_metrics(w)["negative_volume"] == 0.0


def test_symmetry_residual_small_for_diagonal_states():
    rho = _single(np.diag([0.3, 0.5, 0.2]).astype(complex))
    assert symmetry_residual(wigner_grid(rho)) < 1e-5


def test_symmetry_residual_large_for_coherence():
    m = 0.5 * np.ones((2, 2), dtype=complex)
    assert symmetry_residual(wigner_grid(_single(m))) > 0.1


def test_symmetry_residual_requires_centred_grid():
    w = wigner_grid(_fock(0), q_range=(-4, 6), p_range=5, n_points=101, check_normalization=False)
    with pytest.raises(GridError):
        symmetry_residual(w)
