import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from fockstab.fock import DensityMatrix, annihilation, fock_dm, make_space, number, thermal_populations
from fockstab.liouville import (
    SolverError,
    Superoperator,
    cross_dissipator_superop,
    dissipator_superop,
    evolve,
    expectation,
    hamiltonian_superop,
    steady_state,
    trace_distance,
    unvec,
    vec,
)
from fockstab.models import GenericParams, build_generic


def test_vec_identity():
    rng = np.random.default_rng(0)
    A, B, R = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(np.kron(B.T, A) @ vec(R), vec(A @ R @ B))
    assert np.array_equal(unvec(vec(R), 3), R)


def test_superop_matches_direct_formula():
    S = make_space((2, 3), ("a", "c"))
    a, c = annihilation(S, "a"), annihilation(S, "c")
    H = 0.7 * (a.dag @ c + c.dag @ a) + 0.3 * number(S, "c")
    L = hamiltonian_superop(H) + dissipator_superop(c, 0.4) + dissipator_superop(a.dag @ c, 0.2)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h, cm, o = H.toarray(), c.toarray(), (a.dag @ c).toarray()

    def D(o, r):
        return o @ r @ o.conj().T - 0.5 * (o.conj().T @ o @ r + r @ o.conj().T @ o)

    expected = -1j * (h @ x - x @ h) + 0.4 * D(cm, x) + 0.2 * D(o, x)
    assert np.allclose(L.apply(x), expected)


def test_cross_dissipator_formula():
    S = make_space((3, 2), ("p", "m"))
    o1, o2 = annihilation(S, "m"), annihilation(S, "p")
    L = cross_dissipator_superop(o1, o2, 0.3)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    A, B = o1.toarray(), o2.toarray()
    herm = B.conj().T @ A + A.conj().T @ B
    expected = 0.3 * (A @ x @ B.conj().T + B @ x @ A.conj().T - 0.5 * (herm @ x + x @ herm))
    assert np.allclose(L.apply(x), expected)
    # o1 == o2 reduces to twice the ordinary dissipator
    same = cross_dissipator_superop(o1, o1, 0.3).matrix - dissipator_superop(o1, 0.6).matrix
    assert abs(same).max() < 1e-15


def test_input_validation():
    S = make_space((2,), ("a",))
    a = annihilation(S, "a")
    with pytest.raises(ValueError):
        hamiltonian_superop(a)
    with pytest.raises(ValueError):
        dissipator_superop(a, -1.0)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    rates=st.lists(st.floats(0, 5), min_size=3, max_size=3),
)
def test_trace_preservation(seed, rates):
    rng = np.random.default_rng(seed)
    S = make_space((2, 3), ("a", "c"))
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    from fockstab.fock import Operator

    H = Operator(S, h + h.conj().T)
    ops = [Operator(S, rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))) for _ in range(3)]
    L = hamiltonian_superop(H)
    for o, r in zip(ops, rates):
        L = L + dissipator_superop(o, r)
    L = L + cross_dissipator_superop(ops[0], ops[1], 0.1)
    assert L.trace_defect() < 1e-12


def test_damped_oscillator_is_thermal():
    # detailed balance: P_{n+1}/P_n = gamma_up/gamma_down = nbar/(nbar+1)
    nbar, gamma = 0.8, 0.3
    S = make_space((25,), ("c",))
    c = annihilation(S, "c")
    L = dissipator_superop(c, gamma * (nbar + 1)) + dissipator_superop(c.dag, gamma * nbar)
    rep = steady_state(L)
    assert np.allclose(rep.rho.diagonal(), thermal_populations(25, nbar), atol=1e-12)
    assert rep.relative_residual < 1e-12


def test_degenerate_null_space_is_rejected():
    # no dissipation: every Fock projector is stationary
    S = make_space((3,), ("c",))
    L = hamiltonian_superop(number(S, "c"))
    with pytest.raises(SolverError):
        steady_state(L)
    with pytest.raises(SolverError):
        steady_state(L, method="dense")


def test_unknown_method():
    S = make_space((2,), ("a",))
    with pytest.raises(ValueError):
        steady_state(dissipator_superop(annihilation(S, "a"), 1.0), method="magic")


def _small_generic(seed):
    rng = np.random.default_rng(seed)
    return GenericParams(
        g_tilde=rng.uniform(-3, 3),
        Gamma=rng.uniform(0.5, 10),
        kappa=rng.uniform(0.01, 2),
        gamma_down=rng.uniform(0.01, 1),
        gamma_up=rng.uniform(0.01, 1),
        dims=(2, 4),
    )


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_direct_matches_dense(seed):
    L = build_generic(_small_generic(seed))
    direct = steady_state(L, cross_check=True)
    dense = steady_state(L, method="dense")
    assert direct.diagnostics["dense_cross_check"] <= 1e-8
    assert trace_distance(direct.rho, dense.rho) <= 1e-8
    for rep in (direct, dense):
        assert rep.relative_residual <= 1e-9
        assert rep.rho.hermiticity_error() <= 1e-10
        assert rep.rho.min_eigenvalue() >= -1e-8
        assert rep.rho.trace == pytest.approx(1, abs=1e-12)


def test_nested_dissection_route_matches_colamd():
    from fockstab import liouville

    p = GenericParams(1.3, 6.0, 0.4, 0.05, 0.2, dims=(3, 20))
    L = build_generic(p)
    assert L.space.total_dim ** 2 >= liouville.ND_THRESHOLD
    nd = steady_state(L)
    assert nd.diagnostics["ordering"] == "nested-dissection"
    A = liouville._replaced_system(L, int(liouville._population_rows(L)[0]))
    f = liouville._Factor(A, nd_threshold=10**9)
    assert f.ordering == "colamd"
    b = np.zeros(A.shape[0], complex)
    b[int(liouville._population_rows(L)[0])] = 1
    rho_c = unvec(f.refined_solve(b), L.space.total_dim)
    assert trace_distance(nd.rho, rho_c / np.trace(rho_c)) < 1e-10


def test_evolve_approaches_steady_state():
    p = GenericParams(g_tilde=1.0, Gamma=2.0, kappa=0.5, gamma_down=0.2, gamma_up=0.4, dims=(2, 5))
    L = build_generic(p)
    ss = steady_state(L)
    rho0 = fock_dm(L.space, {})
    late = evolve(L, rho0, 200.0)
    assert trace_distance(late, ss.rho) <= 1e-4
    assert late.hermiticity_error() == 0
    assert late.trace == pytest.approx(1, abs=1e-8)


def test_evolve_zero_time_and_validation():
    p = GenericParams(1.0, 2.0, 0.5, 0.2, 0.4, dims=(2, 4))
    L = build_generic(p)
    rho0 = fock_dm(L.space, {})
    assert evolve(L, rho0, 0.0) is rho0
    with pytest.raises(ValueError):
        evolve(L, rho0, -1.0)


def test_expectation_and_trace_distance():
    S = make_space((4,), ("c",))
    rho = DensityMatrix(S, np.diag([0.1, 0.2, 0.3, 0.4]))
    assert expectation(rho, number(S, "c")) == pytest.approx(2.0)
    other = fock_dm(S, {"c": 3})
    assert trace_distance(rho, other) == pytest.approx(0.6)
    assert trace_distance(rho, rho) == 0


def test_superoperator_shape_check():
    S = make_space((2,), ("a",))
    import scipy.sparse as sp

    with pytest.raises(ValueError):
        Superoperator(S, sp.identity(3))
