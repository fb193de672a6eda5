import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockstab import fock
from fockstab.fock import (
    DensityMatrix,
    SpaceMismatchError,
    annihilation,
    commutator,
    fock_dm,
    make_space,
    number,
    partial_trace,
    product_dm,
    thermal_dm,
)


def test_space_index_order():
    S = make_space((2, 3), ("a", "c"))
    assert S.total_dim == 6
    # leftmost label varies slowest
    assert S.basis_index({"a": 1, "c": 0}) == 3
    assert S.basis_index((0, 2)) == 2


@pytest.mark.parametrize(
    "dims, labels",
    [((2,), ("a", "b")), ((0,), ("a",)), ((2, 2), ("a", "a")), ((), ())],
)
def test_space_rejects_bad_input(dims, labels):
    with pytest.raises(ValueError):
        make_space(dims, labels)


def test_unknown_mode():
    S = make_space((2,), ("a",))
    with pytest.raises(KeyError):
        annihilation(S, "b")


def test_ladder_elements():
    S = make_space((4,), ("c",))
    a = annihilation(S, "c").toarray()
    assert np.allclose(np.diag(a, 1), np.sqrt([1, 2, 3]))
    ad = fock.creation(S, "c").toarray()
    assert np.allclose(ad, a.conj().T)
    assert np.allclose((fock.creation(S, "c") @ annihilation(S, "c")).toarray(), number(S, "c").toarray())


def test_commutator_truncation_edge():
    d = 5
    S = make_space((d,), ("c",))
    a = annihilation(S, "c")
    comm = commutator(a, a.dag).toarray()
    expected = np.ones(d)
    expected[-1] = 1 - d
    assert np.allclose(comm, np.diag(expected))


def test_embedding_acts_on_its_mode():
    S = make_space((2, 3), ("a", "c"))
    c = annihilation(S, "c")
    ket = np.zeros(6)
    ket[S.basis_index({"a": 1, "c": 2})] = 1
    out = c.matrix @ ket
    assert out[S.basis_index({"a": 1, "c": 1})] == pytest.approx(np.sqrt(2))
    assert np.count_nonzero(out) == 1


def test_space_mismatch():
    a = annihilation(make_space((2,), ("a",)), "a")
    b = annihilation(make_space((3,), ("a",)), "a")
    with pytest.raises(SpaceMismatchError):
        a + b
    with pytest.raises(SpaceMismatchError):
        a @ b


def test_operator_equality_and_scalars():
    S = make_space((3,), ("c",))
    a = annihilation(S, "c")
    assert 2 * a == a + a
    assert a - a == 0 * a
    assert a.dag.dag == a
    assert (a.dag @ a).is_hermitian()
    assert not a.is_hermitian()


def test_density_matrix_validation():
    S = make_space((2,), ("a",))
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(S, np.diag([0.5, 0.4]))
    with pytest.raises(ValueError, match="Hermitian"):
        DensityMatrix(S, np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(ValueError, match="eigenvalue"):
        DensityMatrix(S, np.diag([1.5, -0.5]))
    rho = DensityMatrix(S, np.diag([0.25, 0.75]))
    assert not rho.matrix.flags.writeable


def test_thermal_populations_geometric():
    p = fock.thermal_populations(40, 0.7)
    assert p.sum() == pytest.approx(1)
    assert np.allclose(p[1:] / p[:-1], 0.7 / 1.7)
    assert np.array_equal(fock.thermal_populations(3, 0), [1, 0, 0])


def test_partial_trace_of_product():
    a = thermal_dm(make_space((3,), ("a",)), 0.3)
    c = fock_dm(make_space((4,), ("c",)), {"c": 2})
    rho = product_dm(a, c)
    assert rho.space.mode_labels == ("a", "c")
    assert np.allclose(partial_trace(rho, ["c"]).matrix, c.matrix)
    assert np.allclose(partial_trace(rho, ["a"]).matrix, a.matrix)
    assert partial_trace(rho, ["a", "c"]) is rho


def _random_state(rng, n):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    r = x @ x.conj().T
    return r / np.trace(r)


@settings(max_examples=30, deadline=None)
@given(
    dims=st.lists(st.integers(1, 3), min_size=2, max_size=3),
    seed=st.integers(0, 2**31 - 1),
    keep=st.integers(0, 2),
)
def test_partial_trace_properties(dims, seed, keep):
    labels = ("x", "y", "z")[: len(dims)]
    S = make_space(dims, labels)
    rho = DensityMatrix(S, _random_state(np.random.default_rng(seed), S.total_dim))
    kept = labels[keep % len(dims)]
    red = partial_trace(rho, [kept])
    assert red.trace == pytest.approx(1)
    assert red.min_eigenvalue() > -1e-12
    # tr(O_kept rho) is the same before and after tracing
    n_full = number(S, kept).toarray()
    n_red = number(red.space, kept).toarray()
    assert np.trace(n_full @ rho.matrix) == pytest.approx(np.trace(n_red @ red.matrix))
