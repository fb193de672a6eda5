"""Truncated Fock spaces, ladder operators and density matrices.

Tensor ordering is fixed by ``mode_labels``: the leftmost label is the
slowest-varying index of the product basis, so a basis state
``|n_0, n_1, ..., n_k>`` has flat index ``np.ravel_multi_index(ns, mode_dims)``.

Ladder operators are cut at the top Fock level.  The commutator
``[a, a^dag]`` is therefore the identity on levels ``0 .. dim-2`` and equals
``1 - dim`` on the top level; results near the cutoff are validated by
re-running at larger truncations rather than corrected in place.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SpaceMismatchError",
    "thermal_populations",
    "HilbertSpace",
    "Operator",
    "DensityMatrix",
    "make_space",
    "annihilation",
    "creation",
    "number",
    "identity",
    "add",
    "mul",
    "scale",
    "dagger",
    "commutator",
    "fock_dm",
    "thermal_dm",
    "product_dm",
    "partial_trace",
]


class SpaceMismatchError(ValueError):
    """Operands live on different Hilbert spaces."""


@dataclass(frozen=True)
class HilbertSpace:
    mode_dims: tuple[int, ...]
    mode_labels: tuple[str, ...]
    total_dim: int = field(init=False)

    def __post_init__(self):
        if len(self.mode_dims) != len(self.mode_labels):
            raise ValueError(
                f"{len(self.mode_dims)} dims given for {len(self.mode_labels)} labels"
            )
        if not self.mode_dims:
            raise ValueError("a Hilbert space needs at least one mode")
        for d in self.mode_dims:
            if int(d) != d or d < 1:
                raise ValueError(f"mode dimensions must be positive integers, got {d!r}")
        if len(set(self.mode_labels)) != len(self.mode_labels):
            raise ValueError(f"duplicate mode label in {self.mode_labels}")
        object.__setattr__(self, "total_dim", int(np.prod(self.mode_dims)))

    def index(self, label: str) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown mode {label!r}; space has {self.mode_labels}") from None

    def dim(self, label: str) -> int:
        return self.mode_dims[self.index(label)]

    def subspace(self, labels: Sequence[str]) -> "HilbertSpace":
        """Space spanned by ``labels``, kept in this space's mode order."""
        keep = sorted(self.index(l) for l in labels)
        return HilbertSpace(
            tuple(self.mode_dims[i] for i in keep),
            tuple(self.mode_labels[i] for i in keep),
        )

    def basis_index(self, occupations: dict[str, int] | Sequence[int]) -> int:
        if isinstance(occupations, dict):
            occupations = [occupations.get(l, 0) for l in self.mode_labels]
        return int(np.ravel_multi_index(tuple(occupations), self.mode_dims))


def make_space(mode_dims: Sequence[int], mode_labels: Sequence[str]) -> HilbertSpace:
    return HilbertSpace(tuple(int(d) for d in mode_dims), tuple(mode_labels))


def _canonical(m, floor: float = 0.0) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=complex)
    m.sum_duplicates()
    if floor > 0:
        m.data[np.abs(m.data) < floor] = 0
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class Operator:
    """Sparse complex matrix acting on a :class:`HilbertSpace`.

    Supports ``+``, ``-``, ``@`` (operator product) and multiplication by
    scalars.  The stored matrix is canonical CSR (sorted, deduplicated,
    explicit zeros removed).
    """

    space: HilbertSpace
    matrix: sp.csr_matrix
    floor: float = 0.0

    def __post_init__(self):
        n = self.space.total_dim
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dimension {n}")
        object.__setattr__(self, "matrix", _canonical(self.matrix, self.floor))

    def _check(self, other: "Operator"):
        if not isinstance(other, Operator):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError(f"{self.space.mode_labels} vs {other.space.mode_labels}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix @ other.matrix)

    def __mul__(self, z):
        if isinstance(z, Operator):
            return NotImplemented
        return Operator(self.space, complex(z) * self.matrix)

    __rmul__ = __mul__

    @property
    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        diff = self.matrix - self.matrix.conj().T
        scale = max(abs(self.matrix).max() if self.matrix.nnz else 0.0, 1.0)
        return (abs(diff).max() if diff.nnz else 0.0) <= tol * scale

    def __eq__(self, other):
        if not isinstance(other, Operator) or other.space != self.space:
            return False
        diff = self.matrix - other.matrix
        diff.eliminate_zeros()
        return diff.nnz == 0

    __hash__ = None


def _embed(space: HilbertSpace, label: str, single: sp.spmatrix) -> Operator:
    k = space.index(label)
    factors = [sp.identity(d, dtype=complex, format="csr") for d in space.mode_dims]
    factors[k] = sp.csr_matrix(single, dtype=complex)
    return Operator(space, reduce(lambda x, y: sp.kron(x, y, format="csr"), factors))


def _lowering(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim)), offsets=1, shape=(dim, dim), dtype=complex, format="csr")


def annihilation(space: HilbertSpace, mode: str) -> Operator:
    """Lowering operator of ``mode`` embedded as ``I x ... x a x ... x I``."""
    return _embed(space, mode, _lowering(space.dim(mode)))


def creation(space: HilbertSpace, mode: str) -> Operator:
    return annihilation(space, mode).dag


def number(space: HilbertSpace, mode: str) -> Operator:
    d = space.dim(mode)
    return _embed(space, mode, sp.diags(np.arange(d, dtype=complex), format="csr"))


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, sp.identity(space.total_dim, dtype=complex, format="csr"))


def add(a: Operator, b: Operator) -> Operator:
    return a + b


def mul(a: Operator, b: Operator) -> Operator:
    return a @ b


def scale(z: complex, a: Operator) -> Operator:
    return z * a


def dagger(a: Operator) -> Operator:
    return a.dag


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix on a :class:`HilbertSpace`.

    Construction checks Hermiticity, unit trace and positivity against the
    tolerances below; pass ``validate=False`` for intermediate objects such as
    unnormalised solver output.
    """

    space: HilbertSpace
    matrix: np.ndarray
    validate: bool = True
    tol_herm: float = 1e-10
    tol_trace: float = 1e-10
    tol_pos: float = 1e-8

    def __post_init__(self):
        m = np.asarray(self.matrix.toarray() if sp.issparse(self.matrix) else self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match dimension {n}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.validate:
            self.check()

    def hermiticity_error(self) -> float:
        scale = max(np.abs(self.matrix).max(), 1e-300)
        return float(np.abs(self.matrix - self.matrix.conj().T).max() / scale)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def check(self):
        herm = self.hermiticity_error()
        if herm > self.tol_herm:
            raise ValueError(f"density matrix not Hermitian (relative error {herm:.3g})")
        tr = np.trace(self.matrix)
        if abs(tr - 1) > self.tol_trace:
            raise ValueError(f"density matrix trace {tr} differs from 1")
        lam = self.min_eigenvalue()
        if lam < -self.tol_pos:
            raise ValueError(f"density matrix has eigenvalue {lam:.3g} below -{self.tol_pos}")

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def element(self, bra: dict[str, int], ket: dict[str, int]) -> complex:
        """Matrix element ``<bra| rho |ket>`` with occupations given per label."""
        return complex(self.matrix[self.space.basis_index(bra), self.space.basis_index(ket)])


def fock_dm(space: HilbertSpace, occupations: dict[str, int]) -> DensityMatrix:
    m = np.zeros((space.total_dim,) * 2, dtype=complex)
    i = space.basis_index(occupations)
    m[i, i] = 1.0
    return DensityMatrix(space, m)


def thermal_populations(dim: int, nbar: float) -> np.ndarray:
    """Geometric populations ``(nbar/(nbar+1))**n``, normalised on ``dim`` levels."""
    if nbar == 0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p
    p = (nbar / (nbar + 1.0)) ** np.arange(dim)
    return p / p.sum()


def thermal_dm(space: HilbertSpace, nbar: float) -> DensityMatrix:
    if len(space.mode_dims) != 1:
        raise ValueError("thermal_dm builds a single-mode state")
    return DensityMatrix(space, np.diag(thermal_populations(space.total_dim, nbar)).astype(complex))


def product_dm(*states: DensityMatrix) -> DensityMatrix:
    space = HilbertSpace(
        sum((s.space.mode_dims for s in states), ()),
        sum((s.space.mode_labels for s in states), ()),
    )
    return DensityMatrix(space, reduce(np.kron, (s.matrix for s in states)))


def partial_trace(rho: DensityMatrix, keep: Sequence[str]) -> DensityMatrix:
    """Trace out every mode not in ``keep``; kept modes retain their order."""
    if not keep:
        raise ValueError("keep must name at least one mode")
    space = rho.space
    keep_idx = sorted({space.index(l) for l in keep})
    if len(keep_idx) == len(space.mode_dims):
        return rho
    n = len(space.mode_dims)
    t = rho.matrix.reshape(space.mode_dims * 2)
    # einsum subscripts: traced modes share the bra and ket letter
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    bra = [letters[i] for i in range(n)]
    ket = [letters[n + i] if i in keep_idx else letters[i] for i in range(n)]
    out = [bra[i] for i in keep_idx] + [ket[i] for i in keep_idx]
    reduced = np.einsum("".join(bra + ket) + "->" + "".join(out), t)
    sub = space.subspace([space.mode_labels[i] for i in keep_idx])
    return DensityMatrix(
        sub,
        reduced.reshape(sub.total_dim, sub.total_dim),
        validate=rho.validate,
        tol_herm=rho.tol_herm,
        tol_trace=rho.tol_trace,
        tol_pos=rho.tol_pos,
    )
