"""Lindblad superoperators, steady states and time evolution.

Density matrices are vectorised by column stacking, ``vec(rho) =
rho.reshape(-1, order="F")``, so that ``vec(A rho B) = (B^T kron A) vec(rho)``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import RK45
from scipy.sparse.linalg import LinearOperator, onenormest, splu

try:
    import pymetis
except ImportError:  # pragma: no cover - declared dependency
    pymetis = None

from .fock import DensityMatrix, HilbertSpace, Operator, SpaceMismatchError, _canonical

__all__ = [
    "Superoperator",
    "SteadyStateReport",
    "SolverError",
    "StiffnessError",
    "vec",
    "unvec",
    "hamiltonian_superop",
    "dissipator_superop",
    "cross_dissipator_superop",
    "steady_state",
    "evolve",
    "expectation",
    "trace_distance",
]

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096
ND_THRESHOLD = 2000


class SolverError(RuntimeError):
    """Steady-state solve failed: singular system, degenerate null space or large residual."""


class StiffnessError(SolverError):
    """Explicit integration could not proceed with a representable step size."""


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


@dataclass(frozen=True, eq=False)
class Superoperator:
    space: HilbertSpace
    matrix: sp.csr_matrix

    def __post_init__(self):
        n2 = self.space.total_dim ** 2
        if self.matrix.shape != (n2, n2):
            raise ValueError(f"superoperator shape {self.matrix.shape} does not match {n2}")
        object.__setattr__(self, "matrix", _canonical(self.matrix))

    def __add__(self, other):
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError(f"{self.space.mode_labels} vs {other.space.mode_labels}")
        return Superoperator(self.space, self.matrix + other.matrix)

    def __mul__(self, z):
        return Superoperator(self.space, complex(z) * self.matrix)

    __rmul__ = __mul__

    def apply(self, rho) -> np.ndarray:
        """Return ``L rho`` as a dense matrix."""
        m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        n = self.space.total_dim
        return unvec(self.matrix @ vec(m), n)

    def norm_inf(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max()) if self.matrix.nnz else 0.0

    def trace_defect(self) -> float:
        """``max |vec(I)^T L|`` relative to the largest entry; zero for trace-preserving L."""
        n = self.space.total_dim
        row = np.asarray(self.matrix[np.arange(n) * (n + 1), :].sum(axis=0)).ravel()
        biggest = abs(self.matrix).max() if self.matrix.nnz else 1.0
        return float(np.abs(row).max() / biggest) if row.size else 0.0


def _eye(n):
    return sp.identity(n, dtype=complex, format="csr")


def hamiltonian_superop(H: Operator, tol_herm: float = 1e-10) -> Superoperator:
    """Superoperator of ``rho -> -i [H, rho]``."""
    if not H.is_hermitian(tol_herm):
        raise ValueError("Hamiltonian is not Hermitian")
    n = H.space.total_dim
    h = H.matrix
    m = -1j * (sp.kron(_eye(n), h) - sp.kron(h.T, _eye(n)))
    return Superoperator(H.space, m)


def _anticommutator_terms(m: sp.spmatrix, n: int) -> sp.spmatrix:
    # vec(m rho + rho m)
    return sp.kron(_eye(n), m) + sp.kron(m.T, _eye(n))


def dissipator_superop(o: Operator, rate: float) -> Superoperator:
    """``rate * (o rho o^dag - {o^dag o, rho}/2)``."""
    if rate < 0:
        raise ValueError(f"dissipation rate must be nonnegative, got {rate}")
    n = o.space.total_dim
    a = o.matrix
    ada = a.conj().T @ a
    m = sp.kron(a.conj(), a) - 0.5 * _anticommutator_terms(ada, n)
    return Superoperator(o.space, rate * m)


def cross_dissipator_superop(o1: Operator, o2: Operator, rate: float) -> Superoperator:
    """Symmetric cross term between two decay channels.

    ``rate * (o1 rho o2^dag + o2 rho o1^dag - {o2^dag o1 + o1^dag o2, rho}/2)``.
    For ``o1 == o2`` this is ``2 * rate`` times the ordinary dissipator.
    The rate may have either sign; the term alone is not a valid generator.
    """
    if o1.space != o2.space:
        raise SpaceMismatchError(f"{o1.space.mode_labels} vs {o2.space.mode_labels}")
    n = o1.space.total_dim
    a, b = o1.matrix, o2.matrix
    herm = b.conj().T @ a + a.conj().T @ b
    m = sp.kron(b.conj(), a) + sp.kron(a.conj(), b) - 0.5 * _anticommutator_terms(herm, n)
    return Superoperator(o1.space, rate * m)


@dataclass
class SteadyStateReport:
    rho: DensityMatrix
    residual: float
    relative_residual: float
    solver: str
    diagnostics: dict[str, Any] = field(default_factory=dict)


def _finish(L: Superoperator, v: np.ndarray) -> tuple[np.ndarray, float, float]:
    n = L.space.total_dim
    rho = unvec(v, n)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    res = float(np.abs(L.matrix @ vec(rho)).max())
    return rho, res, res / max(L.norm_inf(), 1e-300)


def _trace_row(n: int) -> sp.csr_matrix:
    return sp.csr_matrix(
        (np.ones(n, dtype=complex), (np.zeros(n, dtype=int), np.arange(n) * (n + 1))), shape=(1, n * n)
    )


def _replaced_system(L: Superoperator, row: int) -> sp.csc_matrix:
    n = L.space.total_dim
    n2 = n * n
    keep = np.ones(n2)
    keep[row] = 0.0
    t = _trace_row(n).tocoo()
    trace_row = sp.csr_matrix((t.data, (np.full(t.nnz, row), t.col)), shape=(n2, n2))
    return (sp.diags(keep) @ L.matrix + trace_row).tocsc()


class _Factor:
    """Sparse LU of ``A`` with a fill-reducing symmetric ordering.

    Large systems are ordered by nested dissection of the symmetrised
    sparsity pattern (METIS) and factorised with diagonal-preferring pivoting;
    small ones use SuperLU's own COLAMD ordering.
    """

    def __init__(self, A: sp.csc_matrix, nd_threshold: int = ND_THRESHOLD):
        self.A = A
        n = A.shape[0]
        self.perm = None
        try:
            if pymetis is not None and n >= nd_threshold:
                pattern = (abs(A) + abs(A).T).tocsr()
                pattern.setdiag(0)
                pattern.eliminate_zeros()
                pattern.sort_indices()
                perm, _ = pymetis.nested_dissection(
                    adjacency=pymetis.CSRAdjacency(pattern.indptr, pattern.indices)
                )
                self.perm = np.asarray(perm)
                B = A[self.perm][:, self.perm].tocsc()
                self.lu = splu(
                    B, permc_spec="NATURAL", diag_pivot_thresh=0.01, options=dict(SymmetricMode=True)
                )
                self.ordering = "nested-dissection"
            else:
                self.lu = splu(A, permc_spec="COLAMD")
                self.ordering = "colamd"
        except RuntimeError as exc:
            raise SolverError(f"sparse factorisation failed: {exc}") from exc
        self.fill = int(self.lu.L.nnz + self.lu.U.nnz)

    def solve(self, b: np.ndarray, trans: str = "N") -> np.ndarray:
        if self.perm is None:
            return self.lu.solve(b, trans=trans)
        x = np.empty_like(b, dtype=complex)
        x[self.perm] = self.lu.solve(np.asarray(b, dtype=complex)[self.perm], trans=trans)
        return x

    def refined_solve(self, b: np.ndarray, steps: int = 1) -> np.ndarray:
        x = self.solve(b)
        for _ in range(steps):
            x = x + self.solve(b - self.A @ x)
        return x


def _population_rows(L: Superoperator) -> np.ndarray:
    """Indices of the diagonal elements of rho, largest |L_ii| first."""
    n = L.space.total_dim
    rows = np.arange(n) * (n + 1)
    d = np.abs(L.matrix.diagonal()[rows])
    return rows[np.argsort(-d, kind="stable")]


def _direct_solve(L: Superoperator, row: int):
    n2 = L.space.total_dim ** 2
    A = _replaced_system(L, row)
    f = _Factor(A)
    b = np.zeros(n2, dtype=complex)
    b[row] = 1.0
    x = f.refined_solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("sparse solve produced non-finite values (singular system)")
    return x, A, f


def _swapped_row_solve(L: Superoperator, f: _Factor, row: int, alt: int) -> np.ndarray:
    """Solution with the trace functional in row ``alt`` instead of ``row``.

    The two systems differ by a rank-2 row update, so the existing
    factorisation is reused through the Woodbury identity.
    """
    n = L.space.total_dim
    n2 = n * n
    t = _trace_row(n).toarray().ravel()
    Lr = L.matrix[row].toarray().ravel()
    La = L.matrix[alt].toarray().ravel()
    V = np.stack([Lr - t, t - La])  # rows of the update U V with U = [e_row, e_alt]
    U = np.zeros((n2, 2), dtype=complex)
    U[row, 0] = 1.0
    U[alt, 1] = 1.0
    AiU = np.column_stack([f.refined_solve(U[:, 0]), f.refined_solve(U[:, 1])])
    small = np.eye(2) + V @ AiU
    if not np.all(np.isfinite(small)) or abs(np.linalg.det(small)) < 1e-14 * np.abs(small).max() ** 2:
        raise SolverError(f"system with the trace functional in row {alt} is singular")
    y = AiU[:, 1]  # A^-1 e_alt
    return y - AiU @ np.linalg.solve(small, V @ y)


def _condition_estimate(A: sp.csc_matrix, f: _Factor) -> float:
    n = A.shape[0]
    inv = LinearOperator(
        (n, n),
        matvec=f.solve,
        rmatvec=lambda y: f.solve(np.asarray(y), trans="H"),
        dtype=complex,
    )
    try:
        return float(onenormest(A) * onenormest(inv))
    except Exception:  # onenormest can fail on tiny systems; diagnostic only
        return float("nan")


def dense_null_vector(L: Superoperator, gap_tol: float = 1e-8) -> tuple[np.ndarray, dict]:
    """Smallest right singular vector of the dense Liouvillian."""
    dense = L.matrix.toarray()
    _, s, vh = la.svd(dense)
    info = {"smallest_singular_values": s[-2:].tolist() if s.size > 1 else s.tolist()}
    if s.size > 1 and s[-2] <= gap_tol * s[0]:
        raise SolverError(
            f"degenerate null space: second smallest singular value {s[-2]:.3g} "
            f"vs largest {s[0]:.3g}"
        )
    return vh[-1].conj(), info


def steady_state(
    L: Superoperator,
    tol: float = 1e-9,
    method: str = "direct",
    check_degeneracy: bool = True,
    cross_check: bool = False,
    degeneracy_tol: float = 1e-6,
    condition_estimate: bool | None = None,
) -> SteadyStateReport:
    """Unit-trace null vector of ``L``.

    ``method="direct"`` replaces one population row of ``L`` (the one with the
    largest diagonal magnitude) by the trace functional and solves the sparse
    system by LU.  Trace preservation makes the population rows sum to zero,
    so replacing a coherence row would leave the system singular.  With
    ``check_degeneracy`` the system with the next population row replaced is
    solved as well; disagreement signals a degenerate null space.
    ``condition_estimate`` (default: only for ``total_dim**2 <= 20000``) adds a
    1-norm condition estimate to the diagnostics.  ``cross_check``
    additionally compares against the dense SVD null vector when the
    superoperator is small enough (``total_dim**2 <= 4096``).

    ``method="dense"`` uses the SVD route only.
    """
    n = L.space.total_dim
    n2 = n * n
    t0 = time.perf_counter()
    diagnostics: dict[str, Any] = {"total_dim": n}

    if condition_estimate is None:
        condition_estimate = n2 <= 20000

    if method == "dense":
        if n2 > DENSE_LIMIT:
            raise ValueError(f"dense null space limited to total_dim**2 <= {DENSE_LIMIT}, got {n2}")
        v, info = dense_null_vector(L)
        diagnostics.update(info)
        rho, res, rel = _finish(L, v)
        solver = "dense-nullspace"
    elif method == "direct":
        rows = _population_rows(L)
        row = int(rows[0])
        x, A, f = _direct_solve(L, row)
        diagnostics.update(
            replaced_row=row,
            nnz=int(A.nnz),
            fill=f.fill,
            ordering=f.ordering,
        )
        if condition_estimate:
            diagnostics["condition_estimate"] = _condition_estimate(A, f)
        rho, res, rel = _finish(L, x)
        if check_degeneracy and rows.size > 1:
            alt = int(rows[1])
            rho2, _, _ = _finish(L, _swapped_row_solve(L, f, row, alt))
            gap = trace_distance(rho, rho2)
            diagnostics["degeneracy_check"] = gap
            if not gap <= degeneracy_tol:
                raise SolverError(
                    f"degenerate null space: solutions with the trace functional in rows "
                    f"{row} and {alt} differ by trace distance {gap:.3g}"
                )
        if cross_check and n2 <= DENSE_LIMIT:
            v, info = dense_null_vector(L)
            rho_d, _, _ = _finish(L, v)
            diagnostics["dense_cross_check"] = trace_distance(rho, rho_d)
        solver = "direct-trace-replacement"
    else:
        raise ValueError(f"unknown steady-state method {method!r}")

    diagnostics["seconds"] = time.perf_counter() - t0
    if not rel <= tol:
        raise SolverError(
            f"steady-state residual {rel:.3g} (relative to ||L||) exceeds tolerance {tol:.3g}; "
            f"condition estimate {diagnostics.get('condition_estimate', float('nan')):.3g}"
        )
    state = DensityMatrix(L.space, rho, validate=False)
    return SteadyStateReport(state, res, rel, solver, diagnostics)


def evolve(
    L: Superoperator,
    rho0: DensityMatrix,
    t_final: float,
    rtol: float = 1e-8,
    atol: float = 1e-11,
    max_steps: int = 10_000_000,
) -> DensityMatrix:
    """Integrate ``d rho/dt = L rho`` to ``t_final`` with adaptive Dormand-Prince steps.

    The state is made exactly Hermitian after every accepted step.  Stiff
    problems (rate ratios far beyond ~1e4) should go through
    :func:`steady_state` instead.
    """
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    if rho0.space != L.space:
        raise SpaceMismatchError(f"{rho0.space.mode_labels} vs {L.space.mode_labels}")
    if t_final == 0:
        return rho0
    n = L.space.total_dim
    Lm = L.matrix

    def rhs(t, y):
        return Lm @ y

    solver = RK45(rhs, 0.0, vec(rho0.matrix).astype(complex), t_final, rtol=rtol, atol=atol)
    steps = 0
    while solver.status == "running":
        solver.step()
        if solver.status == "failed":
            raise StiffnessError(
                f"step size underflow at t={solver.t:.6g}; the Liouvillian is too stiff "
                "for explicit integration, use steady_state instead"
            )
        m = unvec(solver.y, n)
        y = vec(0.5 * (m + m.conj().T))
        solver.y = y
        solver.f = rhs(solver.t, y)
        steps += 1
        if steps > max_steps:
            raise StiffnessError(f"exceeded {max_steps} steps before t_final; use steady_state")
    out = unvec(solver.y, n).copy()
    return DensityMatrix(L.space, out, validate=False)


def expectation(rho: DensityMatrix, O: Operator) -> complex:
    """``tr(O rho)``."""
    if rho.space != O.space:
        raise SpaceMismatchError(f"{rho.space.mode_labels} vs {O.space.mode_labels}")
    return complex(np.sum(O.matrix.T.multiply(rho.matrix)))


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b`` (accepts density matrices or arrays)."""
    ma = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    mb = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    d = ma - mb
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())
