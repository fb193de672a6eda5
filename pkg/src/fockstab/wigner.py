"""Wigner quasi-probability distribution of a single oscillator mode.

Quadratures are ``q = (c + c^dag)/sqrt(2)`` and ``p = -i (c - c^dag)/sqrt(2)``;
``W`` is normalised over ``dq dp`` so that ``|W| <= 1/pi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .fock import DensityMatrix, partial_trace

__all__ = [
    "WignerGrid",
    "wigner_grid",
    "wigner_fock",
    "wigner_origin",
    "negativity_metrics",
    "symmetry_residual",
    "DEFAULT_HALF_WIDTH",
    "DEFAULT_POINTS",
    "MAX_FOCK_N",
]

DEFAULT_HALF_WIDTH = 5.0
DEFAULT_POINTS = 201
MAX_FOCK_N = 30
NORM_TOL = 1e-3


class GridError(ValueError):
    """The grid is unsuitable (off-centre, too coarse, or too small)."""


@dataclass(frozen=True, eq=False)
class WignerGrid:
    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # values[i, j] = W(q_axis[i], p_axis[j])
    cell_area: float

    def integrate(self, values: np.ndarray | None = None) -> float:
        """Trapezoid-rule integral of ``values`` (default: ``W``) over the grid."""
        v = self.values if values is None else values
        return float(np.trapezoid(np.trapezoid(v, self.p_axis, axis=1), self.q_axis))

    @property
    def normalization(self) -> float:
        return self.integrate()

    def value_at_origin(self) -> float:
        iq = int(np.argmin(np.abs(self.q_axis)))
        ip = int(np.argmin(np.abs(self.p_axis)))
        if self.q_axis[iq] != 0 or self.p_axis[ip] != 0:
            return float(
                RectBivariateSpline(self.q_axis, self.p_axis, self.values)(0.0, 0.0)[0, 0]
            )
        return float(self.values[iq, ip])


def _axis(rng, n):
    lo, hi = (-rng, rng) if np.isscalar(rng) else rng
    if not hi > lo or n < 2:
        raise GridError(f"bad axis range {rng} with {n} points")
    return np.linspace(lo, hi, int(n))


def _kernel_sum(rho: np.ndarray, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``sum_mn rho_mn W_mn(q, p)`` by upward recurrence of the Fock kernels.

    With ``A = (q + i p)/sqrt(2)`` the kernels obey
    ``W_0n = 2 A W_0,n-1 / sqrt(n)`` and
    ``W_mn = (2 A W_m,n-1 - sqrt(m) W_m-1,n-1) / sqrt(n)`` (``n >= m``),
    ``W_mm = (2 conj(A) W_m-1,m - sqrt(m) W_m-1,m-1) / sqrt(m)``, starting
    from ``W_00 = exp(-2|A|^2)/pi``.  No factorials appear.
    """
    M = rho.shape[0]
    Q, P = np.meshgrid(q, p, indexing="ij")
    A = (Q + 1j * P) / math.sqrt(2)
    # row[n] holds W_{m,n} for the current m; n >= m only
    row = [None] * M
    row[0] = np.exp(-2 * np.abs(A) ** 2).astype(complex) / math.pi
    W = rho[0, 0].real * row[0].real
    for n in range(1, M):
        row[n] = 2 * A * row[n - 1] / math.sqrt(n)
        W += 2 * np.real(rho[0, n] * row[n])
    for m in range(1, M):
        prev = row  # W_{m-1, n}
        row = [None] * M
        row[m] = (2 * np.conj(A) * prev[m] - math.sqrt(m) * prev[m - 1]) / math.sqrt(m)
        W += rho[m, m].real * row[m].real
        for n in range(m + 1, M):
            row[n] = (2 * A * row[n - 1] - math.sqrt(m) * prev[n - 1]) / math.sqrt(n)
            W += 2 * np.real(rho[m, n] * row[n])
    return W


def wigner_grid(
    rho_mech: DensityMatrix,
    q_range=DEFAULT_HALF_WIDTH,
    p_range=None,
    n_points: int = DEFAULT_POINTS,
    mode: str | None = None,
    check_normalization: bool = True,
) -> WignerGrid:
    """Wigner function of a single-mode state on a uniform grid.

    Parameters
    ----------
    rho_mech : DensityMatrix
        Single-mode state.  A multi-mode state is accepted only when ``mode``
        names the mode to keep; the others are traced out.
    q_range, p_range : float or (float, float)
        Half-width or explicit ``(lo, hi)``; ``p_range`` defaults to ``q_range``.
    n_points : int
        Points per axis.
    check_normalization : bool
        Raise :class:`GridError` when the grid integral deviates from 1 by
        more than ``1e-3`` (grid too coarse or too small).
    """
    if len(rho_mech.space.mode_dims) != 1:
        if mode is None:
            raise ValueError(
                f"wigner_grid needs a single-mode state, got modes {rho_mech.space.mode_labels}"
            )
        rho_mech = partial_trace(rho_mech, [mode])
    q = _axis(q_range, n_points)
    p = _axis(q_range if p_range is None else p_range, n_points)
    W = _kernel_sum(np.asarray(rho_mech.matrix), q, p)
    grid = WignerGrid(q, p, W, float((q[1] - q[0]) * (p[1] - p[0])))
    if check_normalization and abs(grid.normalization - 1) > NORM_TOL:
        raise GridError(
            f"grid integral of W is {grid.normalization:.6g}; widen or refine the grid"
        )
    return grid


def _laguerre(n: int, x):
    """``L_n(x)`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    prev, cur = np.zeros_like(x), np.ones_like(x)
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur


def wigner_fock(n: int, q, p):
    """Wigner function of the Fock state ``|n>``: ``(-1)^n/pi L_n(2 r^2) exp(-r^2)``."""
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    if n > MAX_FOCK_N:
        raise ValueError(f"n = {n} exceeds the supported range n <= {MAX_FOCK_N}")
    r2 = np.asarray(q, dtype=float) ** 2 + np.asarray(p, dtype=float) ** 2
    out = (-1) ** int(n) / math.pi * _laguerre(int(n), 2 * r2) * np.exp(-r2)
    return float(out) if out.ndim == 0 else out


def wigner_origin(rho_mech: DensityMatrix) -> float:
    """``W(0, 0) = sum_n (-1)^n P_n / pi``; off-diagonal kernels vanish at the origin."""
    if len(rho_mech.space.mode_dims) != 1:
        raise ValueError("wigner_origin needs a single-mode state")
    P = rho_mech.diagonal()
    return float(np.sum(P * (-1.0) ** np.arange(P.size)) / math.pi)


def negativity_metrics(w: WignerGrid) -> dict:
    i, j = np.unravel_index(int(np.argmin(w.values)), w.values.shape)
    return {
        "min_value": float(w.values[i, j]),
        "min_location": (float(w.q_axis[i]), float(w.p_axis[j])),
        "negative_volume": w.integrate(np.clip(-w.values, 0, None)),
    }


def symmetry_residual(w: WignerGrid, n_radii: int = 40, n_angles: int = 64, r_max: float | None = None) -> float:
    """Largest angular spread of ``W`` on circles about the origin.

    ``W`` is interpolated with a bicubic spline on ``n_radii`` circles up to
    ``r_max`` (default: 80% of the grid half-width), ``n_angles`` points each.
    """
    q, p = w.q_axis, w.p_axis
    tol = 1e-9 * (q[-1] - q[0])
    if abs(q[0] + q[-1]) > tol or abs(p[0] + p[-1]) > tol:
        raise GridError("symmetry_residual needs a grid centred on the origin")
    half = min(q[-1], p[-1])
    r_max = 0.8 * half if r_max is None else r_max
    spline = RectBivariateSpline(q, p, w.values, kx=3, ky=3)
    theta = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    spread = 0.0
    for r in np.linspace(0, r_max, n_radii)[1:]:
        vals = spline.ev(r * np.cos(theta), r * np.sin(theta))
        spread = max(spread, float(vals.max() - vals.min()))
    return spread
