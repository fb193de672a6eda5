"""Model tiers for single-phonon Fock-state stabilization.

Three Liouvillians are provided:

* the generic model on modes ``a`` (auxiliary system) and ``c`` (oscillator),
  with coherent two-for-one exchange ``g (a^dag c^2 + c^dag^2 a)`` and the
  dissipators ``Gamma D[c^dag a] + kappa D[a] + gamma_down D[c] + gamma_up D[c^dag]``;
* the reduced optomechanical model on ``a+`` and ``c`` obtained after the
  strongly damped modes ``a-`` and ``a3`` are eliminated;
* the full four-mode optomechanical model on ``a+, a-, a3, c`` in the rotating,
  displaced frame.

All rates share one unit; the bundled presets use the decay rate of ``a+``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import fock
from .fock import DensityMatrix, HilbertSpace, Operator, annihilation, make_space
from .liouville import (
    Superoperator,
    cross_dissipator_superop,
    dissipator_superop,
    hamiltonian_superop,
)

GENERIC_LABELS = ("a", "c")
REDUCED_LABELS = ("a+", "c")
FULL_LABELS = ("a+", "a-", "a3", "c")
DEFAULT_GENERIC_DIMS = (3, 8)
DEFAULT_REDUCED_DIMS = (3, 7)
DEFAULT_FULL_DIMS = (3, 3, 2, 7)


class ParameterError(ValueError):
    """Parameters violate a precondition of a derivation or model builder."""


# --------------------------------------------------------------------------
# Generic model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GenericParams:
    g_tilde: float
    Gamma: float
    kappa: float
    gamma_down: float
    gamma_up: float
    dims: tuple[int, int] = DEFAULT_GENERIC_DIMS

    def __post_init__(self):
        for f in ("g_tilde", "Gamma", "kappa", "gamma_down", "gamma_up"):
            v = getattr(self, f)
            if not math.isfinite(v):
                raise ParameterError(f"{f} must be finite, got {v}")
        for f in ("Gamma", "kappa", "gamma_down", "gamma_up"):
            if getattr(self, f) < 0:
                raise ParameterError(f"{f} must be nonnegative")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def regime_ratios(self) -> dict[str, float]:
        """The three ratios that must be small for n=1 stabilization."""
        def ratio(x, y):
            return x / y if y > 0 else (0.0 if x == 0 else math.inf)

        cool = min(4 * self.g_tilde**2 / self.Gamma, self.Gamma) if self.Gamma > 0 else 0.0
        return {
            "kappa/Gamma": ratio(self.kappa, self.Gamma),
            "gamma_down/gamma_up": ratio(self.gamma_down, self.gamma_up),
            "gamma_up/min(4g^2/Gamma,Gamma)": ratio(self.gamma_up, cool),
        }

    def regime_flags(self, threshold: float = 0.2) -> dict[str, bool]:
        """True where a ratio is at or above ``threshold`` (regime violated)."""
        return {k: v >= threshold for k, v in self.regime_ratios().items()}


def build_generic(p: GenericParams) -> Superoperator:
    dims = p.dims
    if len(dims) != 2 or dims[0] < 2 or dims[1] < 4:
        raise ParameterError(f"generic model needs dims >= [2, 4] to hold c^2 transitions, got {dims}")
    space = make_space(dims, GENERIC_LABELS)
    a = annihilation(space, "a")
    c = annihilation(space, "c")
    H = p.g_tilde * (a.dag @ c @ c + c.dag @ c.dag @ a)
    return (
        hamiltonian_superop(H)
        + dissipator_superop(c.dag @ a, p.Gamma)
        + dissipator_superop(a, p.kappa)
        + dissipator_superop(c, p.gamma_down)
        + dissipator_superop(c.dag, p.gamma_up)
    )


@dataclass(frozen=True)
class AnalyticSolution:
    """Lowest-order steady state of the generic model on the ansatz pattern.

    ``rho_kk_n`` is the weight of ``|k><k| x |n><n|``; ``rho_10_n`` is the
    coefficient of ``|1><0| x |n><n+2|`` (its conjugate sits on the mirrored
    element).
    """

    rho_00_0: float
    rho_00_1: float
    rho_00_2: float
    rho_00_3: float
    rho_11_0: float
    rho_11_1: float
    rho_10_0: complex
    rho_10_1: complex
    P: tuple[float, float, float, float]

    def coefficients(self) -> dict[str, complex]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "P"}

    def element_index(self) -> dict[str, tuple[tuple[int, int], tuple[int, int]]]:
        """(a, c) occupations of the bra and ket for each coefficient."""
        return {
            "rho_00_0": ((0, 0), (0, 0)),
            "rho_00_1": ((0, 1), (0, 1)),
            "rho_00_2": ((0, 2), (0, 2)),
            "rho_00_3": ((0, 3), (0, 3)),
            "rho_11_0": ((1, 0), (1, 0)),
            "rho_11_1": ((1, 1), (1, 1)),
            "rho_10_0": ((1, 0), (0, 2)),
            "rho_10_1": ((1, 1), (0, 3)),
        }

    def density_matrix(self, space: HilbertSpace | None = None) -> DensityMatrix:
        """Embed the ansatz in ``space`` (default: generic labels, dims [2, 4])."""
        if space is None:
            space = make_space((2, 4), GENERIC_LABELS)
        if space.mode_dims[0] < 2 or space.mode_dims[1] < 4:
            raise ParameterError("ansatz needs at least dims [2, 4]")
        m = np.zeros((space.total_dim,) * 2, dtype=complex)
        for name, (bra, ket) in self.element_index().items():
            i, j = space.basis_index(bra), space.basis_index(ket)
            m[i, j] = getattr(self, name)
            if i != j:
                m[j, i] = np.conj(getattr(self, name))
        return DensityMatrix(space, m, validate=False)


def analytic_generic_steady(p: GenericParams, corrected: bool = False) -> AnalyticSolution:
    """Closed-form steady state to lowest order in the small regime ratios.

    Parameters
    ----------
    p : GenericParams
    corrected : bool
        The reference form gives ``rho_10_1`` the prefactor ``-6 i g/Gamma``.
        The coupling matrix element ``<1,1| a^dag c^2 |0,3> = sqrt(6)`` makes
        it ``-sqrt(6) i g/Gamma``, which is what the numerical steady state
        shows.  ``corrected=True`` uses ``sqrt(6)``; the default keeps 6.
    """
    if p.Gamma == 0 or p.g_tilde == 0:
        raise ParameterError("analytic solution divides by Gamma and g_tilde; both must be nonzero")
    if p.gamma_up <= 0:
        raise ParameterError("analytic solution requires gamma_up > 0")
    g, G = p.g_tilde, p.Gamma
    gu, gd, k = p.gamma_up, p.gamma_down, p.kappa
    x = g / G
    s = gu * G / (4 * g**2)

    r0 = gd / gu + 2 * k / G
    r2 = s + 2 * gu / G
    r3 = s**2 * (1 + 6 * x**2 + 64 * x**4)
    r11_0 = 2 * gu / G
    r11_1_over_2 = gu / G * (1.5 + 4 * x**2 / (1 + 8 * x**2))
    r10_0_over_2 = -2 * math.sqrt(2) * 1j * x / (1 + 8 * x**2)
    pref = math.sqrt(6) if corrected else 6.0
    r10_1_over_2 = (-pref * 1j * x / (1 + 6 * x**2)) * (
        r3 / r2 + 2 * gu * (1 - 2 * x**2) / (G * (1 + 8 * x**2))
    )

    rho_001 = 1.0 / (1 + r0 + r2 + r3 + r11_0 + r11_1_over_2 * r2)
    rho_002 = r2 * rho_001
    sol = dict(
        rho_00_0=r0 * rho_001,
        rho_00_1=rho_001,
        rho_00_2=rho_002,
        rho_00_3=r3 * rho_001,
        rho_11_0=r11_0 * rho_001,
        rho_11_1=r11_1_over_2 * rho_002,
        rho_10_0=r10_0_over_2 * rho_002,
        rho_10_1=r10_1_over_2 * rho_002,
    )
    P = (
        sol["rho_00_0"] + sol["rho_11_0"],
        sol["rho_00_1"] + sol["rho_11_1"],
        sol["rho_00_2"],
        sol["rho_00_3"],
    )
    return AnalyticSolution(P=P, **sol)


def population_ratios(p: GenericParams) -> tuple[float, float]:
    """Approximate ``(P0/P1, P2/P1)`` of the generic steady state."""
    return (
        p.gamma_down / p.gamma_up + 2 * p.kappa / p.Gamma,
        p.gamma_up * p.Gamma / (4 * p.g_tilde**2) + 2 * p.gamma_up / p.Gamma,
    )


# --------------------------------------------------------------------------
# Optomechanical parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RawOptomechParams:
    """Physical parameters of the two hybridized cavities, auxiliary cavity and mechanics.

    ``kappa_minus_ext`` is extra decay of the ``a-`` normal mode through an
    external waveguide.  ``Omega_down`` drives ``a-``, ``Omega_up`` drives ``a3``.
    """

    omega1: float
    omega2: float
    J: float
    g1: float
    g2: float
    kappa1: float
    kappa2: float
    kappa_minus_ext: float
    g3: float
    kappa3: float
    omega_m: float
    gamma: float
    n_th: float
    Omega_down: float
    Omega_up: float

    @property
    def delta(self) -> float:
        return self.omega2 - self.omega1

    def supports_zero_gmm(self) -> bool:
        return self.g1 * self.g2 < 0 and abs(self.g1) != abs(self.g2) and self.omega1 != self.omega2


@dataclass(frozen=True)
class EffectiveParams:
    """Derived rates.  Fields stay ``None`` until the corresponding step ran."""

    r: float | None = None
    omega_plus: float | None = None
    omega_minus: float | None = None
    g_pp: float | None = None
    g_mm: float | None = None
    g_pm: float | None = None
    kappa_plus: float | None = None
    kappa_minus: float | None = None
    kappa_pm: float | None = None
    abar_minus: complex | None = None
    abar_3: complex | None = None
    G_down: float | None = None
    G_up: float | None = None
    G_down_phase: float | None = None
    G_up_phase: float | None = None
    Delta_plus: float | None = None
    omega_m_bar: float | None = None
    gamma_down_bar: float | None = None
    gamma_up_bar: float | None = None
    Gamma: float | None = None
    Gamma_down: float | None = None
    Lambda: float | None = None
    omega_m_tilde: float | None = None
    Delta_plus_tilde: float | None = None
    g_tilde: float | None = None
    gamma_down_th: float | None = None
    gamma_up_th: float | None = None

    def require(self, *names: str):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ParameterError(f"effective parameters missing: {', '.join(missing)}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def mixing_ratio(J: float, delta: float) -> float:
    """Mixing ratio ``r`` of the normal modes for tunnelling ``J`` and detuning ``delta``."""
    if delta == 0:
        raise ParameterError("degenerate cavities (delta = 0) leave the sign of r undefined")
    x = 2 * J / delta
    if delta > 0:
        return x / (1 + math.sqrt(1 + x * x))
    # same expression, rewritten to avoid cancellation in 1 - sqrt(1 + x^2)
    if x == 0:
        raise ParameterError("J = 0 with omega1 > omega2 gives an unbounded mixing ratio")
    return -(1 + math.sqrt(1 + x * x)) / x


def hybridize(r: float, g1: float, g2: float, kappa1: float, kappa2: float):
    """Couplings and decay rates of the normal modes for mixing ratio ``r``."""
    n = 1 + r * r
    return dict(
        g_pp=(r * r * g1 + g2) / n,
        g_mm=(g1 + r * r * g2) / n,
        g_pm=r * (g1 - g2) / n,
        kappa_plus=(r * r * kappa1 + kappa2) / n,
        kappa_minus=(kappa1 + r * r * kappa2) / n,
        kappa_pm=r * (kappa1 - kappa2) / n,
    )


def derive_effective_modes(p: RawOptomechParams) -> EffectiveParams:
    """Normal modes of the tunnel-coupled cavities and their couplings and rates."""
    if p.delta == 0:
        raise ParameterError(
            "omega1 == omega2: the mixing ratio is undefined for degenerate cavities"
        )
    r = mixing_ratio(p.J, p.delta)
    root = math.sqrt(p.delta**2 + 4 * p.J**2)
    h = hybridize(r, p.g1, p.g2, p.kappa1, p.kappa2)
    h["kappa_minus"] += p.kappa_minus_ext
    return EffectiveParams(
        r=r,
        omega_plus=(p.omega1 + p.omega2 + root) / 2,
        omega_minus=(p.omega1 + p.omega2 - root) / 2,
        **h,
    )


def reconstruct_cavities(r: float, omega_plus: float, omega_minus: float) -> tuple[float, float, float]:
    """Invert the normal-mode transform: ``(omega1, omega2, J)`` from ``r`` and ``omega_pm``."""
    n = 1 + r * r
    return (
        (r * r * omega_plus + omega_minus) / n,
        (omega_plus + r * r * omega_minus) / n,
        r * (omega_plus - omega_minus) / n,
    )


def choose_r_for_zero_gmm(g1: float, g2: float) -> float:
    """``|r|`` that cancels the intramode coupling of ``a-``."""
    if not g1 * g2 < 0:
        raise ParameterError("g_mm = 0 requires g1 and g2 of opposite sign")
    if abs(g1) == abs(g2):
        raise ParameterError("|g1| == |g2| forces |r| = 1 and g_pp = 0")
    return math.sqrt(abs(g1 / g2))


def cavities_for_r(r: float, splitting: float, omega_mean: float = 0.0) -> tuple[float, float, float]:
    """Cavity frequencies and tunnelling realising mixing ratio ``r``.

    ``splitting`` is the normal-mode splitting ``omega_+ - omega_-``.  Returns
    ``(omega1, omega2, J)``.
    """
    if abs(r) == 1:
        raise ParameterError("|r| = 1 requires degenerate cavities")
    if splitting <= 0:
        raise ParameterError("splitting must be positive")
    x = 2 * r / (1 - r * r)
    delta = math.copysign(splitting / math.sqrt(1 + x * x), 1 - r * r)
    J = x * delta / 2
    return omega_mean - delta / 2, omega_mean + delta / 2, J


def derive_drive_params(p: RawOptomechParams, eff: EffectiveParams) -> EffectiveParams:
    """Mean amplitudes of the driven modes and the resulting enhanced couplings.

    The couplings are stored as magnitudes; their phases go to
    ``G_down_phase`` and ``G_up_phase`` and are not used further.
    """
    eff.require("g_pm", "kappa_minus")
    if eff.kappa_minus <= 0 or p.kappa3 <= 0:
        raise ParameterError("driven modes need kappa_minus > 0 and kappa3 > 0")
    abar_minus = p.Omega_down / complex(eff.kappa_minus / 2, p.omega_m)
    abar_3 = p.Omega_up / complex(p.kappa3 / 2, -p.omega_m)
    Gd = eff.g_pm * abar_minus
    Gu = p.g3 * abar_3
    return replace(
        eff,
        abar_minus=abar_minus,
        abar_3=abar_3,
        G_down=abs(Gd),
        G_up=abs(Gu),
        G_down_phase=float(np.angle(Gd)),
        G_up_phase=float(np.angle(Gu)),
    )


def drive_amplitudes_for(
    G_down: float, G_up: float, g_pm: float, g3: float, kappa_minus: float, kappa3: float, omega_m: float
) -> tuple[float, float]:
    """Real drive amplitudes ``(Omega_down, Omega_up)`` giving coupling magnitudes ``G_down, G_up``."""
    if G_down and not g_pm:
        raise ParameterError("G_down > 0 needs g_pm != 0")
    if G_up and not g3:
        raise ParameterError("G_up > 0 needs g3 != 0")
    Od = G_down / abs(g_pm) * abs(complex(kappa_minus / 2, omega_m)) if G_down else 0.0
    Ou = G_up / abs(g3) * abs(complex(kappa3 / 2, -omega_m)) if G_up else 0.0
    return Od, Ou


def ideal_detuning(omega_m: float, G_down: float, G_up: float) -> float:
    """Drive detuning of ``a+`` that puts the two-phonon exchange on resonance."""
    if omega_m <= 0:
        raise ParameterError("omega_m must be positive")
    return -2 * omega_m * (1 - 5 / 3 * (G_down / omega_m) ** 2 + 0.5 * (G_up / omega_m) ** 2)


def complete_effective(
    p: RawOptomechParams, eff: EffectiveParams, Delta_plus: float | None = None
) -> EffectiveParams:
    """Fill detuning, renormalised mechanics and the two-mode rates."""
    eff.require("g_pp", "g_pm", "kappa_minus", "G_down", "G_up")
    wm, Gd, Gu = p.omega_m, eff.G_down, eff.G_up
    if wm <= 0 or p.kappa3 <= 0:
        raise ParameterError("need omega_m > 0 and kappa3 > 0")
    D = ideal_detuning(wm, Gd, Gu) if Delta_plus is None else Delta_plus
    g_dn_th = p.gamma * (p.n_th + 1)
    g_up_th = p.gamma * p.n_th
    wbar = wm + Gu**2 / (2 * wm)
    denom = D**2 - wbar**2
    if denom == 0 or D + wbar == 0:
        raise ParameterError("resonant denominator: Delta_plus = +/- omega_m_bar")
    return replace(
        eff,
        Delta_plus=D,
        gamma_down_th=g_dn_th,
        gamma_up_th=g_up_th,
        omega_m_bar=wbar,
        gamma_down_bar=g_dn_th + (Gu / (2 * wm)) ** 2 * p.kappa3,
        gamma_up_bar=g_up_th + 4 * Gu**2 / p.kappa3,
        Gamma=4 * eff.g_pm**2 / eff.kappa_minus,
        Gamma_down=(eff.g_pm / (2 * wm)) ** 2 * eff.kappa_minus,
        Lambda=eff.g_pm**2 / (2 * wm),
        omega_m_tilde=wbar + 2 * Gd**2 * D / denom,
        Delta_plus_tilde=D - 2 * Gd**2 * wbar / denom,
        g_tilde=eff.g_pp * Gd / (D + wbar),
    )


def effective_params(p: RawOptomechParams, Delta_plus: float | None = None) -> EffectiveParams:
    """Run every derivation step on ``p``."""
    eff = derive_effective_modes(p)
    eff = derive_drive_params(p, eff)
    return complete_effective(p, eff, Delta_plus)


def map_to_generic(eff: EffectiveParams, p: RawOptomechParams, dims=DEFAULT_GENERIC_DIMS) -> GenericParams:
    """Generic-model rates implied by the optomechanical parameters."""
    eff.require("g_pp", "g_pm", "kappa_plus", "kappa_minus", "G_down", "G_up")
    wm, k3 = p.omega_m, p.kappa3
    if wm <= 0 or eff.kappa_minus <= 0 or k3 <= 0:
        raise ParameterError("need omega_m, kappa_minus, kappa3 > 0")
    Gd, Gu, kp = eff.G_down, eff.G_up, eff.kappa_plus
    return GenericParams(
        g_tilde=-eff.g_pp * Gd / wm,
        Gamma=4 * eff.g_pm**2 / eff.kappa_minus,
        kappa=kp,
        gamma_down=p.gamma * (p.n_th + 1) + Gu**2 * k3 / (2 * wm) ** 2 + Gd**2 * kp / wm**2,
        gamma_up=p.gamma * p.n_th + 4 * Gu**2 / k3 + Gd**2 * kp / (3 * wm) ** 2,
        dims=dims,
    )


def raw_from_effective(
    g_pp: float,
    g_pm: float,
    g3: float,
    omega_m: float,
    kappa_minus: float,
    kappa3: float,
    G_down: float,
    G_up: float,
    gamma: float,
    n_th: float,
    kappa_plus: float = 1.0,
    kappa1: float | None = None,
    omega_mean: float = 0.0,
) -> RawOptomechParams:
    """Physical parameters reproducing given normal-mode couplings with ``g_mm = 0``.

    The cavity splitting is set to ``omega_m``.  ``kappa1`` defaults to
    ``kappa_plus`` (equal intrinsic cavity losses, no cross dissipation); the
    remainder of ``kappa_minus`` is attributed to the external waveguide.
    """
    if g_pm == 0:
        raise ParameterError("g_pm must be nonzero")
    ratio = g_pp / g_pm
    roots = ((ratio + math.sqrt(ratio**2 + 4)) / 2, (ratio - math.sqrt(ratio**2 + 4)) / 2)
    r = min(roots, key=abs)
    g2 = -g_pm / r
    g1 = -r * r * g2
    if kappa1 is None:
        kappa1 = kappa_plus
    kappa2 = kappa1 if kappa1 == kappa_plus else kappa_plus * (1 + r * r) - r * r * kappa1
    if kappa2 < 0:
        raise ParameterError(f"kappa1 = {kappa1} leaves a negative kappa2 for kappa_plus = {kappa_plus}")
    intrinsic_minus = (kappa1 + r * r * kappa2) / (1 + r * r)
    ext = kappa_minus - intrinsic_minus
    if ext < 0:
        raise ParameterError("kappa_minus below its intrinsic part")
    omega1, omega2, J = cavities_for_r(r, omega_m, omega_mean)
    Od, Ou = drive_amplitudes_for(G_down, G_up, g_pm, g3, kappa_minus, kappa3, omega_m)
    return RawOptomechParams(
        omega1=omega1, omega2=omega2, J=J, g1=g1, g2=g2,
        kappa1=kappa1, kappa2=kappa2, kappa_minus_ext=ext,
        g3=g3, kappa3=kappa3, omega_m=omega_m, gamma=gamma, n_th=n_th,
        Omega_down=Od, Omega_up=Ou,
    )


# --------------------------------------------------------------------------
# Optomechanical Liouvillians
# --------------------------------------------------------------------------


def build_full(
    p: RawOptomechParams,
    eff: EffectiveParams,
    include_cross_kappa: bool = False,
    dims: Sequence[int] = DEFAULT_FULL_DIMS,
) -> Superoperator:
    """Four-mode Liouvillian in the rotating, displaced frame.

    Mode order is ``a+, a-, a3, c``.  The static force ``g3 |abar_3|^2 (c + c^dag)``
    is left out; it only shifts the mechanical equilibrium.
    """
    eff.require("Delta_plus", "G_down", "G_up", "g_pp", "g_pm", "kappa_plus", "kappa_minus")
    if include_cross_kappa:
        eff.require("kappa_pm")
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4 or min(dims[:3]) < 2 or dims[3] < 5:
        raise ParameterError(f"full model needs optical dims >= 2 and mechanical dim >= 5, got {dims}")
    if eff.g_mm is not None and abs(eff.g_mm) > 1e-9 * max(abs(eff.g_pp), abs(eff.g_pm)):
        warnings.warn(f"g_mm = {eff.g_mm:.3g} is not included in the full model", stacklevel=2)
    space = make_space(dims, FULL_LABELS)
    ap, am, a3, c = (annihilation(space, l) for l in FULL_LABELS)
    n_p, n_m, n_3, n_c = (fock.number(space, l) for l in FULL_LABELS)
    x = c + c.dag
    H = (
        -eff.Delta_plus * n_p
        + p.omega_m * (n_c + n_m - n_3)
        + x @ (
            eff.G_down * (ap + ap.dag)
            + eff.G_up * (a3 + a3.dag)
            + eff.g_pp * n_p
            + eff.g_pm * (ap.dag @ am + am.dag @ ap)
            + p.g3 * n_3
        )
    )
    L = (
        hamiltonian_superop(H)
        + dissipator_superop(ap, eff.kappa_plus)
        + dissipator_superop(am, eff.kappa_minus)
        + dissipator_superop(a3, p.kappa3)
        + dissipator_superop(c, p.gamma * (p.n_th + 1))
        + dissipator_superop(c.dag, p.gamma * p.n_th)
    )
    if include_cross_kappa and eff.kappa_pm:
        L = L + cross_dissipator_superop(am, ap, eff.kappa_pm)
    return L


def build_reduced(
    eff: EffectiveParams,
    include_Gamma_down: bool = False,
    include_Lambda: bool = False,
    dims: Sequence[int] = DEFAULT_REDUCED_DIMS,
) -> Superoperator:
    """Two-mode Liouvillian for ``a+`` and ``c`` after eliminating ``a-`` and ``a3``.

    The flags restore the two-phonon-photon loss ``Gamma_down D[c a+]`` and the
    cross-Kerr shift ``Lambda c^dag c a+^dag a+`` that the default model drops.
    """
    eff.require(
        "Delta_plus", "omega_m_bar", "G_down", "g_pp", "kappa_plus",
        "gamma_down_bar", "gamma_up_bar", "Gamma",
    )
    if include_Gamma_down:
        eff.require("Gamma_down")
    if include_Lambda:
        eff.require("Lambda")
    dims = tuple(int(d) for d in dims)
    if len(dims) != 2 or dims[0] < 2 or dims[1] < 4:
        raise ParameterError(f"reduced model needs dims >= [2, 4], got {dims}")
    space = make_space(dims, REDUCED_LABELS)
    a = annihilation(space, "a+")
    c = annihilation(space, "c")
    na, nc = a.dag @ a, c.dag @ c
    x = c + c.dag
    H = -eff.Delta_plus * na + eff.omega_m_bar * nc + eff.G_down * x @ (a + a.dag) + eff.g_pp * x @ na
    if include_Lambda:
        H = H + eff.Lambda * (nc @ na)
    L = (
        hamiltonian_superop(H)
        + dissipator_superop(a, eff.kappa_plus)
        + dissipator_superop(c, eff.gamma_down_bar)
        + dissipator_superop(c.dag, eff.gamma_up_bar)
        + dissipator_superop(c.dag @ a, eff.Gamma)
    )
    if include_Gamma_down:
        L = L + dissipator_superop(c @ a, eff.Gamma_down)
    return L


# --------------------------------------------------------------------------
# Normal-mode back transformation
# --------------------------------------------------------------------------


def normal_mode_coefficients(eff: EffectiveParams) -> dict[str, float]:
    eff.require("G_down", "Delta_plus", "omega_m_bar")
    G, D, w = eff.G_down, eff.Delta_plus, eff.omega_m_bar
    denom = D**2 - w**2
    if denom == 0 or D == 0:
        raise ParameterError("resonant denominator in the normal-mode generator")
    return {
        "beam_splitter": G / (D + w),
        "two_mode_squeeze": G / (D - w),
        "photon_squeeze": G**2 * w / (2 * D * denom),
        "phonon_squeeze": -(G**2) * D / (2 * w * denom),
    }


def normal_mode_generator(eff: EffectiveParams, space: HilbertSpace, photon: str | None = None, phonon: str = "c") -> Operator:
    """Anti-Hermitian generator ``eta`` of the photon-phonon normal-mode rotation.

    ``photon`` defaults to the first mode of ``space`` that is not ``phonon``.
    """
    if photon is None:
        photon = next(l for l in space.mode_labels if l != phonon)
    k = normal_mode_coefficients(eff)
    a = annihilation(space, photon)
    c = annihilation(space, phonon)
    return (
        k["beam_splitter"] * (a.dag @ c - c.dag @ a)
        + k["two_mode_squeeze"] * (a.dag @ c.dag - c @ a)
        + k["photon_squeeze"] * (a.dag @ a.dag - a @ a)
        + k["phonon_squeeze"] * (c.dag @ c.dag - c @ c)
    )


def generator_norm(eta: Operator, max_occupation: int = 2) -> float:
    """Spectral norm of ``eta`` on basis states with every occupation <= ``max_occupation``.

    The full truncated-space norm grows like the square root of the cutoff
    even when the states of interest only occupy the lowest levels.
    """
    grids = np.meshgrid(*[np.arange(min(d, max_occupation + 1)) for d in eta.space.mode_dims], indexing="ij")
    idx = np.ravel_multi_index(tuple(g.ravel() for g in grids), eta.space.mode_dims)
    block = eta.matrix[idx][:, idx].toarray()
    return float(np.linalg.norm(block, 2))


def back_transform(rho: DensityMatrix, eta: Operator, warn_norm: float = 0.3) -> DensityMatrix:
    """Second-order image ``rho - [eta, rho] + [eta, [eta, rho]]/2``.

    Warns when :func:`generator_norm` exceeds ``warn_norm``.
    """
    if rho.space != eta.space:
        raise fock.SpaceMismatchError(f"{rho.space.mode_labels} vs {eta.space.mode_labels}")
    norm = generator_norm(eta)
    if norm > warn_norm:
        warnings.warn(f"generator norm {norm:.3g} exceeds {warn_norm}; second-order expansion unreliable", stacklevel=2)
    e = eta.matrix
    r = rho.matrix
    c1 = e @ r - (e.T @ r.T).T
    c2 = e @ c1 - (e.T @ c1.T).T
    chi = r - c1 + 0.5 * c2
    return DensityMatrix(rho.space, np.asarray(chi), validate=False)


def chi_approx_diag(
    sol: AnalyticSolution, eff: EffectiveParams, corrected: bool = False
) -> dict[tuple[int, int], float]:
    """Closed-form diagonal corrections from the back transform.

    Keys are ``(photon, phonon)`` occupations.  Only corrections proportional
    to ``rho_00_1`` are kept; other diagonal elements equal the generic-model
    ones.

    The reference expressions weight the two-mode-squeezing transfer
    ``|0,1> -> |1,2>`` by ``(G/(Delta - omega))^2``.  Expanding the double
    commutator gives ``2 (G/(Delta - omega))^2`` because
    ``<1,2| a^dag c^dag |0,1> = sqrt(2)``.  ``corrected=True`` uses the factor 2.
    """
    k = normal_mode_coefficients(eff)
    bs2 = k["beam_splitter"] ** 2
    tms2 = k["two_mode_squeeze"] ** 2 * (2 if corrected else 1)
    return {
        (0, 1): sol.rho_00_1 * (1 - bs2 - tms2),
        (1, 0): sol.rho_11_0 + sol.rho_00_1 * bs2,
        (1, 2): sol.rho_00_1 * tms2,
    }


def analytic_phonon_populations(
    sol: AnalyticSolution, eff: EffectiveParams, corrected: bool = False
) -> list[float]:
    """Phonon occupations ``P_0..P_3`` after the closed-form back transform."""
    d = chi_approx_diag(sol, eff, corrected)
    return [
        sol.rho_00_0 + d[(1, 0)],
        d[(0, 1)] + sol.rho_11_1,
        sol.rho_00_2 + d[(1, 2)],
        sol.rho_00_3,
    ]


def phonon_populations(chi: DensityMatrix, mode: str = "c") -> np.ndarray:
    """Diagonal of the reduced state of ``mode``."""
    if mode not in chi.space.mode_labels:
        raise KeyError(f"state has no mode {mode!r}")
    return fock.partial_trace(chi, [mode]).diagonal()
