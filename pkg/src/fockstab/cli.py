"""Command-line scenario runner.

``fockstab simulate`` solves one configured model and writes CSV artifacts;
``fockstab sweep`` repeats the solve along one parameter axis.

Config files use ``[section]`` headers with ``key = value`` lines::

    [model]
    type = full            # generic | reduced | full
    cross_kappa = false    # full model: add kappa_+- cross dissipation
    [parameters]
    g_pp = 10
    ...
    [dims]
    a+ = 3
    [wigner]
    enabled = true
    range = 5
    points = 201
    [solver]
    tol = 1e-9
    method = direct
    [output]
    dir = out

Exit codes: 0 success, 1 config error, 2 solver failure, 3 convergence
warning with ``--strict``.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import os
import re
import sys
import tempfile
import time
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import models
from .fock import DensityMatrix, number, partial_trace
from .liouville import SolverError, steady_state
from .models import ParameterError
from .wigner import (
    DEFAULT_HALF_WIDTH,
    DEFAULT_POINTS,
    GridError,
    negativity_metrics,
    symmetry_residual,
    wigner_grid,
    wigner_origin,
)

log = logging.getLogger("fockstab")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CONVERGENCE = 0, 1, 2, 3
PRESETS = ("fig3ab", "fig3cd")
REGIME_WARN = 0.2
CONVERGENCE_TOL = 1e-3
# Largest full-model Hilbert dimension tried by the convergence study; the
# sparse LU of a 180-level model peaks near 4.6 GB.
FULL_MAX_TOTAL_DIM = 180

GENERIC_KEYS = ("g_tilde", "Gamma", "kappa", "gamma_down", "gamma_up")
CAPTION_REQUIRED = (
    "g_pp", "g_pm", "g3", "omega_m", "kappa_minus", "kappa3",
    "G_down", "G_up", "gamma", "n_th",
)
CAPTION_OPTIONAL = ("kappa_plus", "kappa1")
RAW_KEYS = tuple(f.name for f in fields(models.RawOptomechParams))
OPTOMECH_OPTIONAL = ("Delta_plus",)
NONNEGATIVE = {
    "Gamma", "kappa", "gamma_down", "gamma_up", "kappa_minus", "kappa3", "kappa_plus", "kappa1",
    "kappa2", "kappa_minus_ext", "G_down", "G_up", "gamma", "n_th",
}
POSITIVE = {"omega_m"}

SECTIONS = {
    "model": {"type", "cross_kappa", "include_Gamma_down", "include_Lambda"},
    "parameters": None,  # validated per model
    "dims": None,
    "wigner": {"enabled", "range", "points"},
    "solver": {"tol", "method"},
    "output": {"dir"},
}
MODEL_LABELS = {
    "generic": models.GENERIC_LABELS,
    "reduced": models.REDUCED_LABELS,
    "full": models.FULL_LABELS,
}
MODEL_DIMS = {
    "generic": models.DEFAULT_GENERIC_DIMS,
    "reduced": models.DEFAULT_REDUCED_DIMS,
    "full": models.DEFAULT_FULL_DIMS,
}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending line."""


@dataclass
class ScenarioConfig:
    model: str
    parameters: dict[str, float]
    dims: dict[str, int]
    wigner_enabled: bool = True
    wigner_range: float = DEFAULT_HALF_WIDTH
    wigner_points: int = DEFAULT_POINTS
    tol: float = 1e-9
    method: str = "direct"
    cross_kappa: bool = False
    include_Gamma_down: bool = False
    include_Lambda: bool = False
    output_dir: str = "out"

    def dims_tuple(self) -> tuple[int, ...]:
        return tuple(self.dims[l] for l in MODEL_LABELS[self.model])


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rho_mech: DensityMatrix
    populations: np.ndarray
    residual: float
    relative_residual: float
    diagnostics: dict
    generic: models.GenericParams
    effective: models.EffectiveParams | None = None
    raw: models.RawOptomechParams | None = None
    wigner: object = None
    rho: DensityMatrix | None = None

    @property
    def nbar(self) -> float:
        return float(np.dot(np.arange(self.populations.size), self.populations))

    @property
    def w00(self) -> float:
        return wigner_origin(self.rho_mech)


# --------------------------------------------------------------------------
# Config parsing
# --------------------------------------------------------------------------


def _preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("fockstab.presets").joinpath(f"{name}.ini").read_text()


def _locate(sources: list[tuple[str, str]], section: str, key: str | None = None) -> str:
    """``file:line`` of the last definition of ``section``/``key``."""
    found = None
    for name, text in sources:
        current = None
        for i, line in enumerate(text.splitlines(), 1):
            m = re.match(r"\s*\[([^\]]+)\]", line)
            if m:
                current = m.group(1).strip()
                if key is None and current == section:
                    found = f"{name}:{i}"
                continue
            if key is not None and current == section:
                m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
                if m and m.group(1) == key:
                    found = f"{name}:{i}"
    return found or "<config>"


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    return cp


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def load_config(path: str | os.PathLike | None = None, preset: str | None = None) -> ScenarioConfig:
    """Read a scenario; a preset, if given, is loaded first and the file overrides it."""
    if path is None and preset is None:
        raise ConfigError("need --config or --preset")
    sources: list[tuple[str, str]] = []
    if preset is not None:
        sources.append((f"preset:{preset}", _preset_text(preset)))
    if path is not None:
        try:
            sources.append((str(path), Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    cp = _parser()
    for name, text in sources:
        try:
            cp.read_string(text, source=name)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from None
    return _interpret(cp, sources)


def _interpret(cp: configparser.ConfigParser, sources) -> ScenarioConfig:
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{_locate(sources, sec)}: unknown section [{sec}]")
        allowed = SECTIONS[sec]
        if allowed is not None:
            for key in cp[sec]:
                if key not in allowed:
                    raise ConfigError(f"{_locate(sources, sec, key)}: unknown key {key!r} in [{sec}]")

    def get(sec, key, conv, default):
        if not cp.has_option(sec, key):
            return default
        try:
            return conv(cp.get(sec, key))
        except ValueError as exc:
            raise ConfigError(f"{_locate(sources, sec, key)}: bad value for {key}: {exc}") from None

    model = get("model", "type", str.strip, None)
    if model is None:
        raise ConfigError("missing [model] type")
    if model not in MODEL_LABELS:
        raise ConfigError(f"{_locate(sources, 'model', 'type')}: model type must be generic, reduced or full")

    params: dict[str, float] = {}
    if cp.has_section("parameters"):
        for key in cp["parameters"]:
            params[key] = get("parameters", key, float, None)
            if not math.isfinite(params[key]):
                raise ConfigError(f"{_locate(sources, 'parameters', key)}: {key} must be finite")
    _check_parameters(model, params, sources)

    labels = MODEL_LABELS[model]
    dims = dict(zip(labels, MODEL_DIMS[model]))
    if cp.has_section("dims"):
        for key in cp["dims"]:
            if key not in labels:
                raise ConfigError(
                    f"{_locate(sources, 'dims', key)}: mode {key!r} not in {model} model {labels}"
                )
            dims[key] = get("dims", key, int, None)
            if dims[key] < 1:
                raise ConfigError(f"{_locate(sources, 'dims', key)}: dimension must be >= 1")

    cfg = ScenarioConfig(
        model=model,
        parameters=params,
        dims=dims,
        wigner_enabled=get("wigner", "enabled", _bool, True),
        wigner_range=get("wigner", "range", float, DEFAULT_HALF_WIDTH),
        wigner_points=get("wigner", "points", int, DEFAULT_POINTS),
        tol=get("solver", "tol", float, 1e-9),
        method=get("solver", "method", str.strip, "direct"),
        cross_kappa=get("model", "cross_kappa", _bool, False),
        include_Gamma_down=get("model", "include_Gamma_down", _bool, False),
        include_Lambda=get("model", "include_Lambda", _bool, False),
        output_dir=get("output", "dir", str.strip, "out"),
    )
    if cfg.method not in ("direct", "dense"):
        raise ConfigError(f"{_locate(sources, 'solver', 'method')}: method must be direct or dense")
    if cfg.wigner_points < 2 or cfg.wigner_range <= 0:
        raise ConfigError(f"{_locate(sources, 'wigner')}: need points >= 2 and range > 0")
    return cfg


def _check_parameters(model: str, params: dict[str, float], sources=()):
    def where(key):
        return _locate(list(sources), "parameters", key)

    if model == "generic":
        allowed, required = set(GENERIC_KEYS), set(GENERIC_KEYS)
    elif any(k in params for k in RAW_KEYS if k not in CAPTION_REQUIRED + CAPTION_OPTIONAL):
        allowed = set(RAW_KEYS) | set(OPTOMECH_OPTIONAL)
        required = set(RAW_KEYS)
    else:
        allowed = set(CAPTION_REQUIRED) | set(CAPTION_OPTIONAL) | set(OPTOMECH_OPTIONAL)
        required = set(CAPTION_REQUIRED)
    for key in params:
        if key not in allowed:
            raise ConfigError(f"{where(key)}: parameter {key!r} not valid here (allowed: {', '.join(sorted(allowed))})")
    missing = sorted(required - set(params))
    if missing:
        raise ConfigError(f"missing parameters for {model} model: {', '.join(missing)}")
    for key, v in params.items():
        if key in NONNEGATIVE and v < 0:
            raise ConfigError(f"{where(key)}: {key} must be nonnegative")
        if key in POSITIVE and v <= 0:
            raise ConfigError(f"{where(key)}: {key} must be positive")


def parse_dims_override(spec: str, model: str) -> dict[str, int]:
    """``"a+:3,c:9"`` to a dict, validated against the model's mode labels."""
    out = {}
    for item in filter(None, (s.strip() for s in spec.split(","))):
        label, sep, val = item.rpartition(":")
        if not sep:
            raise ConfigError(f"--dims entry {item!r} is not label:dim")
        if label not in MODEL_LABELS[model]:
            raise ConfigError(f"--dims: mode {label!r} not in {model} model {MODEL_LABELS[model]}")
        try:
            out[label] = int(val)
        except ValueError:
            raise ConfigError(f"--dims: {val!r} is not an integer") from None
        if out[label] < 1:
            raise ConfigError("--dims: dimensions must be >= 1")
    return out


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


def optomech_params(cfg: ScenarioConfig) -> tuple[models.RawOptomechParams, models.EffectiveParams]:
    p = dict(cfg.parameters)
    delta_plus = p.pop("Delta_plus", None)
    if "omega1" in p:
        raw = models.RawOptomechParams(**p)
    else:
        raw = models.raw_from_effective(**p)
    return raw, models.effective_params(raw, delta_plus)


def build(cfg: ScenarioConfig):
    """Liouvillian plus the parameter objects behind it."""
    dims = cfg.dims_tuple()
    if cfg.model == "generic":
        gp = models.GenericParams(dims=dims, **cfg.parameters)
        return models.build_generic(gp), gp, None, None
    raw, eff = optomech_params(cfg)
    gp = models.map_to_generic(eff, raw)
    if cfg.model == "reduced":
        L = models.build_reduced(eff, cfg.include_Gamma_down, cfg.include_Lambda, dims)
    else:
        L = models.build_full(raw, eff, cfg.cross_kappa, dims)
    return L, gp, eff, raw


def run_scenario(cfg: ScenarioConfig, wigner: bool | None = None) -> ScenarioResult:
    """Solve ``cfg``; raises ParameterError or SolverError."""
    t0 = time.perf_counter()
    L, gp, eff, raw = build(cfg)
    ss = steady_state(L, tol=cfg.tol, method=cfg.method)
    log.info("solved %s model %s in %.1f s", cfg.model, cfg.dims_tuple(), time.perf_counter() - t0)
    rho_mech = partial_trace(ss.rho, ["c"])
    res = ScenarioResult(
        config=cfg,
        rho_mech=rho_mech,
        populations=rho_mech.diagonal(),
        residual=ss.residual,
        relative_residual=ss.relative_residual,
        diagnostics=ss.diagnostics,
        generic=gp,
        effective=eff,
        raw=raw,
        rho=ss.rho,
    )
    if cfg.wigner_enabled if wigner is None else wigner:
        res.wigner = wigner_grid(rho_mech, cfg.wigner_range, n_points=cfg.wigner_points, check_normalization=False)
    return res


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header, rows):
    _atomic_write(Path(path), _csv_text(header, rows))


def report_text(res: ScenarioResult) -> str:
    cfg = res.config
    out = [f"model: {cfg.model}", f"dims: " + ", ".join(f"{k}={v}" for k, v in cfg.dims.items())]
    if cfg.model == "full":
        out.append(f"cross_kappa: {cfg.cross_kappa}")
    if cfg.model == "reduced":
        out.append(f"include_Gamma_down: {cfg.include_Gamma_down}")
        out.append(f"include_Lambda: {cfg.include_Lambda}")
    out.append("")
    if res.effective is not None:
        out.append("[derived parameters]")
        for k, v in res.effective.as_dict().items():
            if v is None:
                continue
            if isinstance(v, complex):
                out.append(f"{k} = {v.real:.10g}{v.imag:+.10g}j")
            else:
                out.append(f"{k} = {v:.10g}")
        out.append("")
    out.append("[generic-model rates]")
    for k in GENERIC_KEYS:
        out.append(f"{k} = {getattr(res.generic, k):.10g}")
    out.append("")
    out.append(f"[regime ratios] (flagged at >= {REGIME_WARN})")
    for k, v in res.generic.regime_ratios().items():
        flag = "  FLAG" if v >= REGIME_WARN else ""
        out.append(f"{k} = {v:.6g}{flag}")
    out.append("")
    out.append("[solver]")
    out.append(f"residual = {res.residual:.3e}")
    out.append(f"relative_residual = {res.relative_residual:.3e}")
    for k in ("ordering", "replaced_row", "fill", "degeneracy_check", "condition_estimate"):
        if k in res.diagnostics:
            v = res.diagnostics[k]
            out.append(f"{k} = {v:.3e}" if isinstance(v, float) else f"{k} = {v}")
    out.append("")
    out.append("[mechanical state]")
    for n, P in enumerate(res.populations[:6]):
        out.append(f"P{n} = {P:.8f}")
    out.append(f"nbar = {res.nbar:.8f}")
    out.append(f"W(0,0) = {res.w00:.8f}")
    if res.wigner is not None:
        neg = negativity_metrics(res.wigner)
        out.append(f"wigner_normalization = {res.wigner.normalization:.10f}")
        out.append(f"wigner_min = {neg['min_value']:.8f} at q={neg['min_location'][0]:.3f} p={neg['min_location'][1]:.3f}")
        out.append(f"negative_volume = {neg['negative_volume']:.6g}")
        out.append(f"symmetry_residual = {symmetry_residual(res.wigner):.3e}")
    out.append("")
    out.extend(_oracle_lines(res))
    return "\n".join(out) + "\n"


def _oracle_lines(res: ScenarioResult) -> list[str]:
    gp = res.generic
    if gp.Gamma == 0 or gp.g_tilde == 0 or gp.gamma_up <= 0:
        return ["[analytic comparison]", "not available (needs Gamma, g_tilde, gamma_up nonzero)"]
    out = ["[analytic comparison]"]
    if res.config.model == "generic":
        reference = models.analytic_generic_steady(gp)
        fixed = models.analytic_generic_steady(gp, corrected=True)
        S = res.rho.space
        out.append("coefficient, numeric, analytic, analytic_sqrt6")
        for name, (bra, ket) in reference.element_index().items():
            num = res.rho.matrix[S.basis_index(bra), S.basis_index(ket)]
            a, b = getattr(reference, name), getattr(fixed, name)
            out.append(f"{name}, {_c(num)}, {_c(a)}, {_c(b)}")
        P = reference.P
    else:
        sol = models.analytic_generic_steady(gp)
        P = models.analytic_phonon_populations(sol, res.effective)
        out.append("back-transformed analytic phonon populations")
    out.append("n, P_numeric, P_analytic")
    for n, Pa in enumerate(P):
        out.append(f"{n}, {res.populations[n]:.6f}, {Pa:.6f}")
    return out


def _c(z) -> str:
    z = complex(z)
    return f"{z.real:.6g}" if z.imag == 0 else f"{z.real:.6g}{z.imag:+.6g}j"


def write_outputs(res: ScenarioResult, out_dir: Path):
    out_dir = Path(out_dir)
    write_csv(out_dir / "populations.csv", ["n", "P_n"], enumerate(res.populations))
    m = res.rho_mech.matrix
    write_csv(
        out_dir / "rho_mech.csv",
        ["row", "col", "re", "im"],
        ((i, j, m[i, j].real, m[i, j].imag) for i in range(m.shape[0]) for j in range(m.shape[1])),
    )
    if res.wigner is not None:
        w = res.wigner
        write_csv(
            out_dir / "wigner.csv",
            ["q", "p", "W"],
            ((q, p, w.values[i, j]) for i, q in enumerate(w.q_axis) for j, p in enumerate(w.p_axis)),
        )
    _atomic_write(out_dir / "report.txt", report_text(res))


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------


def convergence_dims(model: str, dims: dict[str, int]) -> list[tuple[str, dict[str, int] | None, dict[str, int]]]:
    """Truncation pairs ``(label, reference, enlarged)`` for a convergence check.

    ``reference`` is None when the comparison is against ``dims`` itself.
    Two-mode models double every mode at once.  For the four-mode model each
    mode is enlarged on its own, to twice its size or to the largest size that
    keeps the Hilbert dimension within ``FULL_MAX_TOTAL_DIM``.  A mode that
    cannot grow within the budget is compared on a smaller reference in which
    the other optical modes are cut down towards two levels.
    """
    if model != "full":
        return [("all", None, {k: 2 * v for k, v in dims.items()})]
    out = []
    for label, d in dims.items():
        ref = dict(dims)
        new = min(2 * d, FULL_MAX_TOTAL_DIM // (math.prod(ref.values()) // d))
        others = [k for k in ref if k not in (label, "c")]
        while new <= d and any(ref[k] > 2 for k in others):
            k = max(others, key=lambda k: ref[k])
            ref[k] -= 1
            new = min(2 * d, FULL_MAX_TOTAL_DIM // (math.prod(ref.values()) // d))
        if new <= d:
            log.warning("mode %s cannot be enlarged within the dimension budget", label)
            continue
        out.append((label, None if ref == dims else ref, {**ref, label: new}))
    return out


def _apply_axis(cfg: ScenarioConfig, axis: str, value: str) -> ScenarioConfig:
    if axis.startswith("dims."):
        label = axis[5:]
        if label not in cfg.dims:
            raise ConfigError(f"--axis: mode {label!r} not in {cfg.model} model")
        try:
            d = int(value)
        except ValueError:
            raise ConfigError(f"--values: {value!r} is not an integer dimension") from None
        return replace(cfg, dims={**cfg.dims, label: d})
    if axis not in cfg.parameters and not (
        axis in CAPTION_OPTIONAL + OPTOMECH_OPTIONAL and cfg.model != "generic"
    ):
        raise ConfigError(f"--axis: {axis!r} is not a parameter of this scenario")
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"--values: {value!r} is not a number") from None
    params = {**cfg.parameters, axis: v}
    _check_parameters(cfg.model, params)
    return replace(cfg, parameters=params)


SWEEP_HEADER = ["value", "P0", "P1", "P2", "P3", "nbar", "W00", "residual"]


def _pn(res, n):
    return res.populations[n] if n < res.populations.size else 0.0


def sweep(cfg: ScenarioConfig, axis: str, values: list[str], convergence: bool = False):
    """Rows of summary metrics, one per value; plus the convergence verdict."""
    rows, worst = [], 0.0
    header = list(SWEEP_HEADER)
    if convergence:
        header += ["max_dP", "worst_mode"]
    for value in values:
        c = _apply_axis(cfg, axis, value)
        res = run_scenario(c, wigner=False)
        row = [float(value)] + [_pn(res, n) for n in range(4)] + [res.nbar, res.w00, res.relative_residual]
        if convergence:
            dP, where = 0.0, ""
            for label, ref_dims, dims in convergence_dims(c.model, c.dims):
                ref = res if ref_dims is None else run_scenario(replace(c, dims=ref_dims), wigner=False)
                big = run_scenario(replace(c, dims=dims), wigner=False)
                n = max(ref.populations.size, big.populations.size)
                a = np.pad(ref.populations, (0, n - ref.populations.size))
                b = np.pad(big.populations, (0, n - big.populations.size))
                d = float(np.abs(a - b).max())
                log.info("value %s: enlarging %s -> max |dP| = %.3g", value, label, d)
                if d > dP:
                    dP, where = d, label
            row += [dP, where]
            worst = max(worst, dP)
        rows.append(row)
    return header, rows, worst


def _sweep_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fockstab", description="Steady-state Fock-state stabilization scenarios")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="solve one scenario and write CSV artifacts")
    sim.add_argument("--config")
    sim.add_argument("--preset", choices=PRESETS)
    sim.add_argument("--out")
    sim.add_argument("--dims", help="per-mode truncations, e.g. a+:3,a-:3,a3:2,c:7")
    sim.add_argument("--no-wigner", action="store_true")
    sim.add_argument("--cross-kappa", action="store_true")

    sw = sub.add_parser("sweep", help="repeat a scenario along one parameter axis")
    sw.add_argument("--config")
    sw.add_argument("--preset", choices=PRESETS)
    sw.add_argument("--axis", required=True, help="parameter name, or dims.<mode>")
    sw.add_argument("--values", required=True, help="comma-separated values (may be empty)")
    sw.add_argument("--convergence", action="store_true")
    sw.add_argument("--tolerance", type=float, default=CONVERGENCE_TOL, help="max |dP_n| accepted by --convergence")
    sw.add_argument("--strict", action="store_true", help="exit 3 when the convergence check fails")
    sw.add_argument("--out")
    sw.add_argument("--dims")
    sw.add_argument("--cross-kappa", action="store_true")
    return ap


def _prepare(args) -> ScenarioConfig:
    cfg = load_config(args.config, args.preset)
    if args.dims:
        cfg = replace(cfg, dims={**cfg.dims, **parse_dims_override(args.dims, cfg.model)})
    if getattr(args, "cross_kappa", False):
        if cfg.model != "full":
            raise ConfigError("--cross-kappa applies to the full model only")
        cfg = replace(cfg, cross_kappa=True)
    if getattr(args, "no_wigner", False):
        cfg = replace(cfg, wigner_enabled=False)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def main(argv=None) -> int:
    args = _arg_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _prepare(args)
        if args.command == "simulate":
            res = run_scenario(cfg)
            write_outputs(res, Path(cfg.output_dir))
            flagged = [k for k, v in res.generic.regime_flags(REGIME_WARN).items() if v]
            if flagged:
                log.warning("regime ratios at or above %s: %s", REGIME_WARN, ", ".join(flagged))
            return EXIT_OK
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        header, rows, worst = sweep(cfg, args.axis, values, args.convergence)
        _atomic_write(Path(cfg.output_dir) / "sweep.csv", _sweep_csv(header, rows))
        if args.convergence and worst > args.tolerance:
            log.warning("truncation not converged: max |dP_n| = %.3g > %.3g", worst, args.tolerance)
            return EXIT_CONVERGENCE if args.strict else EXIT_OK
        return EXIT_OK
    except (ConfigError, ParameterError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
