"""Scenario files (TOML) and the objects they build.

A scenario fixes the grid, the derivative scheme, a Hamiltonian and/or a
Lagrangian from the built-in families, optional growth constants, solver
settings, an optional analytic reference field and tolerance overrides.
See ``scenarios/README.md`` for the full grammar.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import classical, hamiltonians
from .action import ActionProblem
from .classical import LagrangianModel, TrajectoryField
from .conjugate import Growth, HamiltonianModel
from .core import MultiTimeGrid, PeriodicField, Scheme, state_dim
from .solver import SolveConfig

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario"]

HAMILTONIAN_FAMILIES = ("quadratic", "time_scaled_quadratic", "quartic_radial", "saturating_radial", "legendre")
LAGRANGIAN_FAMILIES = ("harmonic_oscillator", "helmholtz", "free_field", "quartic_field", "modulated_helmholtz")
TOP_KEYS = {"name", "n", "p", "periods", "resolution", "scheme", "hamiltonian", "lagrangian", "growth", "solve",
            "reference", "checks", "sweep", "outputs"}
SOLVE_KEYS = {"optimizer", "max_iters", "grad_tol", "lbfgs_memory", "seed", "init", "k_max", "amplitude",
              "conj_tol", "trivial_tol"}
CHECK_DEFAULTS = {
    "samples": 1000,
    "sample_radius": 2.0,
    "C1": None,
    "C2": None,
    "hamilton_tol": None,
    "mean_shift_tol": 1e-8,
    "el_tol": None,
    "first_integral_tol": 1e-10,
    "divergence_tol": None,
    "inverse_tol": 1e-8,
    "require_nontrivial": False,
    "expected_order": None,
    "order_tol": 0.2,
}


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending key."""


@dataclass
class Scenario:
    name: str
    n: int
    p: int
    grid: MultiTimeGrid
    scheme: Scheme
    hamiltonian: Optional[HamiltonianModel]
    lagrangian: Optional[LagrangianModel]
    growth: Optional[Growth]
    solve: SolveConfig
    conj_tol: float
    reference: Optional[dict]
    checks: dict
    sweep: dict
    raw: dict = field(repr=False, default_factory=dict)

    def problem(self, grid: Optional[MultiTimeGrid] = None) -> ActionProblem:
        if self.hamiltonian is None:
            raise ScenarioError("scenario has neither [hamiltonian] nor [lagrangian]; no Hamiltonian available")
        return ActionProblem(grid or self.grid, self.hamiltonian, self.scheme, conj_tol=self.conj_tol)

    def reference_field(self, grid: Optional[MultiTimeGrid] = None) -> PeriodicField:
        grid = grid or self.grid
        if self.reference is None:
            raise ScenarioError("scenario has no [reference] table")
        k = np.asarray(self.reference["wavevector"], dtype=float)
        amp = float(self.reference.get("amplitude", 1.0))
        phase = float(self.reference.get("phase", 0.0))
        t = grid.coordinates
        if self.reference["family"] == "plane_wave":
            theta = t @ k + phase
            x = amp * np.cos(theta)
            grad_x = -amp * np.sin(theta)[..., None] * k
        else:
            # standing wave: x = amp * prod_alpha cos(k_alpha t^alpha + phase)
            c = np.cos(k * t + phase)
            s = np.sin(k * t + phase)
            x = amp * np.prod(c, axis=-1)
            grad_x = np.empty(t.shape)
            for a in range(grid.p):
                others = np.prod(np.delete(c, a, axis=-1), axis=-1)
                grad_x[..., a] = -amp * k[a] * s[..., a] * others
        x = np.repeat(x[..., None], self.n, axis=-1)
        mom = np.repeat(grad_x[..., None, :], self.n, axis=-2)  # p_i^alpha = d x^i / d t^alpha
        return PeriodicField.from_blocks(grid, x, mom)

    def reference_trajectory(self, grid: Optional[MultiTimeGrid] = None) -> TrajectoryField:
        u = self.reference_field(grid)
        return TrajectoryField(u.grid, np.array(u.positions))


def _get(table, key, kind, where, default=...):
    if key not in table:
        if default is ...:
            raise ScenarioError(f"missing required key '{where}{key}'")
        return default
    value = table[key]
    try:
        if kind is float:
            return float(value)
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "vector":
            return np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"'{where}{key}' has invalid value {value!r} (expected {getattr(kind, '__name__', kind)})")
    return value


def _unknown(table, allowed, where):
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ScenarioError(f"unknown key(s) in {where or 'top level'}: {extra}")


def _matrix_spec(tab, d, where):
    if "matrix" in tab and "diag" in tab:
        raise ScenarioError(f"{where}: give either 'matrix' or 'diag', not both")
    A = None
    if "matrix" in tab:
        A = _get(tab, "matrix", "vector", where)
        if A.shape != (d, d):
            raise ScenarioError(f"'{where}matrix' has shape {A.shape}, expected {(d, d)} (n+np = {d})")
    elif "diag" in tab:
        A = _get(tab, "diag", "vector", where)
        if A.shape != (d,):
            raise ScenarioError(f"'{where}diag' has length {A.size}, expected n+np = {d}")
    b = tab.get("b")
    if b is not None:
        b = _get(tab, "b", "vector", where)
        if b.shape != (d,):
            raise ScenarioError(f"'{where}b' has length {b.size}, expected n+np = {d}")
    if A is not None:
        M = np.diag(A) if A.ndim == 1 else A
        if not np.allclose(M, M.T):
            raise ScenarioError(f"'{where}matrix' must be symmetric")
        if np.min(np.linalg.eigvalsh(M)) <= 0:
            raise ScenarioError(f"'{where}' quadratic form is not positive definite (H must be strictly convex)")
    return A, b


def _build_lagrangian(tab, n, p) -> LagrangianModel:
    where = "lagrangian."
    fam = _get(tab, "family", str, where)
    if fam not in LAGRANGIAN_FAMILIES:
        raise ScenarioError(f"unknown lagrangian family {fam!r}; built-ins: {list(LAGRANGIAN_FAMILIES)}")
    if fam == "harmonic_oscillator":
        _unknown(tab, {"family", "omega"}, "[lagrangian]")
        if p != 1:
            raise ScenarioError("lagrangian 'harmonic_oscillator' is single-time: needs p = 1")
        return classical.harmonic_oscillator(n, _get(tab, "omega", float, where, 1.0))
    if fam == "helmholtz":
        _unknown(tab, {"family", "k2"}, "[lagrangian]")
        return classical.helmholtz(n, p, _get(tab, "k2", float, where, 1.0))
    if fam == "free_field":
        _unknown(tab, {"family"}, "[lagrangian]")
        return classical.free_field(n, p)
    if fam == "quartic_field":
        _unknown(tab, {"family", "eps"}, "[lagrangian]")
        return classical.quartic_field(n, p, _get(tab, "eps", float, where, 0.5))
    _unknown(tab, {"family", "eps"}, "[lagrangian]")
    return classical.modulated_helmholtz(n, p, _get(tab, "eps", float, where, 0.3))


def _build_hamiltonian(tab, n, p, growth, lagrangian) -> HamiltonianModel:
    where = "hamiltonian."
    d = state_dim(n, p)
    fam = _get(tab, "family", str, where)
    if fam not in HAMILTONIAN_FAMILIES:
        raise ScenarioError(f"unknown hamiltonian family {fam!r}; built-ins: {list(HAMILTONIAN_FAMILIES)}")
    if fam == "quadratic":
        _unknown(tab, {"family", "matrix", "diag", "b"}, "[hamiltonian]")
        A, b = _matrix_spec(tab, d, where)
        return hamiltonians.quadratic(n, p, A, b, growth=growth)
    if fam == "time_scaled_quadratic":
        _unknown(tab, {"family", "matrix", "diag", "b", "scaling"}, "[hamiltonian]")
        A, b = _matrix_spec(tab, d, where)
        scaling = _get(tab, "scaling", str, where, "one_plus_t1")
        if scaling not in hamiltonians.TIME_SCALINGS:
            raise ScenarioError(f"unknown 'hamiltonian.scaling' {scaling!r}; known: {sorted(hamiltonians.TIME_SCALINGS)}")
        return hamiltonians.time_scaled(hamiltonians.quadratic(n, p, A, b), scaling, growth=growth)
    if fam == "quartic_radial":
        _unknown(tab, {"family", "a", "b"}, "[hamiltonian]")
        a, b = _get(tab, "a", float, where, 1.0), _get(tab, "b", float, where, 1.0)
        if a < 0 or b <= 0:
            raise ScenarioError(f"quartic_radial needs a >= 0 and b > 0 (got a={a}, b={b})")
        return hamiltonians.quartic_radial(n, p, a, b, growth=growth)
    if fam == "saturating_radial":
        _unknown(tab, {"family", "eps", "s0"}, "[hamiltonian]")
        try:
            return hamiltonians.saturating_radial(n, p, _get(tab, "eps", float, where, 0.3),
                                                  _get(tab, "s0", float, where, 0.5), growth=growth)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    _unknown(tab, {"family"}, "[hamiltonian]")
    if lagrangian is None:
        raise ScenarioError("hamiltonian family 'legendre' needs a [lagrangian] table")
    H = classical.hamiltonian_from_lagrangian(lagrangian)
    return HamiltonianModel(H.n, H.p, H.value, H.grad, H.hess, growth=growth, name=H.name)


def parse_scenario(raw: dict, overrides: Optional[dict] = None) -> Scenario:
    overrides = overrides or {}
    _unknown(raw, TOP_KEYS, "")
    name = _get(raw, "name", str, "", "scenario")
    n = _get(raw, "n", int, "")
    p = _get(raw, "p", int, "")
    if n < 1 or p < 1:
        raise ScenarioError(f"'n' and 'p' must be >= 1 (got n={n}, p={p})")
    periods = _get(raw, "periods", "vector", "")
    resolution = _get(raw, "resolution", "vector", "")
    if periods.shape != (p,) or resolution.shape != (p,):
        raise ScenarioError(f"'periods' and 'resolution' need exactly p = {p} entries")
    if np.any(resolution != np.round(resolution)):
        raise ScenarioError("'resolution' entries must be integers")
    try:
        grid = MultiTimeGrid(tuple(periods), tuple(int(r) for r in resolution))
        scheme = Scheme.coerce(_get(raw, "scheme", str, "", "fourier"))
    except ValueError as exc:
        raise ScenarioError(f"invalid grid: {exc}") from None
    if scheme is Scheme.FOURIER and any(N % 2 for N in grid.resolution):
        raise ScenarioError("invalid grid: Fourier scheme requires even N_alpha in 'resolution'")

    growth = None
    if "growth" in raw:
        gt = raw["growth"]
        _unknown(gt, {"delta", "alpha", "beta", "gamma"}, "[growth]")
        try:
            growth = Growth(_get(gt, "delta", float, "growth."), _get(gt, "alpha", float, "growth."),
                            _get(gt, "beta", float, "growth.", 0.0), _get(gt, "gamma", float, "growth.", 0.0))
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        if growth.delta > growth.alpha:
            raise ScenarioError(f"growth constants need delta <= alpha (got {growth.delta} > {growth.alpha})")
        if float(growth.beta) < 0 or float(growth.gamma) < 0:
            raise ScenarioError("growth.beta and growth.gamma must be >= 0")

    lagrangian = _build_lagrangian(raw["lagrangian"], n, p) if "lagrangian" in raw else None
    H = None
    if "hamiltonian" in raw:
        H = _build_hamiltonian(raw["hamiltonian"], n, p, growth, lagrangian)
    elif lagrangian is not None:
        H = _build_hamiltonian({"family": "legendre"}, n, p, growth, lagrangian)

    st = dict(raw.get("solve", {}))
    _unknown(st, SOLVE_KEYS, "[solve]")
    if "seed" in overrides and overrides["seed"] is not None:
        st["seed"] = overrides["seed"]
    conj_tol = _get(st, "conj_tol", float, "solve.", 1e-12)
    if conj_tol <= 0:
        raise ScenarioError("'solve.conj_tol' must be > 0")
    default_tol = 1e-8 if scheme is Scheme.FOURIER else 1e-6
    try:
        cfg = SolveConfig(
            max_iters=_get(st, "max_iters", int, "solve.", 1000),
            grad_tol=_get(st, "grad_tol", float, "solve.", default_tol),
            optimizer=_get(st, "optimizer", str, "solve.", "lbfgs"),
            lbfgs_memory=_get(st, "lbfgs_memory", int, "solve.", 10),
            seed=_get(st, "seed", int, "solve.", 0),
            init=_get(st, "init", str, "solve.", "random_smooth"),
            k_max=_get(st, "k_max", int, "solve.", 3),
            amplitude=_get(st, "amplitude", float, "solve.", 1.0),
            trivial_tol=_get(st, "trivial_tol", float, "solve.", 1e-10),
        )
    except ValueError as exc:
        raise ScenarioError(f"[solve]: {exc}") from None

    reference = None
    if "reference" in raw:
        rt = raw["reference"]
        _unknown(rt, {"family", "wavevector", "amplitude", "phase"}, "[reference]")
        rfam = _get(rt, "family", str, "reference.", "plane_wave")
        if rfam not in ("plane_wave", "standing_wave"):
            raise ScenarioError(f"unknown reference family {rfam!r}; built-ins: ['plane_wave', 'standing_wave']")
        k = _get(rt, "wavevector", "vector", "reference.")
        if k.shape != (p,):
            raise ScenarioError(f"'reference.wavevector' needs p = {p} entries")
        reference = {"family": rfam, "wavevector": k.tolist(),
                     "amplitude": _get(rt, "amplitude", float, "reference.", 1.0),
                     "phase": _get(rt, "phase", float, "reference.", 0.0)}

    checks = dict(CHECK_DEFAULTS)
    ct = raw.get("checks", {})
    _unknown(ct, CHECK_DEFAULTS, "[checks]")
    checks.update(ct)
    cfg.mean_shift_tol = float(checks["mean_shift_tol"])

    sweep = {"resolutions": None, "source": "reference"}
    if "sweep" in raw:
        sw = raw["sweep"]
        _unknown(sw, {"resolutions", "source"}, "[sweep]")
        res = sw.get("resolutions")
        if res is not None:
            res = [list(np.atleast_1d(r).astype(int)) for r in res]
            if any(len(r) != p for r in res):
                raise ScenarioError(f"every 'sweep.resolutions' entry needs p = {p} integers")
            for r in res:
                try:
                    MultiTimeGrid(tuple(periods), tuple(r))
                except ValueError as exc:
                    raise ScenarioError(f"invalid sweep resolution {r}: {exc}") from None
        src = _get(sw, "source", str, "sweep.", "reference")
        if src not in ("reference", "solve"):
            raise ScenarioError("'sweep.source' must be 'reference' or 'solve'")
        sweep = {"resolutions": res, "source": src}

    return Scenario(name=name, n=n, p=p, grid=grid, scheme=scheme, hamiltonian=H, lagrangian=lagrangian,
                    growth=growth, solve=cfg, conj_tol=conj_tol, reference=reference, checks=checks,
                    sweep=sweep, raw=raw)


def load_scenario(path, overrides: Optional[dict] = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc.strerror}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: TOML syntax error: {exc}") from None
    return parse_scenario(raw, overrides)
