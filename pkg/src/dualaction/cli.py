"""Command-line front end: ``dualaction <command> --scenario FILE --out DIR``.

Commands: conjugate-check, solve, verify, conserve, sweep.  Every command
writes a deterministic ``report.json`` (no timestamps; those go to
``metadata.json``) and exits 0 on success, 1 if any check fails and 2 on
bad input.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .classical import (DegenerateLagrangianError, TrajectoryField, divergence_check, energy_moment_tensor,
                        euler_lagrange_residual, first_integral_check, hamiltonian_along)
from .conjugate import (ConjugationError, ConvexityError, check_gradient_bound, check_growth_bounds,
                        conjugate_batch, grad_conjugate)
from .core import MultiTimeGrid, state_dim
from .fieldio import FieldFileError, read_fields, write_fields, write_table
from .scenario import Scenario, ScenarioError, load_scenario
from .solver import SolveError, solve_periodic, verify_hamilton, mean_shift_check

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
COMMANDS = ("conjugate-check", "solve", "verify", "conserve", "sweep")


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _dump(path: Path, data):
    path.write_text(json.dumps(_clean(data), indent=2) + "\n")


def _without_ok(d):
    return {k: val for k, val in d.items() if k != "ok"}


class Checks:
    """Named pass/fail results accumulated by a command."""

    def __init__(self):
        self.results = {}

    def add(self, name, ok, **values):
        self.results[name] = {"ok": bool(ok), **values}
        return ok

    @property
    def failures(self):
        return [k for k, v in self.results.items() if not v["ok"]]


# ------------------------------------------------------------------ commands

def _samples(sc: Scenario, rng, count):
    t = rng.uniform(0.0, 1.0, size=(count, sc.p)) * np.asarray(sc.grid.periods)
    R = float(sc.checks["sample_radius"])
    v = rng.uniform(-R, R, size=(count, state_dim(sc.n, sc.p)))
    return t, v


def cmd_conjugate_check(sc: Scenario, args, out: Path) -> dict:
    H = sc.hamiltonian
    if H is None:
        raise ScenarioError("conjugate-check needs a [hamiltonian] or [lagrangian] table")
    rng = np.random.default_rng(sc.solve.seed)
    count = int(sc.checks["samples"])
    t, v = _samples(sc, rng, count)
    checks = Checks()
    tol = sc.conj_tol

    res = conjugate_batch(H, t, v, tol=tol)
    gap = np.abs(res.fenchel_young_gap(H, t, v))
    checks.add("fenchel_young_equality", gap.max() <= 1e-9 * (1 + np.abs(res.value).max()),
               max_gap=float(gap.max()), max_inner_residual=float(res.residual.max()))

    u = v.copy()
    back = grad_conjugate(H, t, H.grad(t, u), tol=tol)
    inv_err = float(np.max(np.abs(back - u)))
    checks.add("inverse_identity", inv_err <= sc.checks["inverse_tol"], max_error=inv_err,
               tol=sc.checks["inverse_tol"])

    lam = rng.uniform(size=count)
    v2 = _samples(sc, rng, count)[1]
    mix = lam[:, None] * v + (1 - lam[:, None]) * v2
    lhs = conjugate_batch(H, t, mix, tol=tol).value
    rhs = lam * res.value + (1 - lam) * conjugate_batch(H, t, v2, tol=tol).value
    excess = float(np.max(lhs - rhs))
    checks.add("conjugate_convexity", excess <= 1e-10, max_excess=excess)

    if sc.growth is not None:
        gb = check_growth_bounds(H, t, v, sc.growth, tol=tol)
        checks.add("growth_bounds", gb.ok, **_without_ok(gb.to_dict()))
        C1 = sc.checks["C1"] if sc.checks["C1"] is not None else 1.0 / sc.growth.delta
        C2 = sc.checks["C2"] if sc.checks["C2"] is not None else 1.0
        gr = check_gradient_bound(H, t, v, float(C1), float(C2), sc.growth, tol=tol)
        checks.add("gradient_bound", gr.ok, **_without_ok(gr.to_dict()))
    return {"samples": count, "checks": checks.results, "failures": checks.failures}


def cmd_solve(sc: Scenario, args, out: Path) -> dict:
    prob = sc.problem()
    checks = Checks()
    try:
        rep = solve_periodic(prob, sc.solve)
    except SolveError as exc:
        write_fields(out / "field.csv", sc.grid, {"v": exc.iterate})
        checks.add("solve", False, error=str(exc), iteration=exc.iteration)
        return {"checks": checks.results, "failures": checks.failures}
    write_fields(out / "field.csv", sc.grid, {"w": rep.w, "v": rep.v})
    write_table(out / "history.csv", ["iteration", "phi", "grad_sup"], rep.history)
    body = rep.to_dict()
    checks.add("converged", rep.converged, final_grad_norm=rep.final_grad_norm, grad_tol=sc.solve.grad_tol)
    htol = sc.checks["hamilton_tol"]
    if htol is not None:
        r = rep.hamilton_residual_norm
        checks.add("hamilton_residual", r is not None and r <= htol, value=r, tol=htol)
    if rep.mean_shift is not None:
        checks.add("mean_shift", rep.mean_shift.ok, max_deviation=rep.mean_shift.max_deviation,
                   tol=rep.mean_shift.tol)
    if sc.checks["require_nontrivial"]:
        checks.add("nontrivial", rep.trivial is False, max_abs_w=body["max_abs_w"])
    return {"solve": body, "checks": checks.results, "failures": checks.failures}


def _load_field(sc: Scenario, args):
    if not args.field:
        raise ScenarioError(f"{args.command} needs --field FILE")
    return read_fields(args.field, sc.grid, sc.n)


def cmd_verify(sc: Scenario, args, out: Path) -> dict:
    fields = _load_field(sc, args)
    w, v = fields["w"], fields["v"]
    checks = Checks()
    body = {"field": str(args.field)}
    if w is not None and sc.hamiltonian is not None:
        res = verify_hamilton(sc.problem(), w)
        body["hamilton_residual_norm"] = res.l2
        body["hamilton_residual_sup"] = res.sup
        htol = sc.checks["hamilton_tol"]
        if htol is not None:
            checks.add("hamilton_residual", res.l2 <= htol, value=res.l2, tol=htol)
    if w is not None and v is not None:
        ms = mean_shift_check(v, w, tol=sc.checks["mean_shift_tol"])
        body["mean_shift"] = ms.to_dict()
        checks.add("mean_shift", ms.ok, max_deviation=ms.max_deviation, tol=ms.tol)
    if w is not None and sc.lagrangian is not None:
        traj = TrajectoryField(sc.grid, np.array(w.positions))
        el = euler_lagrange_residual(sc.lagrangian, traj, sc.scheme)
        el_l2 = float(np.sqrt(np.sum(el * el) * sc.grid.cell_volume))
        body["euler_lagrange_l2"] = el_l2
        body["euler_lagrange_sup"] = float(np.max(np.abs(el)))
        if sc.checks["el_tol"] is not None:
            checks.add("euler_lagrange", el_l2 <= sc.checks["el_tol"], value=el_l2, tol=sc.checks["el_tol"])
    return {"verify": body, "checks": checks.results, "failures": checks.failures}


def cmd_conserve(sc: Scenario, args, out: Path) -> dict:
    L = sc.lagrangian
    if L is None:
        raise ScenarioError("conserve needs a [lagrangian] table")
    if args.field:
        w = _load_field(sc, args)["w"]
        if w is None:
            raise FieldFileError(f"{args.field}: conserve needs the x1.. columns")
        traj, source = TrajectoryField(sc.grid, np.array(w.positions)), str(args.field)
    else:
        traj, source = sc.reference_trajectory(), "reference"
    checks = Checks()
    T = energy_moment_tensor(L, traj, sc.scheme)
    Hn = hamiltonian_along(L, traj, sc.scheme)
    div = divergence_check(L, traj, sc.scheme)
    body = {"trajectory": source, "divergence": div.values, "max_abs_tensor": float(np.max(np.abs(T))),
            "hamiltonian_min": float(Hn.min()), "hamiltonian_max": float(Hn.max()),
            "hamiltonian_variation": float(Hn.max() - Hn.min())}
    if sc.checks["divergence_tol"] is not None:
        checks.add("divergence", div.values["divergence_sup"] <= sc.checks["divergence_tol"],
                   value=div.values["divergence_sup"], tol=sc.checks["divergence_tol"])
    if sc.p == 1:
        collapse = float(np.max(np.abs(T[..., 0, 0] - Hn)))
        body["collapse_T11_minus_H"] = collapse
        checks.add("collapse_T11_equals_H", collapse <= 1e-12 * (1 + np.max(np.abs(Hn))), value=collapse)
        if L.autonomous:
            fi = first_integral_check(L, traj, sc.scheme, tol=sc.checks["first_integral_tol"])
            body["first_integral"] = fi.values
            checks.add("first_integral", fi.ok, drift=fi.values["drift"], tol=fi.values["tol"])
    cols = [f"t{a + 1}" for a in range(sc.p)] + ["H"] + [f"T{a + 1}_{b + 1}" for a in range(sc.p) for b in range(sc.p)]
    rows = np.column_stack([sc.grid.flat_coordinates, Hn.reshape(-1), T.reshape(-1, sc.p * sc.p)])
    write_table(out / "conserve.csv", cols, rows)
    return {"conserve": body, "checks": checks.results, "failures": checks.failures}


def _fit_order(h, r):
    h, r = np.asarray(h, float), np.asarray(r, float)
    keep = np.isfinite(r) & (r > 0)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(h[keep]), np.log(r[keep]), 1)[0])


def cmd_sweep(sc: Scenario, args, out: Path) -> dict:
    res_list = sc.sweep["resolutions"]
    if not res_list:
        raise ScenarioError("sweep needs [sweep] resolutions = [[N1, ...], ...]")
    checks = Checks()
    rows, entries = [], []
    names = [f"N{a + 1}" for a in range(sc.p)] + ["h", "hamilton_l2", "hamilton_sup", "euler_lagrange_l2",
                                                   "divergence_sup"]
    for res in res_list:
        g = MultiTimeGrid(sc.grid.periods, tuple(res))
        entry = {"resolution": list(res), "h": float(max(g.spacing))}
        if sc.sweep["source"] == "solve":
            rep = solve_periodic(sc.problem(g), sc.solve)
            entry.update(converged=rep.converged, final_grad_norm=rep.final_grad_norm)
            w = rep.w
        else:
            w = sc.reference_field(g)
        ham = verify_hamilton(sc.problem(g), w) if (w is not None and sc.hamiltonian is not None) else None
        entry["hamilton_l2"] = ham.l2 if ham else float("nan")
        entry["hamilton_sup"] = ham.sup if ham else float("nan")
        entry["euler_lagrange_l2"] = entry["divergence_sup"] = float("nan")
        if sc.lagrangian is not None and w is not None:
            traj = TrajectoryField(g, np.array(w.positions))
            el = euler_lagrange_residual(sc.lagrangian, traj, sc.scheme)
            entry["euler_lagrange_l2"] = float(np.sqrt(np.sum(el * el) * g.cell_volume))
            entry["divergence_sup"] = divergence_check(sc.lagrangian, traj, sc.scheme).values["divergence_sup"]
        entries.append(entry)
        rows.append(list(res) + [entry[k] for k in names[sc.p:]])
    write_table(out / "sweep.csv", names, rows)
    h = [e["h"] for e in entries]
    orders = {k: _fit_order(h, [e[k] for e in entries])
              for k in ("hamilton_l2", "hamilton_sup", "euler_lagrange_l2", "divergence_sup")}
    expected = sc.checks["expected_order"]
    if expected is not None:
        order = orders["hamilton_l2"]
        checks.add("convergence_order", order is not None and abs(order - expected) <= sc.checks["order_tol"],
                   fitted=order, expected=expected, tol=sc.checks["order_tol"])
    if sc.sweep["source"] == "solve":
        checks.add("all_converged", all(e.get("converged") for e in entries))
    return {"sweep": {"source": sc.sweep["source"], "entries": entries, "fitted_order": orders},
            "checks": checks.results, "failures": checks.failures}


HANDLERS = {"conjugate-check": cmd_conjugate_check, "solve": cmd_solve, "verify": cmd_verify,
            "conserve": cmd_conserve, "sweep": cmd_sweep}


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario TOML file")
    common.add_argument("--out", default="out", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=1, help="BLAS/LAPACK threads (default 1: deterministic)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed; overrides [solve] seed")
    parser = argparse.ArgumentParser(prog="dualaction", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("verify", "conserve"):
            sp.add_argument("--field", default=None, help="field CSV (as written by solve)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    try:
        sc = load_scenario(args.scenario, overrides={"seed": args.seed})
        out.mkdir(parents=True, exist_ok=True)
        with threadpool_limits(limits=args.threads):
            body = HANDLERS[args.command](sc, args, out)
    except (ScenarioError, FieldFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvexityError, ConjugationError, DegenerateLagrangianError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = {"command": args.command, "scenario": sc.name, "n": sc.n, "p": sc.p,
              "periods": list(sc.grid.periods), "resolution": list(sc.grid.resolution), "scheme": sc.scheme.value,
              "seed": sc.solve.seed, "ok": not body["failures"], **body}
    _dump(out / "report.json", report)
    _dump(out / "metadata.json", {
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__, "argv": list(sys.argv if argv is None else argv),
        "scenario_path": str(args.scenario), "threads": args.threads,
        "python": platform.python_version(), "numpy": np.__version__,
    })
    status = "ok" if report["ok"] else "FAILED: " + ", ".join(body["failures"])
    print(f"{args.command} [{sc.name}]: {status} -> {out / 'report.json'}")
    return EXIT_OK if report["ok"] else EXIT_FAIL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
