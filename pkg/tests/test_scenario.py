import numpy as np
import pytest

from dualaction.core import MultiTimeGrid, PeriodicField, Scheme
from dualaction.fieldio import FieldFileError, component_names, read_fields, write_fields
from dualaction.scenario import ScenarioError, load_scenario, parse_scenario

BASE = {"name": "s", "n": 1, "p": 1, "periods": [6.283185307179586], "resolution": [16],
        "hamiltonian": {"family": "quadratic"}}


def _with(**kw):
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in BASE.items()}
    raw.update(kw)
    return raw


def test_minimal_scenario_defaults():
    sc = parse_scenario(_with())
    assert sc.scheme is Scheme.FOURIER
    assert sc.solve.grad_tol == 1e-8 and sc.solve.optimizer == "lbfgs"
    assert sc.hamiltonian.dim == 2 and sc.growth is None
    assert sc.checks["mean_shift_tol"] == 1e-8


def test_seed_override():
    assert parse_scenario(_with(solve={"seed": 3}), {"seed": 11}).solve.seed == 11
    assert parse_scenario(_with(solve={"seed": 3}), {"seed": None}).solve.seed == 3


@pytest.mark.parametrize("raw,msg", [
    (_with(resolution=[2]), "N_alpha >= 4"),
    (_with(resolution=[15]), "even N_alpha"),
    (_with(periods=[-1.0]), "must be > 0"),
    (_with(p=2), "exactly p = 2"),
    (_with(hamiltonian={"family": "cubic"}), "unknown hamiltonian family 'cubic'"),
    (_with(hamiltonian={"family": "quadratic", "diag": [1.0, 2.0, 3.0]}), "hamiltonian.diag"),
    (_with(hamiltonian={"family": "quadratic", "diag": [1.0, -2.0]}), "positive definite"),
    (_with(hamiltonian={"family": "quadratic", "matrix": [[1.0, 2.0], [0.0, 1.0]]}), "symmetric"),
    (_with(hamiltonian={"family": "time_scaled_quadratic", "scaling": "exp"}), "hamiltonian.scaling"),
    (_with(hamiltonian={"family": "quartic_radial", "b": -1.0}), "b > 0"),
    (_with(hamiltonian={"family": "quadratic", "colour": 1}), "unknown key"),
    (_with(lagrangian={"family": "helmholtz"}, p=1), None),
    (_with(lagrangian={"family": "harmonic_oscillator"}, p=2, periods=[1.0, 1.0], resolution=[8, 8]), "p = 1"),
    (_with(lagrangian={"family": "sine_gordon"}), "unknown lagrangian family"),
    (_with(growth={"delta": 2.0, "alpha": 1.0}), "delta <= alpha"),
    (_with(growth={"alpha": 1.0}), "growth.delta"),
    (_with(solve={"optimizer": "newton"}), "optimizer"),
    (_with(solve={"max_iters": 1.5}), "solve.max_iters"),
    (_with(reference={"wavevector": [1.0, 1.0]}), "reference.wavevector"),
    (_with(sweep={"resolutions": [[16], [2]]}), "sweep resolution"),
    (_with(checks={"tolerance": 1.0}), "unknown key"),
    (_with(forecast=1), "unknown key"),
    (_with(n=0), "must be >= 1"),
])
def test_validation_errors(raw, msg):
    if msg is None:
        sc = parse_scenario(raw)  # helmholtz with p = 1 is allowed
        assert sc.lagrangian.name == "helmholtz"
        return
    with pytest.raises(ScenarioError, match=msg):
        parse_scenario(raw)


def test_lagrangian_only_scenario_builds_hamiltonian():
    raw = _with(lagrangian={"family": "harmonic_oscillator", "omega": 2.0})
    del raw["hamiltonian"]
    sc = parse_scenario(raw)
    t = np.zeros((1, 1))
    assert sc.hamiltonian.value(t, np.array([[1.0, 1.0]]))[0] == pytest.approx(0.5 + 2.0)


def test_toml_syntax_error_reports_position(tmp_path):
    f = tmp_path / "bad.toml"
    f.write_text('name = "x"\nn = = 1\n')
    with pytest.raises(ScenarioError, match="line 2"):
        load_scenario(f)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.toml")


def test_reference_fields_solve_helmholtz():
    from dualaction.solver import verify_hamilton
    T = 2 * np.pi * np.sqrt(2)
    k = 1 / np.sqrt(2)
    for fam in ("plane_wave", "standing_wave"):
        sc = parse_scenario({"n": 1, "p": 2, "periods": [T, T], "resolution": [16, 16],
                             "lagrangian": {"family": "helmholtz"},
                             "reference": {"family": fam, "wavevector": [k, k], "amplitude": 0.7}})
        assert verify_hamilton(sc.problem(), sc.reference_field()).sup < 1e-12


# ------------------------------------------------------------------ field files

def test_component_names():
    assert component_names(2, 2) == ["x1", "x2", "p1_1", "p1_2", "p2_1", "p2_2"]
    assert component_names(1, 1, "y", "q") == ["y1", "q1_1"]


def test_field_roundtrip_is_exact(tmp_path, rng):
    g = MultiTimeGrid((1.7, 2.3), (6, 4))
    w = PeriodicField(g, 2, rng.standard_normal((6, 4, 6)) * 1e3)
    v = PeriodicField(g, 2, rng.standard_normal((6, 4, 6)) / 7)
    path = tmp_path / "f.csv"
    write_fields(path, g, {"w": w, "v": v})
    header = path.read_text().splitlines()[0]
    assert header.startswith("t1,t2,x1,x2,p1_1") and "y1" in header and "q2_2" in header
    back = read_fields(path, g, 2)
    assert np.array_equal(back["w"].values, w.values)
    assert np.array_equal(back["v"].values, v.values)
    write_fields(path, g, {"w": w})
    assert read_fields(path, g, 2)["v"] is None


def test_field_file_errors(tmp_path, rng):
    g = MultiTimeGrid((1.0,), (8,))
    w = PeriodicField(g, 1, rng.standard_normal((8, 2)))
    path = tmp_path / "f.csv"
    write_fields(path, g, {"w": w})
    with pytest.raises(FieldFileError, match="rows"):
        read_fields(path, MultiTimeGrid((1.0,), (16,)), 1)
    with pytest.raises(FieldFileError, match="node times"):
        read_fields(path, MultiTimeGrid((2.0,), (8,)), 1)
    path.write_text("t1,a,b\n0,1,2\n")
    with pytest.raises(FieldFileError):
        read_fields(path, MultiTimeGrid((1.0,), (4,)), 1)
    with pytest.raises(FieldFileError, match="cannot read"):
        read_fields(tmp_path / "nope.csv", g, 1)
