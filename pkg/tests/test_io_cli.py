import csv
import io as stdio
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from vhstab import io
from vhstab.cli import main
from vhstab.dsl import evaluate
from vhstab.grid import Domain

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def minimal_lin():
    return {
        "problem": {"g": "1", "h": "v", "f1": "v", "f2": "v", "K": "0.5*v", "F": "0"},
        "lipschitz": {
            "l_g": 0, "l_h": 1, "N": 1, "l_f1": 1, "l_f2": 1,
            "l_1": 0.5, "l_2": 0, "alpha": 1, "m": 0.5, "l_K": "0.5", "l_F": "0",
        },
        "domain": {"L": 1, "n": 9, "R": 1, "m_nodes": 9, "tau": 1},
        "solver": {"tol": 1e-10, "max_iter": 200},
    }


# ---- problem files ---------------------------------------------------------


def test_minimal_lin_loads():
    lp = io.from_dict(minimal_lin())
    p = lp.instance
    assert p.domain == Domain(L=1.0, n=9, R=1.0, m_nodes=9, tau=1.0)
    assert p.K_spec.expr(x=0, y=0, z=0, r=0, s=0, t=0, v=2.0) == 1.0
    # omitted sections fall back to defaults
    assert lp.perturbation.epsilon == 0.1 and lp.perturbation.phi is None


def test_expression_error_names_field():
    data = minimal_lin()
    data["problem"]["K"] = "0.5*q"
    with pytest.raises(io.ExpressionFieldError, match=r"problem\.K"):
        io.from_dict(data)


def test_kernel_variables_not_allowed_in_pointwise_maps():
    data = minimal_lin()
    data["problem"]["g"] = "r + v"
    with pytest.raises(io.ExpressionFieldError, match=r"problem\.g"):
        io.from_dict(data)


@pytest.mark.parametrize(
    "edit",
    [
        lambda d: d["domain"].__setitem__("n", 1),
        lambda d: d["domain"].__setitem__("tau", -1),
        lambda d: d["domain"].__setitem__("R", 0.5),
        lambda d: d["lipschitz"].__setitem__("l_g", -0.1),
        lambda d: d["problem"].__setitem__("extra", "1"),
        lambda d: d.__setitem__("unknown", {}),
        lambda d: d["domain"].__setitem__("n", "many"),
        lambda d: d.pop("problem"),
    ],
)
def test_schema_errors(edit):
    data = minimal_lin()
    edit(data)
    with pytest.raises(io.SchemaError):
        io.from_dict(data)


def test_invalid_json(tmp_path):
    path = tmp_path / "p.json"
    path.write_text('{"problem": ')
    with pytest.raises(io.ParseError, match="line 1"):
        io.load_problem(path)


@pytest.mark.parametrize("name", ["lin", "nonlinear", "mixed", "bad"])
def test_round_trip(name, tmp_path):
    lp = io.load_problem(PROBLEMS / f"{name}.json")
    io.write_problem(lp, tmp_path / "copy.json")
    back = io.load_problem(tmp_path / "copy.json")
    a, b = lp.instance, back.instance
    assert a.domain == b.domain and (lp.tol, lp.max_iter) == (back.tol, back.max_iter)
    rng = np.random.default_rng(0)
    for _ in range(20):
        env = {k: float(v) for k, v in zip("xyzrstv", rng.uniform(0, 2, 7))}
        for ea, eb in [
            (a.g, b.g), (a.h_map, b.h_map), (a.f1_map, b.f1_map), (a.f2_map, b.f2_map),
            (a.K_spec.expr, b.K_spec.expr), (a.F_spec.expr, b.F_spec.expr),
            (a.lip.l_K, b.lip.l_K), (a.lip.l_F, b.lip.l_F),
        ]:
            assert evaluate(ea, env) == evaluate(eb, env)
    assert (tmp_path / "copy.json").read_text() == io.dumps(io.to_dict(back))


def test_dumps_format():
    text = io.dumps({"a": 0.1, "b": [1, True, None], "c": float("nan"), "d": {}})
    data = json.loads(text)
    assert data == {"a": 0.1, "b": [1, True, None], "c": None, "d": {}}
    assert "0.10000000000000001" in text


# ---- command line ----------------------------------------------------------


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_command(tmp_path, capsys):
    code, out, _ = run(["solve", "-p", PROBLEMS / "lin.json", "-o", tmp_path / "out"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "out" / "solve.json").read_text())
    assert report == json.loads(out)
    assert report["converged"] is True
    assert report["u_star_corner"] == pytest.approx(1.5318332, rel=5e-3)
    lines = (tmp_path / "out" / "u_star.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,value" and len(lines) == 17 ** 3 + 1


def test_solve_not_converged_is_a_failed_verdict(capsys):
    code, out, _ = run(["solve", "-p", PROBLEMS / "lin.json", "--max-iter", "2", "--tol", "1e-14"], capsys)
    assert code == 2
    assert json.loads(out)["converged"] is False


def test_certify_bad(tmp_path, capsys):
    code, out, _ = run(["certify", "-p", PROBLEMS / "bad.json", "-o", tmp_path], capsys)
    assert code == 2
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["flags"]["C8"] is False and cert["passed"] is False
    assert cert["c"] is None


def test_certify_good(capsys):
    code, out, _ = run(["certify", "-p", PROBLEMS / "nonlinear.json"], capsys)
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_stability_command(tmp_path, capsys):
    code, out, _ = run(["stability", "-p", PROBLEMS / "lin.json", "--epsilon", "0.1", "-o", tmp_path, "--fields"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["hur_holds"] is True and rep["admissible"] is True
    assert rep["min_slack"] == pytest.approx(0.0649, abs=1e-3)
    for name in ("residual", "phi", "diff", "bound"):
        assert (tmp_path / f"{name}.csv").exists()


def test_stability_without_constant_is_a_failed_verdict(capsys):
    # l_g * N = 1 leaves the stability constant undefined
    code, out, _ = run(["stability", "-p", PROBLEMS / "bad.json"], capsys)
    assert code == 2
    assert json.loads(out)["hur_holds"] is False


def test_reports_are_byte_identical(tmp_path, capsys):
    texts = []
    for k in range(2):
        out = tmp_path / str(k)
        assert main(["certify", "-p", str(PROBLEMS / "mixed.json"), "-o", str(out), "--seed", "3"]) == 0
        assert main(["stability", "-p", str(PROBLEMS / "lin.json"), "-o", str(out)]) == 0
        texts.append([(out / n).read_bytes() for n in ("certificate.json", "stability.json")])
    capsys.readouterr()
    assert texts[0] == texts[1]


def test_sweep_csv(tmp_path, capsys):
    code, _, _ = run(
        ["sweep", "--vary", "l_g=0:1:3", "--vary", "l_h=0.5,1", "--vary", "N=1,1", "--vary", "m=0.5,0.5",
         "-o", tmp_path, "--threads", "4"],
        capsys,
    )
    assert code == 0
    rows = list(csv.reader((tmp_path / "sweep.csv").open()))
    assert rows[0] == ["l_g", "l_h", "N", "m", "q", "C8_pass", "ii_pass", "C_hur"]
    assert len(rows) == 1 + 3 * 2 * 2 * 2
    first = rows[1]
    assert first[:4] == ["0", "0.5", "1", "0.5"] and first[5:7] == ["true", "true"]
    last = rows[-1]
    assert last[5:] == ["false", "false", ""]


def test_sweep_stdout_ordered(capsys):
    code, out, _ = run(["sweep", "--vary", "l_1=0.1,0.9,0.95", "--threads", "3"], capsys)
    assert code == 0
    rows = list(csv.reader(stdio.StringIO(out)))
    assert [r[0] for r in rows[1:]] == ["0.10000000000000001", "0.90000000000000002", "0.94999999999999996"]


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep"],
        ["sweep", "--vary", "alpha=0:1:2"],
        ["sweep", "--vary", "l_g=oops"],
        ["solve"],
        ["solve", "-p", "/nonexistent/file.json"],
        ["eval-expr", "x*", "--bind", "x=1"],
        ["eval-expr", "x", "--bind", "x"],
    ],
)
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1 and "error" in err


def test_argparse_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 1
    capsys.readouterr()


def test_eval_expr(capsys):
    code, out, _ = run(["eval-expr", "x*y*z", "--bind", "x=1", "--bind", "y=2", "--bind", "z=3", "--canonical"], capsys)
    assert code == 0
    assert out.splitlines() == ["((x * y) * z)", "6"]
    code, out, _ = run(["eval-expr", "min(x, y)", "--bind", "x=0.2", "--bind", "y=0.7"], capsys)
    assert out.strip() == "0.20000000000000001"


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    if shutil.which(sys.executable) is None:
        pytest.skip("no interpreter path")
    done = subprocess.run(
        [sys.executable, "-m", "vhstab", "eval-expr", "2+3*4"], capture_output=True, text=True, check=False
    )
    assert done.returncode == 0 and done.stdout.strip() == "14"
