import json
import subprocess
import sys

import pytest

from afem.cli import main
from afem.driver import read_trace_csv
from afem.mesh import read_mesh
from afem.problems import problem_ids


def _run(tmp_path, *extra, problem="lshape_poisson", max_dofs=300):
    return main(["run", "--problem", problem, "--degree", "1", "--theta", "0.5",
                 "--max-dofs", str(max_dofs), "--out", str(tmp_path), *extra])


def test_run_writes_outputs(tmp_path, capsys):
    assert _run(tmp_path) == 0
    for name in ("trace.csv", "summary.json", "final_mesh.txt", "mesh_0.txt", "marks.json"):
        assert (tmp_path / name).exists()
    assert capsys.readouterr().out.startswith("iterations=")


def test_run_outputs_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run(a, "--dump-indicators")
    first = {p.name: p.read_bytes() for p in a.iterdir()}
    _run(a, "--dump-indicators")
    assert {p.name: p.read_bytes() for p in a.iterdir()} == first
    _run(b, "--dump-indicators")
    assert (b / "trace.csv").read_bytes() == first["trace.csv"]


def test_unknown_problem(tmp_path, capsys):
    assert _run(tmp_path, problem="heat") == 1
    err = capsys.readouterr().err
    assert all(pid in err for pid in problem_ids())


@pytest.mark.parametrize("args", [["--theta", "1.5"], ["--degree", "3"], ["--bogus"],
                                  ["--no-max-dofs"], ["--bisections", "0"], ["--tol", "-1"]])
def test_usage_errors(tmp_path, args):
    assert _run(tmp_path, *args) == 1


def test_missing_subcommand_and_out():
    assert main([]) == 1
    assert main(["run", "--problem", "lshape_poisson"]) == 1
    assert main(["frobnicate"]) == 1


def test_uniform_and_tolerance(tmp_path):
    assert _run(tmp_path, "--uniform") == 0
    cols = read_trace_csv(tmp_path / "trace.csv")
    assert all(b == 2 * a for a, b in zip(cols["elements"], cols["elements"][1:]))
    assert main(["run", "--problem", "square_laplace_eigen", "--no-max-dofs", "--tol", "0.6",
                 "--out", str(tmp_path / "t")]) == 0
    cols = read_trace_csv(tmp_path / "t" / "trace.csv")
    assert cols["eta"][-1] <= 0.6 and cols["lambda"][0] is not None


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"problem": "square_laplace_eigen", "max_dofs": 200, "gamma": 2.0,
                               "bisections": 2}))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--max-dofs", "400", "--out", str(out)]) == 0
    echo = json.loads((out / "summary.json").read_text())["config"]
    assert echo["problem"] == "square_laplace_eigen" and echo["max_dofs"] == 400
    assert echo["gamma"] == 2.0 and echo["bisections"] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"problme": "x"}))
    assert main(["run", "--config", str(bad), "--out", str(out)]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) == 1


def test_solver_failure_exit_code(tmp_path):
    code = main(["run", "--problem", "nonlinear_sine_2d", "--max-dofs", "500",
                 "--newton-tol", "1e-30", "--out", str(tmp_path)])
    assert code == 2
    assert json.loads((tmp_path / "summary.json").read_text())["status"].startswith("failed")


def test_rates_on_synthetic_csv(tmp_path, capsys):
    path = tmp_path / "t.csv"
    x = [10, 20, 40, 80, 160, 320]
    path.write_text("dofs,eta\n" + "".join(f"{v},{1 / v!r}\n" for v in x))
    assert main(["rates", str(path), "--window", "6"]) == 0
    out = capsys.readouterr().out.strip()
    assert out.startswith("slope=-1.0000") and out.endswith("n=6")
    assert main(["rates", str(path)]) == 0
    assert capsys.readouterr().out.strip().endswith("n=3")


def test_rates_errors(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("dofs,eta\n1,1\n2,0.5\n4,0.25\n")
    assert main(["rates", str(path), "--y", "energy_error"]) == 1
    assert main(["rates", str(tmp_path / "nope.csv")]) == 1
    assert main(["rates", str(path)]) == 1          # one point in the default window


def test_rates_on_run_trace(tmp_path, capsys):
    _run(tmp_path, max_dofs=2000)
    capsys.readouterr()
    assert main(["rates", str(tmp_path / "trace.csv"), "--y", "energy_error"]) == 0
    slope = float(capsys.readouterr().out.split()[0].split("=")[1])
    assert -0.65 <= slope <= -0.35


def test_list_problems(capsys):
    assert main(["list-problems"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split("\t")[0] for l in lines] == problem_ids() and len(lines) == 5
    assert "lshape_poisson" in lines[0]


def test_export_mesh(tmp_path, capsys):
    _run(tmp_path)
    capsys.readouterr()
    assert main(["export-mesh", str(tmp_path), "--iteration", "0"]) == 0
    assert capsys.readouterr().out == (tmp_path / "mesh_0.txt").read_text()
    cols = read_trace_csv(tmp_path / "trace.csv")
    k = len(cols["k"]) - 1
    target = tmp_path / "m.txt"
    assert main(["export-mesh", str(tmp_path), "--iteration", str(k), "--output", str(target)]) == 0
    mesh = read_mesh(target)
    mesh.check_conformity()
    assert mesh.num_elements == cols["elements"][k]
    assert target.read_text() == (tmp_path / "final_mesh.txt").read_text()
    assert main(["export-mesh", str(tmp_path), "--iteration", str(k + 5)]) == 1
    assert main(["export-mesh", str(tmp_path / "nothing"), "--iteration", "0"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "afem", "list-problems"],
                         capture_output=True, text=True, timeout=60)
    assert res.returncode == 0 and "conv_diffusion_2d" in res.stdout
    res = subprocess.run([sys.executable, "-m", "afem", "run", "--problem", "lshape_poisson",
                          "--theta", "2", "--out", "unused"], capture_output=True, text=True, timeout=60)
    assert res.returncode == 1 and "theta" in res.stderr
