import json
import subprocess
import sys

import numpy as np
import pytest

from heiskam.cli import csv_text, dump_json, fmt, main
from heiskam.lattice_fourier import TorusField


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cohomology_output(capsys):
    code, out, _ = run(["cohomology", "--n", "2"], capsys)
    assert code == 0
    assert json.loads(out) == {"n": 2, "cocycles": 9, "coboundaries": 2, "h1": 7}


def test_float_format_round_trips():
    for x in (0.1, np.pi, 1e-300, -2.5e17):
        assert float(fmt(x)) == x
    assert dump_json({"b": 0.1, "a": [1, 2.0]}) == dump_json({"a": [1, 2.0], "b": 0.1})


def test_csv_has_version_line():
    text = csv_text("demo", [["a", "b"], [1, 0.5]])
    assert text.splitlines()[0] == "# format: demo/1"
    assert text.splitlines()[2] == "1,0.5"


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["cohomology", "--bogus"])
    assert info.value.code == 2


def test_empty_input_is_input_error(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert run(["kam-run", "--config", str(empty)], capsys)[0] == 2
    assert run(["solve-torus", "--in", str(empty), str(empty)], capsys)[0] == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kam": {"nope": 1}}))
    assert run(["kam-run", "--config", str(cfg)], capsys)[0] == 2


def test_solve_torus_from_files(tmp_path, capsys, pair):
    from heiskam.lattice_fourier import coboundary_multiplier, random_field
    P = random_field(np.random.default_rng(0), 2, 3)
    (tmp_path / "f.json").write_text(coboundary_multiplier(P, "tau", pair).to_json())
    (tmp_path / "g.json").write_text(coboundary_multiplier(P, "eta", pair).to_json())
    code, _, _ = run(["solve-torus", "--in", str(tmp_path / "f.json"), str(tmp_path / "g.json"),
                      "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    got = TorusField.from_json((tmp_path / "o" / "P.json").read_text())
    assert np.abs(got.coeffs - P.coeffs).max() <= 1e-13
    lines = (tmp_path / "o" / "solve.csv").read_text().splitlines()
    assert lines[0] == "# format: heiskam-torus-solve/1" and len(lines) == 6


def test_solve_torus_obstruction_exit_code(tmp_path, capsys):
    f = TorusField.from_modes(2, 2, {(0, 0, 1, 0): 1.0})
    (tmp_path / "f.json").write_text(f.to_json())
    (tmp_path / "g.json").write_text(TorusField.zeros(2, 2).to_json())
    code, _, err = run(["solve-torus", "--in", str(tmp_path / "f.json"), str(tmp_path / "g.json")], capsys)
    # an obstructed right-hand side is outside the solver's input space
    assert code == 2 and "ObstructionNonzero" in err


def test_schrodinger_transfer_and_grid_dump(tmp_path, capsys):
    code, out, _ = run(["solve-schrodinger", "--op", "transfer", "--P", "128", "--out", str(tmp_path)], capsys)
    d = json.loads(out)
    assert code == 0 and d["residual_tau"] <= 1e-7 and d["written"] == ["P.bin"]
    code, out, _ = run(["solve-schrodinger", "--op", "ltau", "--in", str(tmp_path / "P.bin")], capsys)
    assert code == 0 and json.loads(out)["l2"]["Ltau"] > 0


def test_kam_run_trace(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": {"kind": "manufactured", "eps0": 1e-3, "seed": 0}}))
    out = tmp_path / "trace.csv"
    code, text, _ = run(["kam-run", "--config", str(cfg), "--out", str(out)], capsys)
    assert code == 0 and json.loads(text)["status"] == "converged"
    lines = out.read_text().splitlines()
    assert lines[0] == "# format: heiskam-kam-trace/1"
    assert lines[1].split(",")[:5] == ["n", "t", "eps", "delta_r", "K"]


def test_kam_run_negative_control_exit_code(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": {"kind": "obstructed", "value": 1e-3}}))
    code, text, _ = run(["kam-run", "--config", str(cfg)], capsys)
    assert code == 3 and json.loads(text)["status"] != "converged"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "heiskam.cli", "diophantine-check"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["c"] == pytest.approx(0.19137191714035978, rel=1e-12)
