import csv
import io
import json
import subprocess
import sys

import pytest

from duotoc.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, list(csv.reader(io.StringIO(out.out))), out.out, out.err


def check_floats(rows):
    for row in rows[1:]:
        for cell in row:
            try:
                v = float(cell)
            except ValueError:
                continue
            if "." in cell or "e" in cell:
                assert cell == format(v, ".17g")


def test_gate(capsys, tmp_path):
    path = tmp_path / "g.json"
    code, rows, _, _ = run(["gate", "--seed", "3", "--eps", "0.2", "--save", str(path)], capsys)
    assert code == 0
    assert rows[0] == ["q", "unitarity_deviation", "dual_unitary", "E_lin", "z1"]
    assert rows[1][2] == "false"
    code, rows2, _, _ = run(["gate", "--gate", str(path)], capsys)
    assert code == 0 and rows2[1][3] == rows[1][3]


def test_amplitudes_columns(capsys):
    code, rows, _, _ = run(["amplitudes", "--seed", "1", "--eps", "0.3", "--k-max", "6"], capsys)
    assert code == 0
    assert rows[0] == ["k", "B", "z", "lower_bound", "below_lower_bound", "z_bound", "above_z_bound"]
    assert [r[0] for r in rows[1:]] == [str(k) for k in range(1, 7)]
    check_floats(rows)


@pytest.mark.parametrize("engine", ["brute", "mcs", "closed1", "closed2"])
def test_otoc_engines_agree_at_a_point(engine, capsys):
    code, rows, _, _ = run(["otoc", "--engine", engine, "--seed", "2", "--eps", "0.3",
                            "--n", "1", "--m", "5"], capsys)
    assert code == 0
    assert rows[0] == ["x", "t", "n", "m", "parity", "value", "engine"]
    assert rows[1][:4] == ["5", "5", "1", "5"]
    if engine == "closed2":
        # on the light cone only z_1 enters, so the two-step form equals the projected value
        ref = main(["otoc", "--engine", "mcs", "--seed", "2", "--eps", "0.3", "--n", "1", "--m", "5"])
        mcs_rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert float(rows[1][5]) == pytest.approx(float(mcs_rows[1][5]), abs=1e-10) and ref == 0


def test_otoc_grid_and_workers_are_deterministic(capsys):
    args = ["otoc", "--engine", "mcs", "--z", "0.1,0.05", "--grid=-3:3,1:6"]
    _, _, a, _ = run(args, capsys)
    _, _, b, _ = run(args + ["--workers", "4"], capsys)
    assert a == b
    rows = list(csv.reader(io.StringIO(a)))
    assert all((int(r[1]) - int(r[0])) % 2 == 0 for r in rows[1:])


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"engine": "closed1", "z": "0.2", "n": 2, "m": 7}))
    _, rows, _, _ = run(["otoc", "--config", str(cfg)], capsys)
    assert rows[1][6] == "closed1"
    _, rows, _, _ = run(["otoc", "--config", str(cfg), "--m", "9"], capsys)
    assert rows[1][3] == "9"


def test_fit_from_amplitudes_and_from_csv(capsys, tmp_path):
    code, rows, _, _ = run(["fit", "--z", "0.1", "--t", "256"], capsys)
    assert code == 0 and rows[1][9] == "true"
    assert float(rows[1][1]) == pytest.approx(9 / 11, rel=0.02)
    out = tmp_path / "grid.csv"
    run(["otoc", "--z", "0.1", "--grid=-199:200,200:200", "--out", str(out)], capsys)
    code, rows2, _, _ = run(["fit", "--input", str(out), "--z", "0.1"], capsys)
    assert code == 0 and float(rows2[1][1]) == pytest.approx(9 / 11, rel=0.02)


def test_scan(capsys):
    code, rows, _, _ = run(["scan", "--seed", "3", "--eps-list", "0,0.3", "--t-fit", "128",
                            "--k-max", "6"], capsys)
    assert code == 0
    assert rows[1][-1] == "dual-unitary: no front fit (v_B = 1)"
    assert rows[2][-1] == ""


def test_early_time(capsys):
    code, rows, _, _ = run(["early-time", "--seed", "5", "--eps", "0.2", "--m-max", "50"], capsys)
    assert code == 0 and len(rows) == 51
    assert rows[0] == ["t", "C", "deviation", "t_over_tau", "tau"]


def test_errors_exit_two(capsys):
    assert main(["otoc", "--engine", "closed1", "--z", "0.1", "--n", "2", "--m", "3",
                 "--parity", "-1"]) == 2
    assert main(["otoc", "--engine", "mcs", "--z", "0.1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_reruns_are_bit_identical():
    cmd = [sys.executable, "-m", "duotoc", "amplitudes", "--seed", "7", "--eps", "0.25"]
    a = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert a == b and a.startswith("k,B,z")
