import csv
import io
import json
import math
import subprocess
import sys

import pytest

from qwhit import QwhitError
from qwhit.cli import main, parse_coin, parse_init

HIT_KEYS = {"p0", "pn", "solver", "iterations", "residual_norm", "method"}
ITER_KEYS = {"p0", "pn", "residual", "steps", "converged", "method"}
COMPARE_HEADER = "method,p0,wall_time,iterations,residual,disagrees_with"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_coin():
    c = parse_coin("hadamard")
    assert c.theta == pytest.approx(math.pi)
    c = parse_coin("a=0.70710678,b=0.70710678,theta=0")
    assert abs(c.a) ** 2 + abs(c.b) ** 2 == pytest.approx(1, abs=1e-15)
    assert parse_coin("a=0.6,b=0.8j").b == 0.8j
    assert parse_coin("a=0.3,b=0.7", "l1").constraint == "l1"
    for bad in ("a=0.5,b=0.5", "a=1,b=0", "x=1", "a=foo,b=1", "a=0.6"):
        with pytest.raises(QwhitError):
            parse_coin(bad)


def test_parse_init():
    assert parse_init("basis:2:R").transient(4)[3] == 1
    assert parse_init("random-real:3").is_real(5)
    assert not parse_init("random:3").is_real(5)
    assert parse_init("explicit:0.6,0.8j").transient(2)[1] == 0.8j
    for bad in ("basis:x:L", "blob:1", "explicit:1,1"):
        with pytest.raises(QwhitError):
            parse_init(bad).transient(2)


def test_hit_n2(capsys):
    code, out, _ = run(capsys, "hit", "--n", "2", "--coin", "hadamard", "--init", "basis:1:L",
                       "--method", "direct")
    doc = json.loads(out)
    assert code == 0 and set(doc) == HIT_KEYS
    assert doc["p0"] == pytest.approx(0.5, abs=1e-14)


def test_hit_iterate_schema(capsys):
    code, out, _ = run(capsys, "hit", "--n", "8", "--method", "iterate")
    doc = json.loads(out)
    assert code == 0 and set(doc) == ITER_KEYS and doc["converged"] is True


def test_hit_n200_iterate(capsys):
    code, out, err = run(capsys, "hit", "--n", "200", "--coin", "hadamard", "--init",
                         "basis:1:L", "--method", "iterate", "--eps", "1e-10")
    doc = json.loads(out)
    assert abs(doc["p0"] - 1 / math.sqrt(2)) <= 0.02
    # the default 10^6-step cap ends before eps is reached at this size
    assert code == 2 and "not converged" in err


@pytest.mark.parametrize("argv", [["--n", "0"], ["--n", "1"], []])
def test_hit_invalid_n(capsys, argv):
    code, _, err = run(capsys, "hit", *argv)
    assert code == 1
    assert err.count("\n") == 1


def test_hit_invalid_n_message(capsys):
    assert run(capsys, "hit", "--n", "0")[2].strip() == "qwhit: n must be ≥ 2"


def test_bad_flag_is_invalid_input(capsys):
    assert run(capsys, "hit", "--n", "3", "--method", "magic")[0] == 1
    assert run(capsys, "nonsense")[0] == 1


def test_hit_non_convergence(capsys):
    code, out, err = run(capsys, "hit", "--n", "12", "--method", "cgnr", "--max-iters", "2")
    assert code == 2 and json.loads(out)["iterations"] == 2 and "not converged" in err


def test_config_file_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n": 2, "coin": "a=0.6,b=0.8", "method": "direct"}))
    code, out, _ = run(capsys, "--config", str(cfg), "hit")
    assert code == 0 and json.loads(out)["p0"] == pytest.approx(0.36)
    code, out, _ = run(capsys, "--config", str(cfg), "hit", "--coin", "hadamard")
    assert json.loads(out)["p0"] == pytest.approx(0.5)
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "--config", str(cfg), "hit")[0] == 1


def test_output_file(tmp_path, capsys):
    path = tmp_path / "hit.json"
    code, out, _ = run(capsys, "hit", "--n", "3", "--output", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text(encoding="utf-8"))["solver"] == "direct"


def read_compare(text):
    assert text.splitlines()[0] == COMPARE_HEADER
    return list(csv.DictReader(io.StringIO(text)))


def test_compare_n10(capsys):
    code, out, _ = run(capsys, "compare", "--n", "10", "--methods", "iterate,direct,cgnr")
    rows = read_compare(out)
    p = [float(r["p0"]) for r in rows]
    assert code == 0 and max(p) - min(p) <= 1e-8
    assert all(r["disagrees_with"] == "" for r in rows)


def test_compare_n2_all_methods(capsys):
    code, out, _ = run(capsys, "compare", "--n", "2",
                       "--methods", "iterate,direct,cgnr,neumann,hhl")
    rows = read_compare(out)
    assert code == 0 and len(rows) == 5
    assert all(float(r["p0"]) == pytest.approx(0.5, abs=1e-12) for r in rows)


def test_compare_flags_disagreement(capsys):
    code, out, _ = run(capsys, "compare", "--n", "12", "--methods", "direct,iterate",
                       "--eps", "1e-3")
    rows = read_compare(out)
    assert rows[0]["disagrees_with"] == "iterate"


def test_compare_hhl_budget(capsys):
    code, _, err = run(capsys, "compare", "--n", "10", "--methods", "direct,hhl")
    assert code == 1 and "hhl budget: n ≤ 5" in err


def test_compare_timing_column(capsys):
    _, out, _ = run(capsys, "compare", "--n", "4", "--methods", "direct", "--timing")
    assert float(read_compare(out)[0]["wall_time"]) >= 0


def test_hhl_n3(capsys):
    code, out, _ = run(capsys, "hhl", "--n", "3", "--coin", "hadamard", "--init", "basis:1:L")
    doc = json.loads(out)
    assert code == 0 and abs(doc["p_estimate"] - 2 / 3) <= 0.05
    assert doc["config"]["clock_qubits"] == 8 and "wall_time" not in doc
    _, out, _ = run(capsys, "hhl", "--n", "3", "--timing")
    assert json.loads(out)["wall_time"] > 0


def test_hhl_complex_init(capsys):
    code, _, err = run(capsys, "hhl", "--n", "3", "--init", "random:4")
    assert code == 1 and "real amplitudes" in err


def test_hhl_sampling_deterministic(capsys):
    argv = ["hhl", "--n", "3", "--shots", "100000", "--seed", "11"]
    first = run(capsys, *argv)[1]
    assert first == run(capsys, *argv)[1]
    assert json.loads(first)["standard_error"] > 0


def test_sweep_single_point(capsys):
    code, out, _ = run(capsys, "sweep-kappa", "--coin", "a=0.70710678,b=0.70710678,theta=0",
                       "--n-min", "3", "--n-max", "3")
    csv_part, json_part = out.split("{", 1)
    assert code == 0 and len(csv_part.strip().splitlines()) == 2
    assert json.loads("{" + json_part)["fit_error"] == ">= 3 samples required"


def test_sweep_files_deterministic(tmp_path, capsys):
    paths = []
    for tag in "ab":
        csv_path, js, dat = (tmp_path / f"{tag}.csv", tmp_path / f"{tag}.json",
                             tmp_path / f"{tag}.dat")
        code, _, _ = run(capsys, "sweep-kappa", "--coin", "a=0.70710678,b=0.70710678,theta=0",
                         "--n-min", "3", "--n-max", "15", "--csv", str(csv_path),
                         "--output", str(js), "--plot-data", str(dat))
        assert code == 0
        paths.append((csv_path, js, dat))
    for p, q in zip(*paths):
        assert p.read_bytes() == q.read_bytes()
    summary = json.loads(paths[0][1].read_text())
    assert {"exponent", "rms_log_residual", "failures"} <= set(summary)
    rows = [l.split() for l in paths[0][2].read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 13 and all(len(r) == 3 for r in rows)


def test_sweep_batch(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep-kappa", "--random-coins", "2", "--seed", "5",
                       "--n-min", "3", "--n-max", "8", "--csv", str(tmp_path / "k.csv"))
    doc = json.loads(out)
    assert code == 0 and len(doc["coins"]) == 2
    assert all(abs(complex(*c["coin"]["a"])) >= 1 / math.sqrt(2) for c in doc["coins"])
    assert (tmp_path / "k_coin1.csv").exists()


def test_sweep_l1_constraint(capsys):
    code, out, _ = run(capsys, "sweep-kappa", "--coin", "a=0.75,b=0.25", "--constraint", "l1",
                       "--n-min", "3", "--n-max", "6", "--output", "-")
    assert code == 0


def test_sweep_invalid_range(capsys):
    assert run(capsys, "sweep-kappa", "--n-min", "2", "--n-max", "1")[0] == 1


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "qwhit.cli", "hit", "--n", "2"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["p0"] == pytest.approx(0.5)
