import math
import subprocess
import sys

import pytest

from relbohm.cli import Options, main, run_command
from relbohm.scenario import corpus_scenario, parse_scenario

UNNORMALIZED = """\
[box]
L = 6.283185307179586
T = 10

[particles]
mass = 1

[terms]
(2, 0) | 0 0 0
(0, 1) | 1 0 0

[run]
initial = (1, 0.5, 0.5, 0.5)
s_max = 2
ds = 0.01
"""


def records(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if " = " in line and not line.startswith("#"):
            k, v = line.split(" = ", 1)
            out.setdefault(k.strip(), v.strip())
    return out


def test_verify_all_single_mode(tmp_path, capsys):
    assert main(["verify-all", "--scenario", "single_mode", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "checks.txt").read_text()
    assert text.startswith("# relbohm verify-all scenario=single_mode seed=0\n")
    assert "passed = false" not in text
    n_checks = text.count("[[check]]")
    assert n_checks == text.count("passed = true") and n_checks >= 14
    assert "FAIL" not in capsys.readouterr().out


def test_norm_unnormalized_closed_forms(tmp_path):
    path = tmp_path / "s.scn"
    path.write_text(UNNORMALIZED)
    assert main(["norm", "--scenario", str(path), "--out", str(tmp_path)]) == 0
    r = records((tmp_path / "norm.txt").read_text())
    assert float(r["kg_norm"]) == pytest.approx(5.0, rel=1e-14)
    # N = T (|c1|^2 / k0 + |c2|^2 / k0') with k0 = 1, k0' = sqrt 2
    assert float(r["N"]) == pytest.approx(10 * (4 + 1 / math.sqrt(2)), rel=1e-13)
    assert float(r["N_kg_normalized"]) == pytest.approx(10 * (4 + 1 / math.sqrt(2)) / 5, rel=1e-13)


def test_trajectories_zero_span(tmp_path):
    assert main(["trajectories", "--scenario", "entangled", "--s-max", "0", "--out", str(tmp_path)]) == 0
    for name in ("trajectories_local.tsv", "trajectories_nonlocal.tsv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert lines[1] == "configuration\tparticle\tparam\tt\tx\ty\tz\tcausal"
        body = lines[2:]
        assert len(body) == 2
        assert all(row.split("\t")[2] == "0" and row.endswith("\t-") for row in body)


def test_trajectory_table_columns(tmp_path):
    assert main(["trajectories", "--scenario", "single_mode", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "trajectories_nonlocal.tsv").read_text().splitlines()[2:]
    first = rows[0].split("\t")
    assert len(first) == 8
    assert [float(v) for v in first[3:7]] == [1.0, 0.5, 0.5, 0.5]
    assert {r.split("\t")[7] for r in rows[:-1]} == {"timelike"}
    assert "distance[0][0]" in (tmp_path / "trajectories.txt").read_text()


def test_currents_output(tmp_path):
    assert main(["currents", "--scenario", "interference", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "currents.tsv").read_text().splitlines()
    assert lines[1].split("\t") == ["particle", "t", "x", "y", "z", "j0", "j1", "j2", "j3", "div_analytic", "div_fd"]
    assert len(lines) == 2 + 2 * 10**3


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["equivariance", "--scenario", "single_mode", "--samples", "300", "--seed", "9",
                     "--out", str(out)]) == 0
        assert main(["trajectories", "--scenario", "interference", "--out", str(out)]) == 0
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert "seed=9" in (a / "equivariance.txt").read_text().splitlines()[0]


def test_failure_exit_code(tmp_path, capsys):
    # a coarse step breaks the local/nonlocal agreement
    assert main(["trajectories", "--scenario", "spacelike", "--ds", "0.5", "--out", str(tmp_path)]) == 1
    assert "FAIL reparameterization_distance" in capsys.readouterr().err
    assert "passed = false" in (tmp_path / "trajectories.txt").read_text()


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text(UNNORMALIZED.replace("(0, 1) | 1 0 0", "(0, 1) | 1 0 0 | 0 0 1"))
    assert main(["norm", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert "term 2" in capsys.readouterr().err
    assert main(["norm", "--scenario", "no_such_thing"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["norm", "--scenario", "single_mode", "--seed", "-1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["bogus", "--scenario", "single_mode"])
    assert exc.value.code == 2


def test_run_command_api():
    status, checks, files = run_command("norm", corpus_scenario("product"), Options(seed=5))
    assert status == 0 and all(c.passed for c in checks)
    assert files["norm.txt"].startswith("# relbohm norm scenario=product seed=5")
    with pytest.raises(ValueError):
        run_command("plot", corpus_scenario("product"))


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "relbohm", "norm", "--scenario", "single_mode", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("PASS ")


def test_equivariance_needs_parameter(tmp_path):
    sc = parse_scenario(UNNORMALIZED)
    path = tmp_path / "s.scn"
    path.write_text(UNNORMALIZED)
    assert sc.run.equivariance_s is None
    assert main(["equivariance", "--scenario", str(path), "--out", str(tmp_path)]) == 2


def test_strict_profile(tmp_path):
    assert main(["verify-all", "--scenario", "product", "--tolerance-profile", "strict", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "checks.txt").read_text()
    assert "tolerance = 1e-13" in text
