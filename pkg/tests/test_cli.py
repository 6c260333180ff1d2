import subprocess
import sys
from pathlib import Path

import pytest

from gqcopt import cli
from gqcopt.errors import OracleNonConvergence

DATA = Path(__file__).parent / "data"


def parse_summary(line):
    return dict(kv.split("=", 1) for kv in line.split())


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out.strip().splitlines()
    return code, out


def test_min_mdp_practical(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code, lines = run(["--mode", "min-mdp", "--generate", "8,4,0.9,7", "--iters", "10000", "--eta", "0.5",
                       "--out", str(out), "--assert"], capsys)
    assert code == 0
    s = parse_summary(lines[-1])
    assert s["theory_mode"] == "false" and float(s["achieved"]) <= 1e-3
    assert float(s["ratio"]) == pytest.approx(float(s["achieved"]) / float(s["bound"]))
    assert out.read_text().splitlines()[0] == "t,value,gap,q_step,flags"
    assert len(out.read_text().splitlines()) == 10001
    assert (tmp_path / "run.csv.summary").read_text().strip() == lines[-1]


def test_same_config_gives_identical_csv(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli.main(["--mode", "minimax-game", "--generate", "3,2,2,0.5,1", "--iters", "300",
                         "--out", str(p)]) == 0
    capsys.readouterr()
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_property_suite(capsys):
    code, lines = run(["--mode", "property-suite", "--cases", "200"], capsys)
    assert code == 0
    s = parse_summary(lines[-1])
    assert s["passed"] == s["total"]


def test_min_finite_horizon(capsys):
    code, lines = run(["--mode", "min-finite-horizon", "--generate", "3,2,4,1", "--iters", "3000",
                       "--eta", "0.5", "--assert"], capsys)
    assert code == 0


def test_certify_modes(capsys):
    code, lines = run(["--mode", "certify-gqc", "--instance", str(DATA / "two_state.mdp"), "--assert"], capsys)
    assert code == 0 and parse_summary(lines[-1])["holds"] == "true"
    code, lines = run(["--mode", "certify-gqcc", "--generate", "3,2,2,0.5,0", "--iters", "20", "--assert"],
                      capsys)
    s = parse_summary(lines[-1])
    assert code == 0 and float(s["max_psi_sum"]) <= 2 + 1e-9


def test_config_errors(tmp_path, capsys):
    assert cli.main(["--mode", "min-mdp", "--generate", "8,4,0.9"]) == 2
    assert cli.main(["--mode", "min-mdp"]) == 2
    truncated = tmp_path / "bad.mdp"
    truncated.write_text("\n".join((DATA / "two_state.mdp").read_text().splitlines()[:-3]))
    assert cli.main(["--mode", "min-mdp", "--instance", str(truncated), "--eta", "0.5"]) == 2
    assert cli.main(["--mode", "minimax-game", "--instance", str(DATA / "two_state.mdp")]) == 2
    assert "error:" in capsys.readouterr().err


def test_assert_failure_exit_code(capsys):
    # the theory step barely moves in 100 iterations
    code, lines = run(["--mode", "min-mdp", "--generate", "4,2,0.9,0", "--iters", "100", "--assert"], capsys)
    assert code == 4
    assert parse_summary(lines[-1])["pass"] == "false"


def test_oracle_failure_exit_code(monkeypatch, capsys):
    def fail(*args, **kwargs):
        raise OracleNonConvergence("stalled", best_gap=1.0, iterations=1)

    monkeypatch.setattr(cli, "shapley_fixed_point", fail)
    assert cli.main(["--mode", "minimax-game", "--generate", "2,2,2,0.5,0", "--iters", "10"]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "gqcopt", "--mode", "certify-gqc", "--generate", "3,2,0.5,0",
                          "--iters", "5"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("mode=certify-gqc")
