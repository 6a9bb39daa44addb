import pytest

from cli import load_atoms, main
from timeset import parse_region


@pytest.fixture
def ramp_csv(tmp_path):
    path = tmp_path / "ramp.csv"
    path.write_text("t,x\n0,0\n12,12\n", encoding="utf-8")
    return path


def test_load_atoms_inline_and_file(tmp_path):
    assert load_atoms("p=[1,inf);q=(0,1)")["q"] == parse_region("(0,1)")
    path = tmp_path / "atoms.cfg"
    path.write_text("p = [2,4]\n", encoding="utf-8")
    assert load_atoms(str(path))["p"] == parse_region("[2,4]")


def test_eval_prints_timeset(ramp_csv, capsys):
    code = main(["eval", "--formula", "F[1,2] p", "--trace", str(ramp_csv), "--atoms", "p=[3,5]", "--horizon", "10"])
    assert code == 0
    assert "[1,4]" in capsys.readouterr().out


def test_eval_discrete_projects_pl_trace(ramp_csv, capsys):
    code = main(["eval-discrete", "--formula", "p", "--trace", str(ramp_csv), "--atoms", "p=[2,4]", "--n", "1"])
    assert code == 0
    assert "FFTTTFFFFFFFF" in capsys.readouterr().out


def test_input_errors_exit_with_two(ramp_csv, capsys):
    assert main(["eval", "--formula", "p &", "--trace", str(ramp_csv)]) == 2
    assert main(["eval", "--formula", "p", "--trace", "missing.csv", "--atoms", "p=[0,1]"]) == 2
    assert main(["eval-discrete", "--formula", "p", "--trace", str(ramp_csv), "--atoms", "p=[0,1]"]) == 2
    assert "Error" in capsys.readouterr().err


def test_mc_and_check_sde(capsys):
    code = main(["mc", "--formula", "!F(0,1) p", "--atoms", "p=(0,inf)", "--n", "2", "--trials", "200", "--seed", "1"])
    assert code == 0
    assert "discrete-2" in capsys.readouterr().out
    assert main(["check-sde", "--sampler", "bm"]) == 0
    assert main(["check-sde", "--sampler", "ou(1)"]) == 1


def test_repro_writes_reports(tmp_path):
    code = main(["repro", "flat-zero", "--trials", "500", "--seed", "3", "--out", str(tmp_path)])
    assert code in (0, 1)
    assert (tmp_path / "flat-zero.csv").exists()
    assert (tmp_path / "flat-zero.json").exists()
