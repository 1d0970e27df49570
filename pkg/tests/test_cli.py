"""Command-line front end: config parsing, exit codes, artifacts."""

import shutil
import subprocess

import pytest

from egorov_spin import cli
from egorov_spin.cli import ParseError, RunConfig, main, parse_config, run
from egorov_spin.weyl_grid import NumericalError


def _cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _csv_lines(out_dir, experiment):
    return (out_dir / f"{experiment}.csv").read_text().splitlines()


# ------------------------------------------------------------- parsing

def test_parse_minimal_config(tmp_path):
    path = _cfg(tmp_path, "experiment = spin-algebra-check\nn_symbols = 16\n")
    cfg = parse_config(path)
    assert cfg.experiment == "spin-algebra-check"
    assert cfg.n_symbols == 16
    assert cfg.seed == 0


def test_parse_comments_and_blank_lines(tmp_path):
    path = _cfg(tmp_path, "\n# a comment\nexperiment = flow-bounds\n"
                          "seed = 4  # inline\n\n")
    cfg = parse_config(path)
    assert cfg.seed == 4


def test_parse_unknown_key_names_line(tmp_path):
    path = _cfg(tmp_path, "experiment = spin-algebra-check\nwibble = 3\n")
    with pytest.raises(ParseError, match=r"run\.cfg:2: unknown key 'wibble'"):
        parse_config(path)


def test_parse_duplicate_key(tmp_path):
    path = _cfg(tmp_path, "experiment = flow-bounds\nseed = 1\nseed = 2\n")
    with pytest.raises(ParseError, match=r":3: duplicate key 'seed'"):
        parse_config(path)


def test_parse_bad_value(tmp_path):
    path = _cfg(tmp_path, "experiment = flow-bounds\neps = banana\n")
    with pytest.raises(ParseError, match=r":2: bad value for 'eps'"):
        parse_config(path)


def test_parse_missing_equals(tmp_path):
    path = _cfg(tmp_path, "experiment = flow-bounds\nfast\n")
    with pytest.raises(ParseError, match="expected 'key = value'"):
        parse_config(path)


def test_parse_requires_experiment(tmp_path):
    path = _cfg(tmp_path, "seed = 1\n")
    with pytest.raises(ParseError, match="no experiment given"):
        parse_config(path)


def test_parse_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot read config"):
        parse_config(str(tmp_path / "absent.cfg"))


def test_validate_positivity(tmp_path):
    path = _cfg(tmp_path, "experiment = spin-algebra-check\nthreshold = -1\n")
    with pytest.raises(ParseError, match="threshold must be positive"):
        parse_config(path)


def test_validate_grid_pair(tmp_path):
    path = _cfg(tmp_path, "experiment = egorov-order1\ngrid_n = 128\n")
    with pytest.raises(ParseError, match="given together"):
        parse_config(path)


def test_validate_profile_excludes_harmonic_fields(tmp_path):
    path = _cfg(tmp_path, "experiment = stern-gerlach\n"
                          "profile = sine, 1.0, 1.2, 2.0\nomega = 2.0\n")
    with pytest.raises(ParseError, match="profile replaces"):
        parse_config(path)


def test_validate_gamma_window(tmp_path):
    path = _cfg(tmp_path, "experiment = egorov-longtime\ngamma = 0.3\n"
                          "observable = n3-gauss\n")
    with pytest.raises(ParseError, match="admissible"):
        parse_config(path)


def test_validate_sweep_needs_four_eps(tmp_path):
    path = _cfg(tmp_path, "experiment = egorov-order1\neps = 0.5 0.25\n")
    with pytest.raises(ParseError, match="4 distinct eps"):
        parse_config(path)


def test_validate_single_eps_experiments(tmp_path):
    path = _cfg(tmp_path, "experiment = flow-bounds\neps = 0.5 0.25\n")
    with pytest.raises(ParseError, match="single eps"):
        parse_config(path)


# ----------------------------------------------------------- exit codes

def test_bad_flag_value_exits_two(capsys):
    assert main(["spin-algebra-check", "--eps", "nope"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_experiment_exits_two():
    with pytest.raises(SystemExit) as ex:
        main(["warp-drive"])
    assert ex.value.code == 2


def test_missing_config_file_exits_two(tmp_path, capsys):
    rc = main(["spin-algebra-check",
               "--config", str(tmp_path / "absent.cfg")])
    assert rc == 2
    assert "cannot read config" in capsys.readouterr().err


def test_conflicting_experiment_exits_two(tmp_path, capsys):
    path = _cfg(tmp_path, "experiment = moyal-order3\n")
    assert main(["spin-algebra-check", "--config", path]) == 2
    assert "conflicts" in capsys.readouterr().err


def test_numerical_failure_exits_three(monkeypatch, capsys):
    def boom(cfg, plan):
        raise NumericalError("power iteration stalled")

    monkeypatch.setitem(cli._RUNNERS, "spin-algebra-check", boom)
    assert run(RunConfig(experiment="spin-algebra-check")) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_runtime_grid_rejection_exits_two(tmp_path, capsys):
    # the box check runs per eps, after static validation has passed
    rc = main(["egorov-order1", "--eps", "0.5 0.25 0.125 0.0625",
               "--grid-n", "64", "--grid-l", "1.0", "--n-times", "1",
               "--out", str(tmp_path)])
    assert rc == 2
    assert "too small" in capsys.readouterr().err


# ------------------------------------------------------------ artifacts

def test_spin_algebra_run_and_artifacts(tmp_path, capsys):
    out = tmp_path / "a"
    rc = main(["spin-algebra-check", "--n-symbols", "32", "--seed", "7",
               "--out", str(out)])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out
    lines = _csv_lines(out, "spin-algebra-check")
    assert lines[0].startswith("# spin-algebra-check seed=7 ")
    assert lines[1] == "identity,max_residual,samples"
    assert len(lines) == 2 + 5
    stub = (out / "spin-algebra-check.plt").read_text()
    assert "spin-algebra-check.csv" in stub
    summary = (out / "spin-algebra-check_summary.txt").read_text()
    assert "PASS" in summary and "round-trip" in summary


def test_spin_algebra_deterministic(tmp_path):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["spin-algebra-check", "--n-symbols", "16",
                     "--seed", "3", "--out", str(out)]) == 0
        outs.append(_csv_lines(out, "spin-algebra-check"))
    assert outs[0][1:] == outs[1][1:]  # only the stamp line may differ


def test_spin_algebra_threshold_failure(tmp_path, capsys):
    out = tmp_path / "f"
    rc = main(["spin-algebra-check", "--n-symbols", "8",
               "--threshold", "1e-30", "--out", str(out)])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


def test_config_then_flag_precedence(tmp_path):
    path = _cfg(tmp_path, "experiment = spin-algebra-check\nseed = 1\n"
                          "n_symbols = 8\n")
    out = tmp_path / "p"
    rc = main(["--config", path, "--seed", "2", "--out", str(out)])
    assert rc == 0
    assert _csv_lines(out, "spin-algebra-check")[0].startswith(
        "# spin-algebra-check seed=2 ")


def test_flow_bounds_run(tmp_path, capsys):
    out = tmp_path / "fb"
    rc = main(["flow-bounds", "--eps", "0.01", "--n-states", "2",
               "--out", str(out)])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out
    lines = _csv_lines(out, "flow-bounds")
    assert lines[1] == "quantity,ratio_to_bound"
    assert len(lines) == 2 + 3


def test_stern_gerlach_run(tmp_path, capsys):
    out = tmp_path / "sg"
    rc = main(["stern-gerlach", "--n-bloch", "3", "--probe", "false",
               "--seed", "11", "--out", str(out)])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out
    lines = _csv_lines(out, "stern-gerlach")
    assert lines[1] == "s1,s2,s3,deflection,mean,max_rel_error"
    assert len(lines) == 2 + 3


def test_moyal_run(tmp_path, capsys):
    out = tmp_path / "m"
    rc = main(["moyal-order3", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "quartic" in text and "quadratic" in text and "PASS" in text


def test_exact_symbol_run_deterministic(tmp_path):
    rows = []
    for name in ("e1", "e2"):
        out = tmp_path / name
        rc = main(["exact-symbol", "--eps", "0.0625", "--t", "0.5",
                   "--out", str(out)])
        assert rc == 0
        lines = _csv_lines(out, "exact-symbol")
        assert lines[1] == "eps,t,gamma,error,floor,grid_N,grid_L,runtime_ms"
        assert len(lines) == 2 + 2  # t = 0 floor row plus the t = 0.5 row
        # drop the stamp and the runtime column, the rest must reproduce
        rows.append([ln.rsplit(",", 1)[0] for ln in lines[2:]])
    assert rows[0] == rows[1]
    summary = (tmp_path / "e1" / "exact-symbol_summary.txt").read_text()
    assert "PASS" in summary and "eps-independent" in summary


def test_state_corollary_run(tmp_path, capsys):
    out = tmp_path / "st"
    rc = main(["state-corollary", "--out", str(out)])
    assert rc == 0  # informational unless a threshold is given
    text = capsys.readouterr().out
    assert "quantum=" in text and "discrepancy=" in text
    assert (out / "state-corollary.csv").exists()


def test_sweep_run(tmp_path, capsys):
    out = tmp_path / "sw"
    rc = main(["egorov-order1", "--eps", "0.5 0.25 0.125 0.0625",
               "--sigma", "0.25", "--n-times", "1", "--out", str(out)])
    assert rc == 0
    assert "fit: slope = " in capsys.readouterr().out
    lines = _csv_lines(out, "egorov-order1")
    assert lines[1] == "eps,t,gamma,error,floor,grid_N,grid_L,runtime_ms"
    data = [ln.split(",") for ln in lines[2:]]
    assert len(data) == 8  # one t = 0 floor row plus one sample per eps
    assert sorted({float(r[0]) for r in data}) == [0.0625, 0.125, 0.25, 0.5]
    assert all(len(r) == 8 for r in data)
    pos = [r for r in data if float(r[1]) > 0.0]
    assert len(pos) == 4
    assert all(float(r[3]) > float(r[4]) for r in pos)  # error above floor


def test_console_script(tmp_path):
    exe = shutil.which("egorov-spin")
    assert exe, "console script not installed"
    out = tmp_path / "cs"
    proc = subprocess.run(
        [exe, "spin-algebra-check", "--n-symbols", "16", "--out", str(out)],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
    assert (out / "spin-algebra-check.csv").exists()
