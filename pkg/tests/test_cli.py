from importlib import resources

import pytest

from meshbal.cli import main
from meshbal.report import COLUMNS
from meshbal.scenario import parse_scenario

SMALL = ["--builtin", "fourcell"]


def small_file(tmp_path):
    text = resources.files("meshbal").joinpath("data", "fourcell.scn").read_text()
    text = text.replace("duration_us = 6000000", "duration_us = 300000") \
               .replace("warmup_us = 2000000", "warmup_us = 100000")
    parse_scenario(text)
    path = tmp_path / "fourcell.scn"
    path.write_text(text)
    return path


def test_run_scenario_file(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert main(["run", "--scenario", str(small_file(tmp_path)), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == 2
    assert "rssi" in capsys.readouterr().out


def test_sweep_is_byte_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("MESHBAL_SEED", "3")
    args = ["sweep", *SMALL, "--var", "num_stations", "--values", "5,6",
            "--policies", "rssi,airtime+coop", "--reps", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()[1:]
    assert len(rows) == 8 and {r.split(",")[3] for r in rows} == {"3", "4"}


def test_policy_sweep_on_file_and_trace(tmp_path):
    trace = tmp_path / "t.tsv"
    out = tmp_path / "p.csv"
    assert main(["sweep", "--scenario", str(small_file(tmp_path)), "--var", "policy",
                 "--values", "rssi,airtime", "--trace", str(trace), "--out", str(out)]) == 0
    assert (tmp_path / "t.0.tsv").exists() and (tmp_path / "t.1.tsv").exists()
    first = (tmp_path / "t.0.tsv").read_text().splitlines()[0].split("\t")
    assert len(first) == 5


@pytest.mark.parametrize("argv, code", [
    (["run", "--bogus"], 1),
    ([], 1),
    (["run"], 1),
    (["sweep", *SMALL, "--var", "num_stations", "--values", "x"], 1),
    (["run", *SMALL, "--policies", "warp"], 1),
    (["run", "--builtin", "bogus"], 1),
    (["run", "--scenario", "/nonexistent/file.scn"], 2),
])
def test_error_exit_codes(argv, code, capsys):
    assert main(argv) == code
    assert capsys.readouterr().err.strip()


def test_scenario_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("[general]\nduration_us = 0\n")
    assert main(["run", "--scenario", str(bad)]) == 2
    assert "duration_us" in capsys.readouterr().err


def test_runtime_error_exit_3(tmp_path, capsys):
    out = tmp_path / "missing-dir" / "m.csv"
    assert main(["run", "--scenario", str(small_file(tmp_path)), "--out", str(out)]) == 3
    assert capsys.readouterr().err.strip()
    assert not out.exists()


def test_dump_defaults(capsys):
    assert main(["--dump-defaults"]) == 0
    parse_scenario(capsys.readouterr().out)
