import re
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from derivedint.cli import COMMANDS, Report, ScenarioError, main, parse_report, parse_scenario, run
from derivedint.config import RunConfig
from conftest import fixture_path


def write(tmp_path, text, name="case.scn"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -- scenario parsing ------------------------------------------------------

@pytest.mark.parametrize("text, line, col, fragment", [
    ("[embedding\nvariables = x:1\n", 1, 11, "unterminated"),
    ("[bogus]\n", 1, 2, "unknown section"),
    ("variables = x:1\n", 1, 1, "outside any section"),
    ("[embedding]\nvariables x:1\n", 2, 1, "key = value"),
    ("[embedding]\nvariables = x:1\nvariables = y:1\n", 3, 1, "repeated"),
    ("[embedding]\nvariables =\n", 2, 12, "empty value"),
    ("[embedding]\n[embedding]\n", 2, 1, "repeated"),
])
def test_parse_errors_are_located(text, line, col, fragment):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text, "s.scn")
    err = info.value
    assert (err.line, err.column) == (line, col)
    assert fragment in str(err)
    assert str(err).startswith(f"s.scn:{line}:{col}:")


def test_comments_and_blank_lines_are_ignored():
    sc = parse_scenario("# head\n\n[embedding]  # trailing\nvariables = x:1, y:1  # decl\nsection = x\n")
    assert sc.declared("embedding", "variables") == [("x", 1), ("y", 1)]
    assert [t for t, _ in sc.items("embedding", "section")] == ["x"]


def test_item_columns_point_into_the_line():
    text = "[embedding]\nvariables = x:1,  y:q\nsection = x\n"
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text).declared("embedding", "variables")
    assert info.value.line == 2
    assert text.splitlines()[1][info.value.column - 1:].startswith("y:q")


def test_unknown_symbol_exits_2_with_location(tmp_path):
    path = write(tmp_path, "[embedding]\nvariables = x:1, y:1\nsection = x, w*y\n")
    rep, code, diag = run("resolve-check", path)
    assert rep is None and code == 2
    assert re.match(re.escape(path) + r":3:\d+: ", diag)
    assert "w" in diag


@pytest.mark.parametrize("command", ["obstruct", "resolve-check", "mc-check"])
def test_missing_sections_exit_2(tmp_path, command):
    path = write(tmp_path, "[options]\nwmax = 2\n")
    rep, code, diag = run(command, path)
    assert rep is None and code == 2 and diag


def test_bad_option_values_exit_2(tmp_path):
    path = write(tmp_path, "[embedding]\nvariables = x:1\nsection = x\n[options]\nwmax = -1\n")
    rep, code, diag = run("resolve-check", path)
    assert code == 2 and "wmax" in diag
    rep, code, diag = run("resolve-check", str(fixture_path("point-in-line")), {"bogus": 1})
    assert code == 2 and "bogus" in diag


def test_missing_file_exits_2(tmp_path):
    rep, code, diag = run("tor", str(tmp_path / "absent.scn"))
    assert rep is None and code == 2 and diag


# -- configuration ---------------------------------------------------------

def test_config_merging():
    cfg = RunConfig().merged({"nerve-depth": 2, "wmax": None, "uea_order": 1})
    assert (cfg.nerve_depth, cfg.wmax, cfg.uea_order) == (2, RunConfig().wmax, 1)
    with pytest.raises(KeyError):
        RunConfig().merged({"colour": 1})
    for bad in ({"k": -1}, {"jobs": 0}, {"window": 0}):
        with pytest.raises(ValueError):
            RunConfig().merged(bad)


# -- reports ---------------------------------------------------------------

cell = st.text(alphabet="abcxyz019-+()^*[]¹", min_size=1, max_size=8)


@given(st.lists(st.tuples(cell, st.sampled_from([True, False, None])), max_size=4),
       st.lists(st.lists(cell, min_size=2, max_size=2), max_size=3),
       st.lists(cell, max_size=3))
def test_report_round_trip(checks, rows, verdicts):
    rep = Report("tor", "toy")
    for name, ok in checks:
        rep.check(name, ok)
    t = rep.table("tbl", "a", "b")
    for r in rows:
        t.add(*r)
    rep.verdicts += verdicts
    rep.timing = 1.25
    back = parse_report(rep.render())
    assert back.body() == rep.body()
    assert back.status == rep.status and back.timing == 1.25


def test_report_rejects_inconsistent_status():
    rep = Report("tor", "toy")
    rep.check("thing", False)
    text = rep.render().replace("status: fail", "status: pass")
    with pytest.raises(ValueError):
        parse_report(text)
    with pytest.raises(ValueError):
        parse_report("nonsense\n")


def test_cells_reject_separators():
    rep = Report("tor", "toy")
    t = rep.table("tbl", "a")
    with pytest.raises(ValueError):
        t.add("x | y")
    with pytest.raises(ValueError):
        t.add(1, 2)


@pytest.mark.parametrize("command, name", [
    ("resolve-check", "point-in-plane"), ("tor", "hypersurface"), ("obstruct", "line-in-p2"),
    ("mc-check", "abelian-sheaf"), ("tw-check", "point-in-line"),
])
def test_reports_are_deterministic_and_parse(command, name):
    first, code1, _ = run(command, str(fixture_path(name)))
    second, code2, _ = run(command, str(fixture_path(name)))
    assert code1 == code2 == 0
    assert first.body() == second.body()
    assert parse_report(first.render()).body() == first.body()


# -- command outcomes on the fixtures ---------------------------------------

EXPECTED = [
    ("resolve-check", "point-in-plane", 0, None),
    ("resolve-check", "hypersurface", 0, None),
    ("resolve-check", "non-regular", 1, r"weight \d+: H\^-1 has dim 1 \(representative .+\)"),
    ("ce-check", "point-in-line", 0, r"H0 dims per weight at k=2: \(1,1,1,0,0\)"),
    ("ce-check", "point-in-plane", 0, r"H0 dims per weight at k=2: \(1,2,3,0,0\)"),
    ("selfint", "point-in-plane", 0, None),
    ("tor", "point-in-plane", 0, r"Tor dims \(1,2,1\)"),
    ("tor", "point-in-line", 0, r"Tor dims \(1,1\)"),
    ("algebroid", "point-in-line", 0, r"Ext dims \(1,1\)"),
    ("tw-check", "heisenberg-sheaf", 0, None),
    ("mc-check", "abelian-sheaf", 0, None),
    ("mc-check", "line-in-p2", 0, None),
    ("obstruct", "conic-in-p2", 0, r"tower stops: \[a1\] does not vanish"),
    ("obstruct", "diagonal-p1", 0, r"tower stops: \[l2\] does not vanish"),
    ("obstruct", "neighborhood-order2", 0, r"\[l2\] vanishes"),
]


@pytest.mark.parametrize("command, name, code, verdict", EXPECTED)
def test_fixture_outcomes(command, name, code, verdict):
    rep, got, diag = run(command, str(fixture_path(name)))
    assert rep is not None, diag
    assert got == code
    if verdict:
        assert any(re.match(verdict, v) for v in rep.verdicts), rep.verdicts


def test_every_command_runs_on_some_fixture():
    covered = {c for c, *_ in EXPECTED}
    assert covered == set(COMMANDS)


def test_main_writes_report(tmp_path, capsys):
    out = tmp_path / "r.txt"
    code = main(["tor", str(fixture_path("point-in-plane")), "--wmax", "3", "--report", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert out.read_text() == printed
    rep = parse_report(printed)
    assert rep.command == "tor" and rep.verdicts == ["Tor dims (1,2,1) (weights <= 3)"]


def test_module_entry_point_exit_codes():
    def call(*args):
        return subprocess.run([sys.executable, "-m", "derivedint", *args], capture_output=True, text=True)
    ok = call("resolve-check", str(fixture_path("point-in-line")))
    assert ok.returncode == 0 and ok.stdout.startswith("report 1")
    bad = call("resolve-check", str(fixture_path("non-regular")))
    assert bad.returncode == 1 and "status: fail" in bad.stdout
    usage = call("resolve-check", str(fixture_path("abelian-sheaf")))
    assert usage.returncode == 2 and "missing section [embedding]" in usage.stderr
