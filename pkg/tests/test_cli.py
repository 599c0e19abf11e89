import io
import json
from pathlib import Path

import pytest

from cdo_engine.cli import run

SPECS = Path(__file__).resolve().parent.parent / "specs"


def call(*argv):
    out = io.StringIO()
    code = run([str(a) for a in argv], out)
    return code, out.getvalue()


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_flat_chart_axioms_vacuous_with_zero_samples():
    code, text = call("check-axioms", "--chart", SPECS / "flat_2_0.toml", "--samples", "0")
    assert code == 0
    assert all(r["samples"] == 0 and r["status"] == "pass" for r in records(text))


def test_curved_chart_axioms():
    code, text = call("check-axioms", "--chart", SPECS / "curved_1_1.toml", "--samples", "10")
    assert code == 0, text
    assert {r["status"] for r in records(text)} == {"pass"}


def test_virasoro_text_output():
    code, text = call("virasoro", "--p", 2, "--q", 1, "--max-weight", 2, "--format", "text")
    assert code == 0
    assert "[PASS]" in text and "[FAIL]" not in text


def test_check_coord_with_diffeo_file():
    code, text = call("check-coord", "--diffeo", SPECS / "diffeos_2_0.toml", "--samples", "5")
    assert code == 0, text
    checks = [r["check"] for r in records(text)]
    assert "swap after shear composition" in checks


@pytest.mark.parametrize("name,expected", [("de_rham_2.toml", 0), ("de_rham_torsion.toml", 1)])
def test_cdr_exit_codes(name, expected):
    code, _ = call("cdr", "--chart", SPECS / name)
    assert code == expected


def test_q_lift_on_dolbeault_chart():
    code, text = call("q-lift", "--chart", SPECS / "dolbeault_2_1.toml")
    assert code == 0, text
    assert records(text)


@pytest.mark.parametrize("name", ["curved_1_1.toml", "pi_e_2_1.toml", "de_rham_2.toml"])
def test_cs_verify(name):
    code, text = call("cs-verify", "--chart", SPECS / name)
    assert code == 0, text


def test_genus_payload():
    code, text = call("genus", "--model", "cp1", "--bundle", "tm", "--order", 3)
    assert code == 0
    payload = records(text)[0]
    assert payload["series"] == [{"q": 0, "y": 0, "coeff": "2"}]
    assert payload["normalization"]["central charge"] == 0


def test_genus_refined_with_check():
    code, text = call("genus", "--model", "cp2", "--bundle", "etm", "--refined", "--check",
                      "--order", 2)
    assert code == 0, text
    payload = records(text)[0]
    q0 = {t["y"]: t["coeff"] for t in payload["series"] if t["q"] == 0}
    assert q0 == {0: "1", 1: "1", 2: "1"}


def test_character_count():
    code, text = call("character-count", "--p", 1, "--q", 1, "--order", 4)
    assert code == 0
    assert records(text)[0]["detail"]["counts"] == [1, 4, 12, 32, 76]


def test_selftest_subset():
    code, text = call("selftest", "--criteria", "3")
    assert code == 0, text


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["virasoro", "--p", "1"],
    ["virasoro", "--p", "-1", "--q", "0"],
    ["virasoro", "--p", "2", "--q", "0", "--omega", "b1*d(b2)"],
    ["virasoro", "--p", "1", "--q", "0", "--omega", "b1 +"],
    ["check-axioms", "--chart", "/nonexistent.toml"],
    ["q-lift", "--chart", str(SPECS / "flat_2_0.toml")],
    ["cdr", "--chart", str(SPECS / "flat_2_0.toml")],
    ["genus", "--model", "k3"],
    ["genus", "--model", "cp2", "--bundle", "o(1"],
    ["selftest", "--criteria", "99"],
    ["selftest", "--criteria", "a,b"],
])
def test_input_errors_exit_2(argv, capsys):
    code, _ = call(*argv)
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_bad_chart_file_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[chart]\nmodel = "coordinate"\np = 1\nq = 0\n[connection]\ngamma = [["b1 +* 2"]]\n')
    code, _ = call("check-axioms", "--chart", bad)
    assert code == 2
    assert "column" in capsys.readouterr().err


def test_malformed_toml(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[chart\n")
    code, _ = call("check-axioms", "--chart", bad)
    assert code == 2
    assert "line" in capsys.readouterr().err
