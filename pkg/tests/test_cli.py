from __future__ import annotations

import csv
import io
import json
import re
import shutil
import subprocess
import sys
from importlib import resources

import pytest

from depwarden.catalog import load_catalog
from depwarden.cli import build_parser, main
from depwarden.dsl import load_model, validate_model

DATA = resources.files("depwarden") / "data"
FIG7 = str(DATA / "fig7.dwm")
PROFILE = str(DATA / "generic-relational.pdm.json")
SCHEMA = str(DATA / "demo_schema.json")
WORKLOAD = str(DATA / "demo_workload.json")
FRAG = "dw.optimization.fragmentation"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


# -- catalog / validate ---------------------------------------------------------------


def test_catalog_export_to_stdout_and_file(tmp_path):
    code, out, _ = run("catalog", "export")
    assert code == 0 and out == load_catalog().to_json()
    target = tmp_path / "catalog.json"
    assert run("catalog", "export", "--out", str(target))[0] == 0
    assert target.read_text("utf-8") == out


def test_validate_fig7():
    code, out, err = run("validate", FIG7)
    warnings = len(validate_model(load_model(FIG7)))
    assert code == 0
    assert out == f"0 errors, {warnings} warnings\n"
    assert err == ""


def test_validate_reports_errors_with_exit_1(tmp_path):
    bad = tmp_path / "bad.dwm"
    bad.write_text("model b\nsig security { goal se; op x ref dw.support.encriptions; x -help-> se }\n", "utf-8")
    code, out, err = run("--no-color", "validate", str(bad))
    assert code == 1
    assert out.startswith("1 errors")
    assert f"{bad}:2:" in err and "encryption" in err
    code, out, _ = run("validate", str(bad), "--format", "json")
    doc = json.loads(out)
    assert code == 1 and doc["schema_version"] == 1 and doc["errors"] == 1
    assert doc["diagnostics"][0]["line"] == 2


def test_missing_file_names_the_path():
    code, out, err = run("validate", "/nonexistent")
    assert code == 2 and out == ""
    assert "/nonexistent" in err and err.startswith("depwarden: error:")


def test_usage_errors_exit_2(capsys):
    assert run()[0] == 2
    assert run("validate", FIG7, "--bogus")[0] == 2
    assert run("simulate", "--schema", SCHEMA)[0] == 2
    err = capsys.readouterr().err
    assert "--workload" in err and "usage:" in err


def test_bad_sweep_and_weights_are_usage_errors():
    base = ("simulate", "--schema", SCHEMA, "--workload", WORKLOAD)
    code, _, err = run(*base, "--sweep", "a..b")
    assert code == 2 and "--sweep" in err
    code, _, err = run(*base, "--weights", "1")
    assert code == 2 and "--weights" in err


# -- analyze -------------------------------------------------------------------------


def test_analyze_json_has_mixed_sign_fragmentation_row():
    code, out, _ = run("analyze", FIG7, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == 1
    row = next(r for r in doc["matrix"]["rows"] if r["id"] == FRAG)
    assert row["effects"] == {"availability_reliability": 1, "maintainability": -1, "security": -1}
    assert row["class"] == "conflicting"
    assert doc["provenance"][FRAG] == ["availability_reliability", "maintainability", "security"]


def test_analyze_text_and_satisfice():
    code, out, _ = run("analyze", FIG7, "--satisfice", "fragmentation")
    assert code == 0
    assert out.startswith("model ")
    assert "trade-offs:" in out and FRAG in out
    labels = dict(re.findall(r"^  (\w+): (\w+)$", out.split("root labels:")[1], re.M))
    assert labels == {"availability_reliability": "weakly_satisficed", "maintainability": "weakly_denied",
                      "security": "weakly_denied"}


def test_analyze_unknown_leaf_lists_valid_ids():
    code, _, err = run("analyze", FIG7, "--satisfice", "warp_drive")
    assert code == 2 and "warp_drive" in err and FRAG in err


# -- transform -----------------------------------------------------------------------


def test_transform_writes_traceable_outputs(tmp_path):
    code, out, _ = run("transform", FIG7, "--select", "fragmentation,dw.replication",
                       "--profile", PROFILE, "--out", str(tmp_path), "--set", "fragmentation:fragment_count=4")
    assert code == 0 and out.startswith("2 sections (0 manual)")
    psm = json.loads((tmp_path / "psm.json").read_text("utf-8"))
    assert len(psm["sections"]) == 2
    pim = json.loads((tmp_path / "pim.json").read_text("utf-8"))
    frag = next(t for t in pim["tactics"] if t["source"] == FRAG)
    assert frag["parameters"]["fragment_count"] == 4
    assert "PARTITIONS 4;" in (tmp_path / "psm.txt").read_text("utf-8")


def test_transform_rejects_bad_inputs(tmp_path):
    args = ("transform", FIG7, "--profile", PROFILE, "--out", str(tmp_path))
    assert run(*args, "--select", "nope")[0] == 2
    assert run(*args, "--select", FRAG, "--set", "fragment_count=3")[0] == 2
    code, _, err = run(*args, "--select", FRAG, "--set", f"{FRAG}:colour=red")
    assert code == 1 and "colour" in err
    code, _, err = run("transform", FIG7, "--profile", "/nonexistent.pdm.json", "--out", str(tmp_path))
    assert code == 2 and "/nonexistent.pdm.json" in err


# -- simulate ------------------------------------------------------------------------


def test_simulate_text_csv_json_and_out(tmp_path):
    base = ("simulate", "--schema", SCHEMA, "--workload", WORKLOAD)
    code, text, _ = run(*base)
    assert code == 0
    pick = int(text.rsplit("recommended F: ", 1)[1])
    assert 1 < pick < 10
    _, csv_out, _ = run(*base, "--format", "csv")
    assert text.startswith(csv_out)
    rows = list(csv.DictReader(io.StringIO(csv_out)))
    assert [int(r["F"]) for r in rows] == list(range(1, 11))
    _, json_out, _ = run(*base, "--format", "json", "--out", str(tmp_path))
    doc = json.loads(json_out)
    assert doc["schema_version"] == 1 and doc["recommendation"] == pick
    assert (tmp_path / "sweep.csv").read_text("utf-8") == csv_out
    assert json.loads((tmp_path / "sweep.json").read_text("utf-8")) == doc


def test_simulate_tolerances_can_leave_nothing_feasible():
    code, out, _ = run("simulate", "--schema", SCHEMA, "--workload", WORKLOAD, "--max-cost", "0.001")
    assert code == 0 and out.endswith("recommended F: no feasible fragment count\n")


def test_simulate_invalid_inputs(tmp_path):
    bad = tmp_path / "schema.json"
    bad.write_text('{"fact_rows": 3, "key_cardinality": 9}', "utf-8")
    code, _, err = run("simulate", "--schema", str(bad), "--workload", WORKLOAD)
    assert code == 1 and err
    code, _, err = run("simulate", "--schema", SCHEMA, "--workload", WORKLOAD, "--sweep", "0..3")
    assert code == 1 and err


# -- cross-cutting -------------------------------------------------------------------


def test_identical_invocations_are_byte_identical(tmp_path):
    for argv in (("analyze", FIG7, "--format", "json"), ("analyze", FIG7), ("validate", FIG7),
                 ("simulate", "--schema", SCHEMA, "--workload", WORKLOAD, "--workers", "3", "--format", "json")):
        assert run(*argv) == run(*argv)
    outs = []
    for name in ("a", "b"):
        run("transform", FIG7, "--select", FRAG, "--profile", PROFILE, "--out", str(tmp_path / name))
        outs.append([(tmp_path / name / f).read_bytes() for f in ("psm.txt", "psm.json", "pim.json")])
    assert outs[0] == outs[1]


class _Tty(io.StringIO):
    def isatty(self):
        return True


def test_color_only_on_tty_and_respects_opt_out(tmp_path, monkeypatch):
    bad = tmp_path / "bad.dwm"
    bad.write_text("model b\nsig security { goal se; op x; }\n", "utf-8")
    monkeypatch.delenv("DEPWARDEN_NO_COLOR", raising=False)
    err = _Tty()
    main(["validate", str(bad)], stdout=io.StringIO(), stderr=err)
    assert "\x1b[" in err.getvalue()
    for argv, env in ((["--no-color", "validate", str(bad)], None), (["validate", str(bad)], "1")):
        if env:
            monkeypatch.setenv("DEPWARDEN_NO_COLOR", env)
        err = _Tty()
        main(argv, stdout=io.StringIO(), stderr=err)
        assert err.getvalue() and "\x1b[" not in err.getvalue()


def _subcommand_parsers(parser, prefix=()):
    for action in parser._actions:
        if action.__class__.__name__ == "_SubParsersAction":
            for name, sub in action.choices.items():
                yield prefix + (name,), sub
                yield from _subcommand_parsers(sub, prefix + (name,))


@pytest.mark.parametrize("path,parser", list(_subcommand_parsers(build_parser())),
                         ids=lambda v: " ".join(v) if isinstance(v, tuple) else "")
def test_help_lists_every_flag(path, parser, capsys):
    assert run(*path, "--help")[0] == 0
    text = capsys.readouterr().out
    for action in parser._actions:
        for flag in action.option_strings:
            assert flag in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "depwarden", "validate", FIG7], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.endswith("warnings\n")


@pytest.mark.skipif(shutil.which("depwarden") is None, reason="console script not installed")
def test_console_script_exit_code():
    proc = subprocess.run(["depwarden", "validate", "/nonexistent"], capture_output=True, text=True)
    assert proc.returncode == 2 and "/nonexistent" in proc.stderr
