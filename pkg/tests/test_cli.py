"""Command-line interface: argument handling, exit codes, output fidelity."""

from __future__ import annotations

import subprocess
import sys

import pytest

from treecube.cli import (
    EXIT_OK,
    EXIT_OPERATOR,
    EXIT_ORACLE,
    EXIT_PARSE,
    EXIT_USAGE,
    main,
)

SALES = "corpus/sales.xml"
GEO = "corpus/geo.xml"


def run(corpus_dir, *extra):
    """Invoke main() with --facts pointing into the corpus; return exit code."""
    return main(["--facts", str(corpus_dir / "sales.xml"), *map(str, extra)])


# ---------------------------------------------------------------- success paths


class TestSuccess:
    def test_slice_matches_golden_bytes(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "result.xml"
        code = run(
            corpus_dir,
            "--op", "slice", "--dimension", "product", "--member", "Keyboard",
            "--out", out,
        )
        assert code == EXIT_OK
        golden = (corpus_dir / "golden" / "slice_keyboard.xml").read_bytes()
        assert out.read_bytes() == golden

    def test_slice_where_spelling(self, corpus_dir, tmp_path):
        out = tmp_path / "result.xml"
        code = run(corpus_dir, "--op", "slice", "--where", "product=Keyboard", "--out", out)
        assert code == EXIT_OK
        golden = (corpus_dir / "golden" / "slice_keyboard.xml").read_bytes()
        assert out.read_bytes() == golden

    def test_rollup_matches_golden_bytes(self, corpus_dir, tmp_path):
        out = tmp_path / "result.xml"
        code = run(
            corpus_dir,
            "--op", "rollup",
            "--hierarchy", corpus_dir / "geo.xml",
            "--dimension", "city", "--level", "department", "--agg", "sum",
            "--out", out,
        )
        assert code == EXIT_OK
        golden = (corpus_dir / "golden" / "rollup_dept_sum.xml").read_bytes()
        assert out.read_bytes() == golden

    def test_stdout_when_no_out_file(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "rotate", "--perm", "year,city,product")
        assert code == EXIT_OK
        captured = capsys.readouterr()
        assert captured.out.startswith("<sales>")

    def test_oracle_check_passes(self, corpus_dir, tmp_path, capsys):
        code = run(
            corpus_dir,
            "--op", "rollup",
            "--hierarchy", corpus_dir / "geo.xml",
            "--dimension", "city", "--level", "department", "--agg", "sum",
            "--out", tmp_path / "r.xml",
            "--oracle-check",
        )
        assert code == EXIT_OK
        assert "oracle check passed" in capsys.readouterr().err

    def test_oracle_check_covers_cube(self, corpus_dir, tmp_path, capsys):
        code = run(
            corpus_dir,
            "--op", "cube",
            "--hierarchy", corpus_dir / "geo.xml",
            "--agg", "sum",
            "--out", tmp_path / "c.xml",
            "--oracle-check",
        )
        assert code == EXIT_OK
        assert "oracle check passed" in capsys.readouterr().err

    def test_empty_slice_warns_on_stderr(self, corpus_dir, tmp_path, capsys):
        code = run(
            corpus_dir,
            "--op", "slice", "--dimension", "product", "--member", "Dirigible",
            "--out", tmp_path / "r.xml",
        )
        assert code == EXIT_OK
        assert "warning:" in capsys.readouterr().err

    def test_drilldown_roundtrip(self, corpus_dir, tmp_path):
        rolled = tmp_path / "rolled.xml"
        assert run(
            corpus_dir,
            "--op", "rollup",
            "--hierarchy", corpus_dir / "geo.xml",
            "--dimension", "city", "--level", "department", "--agg", "sum",
            "--out", rolled,
        ) == EXIT_OK
        out = tmp_path / "drilled.xml"
        code = main([
            "--facts", str(rolled),
            "--op", "drilldown",
            "--hierarchy", str(corpus_dir / "geo.xml"),
            "--dimension", "department", "--level", "city", "--agg", "sum",
            "--base", str(corpus_dir / "sales.xml"),
            "--out", str(out),
            "--oracle-check",
        ])
        assert code == EXIT_OK
        # drilling back down restores the base rows as a multiset (regrouped order)
        from treecube.oracle import flatten
        from treecube.xmlio import parse_facts

        from collections import Counter

        drilled = flatten(parse_facts(out.read_text(encoding="utf-8")))
        base = flatten(parse_facts((corpus_dir / "sales.xml").read_text(encoding="utf-8")))
        assert Counter(r.key() for r in drilled.rows) == Counter(r.key() for r in base.rows)


# ------------------------------------------------------------------ exit codes


class TestExitCodes:
    def test_usage_missing_op(self, corpus_dir, capsys):
        assert run(corpus_dir) == EXIT_USAGE

    def test_usage_rollup_without_hierarchy(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "rollup", "--dimension", "city",
                   "--level", "department", "--agg", "sum")
        assert code == EXIT_USAGE

    def test_usage_drilldown_without_base(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "drilldown",
                   "--hierarchy", corpus_dir / "geo.xml",
                   "--dimension", "department", "--level", "city", "--agg", "sum")
        assert code == EXIT_USAGE

    def test_usage_missing_facts_file(self, tmp_path, capsys):
        code = main(["--facts", str(tmp_path / "nope.xml"), "--op", "rotate",
                     "--perm", "year,city,product"])
        assert code == EXIT_USAGE

    def test_usage_where_needs_single_dimension(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "slice",
                   "--where", "product=Keyboard", "--where", "year=2006")
        assert code == EXIT_USAGE

    def test_usage_unknown_flag(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "rotate", "--sideways")
        assert code == EXIT_USAGE

    @pytest.mark.parametrize("name", [
        "bad_fact_tag", "missing_dimension", "measure_not_last",
        "non_numeric_measure", "out_of_order",
    ])
    def test_parse_errors(self, corpus_dir, name, capsys):
        code = main(["--facts", str(corpus_dir / "malformed" / f"{name}.xml"),
                     "--op", "rotate", "--perm", "year,city,product"])
        assert code == EXIT_PARSE

    def test_operator_error_bad_permutation(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "rotate", "--perm", "city,city,product")
        assert code == EXIT_OPERATOR
        assert "error:" in capsys.readouterr().err

    def test_usage_error_switch_arity(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "switch", "--dimension", "city",
                   "--perm", "Lyon")
        assert code == EXIT_USAGE

    def test_operator_error_unknown_dimension(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "rotate", "--perm", "flavour,city,product")
        assert code == EXIT_OPERATOR

    def test_operator_error_unknown_agg(self, corpus_dir, capsys):
        code = run(corpus_dir, "--op", "rollup",
                   "--hierarchy", corpus_dir / "geo.xml",
                   "--dimension", "city", "--level", "department",
                   "--agg", "median")
        assert code == EXIT_OPERATOR

    def test_oracle_mismatch_exit_code(self, corpus_dir, tmp_path, capsys, monkeypatch):
        # Force a disagreement by lying to the oracle about the aggregate.
        import treecube.cli as cli_mod

        real = cli_mod.oracle_apply

        def skewed(op, table, **kwargs):
            if "agg" in kwargs:
                kwargs["agg"] = "count"
            return real(op, table, **kwargs)

        monkeypatch.setattr(cli_mod, "oracle_apply", skewed)
        code = run(
            corpus_dir,
            "--op", "rollup",
            "--hierarchy", corpus_dir / "geo.xml",
            "--dimension", "city", "--level", "department", "--agg", "sum",
            "--out", tmp_path / "r.xml",
            "--oracle-check",
        )
        assert code == EXIT_ORACLE
        assert "oracle mismatch" in capsys.readouterr().err


# ------------------------------------------------------------------ entry point


def test_console_script_runs(corpus_dir, tmp_path):
    out = tmp_path / "result.xml"
    proc = subprocess.run(
        [sys.executable, "-m", "treecube.cli", "--facts", str(corpus_dir / "sales.xml"),
         "--op", "slice", "--where", "product=Keyboard", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_OK, proc.stderr
    assert out.read_bytes() == (corpus_dir / "golden" / "slice_keyboard.xml").read_bytes()


def test_serve_parser_defaults():
    from treecube.cli import build_serve_parser

    args = build_serve_parser().parse_args([])
    assert args.port == 8000
    assert args.host == "127.0.0.1"
