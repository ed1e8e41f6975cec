"""Run configuration, artifact and suite report tests (coercion, precedence, files, formatting)"""

import json
import math
import os

import numpy as np
import pytest

from src.frontend.cli import NVLabCLI
from src.frontend.run_config import RunConfigParser, schema_for
from src.frontend.suite import AcceptanceSuite, Check, CriterionResult, emit_suite_report
from src.utils.artifacts import NA, ArtifactWriter, format_cell, read_snapshot, rows_with_reason, sha256_of, to_jsonable
from src.utils.error_formatter import SuiteFormatter
from src.utils.error_handler import (
    ConfigError, ErrorHandler, NaNDetectedError, NonConvergedError, PreconditionError,
    ResolutionError, ToleranceError, UsageError,
)
from src.utils.logger import Logger


class TestRunConfig:
    """Test class for configuration parsing"""

    # ===================== 1. Aliases =====================

    @pytest.mark.parametrize("alias,name", [("r", "roots"), ("kp", "kplimit"), ("suite", "suite"), ("bl", "bilinear")])
    def test_canonical(self, alias, name):
        """[Basic] aliases map to canonical names"""
        assert RunConfigParser.canonical(alias) == name

    def test_unknown_subcommand(self):
        """[Basic] unknown names raise ConfigError"""
        with pytest.raises(ConfigError, match="unknown subcommand"):
            RunConfigParser.canonical("integrate")

    def test_schema_for_alias(self):
        """[Basic] the schema lookup accepts aliases"""
        names = [entry[0] for entry in schema_for("r")]
        assert names == ["u", "lam"]

    # ===================== 2. Coercion =====================

    @pytest.mark.parametrize("raw,expected", [("1+1i", 1 + 1j), ("-6", -6 + 0j), ([2.0, -0.5], 2 - 0.5j), ("0", 0j)])
    def test_coerce_complex(self, raw, expected):
        """[Basic] complex values accept i or j and [re, im] pairs"""
        assert RunConfigParser.coerce("complex", raw, "u") == expected

    def test_coerce_lists(self):
        """[Basic] comma-separated strings become lists"""
        assert RunConfigParser.coerce("float_list", "1,2.5,4", "t_grid") == [1.0, 2.5, 4.0]
        assert RunConfigParser.coerce("complex_list", "0,1+1j", "u_set") == [0j, 1 + 1j]
        assert RunConfigParser.coerce("float_list", [1, 2], "t_grid") == [1.0, 2.0]

    @pytest.mark.parametrize("raw,expected", [(True, True), ("yes", True), ("0", False), ("False", False)])
    def test_coerce_bool(self, raw, expected):
        """[Basic] boolean spellings"""
        assert RunConfigParser.coerce("bool", raw, "quick") is expected

    @pytest.mark.parametrize("kind,raw", [("int", 2.5), ("int", True), ("float", "abc"), ("bool", "maybe"),
                                          ("str", 3), ("complex", "1+")])
    def test_coerce_rejects(self, kind, raw):
        """[Basic] values of the wrong kind raise ConfigError"""
        with pytest.raises(ConfigError, match="expects"):
            RunConfigParser.coerce(kind, raw, "p")

    def test_coerce_choice(self):
        """[Basic] choices are checked against the option list"""
        assert RunConfigParser.coerce("choice:xi,lambda", "xi", "representation") == "xi"
        with pytest.raises(ConfigError, match="must be one of"):
            RunConfigParser.coerce("choice:xi,lambda", "polar", "representation")

    def test_coerce_none_passes_through(self):
        """[Basic] None stays None"""
        assert RunConfigParser.coerce("complex", None, "lam") is None

    # ===================== 3. Resolution =====================

    def test_defaults(self):
        """[Basic] without document or flags the schema defaults apply"""
        cfg = RunConfigParser.resolve("symbol")
        assert cfg.subcommand == "symbol"
        assert cfg.params == {"xi1": 1.0, "xi2": 0.0, "tau": 0.0, "E": -1.0}
        assert cfg.threads == 1

    def test_decay_grid_default(self):
        """[Basic] the default decay grid has 8 log-spaced times on [1, 1e3]"""
        ts = RunConfigParser.resolve("decay").params["t_grid"]
        assert len(ts) == 8
        assert ts[0] == 1.0 and ts[-1] == pytest.approx(1e3)
        assert np.allclose(np.diff(np.log(ts)), math.log(1e3) / 7)

    def test_precedence(self):
        """[Medium] defaults < document < flags"""
        document = {"seed": 5, "output_dir": "from_doc", "params": {"xi1": 2.0, "xi2": 0.5}}
        cfg = RunConfigParser.resolve("sym", document, {"xi1": "3", "xi2": None})
        assert cfg.params["xi1"] == 3.0
        assert cfg.params["xi2"] == 0.5
        assert cfg.seed == 5 and cfg.output_dir == "from_doc"
        cfg = RunConfigParser.resolve("sym", document, seed=7, output_dir="from_flag")
        assert cfg.seed == 7 and cfg.output_dir == "from_flag"

    def test_unknown_document_parameters(self):
        """[Basic] unknown parameter names are rejected"""
        with pytest.raises(ConfigError, match="unknown parameters for symbol"):
            RunConfigParser.resolve("symbol", {"params": {"zeta": 1.0}})

    def test_document_subcommand_mismatch(self):
        """[Basic] a document for another subcommand is rejected"""
        with pytest.raises(ConfigError, match="config document is for"):
            RunConfigParser.resolve("roots", {"subcommand": "symbol"})

    def test_thread_count(self):
        """[Basic] threads must be positive"""
        with pytest.raises(ConfigError, match="thread count"):
            RunConfigParser.resolve("symbol", threads=0)

    def test_record_encodes_complex(self):
        """[Basic] complex parameters are echoed as strings"""
        record = RunConfigParser.resolve("roots", flags={"u": "18"}).to_record()
        assert record["params"]["u"] == repr(18 + 0j)
        assert record["params"]["lam"] is None
        assert list(record["params"]) == sorted(record["params"])

    # ===================== 4. Documents and Environment =====================

    def test_load_document(self, tmp_path):
        """[Basic] a valid document is returned as a dict"""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"subcommand": "roots", "params": {"u": "2+1j"}}), encoding="utf-8")
        document = RunConfigParser.load_document(str(path))
        assert RunConfigParser.resolve("roots", document).params["u"] == 2 + 1j

    @pytest.mark.parametrize("text,match", [
        ("{not json", "invalid JSON"),
        ("[1, 2]", "JSON object"),
        ('{"subcommand": "roots", "extra": 1}', "unknown top-level config keys"),
        ('{"params": [1]}', "'params'"),
    ])
    def test_load_document_errors(self, tmp_path, text, match):
        """[Basic] malformed documents raise ConfigError"""
        path = tmp_path / "bad.json"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigError, match=match):
            RunConfigParser.load_document(str(path))

    def test_missing_document(self, tmp_path):
        """[Basic] a missing file is a ConfigError"""
        with pytest.raises(ConfigError, match="config file not found"):
            RunConfigParser.load_document(str(tmp_path / "absent.json"))

    @pytest.mark.parametrize("environ,expected", [({}, 1), ({"NVLAB_THREADS": ""}, 1), ({"NVLAB_THREADS": "4"}, 4)])
    def test_threads_from_env(self, environ, expected):
        """[Basic] the thread variable defaults to 1"""
        assert RunConfigParser.threads_from_env(environ) == expected

    @pytest.mark.parametrize("raw", ["0", "-2", "many"])
    def test_threads_from_env_invalid(self, raw):
        """[Basic] non-positive or non-integer values are rejected"""
        with pytest.raises(ConfigError):
            RunConfigParser.threads_from_env({"NVLAB_THREADS": raw})


class TestArtifacts:
    """Test class for artifact writing"""

    # ===================== 1. Cell Formatting =====================

    @pytest.mark.parametrize("value,expected", [
        (None, NA), (math.nan, NA), (math.inf, NA), (0.1, "0.10000000000000001"),
        (3, "3"), (True, "true"), (np.float64(2.5), "2.5"), (1.5 - 2j, "1.5-2j"), ("x", "x"),
    ])
    def test_format_cell(self, value, expected):
        """[Basic] floats use 17 significant digits and non-finite values become NA"""
        assert format_cell(value) == expected

    def test_to_jsonable(self):
        """[Basic] complex → [re, im], arrays → lists, non-finite → NA"""
        doc = to_jsonable({"z": 1 + 2j, "a": np.array([1.0, math.inf]), 3: (np.int64(4), None)})
        assert doc == {"z": [1.0, 2.0], "a": [1.0, NA], "3": [4, None]}

    def test_rows_with_reason(self):
        """[Basic] rows with NA values get NONFINITE unless a reason is set"""
        rows = rows_with_reason([{"x": 1.0, "reason": ""}, {"x": math.nan}, {"x": None, "reason": "BUDGET"}])
        assert rows[0]["reason"] == ""
        assert rows[1]["reason"] == "NONFINITE"
        assert rows[2]["reason"] == "BUDGET"

    # ===================== 2. Files =====================

    def test_write_csv(self, tmp_path):
        """[Basic] header from the column list, NA for missing values"""
        writer = ArtifactWriter(str(tmp_path / "out"))
        path = writer.write_csv("rows.csv", [{"t": 1.0, "v": None}, {"t": 2.0, "v": 0.5}], ["t", "v"])
        with open(path, encoding="utf-8") as f:
            assert f.read() == "t,v\n1,NA\n2,0.5\n"

    def test_write_json_is_sorted(self, tmp_path):
        """[Basic] keys are sorted with two-space indentation"""
        writer = ArtifactWriter(str(tmp_path))
        path = writer.write_json("doc.json", {"b": 1, "a": 1j})
        with open(path, encoding="utf-8") as f:
            text = f.read()
        assert text == '{\n  "a": [\n    0.0,\n    1.0\n  ],\n  "b": 1\n}\n'

    def test_snapshot_round_trip(self, tmp_path):
        """[Basic] the JSON header is enough to read the field back"""
        writer = ArtifactWriter(str(tmp_path))
        values = np.arange(12, dtype=float).reshape(3, 4) / 7.0
        _, header_path = writer.write_snapshot("v_final", values, {"t": 0.5})
        with open(header_path, encoding="utf-8") as f:
            header = json.load(f)
        assert header["shape"] == [3, 4] and header["layout"] == "row-major" and header["t"] == 0.5
        assert np.array_equal(read_snapshot(header_path), values)

    def test_manifest(self, tmp_path):
        """[Medium] the manifest lists every artifact with its sha256"""
        writer = ArtifactWriter(str(tmp_path))
        writer.write_json("b.json", {"x": 1})
        writer.write_csv("a.csv", [{"x": 1}])
        path = writer.write_manifest("nvlab", "0.3.0", "symbol", {"params": {}}, 11, "ok")
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
        assert list(manifest["artifacts"]) == ["a.csv", "b.json"]
        assert manifest["artifacts"]["a.csv"] == sha256_of(os.path.join(str(tmp_path), "a.csv"))
        assert manifest["status"] == "ok" and manifest["seed"] == 11
        assert manifest["timestamp_utc"].endswith("Z")


class TestSuiteReport:
    """Test class for criterion results and their formatting"""

    @staticmethod
    def _results():
        ok = CriterionResult(1, "cross-representation", [Check("rel_diff", 2e-5, 1e-3), Check("other", 1e-4, 1e-3)])
        failed = CriterionResult(4, "stationary root battery", status="NON_CONVERGED", reason="node budget",
                                 detail={"u": "2+1j"})
        return [ok, failed]

    # ===================== 1. Checks =====================

    def test_check_comparisons(self):
        """[Basic] <=, >= and == comparisons"""
        assert Check("a", 1.0, 1.0).passed
        assert not Check("a", 1.5, 1.0).passed
        assert Check("a", 2.0, 1.0, ">=").passed
        assert Check("a", 3.0, 3.0, "==").passed

    def test_non_finite_check_fails(self):
        """[Basic] a missing or non-finite measurement never passes"""
        assert not Check("a", None, 1.0).passed
        assert not Check("a", math.nan, 1.0).passed
        assert Check("a", math.nan, 1.0).margin == math.inf

    def test_headline_is_closest_to_failing(self):
        """[Basic] the table shows the check with the largest margin"""
        result = self._results()[0]
        assert result.passed
        assert result.headline().name == "other"
        assert result.to_record()["measured"] == 1e-4

    def test_criterion_without_checks_fails(self):
        """[Basic] an error status or an empty check list is a failure"""
        assert not CriterionResult(2, "x").passed
        assert not self._results()[1].passed

    # ===================== 2. Report =====================

    def test_emit_report(self):
        """[Medium] overall fails when any criterion fails"""
        document, table = emit_suite_report(self._results(), quick=True, seed=3)
        assert document["overall"] == "fail"
        assert (document["passed"], document["total"], document["seed"]) == (1, 2, 3)
        assert "[判据汇总] Acceptance criteria" in table
        assert "Overall: fail (1/2 criteria)" in table
        assert "[失败] criterion 4: stationary root battery" in table
        assert "NON_CONVERGED (node budget)" in table
        assert "   - u: 2+1j" in table

    def test_report_is_deterministic(self):
        """[Basic] the same results give the same report"""
        assert emit_suite_report(self._results()) == emit_suite_report(self._results())

    def test_all_pass(self):
        """[Basic] a passing panel prints no failure blocks"""
        document, table = emit_suite_report(self._results()[:1])
        assert document["overall"] == "pass"
        assert "Overall: pass (1/1 criteria)" in table
        assert "[失败]" not in table

    def test_table_formats_missing_values(self):
        """[Basic] missing measurements are shown as NA"""
        table = SuiteFormatter([{"id": 9, "name": "x", "passed": False, "measured": None,
                                 "tolerance": 1e-9}]).format_table()
        assert "NA" in table and "FAIL" in table

    def test_general_error(self):
        """[Basic] the general error block carries type and message"""
        text = SuiteFormatter.format_general_error("bad input", "ConfigError")
        assert "[错误] ConfigError" in text and "[错误详情] bad input" in text

    def test_run_logs_passing_criteria(self, capsys):
        """[Medium] passing criteria are logged at SUCCESS level"""
        results = AcceptanceSuite(logger=Logger()).run(only=[7])
        assert [r.id for r in results] == [7] and results[0].passed
        assert "[SUCCESS] criterion 7 (blow-up closed form) passed" in capsys.readouterr().out


class TestErrorHandler:
    """Test class for exit codes and the collected error report"""

    # ===================== 1. Error Records =====================

    @pytest.mark.parametrize("error,code", [
        (NonConvergedError("x"), 2), (ToleranceError("x"), 2), (NaNDetectedError("x"), 2),
        (UsageError("x"), 1), (ConfigError("x"), 1), (PreconditionError("x"), 1),
        (ResolutionError("x"), 1), (RuntimeError("x"), 1),
    ])
    def test_exit_codes(self, error, code):
        """[Basic] numerical failures exit 2, input errors exit 1"""
        assert ErrorHandler.exit_code_for(error) == code

    def test_handle_error_records(self, capsys):
        """[Basic] handled errors are recorded with their code"""
        handler = ErrorHandler()
        assert handler.handle_error(PreconditionError("needs E < 0")) == 1
        assert handler.errors[0]["type"] == "PRECONDITION"
        assert "needs E < 0" in capsys.readouterr().err

    def test_collected_report(self, capsys):
        """[Basic] recorded errors and warnings are counted, listed and reset"""
        handler = ErrorHandler()
        assert not handler.has_errors()
        handler.add_error("TOLERANCE", "tolerance exceeded", "decay upper bound")
        handler.add_error("NON_CONVERGED", "node budget")
        handler.add_warning("2 point(s) did not converge", "decay")
        assert handler.has_errors()
        assert (handler.get_error_count(), handler.get_warning_count()) == (2, 1)
        handler.print_errors()
        handler.print_warnings()
        out = capsys.readouterr().out
        assert "Total 2 error(s)" in out
        assert "1. [TOLERANCE] tolerance exceeded in decay upper bound" in out
        assert "2. [NON_CONVERGED] node budget" in out
        assert "1. 2 point(s) did not converge in decay" in out
        handler.reset()
        assert (handler.get_error_count(), handler.get_warning_count()) == (0, 0)

    # ===================== 2. CLI Summary =====================

    def test_finish_lists_collected_errors(self, tmp_path, capsys):
        """[Medium] the run summary ends with the collected errors"""
        cli = NVLabCLI()
        cli.error_handler.add_error("TOLERANCE", "tolerance exceeded", "decay upper bound")
        cfg = RunConfigParser.resolve("symbol", output_dir=str(tmp_path))
        cli._finish(cfg, ArtifactWriter(cfg.output_dir), "fail")
        captured = capsys.readouterr()
        assert "symbol finished with 1 error(s)" in captured.err
        assert "1. [TOLERANCE] tolerance exceeded in decay upper bound" in captured.out
        assert os.path.exists(os.path.join(str(tmp_path), "manifest.json"))

    def test_run_resets_and_reports_success(self, tmp_path, capsys):
        """[Basic] each run starts with an empty record and a clean run logs SUCCESS"""
        cli = NVLabCLI()
        cli.error_handler.add_error("CONFIG", "left over")
        assert cli.run(["symbol", "--output-dir", str(tmp_path)]) == 0
        assert not cli.error_handler.has_errors()
        out = capsys.readouterr().out
        assert "[SUCCESS] symbol finished" in out and "left over" not in out


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
