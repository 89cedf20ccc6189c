import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from qrecip import states as st
from qrecip.cli import (StateSyntaxError, format_state, main, parse_state, read_csv,
                        result_from_dict)


class TestStateGrammar:
    @pytest.mark.parametrize("text,expected", [
        ("sho:n=1,alpha=1", st.SHO(1, 1.0)),
        ("sho:n=3", st.SHO(3)),
        ("sho: n = 2 , alpha = 0.5", st.SHO(2, 0.5)),
        ("cauchy:x0=0,gamma=2", st.CauchyLorentz(0.0, 2.0)),
        ("cauchy:gamma=1e-1", st.CauchyLorentz(0.0, 0.1)),
        ("student:dof=7", st.StudentT(7)),
        ("hermite:c=[1]", st.HermiteSuperposition((1.0,))),
        ("hermite:c=[0.6+0.8i,0]", st.HermiteSuperposition((0.6 + 0.8j, 0))),
        ("hermite:c=[0.6,-0.8i]", st.HermiteSuperposition((0.6, -0.8j))),
    ])
    def test_valid(self, text, expected):
        assert parse_state(text) == expected

    @pytest.mark.parametrize("text,position,fragment", [
        ("oscillator:n=1", 0, "unknown state kind"),
        ("sho", 3, "expected ':'"),
        ("sho:n=1,beta=2", 8, "unknown key"),
        ("sho:n=x", 6, "expected integer"),
        ("sho:n=1.5", 6, "expected integer"),
        ("sho:alpha=2", 11, "missing key"),
        ("sho:n=1,n=2", 8, "duplicate key"),
        ("sho:n=1,", 8, "trailing"),
        ("sho:n=1,alpha=-1", 14, "alpha must be positive"),
        ("student:dof=1", 12, "dof"),
        ("cauchy:gamma=0", 13, "gamma"),
        ("hermite:c=1", 10, "'['"),
        ("hermite:c=[1,2", 14, "unterminated"),
        ("hermite:c=[1,,0]", 13, "empty coefficient"),
        ("hermite:c=[0.6,0.8j]", 15, "malformed complex"),
        ("hermite:c=[1,1]", 10, "unit norm"),
    ])
    def test_errors_are_position_annotated(self, text, position, fragment):
        with pytest.raises(StateSyntaxError) as info:
            parse_state(text)
        assert info.value.position == position
        assert fragment in str(info.value)
        assert f"at position {position}" in str(info.value)

    @settings(max_examples=40, deadline=None)
    @given(hs.lists(hs.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=6).filter(lambda c: np.linalg.norm(c) > 1e-3))
    def test_hermite_round_trip(self, coeffs):
        state = st.HermiteSuperposition.normalized(coeffs)
        again = parse_state(format_state(state))
        np.testing.assert_array_equal(again.array, state.array)

    @pytest.mark.parametrize("state", [st.SHO(7, 0.3), st.CauchyLorentz(-1.25, 3.0), st.StudentT(12)],
                             ids=repr)
    def test_round_trip(self, state):
        assert parse_state(format_state(state)) == state


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def manifest(tmp_path, command):
    return json.loads((tmp_path / f"{command.replace('-', '_')}.manifest.json").read_text())


class TestCommands:
    def test_sho_scan(self, tmp_path):
        assert run(tmp_path, "sho-scan", "--n-max", "3", "--gnuplot-stub") == 0
        raw = (tmp_path / "sho_scan.csv").read_bytes()
        assert raw.startswith(b"# units: 1/hbar")
        assert raw.count(b"\r\n") == 6 and b"\n" not in raw.replace(b"\r\n", b"")
        header, rows = read_csv(tmp_path / "sho_scan.csv")
        assert header == ["level", "product_tilde"]
        assert [int(r[0]) for r in rows] == [0, 1, 2, 3]
        assert float(rows[0][1]) == pytest.approx(math.sqrt(2 / (math.e * math.pi)), rel=1e-10)
        m = manifest(tmp_path, "sho-scan")
        assert m["status"] == "ok" and m["schema_version"] == 1
        assert set(m["outputs"]) == {str(tmp_path / "sho_scan.csv"), str(tmp_path / "sho_scan.gp")}
        for key in ("command", "parameters", "seed", "tool_version", "started_at", "outputs"):
            assert key in m
        assert "sho_scan.csv" in (tmp_path / "sho_scan.gp").read_text()

    def test_estimator_flags(self, tmp_path):
        assert run(tmp_path, "sho-scan", "--n-max", "1", "--grid-points", "4096", "--top-k", "3",
                   "--rtol", "1e-8", "--divergence-factor", "20") == 0
        _, rows = read_csv(tmp_path / "sho_scan.csv")
        assert float(rows[0][1]) == pytest.approx(math.sqrt(2 / (math.e * math.pi)), rel=1e-7)
        assert "--grid-points" in manifest(tmp_path, "sho-scan")["parameters"]["argv"]

    @pytest.mark.parametrize("flag,value", [("--grid-points", "0"), ("--rtol", "-1"),
                                            ("--divergence-factor", "nan")])
    def test_bad_estimator_flags(self, tmp_path, flag, value):
        assert run(tmp_path, "sho-scan", "--n-max", "1", flag, value) == 2

    def test_rerun_from_manifest_reproduces(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(a, "sho-scan", "--n-max", "2", "--alpha", "2.5") == 0
        argv = manifest(a, "sho-scan")["parameters"]["argv"]
        argv = argv[:argv.index("--out")]
        assert run(b, *argv) == 0
        assert (a / "sho_scan.csv").read_bytes() == (b / "sho_scan.csv").read_bytes()

    @pytest.mark.parametrize("argv", [
        ["sho-scan", "--n-max", "-1"],
        ["sho-scan", "--n-max", "65"],
        ["sho-scan", "--n-max", "abc"],
        ["divergence", "--state", "cauchy", "--eps-min", "0.2", "--eps-max", "0.1"],
        ["divergence", "--state", "cauchy", "--points", "3"],
        ["divergence", "--state", "gauss"],
        ["haar-min", "--degree", "9"],
        ["haar-min", "--degree", "3", "--samples", "10"],
        ["state-report", "--state", "student:dof=1"],
        ["student-scan", "--dof", "2"],
        ["no-such-command"],
    ])
    def test_usage_errors_exit_2(self, tmp_path, argv, capsys):
        assert run(tmp_path, *argv) == 2

    def test_usage_error_still_writes_manifest(self, tmp_path):
        assert run(tmp_path, "state-report", "--state", "student:dof=1") == 2
        m = manifest(tmp_path, "state-report")
        assert m["status"] == "usage_error" and "dof" in m["error"]

    def test_computational_failure_exit_1(self, tmp_path, monkeypatch):
        from qrecip import reciprocity

        def boom(*args, **kwargs):
            raise RuntimeError("estimator failed")

        monkeypatch.setattr(reciprocity, "reciprocity_product", boom)
        assert run(tmp_path, "state-report", "--state", "sho:n=0") == 1
        m = manifest(tmp_path, "state-report")
        assert m["status"] == "failed" and "estimator failed" in m["error"]

    def test_rank_deficient_fit_exit_1(self, tmp_path, monkeypatch):
        from qrecip import lipschitz
        monkeypatch.setattr(lipschitz.np.linalg, "matrix_rank", lambda m: 0)
        assert run(tmp_path, "divergence", "--state", "cauchy", "--points", "4") == 1

    def test_state_report_divergent(self, tmp_path):
        assert run(tmp_path, "state-report", "--state", "cauchy:x0=0,gamma=2") == 0
        data = json.loads((tmp_path / "state_report.json").read_text())
        assert data["product_tilde"] is None and data["divergent"] is True
        assert data["eta_x"] == pytest.approx(3 * math.sqrt(3) / (32 * math.pi), rel=1e-6)
        assert data["uncertainty_product"] is None
        back = result_from_dict(data)
        assert math.isinf(back.product_tilde) and back.divergent

    def test_state_report_round_trip(self, tmp_path):
        assert run(tmp_path, "state-report", "--state", "sho:n=1,alpha=1") == 0
        data = json.loads((tmp_path / "state_report.json").read_text())
        back = result_from_dict(data)
        assert back.product_tilde == pytest.approx(0.6626, abs=1e-3)
        assert back.product_tilde == data["product_tilde"]
        assert data["uncertainty_product"] == pytest.approx(1.5)

    def test_divergence(self, tmp_path):
        assert run(tmp_path, "divergence", "--state", "cauchy", "--points", "8") == 0
        header, rows = read_csv(tmp_path / "divergence_cauchy.csv")
        assert header == ["epsilon", "lc"] and len(rows) == 8
        fit = json.loads((tmp_path / "divergence_cauchy.json").read_text())
        assert fit["model"] == "linear_in_inverse_epsilon" and len(fit["coefficients"]) == 2

    def test_haar_min_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(d, "haar-min", "--degree", "2", "--samples", "300", "--seed", "7") == 0
        assert (a / "haar_reciprocity_deg2.json").read_bytes() == (b / "haar_reciprocity_deg2.json").read_bytes()
        data = json.loads((a / "haar_reciprocity_deg2.json").read_text())
        assert {"degree", "field", "seed", "N", "min_product", "argmin_coeffs", "history"} <= data.keys()
        header, rows = read_csv(a / "haar_reciprocity_deg2_history.csv")
        assert header == ["N", "running_min"] and rows[0][0] == "300"

    def test_haar_uncertainty_auto(self, tmp_path):
        assert run(tmp_path, "haar-min", "--degree", "2", "--objective", "uncertainty", "--auto") == 0
        data = json.loads((tmp_path / "haar_uncertainty_deg2.json").read_text())
        assert data["min_product"] >= 0.5 - 1e-12
        assert data["converged"]

    def test_environment_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QRECIP_OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["sho-scan", "--n-max", "0"]) == 0
        assert (tmp_path / "env" / "sho_scan.csv").exists()

    def test_csv_quoting_is_rfc4180(self, tmp_path):
        from qrecip.cli import write_csv
        path = tmp_path / "q.csv"
        write_csv(path, ["a", "b"], [['x,y', 'say "hi"']])
        text = path.read_bytes().decode()
        assert '"x,y","say ""hi"""\r\n' in text
        assert read_csv(path)[1] == [["x,y", 'say "hi"']]
