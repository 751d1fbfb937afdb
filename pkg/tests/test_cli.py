from __future__ import annotations

import csv
import io
import json
import re

import pytest
from openpyxl import load_workbook

from csgrad.services.harness import MethodOptions, estimate, true_gradient
from csgrad.services.oracle import lookup
from csgrad.ui.cli import EXIT_ERROR, EXIT_OK, EXIT_VERIFY_FAILED, build_parser, main


def _vector(out: str, label: str) -> list:
    match = re.search(rf"{label}\s*= \[([^\]]*)\]", out)
    assert match, out
    return [float(v) for v in match.group(1).split(",")]


def test_estimate_quartic(sample_set_file, capsys):
    code = main(["estimate", "--function", "quartic1d", "--sample-set", str(sample_set_file)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert _vector(out, "gradient") == pytest.approx([-17.6])
    assert "classification = overdetermined" in out
    assert "eval_count     = 4" in out
    assert "bound" in out


def test_estimate_several_methods(sample_set_file, capsys):
    code = main(
        ["estimate", "--function", "quartic1d", "--sample-set", str(sample_set_file), "--method", "gsg", "--method", "gcsg"]
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "method=gsg" in out and "method=gcsg" in out


def test_estimate_with_generated_set_and_radius(capsys):
    code = main(["estimate", "--function", "expsin", "--generate", "2,3,7", "--radius", "0.01"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    match = re.search(r"delta\s*= (\S+)", out)
    assert float(match.group(1)) == pytest.approx(0.01, rel=1e-12)


def test_generate_and_sample_set_are_exclusive(sample_set_file, capsys):
    code = main(["estimate", "--function", "quartic1d", "--sample-set", str(sample_set_file), "--generate", "1,2,0"])
    assert code == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_unknown_function_is_an_error(sample_set_file, capsys):
    code = main(["estimate", "--function", "nope", "--sample-set", str(sample_set_file)])
    assert code == EXIT_ERROR
    assert "nope" in capsys.readouterr().err


def test_dimension_mismatch_is_an_error(sample_set_file, capsys):
    assert main(["estimate", "--function", "expsin", "--sample-set", str(sample_set_file)]) == EXIT_ERROR


def test_rules_chain_example(tmp_path, capsys):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps({"x0": [2.0], "directions": [[1.0]]}), encoding="utf-8")
    code = main(["rules", "--function", "square1d", "--inner", "square_plus_one", "--sample-set", str(path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert _vector(out, "gcscg") == pytest.approx([40.0])
    assert _vector(out, "direct") == pytest.approx([48.0])
    assert _vector(out, "error_term") == pytest.approx([-8.0])


def test_rules_product_quotient_and_power(capsys):
    code = main(["rules", "--function", "paperlog", "--with", "paperexp", "--generate", "2,3,5", "--radius", "0.1"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    for label in ("power k=2:", "product:", "quotient:"):
        assert label in out


def test_rules_total_matches_direct_gcsg(sample_set_file, capsys):
    code = main(["rules", "--function", "quartic1d", "--exponent", "3", "--sample-set", str(sample_set_file)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert _vector(out, "total") == pytest.approx(_vector(out, "direct"), rel=1e-10)


def test_sweep_csv_to_stdout(capsys):
    code = main(["sweep", "--function", "expsin", "--generate", "2,3,3", "--method", "gcsg", "--method", "gsg"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["method", "function", "delta", "error", "bound", "slope"]
    assert len(rows) == 1 + 2 * 5
    assert 1.8 <= float(rows[1][5]) <= 2.2


def test_sweep_json_and_xlsx_files(tmp_path, capsys):
    out_json = tmp_path / "sweep.json"
    code = main(
        ["sweep", "--function", "quartic3", "--generate", "3,4,1", "--deltas", "0.1,0.01", "--format", "json", "--out", str(out_json)]
    )
    assert code == EXIT_OK
    payload = json.loads(out_json.read_text(encoding="utf-8"))
    assert [p["delta"] for p in payload[0]["points"]] == [0.1, 0.01]

    out_xlsx = tmp_path / "sweep.xlsx"
    code = main(["sweep", "--function", "quartic3", "--generate", "3,4,1", "--format", "xlsx", "--out", str(out_xlsx)])
    assert code == EXIT_OK
    assert load_workbook(out_xlsx).active.max_row == 6


def test_sweep_xlsx_needs_out(capsys):
    code = main(["sweep", "--function", "quartic3", "--generate", "3,4,1", "--format", "xlsx"])
    assert code == EXIT_ERROR


def test_sweep_empty_delta_list(capsys):
    code = main(["sweep", "--function", "expsin", "--generate", "2,3,3", "--deltas", ""])
    assert code == EXIT_ERROR
    assert "delta list empty" in capsys.readouterr().err


def test_verify_passes(small_config_file, capsys):
    code = main(["verify", "--config", str(small_config_file)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "FAIL" not in out
    assert re.search(r"(\d+)/\1 passed", out)


def test_verify_exit_code_constants():
    assert (EXIT_OK, EXIT_VERIFY_FAILED, EXIT_ERROR) == (0, 1, 2)


def test_parser_rejects_malformed_generate():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["estimate", "--generate", "1,2"])


# ----------------------
# gcscg:* の手法
# ----------------------
@pytest.fixture
def chain_set_file(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps({"x0": [2.0], "directions": [[1.0]]}), encoding="utf-8")
    return path


@pytest.mark.parametrize(
    "method,partners",
    [
        ("gcscg:exp", []),
        ("gcscg:log", []),
        ("gcscg:power", []),
        ("gcscg:product", ["rosenbrock"]),
        ("gcscg:quotient", ["rosenbrock"]),
        ("gcscg:product_k", ["rosenbrock", "paperexp"]),
    ],
)
def test_estimate_each_rule(method, partners, capsys):
    args = ["estimate", "--function", "expsin", "--generate", "2,3,7", "--radius", "0.001", "--method", method]
    for name in partners:
        args += ["--with", name]
    code = main(args)
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert f"method={method} function=expsin" in out
    fn = lookup("expsin")
    truth = true_gradient(method, fn, fn.x0(), MethodOptions(partners=tuple(lookup(n) for n in partners)))
    assert _vector(out, "gradient") == pytest.approx(list(truth), abs=1e-2)
    assert "bound" in out


def test_estimate_chain_uses_inner(chain_set_file, capsys):
    code = main(
        [
            "estimate", "--function", "square1d", "--inner", "square_plus_one",
            "--sample-set", str(chain_set_file), "--method", "gcscg:chain",
        ]
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert _vector(out, "gradient") == pytest.approx([40.0])
    assert "eval_count     = 6" in out


def test_estimate_power_takes_k(sample_set_file, quartic, quartic_set, capsys):
    code = main(
        ["estimate", "--function", "quartic1d", "--sample-set", str(sample_set_file), "--method", "gcscg:power", "--k", "3"]
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    expected = estimate("gcscg:power", quartic, quartic_set, options=MethodOptions(k=3.0)).value
    assert _vector(out, "gradient") == pytest.approx(list(expected))


def test_estimate_product_without_partner_is_an_error(capsys):
    code = main(["estimate", "--function", "expsin", "--generate", "2,3,7", "--method", "gcscg:product"])
    assert code == EXIT_ERROR
    assert "partners" in capsys.readouterr().err


def test_chain_and_plain_methods_need_same_space(capsys):
    code = main(
        [
            "estimate", "--function", "scaled_sphere3", "--inner", "paperchain_g",
            "--generate", "2,2,1", "--method", "gcsg", "--method", "gcscg:chain",
        ]
    )
    assert code == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_sweep_partner_rules(capsys):
    code = main(
        [
            "sweep", "--function", "expsin", "--with", "rosenbrock", "--generate", "2,3,3",
            "--method", "gcscg:product", "--method", "gcscg:quotient",
        ]
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert {r[0] for r in rows} == {"gcscg:product", "gcscg:quotient"}
    for method in ("gcscg:product", "gcscg:quotient"):
        (slope,) = {r[5] for r in rows if r[0] == method}
        assert 1.8 <= float(slope) <= 2.2


def test_sweep_chain_and_power_exponent(capsys):
    code = main(
        ["sweep", "--function", "quartic1d", "--inner", "square_plus_one", "--generate", "1,2,3", "--method", "gcscg:chain"]
    )
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert code == EXIT_OK
    assert 1.8 <= float(rows[1][5]) <= 2.2

    code = main(["sweep", "--function", "expsin", "--generate", "2,3,3", "--method", "gcscg:power", "--k", "3"])
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert code == EXIT_OK
    assert rows[1][0] == "gcscg:power"
    assert 1.8 <= float(rows[1][5]) <= 2.2


def test_rules_product_of_three(capsys):
    code = main(
        ["rules", "--function", "expsin", "--with", "rosenbrock", "--with", "paperexp", "--generate", "2,3,5", "--radius", "0.1"]
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "product k=3:" in out
