"""Command-line interface: outputs, exit codes, config round trips."""

from __future__ import annotations

import json

import pytest

import lqspec.cli as cli
from lqspec.cli import RunConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_q1(capsys):
    code, out, _ = run(
        capsys,
        "solve", "--family", "strong-r", "--rho", "1/3", "--r", "2/7",
        "--probs", "uniform", "--q", "1",
    )
    assert code == 0
    payload = json.loads(out)
    assert set(payload) == {"q", "tau", "roots", "basic_classes"}
    assert abs(payload["tau"]) <= 1e-9
    assert payload["basic_classes"] == [[1, 3, 4]]


def test_solve_q2_matches_library(capsys):
    code, out, _ = run(capsys, "solve", "--family", "strong-r", "--q", "2")
    assert code == 0
    # frozen from the independent truncated-series bisection oracle
    assert json.loads(out)["tau"] == pytest.approx(0.675679779315090, abs=1e-9)


def test_solve_negative_q_exits_2(capsys):
    code, _, err = run(capsys, "solve", "--family", "strong-r", "--q", "-1")
    assert code == 2
    assert "q must be >= 0" in err


def test_solve_bad_family_exits_2(capsys):
    code, _, _ = run(capsys, "solve", "--family", "strong-r", "--rho", "0.9", "--r", "0.9",
                     "--q", "1")
    assert code == 2


def test_curve_csv(tmp_path, capsys):
    out_path = tmp_path / "curve.csv"
    code, _, _ = run(
        capsys,
        "curve", "--family", "strong-r", "--q-min", "0", "--q-max", "2",
        "--steps", "5", "--output", str(out_path),
    )
    assert code == 0
    lines = out_path.read_text().strip().split("\n")
    assert lines[0] == "q,alpha"
    assert len(lines) == 6
    row = dict(zip(("q", "alpha"), lines[3].split(",")))
    assert float(row["q"]) == 1.0
    assert abs(float(row["alpha"])) <= 1e-9


def test_derivative_reports_both(capsys):
    code, out, _ = run(capsys, "derivative", "--family", "nonstrong-r-basic", "--q", "2")
    assert code == 0
    payload = json.loads(out)
    assert abs(payload["difference"]) <= 1e-5 * max(1.0, abs(payload["closed_form"]))


def test_legendre_degenerate_warns_exit_zero(capsys):
    code, out, err = run(
        capsys,
        "legendre", "--family", "strong-r", "--q-min", "1", "--q-max", "1.01", "--steps", "2",
    )
    assert code == 0
    assert "degenerate" in err
    assert out.startswith("alpha,f,q_conj")


def test_classify_symmetric_heights(capsys):
    code, out, _ = run(
        capsys,
        "classify", "--family", "nonstrong-r-heights", "--probs", "symmetric", "--q", "1",
    )
    assert code == 0
    payload = json.loads(out)
    tags = payload["tags"]
    for lab in ("1", "2"):
        assert tags[lab] == "polynomial(1)"
    for lab in ("5", "6"):
        assert tags[lab] == "polynomial(2)"
    for lab in ("3", "4", "7", "8", "9", "10", "11", "12"):
        assert tags[lab] == "decays_to_zero"
    heights = sorted(c["height"] for c in payload["classes"] if c.get("basic"))
    assert heights == [2, 3]


def test_estimate_and_compare(tmp_path, capsys):
    out_path = tmp_path / "fit.csv"
    code, out, _ = run(
        capsys,
        "estimate", "--family", "strong-r", "--q", "1", "--samples", "20000",
        "--seed", "3", "--scale-octaves", "4", "9", "--output", str(out_path),
    )
    assert code == 0
    payload = json.loads(out)
    assert abs(payload["tau_emp"]) <= 0.02
    assert out_path.read_text().startswith("h,S_q\n")

    code, out, _ = run(
        capsys,
        "compare", "--family", "strong-r", "--q", "1", "--samples", "20000",
        "--seed", "3", "--scale-octaves", "4", "9",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["abs_difference"] <= 0.05


def test_config_file_and_roundtrip(tmp_path, capsys):
    cfg = {
        "family": "strong-r",
        "rho": "1/3",
        "r": "2/7",
        "probs": {"e1": "1/3", "e2": "1/3", "e3": "1/3", "e4": "1/2", "e5": "1/2"},
        "q": 1.0,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "solve", "--config", str(path))
    assert code == 0
    assert abs(json.loads(out)["tau"]) <= 1e-9

    # raw fields survive a parse/serialize cycle unchanged
    rc = RunConfig.from_dict(cfg)
    packed = rc.to_dict()
    for key, val in cfg.items():
        assert packed[key] == val
    rc.family_params()  # parses cleanly


def test_explicit_prob_map_flag(capsys):
    code, out, _ = run(
        capsys,
        "solve", "--family", "strong-r", "--rho", "1/3", "--r", "2/7",
        "--probs", "e1=1/2,e2=1/4,e3=1/4,e4=2/3,e5=1/3", "--q", "1",
    )
    assert code == 0
    assert abs(json.loads(out)["tau"]) <= 1e-9  # normalization holds for any probs

    # probabilities that do not sum to one per vertex are a config error
    code, _, err = run(
        capsys,
        "solve", "--family", "strong-r",
        "--probs", "e1=1/2,e2=1/2,e3=1/4,e4=1/2,e5=1/2", "--q", "1",
    )
    assert code == 2
    assert "sum to" in err


def test_config_unknown_field(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"family": "strong-r", "nope": 1}))
    code, _, err = run(capsys, "solve", "--config", str(path), "--q", "1")
    assert code == 2
    assert "unknown config fields" in err


def test_probs_flag_parsing():
    assert cli._parse_probs_arg("uniform") == "uniform"
    parsed = cli._parse_probs_arg("e1=1/3,e2=2/3")
    assert parsed == {"e1": "1/3", "e2": "2/3"}
    with pytest.raises(cli.ConfigError):
        cli._parse_probs_arg("e1:1/3")
