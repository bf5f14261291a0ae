import json
import os

import pytest

from qesode.cli import main, parse_rational


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_poly_roots_manifest(capsys):
    code, blob = run_cli(
        capsys, "poly", "--family", "sextic", "--J", "2", "--l", "0", "--emit", "roots"
    )
    assert code == 0 and blob["passed"]
    assert blob["command"] == "poly"
    assert blob["parameters"]["alpha"] == "-9"
    assert blob["results"]["polynomial"]["coeffs"] == ["-24", "0", "1"]
    roots = blob["results"]["roots"]
    assert len(roots) == 2
    assert roots[1]["value"].startswith("4.89897948556")
    assert blob["settings"]["precision_bits"] == 128


def test_manifest_reproducibility(capsys):
    _, first = run_cli(capsys, "poly", "--family", "cheng", "--g", "3/2,-3/2,3", "--n", "2")
    _, second = run_cli(capsys, "poly", "--family", "cheng", "--g", "3/2,-3/2,3", "--n", "2")
    assert first["results"] == second["results"]


def test_general_reduces_to_cheng_byte_identical(capsys):
    _, cheng = run_cli(capsys, "poly", "--family", "cheng", "--g", "5/2,-7/2,4", "--n", "2")
    _, general = run_cli(
        capsys,
        "poly", "--family", "general", "--order", "3", "--M", "1",
        "--g", "5/2,-7/2,4", "--n", "2",
    )
    assert cheng["results"]["polynomial"]["coeffs"] == general["results"]["polynomial"]["coeffs"]


def test_resonance_manifest(capsys):
    code, blob = run_cli(capsys, "resonance", "--family", "sextic", "--J", "1", "--l", "0")
    assert code == 0 and blob["passed"]
    assert blob["results"]["obstruction"]["coeffs"] == ["0", "1"]
    assert blob["results"]["roots"][0]["channel"] == "qes"
    assert blob["results"]["proportional_to_recursion_polynomial"]


def test_resonance_third_family(capsys):
    code, blob = run_cli(capsys, "resonance", "--family", "third", "--J", "2", "--l", "0")
    assert code == 0
    roots = blob["results"]["roots"]
    assert [r["value"][:7] for r in roots] == ["-6.3639", "6.36396"]


def test_decimal_parameters_rejected():
    with pytest.raises(SystemExit):
        main(["poly", "--family", "sextic", "--J", "2", "--l", "0.5"])
    with pytest.raises(Exception):
        parse_rational("1.5")
    assert parse_rational("-7/4") == -1.75


def test_spectrum_k0_valid_manifest(capsys):
    code, blob = run_cli(
        capsys, "spectrum", "--problem", "sextic", "--alpha", "-5", "--l", "0", "--k-max", "0"
    )
    assert code == 0
    assert blob["results"]["eigenvalues"] == []


def test_config_file_and_env(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "qesode.cfg"
    cfg.write_text("precision_bits = 96\ntol = 1e-8\n")
    _, blob = run_cli(
        capsys, "--config", str(cfg), "poly", "--family", "sextic", "--J", "1", "--l", "0"
    )
    assert blob["settings"]["precision_bits"] == 96
    monkeypatch.setenv("QESODE_CONFIG", str(cfg))
    _, blob2 = run_cli(capsys, "poly", "--family", "sextic", "--J", "1", "--l", "0")
    assert blob2["settings"]["tol"] == 1e-8
    # explicit flag wins over config
    _, blob3 = run_cli(
        capsys, "--precision-bits", "80", "poly", "--family", "sextic", "--J", "1", "--l", "0"
    )
    assert blob3["settings"]["precision_bits"] == 80


def test_closedform_whittaker_tsv(tmp_path, capsys):
    out = tmp_path / "samples.tsv"
    code, blob = run_cli(
        capsys,
        "--out", str(out), "--tol", "1e-18",
        "closedform", "--kind", "whittaker", "--J", "1", "--l", "0",
        "--grid", "0.5,1,2",
    )
    assert code == 0 and blob["passed"]
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 3
    x, value = lines[1].split("\t")
    assert float(x) == 1.0
    assert abs(float(value) - 0.32532081957995) < 1e-10


def test_closedform_bessel_manifest(capsys):
    code, blob = run_cli(capsys, "closedform", "--kind", "bessel", "--J", "2", "--l", "0")
    assert code == 0
    assert blob["results"]["eigencondition_matches_recursion"]
    assert blob["results"]["truncation_detected"] == 2


def test_error_manifest(capsys):
    code, blob = run_cli(
        capsys, "biorthogonality", "--g", "5/2,-7/2,4", "--n-max", "1"
    )
    assert code == 1
    assert not blob["passed"]
    assert "ordering" in blob["error"]["message"]


def test_irregular_poly_free_coefficient(capsys):
    _, blob = run_cli(capsys, "poly", "--family", "irregular", "--J", "2", "--l", "0", "--n", "3")
    free = blob["results"]["free_coefficient"]
    assert free["qj_part"]["coeffs"] == ["0", "1"]


def test_spectrum_cli_live(capsys):
    code, blob = run_cli(
        capsys,
        "--precision-bits", "64", "--tol", "1e-6",
        "spectrum", "--problem", "sextic", "--alpha", "-5", "--l", "0", "--k-max", "1",
    )
    assert code == 0
    ev = blob["results"]["eigenvalues"]
    assert len(ev) == 1
    assert abs(float(ev[0]["value"])) < 1e-6
    assert ev[0]["prec_bits"] == 64


def test_biorthogonality_cli_live(capsys):
    code, blob = run_cli(
        capsys,
        "--precision-bits", "80", "--tol", "1e-4",
        "biorthogonality", "--g", "1/4,1,7/4", "--n-max", "0",
    )
    assert code == 0 and blob["passed"]
    assert blob["results"]["normalized"] == [["1.0"]]
    assert blob["results"]["head_exponent"] == "11/4"


def test_isospec_cli_live(capsys):
    code, blob = run_cli(
        capsys,
        "--precision-bits", "80", "--tol", "1e-5",
        "isospec", "--J", "1", "--l", "0", "--k-max", "1",
    )
    assert code == 0 and blob["passed"]
    pair = blob["results"]["pairs"][0]
    assert abs(float(pair["E_sextic"])) < 1e-6
    assert float(pair["rel_diff"]) < 1e-8


def test_poly_generic_alpha(capsys):
    code, blob = run_cli(
        capsys, "poly", "--family", "sextic", "--alpha=-1/3", "--l", "0", "--n", "3"
    )
    assert code == 0
    assert "J" not in blob["parameters"]
    assert blob["parameters"]["alpha"] == "-1/3"
