import io
import json
import math

import numpy as np
import pytest

from etbell.cli import main
from etbell.numerics import matrix_from_json, matrix_to_json
from etbell.optics import dft_unitary

from conftest import dft_literal, random_unitary


def run_cli(argv):
    buf = io.StringIO()
    code = main(argv, stdout=buf)
    return code, buf.getvalue()


def run_json(argv):
    code, text = run_cli(argv)
    return code, json.loads(text)


def test_mermin_quantum_default():
    code, report = run_json(["mermin-quantum"])
    assert code == 0
    assert report["passed"] is True
    assert abs(report["mu"] - 4.0) < 1e-12
    assert len(report["stabilizer_expectations"]) == 4
    names = [c["name"] for c in report["checks"]]
    assert "mu_equals_4" in names


def test_mermin_quantum_all_x_settings():
    code, report = run_json(["mermin-quantum", "--settings", "xxx"])
    assert code == 0
    assert abs(report["mu"] - 2.0) < 1e-12


def test_mermin_quantum_two_parties():
    code, report = run_json(["mermin-quantum", "--n", "2"])
    assert code == 0
    assert abs(report["mu"] - 2.0) < 1e-12
    assert report["classical_bound"] == "2"


def test_mermin_quantum_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    code, report = run_json(["mermin-quantum", "--sweep", "9", "--sweep-out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "phase,term1,term2,term3,term4,mu"
    assert len(lines) == 10
    first = [float(x) for x in lines[1].split(",")]
    assert abs(first[-1] - 4.0) < 1e-12


def test_lhv_table1():
    code, report = run_json(["lhv", "table1"])
    assert code == 0
    assert report["passed"] is True
    assert report["model_size"] == 512
    assert report["correlations"]["mu"] == "4"
    assert report["correlations"]["selection_rate"] == "1/4"
    assert report["rejection_fraction"] == "3/4"


@pytest.mark.parametrize(
    "selection,expected", [("dependent", "4"), ("independent", "2")]
)
def test_lhv_search(selection, expected):
    code, report = run_json(["lhv", "search", "--selection", selection])
    assert code == 0
    assert report["passed"] is True
    assert report["mu_max"] == expected


def test_lhv_scale():
    code, report = run_json(["lhv", "scale", "--target", "0"])
    assert code == 0
    assert report["achieved_mu"] == 0.0
    code, report = run_json(["lhv", "scale", "--target", "2.5"])
    assert code == 0
    assert abs(report["achieved_mu"] - 2.5) <= 1e-9
    code, _ = run_cli(["lhv", "scale", "--target", "5"])
    assert code == 1


def test_lhv_stream(tmp_path):
    out = tmp_path / "events.csv"
    code, report = run_json(
        ["lhv", "stream", "--trials", "20000", "--seed", "5", "--out", str(out)]
    )
    assert code == 0
    assert report["passed"] is True
    assert report["estimate"]["mu"] == 4.0
    lines = out.read_text().splitlines()
    assert lines[0] == "trial,party,setting,bin,sign,selected"
    assert len(lines) == 1 + 3 * 20000


def test_network_dft_matches_literal():
    code, report = run_json(["network", "dft", "--n", "3"])
    assert code == 0
    m = matrix_from_json(report["matrix"])
    assert np.abs(m - dft_literal(3)).max() < 1e-12


def test_network_analyzer_default_is_dft():
    code, report = run_json(["network", "analyzer"])
    assert code == 0
    m = matrix_from_json(report["matrix"])
    assert np.abs(m - dft_literal(3)).max() < 1e-12


def test_network_cascade():
    code, report = run_json(["network", "cascade", "--n", "3"])
    assert code == 0
    assert report["reflectivities"] == [1.0 / 3.0, 0.5]
    amps = [complex(re, im) for re, im in report["output_amplitudes"]]
    assert np.abs(np.abs(np.array(amps)) - 1 / math.sqrt(3)).max() < 1e-12


def test_network_decompose_and_verify(tmp_path):
    infile = tmp_path / "u.json"
    netfile = tmp_path / "net.json"
    u = random_unitary(5, seed=77)
    infile.write_text(json.dumps(matrix_to_json(u)))
    code, report = run_json(
        ["network", "decompose", "--in", str(infile), "--out", str(netfile)]
    )
    assert code == 0
    assert report["roundtrip_error"] <= 1e-9
    code, report = run_json(["network", "verify", "--in", str(netfile)])
    assert code == 0
    assert report["kind"] == "network"
    code, report = run_json(["network", "verify", "--in", str(infile)])
    assert code == 0
    assert report["kind"] == "matrix"


def test_network_decompose_rejects_non_unitary(tmp_path, capsys):
    infile = tmp_path / "bad.json"
    infile.write_text(
        json.dumps({"rows": 2, "cols": 2, "entries": [[1, 0], [1, 0], [1, 0], [1, 0]]})
    )
    code, _ = run_cli(["network", "decompose", "--in", str(infile)])
    assert code == 1
    assert "not unitary" in capsys.readouterr().err


def test_source_state_and_filter():
    code, report = run_json(["source", "state"])
    assert code == 0
    assert len(report["state"]["amplitudes"]) == 4
    code, report = run_json(["source", "filter", "--delta-t", "1.0", "--window", "0.3"])
    assert code == 0
    assert report["keep_probability"] == 0.5
    code, _ = run_cli(["source", "filter", "--delta-t", "1.0", "--window", "2.0"])
    assert code == 1


def test_source_stream(tmp_path):
    out = tmp_path / "source.csv"
    code, report = run_json(
        ["source", "stream", "--trials", "30000", "--seed", "9", "--out", str(out)]
    )
    assert code == 0
    assert report["within_pair_agreement"] == 1.0
    assert abs(report["fourfold_rate"] - 0.5) < 0.02
    assert out.exists()


@pytest.mark.parametrize("model", ["quantum", "table1"])
def test_source_audit(model):
    code, report = run_json(
        ["source", "audit", "--model", model, "--trials", "4000", "--seed", "1"]
    )
    assert code == 0
    assert report["setting_dependent"] == (model == "table1")


def test_identical_seeds_identical_bytes(tmp_path):
    out = tmp_path / "events.csv"
    argv = ["lhv", "stream", "--trials", "5000", "--seed", "123", "--out", str(out)]
    code1, text1 = run_cli(argv)
    first_bytes = out.read_bytes()
    code2, text2 = run_cli(argv)
    assert code1 == code2 == 0
    assert text1 == text2
    assert out.read_bytes() == first_bytes


def test_bad_config_is_an_error():
    code, _ = run_cli(["lhv", "stream", "--trials", "0"])
    assert code == 1
    with pytest.raises(SystemExit):
        run_cli(["no-such-command"])


def test_json_report_written_to_file(tmp_path):
    out = tmp_path / "report.json"
    code, text = run_cli(["network", "dft", "--n", "4", "--out", str(out)])
    assert code == 0
    assert text == ""
    report = json.loads(out.read_text())
    assert report["passed"] is True
