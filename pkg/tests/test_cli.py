import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from probenoise.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main
from probenoise.io import save_povm
from probenoise.povm import Povm
from probenoise.robustness import fourier_example


@pytest.fixture
def pair_files(tmp_path):
    a, b = fourier_example()
    save_povm(a, tmp_path / "a.json")
    save_povm(b, tmp_path / "b.json")
    return tmp_path / "a.json", tmp_path / "b.json"


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_identical_files_are_compatible(capsys, pair_files):
    a, _ = pair_files
    code, out = run_json(capsys, ["robustness", "--povm-a", str(a), "--povm-b", str(a)])
    assert code == EXIT_OK
    assert all(r["alpha_star"] == pytest.approx(1.0, abs=1e-6) for r in out["results"])


def test_qubit_uniform(capsys):
    code, out = run_json(capsys, ["robustness", "--builtin", "qubit-mub", "--model", "uniform"])
    assert code == EXIT_OK
    assert out["alpha_star"] == pytest.approx(1 / np.sqrt(2), abs=1e-4)
    assert out["model"] == "uniform" and out["status"] == "optimal"


def test_fourier_all_models(capsys, pair_files):
    a, b = pair_files
    code, out = run_json(capsys, ["robustness", "--povm-a", str(a), "--povm-b", str(b)])
    assert code == EXIT_OK
    assert [r["model"] for r in out["results"]] == ["uniform", "depolarizing", "physical"]


def test_region_outputs(tmp_path, capsys):
    out = tmp_path / "r1"
    code = main(["region", "--builtin", "fourier", "--resolution", "21", "--out", str(out)])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    for m in ("uniform", "depolarizing", "physical"):
        lines = (out / f"region_{m}.csv").read_text().splitlines()
        assert lines[0] == "p,q,compatible" and len(lines) == 1 + 21 * 21
        assert summary["models"][m]["monotone"]
    root = ET.parse(out / "regions.svg").getroot()
    assert root.tag.endswith("svg")
    assert json.loads((out / "region_summary.json").read_text()) == summary


def test_region_is_byte_identical(tmp_path, capsys):
    args = ["region", "--builtin", "qubit-mub", "--resolution", "6", "--zoom"]
    main(args + ["--out", str(tmp_path / "x")])
    main(args + ["--out", str(tmp_path / "y")])
    main(args + ["--out", str(tmp_path / "x")])
    capsys.readouterr()
    for name in ("region_uniform.csv", "region_physical.csv", "regions.svg"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_region_commuting_pair_full(tmp_path, capsys):
    a = Povm([np.diag([0.2, 0.9]), np.diag([0.8, 0.1])])
    b = Povm([np.diag([0.5, 0.3]), np.diag([0.5, 0.7])])
    save_povm(a, tmp_path / "a.json")
    save_povm(b, tmp_path / "b.json")
    code = main(["region", "--povm-a", str(tmp_path / "a.json"), "--povm-b", str(tmp_path / "b.json"),
                 "--model", "physical", "--resolution", "5", "--out", str(tmp_path / "o")])
    capsys.readouterr()
    assert code == EXIT_OK
    rows = (tmp_path / "o" / "region_physical.csv").read_text().splitlines()[1:]
    assert all(r.endswith(",1") for r in rows)


def test_verify_default(tmp_path, capsys):
    code = main(["verify", "-M", "20000", "--out", str(tmp_path)])
    capsys.readouterr()
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert code == EXIT_OK and report["pass"]
    assert report["M"] == 20000 and report["seed"] == 42
    assert not report["wide_tolerance"]


def test_verify_small_sample_flags_wide_tolerance(tmp_path, capsys):
    main(["verify", "-M", "100", "--out", str(tmp_path)])
    capsys.readouterr()
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report["wide_tolerance"]
    assert report["warnings"]


def test_verify_deterministic(tmp_path, capsys):
    main(["verify", "-M", "2000", "--out", str(tmp_path / "x")])
    main(["verify", "-M", "2000", "--out", str(tmp_path / "y")])
    capsys.readouterr()
    assert (tmp_path / "x" / "verify_report.json").read_bytes() == (tmp_path / "y" / "verify_report.json").read_bytes()


def test_corrupt_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"d": 2, "effects": [')
    assert main(["robustness", "--povm-a", str(bad), "--povm-b", str(bad)]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_not_a_povm(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"d": 1, "effects": [{"re": [[0.5]]}]}')
    assert main(["robustness", "--povm-a", str(bad), "--povm-b", str(bad)]) == EXIT_INPUT


def test_missing_file(tmp_path, capsys):
    assert main(["robustness", "--povm-a", str(tmp_path / "nope.json"), "--povm-b", str(tmp_path / "nope.json")]) == EXIT_INPUT


@pytest.mark.parametrize("extra", [["--samples", "10"], ["--resolution", "1"], ["--tol", "-1"]])
def test_bad_options(extra, capsys):
    assert main(["verify"] + extra) == EXIT_INPUT


def test_dimension_mismatch(tmp_path, capsys):
    save_povm(Povm([np.eye(2)]), tmp_path / "a.json")
    save_povm(fourier_example()[1], tmp_path / "b.json")
    assert main(["robustness", "--povm-a", str(tmp_path / "a.json"), "--povm-b", str(tmp_path / "b.json")]) == EXIT_INPUT


def test_unknown_command():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert EXIT_FAIL == 1
