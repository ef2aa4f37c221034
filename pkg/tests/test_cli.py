import csv
import json
from pathlib import Path
import subprocess
import sys

import jsonschema
import pytest

from qmpo.cli import run

DOCS = Path(__file__).resolve().parents[1] / "docs"


@pytest.fixture(scope="module")
def instance(tmp_path_factory):
    d = tmp_path_factory.mktemp("inst")
    assert run(["gen", "--n", "2000", "--l", "10", "--density", "0.05", "--seed", "7",
                "--out", str(d)]) == 0
    return d


def test_gen_writes_matrix_market(instance):
    head = (instance / "H.mtx").read_text().splitlines()[0]
    assert head == "%%MatrixMarket matrix coordinate real symmetric"
    assert (instance / "G.mtx").read_text().startswith("%%MatrixMarket matrix array real general")


def test_solve_end_to_end(instance, tmp_path):
    out = tmp_path / "r.json"
    hist = tmp_path / "h.csv"
    code = run(["solve", "--h", str(instance / "H.mtx"), "--g", str(instance / "G.mtx"),
                "--report", str(out), "--history", str(hist)])
    assert code == 0
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, json.loads((DOCS / "solve_report.schema.json").read_text()))
    assert rep["termination"] == "f_and_U_and_g_converged"
    assert rep["kkt_residual"] <= 1e-5
    assert hist.read_text().startswith("k,f,kkt,du,wall_ms\n")


def test_solve_reports_identical_across_runs(instance, tmp_path):
    texts = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        run(["solve", "--h", str(instance / "H.mtx"), "--g", str(instance / "G.mtx"),
             "--report", str(out)])
        d = json.loads(out.read_text())
        d.pop("wall_ms")
        for c in d["history"]:
            c.pop("wall_ms")
        texts.append(json.dumps(d, sort_keys=True))
    assert texts[0] == texts[1]


def test_compare_lanczos_is_best(instance, tmp_path):
    out = tmp_path / "c.csv"
    code = run(["compare", "--h", str(instance / "H.mtx"), "--g", str(instance / "G.mtx"),
                "--solvers", "lanczos,gpi,rtr", "--out", str(out)])
    assert code == 0
    rows = {r["solver"]: r for r in csv.DictReader(out.open())}
    assert set(rows) == {"lanczos", "gpi", "rtr"}
    assert float(rows["lanczos"]["f_err_rel"]) <= 1e-10
    assert float(rows["gpi"]["f_err_rel"]) >= 0


def test_compare_generated_instance_parallel(tmp_path, monkeypatch):
    monkeypatch.setenv("QMPO_THREADS", "2")
    out = tmp_path / "c.csv"
    assert run(["compare", "--n", "300", "--l", "3", "--solvers", "lanczos,gpi",
                "--out", str(out), "--report", str(tmp_path / "c.json")]) == 0
    assert [r["solver"] for r in csv.DictReader(out.open())] == ["lanczos", "gpi"]


def test_verify_secular_path(tmp_path):
    out = tmp_path / "v.json"
    assert run(["verify", "--n", "40", "--l", "1", "--seed", "3", "--out", str(out),
                "--csv", str(tmp_path / "v.csv")]) == 0
    cert = json.loads(out.read_text())
    jsonschema.validate(cert, json.loads((DOCS / "certificate.schema.json").read_text()))
    assert cert["oracle"] == "trs_secular"
    for name, series in cert["verdicts"].items():
        if name != "eps":
            assert "fail" not in series, name


def test_bench_small_grid(tmp_path):
    out = tmp_path / "b.csv"
    assert run(["bench", "--sizes", "200", "--ls", "2,3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4 and rows[0]["n"] == "200"


def test_exit_codes(tmp_path, instance):
    assert run([]) == 1
    assert run(["solve", "--bogus"]) == 1
    assert run(["gen", "--n", "-3", "--l", "1", "--out", str(tmp_path)]) == 1
    assert run(["solve", "--h", str(tmp_path / "none.mtx"), "--g", str(tmp_path / "none.mtx"),
                "--report", str(tmp_path / "r.json")]) == 1
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix array complex general\n1 1\n1 0\n")
    assert run(["solve", "--h", str(bad), "--g", str(bad), "--report", str(tmp_path / "r.json")]) == 1
    zero = tmp_path / "zero.mtx"
    zero.write_text("%%MatrixMarket matrix array real general\n2000 1\n" + "0\n" * 2000)
    code = run(["solve", "--h", str(instance / "H.mtx"), "--g", str(zero),
                "--report", str(tmp_path / "r.json")])
    assert code == 2
    assert run(["compare", "--h", str(instance / "H.mtx"), "--out", str(tmp_path / "c.csv")]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qmpo", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify" in proc.stdout
