import csv
import io
import math

import pytest

from meanlb.bounds import fisher_bound, gaussian_bound
from meanlb.cli import main
from meanlb.harness import CSV_HEADER


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


def _fields(line):
    return dict(tok.split("=", 1) for tok in line.split())


@pytest.fixture
def sample(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("# two observations\nx\n1\n1\n")
    return str(p)


def test_bound_text():
    code, text = run("bound", "--class", "gaussian", "--n", "100", "--delta", "0.01")
    assert code == 0
    f = _fields(text.strip())
    assert float(f["value"]) == gaussian_bound(100, 0.01).value
    assert f["kind"] == "y"


def test_bound_sweep_csv():
    code, text = run("bound", "--class", "fisher", "--I", "1",
                     "--sweep", "delta=1e-6:0.1:logsteps=3")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [float(r["delta"]) for r in rows] == pytest.approx([1e-6, math.sqrt(1e-7), 0.1])
    for r in rows:
        assert float(r["value"]) == pytest.approx(fisher_bound(float(r["delta"]), 1.0).value,
                                                  rel=1e-15)


def test_bound_missing_parameter():
    code, _ = run("bound", "--class", "fisher", "--delta", "0.1")
    assert code == 2


def test_div_csv():
    code, text = run("div", "--kind", "kl", "--p", "discrete[(0,0.5),(1,0.5)]",
                     "--q", "discrete[(0,0.75),(1,0.25)]", "--output", "csv")
    assert code == 0
    (row,) = csv.DictReader(io.StringIO(text))
    assert float(row["value"]) == pytest.approx(0.1438410362258904, rel=1e-14)


def test_kinf_and_tolerance(sample):
    code, text = run("kinf", "--sample", sample, "--mean-equal", "0", "--second-moment", "1",
                     "--centering", "raw")
    assert code == 0
    assert float(_fields(text.strip())["value"]) == pytest.approx(math.log(2), abs=1e-12)
    code, _ = run("kinf", "--sample", sample, "--mean-equal", "0", "--second-moment", "1",
                  "--centering", "raw", "--tol", "1e-30")
    assert code == 3


def test_estimate(sample):
    code, text = run("estimate", "--sample", sample, "--spec", "mean")
    assert code == 0 and float(_fields(text.strip())["estimate"]) == 1.0


def test_estimate_missing_file():
    assert run("estimate", "--sample", "/nonexistent/sample.txt")[0] == 4


def test_fisher():
    code, text = run("fisher", "--family", "huber", "--eps", "0.2")
    assert code == 0
    assert float(_fields(text.strip())["root"]) == pytest.approx(0.8615921, abs=1e-7)
    code, text = run("fisher", "--family", "interval_mass", "--sweep")
    assert code == 0
    assert len(text.strip().splitlines()) == 98


def test_verify():
    code, text = run("verify", "--check", "data-processing")
    assert code == 0 and "holds=True" in text


def test_bad_arguments():
    with pytest.raises(SystemExit) as err:
        run("bound", "--class", "nope")
    assert err.value.code == 2


CONFIG = """\
distribution = discrete[(0,0.5),(2,0.5)]
estimators = mean, mom(2)
n = 8
deltas = 0.1
trials = 100
seed = 11
"""


def test_simulate(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(CONFIG)
    code, text = run("simulate", "--config", str(cfg), "--output", "csv")
    assert code == 0 and text.startswith(CSV_HEADER)
    code, plain = run("simulate", "--config", str(cfg))
    assert code == 0 and len(plain.strip().splitlines()) == 2
    out = tmp_path / "r.csv"
    code, _ = run("simulate", "--config", str(cfg), "--workers", "2", "--out", str(out))
    assert code == 0 and out.read_text() == text
    code, other = run("simulate", "--config", str(cfg), "--seed", "12", "--output", "csv")
    assert code == 0 and other != text
    code, q = run("simulate", "--config", str(cfg), "--quantiles", "0.5,0.9")
    assert code == 0 and len(q.strip().splitlines()) == 2 + 2 * 1 * 2


def test_simulate_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(CONFIG.replace("n = 8", "n = zero"))
    assert run("simulate", "--config", str(cfg))[0] == 2
    assert "line 3" in capsys.readouterr().err


def test_simulate_missing_config(tmp_path):
    assert run("simulate", "--config", str(tmp_path / "none.cfg"))[0] == 4
