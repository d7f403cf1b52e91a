import pytest

from mirai_sim.cli import main
from mirai_sim.pcap import read_pcap
from mirai_sim.suite import drivers_csv, read_drivers_csv
from mirai_sim.telemetry import read_samples_csv

SHORT = """\
[simulation]
horizon = 1
[flood]
preset = paper-tcp
duration = 1
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "short.ini"
    path.write_text(SHORT)
    return path


def test_run_and_trace_export(config, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out), "--seed", "4"]) == 0
    rows = read_samples_csv(out / "samples_short_victim.csv")
    assert len(rows) == 10
    exported = tmp_path / "victim.pcap"
    assert main(["trace-export", "--run", str(out / "run_short.npz"), "--node", "victim",
                 "--out", str(exported)]) == 0
    assert exported.read_bytes() == (out / "trace_short_victim.pcap").read_bytes()
    _, records = read_pcap(exported)
    assert records


def test_check_paper_table(capsys):
    assert main(["check", "--paper"]) == 0
    assert "32/32 relations hold" in capsys.readouterr().out


def test_check_fails_on_bad_report(suite, tmp_path):
    from mirai_sim.analysis import report_csv

    table = suite.table()
    key = next(k for k in table.deltas if k[1] == "cpu_pct" and k[0].value == "victim-tcp")
    table.deltas[key] = 50.0
    path = tmp_path / "report.csv"
    path.write_text(report_csv(table))
    assert main(["check", "--report", str(path)]) == 1


def test_calibrate_from_drivers(suite, tmp_path):
    drivers = tmp_path / "drivers.csv"
    drivers.write_text(drivers_csv(suite.drivers()))
    assert read_drivers_csv(drivers.read_text()) == suite.drivers()
    out = tmp_path / "params.json"
    assert main(["calibrate", "--drivers", str(drivers), "--out", str(out)]) == 0
    assert out.read_text() == suite.params.to_json()


def test_config_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[flood]\nprotocol = udp\n[population]\nvulnerable_fraction = 2\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "vulnerable_fraction" in capsys.readouterr().err
