import math
import os
from pathlib import Path

import pytest

from persistlab.cli import main
from persistlab.scenario import ScenarioError, load_scenario, parse_scenario, read_table, run

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _base(**extra):
    data = {
        "statistics": "fermion",
        "lattice": {"sites": 8},
        "initial": {"amplitudes": [{"positions": [1, 5]}]},
        "schedule": [0.5, 1.0],
        "analyses": ["transition_map"],
    }
    data.update(extra)
    return data


def test_defaults_are_filled_in():
    sc = parse_scenario(_base())
    resolved = sc.resolved()
    assert resolved["lattice"]["boundary"] == "periodic"
    assert resolved["lattice"]["hopping"] == 1.0
    assert sc.particles == 2
    assert set(resolved["tolerances"]) >= {"probability_sum", "composition", "sum_rule"}


def test_schedule_must_increase():
    with pytest.raises(ScenarioError, match="schedule not increasing"):
        parse_scenario(_base(schedule=[2.0, 1.0]))


def test_fermion_coincidence_rejected():
    with pytest.raises(ScenarioError, match="exclusion"):
        parse_scenario(_base(initial={"amplitudes": [{"positions": [3, 3]}]}))


def test_unknown_key_rejected():
    with pytest.raises(ScenarioError, match="colour"):
        parse_scenario(_base(colour="blue"))


def test_unknown_analysis_rejected():
    with pytest.raises(ScenarioError):
        parse_scenario(_base(analyses=["teleport"]))


def test_yaml_error_reports_line(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("statistics: boson\nlattice: {sites: 4\nschedule: [1]\n")
    with pytest.raises(ScenarioError, match=r"line \d+"):
        load_scenario(bad)


def test_bunching_table_sums_to_one(tmp_path):
    tables = {t.name: t for t in run(load_scenario(SCENARIOS / "bunching.yaml"), tmp_path)}
    probs = dict(zip(zip(tables["transition_map"].column("e0"), tables["transition_map"].column("e1")),
                     tables["transition_map"].column("probability")))
    assert math.isclose(sum(probs.values()), 1, abs_tol=1e-10)
    assert probs[(0, 0)] == pytest.approx(0.5, abs=1e-10)
    assert probs[(1, 1)] == pytest.approx(0.5, abs=1e-10)
    assert tables["distance"].rows[0][2] == pytest.approx(1, abs=1e-10)
    assert tables["composition_check"].metadata["pass"]


def test_candidate_scan_scenario(tmp_path):
    run(load_scenario(SCENARIOS / "candidate_scan.yaml"), tmp_path)
    table = read_table(tmp_path / "candidate_scan.csv")
    assert table.metadata["survivors"] == "plus minus"
    assert table.metadata["analysis"] == "candidate_scan"


def test_sum_rule_scenario(tmp_path):
    tables = {t.name: t for t in run(load_scenario(SCENARIOS / "separated_packets.yaml"), tmp_path)}
    assert tables["sum_rule_demo"].metadata["max_difference"] < 1e-12
    assert max(tables["swap"].column("swap_probability")) < 1e-6
    assert all(tables["swap"].column("isolated"))
    assert tables["tracks"].metadata["confidence"] > 0.999
    assert max(tables["dirac_contrast"].column("phi_a_density")) > 0


def test_outputs_are_deterministic(tmp_path):
    sc = load_scenario(SCENARIOS / "separated_packets.yaml")
    run(sc, tmp_path / "a")
    run(sc, tmp_path / "b")
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_read_table_round_trip(tmp_path):
    table = run(parse_scenario(_base()), tmp_path)[0]
    back = read_table(tmp_path / "transition_map.csv")
    assert back.columns == table.columns
    assert len(back.rows) == len(table.rows)
    for a, b in zip(back.rows, table.rows):
        assert a == pytest.approx(tuple(float(v) for v in b), rel=0, abs=0)


def test_cli_run(tmp_path, capsys):
    assert main(["run", "--scenario", str(SCENARIOS / "bunching.yaml"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "transition_map.csv").exists()
    assert (tmp_path / "scenario.resolved.yaml").exists()


def test_cli_run_bad_scenario(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("statistics: anyon\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "out")]) == 2


def test_cli_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "12/12 criteria passed" in out


def test_cli_verify_impossible_tolerance():
    assert main(["verify", "--only", "composition", "--tol", "composition=1e-30"]) == 1


def test_cli_verify_usage_errors():
    assert main(["verify", "--only"]) == 2
    assert main(["verify", "--tol", "nonsense=1"]) == 2
    assert main(["verify", "--only", "nonsense"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--tol", "composition"])
    assert exc.value.code == 2


def test_cli_scan(tmp_path, capsys):
    assert main(["scan", "--seeds", "5", "--out", str(tmp_path)]) == 0
    assert "plus minus" in capsys.readouterr().out
    assert main(["scan", "--seeds", "0"]) == 2
