import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from irsense.crb import crb_fp, crb_ms_opt
from irsense.exceptions import DomainError
from irsense.experiments import (Scenario, Table, emit_outputs, load_scenario, read_csv, run_beampattern,
                                 run_budget_report, run_crb_vs_power, run_crb_vs_sensors, run_placement_report,
                                 write_csv)


def test_scenario_defaults_match_simulation_setup():
    c = Scenario().config()
    assert (c.d_BI, c.d_IT, c.T, c.wavelength, c.d_min, c.D) == (60.0, 20.0, 64, 0.2, 0.1, 2.0)
    assert c.kappa == pytest.approx(10**0.7, rel=1e-12)
    assert c.theta == pytest.approx(math.radians(60), rel=1e-12)
    assert c.sigma2 == pytest.approx(1e-12, rel=1e-12)
    assert c.P0 == pytest.approx(10**1.5 * 1e-3, rel=1e-12)


def test_scenario_rejects_unknown_keys(tmp_path):
    for bad in ({"Mx": 3}, {"sweep": {"parameter": "K", "values": [4], "step": 1}},
                {"budget": {"Q": 10, "foo": 1}}, {"setups": [{"M": 32, "L": 2}]}):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(bad))
        with pytest.raises(DomainError, match="unknown key"):
            load_scenario(p)


def test_scenario_validation(tmp_path):
    for bad in ({"M": 3}, {"schemes": []}, {"schemes": ["XX"]}, {"seed": -1}, {"seed": 2**64},
                {"sweep": {"parameter": "kappa", "values": [1]}}, {"sweep": {"parameter": "N", "values": [3]}},
                {"theta_deg": 90}, {"D": 0.5}):
        with pytest.raises(DomainError):
            Scenario.from_dict(bad)
    p = tmp_path / "broken.json"
    p.write_text("{")
    with pytest.raises(DomainError):
        load_scenario(p)


def test_scenario_roundtrip_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"name": "x", "P0_dbm": 20, "sweep": {"parameter": "K", "values": [4, 8]},
                             "schemes": ["MS", "FP"]}))
    sc = load_scenario(p)
    assert sc.name == "x" and sc.sweep == ("K", (4, 8)) and sc.schemes == ("FP", "MS")
    assert sc.config().P0 == pytest.approx(0.1, rel=1e-12)


def test_crb_vs_power_rows():
    t = run_crb_vs_power(Scenario(schemes=("MS", "FP")))
    crb = dict(((r[0], r[1], r[2], r[3], r[4]), r[5]) for r in t.rows)
    assert crb[(15.0, 32, 32, 8, "MS")] == pytest.approx(-4.16, abs=5e-3)
    for (p, M, N, K, s), v in crb.items():
        if (p + 5, M, N, K, s) in crb:
            assert crb[(p + 5, M, N, K, s)] - v == pytest.approx(-5.0, abs=1e-9)
    assert crb[(15.0, 32, 32, 8, "MS")] - crb[(15.0, 32, 64, 8, "MS")] == pytest.approx(10 * math.log10(4))
    # harness adds no arithmetic
    sc = Scenario()
    for r in t.rows:
        c = sc.config(P0_dbm=r[0], M=r[1], N=r[2], K=r[3])
        expected = crb_fp(c) if r[4] == "FP" else crb_ms_opt(c)
        assert r[5] == expected.crb_db


def test_crb_vs_k_gap():
    t = run_crb_vs_sensors(Scenario(schemes=("MS", "FP")))
    ms = {(r[0], r[1]): r for r in t.rows if r[2] == "MS"}
    for N in (32, 64):
        assert ms[(20, N)][4] == pytest.approx(0.6367, abs=1e-3)
        assert ms[(4, N)][4] > ms[(20, N)][4]
        gaps = [ms[(K, N)][4] for K in range(4, 21, 2)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
    deltas = [r[5] for r in ms.values() if r[5] is not None]
    assert deltas and all(d >= 0 for d in deltas)


def test_crb_vs_k_skips_odd_K():
    t = run_crb_vs_sensors(Scenario(sweep=("K", (5, 6))))
    assert {r[0] for r in t.rows} == {6}
    assert any("K=5" in what for what, _ in t.skipped)


def test_beampattern_run():
    spectra, summary = run_beampattern(Scenario(grid_step=0.05))
    rows = {r[0]: r for r in summary.rows}
    assert set(rows) == {"FP", "MS", "MS-Interp"}
    for r in rows.values():
        assert abs(r[1] - 60.0) <= 0.05
    assert rows["MS-Interp"][3] < rows["MS"][3] < rows["FP"][3]
    for s in ("FP", "MS", "MS-Interp"):
        assert max(v for sc, _, v in spectra.rows if sc == s) == 0.0


def test_placement_report():
    t = run_placement_report(Scenario(system={**Scenario().system, "L": 2}))
    (row,) = t.rows
    assert row[3] == "0.0 0.1 1.9 2.0" and row[4] == pytest.approx(0.905) and row[7] is True
    t = run_placement_report(Scenario(sweep=("L", (3,))))
    assert [r[2] for r in t.rows] == ["left", "right"]
    assert t.rows[0][5] == pytest.approx(t.rows[1][5], rel=1e-12)
    bound = Scenario(system={**Scenario().system, "D": 0.7})
    (row,) = run_placement_report(bound).rows
    assert row[8] == pytest.approx(0.0, abs=1e-12)


def test_placement_oracle_refusal_recorded():
    sc = Scenario(system={**Scenario().system, "D": 20.0, "Kb": 1, "L": 8})
    (row,) = run_placement_report(sc, grid_step=0.01).rows
    assert row[6] is None and row[7] is None and row[9].startswith("oracle refused")
    assert row[4] > 0


def test_budget_report():
    sc = Scenario(budget={"Q": 200, "W1": 1, "W2": 10, "parity": "both"})
    rows, roots = run_budget_report(sc)
    winners = [r for r in rows.rows if r[5]]
    assert len(winners) == 1 and winners[0][:2] == (4, 160)
    assert all(r[4] <= 200 for r in rows.rows)
    assert roots.rows
    empty, _ = run_budget_report(Scenario(budget={"Q": 10.5, "W1": 1, "W2": 4, "parity": "odd"}))
    assert not empty.rows and empty.skipped


# --- output ------------------------------------------------------------------

values = st.one_of(st.none(), st.booleans(), st.integers(-10**6, 10**6),
                   st.floats(allow_nan=False, allow_infinity=False),
                   st.text(st.characters(blacklist_categories=("Cs", "Cc")), max_size=12))


@given(st.lists(st.tuples(values, values), max_size=8))
def test_csv_roundtrip(tmp_path_factory, rows):
    t = Table("t", ("a", "b"), rows=list(rows))
    p = write_csv(t, tmp_path_factory.mktemp("csv") / "t.csv")
    header, got = read_csv(p)
    assert header == ("a", "b")

    def parse(cell, orig):
        if orig is None:
            return None
        if isinstance(orig, bool):
            return cell == "true"
        if isinstance(orig, int):
            return int(cell)
        if isinstance(orig, float):
            return float(cell)
        return cell

    assert [tuple(parse(c, o) for c, o in zip(g, r)) for g, r in zip(got, rows)] == list(rows)


def test_csv_rfc4180_bytes(tmp_path):
    t = Table("t", ("x", "y"), rows=[(1.5, 'a,"b"'), (None, True)])
    data = open(write_csv(t, tmp_path / "o.csv"), "rb").read()
    assert data == b'x,y\r\n1.5,"a,""b"""\r\n,true\r\n'


def test_emit_outputs_plot_flag(tmp_path):
    t = run_crb_vs_power(Scenario(schemes=("MS",)))
    a = emit_outputs([t], tmp_path / "a", "s", plot=False)
    b = emit_outputs([t], tmp_path / "b", "s", plot=True)
    assert [p.endswith(".svg") for p in a] == [False]
    assert sorted(p.rsplit(".", 1)[1] for p in b) == ["csv", "svg"]
    svg = open(b[1], encoding="utf-8").read()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    c = emit_outputs([t], tmp_path / "c", "s", plot=True)
    assert open(b[0], "rb").read() == open(c[0], "rb").read()
    assert open(b[1], "rb").read() == open(c[1], "rb").read()


def test_emit_outputs_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError) as info:
        emit_outputs([Table("t", ("a",))], blocker / "sub", "s")
    assert str(blocker / "sub") in str(info.value)
