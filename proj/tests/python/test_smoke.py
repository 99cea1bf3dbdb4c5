import cmath
import math
import os
from pathlib import Path

import pytest

import tpopf

CASES = Path(os.environ.get("TPOPF_CASES_DIR", Path(__file__).resolve().parents[2] / "cases"))


@pytest.fixture(scope="module")
def ieee13():
    return tpopf.load_case(CASES / "ieee13_mod.json")


def test_load_and_validate(ieee13):
    assert ieee13.validate() == []
    assert len(ieee13.inverter_ids) == 7
    assert "650" in ieee13.bus_ids
    again = tpopf.Network.from_json(ieee13.to_json())
    assert again.bus_ids == ieee13.bus_ids


def test_bad_case_raises(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError):
        tpopf.load_case(bad)


def test_metrics_on_balanced_and_unbalanced_sets():
    a = cmath.rect(1.0, math.radians(-120))
    assert tpopf.vuf(1, a, a.conjugate()) == pytest.approx(0.0, abs=1e-12)
    assert tpopf.pvur(1.05, 1.0, 0.95) == pytest.approx(0.05)
    assert tpopf.lvur(1.1, a, a.conjugate()) > 0.0


def test_power_flow(ieee13):
    base = tpopf.power_flow(ieee13)
    assert base["status"] == "converged"
    assert base["loss_kw"] > 0
    assert all(q["q_kvar"] == 0 for q in base["inverters"])


def test_solve_orders_losses(ieee13):
    res = tpopf.solve_all(ieee13, ("P1", "P2", "P5"))
    assert all(r["status"] == "optimal" for r in res.values())
    assert res["P1"]["loss_kw"] <= res["P5"]["loss_kw"] <= res["P2"]["loss_kw"]
    assert max(res["P5"]["unbalance"]["max"]) <= 0.03 + 1e-6


def test_grid_search_agrees_with_opf():
    net = tpopf.load_case(CASES / "unbal4_2inv.json")
    grid = tpopf.grid_search(net, "P1", points=11)
    opf = tpopf.solve(net, "P1")
    assert grid["evaluated"] == 11 * 11
    assert opf["objective"] <= grid["objective"] * (1 + 1e-6)


def test_unknown_problem(ieee13):
    with pytest.raises(ValueError):
        tpopf.solve(ieee13, "P9")
