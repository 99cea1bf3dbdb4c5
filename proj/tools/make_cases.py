#!/usr/bin/env python3
"""Regenerates the JSON fixtures in cases/.

The 13-bus feeder uses the standard IEEE 13 node line configurations
(601-607, ohm/mile and uS/mile), segment lengths and spot loads. Departures
from the published feeder, all deliberate:

* The 650 -> 632 regulator and the 2000 ft line behind it are merged into a
  single fixed-tap regulator whose leakage admittance is the positive-sequence
  admittance of that line. This keeps the feeder at 13 buses.
* The 671 -> 692 switch is a very short 601 segment.
* The distributed load along 632-671 is lumped at 671.
* Line charging is split evenly between both ends of each segment.
* Seven single-phase PV inverters rated 50 kVA are added (see PV_PLACEMENT).
* Regulator taps and load scaling are chosen so that the feeder starts
  moderately unbalanced and the PV inverters can bring it within the
  2 % / 2 % / 3 % limits.
"""

import json
import math
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "cases"


def dump(name, doc):
    (OUT / name).write_text(json.dumps(doc, indent=2) + "\n")


def zmat(rows):
    return [[z.real, z.imag] for row in rows for z in row]


def min2bus():
    return {
        "name": "min2bus",
        "notes": "Three-phase source feeding a single-phase constant-power load over one branch.",
        "base": {"s_kva": 1000.0},
        "buses": [
            {"id": "1", "phases": "abc", "kind": "slack", "base_kv": 2.4},
            {"id": "2", "phases": "a", "base_kv": 2.4, "v_min": 0.8, "v_max": 1.1},
        ],
        "branches": [
            {"id": "1-2", "from": "1", "to": "2", "phases": "a",
             "z_series": {"unit": "pu", "values": [[0.01, 0.1]]}},
        ],
        "loads": [{"id": "L2", "bus": "2", "config": "wye", "phases": "a", "unit": "pu",
                   "p": [0.1, 0, 0], "q": [0.05, 0, 0]}],
    }


def balanced4():
    zs, zm = complex(0.02, 0.06), complex(0.006, 0.02)
    z = [[zs if i == j else zm for j in range(3)] for i in range(3)]
    line = lambda f, t: {"id": f"{f}-{t}", "from": f, "to": t, "phases": "abc",
                         "z_series": {"unit": "pu", "values": zmat(z)},
                         "b_shunt": {"unit": "pu", "values": [0.001, 0.001, 0.001]}}
    return {
        "name": "balanced4",
        "notes": "Phase-symmetric impedances, balanced loads and one inverter per phase at bus 4.",
        "base": {"s_kva": 1000.0},
        "buses": [
            {"id": "1", "phases": "abc", "kind": "slack", "base_kv": 2.4018},
            {"id": "2", "phases": "abc", "base_kv": 2.4018},
            {"id": "3", "phases": "abc", "base_kv": 2.4018},
            {"id": "4", "phases": "abc", "base_kv": 2.4018},
        ],
        "branches": [line("1", "2"), line("2", "3"), line("3", "4")],
        "loads": [
            {"id": "L3", "bus": "3", "config": "wye", "phases": "abc", "unit": "kW", "p": [150, 0, 0], "q": [60, 0, 0]},
            {"id": "L4", "bus": "4", "config": "wye", "phases": "abc", "unit": "kW", "p": [100, 20, 0], "q": [40, 0, 10]},
            {"id": "D4", "bus": "4", "config": "delta", "phases": "ab", "unit": "kW", "p": [30, 0, 0], "q": [10, 0, 0]},
            {"id": "D4b", "bus": "4", "config": "delta", "phases": "bc", "unit": "kW", "p": [30, 0, 0], "q": [10, 0, 0]},
            {"id": "D4c", "bus": "4", "config": "delta", "phases": "ca", "unit": "kW", "p": [30, 0, 0], "q": [10, 0, 0]},
        ],
        "inverters": [
            {"id": "pv4a", "bus": "4", "phase": "a", "unit": "kW", "s_rating": 50, "p_output": 20},
            {"id": "pv4b", "bus": "4", "phase": "b", "unit": "kW", "s_rating": 50, "p_output": 20},
            {"id": "pv4c", "bus": "4", "phase": "c", "unit": "kW", "s_rating": 50, "p_output": 20},
        ],
    }


def unbal4_2inv():
    z = [[complex(0.03, 0.07), complex(0.01, 0.03), complex(0.01, 0.025)],
         [complex(0.01, 0.03), complex(0.03, 0.072), complex(0.01, 0.028)],
         [complex(0.01, 0.025), complex(0.01, 0.028), complex(0.03, 0.069)]]
    line = lambda f, t: {"id": f"{f}-{t}", "from": f, "to": t, "phases": "abc",
                         "z_series": {"unit": "pu", "values": zmat(z)}}
    return {
        "name": "unbal4_2inv",
        "notes": "Unbalanced 4-bus radial feeder with two single-phase inverters on the heavy phase.",
        "base": {"s_kva": 1000.0},
        "buses": [
            {"id": "1", "phases": "abc", "kind": "slack", "base_kv": 2.4018},
            {"id": "2", "phases": "abc", "base_kv": 2.4018},
            {"id": "3", "phases": "abc", "base_kv": 2.4018},
            {"id": "4", "phases": "abc", "base_kv": 2.4018},
        ],
        "branches": [line("1", "2"), line("2", "3"), line("3", "4")],
        "loads": [
            {"id": "L2", "bus": "2", "config": "wye", "phases": "abc", "unit": "kW", "p": [60, 0, 0], "q": [25, 0, 0]},
            {"id": "L3a", "bus": "3", "config": "wye", "phases": "a", "unit": "kW", "p": [260, 0, 0], "q": [120, 0, 0]},
            {"id": "L3b", "bus": "3", "config": "wye", "phases": "b", "unit": "kW", "p": [90, 0, 0], "q": [40, 0, 0]},
            {"id": "L4a", "bus": "4", "config": "wye", "phases": "a", "unit": "kW", "p": [180, 0, 20], "q": [90, 0, 0]},
            {"id": "L4c", "bus": "4", "config": "wye", "phases": "c", "unit": "kW", "p": [70, 0, 0], "q": [30, 0, 0]},
        ],
        "inverters": [
            {"id": "pv3a", "bus": "3", "phase": "a", "unit": "kW", "s_rating": 50, "p_output": 30},
            {"id": "pv4a", "bus": "4", "phase": "a", "unit": "kW", "s_rating": 50, "p_output": 30},
        ],
    }


# IEEE 13 node line configurations: impedance (ohm/mile) over the listed
# phases and the diagonal of the shunt susceptance (uS/mile).
CONFIGS = {
    "601": ("abc",
            [[0.3465 + 1.0179j, 0.1560 + 0.5017j, 0.1580 + 0.4236j],
             [0.1560 + 0.5017j, 0.3375 + 1.0478j, 0.1535 + 0.3849j],
             [0.1580 + 0.4236j, 0.1535 + 0.3849j, 0.3414 + 1.0348j]],
            [6.2998, 5.9597, 5.6386]),
    "602": ("abc",
            [[0.7526 + 1.1814j, 0.1580 + 0.4236j, 0.1560 + 0.5017j],
             [0.1580 + 0.4236j, 0.7475 + 1.1983j, 0.1535 + 0.3849j],
             [0.1560 + 0.5017j, 0.1535 + 0.3849j, 0.7436 + 1.2112j]],
            [5.6990, 5.1795, 5.4246]),
    "603": ("bc",
            [[1.3294 + 1.3471j, 0.2066 + 0.4591j],
             [0.2066 + 0.4591j, 1.3238 + 1.3569j]],
            [4.7097, 4.6658]),
    "604": ("ac",
            [[1.3238 + 1.3569j, 0.2066 + 0.4591j],
             [0.2066 + 0.4591j, 1.3294 + 1.3471j]],
            [4.6658, 4.7097]),
    "605": ("c", [[1.3292 + 1.3475j]], [4.5193]),
    "606": ("abc",
            [[0.7982 + 0.4463j, 0.3192 + 0.0328j, 0.2849 - 0.0143j],
             [0.3192 + 0.0328j, 0.7891 + 0.4041j, 0.3192 + 0.0328j],
             [0.2849 - 0.0143j, 0.3192 + 0.0328j, 0.7982 + 0.4463j]],
            [96.8897, 96.8897, 96.8897]),
    "607": ("a", [[1.3425 + 0.5124j]], [88.9912]),
}

SEGMENTS = [  # from, to, length ft, config
    ("632", "633", 500, "602"),
    ("632", "645", 500, "603"),
    ("645", "646", 300, "603"),
    ("632", "671", 2000, "601"),
    ("671", "684", 300, "604"),
    ("671", "680", 1000, "601"),
    ("671", "692", 1, "601"),
    ("684", "611", 300, "605"),
    ("684", "652", 800, "607"),
    ("692", "675", 500, "606"),
]

BUSES = [("650", "abc"), ("632", "abc"), ("633", "abc"), ("634", "abc"), ("645", "bc"), ("646", "bc"),
         ("671", "abc"), ("680", "abc"), ("684", "ac"), ("611", "c"), ("652", "a"), ("692", "abc"),
         ("675", "abc")]

# (bus, config, phases, [P_P, P_I, P_Z] kW, [Q_P, Q_I, Q_Z] kVAR)
LOADS = [
    ("634", "wye", "a", [160, 0, 0], [110, 0, 0]),
    ("634", "wye", "b", [120, 0, 0], [90, 0, 0]),
    ("634", "wye", "c", [120, 0, 0], [90, 0, 0]),
    ("645", "wye", "b", [170, 0, 0], [125, 0, 0]),
    ("646", "delta", "bc", [0, 0, 230], [0, 0, 132]),
    ("652", "wye", "a", [0, 0, 128], [0, 0, 86]),
    ("671", "delta", "ab", [385, 0, 0], [220, 0, 0]),
    ("671", "delta", "bc", [385, 0, 0], [220, 0, 0]),
    ("671", "delta", "ca", [385, 0, 0], [220, 0, 0]),
    ("671", "wye", "a", [17, 0, 0], [10, 0, 0]),
    ("671", "wye", "b", [66, 0, 0], [38, 0, 0]),
    ("671", "wye", "c", [117, 0, 0], [68, 0, 0]),
    ("675", "wye", "a", [485, 0, 0], [190, 0, 0]),
    ("675", "wye", "b", [68, 0, 0], [60, 0, 0]),
    ("675", "wye", "c", [290, 0, 0], [212, 0, 0]),
    ("692", "delta", "ca", [0, 170, 0], [0, 151, 0]),
    ("611", "wye", "c", [0, 170, 0], [0, 80, 0]),
]

SHUNTS = [("675", "abc", 200.0), ("611", "c", 100.0)]

PV_RATING_KVA = 50.0
PV_OUTPUT_KW = 30.0
PV_PLACEMENT = [("675", "b"), ("680", "b"), ("671", "b"), ("692", "b"), ("633", "b"), ("634", "b"), ("680", "a")]
TAPS = [1.05625, 1.0375, 1.05625]
LOAD_SCALE = 0.85


def ieee13(taps=TAPS, load_scale=LOAD_SCALE, placement=PV_PLACEMENT, pv_output=PV_OUTPUT_KW):
    s_kva = 5000.0 / 3.0
    kv = 4.16 / math.sqrt(3.0)
    buses = []
    for bid, ph in BUSES:
        b = {"id": bid, "phases": ph, "base_kv": 0.48 / math.sqrt(3.0) if bid == "634" else kv}
        if bid == "650":
            b["kind"] = "slack"
        buses.append(b)
    branches = []
    for f, t, ft, cfg in SEGMENTS:
        ph, z, b = CONFIGS[cfg]
        branches.append({
            "id": f"{f}-{t}", "from": f, "to": t, "phases": ph,
            "length": {"value": ft, "unit": "ft"},
            "z_series": {"unit": "ohm/mi", "values": zmat(z)},
            "b_shunt": {"unit": "uS/mi", "values": [v / 2.0 for v in b]},
        })
    # Positive-sequence admittance of the 2000 ft 601 segment behind the regulator.
    _, z601, _ = CONFIGS["601"]
    z_self = sum(z601[i][i] for i in range(3)) / 3.0
    z_mut = (z601[0][1] + z601[1][2] + z601[0][2]) / 3.0
    z1 = (z_self - z_mut) * 2000.0 / 5280.0
    y1_siemens = 1.0 / z1
    loads = []
    for i, (bus, cfg, ph, p, q) in enumerate(LOADS):
        loads.append({"id": f"L{bus}{ph}{i}", "bus": bus, "config": cfg, "phases": ph, "unit": "kW",
                      "p": [v * load_scale for v in p], "q": [v * load_scale for v in q]})
    shunts = [{"id": f"C{bus}", "bus": bus, "phases": ph, "unit": "kVAR", "q": q} for bus, ph, q in SHUNTS]
    inverters = [{"id": f"pv{bus}{ph}", "bus": bus, "phase": ph, "unit": "kW",
                  "s_rating": PV_RATING_KVA, "p_output": pv_output} for bus, ph in placement]
    return {
        "name": "ieee13_mod",
        "notes": __doc__.strip(),
        "base": {"s_kva": s_kva},
        "buses": buses,
        "branches": branches,
        "regulators": [{"id": "reg650", "from": "650", "to": "632", "taps": list(taps),
                        "y_t": {"unit": "S", "value": [y1_siemens.real, y1_siemens.imag]}}],
        "transformers": [{"id": "xfm1", "from": "633", "to": "634", "connection": "YNyn0",
                          "z_pct": {"value": [1.1, 2.0], "rating_kva": 500.0}}],
        "loads": loads,
        "shunts": shunts,
        "inverters": inverters,
    }


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    dump("min2bus.json", min2bus())
    dump("balanced4.json", balanced4())
    dump("unbal4_2inv.json", unbal4_2inv())
    dump("ieee13_mod.json", ieee13())
    print("wrote", ", ".join(sorted(p.name for p in OUT.glob("*.json"))), file=sys.stderr)
