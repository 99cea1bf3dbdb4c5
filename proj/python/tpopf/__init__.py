"""Three-phase unbalanced distribution OPF with inverter reactive control.

Solved problems come back as plain dictionaries with the same layout as the
``*.result.json`` files written by the ``tpopf run`` command.
"""

import json

from ._tpopf import (
    GridTooLarge,
    Network,
    ParseError,
    PowerFlowError,
    UndefinedMetric,
    ValidationError,
    grid_search,
    lvur,
    pvur,
    vuf,
)
from ._tpopf import _power_flow_json, _solve_json

PROBLEMS = ("P1", "P2", "P3", "P4", "P5")

__all__ = [
    "GridTooLarge",
    "Network",
    "PROBLEMS",
    "ParseError",
    "PowerFlowError",
    "UndefinedMetric",
    "ValidationError",
    "grid_search",
    "load_case",
    "lvur",
    "power_flow",
    "pvur",
    "solve",
    "solve_all",
    "vuf",
]


def load_case(path):
    return Network.from_file(str(path))


def power_flow(network, tol=1e-8, max_iter=50):
    """Base case with every inverter at Q = 0."""
    return json.loads(_power_flow_json(network, tol, max_iter))


def solve(network, problem="P1", *, u_vuf=0.02, u_pvur=0.02, u_lvur=0.03, tol=1e-6, max_iter=3000,
          method="ipm", flat_start=False):
    text = _solve_json(network, problem, u_vuf, u_pvur, u_lvur, tol, max_iter, method, flat_start)
    return json.loads(text)


def solve_all(network, problems=PROBLEMS, **kwargs):
    return {p: solve(network, p, **kwargs) for p in problems}
