"""POP container and its JSON file format."""

import json

import numpy as np
import pytest

from homsos.poly import Polynomial, VariableTable, parse_poly
from homsos.pop import POP

from conftest import random_point


def _toy_pop():
    t = VariableTable(["x1", "x2"])
    return POP(
        table=t,
        objective=parse_poly("x1^4 + x2^4 - x1*x2", t),
        ineqs=[parse_poly("x1 + x2", t)],
        eqs=[parse_poly("x1^2 - x2", t)],
        cliques=[[0, 1]],
    )


def test_json_roundtrip(tmp_path):
    pop = _toy_pop()
    path = tmp_path / "p.json"
    pop.dump(str(path))
    back = POP.load(str(path))
    assert back.table.names == pop.table.names
    assert back.objective == pop.objective
    assert back.ineqs == pop.ineqs
    assert back.eqs == pop.eqs
    assert back.cliques == pop.cliques


def test_json_senses(tmp_path):
    # "<=0" constraints load as negated ">=0"
    obj = {
        "variables": ["x"],
        "objective": "x^2",
        "constraints": [{"poly": "x - 1", "sense": "<=0"}],
    }
    pop = POP.from_json_obj(obj)
    t = pop.table
    assert pop.ineqs == [parse_poly("1 - x", t)]


def test_eval_feasibility():
    pop = _toy_pop()
    feasible = {0: 1.0, 1: 1.0}          # x1+x2 >= 0, x1^2 == x2
    assert pop.eval_feasibility(feasible) == pytest.approx(0.0, abs=1e-12)
    infeasible = {0: -1.0, 1: -2.0}
    assert pop.eval_feasibility(infeasible) > 0.5


def test_text_and_termlist_forms_agree():
    t_obj = {
        "variables": ["x1", "x2"],
        "objective": "2*x1^2*x2 - 1",
        "constraints": [],
    }
    pop_a = POP.from_json_obj(t_obj)
    json_form = pop_a.to_json_obj()
    pop_b = POP.from_json_obj(json_form)
    assert pop_a.objective == pop_b.objective
