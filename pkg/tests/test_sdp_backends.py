"""SDP backends agree with closed-form optima and with each other.

Oracle strategy: tiny polynomial problems whose Lasserre relaxations
are exact and solvable by hand (stationary-point calculus) — every
backend must reproduce the known optimum; cross-backend agreement on a
larger problem catches conventions (svec ordering, scaling, dual signs)
that a single backend could get self-consistently wrong.
"""

import math

import numpy as np
import pytest

from homsos import pipeline, reform, relax, sdp, symred
from homsos.poly import VariableTable, parse_poly
from homsos.pop import POP
from homsos.problems import example

BACKENDS = ("ipm", "clarabel", "scs")
# first-order backend is intrinsically low-accuracy
ATOL = {"ipm": 1e-6, "clarabel": 1e-6, "scs": 2e-4}


def _pop(vars_, obj, ineqs=(), eqs=(), cliques=None):
    t = VariableTable(list(vars_))
    return POP(
        table=t,
        objective=parse_poly(obj, t),
        ineqs=[parse_poly(s, t) for s in ineqs],
        eqs=[parse_poly(s, t) for s in eqs],
        cliques=cliques if cliques is not None
        else [list(range(len(t)))],
    )


# (problem, hierarchy, order, exact optimum)
CASES = [
    # min x^2 over R
    (_pop(["x"], "x^2"), "ssos", 1, 0.0),
    # min (x-1)^2 over R
    (_pop(["x"], "x^2 - 2*x + 1"), "ssos", 1, 0.0),
    # min x^4 - x^2: stationary points x^2 = 1/2, value -1/4
    (_pop(["x"], "x^4 - x^2"), "ssos", 2, -0.25),
    # min x subject to x^2 <= 1
    (_pop(["x"], "x", ineqs=["1 - x^2"]), "ssos", 1, -1.0),
    # min x + y on the unit circle: -sqrt(2)
    (_pop(["x", "y"], "x + y", eqs=["x^2 + y^2 - 1"]), "ssos", 1,
     -math.sqrt(2.0)),
    # coercive quartic through the dense homogenized formulation
    (_pop(["x"], "x^4 - 2*x^2"), "hsos", 2, -1.0),
    # bivariate with full sign symmetry: a^2+b^2-ab-a-b in a=x^2, b=y^2
    # is minimal at a=b=1 with value -1
    (_pop(["x", "y"], "x^4 + y^4 - x^2*y^2 - x^2 - y^2"), "ssos", 2, -1.0),
]


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("case", range(len(CASES)))
def test_known_optimum(backend, case):
    pop, hier, k, opt = CASES[case]
    cfg = pipeline.RunConfig(hierarchy=hier, order=k, backend=backend,
                             epsilon=0.0, do_extract=False,
                             do_certify=False)
    rep = pipeline.run(pop, cfg)
    assert rep.status in ("Optimal", "NearOptimal")
    assert rep.bound == pytest.approx(opt, abs=ATOL[backend])


@pytest.mark.parametrize("backend", BACKENDS)
def test_cross_backend_agreement(backend):
    # multi-clique constrained problem at its exact order
    pop = example("ex5.4").pop
    cfg = pipeline.RunConfig(hierarchy="ssos", order=2, backend=backend,
                             do_extract=False, do_certify=False)
    rep = pipeline.run(pop, cfg)
    assert rep.status in ("Optimal", "NearOptimal")
    assert rep.bound == pytest.approx(2.0, abs=10 * ATOL[backend])


def test_symmetry_reduction_preserves_value():
    # fully sign-symmetric problem: reduced and unreduced solves agree
    pop = _pop(["x", "y"], "x^4 + y^4 - x^2*y^2 - x^2 - y^2")
    hom = reform.build(pop, "ssos")
    msdp = relax.assemble(hom, 2)
    red = symred.reduce(msdp)
    assert red is not None
    opts = sdp.SolveOptions(backend="clarabel")
    sol_red = sdp.solve(sdp.from_moment(red), opts)
    sol_full = sdp.solve(sdp.from_moment(msdp), opts)
    assert sol_red.pobj == pytest.approx(sol_full.pobj, abs=1e-6)
    # reduction must actually shrink the problem
    assert sdp.from_moment(red).num_vars < sdp.from_moment(msdp).num_vars


def test_infeasible_detected():
    # x^2 <= -1 is empty
    pop = _pop(["x"], "x", ineqs=["-1 - x^2"])
    cfg = pipeline.RunConfig(hierarchy="ssos", order=1, backend="clarabel",
                             do_extract=False, do_certify=False)
    rep = pipeline.run(pop, cfg)
    assert rep.status == "Infeasible"
    assert rep.status_flag == "**"
    assert rep.bound is None


def test_backend_env_override(monkeypatch):
    pop = _pop(["x"], "x^2")
    monkeypatch.setenv("HOMSOS_BACKEND", "ipm")
    cfg = pipeline.RunConfig(hierarchy="ssos", order=1, backend="clarabel",
                             do_extract=False, do_certify=False)
    rep = pipeline.run(pop, cfg)
    assert rep.backend == "ipm"


def test_unknown_backend_rejected():
    pop = _pop(["x"], "x^2")
    cfg = pipeline.RunConfig(hierarchy="ssos", order=1, backend="bogus")
    with pytest.raises(ValueError):
        pipeline.run(pop, cfg)


def test_dual_certificate_exposed():
    # backends return Gram matrices; the verifier consumes them
    pop = _pop(["x"], "x^4 - x^2")
    hom = reform.build(pop, "ssos")
    msdp = relax.assemble(hom, 2)
    prob = sdp.from_moment(msdp)
    for backend in ("ipm", "clarabel"):
        sol = sdp.solve(prob, sdp.SolveOptions(backend=backend))
        assert sol.gram is not None
        for g, b in zip(sol.gram, prob.blocks):
            assert g.shape == (b.side, b.side)
            assert np.linalg.eigvalsh(g)[0] > -1e-7
