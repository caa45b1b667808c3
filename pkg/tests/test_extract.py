"""Flat truncation, atom extraction, and certificate verification.

Oracle strategy: problems whose minimizers are known in closed form
(stationary-point calculus on univariate/bivariate polynomials); the
extracted atoms must reproduce them.  Synthetic moment vectors built as
convex combinations of Dirac moments give exact rank control for the
flat-truncation unit tests.
"""

import math

import numpy as np
import pytest

from homsos import extract, pipeline, reform, relax, sdp
from homsos.poly import VariableTable, parse_poly
from homsos.pop import POP
from homsos.problems import example


def _pop(vars_, obj, ineqs=(), eqs=(), cliques=None):
    t = VariableTable(list(vars_))
    return POP(
        table=t,
        objective=parse_poly(obj, t),
        ineqs=[parse_poly(s, t) for s in ineqs],
        eqs=[parse_poly(s, t) for s in eqs],
        cliques=cliques if cliques is not None else [list(range(len(t)))],
    )


def _mix(sdp_, points, weights):
    y = np.zeros(sdp_.num_y)
    for w, pt in zip(weights, points):
        y += w * relax.dirac_moments(sdp_, pt)
    return y


class TestNumericRank:
    def test_exact_ranks(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=(6, 2))
        m = v @ v.T
        assert extract.numeric_rank(m, 1e-8) == 2
        assert extract.numeric_rank(np.zeros((4, 4)), 1e-8) == 0
        assert extract.numeric_rank(np.eye(5), 1e-8) == 5


class TestFlatOnSyntheticMoments:
    def _sdp(self, k=2):
        pop = _pop(["x", "y"], "x^2 + y^2")
        hom = reform.build(pop, "ssos")
        return relax.assemble(hom, k)

    def test_single_atom_flat(self):
        s = self._sdp()
        y = _mix(s, [{0: 0.5, 1: -1.5}], [1.0])
        rep = extract.flat_truncation(s, y)
        assert rep.flat
        assert all(r == (1, 1) for r in rep.clique_ranks)

    def test_two_atoms_flat(self):
        s = self._sdp(k=3)
        y = _mix(s, [{0: 1.0, 1: 2.0}, {0: -1.0, 1: 0.5}], [0.5, 0.5])
        rep = extract.flat_truncation(s, y)
        assert rep.flat
        assert rep.clique_ranks[0] == (2, 2)

    def test_atoms_recovered(self):
        s = self._sdp(k=3)
        pts = [{0: 1.0, 1: 2.0}, {0: -1.0, 1: 0.5}]
        y = _mix(s, pts, [0.3, 0.7])
        rep = extract.flat_truncation(s, y)
        atoms = extract.extract_atoms(s, y, rep.t)
        assert len(atoms) == 2
        got = sorted((round(a[0], 6), round(a[1], 6)) for a in atoms)
        want = sorted((p[0], p[1]) for p in pts)
        assert got == pytest.approx(want, abs=1e-6)

    def test_generic_moments_not_flat(self):
        # moments of a 5-atom measure cannot be flat at k=2 over 2 vars
        # with rank M_1 <= 3
        s = self._sdp(k=2)
        rng = np.random.default_rng(3)
        pts = [{0: float(rng.normal()), 1: float(rng.normal())}
               for _ in range(5)]
        y = _mix(s, pts, [0.2] * 5)
        rep = extract.flat_truncation(s, y)
        assert not rep.flat


class TestEndToEnd:
    def test_univariate_two_minimizers(self):
        # x^4 - 2x^2 has minimizers +-1 with value -1
        pop = _pop(["x"], "x^4 - 2*x^2")
        cfg = pipeline.RunConfig(hierarchy="ssos", order=2,
                                 backend="clarabel")
        rep = pipeline.run(pop, cfg)
        assert rep.flat.flat
        xs = sorted(round(p.x[0], 5) for p in rep.points)
        assert xs == pytest.approx([-1.0, 1.0], abs=1e-4)
        assert rep.certified

    def test_constrained_boundary_minimizer(self):
        # min x on x^2 <= 1 -> unique minimizer -1
        pop = _pop(["x"], "x", ineqs=["1 - x^2"])
        cfg = pipeline.RunConfig(hierarchy="ssos", order=1,
                                 backend="clarabel")
        rep = pipeline.run(pop, cfg)
        assert rep.flat.flat
        assert len(rep.points) == 1
        assert rep.points[0].x[0] == pytest.approx(-1.0, abs=1e-5)
        assert rep.certified

    def test_homogenized_extraction_dehomogenizes(self):
        # same problem through the dense homogenized formulation: the
        # extracted lifted point must map back to x = -1
        pop = _pop(["x"], "x", ineqs=["1 - x^2"])
        cfg = pipeline.RunConfig(hierarchy="hsos", order=2,
                                 backend="clarabel")
        rep = pipeline.run(pop, cfg)
        finite = [p for p in rep.points if not p.at_infinity]
        assert finite
        assert finite[0].x[0] == pytest.approx(-1.0, abs=1e-4)
        assert finite[0].feas_residual < 1e-6

    def test_sparse_gluing_across_cliques(self):
        # two cliques sharing y; unique minimizer (1, 2, 3)
        pop = _pop(
            ["x", "y", "z"],
            "x^2 - 2*x + y^2 - 4*y + z^2 - 6*z + 14",
            cliques=[[0, 1], [1, 2]],
        )
        cfg = pipeline.RunConfig(hierarchy="ssos", order=1,
                                 backend="clarabel")
        rep = pipeline.run(pop, cfg)
        assert rep.bound == pytest.approx(0.0, abs=1e-6)
        assert rep.flat.flat
        pt = rep.points[0].x
        assert [pt[0], pt[1], pt[2]] == pytest.approx([1.0, 2.0, 3.0],
                                                      abs=1e-4)

    def test_at_infinity_direction_reported(self):
        # infimum 0 not attained: (xy - 1)^2 + x^2; the homogenized
        # relaxation's measure concentrates at x0 = 0
        pop = _pop(["x", "y"], "x^2*y^2 - 2*x*y + 1 + x^2")
        cfg = pipeline.RunConfig(hierarchy="hsos", order=3,
                                 backend="clarabel", x0_tol=1e-3)
        rep = pipeline.run(pop, cfg)
        if rep.flat is not None and rep.points:
            assert any(p.at_infinity for p in rep.points)
            # at-infinity points must not be dehomogenized
            for p in rep.points:
                if p.at_infinity:
                    assert p.x is None


class TestCertificate:
    def test_residual_small_on_clean_solve(self):
        pop = _pop(["x"], "x^4 - 2*x^2")
        cfg = pipeline.RunConfig(hierarchy="ssos", order=2,
                                 backend="clarabel")
        rep = pipeline.run(pop, cfg)
        assert rep.certificate is not None
        assert rep.certificate["passed"]
        assert rep.certificate["residual"] <= 1e-5 * rep.certificate["scale"]

    def test_certificate_across_hierarchies(self):
        pop = example("ex5.4").pop
        for hier in ("ssos", "hssos3"):
            cfg = pipeline.RunConfig(hierarchy=hier, order=2,
                                     backend="clarabel")
            rep = pipeline.run(pop, cfg, name="ex5.4")
            assert rep.certificate is not None
            # gamma in the identity is the dual bound
            assert rep.certificate["gamma"] == pytest.approx(rep.dobj)
