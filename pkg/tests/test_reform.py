"""Hierarchy reformulations: structure and the lifted-point identities.

Oracle strategy: each reformulation is checked by lifting random
feasible points of the original problem and verifying (a) all
reformulated equality constraints vanish and inequality constraints are
nonnegative at the lifted point, and (b) the reformulated
objective/normalizer ratio reproduces the original objective value.
These identities come straight from the change of variables that
defines each hierarchy, and they hold exactly (up to roundoff) for
every feasible point, so a structural bug in any constraint is caught.
"""

import math

import numpy as np
import pytest

from homsos import reform
from homsos.poly import Polynomial, VariableTable, parse_poly
from homsos.pop import POP
from homsos.problems import example

HIERARCHIES = ("ssos", "hsos", "hssos1", "hssos2", "hssos3")


def _random_points(pop, rng, count=20, scale=2.0):
    n = len(pop.table)
    for _ in range(count):
        yield {v: float(rng.normal(scale=scale)) for v in range(n)}


def _feasible_points(name, pop, rng, count=10):
    """Random feasible points of the base problem."""
    n = len(pop.table)
    for _ in range(count):
        x = {v: float(rng.normal(scale=2.0)) for v in range(n)}
        if name == "ex5.5":
            # x2 <= x3^2, x1 >= x2*x3, x4^2+x5^2+x6^2 <= 1
            x[1] = x[2] ** 2 - abs(x[1])
            x[0] = x[1] * x[2] + abs(x[0])
            r = math.sqrt(x[3] ** 2 + x[4] ** 2 + x[5] ** 2)
            if r > 1:
                for v in (3, 4, 5):
                    x[v] *= 0.99 / r
        assert pop.eval_feasibility(x) < 1e-9
        yield x


class TestStructure:
    def test_ssos_is_identity(self):
        pop = example("ex5.2").pop
        hom = reform.build(pop, "ssos")
        assert hom.objective == pop.objective
        assert hom.normalizer == Polynomial.constant(1.0)
        assert hom.x0 is None

    @pytest.mark.parametrize("hier", ["hsos", "hssos1", "hssos2", "hssos3"])
    def test_objective_homogeneous(self, hier):
        pop = example("ex5.2").pop
        hom = reform.build(pop, hier, epsilon=0.0)
        assert hom.objective.is_homogeneous()
        assert hom.objective.degree() == pop.objective.degree()
        assert hom.normalizer.degree() == pop.objective.degree()

    def test_hssos1_aux_count(self):
        pop = example("ex5.2").pop
        hom = reform.build(pop, "hssos1", epsilon=0.0)
        p = len(hom.base_dec.cliques)
        assert len(hom.w_ids) == p
        # one sphere per clique
        spheres = [h for h, _ in hom.eqs]
        assert len(spheres) == p

    def test_hssos3_aux_count(self):
        pop = example("ex5.2").pop
        hom = reform.build(pop, "hssos3")
        p = len(hom.base_dec.cliques)
        assert len(hom.w_ids) == p - 1

    def test_hssos2_coupling_present(self):
        pop = example("ex5.2").pop
        hom = reform.build(pop, "hssos2")
        p = len(hom.base_dec.cliques)
        # one of the equalities is sum w_l^2 = p - 1
        want = Polynomial(
            {((w, 2),): 1.0 for w in hom.w_ids} | {(): float(-(p - 1))})
        assert any(h == want for h, _ in hom.eqs)

    @pytest.mark.parametrize("hier", HIERARCHIES)
    def test_constraints_fit_their_cliques(self, hier):
        for name in ("ex5.2", "ex5.4"):
            hom = reform.build(example(name).pop, hier, epsilon=1e-4)
            sets = [set(c) for c in hom.cliques]
            for poly, cls in hom.ineqs + hom.eqs:
                for c in cls:
                    assert poly.varset <= sets[c]

    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            reform.build(example("ex5.1").pop, "hssos1", epsilon=-1.0)

    def test_unknown_hierarchy(self):
        with pytest.raises(ValueError):
            reform.build(example("ex5.1").pop, "nope")

    def test_d_min_covers_all_degrees(self):
        for hier in HIERARCHIES:
            hom = reform.build(example("ex5.2").pop, hier, epsilon=1e-4)
            k = hom.d_min()
            for poly, _ in hom.ineqs + hom.eqs:
                assert poly.degree() <= 2 * k
            assert hom.objective.degree() <= 2 * k


class TestLiftedPoints:
    @pytest.mark.parametrize("hier", ["hsos", "hssos1", "hssos2", "hssos3"])
    @pytest.mark.parametrize("name", ["ex5.1", "ex5.2", "ex5.5"])
    def test_lifted_point_feasible(self, hier, name):
        pop = example(name).pop
        hom = reform.build(pop, hier, epsilon=0.0)
        rng = np.random.default_rng(42)
        for x in _feasible_points(name, pop, rng, count=10):
            pt = hom.lift_point(x)
            for h, _ in hom.eqs:
                assert abs(h.eval(pt)) < 1e-10
            for g, _ in hom.ineqs:
                assert g.eval(pt) > -1e-10

    @pytest.mark.parametrize("hier", ["hsos", "hssos1", "hssos2", "hssos3"])
    @pytest.mark.parametrize("name", ["ex5.1", "ex5.2", "ex5.5"])
    def test_objective_ratio_identity(self, hier, name):
        pop = example(name).pop
        hom = reform.build(pop, hier, epsilon=0.0)
        rng = np.random.default_rng(43)
        for x in _random_points(pop, rng, count=10):
            pt = hom.lift_point(x)
            assert hom.objective_value(pt) == pytest.approx(
                pop.objective.eval(x), rel=1e-9, abs=1e-9)

    def test_hssos1_epsilon_shifts_objective(self):
        # with epsilon > 0 the objective at a lifted point gains exactly
        # epsilon * sum z_i^{d0} in reformulated coordinates
        pop = example("ex5.2").pop
        eps = 1e-3
        hom0 = reform.build(pop, "hssos1", epsilon=0.0)
        hom1 = reform.build(pop, "hssos1", epsilon=eps)
        rng = np.random.default_rng(44)
        x = {v: float(rng.normal()) for v in range(len(pop.table))}
        pt = hom1.lift_point(x)
        diff = hom1.objective.eval(pt) - hom0.objective.eval(pt)
        z = [hom1.x0] + list(range(len(pop.table))) + hom1.w_ids
        expect = eps * sum(pt[v] ** hom1.d0 for v in z)
        assert diff == pytest.approx(expect, rel=1e-9, abs=1e-12)

    def test_lift_lands_on_spheres(self):
        # hssos1: each clique sphere; hssos2: weighted spheres and the
        # coupling identity sum w^2 = p-1 are implied by construction
        pop = example("ex5.5").pop
        hom = reform.build(pop, "hssos2")
        rng = np.random.default_rng(45)
        x = {v: float(rng.normal()) for v in range(len(pop.table))}
        pt = hom.lift_point(x)
        p = len(hom.base_dec.cliques)
        assert sum(pt[w] ** 2 for w in hom.w_ids) == pytest.approx(
            p - 1, rel=1e-10)

    def test_default_epsilon_value(self):
        assert reform.DEFAULT_EPSILON == 1e-4
