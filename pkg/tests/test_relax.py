"""Moment relaxation assembly.

Oracle strategy: the Dirac measure at any feasible point of the
reformulated problem must produce a feasible moment vector — its moment
and localizing matrices are Gram matrices of monomial vectors (hence
PSD), its zero-localizing rows vanish because the equality generator
vanishes, and the Riesz functional of the objective equals the
objective value.  This checks every index/coefficient in the assembled
blocks without reference to the assembly code itself.
"""

import math

import numpy as np
import pytest

from homsos import reform, relax
from homsos.poly import Polynomial, VariableTable, mono_degree, parse_poly
from homsos.pop import POP
from homsos.problems import example


def _hom(name, hier, epsilon=0.0):
    return reform.build(example(name).pop, hier, epsilon=epsilon)


class TestAssembleStructure:
    def test_order_below_minimum_rejected(self):
        hom = _hom("ex5.2", "hssos2")
        with pytest.raises(relax.AssemblyError):
            relax.assemble(hom, hom.d_min() - 1)

    def test_moment_block_per_clique(self):
        hom = _hom("ex5.2", "hssos3")
        sdp = relax.assemble(hom, hom.d_min())
        moments = [b for b in sdp.psd_blocks if b.kind == "moment"]
        assert len(moments) == len(hom.cliques)
        for b, cl in zip(moments, hom.cliques):
            assert b.side == math.comb(len(cl) + sdp.k, sdp.k)

    def test_index_is_union_of_clique_monomials(self):
        hom = _hom("ex5.4", "hssos2")
        k = hom.d_min()
        sdp = relax.assemble(hom, k)
        sets = [set(c) for c in hom.cliques]
        for m in sdp.monomials:
            assert mono_degree(m) <= 2 * k
            vars_of_m = {v for v, _ in m}
            assert any(vars_of_m <= s for s in sets)
        # index is a bijection
        assert len(sdp.index) == sdp.num_y == len(sdp.monomials)

    def test_localizing_order_drop(self):
        hom = _hom("ex5.2", "hssos2")
        k = hom.d_min() + 1
        sdp = relax.assemble(hom, k)
        for b in sdp.psd_blocks:
            if b.kind == "localizing":
                assert b.order == k - (b.gen.degree() + 1) // 2

    def test_zero_rows_counted(self):
        hom = _hom("ex5.2", "hssos3")
        sdp = relax.assemble(hom, hom.d_min())
        total = sum(len(z.gammas) for z in sdp.zero_groups)
        assert sdp.num_eq_rows == total

    def test_sos_dimensions_mirror_primal(self):
        hom = _hom("ex5.2", "hssos2")
        k = hom.d_min()
        sdp = relax.assemble(hom, k)
        dims = relax.sos_side_dimensions(hom, k)
        primal = sorted(b.side for b in sdp.psd_blocks)
        dual = sorted(g["side"] for g in dims["gram_blocks"])
        assert primal == dual


class TestDiracOracle:
    @pytest.mark.parametrize("hier", ["ssos", "hsos", "hssos1", "hssos2",
                                      "hssos3"])
    def test_dirac_feasible(self, hier):
        pop = example("ex5.2").pop
        hom = reform.build(pop, hier, epsilon=0.0)
        sdp = relax.assemble(hom, hom.d_min())
        rng = np.random.default_rng(7)
        for _ in range(5):
            x = {v: float(rng.normal()) for v in range(len(pop.table))}
            pt = hom.lift_point(x)
            y = relax.dirac_moments(sdp, pt)
            # feasible moment vectors are normalized: <normalizer, y> = 1;
            # scaling preserves PSD-ness and the zero rows
            y = y / relax.riesz(sdp.norm_row, y)
            chk = relax.check_moments(sdp, y)
            assert chk["min_psd_eig"] > -1e-8
            assert chk["max_zero_row"] < 1e-9
            assert chk["norm_residual"] < 1e-9

    def test_dirac_objective_matches_riesz(self):
        pop = example("ex5.2").pop
        hom = reform.build(pop, "hssos3")
        sdp = relax.assemble(hom, hom.d_min())
        rng = np.random.default_rng(8)
        x = {v: float(rng.normal()) for v in range(len(pop.table))}
        pt = hom.lift_point(x)
        y = relax.dirac_moments(sdp, pt)
        got = relax.riesz(sdp.objective, y)
        assert got == pytest.approx(hom.objective.eval(pt), rel=1e-10)
        # with the normalization <normalizer, y> = 1 enforced by scaling,
        # the Riesz value of the objective is the original objective value
        nrm = relax.riesz(sdp.norm_row, y)
        assert got / nrm == pytest.approx(pop.objective.eval(x), rel=1e-9)

    def test_dirac_detects_broken_moments(self):
        # negative control for the oracle itself: a corrupted moment
        # vector must violate something
        hom = _hom("ex5.2", "hssos3")
        sdp = relax.assemble(hom, hom.d_min())
        rng = np.random.default_rng(9)
        x = {v: float(rng.normal()) for v in range(len(hom.base.table))}
        y = relax.dirac_moments(sdp, hom.lift_point(x))
        y = y / relax.riesz(sdp.norm_row, y)
        y[sdp.num_y // 2] += 0.5
        chk = relax.check_moments(sdp, y)
        assert (chk["min_psd_eig"] < -1e-8 or chk["max_zero_row"] > 1e-8
                or chk["norm_residual"] > 1e-8)


class TestSmallClosedForm:
    def test_univariate_moment_matrix_entries(self):
        # minimize x^2: moment matrix at k=1 over basis {1, x} is
        # [[y0, y1], [y1, y2]] — check the symbolic triples literally
        t = VariableTable(["x"])
        pop = POP(table=t, objective=parse_poly("x^2", t), cliques=[[0]])
        hom = reform.build(pop, "ssos")
        sdp = relax.assemble(hom, 1)
        (blk,) = sdp.psd_blocks
        y = relax.dirac_moments(sdp, {0: 3.0})
        m = blk.dense_matrix(y)
        assert m == pytest.approx(np.array([[1.0, 3.0], [3.0, 9.0]]))
