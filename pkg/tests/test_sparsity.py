"""Correlative sparsity: csp graph, chordal extension, maximal cliques,
RIP, constraint assignment.

Oracles: RIP is compared against brute-force enumeration over all
orderings for small inputs; chordality is certified via a perfect
elimination ordering check that is itself validated on known chordal /
non-chordal graphs.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homsos import sparsity
from homsos.poly import Polynomial, VariableTable, parse_poly
from homsos.pop import POP
from homsos.problems import example
from homsos.sparsity import (CspGraph, UnsupportedConstraint,
                             assign_constraints, build_csp_graph,
                             check_rip, chordal_extension, decompose,
                             is_chordal, maximal_cliques)


def _rip_bruteforce(cliques):
    """Literal running intersection property for the given order: for
    each s >= 2, clique_s intersect union(previous) is contained in one
    previous clique."""
    sets = [set(c) for c in cliques]
    for s in range(1, len(sets)):
        prev_union = set().union(*sets[:s])
        inter = sets[s] & prev_union
        if inter and not any(inter <= sets[t] for t in range(s)):
            return False
    return True


class TestCheckRip:
    def test_single_clique(self):
        assert check_rip([[0, 1, 2]])

    def test_chain(self):
        assert check_rip([[0, 1], [1, 2], [2, 3]])

    def test_violating_cycle(self):
        # 4-cycle cliques without chord: {0,1},{1,2},{2,3},{3,0}
        # last clique intersects the union in {0,3}, contained in no
        # single previous clique
        assert not check_rip([[0, 1], [1, 2], [2, 3], [3, 0]])

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_matches_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(1, 6))
        cliques = []
        for _ in range(p):
            size = int(rng.integers(1, 5))
            cliques.append(sorted(rng.choice(8, size=size, replace=False)
                                  .tolist()))
        assert check_rip(cliques) == _rip_bruteforce(cliques)


class TestChordal:
    def test_cycle_not_chordal(self):
        g = CspGraph(nodes=range(4),
                     edges=[(0, 1), (1, 2), (2, 3), (3, 0)])
        assert not is_chordal(g)

    def test_extension_is_chordal(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            n = int(rng.integers(2, 13))
            g = CspGraph(nodes=range(n))
            for _ in range(int(rng.integers(0, 2 * n))):
                a, b = rng.integers(0, n, size=2)
                if a != b:
                    g.add_edge(int(a), int(b))
            ext = chordal_extension(g)
            assert is_chordal(ext)
            # extension only adds edges
            assert g.edges() <= ext.edges()

    def test_maximal_cliques_pass_rip(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            n = int(rng.integers(2, 13))
            g = CspGraph(nodes=range(n))
            for _ in range(int(rng.integers(0, 2 * n))):
                a, b = rng.integers(0, n, size=2)
                if a != b:
                    g.add_edge(int(a), int(b))
            cl = maximal_cliques(chordal_extension(g))
            assert check_rip(cl)

    def test_maximal_cliques_are_maximal(self):
        g = chordal_extension(CspGraph(
            nodes=range(5), edges=[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]))
        cls = [set(c) for c in maximal_cliques(g)]
        for a, b in itertools.permutations(cls, 2):
            assert not a < b


class TestDecompose:
    def test_ex52_cliques(self):
        # three cliques of size 4 overlapping in single variables
        dec = decompose(example("ex5.2").pop)
        sizes = sorted(len(c) for c in dec.cliques)
        assert sizes == [4, 4, 4]
        sets = dec.clique_sets()
        overlaps = sorted(
            len(a & b) for a, b in itertools.combinations(sets, 2))
        assert max(overlaps) == 1
        assert dec.rip

    def test_ex54_components(self):
        dec = decompose(example("ex5.4").pop)
        # declared cliques {x1,x2},{x2,x3},{x2,x4,x5}
        names = example("ex5.4").pop.table.names
        got = sorted(sorted(names[v] for v in cl) for cl in dec.cliques)
        assert got == [["x1", "x2"], ["x2", "x3"], ["x2", "x4", "x5"]]

    def test_frequencies(self):
        dec = decompose(example("ex5.2").pop)
        freqs = sorted(dec.freq.values())
        # x4 and x7 shared by two cliques, the rest by one
        assert freqs.count(2) == 2
        assert set(freqs) == {1, 2}

    def test_cover_invariant(self):
        for name in ("ex5.1", "ex5.2", "ex5.4", "ex5.5"):
            pop = example(name).pop
            dec = decompose(pop)
            assert set().union(*dec.clique_sets()) >= pop.all_vars()

    def test_unsupported_constraint(self):
        t = VariableTable(["x1", "x2"])
        pop = POP(table=t, objective=parse_poly("x1^2 + x2^2", t),
                  ineqs=[parse_poly("x1*x2 - 1", t)],
                  cliques=[[0], [1]])
        with pytest.raises(UnsupportedConstraint):
            decompose(pop)

    def test_assignment_covers_constraints(self):
        pop = example("ex5.4").pop
        dec = decompose(pop)
        assert len(dec.ineq_assign) == len(pop.ineqs)
        assert len(dec.eq_assign) == len(pop.eqs)
        sets = dec.clique_sets()
        # every constraint lands in a clique that contains its variables
        for p, c in zip(pop.ineqs + pop.eqs,
                        dec.ineq_assign + dec.eq_assign):
            assert p.varset <= sets[c]
