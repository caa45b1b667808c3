"""Homogenized reformulations of a POP.

Five pipelines share one output container:

* ``ssos``   - identity passthrough (classical sparse hierarchy),
* ``hsos``   - dense homogenization over the unit sphere,
* ``hssos1`` - per-clique spheres plus one auxiliary variable per clique
  and an optional perturbation of the objective,
* ``hssos2`` - frequency-weighted per-clique spheres, a global coupling
  among the auxiliary variables, and box constraints,
* ``hssos3`` - telescoping chain of weighted spheres with p-1 auxiliary
  variables and box constraints.

The objective of a homogenized reformulation is compared against the
normalizer x0^d: a relaxation bound gamma certifies
objective - gamma * normalizer >= 0 on the reformulated set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .poly import Polynomial, VariableTable, mono_make
from .pop import POP
from . import sparsity
from .sparsity import CliqueDecomposition

HIERARCHIES = ("ssos", "hsos", "hssos1", "hssos2", "hssos3")

DEFAULT_EPSILON = 1e-4


@dataclass
class HomPOP:
    """A reformulated POP ready for moment relaxation.

    Each constraint carries the list of clique indices whose localizing
    (or zero-localizing) matrix it generates; the nonnegativity of x0 is
    replicated in every clique.
    """

    table: VariableTable
    objective: Polynomial
    normalizer: Polynomial
    ineqs: list[tuple[Polynomial, list[int]]]
    eqs: list[tuple[Polynomial, list[int]]]
    cliques: list[list[int]]
    hierarchy: str
    d: int
    d0: int
    epsilon: float = 0.0
    x0: int | None = None
    w_ids: list[int] = field(default_factory=list)
    base: POP | None = None
    base_dec: CliqueDecomposition | None = None

    @property
    def p(self) -> int:
        return len(self.cliques)

    def d_min(self) -> int:
        degs = [self.objective.degree(), self.normalizer.degree()]
        degs += [g.degree() for g, _ in self.ineqs]
        degs += [h.degree() for h, _ in self.eqs]
        return max(1, max((d + 1) // 2 for d in degs))

    def decomposition(self) -> CliqueDecomposition:
        dec = CliqueDecomposition(cliques=[list(c) for c in self.cliques])
        dec.rip = sparsity.check_rip(dec.cliques)
        dec.compute_freq()
        return dec

    def lift_point(self, x: dict[int, float]) -> dict[int, float]:
        """Map a point of the original POP to the reformulated variables
        (the construction used in the convergence proofs).  For ssos this
        is the identity."""
        if self.hierarchy == "ssos":
            return dict(x)
        base = self.base
        nrm = math.sqrt(1.0 + sum(x[v] ** 2 for v in range(len(base.table))))
        pt = {v: x[v] / nrm for v in range(len(base.table))}
        pt[self.x0] = 1.0 / nrm
        dec = self.base_dec
        if self.hierarchy == "hssos1":
            for l, cl in enumerate(dec.cliques):
                s = pt[self.x0] ** 2 + sum(pt[v] ** 2 for v in cl)
                pt[self.w_ids[l]] = math.sqrt(max(0.0, 1.0 - s))
        elif self.hierarchy == "hssos2":
            for l, cl in enumerate(dec.cliques):
                s = self._weighted_sum_value(pt, cl, dec)
                pt[self.w_ids[l]] = math.sqrt(max(0.0, 1.0 - s))
        elif self.hierarchy == "hssos3":
            acc = 0.0
            for l, cl in enumerate(dec.cliques[:-1]):
                acc += self._weighted_sum_value(pt, cl, dec)
                pt[self.w_ids[l]] = math.sqrt(max(0.0, acc))
        return pt

    def _weighted_sum_value(self, pt, clique, dec: CliqueDecomposition) -> float:
        s = pt[self.x0] ** 2 / dec.p
        for v in clique:
            s += pt[v] ** 2 / dec.freq[v]
        return s

    def objective_value(self, pt: dict[int, float]) -> float:
        """objective / normalizer ratio at a reformulated-space point."""
        return self.objective.eval(pt) / self.normalizer.eval(pt)


def _sphere(table_ids, x0: int | None = None) -> Polynomial:
    terms = {mono_make([(v, 2)]): 1.0 for v in table_ids}
    if x0 is not None:
        terms[mono_make([(x0, 2)])] = 1.0
    terms[()] = -1.0
    return Polynomial(terms)


def _weighted_sum(clique, x0: int, dec: CliqueDecomposition) -> Polynomial:
    """sum_{x_i in clique} x_i^2/p_i + x_0^2/p."""
    terms = {mono_make([(v, 2)]): 1.0 / dec.freq[v] for v in clique}
    terms[mono_make([(x0, 2)])] = 1.0 / dec.p
    return Polynomial(terms)


def _box(v: int) -> Polynomial:
    return Polynomial({(): 1.0, mono_make([(v, 2)]): -1.0})


def _power_sum(var_ids, d0: int) -> Polynomial:
    return Polynomial({mono_make([(v, d0)]): 1.0 for v in var_ids})


def _assign_lowest(poly: Polynomial, clique_sets) -> list[int]:
    for idx, cl in enumerate(clique_sets):
        if poly.varset <= cl:
            return [idx]
    raise sparsity.UnsupportedConstraint(
        f"support {sorted(poly.varset)} inside no clique")


def _homogenized_parts(pop: POP, table: VariableTable, x0: int):
    """Homogenize objective and constraints with respect to x0."""
    f_t = pop.objective.homogenize(x0)
    g_t = [g.homogenize(x0) for g in pop.ineqs]
    h_t = [h.homogenize(x0) for h in pop.eqs]
    return f_t, g_t, h_t


def passthrough_ssos(pop: POP, dec: CliqueDecomposition | None = None) -> HomPOP:
    dec = dec if dec is not None else sparsity.decompose(pop)
    return HomPOP(
        table=pop.table.copy(),
        objective=pop.objective,
        normalizer=Polynomial.constant(1.0),
        ineqs=[(g, [dec.ineq_assign[j]]) for j, g in enumerate(pop.ineqs)],
        eqs=[(h, [dec.eq_assign[j]]) for j, h in enumerate(pop.eqs)],
        cliques=[list(c) for c in dec.cliques],
        hierarchy="ssos",
        d=pop.objective.degree(),
        d0=2 * ((pop.objective.degree() + 1) // 2),
        base=pop,
        base_dec=dec,
    )


def reformulate_dense(pop: POP) -> HomPOP:
    d = pop.objective.degree()
    if d < 1:
        raise ValueError("objective must have degree >= 1")
    table = pop.table.copy()
    x0 = table.add_reserved("_x0")
    f_t, g_t, h_t = _homogenized_parts(pop, table, x0)
    clique = sorted(set(range(len(pop.table))) | {x0})
    dec = CliqueDecomposition(cliques=[[v for v in clique if v != x0]])
    dec.compute_freq()
    return HomPOP(
        table=table,
        objective=f_t,
        normalizer=Polynomial.monomial(mono_make([(x0, d)])),
        ineqs=[(g, [0]) for g in g_t] + [(Polynomial.variable(x0), [0])],
        eqs=[(_sphere(range(len(pop.table)), x0), [0])] + [(h, [0]) for h in h_t],
        cliques=[clique],
        hierarchy="hsos",
        d=d,
        d0=2 * ((d + 1) // 2),
        x0=x0,
        base=pop,
        base_dec=dec,
    )


def reformulate_hssos1(pop: POP, dec: CliqueDecomposition | None = None,
                       epsilon: float = DEFAULT_EPSILON) -> HomPOP:
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    dec = dec if dec is not None else sparsity.decompose(pop)
    d = pop.objective.degree()
    d0 = 2 * ((d + 1) // 2)
    table = pop.table.copy()
    x0 = table.add_reserved("_x0")
    w_ids = [table.add_reserved(f"_w{l + 1}") for l in range(dec.p)]
    f_t, g_t, h_t = _homogenized_parts(pop, table, x0)
    cliques = [sorted(set(cl) | {x0, w_ids[l]}) for l, cl in enumerate(dec.cliques)]

    objective = f_t
    if epsilon > 0:
        pert = _power_sum([x0] + list(range(len(pop.table))) + w_ids, d0)
        objective = f_t + pert.scale(epsilon)

    eqs = [(_sphere(list(dec.cliques[l]) + [w_ids[l]], x0), [l]) for l in range(dec.p)]
    eqs += [(h, [dec.eq_assign[j]]) for j, h in enumerate(h_t)]
    ineqs = [(g, [dec.ineq_assign[j]]) for j, g in enumerate(g_t)]
    ineqs.append((Polynomial.variable(x0), list(range(dec.p))))

    return HomPOP(
        table=table,
        objective=objective,
        normalizer=Polynomial.monomial(mono_make([(x0, d)])),
        ineqs=ineqs,
        eqs=eqs,
        cliques=cliques,
        hierarchy="hssos1",
        d=d,
        d0=d0,
        epsilon=epsilon,
        x0=x0,
        w_ids=w_ids,
        base=pop,
        base_dec=dec,
    )


def reformulate_hssos2(pop: POP, dec: CliqueDecomposition | None = None) -> HomPOP:
    dec = dec if dec is not None else sparsity.decompose(pop)
    d = pop.objective.degree()
    table = pop.table.copy()
    x0 = table.add_reserved("_x0")
    w_ids = [table.add_reserved(f"_w{l + 1}") for l in range(dec.p)]
    f_t, g_t, h_t = _homogenized_parts(pop, table, x0)

    sphere_eqs = []
    for l in range(dec.p):
        h = _weighted_sum(dec.cliques[l], x0, dec)
        h = h + Polynomial({mono_make([(w_ids[l], 2)]): 1.0, (): -1.0})
        sphere_eqs.append(h)
    coupling = Polynomial(
        {mono_make([(w, 2)]): 1.0 for w in w_ids} | {(): float(-(dec.p - 1))})
    boxes = [_box(v) for v in [x0] + list(range(len(pop.table))) + w_ids]

    # the reformulated problem gets a fresh csp analysis: the coupling
    # constraint ties all auxiliary variables together, which may grow
    # cliques beyond the original pattern
    probe = POP(table, f_t, g_t + boxes + [Polynomial.variable(x0)],
                sphere_eqs + [coupling] + h_t)
    udec = sparsity.decompose(probe)
    cliques = udec.cliques
    sets = [set(c) for c in cliques]

    eqs = [(h, _assign_lowest(h, sets)) for h in sphere_eqs]
    eqs.append((coupling, _assign_lowest(coupling, sets)))
    eqs += [(h, _assign_lowest(h, sets)) for h in h_t]
    ineqs = [(g, _assign_lowest(g, sets)) for g in g_t]
    ineqs += [(b, _assign_lowest(b, sets)) for b in boxes]
    ineqs.append((Polynomial.variable(x0), list(range(len(cliques)))))

    return HomPOP(
        table=table,
        objective=f_t,
        normalizer=Polynomial.monomial(mono_make([(x0, d)])),
        ineqs=ineqs,
        eqs=eqs,
        cliques=cliques,
        hierarchy="hssos2",
        d=d,
        d0=2 * ((d + 1) // 2),
        x0=x0,
        w_ids=w_ids,
        base=pop,
        base_dec=dec,
    )


def reformulate_hssos3(pop: POP, dec: CliqueDecomposition | None = None) -> HomPOP:
    dec = dec if dec is not None else sparsity.decompose(pop)
    d = pop.objective.degree()
    table = pop.table.copy()
    x0 = table.add_reserved("_x0")
    p = dec.p
    w_ids = [table.add_reserved(f"_w{l + 1}") for l in range(p - 1)]
    f_t, g_t, h_t = _homogenized_parts(pop, table, x0)

    cliques = []
    for l in range(p):
        aux = []
        if l > 0:
            aux.append(w_ids[l - 1])
        if l < p - 1:
            aux.append(w_ids[l])
        cliques.append(sorted(set(dec.cliques[l]) | {x0} | set(aux)))
    sets = [set(c) for c in cliques]

    eqs = []
    for l in range(p):
        h = _weighted_sum(dec.cliques[l], x0, dec)
        if l > 0:
            h = h + Polynomial.monomial(mono_make([(w_ids[l - 1], 2)]))
        if l < p - 1:
            h = h - Polynomial.monomial(mono_make([(w_ids[l], 2)]))
        else:
            h = h - Polynomial.constant(1.0)
        eqs.append((h, [l]))
    eqs += [(h, _assign_lowest(h, sets)) for h in h_t]

    boxes = [_box(v) for v in [x0] + list(range(len(pop.table))) + w_ids]
    ineqs = [(g, [dec.ineq_assign[j]]) for j, g in enumerate(g_t)]
    ineqs += [(b, _assign_lowest(b, sets)) for b in boxes]
    ineqs.append((Polynomial.variable(x0), list(range(p))))

    return HomPOP(
        table=table,
        objective=f_t,
        normalizer=Polynomial.monomial(mono_make([(x0, d)])),
        ineqs=ineqs,
        eqs=eqs,
        cliques=cliques,
        hierarchy="hssos3",
        d=d,
        d0=2 * ((d + 1) // 2),
        x0=x0,
        w_ids=w_ids,
        base=pop,
        base_dec=dec,
    )


def build(pop: POP, hierarchy: str, epsilon: float = DEFAULT_EPSILON,
          dec: CliqueDecomposition | None = None) -> HomPOP:
    """Dispatch to the requested reformulation."""
    hierarchy = hierarchy.lower()
    if hierarchy == "ssos":
        return passthrough_ssos(pop, dec)
    if hierarchy == "hsos":
        return reformulate_dense(pop)
    if hierarchy == "hssos1":
        return reformulate_hssos1(pop, dec, epsilon)
    if hierarchy == "hssos2":
        return reformulate_hssos2(pop, dec)
    if hierarchy == "hssos3":
        return reformulate_hssos3(pop, dec)
    raise ValueError(f"unknown hierarchy {hierarchy!r}; expected one of {HIERARCHIES}")
