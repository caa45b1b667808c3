"""Correlative sparsity analysis.

Builds the csp graph of a POP (variables co-occurring in an objective
monomial or sharing a constraint are adjacent), extends it to a chordal
graph by greedy minimum fill, extracts maximal cliques ordered to satisfy
the running intersection property, and assigns each constraint to one
covering clique.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .poly import mono_vars
from .pop import POP


class CspGraph:
    """Undirected graph on variable ids, stored as an adjacency dict."""

    def __init__(self, nodes=(), edges=()):
        self.adj: dict[int, set[int]] = {v: set() for v in nodes}
        for a, b in edges:
            self.add_edge(a, b)

    @property
    def nodes(self) -> set[int]:
        return set(self.adj)

    def add_node(self, v: int) -> None:
        self.adj.setdefault(v, set())

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            return
        self.add_node(a)
        self.add_node(b)
        self.adj[a].add(b)
        self.adj[b].add(a)

    def add_clique(self, vs) -> None:
        vs = list(vs)
        for v in vs:
            self.add_node(v)
        for i, a in enumerate(vs):
            for b in vs[i + 1:]:
                self.add_edge(a, b)

    def edges(self) -> set[frozenset]:
        return {frozenset((a, b)) for a, nbrs in self.adj.items() for b in nbrs if a < b}

    def copy(self) -> "CspGraph":
        g = CspGraph()
        g.adj = {v: set(n) for v, n in self.adj.items()}
        return g


@dataclass
class CliqueDecomposition:
    """Ordered variable cliques with constraint partition and statistics.

    cliques are sorted variable-id lists; ineq_assign / eq_assign give the
    clique index of each constraint of the source problem; rip records
    whether the clique ordering satisfies the running intersection
    property; freq counts, for every variable, the number of cliques
    containing it.
    """

    cliques: list[list[int]]
    ineq_assign: list[int] = field(default_factory=list)
    eq_assign: list[int] = field(default_factory=list)
    rip: bool = True
    freq: dict[int, int] = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.cliques)

    def compute_freq(self) -> None:
        freq: dict[int, int] = {}
        for cl in self.cliques:
            for v in cl:
                freq[v] = freq.get(v, 0) + 1
        self.freq = freq

    def clique_sets(self) -> list[set[int]]:
        return [set(cl) for cl in self.cliques]


def build_csp_graph(pop: POP) -> CspGraph:
    g = CspGraph(nodes=sorted(pop.all_vars() | set(range(len(pop.table)))))
    for m in pop.objective.terms:
        g.add_clique(sorted(mono_vars(m)))
    for con in pop.ineqs + pop.eqs:
        g.add_clique(sorted(con.varset))
    return g


def chordal_extension(g: CspGraph) -> CspGraph:
    """Greedy minimum-fill chordal extension; ties broken by lowest
    variable id, so the result is deterministic."""
    work = g.copy()
    out = g.copy()
    order = []
    remaining = set(work.adj)
    while remaining:
        best_v, best_fill = None, None
        for v in sorted(remaining):
            nbrs = work.adj[v] & remaining
            nl = sorted(nbrs)
            fill = 0
            for i, a in enumerate(nl):
                for b in nl[i + 1:]:
                    if b not in work.adj[a]:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best_v, best_fill = v, fill
            if fill == 0:
                break
        v = best_v
        nbrs = sorted(work.adj[v] & remaining)
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if b not in work.adj[a]:
                    work.add_edge(a, b)
                    out.add_edge(a, b)
        order.append(v)
        remaining.discard(v)
    return out


def peo_order(g: CspGraph) -> list[int] | None:
    """Perfect elimination ordering via maximum cardinality search, or
    None if the graph is not chordal.  Ties broken by lowest id."""
    n = len(g.adj)
    weight = {v: 0 for v in g.adj}
    order: list[int] = []
    chosen: set[int] = set()
    for _ in range(n):
        v = max(sorted(weight), key=lambda u: weight[u])
        del weight[v]
        order.append(v)
        chosen.add(v)
        for u in g.adj[v]:
            if u in weight:
                weight[u] += 1
    order.reverse()  # elimination order: earliest eliminated first
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        later = [u for u in g.adj[v] if pos[u] > pos[v]]
        if not later:
            continue
        pivot = min(later, key=lambda u: pos[u])
        for u in later:
            if u != pivot and u not in g.adj[pivot]:
                return None
    return order


def is_chordal(g: CspGraph) -> bool:
    return peo_order(g) is not None


def maximal_cliques(g: CspGraph) -> list[list[int]]:
    """Maximal cliques of a chordal graph, ordered to satisfy the RIP.

    Cliques are read off a perfect elimination ordering and then ordered
    by a depth-first traversal of a maximum-weight clique tree (weights =
    intersection sizes), which guarantees the running intersection
    property.
    """
    order = peo_order(g)
    if order is None:
        raise ValueError("graph is not chordal")
    pos = {v: i for i, v in enumerate(order)}
    cliques: list[frozenset] = []
    for v in order:
        cand = frozenset([v] + [u for u in g.adj[v] if pos[u] > pos[v]])
        if not any(cand < c or cand == c for c in cliques):
            cliques = [c for c in cliques if not c < cand]
            cliques.append(cand)
    # deterministic base order
    cliques.sort(key=lambda c: sorted(c))
    p = len(cliques)
    if p == 1:
        return [sorted(cliques[0])]
    # maximum-weight spanning tree on intersection sizes (Prim)
    in_tree = {0}
    parent = {0: None}
    ordered = [0]
    while len(in_tree) < p:
        best = None
        for j in range(p):
            if j in in_tree:
                continue
            for i in ordered:
                w = len(cliques[i] & cliques[j])
                key = (w, -i, -j)
                if best is None or key > best[0]:
                    best = (key, i, j)
        _, i, j = best
        in_tree.add(j)
        parent[j] = i
        ordered.append(j)
    # `ordered` is a valid tree pre-order: each clique attaches to an
    # earlier one, so the RIP holds with s = parent.
    return [sorted(cliques[j]) for j in ordered]


def check_rip(cliques: list[list[int]]) -> bool:
    """True iff for each l, clique l+1 meets the union of its predecessors
    inside some single earlier clique."""
    sets = [set(c) for c in cliques]
    union: set[int] = set()
    for i, cl in enumerate(sets):
        if i > 0:
            inter = cl & union
            if not any(inter <= sets[s] for s in range(i)):
                return False
        union |= cl
    return True


class UnsupportedConstraint(ValueError):
    """A constraint's support is contained in no clique."""


def assign_constraints(polys, clique_sets: list[set[int]], kind: str = "constraint") -> list[int]:
    """Assign each polynomial to the lowest-index clique covering its
    support."""
    out = []
    for j, g in enumerate(polys):
        sup = g.varset
        for idx, cl in enumerate(clique_sets):
            if sup <= cl:
                out.append(idx)
                break
        else:
            raise UnsupportedConstraint(
                f"{kind} #{j} has support {sorted(sup)} inside no clique")
    return out


def decompose(pop: POP) -> CliqueDecomposition:
    """Full correlative sparsity analysis of a POP.

    User-declared cliques are validated (variable cover, constraint
    cover, RIP reported) but never modified; otherwise cliques come from
    a minimum-fill chordal extension of the csp graph.
    """
    if pop.cliques is not None:
        cliques = [sorted(cl) for cl in pop.cliques]
        covered = set().union(*[set(c) for c in cliques]) if cliques else set()
        missing = pop.all_vars() - covered
        if missing:
            raise ValueError(f"declared cliques do not cover variables {sorted(missing)}")
    else:
        g = build_csp_graph(pop)
        cliques = maximal_cliques(chordal_extension(g))
    dec = CliqueDecomposition(cliques=cliques)
    dec.rip = check_rip(cliques)
    sets = dec.clique_sets()
    dec.ineq_assign = assign_constraints(pop.ineqs, sets, "inequality")
    dec.eq_assign = assign_constraints(pop.eqs, sets, "equality")
    dec.compute_freq()
    return dec
