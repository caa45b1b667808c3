"""Moment-side SDP assembly for a reformulated POP.

All cliques share one moment vector y indexed by the union of the
per-clique monomial sets of degree <= 2k; a monomial supported in several
cliques gets a single index, which is what couples the blocks.  Each
clique contributes a moment matrix, a localizing matrix per assigned
inequality, and (deduplicated) zero rows per assigned equality; a single
normalization row fixes <normalizer, y> = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .poly import Monomial, Polynomial, mono_mul, mono_degree, monomial_basis, n_monomials
from .reform import HomPOP


@dataclass
class PSDBlock:
    """Symbolic PSD constraint: the matrix with entries
    sum_t val[t] * y[col[t]] at position (row_i[t], row_j[t]) (i <= j)
    must be positive semidefinite."""

    clique: int
    kind: str                 # "moment" or "localizing"
    gen: Polynomial           # generator polynomial (constant 1 for moment)
    order: int
    side: int
    basis: list[Monomial]
    row_i: np.ndarray = field(repr=False, default=None)
    row_j: np.ndarray = field(repr=False, default=None)
    col: np.ndarray = field(repr=False, default=None)
    val: np.ndarray = field(repr=False, default=None)

    def dense_matrix(self, y: np.ndarray) -> np.ndarray:
        m = np.zeros((self.side, self.side))
        vals = self.val * y[self.col]
        np.add.at(m, (self.row_i, self.row_j), vals)
        lower = np.tril_indices(self.side, -1)
        m[lower] = m.T[lower]
        return m


@dataclass
class ZeroGroup:
    """Zero-localizing rows of one equality in one clique: for every
    monomial gamma of degree <= 2*order over the clique,
    <h * x^gamma, y> = 0."""

    clique: int
    gen: Polynomial
    order: int
    gammas: list[Monomial]
    row_offset: int           # first row index within the global eq system
    rows: np.ndarray = field(repr=False, default=None)   # local row per triple
    col: np.ndarray = field(repr=False, default=None)
    val: np.ndarray = field(repr=False, default=None)


class AssemblyError(ValueError):
    pass


@dataclass
class MomentSDP:
    k: int
    num_y: int
    index: dict[Monomial, int]
    monomials: list[Monomial]
    cliques: list[list[int]]
    clique_basis: list[list[Monomial]]   # basis of M_k per clique (graded order)
    objective: dict[int, float]
    norm_row: dict[int, float]
    psd_blocks: list[PSDBlock]
    zero_groups: list[ZeroGroup]
    hom: HomPOP

    @property
    def num_eq_rows(self) -> int:
        if not self.zero_groups:
            return 0
        g = self.zero_groups[-1]
        return g.row_offset + len(g.gammas)

    def structure_summary(self) -> dict:
        """Human-readable block statistics (sizes, nnz) for debugging."""
        return {
            "order": self.k,
            "num_y": self.num_y,
            "num_eq_rows": self.num_eq_rows,
            "psd_blocks": [
                {
                    "clique": b.clique,
                    "kind": b.kind,
                    "order": b.order,
                    "side": b.side,
                    "nnz": int(len(b.val)),
                }
                for b in self.psd_blocks
            ],
            "zero_groups": [
                {"clique": z.clique, "order": z.order, "rows": len(z.gammas),
                 "nnz": int(len(z.val))}
                for z in self.zero_groups
            ],
        }


def assemble(hom: HomPOP, k: int) -> MomentSDP:
    """Build the order-k moment relaxation of a reformulated POP."""
    dmin = hom.d_min()
    if k < dmin:
        raise AssemblyError(f"order k={k} below minimum relaxation order {dmin}")

    # shared moment index over the union of clique monomial sets
    index: dict[Monomial, int] = {}
    monomials: list[Monomial] = []
    clique_basis: list[list[Monomial]] = []
    for cl in hom.cliques:
        for m in monomial_basis(cl, 2 * k):
            if m not in index:
                index[m] = len(monomials)
                monomials.append(m)
        clique_basis.append(monomial_basis(cl, k))

    def vec(poly: Polynomial, what: str) -> dict[int, float]:
        out: dict[int, float] = {}
        for m, c in poly.terms.items():
            idx = index.get(m)
            if idx is None:
                raise AssemblyError(
                    f"{what} monomial {m} not covered by any clique at order {k}")
            out[idx] = out.get(idx, 0.0) + c
        return out

    objective = vec(hom.objective, "objective")
    norm_row = vec(hom.normalizer, "normalizer")

    psd_blocks: list[PSDBlock] = []
    for l, cl in enumerate(hom.cliques):
        psd_blocks.append(_moment_block(l, clique_basis[l], index, k))
    for g, assigned in hom.ineqs:
        t_drop = (g.degree() + 1) // 2
        for l in assigned:
            order = k - t_drop
            if order < 0:
                raise AssemblyError(
                    f"inequality of degree {g.degree()} needs order >= {t_drop}")
            basis = clique_basis[l][: n_monomials(len(hom.cliques[l]), order)]
            psd_blocks.append(_localizing_block(l, g, order, basis, index))

    zero_groups: list[ZeroGroup] = []
    offset = 0
    for h, assigned in hom.eqs:
        t_drop = (h.degree() + 1) // 2
        for l in assigned:
            order = k - t_drop
            if order < 0:
                raise AssemblyError(
                    f"equality of degree {h.degree()} needs order >= {t_drop}")
            grp = _zero_group(l, h, order, hom.cliques[l], index, offset)
            offset += len(grp.gammas)
            zero_groups.append(grp)

    return MomentSDP(
        k=k,
        num_y=len(monomials),
        index=index,
        monomials=monomials,
        cliques=[list(c) for c in hom.cliques],
        clique_basis=clique_basis,
        objective=objective,
        norm_row=norm_row,
        psd_blocks=psd_blocks,
        zero_groups=zero_groups,
        hom=hom,
    )


def _moment_block(clique: int, basis: list[Monomial], index, k: int) -> PSDBlock:
    side = len(basis)
    ri, rj, col = [], [], []
    for i in range(side):
        bi = basis[i]
        for j in range(i, side):
            ri.append(i)
            rj.append(j)
            col.append(index[mono_mul(bi, basis[j])])
    n = len(col)
    return PSDBlock(
        clique=clique, kind="moment", gen=Polynomial.constant(1.0),
        order=k, side=side, basis=basis,
        row_i=np.asarray(ri, dtype=np.int32), row_j=np.asarray(rj, dtype=np.int32),
        col=np.asarray(col, dtype=np.int64), val=np.ones(n),
    )


def _localizing_block(clique: int, gen: Polynomial, order: int,
                      basis: list[Monomial], index) -> PSDBlock:
    side = len(basis)
    gterms = list(gen.terms.items())
    ri, rj, col, val = [], [], [], []
    for i in range(side):
        bi = basis[i]
        for j in range(i, side):
            prod = mono_mul(bi, basis[j])
            for gm, gc in gterms:
                ri.append(i)
                rj.append(j)
                col.append(index[mono_mul(prod, gm)])
                val.append(gc)
    return PSDBlock(
        clique=clique, kind="localizing", gen=gen, order=order, side=side,
        basis=basis,
        row_i=np.asarray(ri, dtype=np.int32), row_j=np.asarray(rj, dtype=np.int32),
        col=np.asarray(col, dtype=np.int64), val=np.asarray(val),
    )


def _zero_group(clique: int, gen: Polynomial, order: int, cl_vars,
                index, row_offset: int) -> ZeroGroup:
    gammas = monomial_basis(cl_vars, 2 * order)
    gterms = list(gen.terms.items())
    rows, col, val = [], [], []
    for r, gamma in enumerate(gammas):
        for gm, gc in gterms:
            rows.append(r)
            col.append(index[mono_mul(gamma, gm)])
            val.append(gc)
    return ZeroGroup(
        clique=clique, gen=gen, order=order, gammas=gammas, row_offset=row_offset,
        rows=np.asarray(rows, dtype=np.int64), col=np.asarray(col, dtype=np.int64),
        val=np.asarray(val),
    )


def dirac_moments(sdp: MomentSDP, point: dict[int, float]) -> np.ndarray:
    """Moment vector of the Dirac measure at a point of the reformulated
    space: y_alpha = point^alpha.  Test oracle for assembly."""
    y = np.empty(sdp.num_y)
    for m, idx in sdp.index.items():
        v = 1.0
        for var, e in m:
            v *= point[var] ** e
        y[idx] = v
    return y


def riesz(vec: dict[int, float], y: np.ndarray) -> float:
    return sum(c * y[i] for i, c in vec.items())


def check_moments(sdp: MomentSDP, y: np.ndarray) -> dict:
    """Constraint residuals of a candidate moment vector (used by the
    Dirac-feasibility oracle): min PSD eigenvalue per block, max |zero
    row|, and the normalization residual."""
    min_eig = np.inf
    for b in sdp.psd_blocks:
        m = b.dense_matrix(y)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(m)[0]))
    max_zero = 0.0
    for z in sdp.zero_groups:
        acc = np.zeros(len(z.gammas))
        np.add.at(acc, z.rows, z.val * y[z.col])
        if len(acc):
            max_zero = max(max_zero, float(np.abs(acc).max()))
    return {
        "min_psd_eig": float(min_eig),
        "max_zero_row": max_zero,
        "norm_residual": abs(riesz(sdp.norm_row, y) - 1.0),
        "objective": riesz(sdp.objective, y),
    }


def sos_side_dimensions(hom: HomPOP, k: int) -> dict:
    """Dual (SOS) multiplier structure of the order-k relaxation: Gram
    matrix sizes mirror the primal PSD blocks; each equality generator
    gets a free multiplier of degree 2k - deg(h)."""
    gram = []
    for l, cl in enumerate(hom.cliques):
        gram.append({"clique": l, "gen": "1", "side": n_monomials(len(cl), k)})
    for g, assigned in hom.ineqs:
        order = k - (g.degree() + 1) // 2
        for l in assigned:
            gram.append({
                "clique": l, "gen": "ineq",
                "side": n_monomials(len(hom.cliques[l]), order),
            })
    multipliers = []
    for h, assigned in hom.eqs:
        for l in assigned:
            multipliers.append({
                "clique": l, "degree": 2 * k - h.degree(),
                "dim": n_monomials(len(hom.cliques[l]), 2 * (k - (h.degree() + 1) // 2)),
            })
    return {"gram_blocks": gram, "ideal_multipliers": multipliers}
