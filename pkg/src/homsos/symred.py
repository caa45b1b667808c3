"""Sign-symmetry reduction of moment relaxations.

If every polynomial of the relaxation is invariant (or uniformly
sign-flipped) under a subgroup of coordinate sign changes, any feasible
moment vector can be symmetrized without changing the objective.  The
symmetrized vector vanishes on monomials outside the group's character
lattice, so those y variables can be eliminated, and every moment or
localizing matrix block-diagonalizes by parity class of its basis.

Inequality generators must be strictly invariant (a sign change that
flips an inequality maps feasible moment vectors to infeasible ones),
while equality generators may flip sign uniformly since h = 0 and
-h = 0 cut out the same set.  Under these conditions averaging over the
group preserves feasibility and the objective, so the reduced problem
has exactly the same optimal value as the original relaxation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import Monomial
from .relax import MomentSDP, PSDBlock, ZeroGroup
from .sdp import SDPSolution


def parity(m: Monomial) -> int:
    """Bitmask of variables with odd exponent."""
    p = 0
    for v, e in m:
        if e & 1:
            p |= 1 << v
    return p


class F2Space:
    """Row space over F2 of parity vectors, stored as bitmask rows in
    reduced echelon form (dict pivot bit -> row)."""

    def __init__(self):
        self.rows: dict[int, int] = {}

    def reduce(self, vec: int) -> int:
        for piv, row in self.rows.items():
            if vec >> piv & 1:
                vec ^= row
        return vec

    def add(self, vec: int) -> None:
        vec = self.reduce(vec)
        if vec == 0:
            return
        piv = vec.bit_length() - 1
        for p in list(self.rows):
            if self.rows[p] >> piv & 1:
                self.rows[p] ^= vec
        self.rows[piv] = vec

    @property
    def rank(self) -> int:
        return len(self.rows)


@dataclass
class ReducedSDP:
    """Sign-symmetry reduced relaxation.  Quacks like MomentSDP for the
    SDP assembly and certificate code (objective, norm_row, psd_blocks,
    zero_groups, hom); extraction should use the parent problem with an
    expanded moment vector."""

    parent: MomentSDP
    num_y: int
    y_keep: np.ndarray                  # full index per reduced variable
    objective: dict[int, float]
    norm_row: dict[int, float]
    psd_blocks: list[PSDBlock]
    zero_groups: list[ZeroGroup]
    block_parent: list[int]             # parent psd block per reduced block
    block_rows: list[np.ndarray]        # parent basis rows per reduced block
    group_parent: list[int]             # parent zero group index, -1 if converted
    group_rows: list[np.ndarray]        # parent gamma rows (valid if parent >= 0)

    @property
    def hom(self):
        return self.parent.hom

    @property
    def k(self) -> int:
        return self.parent.k

    @property
    def num_eq_rows(self) -> int:
        return sum(len(z.gammas) for z in self.zero_groups)

    def structure_summary(self) -> dict:
        return {
            "order": self.k,
            "num_y": self.num_y,
            "num_y_full": self.parent.num_y,
            "num_eq_rows": self.num_eq_rows,
            "psd_blocks": [
                {"clique": b.clique, "kind": b.kind, "side": b.side,
                 "nnz": int(len(b.val))}
                for b in self.psd_blocks
            ],
        }

    def expand_y(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.parent.num_y)
        out[self.y_keep] = y
        return out

    def expand_solution(self, sol: SDPSolution) -> SDPSolution:
        """Solution in the coordinates of the parent relaxation.  Gram
        blocks are embedded (zeros across parity classes); duals of rows
        converted from sign-flipped generators have no parent row and are
        dropped, so certificates must be verified against the reduced
        problem."""
        y = self.expand_y(sol.y)
        grams = None
        if sol.gram is not None:
            grams = [np.zeros((b.side, b.side)) for b in self.parent.psd_blocks]
            for g, pi, rows in zip(sol.gram, self.block_parent, self.block_rows):
                grams[pi][np.ix_(rows, rows)] = g
        eq_dual = None
        if sol.eq_dual is not None:
            eq_dual = np.zeros(1 + self.parent.num_eq_rows)
            eq_dual[0] = sol.eq_dual[0]
            off = 1
            for z, pi, rows in zip(self.zero_groups, self.group_parent,
                                   self.group_rows):
                if pi >= 0:
                    pz = self.parent.zero_groups[pi]
                    eq_dual[1 + pz.row_offset + rows] = \
                        sol.eq_dual[off: off + len(z.gammas)]
                off += len(z.gammas)
        return SDPSolution(
            y=y, status=sol.status, pobj=sol.pobj, dobj=sol.dobj,
            gram=grams, eq_dual=eq_dual, iterations=sol.iterations,
            solve_time=sol.solve_time, backend=sol.backend,
            raw_status=sol.raw_status)


def detect(msdp: MomentSDP) -> F2Space:
    """Largest valid sign-change group, encoded by its orthogonal parity
    row space: objective, normalizer, and inequality generators must be
    invariant monomial by monomial; equality generators only up to a
    uniform sign."""
    hom = msdp.hom
    space = F2Space()
    invariant = [hom.objective, hom.normalizer] + [g for g, _ in hom.ineqs]
    for poly in invariant:
        for m in poly.terms:
            space.add(parity(m))
    for h, _ in hom.eqs:
        ps = [parity(m) for m in h.terms]
        for p in ps[1:]:
            space.add(p ^ ps[0])
    return space


def reduce(msdp: MomentSDP) -> ReducedSDP | None:
    """Reduced relaxation, or None when the symmetry group is trivial."""
    space = detect(msdp)
    nvars = len(msdp.hom.table)
    if space.rank >= nvars:
        return None

    classes = np.empty(msdp.num_y, dtype=object)
    keep_mask = np.zeros(msdp.num_y, dtype=bool)
    for m, idx in msdp.index.items():
        c = space.reduce(parity(m))
        classes[idx] = c
        keep_mask[idx] = c == 0
    y_keep = np.flatnonzero(keep_mask)
    remap = -np.ones(msdp.num_y, dtype=np.int64)
    remap[y_keep] = np.arange(len(y_keep))

    def revec(vec: dict[int, float], what: str) -> dict[int, float]:
        out = {}
        for i, v in vec.items():
            if remap[i] < 0:
                raise AssertionError(f"{what} touches an eliminated moment")
            out[int(remap[i])] = v
        return out

    psd_blocks: list[PSDBlock] = []
    block_parent: list[int] = []
    block_rows: list[np.ndarray] = []
    zero_groups: list[ZeroGroup] = []
    group_parent: list[int] = []
    group_rows: list[np.ndarray] = []
    offset = 0

    for bi, b in enumerate(msdp.psd_blocks):
        # generators are invariant by construction of the group, so the
        # block splits into one sub-block per parity class of its basis
        cls = [space.reduce(parity(m)) for m in b.basis]
        buckets: dict[int, list[int]] = {}
        for i, c in enumerate(cls):
            buckets.setdefault(c, []).append(i)
        pos = {}
        for c, rows in buckets.items():
            for r, i in enumerate(rows):
                pos[i] = r
        tri = {c: ([], [], [], []) for c in buckets}
        for i, j, col, val in zip(b.row_i, b.row_j, b.col, b.val):
            c = cls[i]
            if c != cls[j]:
                if remap[col] >= 0:
                    raise AssertionError("cross-class entry on a kept moment")
                continue
            t = tri[c]
            t[0].append(pos[i])
            t[1].append(pos[j])
            t[2].append(remap[col])
            t[3].append(val)
        for c in sorted(buckets):
            rows = buckets[c]
            ri, rj, co, va = tri[c]
            psd_blocks.append(PSDBlock(
                clique=b.clique, kind=b.kind, gen=b.gen, order=b.order,
                side=len(rows), basis=[b.basis[i] for i in rows],
                row_i=np.asarray(ri, dtype=np.int32),
                row_j=np.asarray(rj, dtype=np.int32),
                col=np.asarray(co, dtype=np.int64),
                val=np.asarray(va)))
            block_parent.append(bi)
            block_rows.append(np.asarray(rows, dtype=np.int64))

    for gi, z in enumerate(msdp.zero_groups):
        ps = [parity(m) for m in z.gen.terms]
        c_gen = space.reduce(ps[0]) if ps else 0
        keep_rows = [r for r, gm in enumerate(z.gammas)
                     if space.reduce(parity(gm)) == c_gen]
        if not keep_rows:
            continue
        rowmap = -np.ones(len(z.gammas), dtype=np.int64)
        rowmap[keep_rows] = np.arange(len(keep_rows))
        sel = rowmap[z.rows] >= 0
        zero_groups.append(ZeroGroup(
            clique=z.clique, gen=z.gen, order=z.order,
            gammas=[z.gammas[r] for r in keep_rows], row_offset=offset,
            rows=rowmap[z.rows[sel]],
            col=remap[z.col[sel]],
            val=z.val[sel]))
        group_parent.append(gi)
        group_rows.append(np.asarray(keep_rows, dtype=np.int64))
        offset += len(keep_rows)

    return ReducedSDP(
        parent=msdp, num_y=len(y_keep), y_keep=y_keep,
        objective=revec(msdp.objective, "objective"),
        norm_row=revec(msdp.norm_row, "normalizer"),
        psd_blocks=psd_blocks, zero_groups=zero_groups,
        block_parent=block_parent, block_rows=block_rows,
        group_parent=group_parent, group_rows=group_rows)
