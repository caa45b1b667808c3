"""SDP problem container and in-process conic backends.

The canonical form is

    min  c . y
    s.t. E y = e                      (normalization + zero-localizing rows)
         B_b(y) >= 0 (PSD)           (moment / localizing blocks)

with free variables y.  Backends: "ipm" (built-in block interior point,
default via "auto"), "clarabel", and "scs".  The built-in method keeps
memory linear in the cone triangle sizes, which generic conic solvers do
not, and "auto" falls back to SCS only when the Schur matrix would be
too large to hold densely.  Each LMI block is pre-scaled by its max-abs
coefficient; duals are unscaled on the way back, so SDPSolution.gram are
Gram matrices of the SOS certificate in the original coefficients.  The
HOMSOS_BACKEND environment variable overrides the requested backend.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .relax import MomentSDP

STATUSES = ("Optimal", "NearOptimal", "Infeasible", "Unbounded", "Stall", "IterLimit")


@dataclass
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 200
    backend: str = "auto"
    verbose: bool = False
    time_limit: float | None = None

# above this many y variables the dense Schur complement of the built-in
# method no longer fits comfortably in memory and "auto" routes to SCS
AUTO_IPM_MAX_VARS = 12000

# Clarabel stores a dense (triangle x triangle) scaling block per PSD
# cone; beyond this working-set budget "auto" falls back to the built-in
# method, which keeps memory linear in the triangle sizes
CLARABEL_MEM_BUDGET = float(os.environ.get("HOMSOS_CLARABEL_MEM", 1.5e9))

# wallclock budget for Clarabel; when the cubic factorization-cost model
# predicts more than this, "auto" prefers the built-in method, whose
# per-iteration cost grows more slowly with large PSD blocks
CLARABEL_TIME_BUDGET = float(os.environ.get("HOMSOS_CLARABEL_TIME", 30.0))


def clarabel_mem_estimate(prob: SDPProblem) -> float:
    """Rough bytes needed by Clarabel's cone scaling and KKT data."""
    tri = [b.side * (b.side + 1) // 2 for b in prob.blocks]
    return 8.0 * 3.0 * sum(t * t for t in tri) \
        + 400.0 * (prob.num_eq + sum(tri))


def clarabel_time_estimate(prob: SDPProblem) -> float:
    """Predicted solve seconds on one commodity core; cubic in the PSD
    triangle sizes (dense scaling-block factorization dominates), with
    the constant fitted to single-thread measurements."""
    tri = [b.side * (b.side + 1) // 2 for b in prob.blocks]
    return 2.5e-9 * sum(float(t) ** 3 for t in tri)


@dataclass
class LMIBlock:
    side: int
    row_i: np.ndarray = field(repr=False, default=None)
    row_j: np.ndarray = field(repr=False, default=None)
    col: np.ndarray = field(repr=False, default=None)
    val: np.ndarray = field(repr=False, default=None)
    scale: float = 1.0


@dataclass
class SDPProblem:
    num_vars: int
    c: np.ndarray
    eq: sp.csr_matrix          # first row is the normalization row
    eq_rhs: np.ndarray
    blocks: list[LMIBlock]

    @property
    def num_eq(self) -> int:
        return self.eq.shape[0]


@dataclass
class SDPSolution:
    y: np.ndarray
    status: str
    pobj: float
    dobj: float
    gram: list[np.ndarray] | None      # dual PSD matrix per LMI block
    eq_dual: np.ndarray | None         # dual per equality row (norm row first)
    iterations: int = 0
    solve_time: float = 0.0
    backend: str = ""
    raw_status: str = ""

    @property
    def trusted(self) -> bool:
        return self.status in ("Optimal", "NearOptimal")


def from_moment(msdp: MomentSDP) -> SDPProblem:
    c = np.zeros(msdp.num_y)
    for i, v in msdp.objective.items():
        c[i] += v

    rows, cols, vals = [], [], []
    rhs = [1.0]
    for i, v in msdp.norm_row.items():
        rows.append(0)
        cols.append(i)
        vals.append(v)
    n_rows = 1
    for z in msdp.zero_groups:
        rows.extend((z.rows + n_rows).tolist())
        cols.extend(z.col.tolist())
        vals.extend(z.val.tolist())
        n_rows += len(z.gammas)
        rhs.extend([0.0] * len(z.gammas))
    eq = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, msdp.num_y))
    eq.sum_duplicates()

    blocks = []
    for b in msdp.psd_blocks:
        scale = float(np.abs(b.val).max()) if len(b.val) else 1.0
        blocks.append(LMIBlock(
            side=b.side, row_i=b.row_i, row_j=b.row_j, col=b.col,
            val=b.val / scale, scale=scale,
        ))
    return SDPProblem(num_vars=msdp.num_y, c=c, eq=eq,
                      eq_rhs=np.asarray(rhs), blocks=blocks)


def solve(prob: SDPProblem, opts: SolveOptions | None = None) -> SDPSolution:
    opts = opts or SolveOptions()
    backend = os.environ.get("HOMSOS_BACKEND", opts.backend).lower()
    if backend == "auto":
        if (clarabel_mem_estimate(prob) <= CLARABEL_MEM_BUDGET
                and clarabel_time_estimate(prob) <= CLARABEL_TIME_BUDGET):
            backend = "clarabel"
        elif prob.num_vars <= AUTO_IPM_MAX_VARS:
            backend = "ipm"
        else:
            backend = "scs"
    t0 = time.perf_counter()
    if backend == "ipm":
        sol = _solve_ipm(prob, opts)
    elif backend == "clarabel":
        sol = _solve_clarabel(prob, opts)
    elif backend == "scs":
        sol = _solve_scs(prob, opts)
    else:
        raise ValueError(f"unknown backend {opts.backend!r}")
    sol.solve_time = time.perf_counter() - t0
    sol.backend = backend
    return sol


# -- conic assembly helpers -------------------------------------------

def _svec_upper_pos(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Position of entry (i, j), i <= j, in upper-triangle column-major
    packing (Clarabel's svec order)."""
    return j * (j + 1) // 2 + i


def _svec_lower_pos(i: np.ndarray, j: np.ndarray, n: int) -> np.ndarray:
    """Position of entry (i, j), i <= j, in lower-triangle column-major
    packing (SCS's svec order)."""
    return i * n - i * (i - 1) // 2 + (j - i)


_SQRT2 = np.sqrt(2.0)


def _block_triples(b: LMIBlock, row_offset: int, order: str):
    if order == "upper":
        pos = _svec_upper_pos(b.row_i.astype(np.int64), b.row_j.astype(np.int64))
    else:
        pos = _svec_lower_pos(b.row_i.astype(np.int64), b.row_j.astype(np.int64), b.side)
    vals = np.where(b.row_i == b.row_j, b.val, b.val * _SQRT2)
    return pos + row_offset, b.col, -vals  # b - A y in cone => A = -coeffs


def _build_conic(prob: SDPProblem, order: str):
    """Stack rows: zero cone (equalities), then PSD triangles."""
    n = prob.num_vars
    eq_coo = prob.eq.tocoo()
    rows = [eq_coo.row.astype(np.int64)]
    cols = [eq_coo.col.astype(np.int64)]
    vals = [eq_coo.data]
    offset = prob.num_eq
    b_parts = [prob.eq_rhs]
    sides = []
    block_offsets = []
    for blk in prob.blocks:
        tri = blk.side * (blk.side + 1) // 2
        r, c, v = _block_triples(blk, offset, order)
        rows.append(r)
        cols.append(c)
        vals.append(v)
        b_parts.append(np.zeros(tri))
        block_offsets.append(offset)
        sides.append(blk.side)
        offset += tri
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(offset, n))
    A.sum_duplicates()
    b = np.concatenate(b_parts)
    return A, b, sides, block_offsets


def _unpack_duals(prob: SDPProblem, z: np.ndarray, sides, block_offsets, order: str):
    grams = []
    for blk, off in zip(prob.blocks, block_offsets):
        side = blk.side
        tri = side * (side + 1) // 2
        zb = z[off: off + tri]
        m = np.zeros((side, side))
        idx = 0
        if order == "upper":
            for j in range(side):
                for i in range(j + 1):
                    m[i, j] = zb[idx]
                    idx += 1
        else:
            for i in range(side):
                for j in range(i, side):
                    m[j, i] = zb[idx]
                    idx += 1
            m = m.T
        m = (m + m.T)
        for i in range(side):
            m[i, i] /= 2.0
        off_diag = ~np.eye(side, dtype=bool)
        m[off_diag] /= _SQRT2
        # undo block coefficient pre-scaling
        grams.append(m / blk.scale)
    eq_dual = z[: prob.num_eq]
    return grams, eq_dual


# -- backends ---------------------------------------------------------

def _solve_ipm(prob: SDPProblem, opts: SolveOptions) -> SDPSolution:
    from .ipm import solve_ipm

    res = solve_ipm(prob, tol=opts.tol, max_iter=max(opts.max_iter, 100),
                    verbose=opts.verbose, time_limit=opts.time_limit)
    grams = []
    zi = 0
    for blk in prob.blocks:
        if blk.side == 0:
            grams.append(np.zeros((0, 0)))
        else:
            grams.append(res.Z[zi] / blk.scale)
            zi += 1
    return SDPSolution(
        y=res.y, status=res.status, pobj=res.pobj, dobj=res.dobj,
        gram=grams, eq_dual=-res.lam, iterations=res.iterations,
        raw_status=f"ipm:{res.status.lower()} mu={res.mu:.1e}",
    )


def _solve_clarabel(prob: SDPProblem, opts: SolveOptions) -> SDPSolution:
    import clarabel

    A, b, sides, block_offsets = _build_conic(prob, "upper")
    cones = [clarabel.ZeroConeT(prob.num_eq)]
    cones += [clarabel.PSDTriangleConeT(s) for s in sides]
    P = sp.csc_matrix((prob.num_vars, prob.num_vars))
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iter
    settings.tol_gap_abs = opts.tol
    settings.tol_gap_rel = opts.tol
    settings.tol_feas = opts.tol
    solver = clarabel.DefaultSolver(P, prob.c, A, b, cones, settings)
    res = solver.solve()
    raw = str(res.status)
    status = _clarabel_status(raw)
    y = np.asarray(res.x)
    z = np.asarray(res.z)
    grams, eq_dual = _unpack_duals(prob, z, sides, block_offsets, "upper")
    return SDPSolution(
        y=y, status=status, pobj=float(res.obj_val), dobj=float(res.obj_val_dual),
        gram=grams, eq_dual=eq_dual, iterations=int(res.iterations), raw_status=raw,
    )


def _clarabel_status(raw: str) -> str:
    raw = raw.lower()
    if raw == "solved":
        return "Optimal"
    if "almostsolved" in raw:
        return "NearOptimal"
    if "primalinfeasible" in raw:
        return "Infeasible"
    if "dualinfeasible" in raw:
        return "Unbounded"
    if "maxiter" in raw or "maxtime" in raw:
        return "IterLimit"
    return "Stall"


def _solve_scs(prob: SDPProblem, opts: SolveOptions) -> SDPSolution:
    import scs

    A, b, sides, block_offsets = _build_conic(prob, "lower")
    data = {"A": A, "b": b, "c": prob.c}
    cone = {"z": prob.num_eq, "s": sides}
    tol = max(opts.tol, 1e-9)
    solver = scs.SCS(data, cone, eps_abs=tol, eps_rel=tol,
                     max_iters=max(opts.max_iter, 2500) * 100,
                     verbose=opts.verbose)
    res = solver.solve()
    raw = res["info"]["status"]
    status = _scs_status(raw)
    y = np.asarray(res["x"])
    z = np.asarray(res["y"])
    grams, eq_dual = _unpack_duals(prob, z, sides, block_offsets, "lower")
    return SDPSolution(
        y=y, status=status, pobj=float(res["info"]["pobj"]),
        dobj=float(res["info"]["dobj"]), gram=grams, eq_dual=eq_dual,
        iterations=int(res["info"]["iter"]), raw_status=raw,
    )


def _scs_status(raw: str) -> str:
    low = raw.lower()
    if low == "solved":
        return "Optimal"
    if "inaccurate" in low and "solved" in low:
        return "NearOptimal"
    if "infeasible" in low:
        return "Infeasible"
    if "unbounded" in low:
        return "Unbounded"
    if "iteration" in low or "time" in low:
        return "IterLimit"
    return "Stall"
