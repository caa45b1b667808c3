"""Interior-point backend for block-structured linear SDPs.

Solves

    min  c . y   s.t.  E y = e,   M_b(y) = sum_i y_i A_i^b  PSD for all b

with a primal-dual predictor-corrector method under Nesterov-Todd
scaling.  The Schur complement is assembled blockwise with BLAS-3
congruence products, so the per-iteration cost is dominated by dense
matrix multiplies of size side_b and a Cholesky factorization of the
(num_vars x num_vars) Schur matrix.  This keeps memory linear in the
number of triangle entries, which is what makes large moment relaxations
tractable in this process; generic conic solvers that store a dense
triangle-squared scaling block per cone exhaust memory at moderate block
sizes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

_SQRT2 = np.sqrt(2.0)


class _Block:
    """Preprocessed LMI block with compact variable indexing."""

    def __init__(self, blk):
        self.side = n = blk.side
        self.tri = n * (n + 1) // 2
        self.var_idx, local = np.unique(blk.col, return_inverse=True)
        self.m_local = len(self.var_idx)
        # svec coordinates: upper triangle, column-major, sqrt(2) off-diag
        iu = np.concatenate([np.arange(j + 1) for j in range(n)]) if n else np.empty(0, int)
        ju = np.concatenate([np.full(j + 1, j) for j in range(n)]) if n else np.empty(0, int)
        self.iu, self.ju = iu, ju
        self.diag_mask = iu == ju
        pos = blk.row_j.astype(np.int64) * (blk.row_j.astype(np.int64) + 1) // 2 \
            + blk.row_i.astype(np.int64)
        sval = np.where(blk.row_i == blk.row_j, blk.val, blk.val * _SQRT2)
        self.B = sp.csr_matrix((sval, (pos, local)), shape=(self.tri, self.m_local))
        self.B.sum_duplicates()
        # full-matrix (column-major vectorized) representation for the
        # Schur congruence products
        rows_f = np.concatenate([
            blk.row_j.astype(np.int64) * n + blk.row_i.astype(np.int64),
            blk.row_i[blk.row_i != blk.row_j].astype(np.int64) * n
            + blk.row_j[blk.row_i != blk.row_j].astype(np.int64),
        ])
        cols_f = np.concatenate([local, local[blk.row_i != blk.row_j]])
        vals_f = np.concatenate([blk.val, blk.val[blk.row_i != blk.row_j]])
        self.C = sp.csc_matrix((vals_f, (rows_f, cols_f)), shape=(n * n, self.m_local))
        self.C.sum_duplicates()
        # same data laid out (side, side*m_local) for one-dgemm products
        coo = self.C.tocoo()
        r = coo.row % n
        cc = coo.row // n
        self.C_wide = sp.csr_matrix(
            (coo.data, (r, coo.col * n + cc)), shape=(n, n * self.m_local))

    def svec(self, M: np.ndarray) -> np.ndarray:
        u = M[self.iu, self.ju].copy()
        u[~self.diag_mask] *= _SQRT2
        return u

    def smat(self, u: np.ndarray) -> np.ndarray:
        M = np.zeros((self.side, self.side))
        vals = u.copy()
        vals[~self.diag_mask] /= _SQRT2
        M[self.iu, self.ju] = vals
        M[self.ju, self.iu] = vals
        return M

    def congruence(self, G: np.ndarray, out: np.ndarray) -> None:
        """Accumulate the block's Schur contribution
        S[i, j] += <A_i, G A_j G> into out[var_idx x var_idx]."""
        n, m = self.side, self.m_local
        if n == 0 or m == 0:
            return
        chunk = max(1, int(2.5e7 // max(1, n * n)))
        idx = self.var_idx
        for lo in range(0, m, chunk):
            hi = min(m, lo + chunk)
            cw = self.C_wide[:, lo * n: hi * n]
            U = G @ cw  # (n, n*(hi-lo)) dense
            U3 = np.asarray(U).reshape(n, hi - lo, n)
            B2 = np.ascontiguousarray(U3.transpose(1, 0, 2)).reshape(-1, n)
            V2 = B2 @ G  # rows grouped (j, r)
            Vmat = V2.reshape(hi - lo, n, n).transpose(0, 2, 1).reshape(hi - lo, n * n).T
            Ssub = self.C.T @ Vmat  # (m_local, hi-lo)
            out[np.ix_(idx, idx[lo:hi])] += Ssub
        # numerical asymmetry from the one-sided loop is removed by the
        # caller's final symmetrization


@dataclass
class IPMResult:
    y: np.ndarray
    lam: np.ndarray
    Z: list[np.ndarray]
    status: str
    pobj: float
    dobj: float
    iterations: int
    mu: float
    residuals: dict


def _nt_scaling(S: np.ndarray, Z: np.ndarray):
    """Nesterov-Todd scaling of the pair (S, Z).

    Returns (G, R, Rinv, lam) where W = R R' is the scaling point with
    W Z W = S, G = W^-1, and lam is the vector of NT eigenvalues:
    R^-1 S R^-T = R' Z R = diag(lam), lam_i > 0, sum lam_i^2 = <S, Z>.
    All direction algebra is done in the scaled variables
    ds_bar = R^-1 dS R^-T, dz_bar = R' dZ R, where complementarity is
    diagonal and perfectly conditioned."""
    Ls = np.linalg.cholesky(S)
    K = Ls.T @ Z @ Ls
    K = 0.5 * (K + K.T)
    d, Q = np.linalg.eigh(K)
    d = np.maximum(d, 1e-300)
    LsinvT_Q = scipy.linalg.solve_triangular(Ls, Q, lower=True, trans="T")
    G = (LsinvT_Q * np.sqrt(d)) @ LsinvT_Q.T
    R = (Ls @ Q) * d ** -0.25
    Rinv = (LsinvT_Q * d ** 0.25).T
    return 0.5 * (G + G.T), R, Rinv, np.sqrt(d)


def _scaled_step(lam: np.ndarray, D: np.ndarray) -> float:
    """sup {a : diag(lam) + a D psd} for lam > 0."""
    if len(lam) == 0:
        return np.inf
    Dn = D / np.sqrt(np.outer(lam, lam))
    w = np.linalg.eigvalsh(0.5 * (Dn + Dn.T))
    lo = w[0]
    if lo >= 0:
        return np.inf
    return 1.0 / (-lo)


def _restore_dual(prob, blocks, E, ET, Ed, e, c, lam, Z, dobj, resid, norm_c):
    """Weighted least-norm correction restoring exact dual feasibility.

    Recovering dZ through the ill-conditioned NT scaling leaves the best
    iterate with a small dual residual r = c - E'lam - sum_b B'svec(Z)
    that a Schur-based method cannot push below roundoff, and because the
    moment vector can be large even a tiny residual biases the reported
    bound by r . y.  The correction dZ_b = Z_b smat(B_b u) Z_b with
    dlam = E u, where (sum_b B'(Z x Z)B + E'E) u = r, removes the
    residual while weighting the change by Z itself, so the perturbation
    stays small on the near-null face of Z and positive definiteness is
    preserved.  The correction is accepted only when it actually shrinks
    the residual and keeps every Z block PSD."""
    m = len(c)

    def dual_resid(lam_, Z_):
        r = c - ET @ lam_
        for b, Zb in zip(blocks, Z_):
            np.subtract.at(r, b.var_idx, b.B.T @ b.svec(Zb))
        return r

    rd = dual_resid(lam, Z)
    if float(np.abs(rd).max(initial=0.0)) == 0.0:
        return lam, Z, dobj, resid
    G = Ed @ Ed.T
    for b, Zb in zip(blocks, Z):
        b.congruence(Zb, G)
    G = 0.5 * (G + G.T)
    ridge = max(1e-300, float(np.trace(G)) / max(m, 1)) * 1e-13
    cho = None
    for attempt in range(8):
        try:
            cho = scipy.linalg.cho_factor(
                G + ridge * np.eye(m), lower=True, check_finite=False)
            break
        except np.linalg.LinAlgError:
            ridge *= 100.0
    if cho is None:
        return lam, Z, dobj, resid

    for _ in range(4):
        best_abs = float(np.abs(rd).max(initial=0.0))
        u = scipy.linalg.cho_solve(cho, rd, check_finite=False)
        cand_lam = lam + E @ u
        cand_Z = []
        ok = True
        for b, Zb in zip(blocks, Z):
            D = Zb @ b.smat(b.B @ u[b.var_idx]) @ Zb
            Zc = Zb + 0.5 * (D + D.T)
            w = np.linalg.eigvalsh(Zc)
            if len(w) and w[0] < -1e-10 * max(1.0, w[-1]):
                ok = False
                break
            cand_Z.append(Zc)
        if not ok:
            break
        cand_rd = dual_resid(cand_lam, cand_Z)
        if float(np.abs(cand_rd).max(initial=0.0)) >= best_abs:
            break
        lam, Z, rd = cand_lam, cand_Z, cand_rd

    dobj = float(lam @ e)
    resid = dict(resid)
    resid["d"] = float(np.abs(rd).max(initial=0.0)) / norm_c
    return lam, Z, dobj, resid


def solve_ipm(prob, tol: float = 1e-8, max_iter: int = 100,
              verbose: bool = False, time_limit: float | None = None):
    """Run the interior-point method on an SDPProblem; returns an
    IPMResult in the problem's (pre-scaled) coefficients."""
    t_start = time.perf_counter()
    m = prob.num_vars
    c = prob.c
    neq_full = prob.eq.shape[0]
    # zero-localizing rows of different cliques overlap, so E routinely
    # has dependent rows; prune to a full-rank subset (pruned rows are
    # implied and get zero multipliers)
    Ed_full = np.asarray(prob.eq.todense()).T  # (m, neq)
    if neq_full > 1:
        # row 0 is the normalization row (rhs 1) and is always kept;
        # prune only among the homogeneous zero rows
        rmat, piv = scipy.linalg.qr(Ed_full[:, 1:], mode="r", pivoting=True)[-2:]
        diag = np.abs(np.diag(rmat))
        rank = int(np.sum(diag > max(1.0, diag[0] if len(diag) else 1.0) * 1e-12))
        keep_rows = np.concatenate(([0], np.sort(piv[:rank]) + 1)).astype(int)
    else:
        keep_rows = np.arange(neq_full)
    Ed = np.ascontiguousarray(Ed_full[:, keep_rows])  # dense E^T
    E = sp.csr_matrix(prob.eq[keep_rows])
    ET = E.T.tocsr()
    e = prob.eq_rhs[keep_rows]
    neq = len(keep_rows)

    blocks = [_Block(b) for b in prob.blocks if b.side > 0]
    nu = sum(b.side for b in blocks)


    tau = max(1.0, float(np.abs(c).max(initial=0.0)) ** 0.5)
    y = np.zeros(m)
    lam = np.zeros(neq)
    S = [tau * np.eye(b.side) for b in blocks]
    Z = [tau * np.eye(b.side) for b in blocks]

    norm_c = 1.0 + float(np.abs(c).max(initial=0.0))
    norm_e = 1.0 + float(np.abs(e).max(initial=0.0))

    status = "IterLimit"
    it = 0
    best = None
    no_progress = 0

    for it in range(1, max_iter + 1):
        # residuals
        rp = e - E @ y
        rd = c - ET @ lam
        for b, Zb in zip(blocks, Z):
            np.subtract.at(rd, b.var_idx, b.B.T @ b.svec(Zb))
        rb = [b.B @ y[b.var_idx] - b.svec(Sb) for b, Sb in zip(blocks, S)]

        gap = sum(float(np.tensordot(Sb, Zb)) for Sb, Zb in zip(S, Z))
        mu = gap / max(nu, 1)
        pobj = float(c @ y)
        dobj = float(lam @ e)

        relp = float(np.abs(rp).max(initial=0.0)) / norm_e
        reld = float(np.abs(rd).max(initial=0.0)) / norm_c
        relb = max((float(np.abs(r).max(initial=0.0)) for r in rb), default=0.0) \
            / (1.0 + float(np.abs(y).max(initial=0.0)))
        relg = gap / (1.0 + abs(pobj) + abs(dobj))
        err = max(relp, reld, relb, relg)

        if verbose:
            print(f"ipm {it:3d}  pobj {pobj:+.8e}  dobj {dobj:+.8e}  "
                  f"mu {mu:.2e}  feas {max(relp, relb):.2e}  dfeas {reld:.2e}")

        if best is None or err < best[0]:
            best = (err, y.copy(), lam.copy(), [Zb.copy() for Zb in Z],
                    pobj, dobj, mu, dict(p=relp, d=reld, b=relb, gap=relg))
            no_progress = 0
        elif mu < 1e-4 * (1.0 + abs(pobj)):
            no_progress += 1
            # near the end of the path the directions eventually degrade;
            # once the error has not improved for many consecutive
            # iterations further steps only corrupt the iterate, so
            # return the best one
            if no_progress >= 8:
                status = "Stall"
                break
        if err <= tol:
            status = "Optimal"
            break
        if float(np.abs(y).max(initial=0.0)) > 1e13:
            status = "Unbounded"
            break
        if time_limit is not None and time.perf_counter() - t_start > time_limit:
            status = "IterLimit"
            break

        # NT scaling and Schur complement
        Gs, Rs, Ris, lams, ok = [], [], [], [], True
        for Sb, Zb in zip(S, Z):
            try:
                G, R, Ri, lamv = _nt_scaling(Sb, Zb)
            except np.linalg.LinAlgError:
                ok = False
                break
            Gs.append(G)
            Rs.append(R)
            Ris.append(Ri)
            lams.append(lamv)
        if not ok:
            status = "Stall"
            break

        Shur = np.zeros((m, m))
        for b, G in zip(blocks, Gs):
            b.congruence(G, Shur)
        Shur = 0.5 * (Shur + Shur.T)

        trace_scale = max(1.0, float(np.trace(Shur)) / m)
        ridge = 1e-13 * trace_scale
        cho = None
        for attempt in range(6):
            try:
                cho = scipy.linalg.cho_factor(
                    Shur + ridge * np.eye(m), lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                ridge *= 100.0
        if cho is None:
            status = "Stall"
            break

        if Ed is None:
            Ed = np.asarray(ET.todense())
        SinvET = scipy.linalg.cho_solve(cho, Ed, check_finite=False)
        T = Ed.T @ SinvET
        T = 0.5 * (T + T.T)
        # the equality rows may be linearly dependent, so T needs a
        # proximal shift; refinement below removes the resulting bias
        t_ridge = max(1e-300, float(np.trace(T)) / max(neq, 1)) * 1e-13
        choT = None
        for attempt in range(6):
            try:
                choT = scipy.linalg.cho_factor(
                    T + t_ridge * np.eye(neq), lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                t_ridge *= 100.0
        if choT is None:
            status = "Stall"
            break

        def aug_solve(g1, g2):
            """Regularized augmented solve with iterative refinement
            against the exact operator [[Shur, -E'], [E, 0]]."""
            dy = np.zeros(m)
            dl = np.zeros(neq)
            for _ in range(3):
                r1 = g1 - (Shur @ dy - Ed @ dl)
                r2 = g2 - Ed.T @ dy
                u = scipy.linalg.cho_solve(cho, r1, check_finite=False)
                ddl = scipy.linalg.cho_solve(choT, r2 - Ed.T @ u,
                                             check_finite=False)
                ddy = scipy.linalg.cho_solve(cho, r1 + Ed @ ddl,
                                             check_finite=False)
                dy += ddy
                dl += ddl
            return dy, dl

        # All direction computations use the NT-scaled variables
        # ds_bar = R^-1 dS R^-T and dz_bar = R' dZ R, in which the
        # linearized complementarity is diagonal:
        #     lam o (ds_bar + dz_bar) = rhs   =>   ds_bar + dz_bar = d_c,
        #     (d_c)_ij = 2 rhs_ij / (lam_i + lam_j).
        # With Bbar = (R^-1 (x)s R^-1) B the KKT system in
        # (dy, dlam, dz_bar) is
        #     E'dlam + sum_b Bbar' dz_bar = rd
        #     E dy                        = rp
        #     Bbar_b dy + dz_bar_b        = d_c_b - rb_bar_b
        # and eliminating dz_bar gives the same Schur matrix
        # sum_b Bbar'Bbar = sum_b B'(W^-1 (x)s W^-1)B as the classic
        # reduction.  Unlike eliminating dZ = (W (x)s W)^-1 (rc - dS),
        # nothing here inverts the scaling or cancels large intermediate
        # quantities, so the directions stay accurate even when
        # cond(W)^2 ~ 1/mu^2 overflows double precision.

        def bbar(b, Ri, v):
            """Bbar_b applied to dy restricted to the block (v = B dy)."""
            M = Ri @ b.smat(v) @ Ri.T
            return b.svec(0.5 * (M + M.T))

        def bbar_T(b, Ri, v):
            """Bbar_b' applied to a scaled svec vector."""
            M = Ri.T @ b.smat(v) @ Ri
            return b.B.T @ b.svec(0.5 * (M + M.T))

        rb_bar = [bbar(b, Ri, rbb) for b, Ri, rbb in zip(blocks, Ris, rb)]

        def newton_s(rp_t, rd_t, r3_t):
            g1 = -rd_t.copy()
            for b, Ri, r3 in zip(blocks, Ris, r3_t):
                np.add.at(g1, b.var_idx, bbar_T(b, Ri, r3))
            dy, dlam = aug_solve(g1, rp_t)
            dzb = [r3 - bbar(b, Ri, b.B @ dy[b.var_idx])
                   for b, Ri, r3 in zip(blocks, Ris, r3_t)]
            return dy, dlam, dzb

        tri_off = np.cumsum([0] + [b.tri for b in blocks])
        nk = m + neq + tri_off[-1]

        def split(v):
            return (v[:m], v[m:m + neq],
                    [v[m + neq + tri_off[i]: m + neq + tri_off[i + 1]]
                     for i in range(len(blocks))])

        def kkt_mv(v):
            dy, dl, dzb = split(v)
            o1 = ET @ dl
            for b, Ri, zv in zip(blocks, Ris, dzb):
                np.add.at(o1, b.var_idx, bbar_T(b, Ri, zv))
            o2 = E @ dy
            o3 = [bbar(b, Ri, b.B @ dy[b.var_idx]) + zv
                  for b, Ri, zv in zip(blocks, Ris, dzb)]
            return np.concatenate([o1, o2] + o3)

        def kkt_precond(v):
            r1, r2, r3 = split(v)
            dy, dlam, dzb = newton_s(r2, r1, r3)
            return np.concatenate([dy, dlam] + dzb)

        # One GMRES sweep on the full (well-conditioned) KKT operator,
        # right-preconditioned by the Schur solve, removes the bias the
        # regularized Cholesky factors leave in the direction; right
        # preconditioning makes the minimized quantity the true residual.
        kkt_opM = sp.linalg.LinearOperator(
            (nk, nk), matvec=lambda v: kkt_mv(kkt_precond(v)),
            dtype=np.float64)

        def solve_kkt(dc_list):
            r3 = [dc - rbs for dc, rbs in zip(dc_list, rb_bar)]
            rhs = np.concatenate([rd, rp] + r3)
            nrhs = max(float(np.linalg.norm(rhs)), 1e-300)
            z, _ = sp.linalg.gmres(kkt_opM, rhs, rtol=1e-12,
                                   atol=0.0, restart=30, maxiter=1)
            sol = kkt_precond(z)
            # escalate the Krylov budget only when the cheap pass left a
            # poor direction (the extra matvecs are wasted otherwise)
            if np.linalg.norm(kkt_mv(sol) - rhs) / nrhs > 1e-8:
                z, _ = sp.linalg.gmres(kkt_opM, rhs, x0=z, rtol=1e-12,
                                       atol=0.0, restart=60, maxiter=3)
                sol = kkt_precond(z)
            dy, dlam, dzb = split(sol)
            # primal direction taken directly from dy keeps S consistent
            # with the moment vector; dual recovery is a stable product
            dS, dZ, dsb, dzm = [], [], [], []
            for b, Ri, rbb, zv in zip(blocks, Ris, rb, dzb):
                sv = b.B @ dy[b.var_idx] + rbb
                dS.append(b.smat(sv))
                M = Ri @ b.smat(sv) @ Ri.T
                dsb.append(0.5 * (M + M.T))
                Mz = Ri.T @ b.smat(zv) @ Ri
                dZ.append(0.5 * (Mz + Mz.T))
                dzm.append(b.smat(zv))
            return dy, dlam, dS, dZ, dsb, dzm

        # predictor (affine direction) to pick the centering weight;
        # in scaled variables the affine target is simply -diag(lam)
        dc_aff = [b.svec(np.diag(-lamv)) for b, lamv in zip(blocks, lams)]
        dy_a, dlam_a, dS_a, dZ_a, dsb_a, dzb_a = solve_kkt(dc_aff)
        # equal primal/dual steps keep the exact gap recursion
        # gap_new = (1 - a(1 - sigma)) gap once feasibility is reached
        aff = min(
            min((_scaled_step(lamv, D) for lamv, D in zip(lams, dsb_a)),
                default=np.inf),
            min((_scaled_step(lamv, D) for lamv, D in zip(lams, dzb_a)),
                default=np.inf))
        aff = min(1.0, 0.99 * aff)
        gap_aff = sum(
            float(np.tensordot(np.diag(lamv) + aff * Dsb,
                               np.diag(lamv) + aff * Dzb))
            for lamv, Dsb, Dzb in zip(lams, dsb_a, dzb_a))
        sigma = min(0.8, max(1e-4, (max(gap_aff, 0.0) / max(gap, 1e-300)) ** 3))

        # Mehrotra corrector: lam o (ds+dz) = sigma mu I - lam^2
        #                                     - sym(ds_aff dz_aff)
        dc = []
        for b, lamv, Dsb, Dzb in zip(blocks, lams, dsb_a, dzb_a):
            Hb = Dsb @ Dzb
            Hb = -0.5 * (Hb + Hb.T)
            Hb[np.diag_indices_from(Hb)] += sigma * mu - lamv ** 2
            denom = 0.5 * np.add.outer(lamv, lamv)
            dc.append(b.svec(Hb / denom))
        dy, dlam, dS, dZ, dsb, dzb = solve_kkt(dc)

        alpha = min(
            min((_scaled_step(lamv, D) for lamv, D in zip(lams, dsb)),
                default=np.inf),
            min((_scaled_step(lamv, D) for lamv, D in zip(lams, dzb)),
                default=np.inf))
        step_frac = 0.99 if mu > 1e-6 else 0.999
        alpha = min(1.0, step_frac * alpha)
        if verbose:
            print(f"      aff {aff:.3f}  sigma {sigma:.3f}  alpha {alpha:.3f}")
        if alpha < 1e-10:
            status = "Stall"
            break

        y += alpha * dy
        lam += alpha * dlam
        for i in range(len(blocks)):
            S[i] = 0.5 * (S[i] + alpha * dS[i] + (S[i] + alpha * dS[i]).T)
            Z[i] = 0.5 * (Z[i] + alpha * dZ[i] + (Z[i] + alpha * dZ[i]).T)

    err, yb, lamb, Zb, pobj, dobj, mu, resid = best
    lamb, Zb, dobj, resid = _restore_dual(
        prob, blocks, E, ET, Ed, e, c, lamb, Zb, dobj, resid, norm_c)
    err = max(resid.values())
    if status in ("Stall", "IterLimit"):
        if err <= 10 * tol:
            status = "Optimal"
        elif err <= max(1e-5, 100 * tol):
            status = "NearOptimal"
    lam_full = np.zeros(neq_full)
    lam_full[keep_rows] = lamb
    return IPMResult(y=yb, lam=lam_full, Z=Zb, status=status, pobj=pobj,
                     dobj=dobj, iterations=it, mu=mu, residuals=resid)
