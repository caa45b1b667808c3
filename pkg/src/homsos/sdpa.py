"""SDPA sparse format (.dat-s) export and import.

The conic problem

    min  c . y   s.t.  E y = e,  B_b(y) >= 0

is written in SDPA primal form  min c.x  s.t.  sum_j x_j F_j - F_0 >= 0:
one PSD block per LMI block (no constant part) plus one diagonal block
holding each equality row twice with opposite signs.  Output is byte
stable: entries are emitted in sorted (matrix, block, i, j) order with
"%.16e" floats, so identical problems produce identical files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sdp import LMIBlock, SDPProblem

_FMT = "%.16e"


def export_sdpa(prob: SDPProblem, path: str | None = None) -> str:
    """Serialize an SDP to the .dat-s text format; returns the text and
    optionally writes it to a file."""
    out = io.StringIO()
    n_eq = prob.num_eq
    sides = [b.side for b in prob.blocks] + [-2 * n_eq]

    out.write('"generated by homsos: %d vars, %d eq rows, %d LMI blocks\n'
              % (prob.num_vars, n_eq, len(prob.blocks)))
    out.write("%d\n" % prob.num_vars)
    out.write("%d\n" % len(sides))
    out.write(" ".join(str(s) for s in sides) + "\n")
    out.write(" ".join(_FMT % v for v in prob.c) + "\n")

    entries: list[tuple[int, int, int, int, float]] = []
    for bno, blk in enumerate(prob.blocks, start=1):
        # LMI coefficients carry the block pre-scaling; undo it so the
        # file matches the original moment coefficients
        for i, j, col, val in zip(blk.row_i, blk.row_j, blk.col, blk.val):
            entries.append((int(col) + 1, bno, int(i) + 1, int(j) + 1,
                            float(val) * blk.scale))
    diag_bno = len(sides)
    eq = prob.eq.tocoo()
    for r, c, v in zip(eq.row, eq.col, eq.data):
        entries.append((int(c) + 1, diag_bno, int(r) + 1, int(r) + 1, float(v)))
        entries.append((int(c) + 1, diag_bno, n_eq + int(r) + 1, n_eq + int(r) + 1,
                        -float(v)))
    for r, v in enumerate(prob.eq_rhs):
        if v != 0.0:
            entries.append((0, diag_bno, r + 1, r + 1, float(v)))
            entries.append((0, diag_bno, n_eq + r + 1, n_eq + r + 1, -float(v)))

    entries.sort(key=lambda t: t[:4])
    for matno, bno, i, j, v in entries:
        out.write(("%d %d %d %d " + _FMT + "\n") % (matno, bno, i, j, v))

    text = out.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


@dataclass
class SDPAData:
    """Raw contents of a .dat-s file."""

    num_vars: int
    block_sizes: list[int]
    c: np.ndarray
    entries: list[tuple[int, int, int, int, float]]


def parse_sdpa(text: str) -> SDPAData:
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith(('"', "*"))]
    num_vars = int(lines[0].split()[0])
    n_block = int(lines[1].split()[0])
    sizes = [int(tok.strip("(){},")) for tok in lines[2].replace(",", " ").split()]
    if len(sizes) != n_block:
        raise ValueError("block size list does not match nBLOCK")
    c = np.array([float(tok) for tok in lines[3].replace(",", " ").split()])
    if len(c) != num_vars:
        raise ValueError("objective length does not match mDIM")
    entries = []
    for ln in lines[4:]:
        toks = ln.split()
        entries.append((int(toks[0]), int(toks[1]), int(toks[2]), int(toks[3]),
                        float(toks[4])))
    return SDPAData(num_vars=num_vars, block_sizes=sizes, c=c, entries=entries)


def import_sdpa(text: str) -> SDPProblem:
    """Rebuild an SDPProblem from a file produced by export_sdpa.  The
    last block must be the diagonal equality block written by the
    exporter (paired +/- rows)."""
    data = parse_sdpa(text)
    if not data.block_sizes or data.block_sizes[-1] >= 0:
        raise ValueError("expected a trailing diagonal equality block")
    n_eq = -data.block_sizes[-1] // 2
    diag_bno = len(data.block_sizes)

    blocks = []
    triples: list[list] = [[] for _ in data.block_sizes[:-1]]
    eq_rows, eq_cols, eq_vals = [], [], []
    eq_rhs = np.zeros(n_eq)
    for matno, bno, i, j, v in data.entries:
        if bno == diag_bno:
            if i > n_eq:
                continue  # the mirrored negative copy
            if matno == 0:
                eq_rhs[i - 1] = v
            else:
                eq_rows.append(i - 1)
                eq_cols.append(matno - 1)
                eq_vals.append(v)
        else:
            if matno == 0:
                raise ValueError("LMI blocks must have no constant part")
            triples[bno - 1].append((i - 1, j - 1, matno - 1, v))
    for side, tri in zip(data.block_sizes[:-1], triples):
        tri.sort()
        blocks.append(LMIBlock(
            side=side,
            row_i=np.array([t[0] for t in tri], dtype=np.int32),
            row_j=np.array([t[1] for t in tri], dtype=np.int32),
            col=np.array([t[2] for t in tri], dtype=np.int64),
            val=np.array([t[3] for t in tri]),
            scale=1.0,
        ))
    eq = sp.csr_matrix((eq_vals, (eq_rows, eq_cols)),
                       shape=(n_eq, data.num_vars))
    return SDPProblem(num_vars=data.num_vars, c=data.c, eq=eq,
                      eq_rhs=eq_rhs, blocks=blocks)
