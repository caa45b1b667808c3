"""Builtin problem corpus, local refinement, and gap reporting.

The corpus covers a set of benchmark polynomial optimization problems on
possibly unbounded sets (several with known optima), two trajectory
optimization transcriptions (block moving with minimum work, Van der Pol
control), and a negative-control instance on which the unperturbed
homogenized hierarchy is known not to converge.  Each generator returns a
ProblemSpec whose declared cliques satisfy the running intersection
property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .poly import Polynomial, VariableTable, mono_make
from .pop import POP
from . import sparsity


@dataclass
class ProblemSpec:
    name: str
    pop: POP
    params: dict = field(default_factory=dict)
    known_optimum: float | None = None

    def check(self) -> None:
        dec = sparsity.decompose(self.pop)
        if not dec.rip:
            raise ValueError(f"{self.name}: declared cliques violate the RIP")


def _vars(table: VariableTable, names) -> list[Polynomial]:
    return [Polynomial.variable(table.add(nm)) for nm in names]


def _sq(p: Polynomial) -> Polynomial:
    return p * p


# -- unconstrained corpus ---------------------------------------------

def _ex51() -> ProblemSpec:
    t = VariableTable()
    x1, x2, x3, x4 = _vars(t, ["x1", "x2", "x3", "x4"])
    f1 = _sq(x3) * (_sq(x1) + x1.pow(4) * _sq(x2) + x3.pow(4)
                    - (_sq(x1) * _sq(x2)).scale(3.0)) + x2.pow(8)
    f2 = _sq(x1) * _sq(x2) * _sq(x4)
    p = POP(table=t, objective=f1 + f2, ineqs=[], eqs=[],
            cliques=[[0, 1, 2], [0, 1, 3]])
    return ProblemSpec(name="ex5.1", pop=p, known_optimum=0.0)


def _vandermonde_group(xs: list[Polynomial]) -> Polynomial:
    """sum_i x_i^4 + sum over the index set (a constant-1 slot plus the
    given variables) of prod_{j != i} (v_i - v_j)."""
    vs = [Polynomial.constant(1.0)] + xs
    out = Polynomial.zero()
    for x in xs:
        out = out + x.pow(4)
    for i, vi in enumerate(vs):
        prod = Polynomial.constant(1.0)
        for j, vj in enumerate(vs):
            if j != i:
                prod = prod * (vi - vj)
        out = out + prod
    return out


def _ex52() -> ProblemSpec:
    t = VariableTable()
    x = _vars(t, [f"x{i}" for i in range(1, 11)])
    f = (_vandermonde_group(x[0:4]) + _vandermonde_group(x[3:7])
         + _vandermonde_group(x[6:10]))
    p = POP(table=t, objective=f, ineqs=[], eqs=[],
            cliques=[[0, 1, 2, 3], [3, 4, 5, 6], [6, 7, 8, 9]])
    return ProblemSpec(name="ex5.2", pop=p, known_optimum=0.6927)


def _ex53() -> ProblemSpec:
    t = VariableTable()
    x = _vars(t, [f"x{i}" for i in range(1, 21)])
    one = Polynomial.constant(1.0)
    f = Polynomial.zero()
    cliques = []
    for i in range(1, 7):
        a, b, c = x[0], x[1], x[3 * i - 1]
        d, e = x[3 * i], x[3 * i + 1]
        fi = (_sq(a) * _sq(a - one) + _sq(b) * _sq(b - one)
              + _sq(c) * _sq(c - one)
              + (a * b * c * (a + b + c - Polynomial.constant(2.0))).scale(2.0)
              + (_sq(a - one) + _sq(b - one) + _sq(c - one)
                 + _sq(d - one)).scale(0.25)
              + _sq(d * e - one))
        f = f + fi
        cliques.append([0, 1, 3 * i - 1, 3 * i, 3 * i + 1])
    p = POP(table=t, objective=f, ineqs=[], eqs=[], cliques=cliques)
    return ProblemSpec(name="ex5.3", pop=p, known_optimum=1.1900)


# -- constrained corpus -----------------------------------------------

def _ex54() -> ProblemSpec:
    # minimum 4 + 2*sqrt(2) at x = (1+sqrt(2), 1, +-1, x4, x5) with
    # x4^2 + x5^2 = 1
    t = VariableTable()
    x1, x2, x3, x4, x5 = _vars(t, [f"x{i}" for i in range(1, 6)])
    one = Polynomial.constant(1.0)
    f = (_sq(x1) + _sq(x2).scale(3.0) - (x2 * _sq(x3)).scale(2.0)
         + x3.pow(4) - x2 * (_sq(x4) + _sq(x5)))
    gs = [
        _sq(x1) - (x1 * x2).scale(2.0) - one,
        _sq(x1) + (x1 * x2).scale(2.0) - one,
        _sq(x2) - one,
        x2 - _sq(x4) - _sq(x5),
    ]
    p = POP(table=t, objective=f, ineqs=gs, eqs=[],
            cliques=[[0, 1], [1, 2], [1, 3, 4]])
    return ProblemSpec(name="ex5.4", pop=p, known_optimum=4.0 + 2.0 * math.sqrt(2.0))


def _ex55() -> ProblemSpec:
    t = VariableTable()
    x1, x2, x3, x4, x5, x6, x7 = _vars(t, [f"x{i}" for i in range(1, 8)])
    one = Polynomial.constant(1.0)
    f1 = (x1.pow(4) * _sq(x2) + x2.pow(4) * _sq(x3) + x3.pow(4) * _sq(x1)
          - (_sq(x1) * _sq(x2) * _sq(x3)).scale(3.0) + _sq(x2)
          + _sq(x7) * (_sq(x1) + _sq(x2) + _sq(x3)))
    f2 = (_sq(x4) * _sq(x5) * (Polynomial.constant(10.0) - _sq(x6))
          + _sq(x7) * (_sq(x4) + _sq(x5).scale(2.0) + _sq(x6).scale(3.0)))
    gs = [x1 - x2 * x3, _sq(x3) - x2, one - _sq(x4) - _sq(x5) - _sq(x6)]
    p = POP(table=t, objective=f1 + f2, ineqs=gs, eqs=[],
            cliques=[[0, 1, 2, 6], [3, 4, 5, 6]])
    return ProblemSpec(name="ex5.5", pop=p, known_optimum=0.0)


def _broyden_banded_block(xs: list[Polynomial]) -> Polynomial:
    """(sum x_j^2 + 1)^2 - 4 * (two 5-cycles of squared products)
    + (1/5) sum x_j^4 on a 10-variable block."""
    one = Polynomial.constant(1.0)
    s = one
    for x in xs:
        s = s + _sq(x)
    out = s * s
    for a, b in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0),
                 (5, 6), (6, 7), (7, 8), (8, 9), (9, 5)]:
        out = out - _sq(xs[a] * xs[b]).scale(4.0)
    for x in xs:
        out = out + x.pow(4).scale(0.2)
    return out


def _ex56(p: int = 2) -> ProblemSpec:
    if p < 2:
        raise ValueError("p must be at least 2")
    t = VariableTable()
    n = 8 * p + 2
    x = _vars(t, [f"x{i}" for i in range(1, n + 1)])
    f = Polynomial.zero()
    gs = []
    cliques = []
    for i in range(1, p + 1):
        ids = list(range(8 * (i - 1), 8 * (i - 1) + 10))
        xs = [x[j] for j in ids]
        f = f + _broyden_banded_block(xs)
        g = Polynomial.constant(-1.0)
        for xx in xs:
            g = g + xx.pow(4)
        gs.append(g)
        cliques.append(ids)
    pop = POP(table=t, objective=f, ineqs=gs, eqs=[], cliques=cliques)
    return ProblemSpec(name=f"ex5.6(p={p})", pop=pop, params={"p": p})


def _ex57(n: int = 20, seed: int = 0) -> ProblemSpec:
    if n < 6:
        raise ValueError("n must be at least 6")
    t = VariableTable()
    x = _vars(t, [f"x{i}" for i in range(1, n + 1)])
    p = math.ceil(n / 3)
    cliques = [[0, 1, 2]]
    for i in range(2, p):
        cliques.append(list(range(3 * (i - 1) - 1, 3 * i)))
    cliques.append(list(range(3 * (p - 1) - 1, n)))
    rng = np.random.default_rng(seed)
    f = Polynomial.zero()
    gs = []
    for cl in cliques:
        m = len(cl)
        A = rng.uniform(0.0, 1.0, size=(m, m))
        b = rng.uniform(0.0, 1.0, size=m)
        sq = [_sq(x[j]) for j in cl]
        for r in range(m):
            row = Polynomial.zero()
            for c in range(m):
                row = row + sq[c].scale(A[r, c])
            f = f + row * row
        for c in range(m):
            f = f + sq[c].scale(b[c])
        g = Polynomial.constant(-1.0)
        for c in range(m):
            g = g + sq[c] * sq[c]
        gs.append(g)
    pop = POP(table=t, objective=f, ineqs=gs, eqs=[], cliques=cliques)
    return ProblemSpec(name=f"ex5.7(n={n},seed={seed})", pop=pop,
                       params={"n": n, "seed": seed})


def remark_negative_control() -> ProblemSpec:
    """Unconstrained 7-variable instance on which the unperturbed
    homogenized sparse hierarchy gives valid but non-converging bounds."""
    t = VariableTable()
    x1, x2, x3, x4, x5, x6, x7 = _vars(t, [f"x{i}" for i in range(1, 8)])
    one = Polynomial.constant(1.0)
    core = (x1.pow(4) * _sq(x2) + x2.pow(4) * _sq(x3) + _sq(x1) * x3.pow(4)
            - (_sq(x1) * _sq(x2) * _sq(x3)).scale(3.0))
    f1 = (_sq(x4) + _sq(x5) + one) * core + x3.pow(8)
    f2 = _sq(x5) * _sq(x6) * _sq(x7)
    p = POP(table=t, objective=f1 + f2, ineqs=[], eqs=[],
            cliques=[[0, 1, 2, 3, 4], [4, 5, 6]])
    return ProblemSpec(name="negative-control", pop=p, known_optimum=0.0)


# -- trajectory optimization ------------------------------------------

def block_moving(N: int, u_max: float) -> ProblemSpec:
    """Minimum-work block moving by trapezoidal collocation with slack
    splitting |u x2| = s1 + s2, s1 - s2 = u * x2, s >= 0."""
    if N < 2:
        raise ValueError("N must be at least 2")
    h = 1.0 / N
    t = VariableTable()
    u, x1, x2, s1, s2 = [], [], [], [], []
    for k in range(N + 1):
        u.append(Polynomial.variable(t.add(f"u{k}")))
        x1.append(Polynomial.variable(t.add(f"x{k}_1")))
        x2.append(Polynomial.variable(t.add(f"x{k}_2")))
        s1.append(Polynomial.variable(t.add(f"s{k}_1")))
        s2.append(Polynomial.variable(t.add(f"s{k}_2")))
    obj = Polynomial.zero()
    for k in range(N + 1):
        obj = obj + (s1[k] + s2[k]).scale(h)
    ineqs, eqs = [], []
    for k in range(N + 1):
        ineqs.append(s1[k])
        ineqs.append(s2[k])
        ineqs.append(Polynomial.constant(u_max ** 2) - _sq(u[k]))
        eqs.append(s1[k] - s2[k] - u[k] * x2[k])
    for k in range(N):
        eqs.append(x1[k + 1] - x1[k] - (x2[k] + x2[k + 1]).scale(h / 2.0))
        eqs.append(x2[k + 1] - x2[k] - (u[k] + u[k + 1]).scale(h / 2.0))
    eqs.append(x1[0])
    eqs.append(x2[0])
    eqs.append(x1[N] - Polynomial.constant(1.0))
    eqs.append(x2[N])
    cliques = [list(range(5 * (k - 1), 5 * (k + 1))) for k in range(1, N + 1)]
    pop = POP(table=t, objective=obj, ineqs=ineqs, eqs=eqs, cliques=cliques)
    return ProblemSpec(name=f"block-moving(N={N},u_max={u_max:g})", pop=pop,
                       params={"N": N, "u_max": u_max, "h": h})


def vanderpol(N: int, x_init: tuple[float, float], u_max: float,
              h: float = 0.1) -> ProblemSpec:
    """Van der Pol control by explicit-Euler multiple shooting with
    quadratic stage costs and a terminal cost ||x_N||^2 * h."""
    if N < 2:
        raise ValueError("N must be at least 2")
    t = VariableTable()
    x1, x2, u = [], [], []
    for k in range(N + 1):
        x1.append(Polynomial.variable(t.add(f"x{k}_1")))
        x2.append(Polynomial.variable(t.add(f"x{k}_2")))
        if k < N:
            u.append(Polynomial.variable(t.add(f"u{k}")))
    obj = Polynomial.zero()
    for k in range(N):
        obj = obj + (_sq(u[k]) + _sq(x1[k]) + _sq(x2[k])).scale(h)
    obj = obj + (_sq(x1[N]) + _sq(x2[N])).scale(h)
    ineqs, eqs = [], []
    for k in range(N):
        ineqs.append(Polynomial.constant(u_max ** 2) - _sq(u[k]))
        # x1' = (1 - x2^2) x1 - x2 + u,  x2' = x1
        f1 = (Polynomial.constant(1.0) - _sq(x2[k])) * x1[k] - x2[k] + u[k]
        eqs.append(x1[k + 1] - x1[k] - f1.scale(h))
        eqs.append(x2[k + 1] - x2[k] - x1[k].scale(h))
    eqs.append(x1[0] - Polynomial.constant(x_init[0]))
    eqs.append(x2[0] - Polynomial.constant(x_init[1]))
    cliques = [list(range(3 * (k - 1), 3 * (k - 1) + 5)) for k in range(1, N + 1)]
    pop = POP(table=t, objective=obj, ineqs=ineqs, eqs=eqs, cliques=cliques)
    return ProblemSpec(
        name=f"vanderpol(N={N})", pop=pop,
        params={"N": N, "x_init": list(x_init), "u_max": u_max, "h": h})


_BUILTINS = {
    "ex5.1": _ex51,
    "ex5.2": _ex52,
    "ex5.3": _ex53,
    "ex5.4": _ex54,
    "ex5.5": _ex55,
    "ex5.6": _ex56,
    "ex5.7": _ex57,
    "negative-control": remark_negative_control,
    "block-moving": block_moving,
    "vanderpol": vanderpol,
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def example(name: str, **params) -> ProblemSpec:
    """Builtin problem by name ('ex5.1' ... 'ex5.7', 'block-moving',
    'vanderpol', 'negative-control') with generator parameters."""
    key = name.lower()
    if key.startswith("5."):
        key = "ex" + key
    gen = _BUILTINS.get(key)
    if gen is None:
        raise KeyError(f"unknown builtin problem {name!r}; "
                       f"choices: {', '.join(builtin_names())}")
    if key == "vanderpol" and "x_init" in params and not isinstance(
            params["x_init"], tuple):
        params["x_init"] = tuple(params["x_init"])
    return gen(**params)


# -- local refinement and gap reporting --------------------------------

@dataclass
class RefineResult:
    point: dict[int, float]
    value: float
    feasibility: float
    success: bool
    message: str = ""


def _poly_partial(p: Polynomial, v: int) -> Polynomial:
    out: dict = {}
    for m, c in p.terms.items():
        for var, e in m:
            if var == v:
                rest = tuple((w, k) for w, k in m if w != v)
                if e > 1:
                    rest = mono_make(list(rest) + [(v, e - 1)])
                out[rest] = out.get(rest, 0.0) + c * e
                break
    return Polynomial(out)


class _Penalized:
    """Quadratic penalty merit function with analytic gradient."""

    def __init__(self, pop: POP, mu: float):
        self.pop = pop
        self.mu = mu
        n = len(pop.table)
        self.n = n
        self.grad_f = [_poly_partial(pop.objective, v) for v in range(n)]
        self.grad_g = [[_poly_partial(g, v) for v in range(n)] for g in pop.ineqs]
        self.grad_h = [[_poly_partial(h, v) for v in range(n)] for h in pop.eqs]

    def __call__(self, v: np.ndarray):
        pt = dict(enumerate(v))
        val = self.pop.objective.eval(pt)
        grad = np.array([g.eval(pt) for g in self.grad_f])
        for g, gg in zip(self.pop.ineqs, self.grad_g):
            gv = g.eval(pt)
            if gv < 0:
                val += self.mu * gv * gv
                grad += 2.0 * self.mu * gv * np.array([d.eval(pt) for d in gg])
        for h, gh in zip(self.pop.eqs, self.grad_h):
            hv = h.eval(pt)
            val += self.mu * hv * hv
            grad += 2.0 * self.mu * hv * np.array([d.eval(pt) for d in gh])
        return val, grad


def local_refine(pop: POP, guess: dict[int, float],
                 feas_tol: float = 1e-6) -> RefineResult:
    """Quadratic-penalty descent from a guess: the penalty weight is
    escalated until the iterate is feasible to feas_tol; divergence is
    reported, never silent."""
    v = np.array([guess[i] for i in range(len(pop.table))], dtype=float)
    message = ""
    for mu in [10.0 ** e for e in range(1, 10)]:
        merit = _Penalized(pop, mu)
        res = scipy.optimize.minimize(merit, v, jac=True, method="L-BFGS-B",
                                      options={"maxiter": 500})
        v = res.x
        pt = dict(enumerate(v))
        feas = pop.eval_feasibility(pt)
        message = str(res.message)
        if feas <= feas_tol:
            return RefineResult(point=pt, value=pop.objective.eval(pt),
                                feasibility=feas, success=True, message=message)
        if not np.all(np.isfinite(v)):
            return RefineResult(point=guess, value=float("nan"),
                                feasibility=float("inf"), success=False,
                                message="diverged: " + message)
    pt = dict(enumerate(v))
    return RefineResult(point=pt, value=pop.objective.eval(pt),
                        feasibility=pop.eval_feasibility(pt), success=False,
                        message="penalty escalation exhausted: " + message)


def suboptimality_gap(f_lower: float, f_upper: float) -> float:
    """|f_upper - f_lower| / (1 + |f_upper| + |f_lower|)."""
    return abs(f_upper - f_lower) / (1.0 + abs(f_upper) + abs(f_lower))


def suboptimality_gap_log10(f_lower: float, f_upper: float) -> float:
    eta = suboptimality_gap(f_lower, f_upper)
    return math.log10(eta) if eta > 0 else -float("inf")
