"""Sparse multivariate polynomials with float coefficients.

A monomial is a sorted tuple of (variable-id, exponent) pairs with all
exponents positive; the empty tuple is the constant monomial 1.  A
polynomial maps monomials to nonzero coefficients.  Coefficients whose
magnitude drops below COEF_DROP_TOL after arithmetic are removed, so two
polynomials compare equal iff their term dicts compare equal.

Polynomials are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
import math
import re
from typing import Iterable, Mapping, Sequence

Monomial = tuple  # tuple[tuple[int, int], ...], sorted by variable id

# Coefficients below this magnitude are dropped after arithmetic.
COEF_DROP_TOL = 1e-14

CONST_MONO: Monomial = ()


def mono_make(pairs: Iterable[tuple[int, int]]) -> Monomial:
    """Build a canonical monomial from (var, exp) pairs, merging duplicates."""
    acc: dict[int, int] = {}
    for v, e in pairs:
        if e < 0:
            raise ValueError(f"negative exponent {e} for variable {v}")
        if e:
            acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items()))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for v, e in b:
        acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items()))


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def mono_vars(m: Monomial) -> frozenset:
    return frozenset(v for v, _ in m)


def mono_eval(m: Monomial, point: Mapping[int, float]) -> float:
    out = 1.0
    for v, e in m:
        out *= point[v] ** e
    return out


class Polynomial:
    """Immutable sparse polynomial: dict from Monomial to float coefficient."""

    __slots__ = ("terms", "_varset", "_degree")

    def __init__(self, terms: Mapping[Monomial, float] | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                if abs(c) > COEF_DROP_TOL:
                    clean[m] = float(c)
        self.terms: dict[Monomial, float] = clean
        self._varset: frozenset | None = None
        self._degree: int | None = None

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    @staticmethod
    def constant(c: float) -> "Polynomial":
        return Polynomial({CONST_MONO: c})

    @staticmethod
    def variable(v: int) -> "Polynomial":
        return Polynomial({((v, 1),): 1.0})

    @staticmethod
    def monomial(m: Monomial, c: float = 1.0) -> "Polynomial":
        return Polynomial({m: c})

    # -- basic queries ------------------------------------------------

    @property
    def varset(self) -> frozenset:
        if self._varset is None:
            vs: set = set()
            for m in self.terms:
                for v, _ in m:
                    vs.add(v)
            self._varset = frozenset(vs)
        return self._varset

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0."""
        if self._degree is None:
            self._degree = max((mono_degree(m) for m in self.terms), default=0)
        return self._degree

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        degs = {mono_degree(m) for m in self.terms}
        return len(degs) <= 1

    def coefficient(self, m: Monomial) -> float:
        return self.terms.get(m, 0.0)

    def max_abs_coef(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, 0.0) + c
        return Polynomial(acc)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, 0.0) - c
        return Polynomial(acc)

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.terms.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        acc: dict[Monomial, float] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = mono_mul(ma, mb)
                acc[m] = acc.get(m, 0.0) + ca * cb
        return Polynomial(acc)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial({m: c * v for m, v in self.terms.items()})

    def pow(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- evaluation ---------------------------------------------------

    def eval(self, point: Mapping[int, float]) -> float:
        """Evaluate at a point given as var-id -> value; every variable of
        the polynomial must be assigned."""
        missing = self.varset - set(point)
        if missing:
            raise KeyError(f"missing assignment for variables {sorted(missing)}")
        return sum(c * mono_eval(m, point) for m, c in self.terms.items())

    def subs(self, assignments: Mapping[int, float]) -> "Polynomial":
        """Substitute numeric values for a subset of the variables."""
        acc: dict[Monomial, float] = {}
        for m, c in self.terms.items():
            kept = []
            val = c
            for v, e in m:
                if v in assignments:
                    val *= assignments[v] ** e
                else:
                    kept.append((v, e))
            key = tuple(kept)
            acc[key] = acc.get(key, 0.0) + val
        return Polynomial(acc)

    # -- homogenization operators ------------------------------------

    def homogenize(self, x0: int) -> "Polynomial":
        """Return x0^deg(p) * p(x/x0), homogeneous of degree deg(p)."""
        if x0 in self.varset:
            raise ValueError(f"homogenization variable {x0} already occurs")
        d = self.degree()
        acc: dict[Monomial, float] = {}
        for m, c in self.terms.items():
            gap = d - mono_degree(m)
            acc[mono_make(list(m) + [(x0, gap)])] = c
        return Polynomial(acc)

    def top_form(self) -> "Polynomial":
        """Highest-degree part: the terms of degree exactly deg(p)."""
        d = self.degree()
        return Polynomial({m: c for m, c in self.terms.items() if mono_degree(m) == d})

    # -- serialization ------------------------------------------------

    def to_json_obj(self, table: "VariableTable") -> list:
        out = []
        for m in sorted(self.terms):
            out.append({
                "coef": self.terms[m],
                "exps": {table.names[v]: e for v, e in m},
            })
        return out

    @staticmethod
    def from_json_obj(obj: Sequence[Mapping], table: "VariableTable") -> "Polynomial":
        acc: dict[Monomial, float] = {}
        for term in obj:
            m = mono_make((table.id_of(name), e) for name, e in term["exps"].items())
            acc[m] = acc.get(m, 0.0) + float(term["coef"])
        return Polynomial(acc)

    def to_string(self, table: "VariableTable") -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: (mono_degree(m), m)):
            c = self.terms[m]
            factors = []
            if m == CONST_MONO or abs(abs(c) - 1.0) > 0:
                factors.append(repr(abs(c)))
            for v, e in m:
                factors.append(table.names[v] if e == 1 else f"{table.names[v]}^{e}")
            term = "*".join(factors)
            if not parts:
                parts.append(term if c >= 0 else "-" + term)
            else:
                parts.append(("+ " if c >= 0 else "- ") + term)
        return " ".join(parts)

    def __repr__(self):
        return f"Polynomial({len(self.terms)} terms, deg {self.degree()})"


class VariableTable:
    """Ordered register of variable names.

    User variables come first; the homogenization variable and per-clique
    auxiliary variables are appended later with reserved names, which are
    guaranteed unique against user names.
    """

    def __init__(self, names: Iterable[str] = ()):
        self.names: list[str] = []
        self._ids: dict[str, int] = {}
        for n in names:
            self.add(n)

    def add(self, name: str) -> int:
        if name in self._ids:
            raise ValueError(f"duplicate variable name {name!r}")
        if not re.fullmatch(r"[A-Za-z_@][A-Za-z0-9_\[\],]*", name):
            raise ValueError(f"invalid variable name {name!r}")
        vid = len(self.names)
        self.names.append(name)
        self._ids[name] = vid
        return vid

    def add_reserved(self, base: str) -> int:
        """Add a fresh reserved variable (e.g. the homogenization variable);
        the name never collides with existing names."""
        name = base
        while name in self._ids:
            name += "_"
        return self.add(name)

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise KeyError(f"unknown variable name {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self.names)

    def copy(self) -> "VariableTable":
        t = VariableTable()
        t.names = list(self.names)
        t._ids = dict(self._ids)
        return t


class ParseError(ValueError):
    """Syntax error in the polynomial grammar, with a byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_\[\],]*)"
    r"|(?P<op>[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", len(text) - len(rest))
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def parse_poly(text: str, table: VariableTable) -> Polynomial:
    """Parse the term grammar: signed products of numbers and var^exp.

    Implicit coefficient 1 and implicit exponent 1 are allowed, e.g.
    "x1^2*x2 - 3".  Unknown variable names raise KeyError.
    """
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos]

    acc = Polynomial.zero()
    first = True
    while peek()[0] != "end":
        sign = 1.0
        kind, val, off = peek()
        if kind == "op" and val in "+-":
            if val == "-":
                sign = -1.0
            pos += 1
        elif not first:
            raise ParseError("expected '+' or '-' between terms", off)
        first = False
        # one product term: factors joined by '*'
        coef = sign
        pairs: list[tuple[int, int]] = []
        saw_factor = False
        while True:
            kind, val, off = peek()
            if kind == "num":
                coef *= float(val)
                pos += 1
            elif kind == "name":
                if val not in table:
                    raise KeyError(f"unknown variable name {val!r}")
                vid = table.id_of(val)
                pos += 1
                exp = 1
                kind2, val2, off2 = peek()
                if kind2 == "op" and val2 == "^":
                    pos += 1
                    kind3, val3, off3 = peek()
                    if kind3 != "num" or "." in val3 or "e" in val3.lower():
                        raise ParseError("expected integer exponent after '^'", off3)
                    exp = int(val3)
                    pos += 1
                pairs.append((vid, exp))
            else:
                raise ParseError("expected a number or variable", off)
            saw_factor = True
            kind, val, off = peek()
            if kind == "op" and val == "*":
                pos += 1
                continue
            break
        if not saw_factor:
            raise ParseError("empty term", peek()[2])
        acc = acc + Polynomial.monomial(mono_make(pairs), coef)
    return acc


def monomial_basis(var_ids: Sequence[int], k: int) -> list[Monomial]:
    """All monomials of degree <= k in the given ordered variables, in
    graded lexicographic order.  Length is C(len(vars)+k, k)."""
    if k < 0:
        raise ValueError("negative degree bound")
    vids = list(var_ids)
    n = len(vids)
    out: list[Monomial] = []
    for d in range(k + 1):
        if n == 0:
            if d == 0:
                out.append(CONST_MONO)
            continue
        for exps in _compositions_desc(n, d):
            out.append(tuple((vids[i], e) for i, e in enumerate(exps) if e))
    return out


def _compositions_desc(n: int, d: int):
    """Exponent vectors of total degree d over n slots, lexicographically
    descending in the leading slots (grlex order within a degree)."""
    if n == 1:
        yield (d,)
        return
    for e in range(d, -1, -1):
        for rest in _compositions_desc(n - 1, d - e):
            yield (e,) + rest


def n_monomials(nvars: int, k: int) -> int:
    return math.comb(nvars + k, k)
