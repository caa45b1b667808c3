"""Polynomial optimization problem container and its JSON file format.

The JSON form is::

    {
      "variables": ["x1", "x2"],
      "objective": "x1^2 + 3*x2^2",
      "constraints": [{"poly": "x1 - 1", "sense": ">=0"},
                      {"poly": "x1*x2 - 1", "sense": "==0"}],
      "cliques": [["x1", "x2"]]          // optional
    }

Polynomials may be given either as grammar strings or as the term-list
form produced by Polynomial.to_json_obj.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .poly import Polynomial, VariableTable, parse_poly


@dataclass
class POP:
    """minimize objective over { x : ineqs >= 0, eqs == 0 }."""

    table: VariableTable
    objective: Polynomial
    ineqs: list[Polynomial] = field(default_factory=list)
    eqs: list[Polynomial] = field(default_factory=list)
    cliques: list[list[int]] | None = None  # optional user-declared csp

    @property
    def n(self) -> int:
        return len(self.table)

    def all_vars(self) -> set[int]:
        vs = set(self.objective.varset)
        for g in self.ineqs + self.eqs:
            vs |= g.varset
        return vs

    def eval_feasibility(self, point: dict[int, float]) -> float:
        """Max constraint violation at a point (0 when feasible)."""
        viol = 0.0
        for g in self.ineqs:
            viol = max(viol, -g.eval(point))
        for h in self.eqs:
            viol = max(viol, abs(h.eval(point)))
        return viol

    # -- JSON ---------------------------------------------------------

    def to_json_obj(self) -> dict:
        obj = {
            "variables": list(self.table.names),
            "objective": self.objective.to_json_obj(self.table),
            "constraints": (
                [{"poly": g.to_json_obj(self.table), "sense": ">=0"} for g in self.ineqs]
                + [{"poly": h.to_json_obj(self.table), "sense": "==0"} for h in self.eqs]
            ),
        }
        if self.cliques is not None:
            obj["cliques"] = [[self.table.names[v] for v in cl] for cl in self.cliques]
        return obj

    @staticmethod
    def from_json_obj(obj: dict) -> "POP":
        table = VariableTable(obj["variables"])

        def read_poly(spec) -> Polynomial:
            if isinstance(spec, str):
                return parse_poly(spec, table)
            return Polynomial.from_json_obj(spec, table)

        ineqs, eqs = [], []
        for con in obj.get("constraints", []):
            sense = con.get("sense", ">=0")
            p = read_poly(con["poly"])
            if sense == ">=0":
                ineqs.append(p)
            elif sense == "==0":
                eqs.append(p)
            elif sense == "<=0":
                ineqs.append(p.scale(-1.0))
            else:
                raise ValueError(f"unknown constraint sense {sense!r}")
        cliques = None
        if "cliques" in obj and obj["cliques"] is not None:
            cliques = [[table.id_of(n) for n in cl] for cl in obj["cliques"]]
        return POP(table, read_poly(obj["objective"]), ineqs, eqs, cliques)

    def dump(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, indent=1)

    @staticmethod
    def load(path: str) -> "POP":
        with open(path) as fh:
            return POP.from_json_obj(json.load(fh))
