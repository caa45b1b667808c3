"""End-to-end solve pipeline shared by the CLI and the test suite.

One call runs: sparsity analysis -> hierarchy reformulation -> moment
relaxation assembly -> sign-symmetry reduction -> SDP solve -> flat
truncation / minimizer extraction -> certificate verification ->
optional local refinement of the extracted point.  The result is a
SolveReport that serializes to a stable JSON object (byte-identical
across runs with the same configuration, apart from wallclock fields).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import extract, reform, relax, sdp, symred
from .pop import POP
from .problems import local_refine, suboptimality_gap_log10

HIERARCHIES = ("ssos", "hsos", "hssos1", "hssos2", "hssos3")


@dataclass
class RunConfig:
    hierarchy: str = "hssos3"
    order: int | None = None           # None: minimal admissible order
    epsilon: float = 0.0               # hssos1 objective perturbation
    tol: float = 1e-8
    backend: str = "auto"
    time_limit: float | None = None
    use_symmetry: bool = True
    do_extract: bool = True
    do_certify: bool = True
    do_refine: bool = False
    rank_tol: float = extract.DEFAULT_RANK_TOL
    x0_tol: float = extract.DEFAULT_X0_TOL
    cert_tol: float = extract.DEFAULT_CERT_TOL
    verbose: bool = False

    def validate(self) -> None:
        if self.hierarchy not in HIERARCHIES:
            raise ValueError(
                f"unknown hierarchy {self.hierarchy!r}; choose from {HIERARCHIES}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


@dataclass
class SolveReport:
    problem: str
    hierarchy: str
    order: int
    epsilon: float
    bound: float | None
    status: str
    status_flag: str                   # "" certified-grade, "*" unknown, "**" infeasible
    backend: str
    iterations: int
    pobj: float | None
    dobj: float | None
    num_y: int
    num_y_reduced: int
    num_eq_rows: int
    block_sides: list[int]
    flat: extract.FlatReport | None = None
    points: list[extract.ExtractedPoint] = field(default_factory=list)
    certificate: dict | None = None
    refined_value: float | None = None
    gap_log10: float | None = None
    times: dict = field(default_factory=dict)
    raw_status: str = ""
    hom: object = None                 # reformulated problem (not serialized)

    @property
    def certified(self) -> bool:
        """Global optimality certified: trusted solve, flat truncation
        holds, and an extracted point matches the bound."""
        if self.status_flag or not self.points or self.flat is None:
            return False
        if not self.flat.flat:
            return False
        best = min(p.objective for p in self.points if not p.at_infinity)
        return abs(best - self.bound) <= 1e-4 * (1.0 + abs(self.bound))

    def to_json_obj(self, hom=None) -> dict:
        if hom is None:
            hom = self.hom
        obj = {
            "problem": self.problem,
            "hierarchy": self.hierarchy,
            "order": self.order,
            "epsilon": self.epsilon,
            "bound": self.bound,
            "status": self.status,
            "status_flag": self.status_flag,
            "certified": self.certified,
            "backend": self.backend,
            "iterations": self.iterations,
            "pobj": self.pobj,
            "dobj": self.dobj,
            "num_y": self.num_y,
            "num_y_reduced": self.num_y_reduced,
            "num_eq_rows": self.num_eq_rows,
            "block_sides": self.block_sides,
            "flat": self.flat.to_json_obj() if self.flat is not None else None,
            "points": [p.to_json_obj(hom) for p in self.points],
            "certificate": self.certificate,
            "refined_value": self.refined_value,
            "gap_log10": self.gap_log10,
            "raw_status": self.raw_status,
            "times": self.times,
        }
        return obj


def run(pop: POP, config: RunConfig | None = None,
        name: str = "problem") -> SolveReport:
    """Solve one problem with one hierarchy/order configuration."""
    config = config or RunConfig()
    config.validate()
    times: dict[str, float] = {}

    t0 = time.perf_counter()
    hom = reform.build(pop, config.hierarchy, epsilon=config.epsilon)
    k = config.order if config.order is not None else hom.d_min()
    msdp = relax.assemble(hom, k)
    times["assemble"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    red = symred.reduce(msdp) if config.use_symmetry else None
    container = red if red is not None else msdp
    prob = sdp.from_moment(container)
    times["reduce"] = time.perf_counter() - t0

    opts = sdp.SolveOptions(tol=config.tol, backend=config.backend,
                            verbose=config.verbose,
                            time_limit=config.time_limit)
    sol = sdp.solve(prob, opts)
    times["solve"] = sol.solve_time

    flag = ""
    if sol.status == "Infeasible":
        flag = "**"
    elif sol.status != "Optimal":
        flag = "*"

    report = SolveReport(
        problem=name, hierarchy=config.hierarchy, order=k,
        epsilon=config.epsilon if config.hierarchy == "hssos1" else 0.0,
        bound=None if sol.status == "Infeasible" else sol.pobj,
        status=sol.status, status_flag=flag, backend=sol.backend,
        iterations=sol.iterations, pobj=sol.pobj, dobj=sol.dobj,
        num_y=msdp.num_y, num_y_reduced=prob.num_vars,
        num_eq_rows=prob.num_eq - 1,
        block_sides=[b.side for b in prob.blocks],
        raw_status=sol.raw_status, times=times, hom=hom,
    )

    if sol.status == "Infeasible":
        return report

    full_sol = red.expand_solution(sol) if red is not None else sol

    if config.do_certify:
        t0 = time.perf_counter()
        try:
            report.certificate = extract.verify_certificate(
                container, sol, config.cert_tol)
        except ValueError:
            report.certificate = None
        times["certify"] = time.perf_counter() - t0

    if config.do_extract:
        t0 = time.perf_counter()
        report.flat, report.points = extract.extract_minimizers(
            msdp, full_sol.y, config.rank_tol, config.x0_tol)
        times["extract"] = time.perf_counter() - t0

    if config.do_refine:
        t0 = time.perf_counter()
        finite = [p for p in report.points if not p.at_infinity]
        if finite:
            guess = min(finite, key=lambda p: p.objective).x
        else:
            guess = {v: 0.0 for v in range(len(pop.table))}
        res = local_refine(pop, guess)
        if res.success:
            report.refined_value = res.value
            report.gap_log10 = suboptimality_gap_log10(
                report.bound, res.value)
        times["refine"] = time.perf_counter() - t0

    return report
