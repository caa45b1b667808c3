"""Command-line front end.

Subcommands:

* ``solve``  -- run one problem through the full pipeline (sparsity ->
  reformulation -> relaxation -> SDP -> extraction -> certification) and
  emit a JSON report.
* ``bench``  -- run a benchmark suite and emit a CSV/JSON table with a
  diff against stored expected values.
* ``export`` -- assemble a relaxation without solving and write it in
  SDPA sparse format (.dat-s).

Problems come from a JSON file, ``--builtin NAME``, or ``--problem
"name:key=value,..."``.  Reports are deterministic for a fixed
configuration and backend, apart from wallclock fields.
"""

from __future__ import annotations

import concurrent.futures
import csv as _csv
import io
import json
import sys
import time

import click

from . import pipeline, problems, reform, relax, sdp, sdpa, sparsity
from .pop import POP

_STAGES = ("parse", "sparsity", "reform", "relax", "sdp", "extract")


class StageError(click.ClickException):
    def __init__(self, stage: str, err: Exception):
        super().__init__(f"[{stage}] {err}")


def _parse_param(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if "/" in text or ";" in text:
        sep = "/" if "/" in text else ";"
        return tuple(_parse_param(p) for p in text.split(sep))
    return text


def _parse_problem_desc(desc: str):
    """'name:key=value,key=value' -> (name, params).  Tuple-valued
    parameters use '/' separators, e.g. x_init=0.5/0.5."""
    name, _, rest = desc.partition(":")
    params = {}
    if rest:
        for part in rest.split(","):
            key, eq, val = part.partition("=")
            if not eq:
                raise click.BadParameter(
                    f"malformed parameter {part!r} (expected key=value)")
            params[key.strip()] = _parse_param(val.strip())
    return name.strip(), params


def _load_problem(problem_file, builtin, problem_desc, seed, cliques_path):
    """Resolve the problem source flags into (name, POP)."""
    sources = sum(x is not None for x in (problem_file, builtin, problem_desc))
    if sources != 1:
        raise click.UsageError(
            "give exactly one of PROBLEM_FILE, --builtin, or --problem")
    try:
        if problem_file is not None:
            pop = POP.load(problem_file)
            name = problem_file
        else:
            if builtin is not None:
                name, params = builtin, {}
            else:
                name, params = _parse_problem_desc(problem_desc)
            if seed is not None:
                params.setdefault("seed", seed)
            try:
                spec = problems.example(name, **params)
            except TypeError:
                # generator does not take a seed (or a given parameter)
                params.pop("seed", None)
                spec = problems.example(name, **params)
            pop = spec.pop
            name = spec.name
    except (OSError, ValueError, KeyError) as err:
        raise StageError("parse", err)
    if cliques_path is not None:
        try:
            with open(cliques_path) as fh:
                names = json.load(fh)
            name_to_id = {nm: i for i, nm in enumerate(pop.table.names)}
            pop.cliques = [[name_to_id[nm] for nm in cl] for cl in names]
        except (OSError, ValueError, KeyError) as err:
            raise StageError("parse", err)
    return name, pop


_COMMON = [
    click.option("--hierarchy", default="hssos3",
                 type=click.Choice(pipeline.HIERARCHIES),
                 help="Relaxation hierarchy."),
    click.option("--order", "-k", type=int, default=None,
                 help="Relaxation order (default: minimal admissible)."),
    click.option("--epsilon", type=float, default=0.0,
                 help="Objective perturbation (hssos1 only)."),
    click.option("--tol", type=float, default=1e-8, help="Solver tolerance."),
    click.option("--backend", default="auto",
                 type=click.Choice(["auto", "ipm", "clarabel", "scs"]),
                 help="SDP backend (HOMSOS_BACKEND env overrides)."),
    click.option("--cliques", "cliques_path", type=click.Path(exists=True),
                 default=None,
                 help="JSON file with explicit cliques (lists of names)."),
    click.option("--seed", type=int, default=None,
                 help="Seed for randomized builtin generators."),
    click.option("--builtin", default=None,
                 help="Builtin problem name (see `solve --list`)."),
    click.option("--problem", "problem_desc", default=None,
                 help="Builtin with parameters: 'name:key=value,...'."),
    click.option("--out", type=click.Path(), default=None,
                 help="Also write the report to this path."),
]


def _add_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
def main():
    """Sparse homogenized moment-SOS relaxations for polynomial
    optimization over possibly unbounded semialgebraic sets."""


@main.command()
@click.argument("problem_file", required=False, type=click.Path(exists=True))
@_add_options(_COMMON)
@click.option("--time-limit", type=float, default=None,
              help="Wallclock limit for the SDP solve (seconds).")
@click.option("--refine/--no-refine", default=False,
              help="Locally refine the extracted point and report the gap.")
@click.option("--list", "list_builtins", is_flag=True,
              help="List builtin problems and exit.")
@click.option("--verbose", is_flag=True)
def solve(problem_file, hierarchy, order, epsilon, tol, backend, cliques_path,
          seed, builtin, problem_desc, out, time_limit, refine,
          list_builtins, verbose):
    """Solve one problem and print a JSON report."""
    if list_builtins:
        click.echo("\n".join(problems.builtin_names()))
        return
    name, pop = _load_problem(problem_file, builtin, problem_desc, seed,
                              cliques_path)
    config = pipeline.RunConfig(
        hierarchy=hierarchy, order=order, epsilon=epsilon, tol=tol,
        backend=backend, time_limit=time_limit, do_refine=refine,
        verbose=verbose)
    report = _run_staged(pop, config, name)
    obj = report.to_json_obj()
    text = json.dumps(obj, indent=2, sort_keys=True)
    click.echo(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    if report.status_flag == "**":
        sys.exit(3)


def _run_staged(pop, config, name):
    try:
        config.validate()
    except ValueError as err:
        raise StageError("parse", err)
    try:
        return pipeline.run(pop, config, name)
    except ValueError as err:
        raise StageError("relax", err)
    except MemoryError as err:
        raise StageError("sdp", err)


# -- benchmark suites --------------------------------------------------

# row: (label, generator name, params, hierarchy, k, epsilon, expected,
# tolerance).  Expected values of None are smoke rows (no diff).
_SUITES = {
    "ex5": [
        ("ex5.1", "ex5.1", {}, "hssos1", 5, 0.0, 0.0, 1e-5),
        ("ex5.2", "ex5.2", {}, "ssos", 2, 0.0, 0.5497, 1e-3),
        ("ex5.2", "ex5.2", {}, "hssos1", 2, 0.0, 0.5497, 1e-3),
        ("ex5.2", "ex5.2", {}, "hssos2", 2, 0.0, 0.5497, 1e-3),
        ("ex5.2", "ex5.2", {}, "hssos3", 2, 0.0, 0.5497, 1e-3),
        ("ex5.2", "ex5.2", {}, "hssos1", 3, 0.0, 0.6927, 1e-3),
        ("ex5.2", "ex5.2", {}, "hssos2", 3, 0.0, 0.6927, 1e-3),
        ("ex5.2", "ex5.2", {}, "hssos3", 3, 0.0, 0.6927, 1e-3),
        ("ex5.4", "ex5.4", {}, "ssos", 2, 0.0, 2.0000, 1e-3),
        ("ex5.4", "ex5.4", {}, "hssos2", 4, 0.0, 6.8284, 1e-3),
        ("ex5.4", "ex5.4", {}, "hssos3", 4, 0.0, 6.8284, 1e-3),
        ("ex5.5", "ex5.5", {}, "hssos1", 4, 1e-4, 0.0, 5e-3),
        ("ex5.5", "ex5.5", {}, "hssos2", 5, 0.0, 0.0, 1e-4),
        ("ex5.5", "ex5.5", {}, "hssos3", 5, 0.0, 0.0, 1e-4),
        ("ex5.6(p=2)", "ex5.6", {"p": 2}, "hssos2", 4, 0.0, 6.1488, 1e-2),
        ("ex5.6(p=2)", "ex5.6", {"p": 2}, "hssos3", 4, 0.0, 6.1488, 1e-2),
        ("ex5.7(n=20)", "ex5.7", {"n": 20, "seed": 0}, "ssos", 4, 0.0,
         None, None),
        ("ex5.7(n=20)", "ex5.7", {"n": 20, "seed": 0}, "hssos3", 4, 0.0,
         None, None),
    ],
    "traj-bmw": [
        ("bmw(10,10)", "block-moving", {"N": 10, "u_max": 10.0}, "ssos", 2,
         0.0, 1.1164, 5e-2),
        ("bmw(10,10)", "block-moving", {"N": 10, "u_max": 10.0}, "hssos3", 2,
         0.0, 1.1111, 1e-2),
        ("bmw(10,20)", "block-moving", {"N": 10, "u_max": 20.0}, "hssos3", 2,
         0.0, 0.1741, 5e-2),
    ],
    "traj-vdp": [
        ("vdp(10)", "vanderpol",
         {"N": 10, "x_init": (0.5, 0.5), "u_max": 10.0}, "ssos", 2,
         0.0, None, None),
        ("vdp(10)", "vanderpol",
         {"N": 10, "x_init": (0.5, 0.5), "u_max": 10.0}, "hssos3", 2,
         0.0, None, None),
    ],
}


def _bench_row(args):
    (label, gen, params, hierarchy, k, eps, expected, tol_cell,
     backend, tol, refine) = args
    t0 = time.perf_counter()
    try:
        spec = problems.example(gen, **params)
        config = pipeline.RunConfig(hierarchy=hierarchy, order=k, epsilon=eps,
                                    tol=tol, backend=backend,
                                    do_refine=refine)
        report = pipeline.run(spec.pop, config, label)
        bound = report.bound
        status = report.status + report.status_flag
        certified = report.certified
        gap = report.gap_log10
    except Exception as err:  # noqa: BLE001 - suite continues per spec
        bound, status, certified, gap = None, f"error: {err}", False, None
    wall = time.perf_counter() - t0
    diff = None if (expected is None or bound is None) else bound - expected
    ok = None if diff is None else abs(diff) <= tol_cell
    return {
        "problem": label, "hierarchy": hierarchy, "k": k,
        "bound": bound, "time": round(wall, 2), "status": status,
        "certified": certified, "gap_log10": gap,
        "expected": expected, "diff": diff, "within_tol": ok,
    }


@main.command()
@click.argument("suite", type=click.Choice(sorted(_SUITES)))
@click.option("--backend", default="auto",
              type=click.Choice(["auto", "ipm", "clarabel", "scs"]))
@click.option("--tol", type=float, default=1e-8)
@click.option("--refine/--no-refine", default=False,
              help="Report the log10 gap vs a locally refined point.")
@click.option("--parallel", type=int, default=1,
              help="Run up to this many rows concurrently.")
@click.option("--out", type=click.Path(), default=None,
              help="Write OUT.csv and OUT.json.")
def bench(suite, backend, tol, refine, parallel, out):
    """Run a benchmark suite and diff against expected values."""
    rows_in = [(label, gen, params, hierarchy, k, eps, expected, tol_cell,
                backend, tol, refine)
               for (label, gen, params, hierarchy, k, eps, expected, tol_cell)
               in _SUITES[suite]]
    if parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(parallel) as pool:
            rows = list(pool.map(_bench_row, rows_in))
    else:
        rows = [_bench_row(r) for r in rows_in]

    fields = ["problem", "hierarchy", "k", "bound", "time", "status",
              "certified", "gap_log10", "expected", "diff", "within_tol"]
    buf = io.StringIO()
    writer = _csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    click.echo(buf.getvalue().rstrip("\n"))
    if out:
        with open(out + ".csv", "w") as fh:
            fh.write(buf.getvalue())
        with open(out + ".json", "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
    bad = [r for r in rows if r["within_tol"] is False
           or str(r["status"]).startswith("error")]
    if bad:
        click.echo(f"{len(bad)} row(s) outside tolerance or failed", err=True)
        sys.exit(1)


@main.command()
@click.argument("problem_file", required=False, type=click.Path(exists=True))
@_add_options(_COMMON)
def export(problem_file, hierarchy, order, epsilon, tol, backend,
           cliques_path, seed, builtin, problem_desc, out):
    """Assemble a relaxation (without solving) and write SDPA .dat-s
    to the path given by --out."""
    if not out:
        raise click.UsageError("export requires --out PATH")
    path = out
    name, pop = _load_problem(problem_file, builtin, problem_desc, seed,
                              cliques_path)
    try:
        hom = reform.build(pop, hierarchy, epsilon=epsilon)
        k = order if order is not None else hom.d_min()
        msdp = relax.assemble(hom, k)
        prob = sdp.from_moment(msdp)
    except ValueError as err:
        raise StageError("relax", err)
    try:
        sdpa.export_sdpa(prob, path)
    except OSError as err:
        raise StageError("export", err)
    stats = {
        "problem": name, "hierarchy": hierarchy, "order": k,
        "num_y": prob.num_vars, "num_eq_rows": prob.num_eq,
        "psd_block_sides": [b.side for b in prob.blocks],
        "path": path,
    }
    click.echo(json.dumps(stats, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
