"""Command-line entry point: ``hetcache {coeffs,solve,sweep,validate}``.

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 a validation
check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import baselines
from .coefficients import (QuadSpec, compute_coefficients, fronthaul_coefficient,
                           mc_access_coefficient, mc_fronthaul_coefficient)
from .errors import ConsistencyError, HetcacheError, InvalidArgument, NumericError
from .model import DelayCoefficients, FileCatalog, builtin_scenario, load_scenario, validate_scenario
from .validate import run_suite

log = logging.getLogger("hetcache")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4
SWEEP_FORMAT = "# hetcache-sweep v1"
SWEEP_COLUMNS = ["param", "value", "algorithm", "delay", "hit_ratio", "sweeps"]
# boundary units of sweep values -> canonical units
SWEEP_UNITS = {"nu": 1.0, "W": 1e6, "D": 1.0, "C": 1e6}


class ValidationFailure(Exception):
    pass


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    algorithms: tuple = ("icp", "oceb", "ocfbob")

    def __post_init__(self):
        if self.param not in SWEEP_UNITS:
            raise InvalidArgument(f"unknown sweep parameter {self.param!r}; choose from {', '.join(SWEEP_UNITS)}")
        if not self.values:
            raise InvalidArgument("sweep needs at least one value")
        bad = [a for a in self.algorithms if a not in baselines.ALGORITHMS]
        if bad or not self.algorithms:
            raise InvalidArgument(f"unknown algorithm(s) {bad}")

    @classmethod
    def parse(cls, text, algorithms=None):
        """Parse ``param=v1,v2,...``."""
        name, sep, vals = text.partition("=")
        if not sep:
            raise InvalidArgument(f"--sweep expects param=v1,v2,..., got {text!r}")
        try:
            values = tuple(float(v) for v in vals.split(",") if v.strip())
        except ValueError as exc:
            raise InvalidArgument(f"bad sweep value list {vals!r}") from exc
        return cls(name.strip(), values, tuple(algorithms) if algorithms else cls.algorithms)


def apply_sweep_value(scn, param, value):
    """Scenario with one sweep parameter set (``value`` in boundary units)."""
    v = value * SWEEP_UNITS[param]
    if param == "nu":
        cat = scn.catalog
        return scn.replace(catalog=FileCatalog.zipf(cat.n_files, v, cat.lengths))
    if param == "W":
        return scn.replace(total_bandwidth=v)
    if param == "D":
        return scn.replace(buffer_delay_rate=v)
    return scn.replace(storage=np.full(scn.n_picos, v))


# --- I/O helpers ---------------------------------------------------------------

def _scenario(args):
    src = args.scenario
    if src is None or src.startswith("builtin:"):
        return builtin_scenario(src.split(":", 1)[1] if src else "scaled")
    return load_scenario(src)


def _coefficients(args, scn):
    if getattr(args, "coeffs", None):
        try:
            with open(args.coeffs) as fh:
                co = DelayCoefficients.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"{args.coeffs}: not valid JSON ({exc})") from exc
        if co.n_picos != scn.n_picos:
            raise InvalidArgument(f"{args.coeffs} has {co.n_picos} picos, scenario has {scn.n_picos}")
        return co
    return compute_coefficients(scn, _quad_spec(args))


def _quad_spec(args):
    tol = getattr(args, "quad_tol", None)
    return QuadSpec(rel_tol=tol) if tol else QuadSpec()


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text):
    """Write ``text`` to ``path`` (stdout for None or '-'); remove partial files on error."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    tmp = f"{path}.partial"
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _check_output(scn, report):
    bad = report.placement.capacity_violations(scn.catalog.lengths, scn.storage)
    if bad:
        raise ValidationFailure(f"{report.algorithm}: storage exceeded at pico(s) {bad}")
    if not all(r.ok for r in report.structure):
        raise ValidationFailure(f"{report.algorithm}: placement rows lack prefix structure")


# --- subcommands ---------------------------------------------------------------

def cmd_coeffs(args):
    scn = _scenario(args)
    co = compute_coefficients(scn, _quad_spec(args))
    rows, ok = [], True
    for m in range(scn.n_picos + 1):
        est = mc_access_coefficient(scn, m, args.samples, args.seed)
        gap = abs(co.a[m] - est.value) / est.value
        ok &= gap <= args.gap_bound
        rows.append({"coefficient": f"a_{m}", "quadrature": co.a[m], "monte_carlo": est.value,
                     "std_error": est.std_error, "rel_gap": gap})
    d = scn.fronthaul_distances
    for m in range(scn.n_picos):
        args_b = (scn.tx_powers[0], d[m], scn.pathloss_exponent, scn.noise_power)
        est = mc_fronthaul_coefficient(*args_b, samples=args.samples, seed=args.seed, index=m + 1)
        gap = abs(co.b[m] - est.value) / est.value
        ok &= gap <= args.gap_bound
        rows.append({"coefficient": f"b_{m + 1}", "closed_form": fronthaul_coefficient(*args_b),
                     "monte_carlo": est.value, "std_error": est.std_error, "rel_gap": gap})
    doc = co.to_dict()
    doc["meta"] = dict(doc["meta"], samples=args.samples, seed=args.seed)
    doc["monte_carlo"] = rows
    _write(args.out, _dumps(doc))
    if not ok:
        raise ValidationFailure(f"a Monte Carlo gap exceeds {args.gap_bound:g}")


def _solve_kwargs(args, algorithm):
    if algorithm != "icp":
        return {}
    return {"init": args.init, "k_max": args.kmax, "tol": args.tol, "restrict": not args.no_restrict}


def cmd_solve(args):
    scn = _scenario(args)
    co = _coefficients(args, scn)
    rep = baselines.solve(args.algo, scn, co, **_solve_kwargs(args, args.algo))
    _check_output(scn, rep)
    _write(args.out, _dumps(rep.to_dict()))
    if args.trace and rep.trace is not None:
        _write(args.trace, rep.trace.to_csv())


def _sweep_point(job):
    scn, co, param, value, algorithm, kwargs = job
    point = apply_sweep_value(scn, param, value)
    rep = baselines.solve(algorithm, point, co, **kwargs)
    _check_output(point, rep)
    sweeps = rep.trace.n_sweeps if rep.trace is not None else ""
    return (value, algorithm, rep.objective, rep.hit_ratio, sweeps)


def cmd_sweep(args):
    scn = _scenario(args)
    algos = args.algo.split(",") if args.algo else None
    spec = SweepSpec.parse(args.sweep, algos)
    # coefficients depend on geometry only, so one set serves every point
    co = _coefficients(args, scn)
    for v in spec.values:
        bad = validate_scenario(apply_sweep_value(scn, spec.param, v))
        if bad:
            raise InvalidArgument(f"{spec.param}={v:g}: " + "; ".join(str(b) for b in bad))
    jobs = [(scn, co, spec.param, v, a, _solve_kwargs(args, a)) for v in spec.values for a in spec.algorithms]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    buf.write(f"{SWEEP_FORMAT} param={spec.param} unit={_UNIT_LABEL[spec.param]}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SWEEP_COLUMNS)
    for value, algorithm, delay, hit, sweeps in results:
        wr.writerow([spec.param, repr(value), algorithm, repr(delay), repr(hit), sweeps])
    _write(args.out, buf.getvalue())


_UNIT_LABEL = {"nu": "1", "W": "MHz", "D": "s", "C": "Mbit"}


def cmd_validate(args):
    kwargs = {"seed": args.seed}
    if args.samples:
        kwargs["samples"] = args.samples
    checks = run_suite(args.suite, **kwargs)
    doc = {"suite": args.suite, "passed": all(c.passed for c in checks),
           "checks": [c.to_dict() for c in checks]}
    _write(args.out, _dumps(doc))
    if not doc["passed"]:
        raise ValidationFailure(f"{sum(not c.passed for c in checks)} check(s) failed")


# --- argument parsing ----------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="hetcache", description="Cache placement and bandwidth allocation in a two-tier cellular network.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, coeffs=True):
        sp.add_argument("--scenario", help="scenario JSON, or builtin:scaled / builtin:full (default builtin:scaled)")
        if coeffs:
            sp.add_argument("--coeffs", help="precomputed coefficient JSON (otherwise computed)")
        sp.add_argument("--quad-tol", type=float, help="relative tolerance of the coefficient quadrature")
        sp.add_argument("--out", help="output path (default stdout)")

    def icp_opts(sp):
        sp.add_argument("--kmax", type=int, default=50, help="maximum ICP sweeps")
        sp.add_argument("--tol", type=float, default=1e-9, help="relative improvement stopping tolerance")
        sp.add_argument("--init", choices=["zeros", "greedy"], default="zeros")
        sp.add_argument("--no-restrict", action="store_true",
                        help="enumerate every leading index instead of the restricted range")

    sp = sub.add_parser("coeffs", help="compute delay coefficients with a Monte Carlo cross-check")
    common(sp, coeffs=False)
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--gap-bound", type=float, default=0.02)
    sp.set_defaults(func=cmd_coeffs)

    sp = sub.add_parser("solve", help="run one algorithm and emit a JSON report")
    common(sp)
    sp.add_argument("--algo", choices=sorted(baselines.ALGORITHMS), default="icp")
    sp.add_argument("--trace", help="write the ICP objective trace as CSV")
    sp.add_argument("--seed", type=int, default=0, help="accepted for uniformity; solvers are deterministic")
    icp_opts(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="sweep nu, W (MHz), D (s) or C (Mbit) and emit CSV")
    common(sp)
    sp.add_argument("--sweep", required=True, metavar="PARAM=V1,V2,...")
    sp.add_argument("--algo", help="comma-separated subset of icp,oceb,ocfbob (default all)")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0, help="accepted for uniformity; solvers are deterministic")
    icp_opts(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="run oracle suites")
    sp.add_argument("suite", choices=["special-fn", "coefficients", "fixed-bw", "bandwidth", "icp", "all"])
    sp.add_argument("--samples", type=int, help="Monte Carlo samples for the coefficients suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValidationFailure as exc:
        log.error("validation failed: %s", exc)
        return EXIT_VALIDATION
    except (NumericError, ConsistencyError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (HetcacheError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
