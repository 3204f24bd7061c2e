"""Oracle suites behind ``hetcache validate``.

Each suite returns a list of :class:`Check` records. A check holds a name, a
measured value, the bound it was held to, and whether it passed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special as sps

from .baselines import solve_icp, solve_oceb, solve_ocfbob
from .coefficients import (compute_coefficients, fronthaul_coefficient, mc_access_coefficient,
                           mc_fronthaul_coefficient)
from .errors import InvalidArgument
from .fixed_bw import solve_all_fixed_bw
from .instances import random_instance
from .joint import optimal_bandwidth
from .model import BandwidthAllocation, CachePlacement, builtin_scenario
from .oracles import grid_search_oracle, kkt_residual_bandwidth
from .special import exp_integral_E1, exp_integral_Ei, truncated_poisson_inverse_mean

__all__ = ["Check", "SUITES", "run_suite", "kappa_series"]


@dataclass
class Check:
    suite: str
    name: str
    value: float
    bound: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def _rel(x, ref):
    return abs(x - ref) / abs(ref)


def kappa_series(mean, terms=None):
    """``E[1/U]`` for a zero-truncated Poisson count by direct summation of its pmf."""
    n = terms or int(mean + 40 * math.sqrt(mean) + 60)
    k = np.arange(1, n + 1)
    logp = k * math.log(mean) - mean - sps.gammaln(k + 1) - math.log(-math.expm1(-mean))
    return float(np.sum(np.exp(logp) / k))


def suite_special_fn(**_):
    out = []
    for x in (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0):
        out.append(Check("special-fn", f"E1({x:g})", _rel(exp_integral_E1(x), sps.exp1(x)), 1e-9, False))
        out.append(Check("special-fn", f"Ei({x:g})", _rel(exp_integral_Ei(x), sps.expi(x)), 1e-9, False))
    for mu in (0.01, 0.5, 1.0, 5.0, 20.0, 100.0, 1000.0):
        out.append(Check("special-fn", f"kappa({mu:g})",
                         abs(truncated_poisson_inverse_mean(mu) - kappa_series(mu)), 1e-9, False))
    return out


def suite_coefficients(samples=1_000_000, seed=0, scenario=None, coeffs=None, **_):
    scn = scenario if scenario is not None else builtin_scenario("scaled")
    co = coeffs if coeffs is not None else compute_coefficients(scn)
    out = []
    for m in range(scn.n_picos + 1):
        est = mc_access_coefficient(scn, m, samples, seed)
        bound = max(0.02, 3 * est.std_error / co.a[m])
        out.append(Check("coefficients", f"a_{m}", _rel(co.a[m], est.value), bound, False))
    d = scn.fronthaul_distances
    for m in range(scn.n_picos):
        args = (scn.tx_powers[0], d[m], scn.pathloss_exponent, scn.noise_power)
        est = mc_fronthaul_coefficient(*args, samples=samples, seed=seed, index=m + 1)
        out.append(Check("coefficients", f"b_{m + 1}", _rel(fronthaul_coefficient(*args), est.value),
                         0.01, False))
    return out


def suite_fixed_bw(instances=10, step=1e-3, **_):
    out = []
    for seed in range(instances):
        n_files = 3 + seed % 2
        scn, co = random_instance(seed, 1, n_files)
        alloc = BandwidthAllocation.equal(scn.total_bandwidth, 1)
        p = solve_all_fixed_bw(scn, co, alloc)
        rep = grid_search_oracle(scn, co, "fixed-bw", alloc, step, p, instance=f"seed={seed}")
        out.append(Check("fixed-bw", f"grid gap seed={seed} F={n_files}", rep.gap, 1e-3, False))
        out.append(Check("fixed-bw", f"structure seed={seed}", float(not all(r.ok for r in rep.structure)),
                         0.0, False))
    return out


def random_placement(rng, scn):
    """Feasible placement with random fractions (scaled down to fit storage)."""
    s = rng.uniform(0, 1, (scn.n_picos, scn.n_files)) * (rng.uniform(size=(scn.n_picos, 1)) < 0.9)
    used = s @ scn.catalog.lengths
    scale = np.minimum(1.0, 0.999 * scn.storage / np.maximum(used, 1e-300))
    return CachePlacement(s * scale[:, None])


def suite_bandwidth(instances=100, seed=0, **_):
    rng = np.random.default_rng(seed)
    worst, sum_err = 0.0, 0.0
    for i in range(instances):
        scn, co = random_instance(i, 1 + i % 3, 2 + i % 5)
        p = random_placement(rng, scn)
        alloc = optimal_bandwidth(co, scn.catalog, p, scn.total_bandwidth)
        worst = max(worst, kkt_residual_bandwidth(co, scn.catalog, p, alloc))
        sum_err = max(sum_err, abs(alloc.total - scn.total_bandwidth) / scn.total_bandwidth)
    scn, co = random_instance(0, 3, 5)
    p = random_placement(rng, scn)
    eq = kkt_residual_bandwidth(co, scn.catalog, p, BandwidthAllocation.equal(scn.total_bandwidth, 3))
    return [
        Check("bandwidth", "max KKT residual", worst, 1e-8, False),
        Check("bandwidth", "max |sum w - W| / W", sum_err, 1e-15, False),
        # negative control: the equal split must fail the same bound
        Check("bandwidth", "equal split residual exceeds 1e-3", float(eq <= 1e-3), 0.0, False),
    ]


def suite_icp(scenario=None, coeffs=None, **_):
    scn = scenario if scenario is not None else builtin_scenario("scaled")
    co = coeffs if coeffs is not None else compute_coefficients(scn)
    icp = solve_icp(scn, co)
    obj = icp.trace.objectives
    rises = np.diff(obj) / np.abs(obj[:-1])
    oceb, ocfbob = solve_oceb(scn, co), solve_ocfbob(scn, co)
    return [
        Check("icp", "max relative rise in trace", float(max(rises.max(initial=-np.inf), 0.0)), 1e-12, False),
        Check("icp", "sweeps", float(icp.trace.n_sweeps), 10.0, False),
        Check("icp", "converged", float(icp.trace.status != "converged"), 0.0, False),
        Check("icp", "structure", float(not all(r.ok for r in icp.structure)), 0.0, False),
        Check("icp", "(icp - oceb) / oceb", (icp.objective - oceb.objective) / oceb.objective, 1e-9, False),
        Check("icp", "(icp - ocfbob) / ocfbob", (icp.objective - ocfbob.objective) / ocfbob.objective,
              1e-9, False),
    ]


SUITES = {
    "special-fn": suite_special_fn,
    "coefficients": suite_coefficients,
    "fixed-bw": suite_fixed_bw,
    "bandwidth": suite_bandwidth,
    "icp": suite_icp,
}


def run_suite(name, **kwargs):
    """Run one suite (or ``"all"``) and mark each check passed or failed."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise InvalidArgument(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    checks = []
    for n in names:
        for c in SUITES[n](**kwargs):
            c.passed = bool(c.value <= c.bound)
            checks.append(c)
    return checks
