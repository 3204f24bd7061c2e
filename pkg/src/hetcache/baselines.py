"""ICP and the two reference algorithms behind one report type.

OCEB
    Equal bandwidth for every BS, optimal placement for that split.
OCFBOB
    Half of each pico's storage reserved for buffering. The other half is
    filled greedily by popularity, then bandwidth is optimised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .delay import DelayBreakdown, average_delay, delay_terms, hit_ratio
from .fixed_bw import solve_all_fixed_bw
from .joint import IcpTrace, greedy_half_fill, icp, optimal_bandwidth
from .model import (BandwidthAllocation, CachePlacement, DelayCoefficients, NetworkScenario,
                    require_valid)
from .oracles import structure_check

__all__ = ["SolveReport", "solve_icp", "solve_oceb", "solve_ocfbob", "solve", "ALGORITHMS"]


@dataclass
class SolveReport:
    algorithm: str
    placement: CachePlacement
    allocation: BandwidthAllocation
    objective: float
    hit_ratio: float
    breakdown: DelayBreakdown
    structure: list
    trace: Optional[IcpTrace] = None

    def to_dict(self):
        d = {
            "algorithm": self.algorithm,
            "objective": self.objective,
            "hit_ratio": self.hit_ratio,
            "allocation": self.allocation.w.tolist(),
            "placement": self.placement.s.tolist(),
            "delay": self.breakdown.to_dict(),
            "structure": [{"monotone": r.monotone, "single_fractional": r.single_fractional}
                          for r in self.structure],
        }
        if self.trace is not None:
            d["trace"] = self.trace.to_dict()
        return d


def _report(name, scn, coeffs, placement, alloc, trace=None):
    br = delay_terms(scn, coeffs, placement, alloc)
    return SolveReport(name, placement, alloc, br.total, hit_ratio(scn.catalog, placement),
                       br, structure_check(placement), trace)


def solve_oceb(scn: NetworkScenario, coeffs: DelayCoefficients) -> SolveReport:
    require_valid(scn)
    alloc = BandwidthAllocation.equal(scn.total_bandwidth, scn.n_picos)
    placement = solve_all_fixed_bw(scn, coeffs, alloc)
    return _report("oceb", scn, coeffs, placement, alloc)


def solve_ocfbob(scn: NetworkScenario, coeffs: DelayCoefficients, max_rounds=10) -> SolveReport:
    """Greedy half-storage cache, then optimal bandwidth.

    The greedy fill does not depend on bandwidth, so the alternation settles
    after one round; it is still iterated until the objective moves by less
    than 1e-9 relative.
    """
    require_valid(scn)
    rows = [greedy_half_fill(scn.catalog, c / 2) for c in scn.storage]
    placement = CachePlacement(np.array(rows).reshape(scn.n_picos, scn.n_files))
    prev = None
    for _ in range(max_rounds):
        alloc = optimal_bandwidth(coeffs, scn.catalog, placement, scn.total_bandwidth)
        obj = average_delay(scn, coeffs, placement, alloc)
        if prev is not None and abs(prev - obj) < 1e-9 * abs(prev):
            break
        prev = obj
    return _report("ocfbob", scn, coeffs, placement, alloc)


def solve_icp(scn: NetworkScenario, coeffs: DelayCoefficients, init="zeros", k_max=50,
              tol=1e-9, restrict=True) -> SolveReport:
    """Run ICP from ``init`` ("zeros", "greedy" or a CachePlacement)."""
    require_valid(scn)
    if isinstance(init, str):
        if init == "zeros":
            init = CachePlacement.zeros(scn.n_picos, scn.n_files)
        elif init == "greedy":
            rows = [greedy_half_fill(scn.catalog, c / 2) for c in scn.storage]
            init = CachePlacement(np.array(rows).reshape(scn.n_picos, scn.n_files))
        else:
            raise InvalidArgument(f"unknown init {init!r}")
    placement, alloc, trace = icp(scn, coeffs, init, k_max=k_max, tol=tol, restrict=restrict)
    return _report("icp", scn, coeffs, placement, alloc, trace)


ALGORITHMS = {"icp": solve_icp, "oceb": solve_oceb, "ocfbob": solve_ocfbob}


def solve(algorithm, scn, coeffs, **kwargs) -> SolveReport:
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise InvalidArgument(f"unknown algorithm {algorithm!r}") from None
    return fn(scn, coeffs, **kwargs)
