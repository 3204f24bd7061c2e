"""Independent checks: exhaustive grid search, bandwidth KKT residuals, row structure.

The grid oracle scans every point of ``{0, step, ..., 1}^(M x F)``. It does
not assume prefix structure. Both objectives increase with the cached volume
``V_m`` of a row and decrease with its weighted cached volume ``S_m``, so any
grid point whose ``(V, S)`` is dominated by another point's cannot be the
unique minimiser. The scan keeps only non-dominated partial rows. It builds
them from two half-rows, so the work is about ``levels^(F/2)`` rather than
``levels^F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .delay import _ratio, access_weight, delay_terms, reduced_objective
from .errors import BudgetExceeded, InvalidArgument
from .model import (CAPACITY_RTOL, BandwidthAllocation, CachePlacement, DelayCoefficients,
                    FileCatalog, NetworkScenario)

__all__ = [
    "RowStructure",
    "structure_check",
    "kkt_residual_bandwidth",
    "OracleReport",
    "grid_search_oracle",
    "MAX_HALF_GRID",
]

FRACTIONAL_TOL = 1e-9
MAX_HALF_GRID = 20_000_000
CHUNK = 2_000_000


@dataclass(frozen=True)
class RowStructure:
    monotone: bool
    single_fractional: bool

    @property
    def ok(self) -> bool:
        return self.monotone and self.single_fractional


def structure_check(placement) -> list:
    """Per-row flags: nonincreasing entries, at most one entry strictly inside (0, 1)."""
    s = placement.s if isinstance(placement, CachePlacement) else np.atleast_2d(placement)
    out = []
    for row in s:
        frac = (row > FRACTIONAL_TOL) & (row < 1 - FRACTIONAL_TOL)
        out.append(RowStructure(bool(np.all(np.diff(row) <= 0)), int(frac.sum()) <= 1))
    return out


def kkt_residual_bandwidth(coeffs: DelayCoefficients, catalog: FileCatalog,
                           placement: CachePlacement, alloc: BandwidthAllocation) -> float:
    """Largest relative gap between each pico's marginal delay and the macro's.

    The multiplier is read off the macro equation, ``chi = A / w_0^2``. A pico
    with uncached bits and no bandwidth has residual ``+inf``.
    """
    w = alloc.w
    if w.size != coeffs.n_picos + 1:
        raise InvalidArgument("allocation size does not match the coefficients")
    demand = catalog.weighted_lengths.sum() * coeffs.a.sum()
    if coeffs.n_picos == 0:
        return 0.0
    if not w[0] > 0:
        return math.inf
    chi = demand / w[0] ** 2
    load = coeffs.b * ((1.0 - placement.s) @ catalog.weighted_lengths)
    worst = 0.0
    for m in range(coeffs.n_picos):
        wm = w[m + 1]
        if wm == 0:
            if load[m] > 0:
                return math.inf
            continue
        worst = max(worst, abs(load[m] / wm ** 2 - chi) / chi)
    return float(worst)


@dataclass
class OracleReport:
    """Grid optimum, optionally compared with a solver's placement.

    ``gap = (solver - oracle) / |oracle|``. It can be slightly negative
    because the solver works on the continuum and the oracle only on the
    grid.
    """

    instance: str
    mode: str
    step: float
    oracle_objective: float
    oracle_placement: np.ndarray
    grid_points: int
    solver_objective: Optional[float] = None
    structure: list = field(default_factory=list)

    @property
    def gap(self) -> Optional[float]:
        if self.solver_objective is None:
            return None
        return (self.solver_objective - self.oracle_objective) / abs(self.oracle_objective)

    def csv_row(self):
        return [self.instance, self.mode, repr(self.step), repr(self.oracle_objective),
                "" if self.solver_objective is None else repr(self.solver_objective),
                "" if self.gap is None else repr(self.gap),
                "" if not self.structure else int(all(r.ok for r in self.structure))]


def _pareto(V, S):
    """Indices of points not weakly dominated in (min V, max S)."""
    order = np.lexsort((-S, V))
    s_sorted = S[order]
    prev_best = np.maximum.accumulate(np.concatenate([[-np.inf], s_sorted[:-1]]))
    return order[s_sorted > prev_best]


def _half_front(levels, lengths, weights):
    k = lengths.size
    if k == 0:
        return np.zeros(1), np.zeros(1), np.zeros((1, 0))
    grids = np.meshgrid(*([levels] * k), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = _pareto(pts @ lengths, pts @ weights)
    pts = pts[keep]
    return pts @ lengths, pts @ weights, pts


def _row_front(levels, catalog, capacity):
    """Non-dominated feasible rows, as (V, S, rows)."""
    lengths, ql = catalog.lengths, catalog.weighted_lengths
    h = (catalog.n_files + 1) // 2
    v1, s1, p1 = _half_front(levels, lengths[:h], ql[:h])
    v2, s2, p2 = _half_front(levels, lengths[h:], ql[h:])
    limit = capacity * (1 + CAPACITY_RTOL)
    vs, ss, idx = [], [], []
    rows_per_chunk = max(1, CHUNK // max(v2.size, 1))
    for start in range(0, v1.size, rows_per_chunk):
        sl = slice(start, start + rows_per_chunk)
        V = v1[sl, None] + v2[None, :]
        S = s1[sl, None] + s2[None, :]
        ii, jj = np.nonzero(V <= limit)
        if ii.size == 0:
            continue
        keep = _pareto(V[ii, jj], S[ii, jj])
        vs.append(V[ii, jj][keep])
        ss.append(S[ii, jj][keep])
        idx.append(np.stack([ii[keep] + start, jj[keep]], axis=1))
    V, S, ij = np.concatenate(vs), np.concatenate(ss), np.concatenate(idx)
    keep = _pareto(V, S)
    ij = ij[keep]
    rows = np.concatenate([p1[ij[:, 0]], p2[ij[:, 1]]], axis=1)
    return V[keep], S[keep], rows


def grid_search_oracle(scn: NetworkScenario, coeffs: DelayCoefficients, mode="joint",
                       alloc: Optional[BandwidthAllocation] = None, step=1e-2,
                       solver_placement: Optional[CachePlacement] = None,
                       instance="") -> OracleReport:
    """Exhaustive grid optimum of the placement problem on a small instance.

    Parameters
    ----------
    mode : {"joint", "fixed-bw"}
        ``"joint"`` minimises the reduced objective (bandwidth at its optimum).
        ``"fixed-bw"`` minimises the fronthaul plus buffer delay under
        ``alloc``; the access term is a constant and is left out.
    step : float
        Grid spacing; ``1/step`` must be an integer and ``step <= 1e-2``.
    solver_placement : CachePlacement, optional
        Scored with the same objective and stored in the report.

    Raises
    ------
    BudgetExceeded
        When ``M > 2``, ``F > 4`` or a half-row grid exceeds
        ``MAX_HALF_GRID`` points.
    """
    if mode not in ("joint", "fixed-bw"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    if mode == "fixed-bw" and alloc is None:
        raise InvalidArgument("fixed-bw mode needs an allocation")
    n = round(1.0 / step)
    if not step <= 1e-2 or abs(n * step - 1.0) > 1e-9:
        raise InvalidArgument(f"step must divide 1 and be at most 1e-2, got {step}")
    M, F = scn.n_picos, scn.n_files
    half = (n + 1) ** ((F + 1) // 2)
    if M > 2 or F > 4 or half > MAX_HALF_GRID:
        raise BudgetExceeded(f"grid of {(n + 1) ** (M * F):.3g} points (M={M}, F={F}, step={step}) "
                             f"exceeds the oracle budget (M<=2, F<=4, half-row grid <= {MAX_HALF_GRID})")
    levels = np.linspace(0.0, 1.0, n + 1)
    total_ql = scn.catalog.weighted_lengths.sum()
    D, W = scn.buffer_delay_rate, scn.total_bandwidth

    fronts = [_row_front(levels, scn.catalog, scn.storage[m]) for m in range(M)]

    def pico_terms(m, V, S):
        U = np.maximum(total_ql - S, 0.0)
        buf = _ratio(D * U, np.maximum(scn.storage[m] - V, 0.0))
        if mode == "fixed-bw":
            return np.asarray(_ratio(coeffs.b[m] * U, np.full(U.shape, alloc.w[m + 1])) + buf), None
        return np.asarray(buf), np.sqrt(coeffs.b[m] * U)

    if mode == "fixed-bw":
        # separable across picos
        best_rows, value = [], 0.0
        for m, (V, S, rows) in enumerate(fronts):
            vals, _ = pico_terms(m, V, S)
            k = int(np.argmin(vals))
            best_rows.append(rows[k])
            value += float(vals[k])
    else:
        a = access_weight(scn, coeffs)
        terms = [pico_terms(m, V, S) for m, (V, S, _) in enumerate(fronts)]
        if M == 0:
            value, best_rows = a * a / W, []
        elif M == 1:
            buf, v = terms[0]
            vals = (a + v) ** 2 / W + buf
            k = int(np.argmin(vals))
            value, best_rows = float(vals[k]), [fronts[0][2][k]]
        else:
            (b1, v1), (b2, v2) = terms
            value, pick = math.inf, None
            per = max(1, CHUNK // v2.size)
            for start in range(0, v1.size, per):
                sl = slice(start, start + per)
                vals = (a + v1[sl, None] + v2[None, :]) ** 2 / W + b1[sl, None] + b2[None, :]
                k = np.unravel_index(int(np.argmin(vals)), vals.shape)
                if vals[k] < value:
                    value, pick = float(vals[k]), (k[0] + start, k[1])
            best_rows = [fronts[0][2][pick[0]], fronts[1][2][pick[1]]]

    best = np.array(best_rows).reshape(M, F)
    report = OracleReport(instance=instance, mode=mode, step=step, oracle_objective=value,
                          oracle_placement=best, grid_points=(n + 1) ** (M * F))
    if solver_placement is not None:
        report.solver_objective = _score(scn, coeffs, mode, alloc, solver_placement)
        report.structure = structure_check(solver_placement)
    return report


def _score(scn, coeffs, mode, alloc, placement):
    if mode == "joint":
        return reduced_objective(scn, coeffs, placement)
    br = delay_terms(scn, coeffs, placement, alloc)
    return float(br.fronthaul.sum() + br.buffer.sum())
