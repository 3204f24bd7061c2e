"""Joint cache placement and bandwidth allocation.

Bandwidth has a closed-form optimum for any placement. Substituting it gives
the reduced objective

    (a + sum_m v_m)^2 / W + sum_m D * U_m / (C_m - cached_m)

with ``U_m`` the popularity-weighted uncached bits at pico m and
``v_m = sqrt(b_m U_m)``. ICP minimises it by Gauss-Seidel sweeps over picos.
Each pico step is a best response over prefix rows. Within one prefix the
stationary points come from a quintic in ``x = sqrt(b_m U_m)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .delay import _ratio, access_weight, reduced_objective
from .errors import ConsistencyError, ConstraintError, DomainError, InvalidArgument
from .fixed_bw import candidate_range
from .model import (BandwidthAllocation, CachePlacement, DelayCoefficients, FileCatalog,
                    NetworkScenario, prefix_placement)

__all__ = [
    "optimal_bandwidth",
    "QuinticCoefficients",
    "quintic_coefficients",
    "real_roots_in_interval",
    "y_value",
    "best_response",
    "IcpIteration",
    "IcpTrace",
    "icp",
    "greedy_half_fill",
]

MONOTONE_RTOL = 1e-12
ROOT_RESIDUAL = 1e-9
ROOT_IMAG_TOL = 1e-6


def _uncached(catalog, placement):
    return (1.0 - placement.s) @ catalog.weighted_lengths


def optimal_bandwidth(coeffs: DelayCoefficients, catalog: FileCatalog,
                      placement: CachePlacement, W: float) -> BandwidthAllocation:
    """Delay-minimising split of ``W`` for a fixed placement.

    ``w_0 : w_1 : ... : w_M = a : v_1 : ... : v_M``. The last nonzero entry is
    set by subtraction so the allocation sums to ``W``.
    """
    if not W > 0:
        raise DomainError(f"total bandwidth must be positive, got {W}")
    if placement.s.shape[0] != coeffs.n_picos:
        raise ConstraintError("shape", "placement and coefficients disagree on the number of picos")
    a = math.sqrt(catalog.weighted_lengths.sum() * coeffs.a.sum())
    v = np.sqrt(coeffs.b * np.maximum(_uncached(catalog, placement), 0.0))
    weights = np.concatenate([[a], v])
    w = weights * (W / weights.sum())
    # multiples of ulp(W) add exactly, so the subtraction below makes the sum W
    quantum = np.spacing(W)
    w = np.round(w / quantum) * quantum
    last = int(np.nonzero(weights)[0][-1])
    w[last] = 0.0
    w[last] = max(W - w.sum(), 0.0)
    return BandwidthAllocation(w)


@dataclass(frozen=True)
class QuinticCoefficients:
    """``z[k]`` multiplies ``x**k``, k = 0..5."""

    z: tuple

    def __post_init__(self):
        if len(self.z) != 6:
            raise InvalidArgument("a quintic needs six coefficients")

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.z)

    def scale(self, x):
        """Sum of absolute term magnitudes at ``x``; residuals are relative to it."""
        return np.polynomial.polynomial.polyval(np.abs(x), np.abs(self.z))


def quintic_coefficients(catalog: FileCatalog, capacity, b, D, W, u, f) -> QuinticCoefficients:
    """Stationarity polynomial of ``y_mf`` in ``x = sqrt(b (w_f - q_f L_f s))``.

    ``w_f`` is the weighted length of files ``f..F`` and ``u`` the bandwidth
    weight of every other BS.
    """
    i = f - 1
    q, length = float(catalog.popularities[i]), float(catalog.lengths[i])
    before = float(catalog.lengths[:i].sum())
    if before > capacity:
        raise InvalidArgument(f"files before {f} do not fit in the capacity")
    wf = float(catalog.weighted_lengths[i:].sum())
    e = q * capacity - q * before - wf
    bql = b * q * length
    z = (b ** 3 * q * length * u * e * e,
         b ** 3 * q * length * e * e + b * b * q * q * length * D * W * e,
         2 * b * b * q * length * u * e,
         2 * b * b * q * length * e,
         bql * u,
         bql)
    return QuinticCoefficients(tuple(float(c) for c in z))


def _polish(z, x, steps=3):
    dz = np.polynomial.polynomial.polyder(z)
    for _ in range(steps):
        d = np.polynomial.polynomial.polyval(x, dz)
        if d == 0:
            break
        step = np.polynomial.polynomial.polyval(x, z) / d
        x -= step
        if abs(step) <= 1e-16 * abs(x):
            break
    return x


def real_roots_in_interval(quintic: QuinticCoefficients, lo, hi) -> List[float]:
    """Real roots of the quintic in the open interval ``(lo, hi)``, ascending.

    Companion-matrix eigenvalues in the variable ``x / hi`` (for conditioning),
    each polished by Newton steps and kept if its relative residual is at
    most 1e-9.
    """
    if not lo < hi:
        raise InvalidArgument(f"empty interval ({lo}, {hi})")
    z = np.asarray(quintic.z, dtype=float)
    unit = max(abs(lo), abs(hi))
    zs = z * unit ** np.arange(6)
    nz = np.nonzero(zs)[0]
    if nz.size == 0 or nz[-1] == 0:
        return []
    zs = zs[: nz[-1] + 1] / np.abs(zs).max()
    raw = np.roots(zs[::-1])
    out = []
    for r in raw:
        if abs(r.imag) > ROOT_IMAG_TOL:
            continue
        t = _polish(zs, float(r.real))
        x = t * unit
        if not lo < x < hi:
            continue
        if abs(quintic(x)) > ROOT_RESIDUAL * quintic.scale(x):
            continue
        if any(abs(x - y) <= 1e-10 * (hi - lo) for y in out):
            continue
        out.append(x)
    return sorted(out)


def y_value(catalog: FileCatalog, capacity, b, D, W, u, f, s):
    """Reduced objective restricted to pico m, up to terms of other picos.

    Row ``(1_{f-1}, s, 0, ...)``; ``u`` is the bandwidth weight of the rest.
    """
    i = f - 1
    q, length = catalog.popularities[i], catalog.lengths[i]
    uncached = max(float(catalog.weighted_lengths[i:].sum()) - q * length * s, 0.0)
    space = max(capacity - float(catalog.lengths[:i].sum()) - length * s, 0.0)
    return _row_value(b, D, W, u, uncached, space)


def _row_value(b, D, W, u, uncached, space):
    return (u + math.sqrt(b * uncached)) ** 2 / W + float(_ratio(D * uncached, space))


def _best_fraction(catalog, capacity, b, D, W, u, f):
    """Minimiser of ``y_mf`` over ``[0, s_max]`` from {0, s_max, stationary points}.

    Returns ``(s, value, solved)`` where ``solved`` says whether a quintic
    was solved.
    """
    i = f - 1
    q, length = float(catalog.popularities[i]), float(catalog.lengths[i])
    room = max(capacity - float(catalog.lengths[:i].sum()), 0.0)
    s_max = min(1.0, room / length)
    cands = [s_max, 0.0]
    solved = False
    wf = float(catalog.weighted_lengths[i:].sum())
    if b > 0 and s_max > 0:
        hi = math.sqrt(b * wf)
        lo = math.sqrt(max(b * wf - b * q * length * s_max, 0.0))
        if lo < hi:
            z = quintic_coefficients(catalog, capacity, b, D, W, u, f)
            solved = True
            for x in real_roots_in_interval(z, lo, hi):
                s = (b * wf - x * x) / (b * q * length)
                cands.append(min(max(s, 0.0), s_max))
    best = None
    for s in cands:
        val = y_value(catalog, capacity, b, D, W, u, f, s)
        # ties keep the earlier (larger-s first) candidate
        if best is None or val < best[1]:
            best = (s, val)
    return best[0], best[1], solved


def _bandwidth_weights(scn, coeffs, placement):
    unc = _uncached(scn.catalog, placement)
    return np.sqrt(coeffs.b * np.maximum(unc, 0.0))


def best_response(scn: NetworkScenario, coeffs: DelayCoefficients, placement: CachePlacement,
                  m: int, restrict=True, counter: Optional[dict] = None):
    """Best prefix row for pico ``m`` (1-based) with the other rows fixed.

    Candidates per leading index ``f`` are ``0``, ``s_max`` and the stationary
    points of ``y_mf``. The current row is kept unless a candidate beats it,
    so the reduced objective never rises.

    Returns
    -------
    row : ndarray
    objective : float
        Reduced objective of the updated placement.
    """
    if not 1 <= m <= scn.n_picos:
        raise InvalidArgument(f"pico index {m} out of range 1..{scn.n_picos}")
    cat = scn.catalog
    capacity = float(scn.storage[m - 1])
    b = float(coeffs.b[m - 1])
    D, W = scn.buffer_delay_rate, scn.total_bandwidth
    v = _bandwidth_weights(scn, coeffs, placement)
    u = access_weight(scn, coeffs) + float(v.sum() - v[m - 1])

    best = None
    for f in candidate_range(cat, capacity).indices(restrict):
        s, val, solved = _best_fraction(cat, capacity, b, D, W, u, f)
        if counter is not None and solved:
            counter["root_solves"] = counter.get("root_solves", 0) + 1
        cached = float(cat.lengths[: f - 1].sum()) + s * cat.lengths[f - 1]
        if best is None or _preferred((val, cached, f), best[0]):
            best = ((val, cached, f), s)
    (val, _, f), s = best
    row = prefix_placement(cat, f, s)

    cur = placement.s[m - 1]
    cur_val = _row_value(b, D, W, u, float((1.0 - cur) @ cat.weighted_lengths),
                         max(capacity - float(cur @ cat.lengths), 0.0))
    if not val < cur_val:
        row = np.array(cur)
    if math.isinf(min(val, cur_val)):
        raise ConstraintError("buffer", f"pico {m}: no row leaves buffer space for uncached bits")
    new = placement.with_row(m, row)
    return row, reduced_objective(scn, coeffs, new)


def _preferred(key, incumbent):
    v, c, f = key
    v0, c0, f0 = incumbent
    if v != v0 and not (math.isfinite(v) and math.isfinite(v0)
                        and abs(v - v0) <= MONOTONE_RTOL * max(abs(v), abs(v0))):
        return v < v0
    return (-c, f) < (-c0, f0)


@dataclass(frozen=True)
class IcpIteration:
    index: int
    objective: float
    changed: tuple
    root_solves: int


@dataclass
class IcpTrace:
    """Objective after each ICP sweep; ``initial_objective`` is before the first."""

    initial_objective: float
    iterations: List[IcpIteration] = field(default_factory=list)
    status: str = "max-iterations"

    @property
    def objectives(self) -> np.ndarray:
        return np.array([self.initial_objective] + [it.objective for it in self.iterations])

    @property
    def n_sweeps(self) -> int:
        return len(self.iterations)

    def to_csv(self, fh=None) -> str:
        """Write ``iteration,objective,changed`` rows; iteration 0 is the initial point."""
        buf = io.StringIO() if fh is None else fh
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["iteration", "objective", "changed"])
        wr.writerow([0, repr(float(self.initial_objective)), ""])
        for it in self.iterations:
            wr.writerow([it.index, repr(float(it.objective)),
                         "".join("1" if c else "0" for c in it.changed)])
        return buf.getvalue() if fh is None else ""

    def to_dict(self):
        return {"status": self.status, "objectives": self.objectives.tolist(),
                "changed": [list(it.changed) for it in self.iterations],
                "root_solves": [it.root_solves for it in self.iterations]}


def greedy_half_fill(catalog: FileCatalog, budget) -> np.ndarray:
    """Cache files in popularity order up to ``budget`` bits, last one fractional."""
    lengths = catalog.lengths
    row = np.zeros(catalog.n_files)
    left = float(budget)
    for i, length in enumerate(lengths):
        if left <= 0:
            break
        row[i] = min(1.0, left / length)
        left -= row[i] * length
    return row


def icp(scn: NetworkScenario, coeffs: DelayCoefficients, init: Optional[CachePlacement] = None,
        k_max: int = 50, tol: float = 1e-9, restrict: bool = True):
    """Iterative cache placement.

    Parameters
    ----------
    init : CachePlacement, optional
        Feasible start; all-zero caches by default.
    k_max : int
        Maximum number of sweeps.
    tol : float
        Stop once a sweep improves the objective by less than ``tol``
        relative.
    restrict : bool
        Enumerate only leading indices ``F_m2..F_m1`` in each best response.

    Returns
    -------
    placement : CachePlacement
    allocation : BandwidthAllocation
    trace : IcpTrace
    """
    if k_max < 1:
        raise InvalidArgument("k_max must be at least 1")
    if not tol >= 0:
        raise InvalidArgument("tol must be nonnegative")
    placement = init if init is not None else CachePlacement.zeros(scn.n_picos, scn.n_files)
    obj = reduced_objective(scn, coeffs, placement)
    trace = IcpTrace(initial_objective=obj)
    for k in range(1, k_max + 1):
        prev = obj
        counter = {}
        changed = []
        for m in range(1, scn.n_picos + 1):
            row, new_obj = best_response(scn, coeffs, placement, m, restrict, counter)
            if new_obj > obj + MONOTONE_RTOL * abs(obj):
                raise ConsistencyError(f"objective rose from {obj!r} to {new_obj!r} at pico {m}, sweep {k}")
            changed.append(not np.array_equal(row, placement.s[m - 1]))
            placement = placement.with_row(m, row)
            obj = new_obj
        trace.iterations.append(IcpIteration(k, obj, tuple(changed), counter.get("root_solves", 0)))
        if math.isfinite(prev) and prev - obj <= tol * abs(prev):
            trace.status = "converged"
            break
    alloc = optimal_bandwidth(coeffs, scn.catalog, placement, scn.total_bandwidth)
    return placement, alloc, trace
