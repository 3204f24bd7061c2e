"""Optimal per-pico cache placement when the bandwidth allocation is fixed.

With bandwidth fixed, the placement problem splits into one problem per pico:

    min_s (b/w + D / (C - sum_f s_f L_f)) * sum_f q_f L_f (1 - s_f)

Its optimum is a prefix row ``(1, ..., 1, s, 0, ..., 0)``. The solver lists
the prefix candidates whose leading index lies in ``[F_m2, F_m1]``. For each
one it finds the best fraction in closed form, then returns the cheapest row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .delay import _ratio
from .errors import (ConstraintError, DegenerateBandwidthError, InfeasiblePrefixError,
                     InvalidArgument)
from .model import (BandwidthAllocation, CachePlacement, DelayCoefficients, FileCatalog,
                    NetworkScenario, prefix_placement)

__all__ = [
    "CandidateRange",
    "candidate_range",
    "prefix_thresholds",
    "fraction_objective",
    "optimal_fraction",
    "solve_pico_fixed_bw",
    "solve_all_fixed_bw",
]

# relative tolerance on the exact-equality branches (prefix sum == C, z(f) == C)
EQ_RTOL = 1e-9
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class CandidateRange:
    """1-based bounds ``f_lo <= f <= f_hi`` on the leading index of a candidate row."""

    f_hi: int
    f_lo: int

    def indices(self, restrict=True):
        return range(self.f_lo if restrict else 1, self.f_hi + 1)


def prefix_thresholds(catalog: FileCatalog) -> np.ndarray:
    """``z(f) = sum_{l<=f} L_l + sum_{l>f} q_l L_l / q_f`` for f = 1..F.

    Strictly increasing when popularities strictly decrease.
    """
    q = catalog.popularities
    ql = catalog.weighted_lengths
    tail_after = np.concatenate([np.cumsum(ql[::-1])[::-1][1:], [0.0]])
    return np.cumsum(catalog.lengths) + tail_after / q


def candidate_range(catalog: FileCatalog, capacity: float) -> CandidateRange:
    """Bounds ``F_m1`` (upper) and ``F_m2`` (lower) on candidate leading indices."""
    total = catalog.total_length
    if not capacity < total or not capacity > 0:
        raise InvalidArgument(f"capacity {capacity:g} must be positive and below the catalog size {total:g}")
    prefix = np.cumsum(catalog.lengths)
    equal = np.abs(prefix - capacity) <= EQ_RTOL * capacity
    if equal.any():
        f_hi = int(np.argmax(equal)) + 1
    else:
        f_hi = int(np.argmax(prefix > capacity)) + 1
    ok = np.nonzero(capacity >= prefix_thresholds(catalog) * (1 - EQ_RTOL))[0]
    f_lo = int(ok[-1]) + 1 if ok.size else 1
    return CandidateRange(f_hi=f_hi, f_lo=min(f_lo, f_hi))


def _prefix_parts(catalog, f):
    i = f - 1
    before = float(catalog.lengths[:i].sum())
    after = float(catalog.weighted_lengths[f:].sum())
    return before, after


def fraction_objective(catalog, capacity, b, w, D, f, s):
    """Pico objective of the row ``(1_{f-1}, s, 0, ...)``; ``g_mf(s)``."""
    before, after = _prefix_parts(catalog, f)
    q, length = catalog.popularities[f - 1], catalog.lengths[f - 1]
    uncached = q * length * (1.0 - s) + after
    space = max(capacity - before - s * length, 0.0)
    return float(_ratio(b * uncached, w) + _ratio(D * uncached, space))


def optimal_fraction(catalog: FileCatalog, capacity, b, w, D, f):
    """Best fraction of file ``f`` (1-based) given files ``< f`` cached and ``> f`` not.

    Follows the four-way case split on the stationary point ``s(1)`` of the
    one-dimensional objective, evaluated in the order written.
    """
    if not 1 <= f <= catalog.n_files:
        raise InvalidArgument(f"file index {f} out of range")
    before, after = _prefix_parts(catalog, f)
    if before > capacity * (1 + EQ_RTOL):
        raise InfeasiblePrefixError(f"files 1..{f - 1} need {before:g} bits > capacity {capacity:g}")
    if not w > 0 and b > 0:
        raise DegenerateBandwidthError("fronthaul bandwidth is zero; exclude this pico from fronthaul")
    q, length = float(catalog.popularities[f - 1]), float(catalog.lengths[f - 1])
    room = max(capacity - before, 0.0)
    s_max = min(1.0, room / length)

    def g(s):
        return fraction_objective(catalog, capacity, b, w, D, f, s)

    # K <= 0  <=>  capacity >= z(f): objective decreasing on [0, s_max]
    k = after + q * (before + length) - q * capacity
    if k <= EQ_RTOL * q * capacity:
        return s_max
    if b > 0:
        s1 = (room - math.sqrt(w * D * k / (b * q))) / length
    else:
        s1 = -math.inf
    if 0.0 < s1 < s_max:
        return s1 if g(s1) < g(s_max) else s_max
    if s1 <= 0.0:
        return 0.0 if g(0.0) < g(s_max) else s_max
    return s_max


def solve_pico_fixed_bw(catalog: FileCatalog, capacity, b, w, D, restrict=True):
    """Optimal cache row for one pico and its objective (fronthaul + buffer part).

    Parameters
    ----------
    restrict : bool
        Enumerate only leading indices ``F_m2..F_m1``; ``False`` scans
        ``1..F_m1``.

    Returns
    -------
    row : ndarray, shape (F,)
    value : float
    """
    rng = candidate_range(catalog, capacity)
    best = None
    for f in rng.indices(restrict):
        s = optimal_fraction(catalog, capacity, b, w, D, f)
        value = fraction_objective(catalog, capacity, b, w, D, f, s)
        cached = float(catalog.lengths[:f - 1].sum()) + s * catalog.lengths[f - 1]
        key = (value, -cached, f)
        if best is None or _better(key, best[0]):
            best = (key, f, s)
    (value, _, _), f, s = best
    if math.isinf(value):
        raise ConstraintError("buffer", "every candidate row leaves no buffer for uncached bits")
    return prefix_placement(catalog, f, s), value


def _better(key, incumbent):
    v, c, f = key
    v0, c0, f0 = incumbent
    if math.isinf(v) or math.isinf(v0):
        if v != v0:
            return v < v0
    elif abs(v - v0) > TIE_RTOL * max(abs(v), abs(v0)):
        return v < v0
    return (c, f) < (c0, f0)


def solve_all_fixed_bw(scn: NetworkScenario, coeffs: DelayCoefficients,
                       alloc: BandwidthAllocation, restrict=True) -> CachePlacement:
    """Solve every pico independently under the given bandwidths."""
    rows = []
    for m in range(1, scn.n_picos + 1):
        try:
            row, _ = solve_pico_fixed_bw(scn.catalog, scn.storage[m - 1], coeffs.b[m - 1],
                                         alloc.w[m], scn.buffer_delay_rate, restrict)
        except (ConstraintError, DegenerateBandwidthError, InvalidArgument) as exc:
            raise type(exc)(f"pico {m}: {exc}") if not isinstance(exc, ConstraintError) else exc
        rows.append(row)
    return CachePlacement(np.array(rows).reshape(scn.n_picos, scn.n_files))
