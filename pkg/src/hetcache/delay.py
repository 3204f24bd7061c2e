"""Delay objectives and the hit-ratio metric.

Conventions shared by every function here: a fronthaul or buffer term with
zero numerator is 0 even when its denominator is 0 (a fully cached file needs
neither), and a positive numerator over a zero denominator is ``+inf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConstraintError, InvalidArgument
from .model import (BANDWIDTH_RTOL, CAPACITY_RTOL, BandwidthAllocation, CachePlacement,
                    DelayCoefficients, FileCatalog, NetworkScenario)

__all__ = [
    "DelayBreakdown",
    "file_delay",
    "buffer_space",
    "delay_terms",
    "average_delay",
    "reduced_objective",
    "hit_ratio",
    "access_weight",
]


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    out = np.where(num == 0, 0.0, out)
    return out if out.ndim else float(out)


def buffer_space(capacity, cached):
    """``C - cached``, clamped at 0 within the capacity tolerance.

    Raises :class:`CapacityError` when the cache overflows by more than
    ``1e-9 * C``.
    """
    capacity = np.asarray(capacity, dtype=float)
    cached = np.asarray(cached, dtype=float)
    if np.any(cached > capacity * (1 + CAPACITY_RTOL)):
        raise CapacityError("cached volume exceeds storage capacity")
    out = np.maximum(capacity - cached, 0.0)
    return out if out.ndim else float(out)


def file_delay(length, s, a, b, w0, wm, capacity, cached_total, D):
    """Delay of one file for a user served by a pico.

    Access time ``a L / w0`` plus fronthaul time ``b (1-s) L / wm`` plus
    buffer time ``(1-s) L D / (C - cached_total)``.
    """
    if not w0 > 0:
        raise InvalidArgument("access bandwidth w0 must be positive")
    space = buffer_space(capacity, cached_total)
    uncached = (1.0 - s) * length
    return (a * length / w0 + _ratio(b * uncached, wm) + _ratio(uncached * D, space))


@dataclass(frozen=True)
class DelayBreakdown:
    """Popularity-weighted delay split per BS.

    ``access`` has M+1 entries (macro first); ``fronthaul`` and ``buffer``
    have one per pico.
    """

    access: np.ndarray
    fronthaul: np.ndarray
    buffer: np.ndarray

    @property
    def total(self) -> float:
        return float(self.access.sum() + self.fronthaul.sum() + self.buffer.sum())

    def to_dict(self):
        return {"access": self.access.tolist(), "fronthaul": self.fronthaul.tolist(),
                "buffer": self.buffer.tolist(), "total": self.total}


def _check_shapes(scn, coeffs, placement):
    m, f = scn.n_picos, scn.n_files
    if placement.s.shape != (m, f):
        raise ConstraintError("shape", f"placement is {placement.s.shape}, expected {(m, f)}")
    if coeffs.n_picos != m:
        raise ConstraintError("shape", f"coefficients cover {coeffs.n_picos} picos, scenario has {m}")


def _check_capacity(scn, placement):
    bad = placement.capacity_violations(scn.catalog.lengths, scn.storage)
    if bad:
        raise ConstraintError("storage capacity", f"cache overflow at pico(s) {bad}")


def delay_terms(scn: NetworkScenario, coeffs: DelayCoefficients, placement: CachePlacement,
                alloc: BandwidthAllocation) -> DelayBreakdown:
    """Per-BS access, fronthaul and buffer contributions to the average delay."""
    _check_shapes(scn, coeffs, placement)
    _check_capacity(scn, placement)
    w = alloc.w
    if w.size != scn.n_picos + 1:
        raise ConstraintError("shape", f"allocation has {w.size} entries, expected {scn.n_picos + 1}")
    if alloc.total > scn.total_bandwidth * (1 + BANDWIDTH_RTOL):
        raise ConstraintError("total bandwidth", f"{alloc.total:g} Hz exceeds W={scn.total_bandwidth:g} Hz")

    ql = scn.catalog.weighted_lengths
    uncached = (1.0 - placement.s) @ ql          # sum_f q_f L_f (1 - s_mf)
    space = buffer_space(scn.storage, placement.cached_bits(scn.catalog.lengths))
    access = _ratio(coeffs.a * ql.sum(), np.full(coeffs.a.shape, w[0]))
    fronthaul = _ratio(coeffs.b * uncached, w[1:])
    buffer = _ratio(scn.buffer_delay_rate * uncached, space)
    return DelayBreakdown(np.atleast_1d(access), np.atleast_1d(fronthaul), np.atleast_1d(buffer))


def average_delay(scn, coeffs, placement, alloc) -> float:
    """Average file delay for a given placement and bandwidth allocation."""
    return delay_terms(scn, coeffs, placement, alloc).total


def access_weight(scn: NetworkScenario, coeffs: DelayCoefficients) -> float:
    """``a = sqrt(sum_f q_f L_f * sum_m a_m)``, the macro-band demand term."""
    return float(np.sqrt(scn.catalog.weighted_lengths.sum() * coeffs.a.sum()))


def reduced_objective(scn: NetworkScenario, coeffs: DelayCoefficients,
                      placement: CachePlacement) -> float:
    """Average delay after substituting the optimal bandwidth allocation.

    ``(a + sum_m v_m)^2 / W + sum_m D * sum_f q_f L_f (1 - s_mf) / (C_m - cached_m)``
    with ``v_m = sqrt(b_m sum_f q_f L_f (1 - s_mf))``.
    """
    _check_shapes(scn, coeffs, placement)
    _check_capacity(scn, placement)
    ql = scn.catalog.weighted_lengths
    uncached = (1.0 - placement.s) @ ql
    v = np.sqrt(coeffs.b * np.maximum(uncached, 0.0))
    space = buffer_space(scn.storage, placement.cached_bits(scn.catalog.lengths))
    bandwidth_part = (access_weight(scn, coeffs) + v.sum()) ** 2 / scn.total_bandwidth
    return float(bandwidth_part + np.sum(_ratio(scn.buffer_delay_rate * uncached, space)))


def hit_ratio(catalog: FileCatalog, placement: CachePlacement) -> float:
    """Popularity-weighted cached fraction averaged over picos."""
    s = placement.s
    if s.shape[0] == 0:
        raise InvalidArgument("hit ratio is undefined without picos")
    return float(np.mean(s @ catalog.popularities))
