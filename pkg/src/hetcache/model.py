"""Domain types for the two-tier cache/buffer model.

All quantities are in canonical units: bits, Hz, seconds, watts, meters.
Index 0 of per-BS vectors is the macro BS; picos are 1..M.
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .errors import InfeasiblePrefixError, InvalidArgument, ScenarioError

__all__ = [
    "FileCatalog",
    "NetworkScenario",
    "CachePlacement",
    "BandwidthAllocation",
    "DelayCoefficients",
    "Violation",
    "zipf_popularity",
    "validate_scenario",
    "require_valid",
    "prefix_placement",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "builtin_scenario",
]

CAPACITY_RTOL = 1e-9
BANDWIDTH_RTOL = 1e-9


def _frozen_array(x, dtype=float, ndim=1):
    arr = np.array(x, dtype=dtype, ndmin=ndim)
    arr.setflags(write=False)
    return arr


def zipf_popularity(n_files: int, skew: float) -> np.ndarray:
    """Zipf popularities ``q_f = f^-skew / sum_l l^-skew`` for f = 1..n_files."""
    if int(n_files) != n_files or n_files < 1:
        raise InvalidArgument(f"number of files must be a positive integer, got {n_files!r}")
    skew = float(skew)
    if not math.isfinite(skew) or skew < 0:
        raise InvalidArgument(f"skewness must be finite and >= 0, got {skew!r}")
    weights = np.arange(1, int(n_files) + 1, dtype=float) ** -skew
    # sum smallest-first for a tighter normalisation
    return weights / np.sum(weights[::-1])


@dataclass(frozen=True)
class FileCatalog:
    """File lengths (bits) and strictly decreasing request popularities."""

    lengths: np.ndarray
    popularities: np.ndarray

    def __post_init__(self):
        lengths = _frozen_array(self.lengths)
        pops = _frozen_array(self.popularities)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "popularities", pops)
        if lengths.ndim != 1 or lengths.shape != pops.shape or lengths.size == 0:
            raise InvalidArgument("lengths and popularities must be equal-length non-empty vectors")
        if not np.all(np.isfinite(lengths)) or np.any(lengths <= 0):
            raise InvalidArgument("every file length must be positive and finite")
        if np.any(pops <= 0) or not np.all(np.isfinite(pops)):
            raise InvalidArgument("popularities must be positive")
        if abs(pops.sum() - 1.0) > 1e-9:
            raise InvalidArgument(f"popularities sum to {pops.sum()!r}, expected 1")
        if np.any(np.diff(pops) >= 0):
            raise InvalidArgument("popularities must be strictly decreasing")

    @classmethod
    def zipf(cls, n_files, skew, length_bits):
        """Catalog with Zipf popularities and equal (or given) lengths.

        ``skew = 0`` produces exact ties; they are broken by at most 1e-12
        per entry, with a warning, so the strict-order invariant holds.
        """
        q = zipf_popularity(n_files, skew)
        lengths = np.broadcast_to(np.asarray(length_bits, dtype=float), q.shape)
        return cls(lengths, break_ties(q))

    @property
    def n_files(self) -> int:
        return self.lengths.size

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @property
    def weighted_lengths(self) -> np.ndarray:
        """``q_f * L_f``."""
        return self.popularities * self.lengths


def break_ties(q):
    """Make a nonincreasing popularity vector strictly decreasing.

    Each entry moves by at most 1e-12 (before renormalisation).
    """
    q = np.asarray(q, dtype=float)
    if np.any(np.diff(q) > 0):
        raise InvalidArgument("popularities must be sorted in nonincreasing order")
    if np.all(np.diff(q) < 0):
        return q
    warnings.warn("popularity ties perturbed by <= 1e-12 to enforce strict order", stacklevel=3)
    n = q.size
    q = q - 1e-12 * np.arange(n) / max(n - 1, 1)
    return q / q.sum()


@dataclass(frozen=True)
class NetworkScenario:
    """Geometry, radio and storage parameters of one macro cell with M picos.

    ``tx_powers`` has M+1 entries (macro first). ``storage`` and the pico
    vectors have M entries.
    """

    macro_radius: float
    pico_radii: np.ndarray
    pico_positions: np.ndarray
    tx_powers: np.ndarray
    noise_power: float
    pathloss_exponent: float
    user_density: float
    total_bandwidth: float
    buffer_delay_rate: float
    storage: np.ndarray
    catalog: FileCatalog

    def __post_init__(self):
        radii = _frozen_array(self.pico_radii)
        pos = np.array(self.pico_positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "pico_radii", radii)
        object.__setattr__(self, "pico_positions", pos)
        object.__setattr__(self, "tx_powers", _frozen_array(self.tx_powers))
        object.__setattr__(self, "storage", _frozen_array(self.storage))
        for name in ("macro_radius", "noise_power", "pathloss_exponent", "user_density",
                     "total_bandwidth", "buffer_delay_rate"):
            object.__setattr__(self, name, float(getattr(self, name)))
        m = radii.size
        if pos.shape[0] != m or self.storage.size != m or self.tx_powers.size != m + 1:
            raise InvalidArgument(
                f"inconsistent sizes: {m} pico radii, {pos.shape[0]} positions, "
                f"{self.storage.size} storage entries, {self.tx_powers.size} powers (need M+1)")

    @property
    def n_picos(self) -> int:
        return self.pico_radii.size

    @property
    def n_files(self) -> int:
        return self.catalog.n_files

    @property
    def bs_positions(self) -> np.ndarray:
        """(M+1, 2) array with the macro at the origin first."""
        return np.vstack([np.zeros((1, 2)), self.pico_positions])

    @property
    def fronthaul_distances(self) -> np.ndarray:
        """Macro-to-pico distances d_m."""
        return np.hypot(self.pico_positions[:, 0], self.pico_positions[:, 1])

    def region_area(self, m: int) -> float:
        """Area served by BS m; the macro serves its disk minus the pico disks."""
        if m == 0:
            return math.pi * (self.macro_radius ** 2 - float(np.sum(self.pico_radii ** 2)))
        return math.pi * float(self.pico_radii[m - 1]) ** 2

    def replace(self, **changes) -> "NetworkScenario":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple
    message: str

    def __str__(self):
        return f"[{self.kind}] {self.message}"


def validate_scenario(scn: NetworkScenario) -> list:
    """Return the list of violated scenario invariants (empty when valid)."""
    out = []
    for name in ("macro_radius", "noise_power", "user_density", "total_bandwidth",
                 "buffer_delay_rate"):
        v = getattr(scn, name)
        if not (v > 0 and math.isfinite(v)):
            out.append(Violation("positivity", (name,), f"{name} must be positive, got {v}"))
    if not scn.pathloss_exponent > 2:
        out.append(Violation("positivity", ("pathloss_exponent",),
                             f"path-loss exponent must exceed 2, got {scn.pathloss_exponent}"))
    for i, p in enumerate(scn.tx_powers):
        if not p > 0:
            out.append(Violation("positivity", ("tx_powers", i), f"tx power of BS {i} must be positive"))
    for i, r in enumerate(scn.pico_radii, start=1):
        if not r > 0:
            out.append(Violation("positivity", ("pico_radii", i), f"radius of pico {i} must be positive"))
    for i, c in enumerate(scn.storage, start=1):
        if not c > 0:
            out.append(Violation("positivity", ("storage", i), f"storage of pico {i} must be positive"))

    centre_dist = scn.fronthaul_distances
    for i in range(scn.n_picos):
        if centre_dist[i] + scn.pico_radii[i] > scn.macro_radius:
            out.append(Violation("containment", (i + 1,),
                                 f"pico {i + 1} disk is not inside the macro disk"))
        if centre_dist[i] == 0:
            out.append(Violation("containment", (i + 1,),
                                 f"pico {i + 1} is co-located with the macro BS"))
        for j in range(i + 1, scn.n_picos):
            gap = np.hypot(*(scn.pico_positions[i] - scn.pico_positions[j]))
            if gap < scn.pico_radii[i] + scn.pico_radii[j]:
                out.append(Violation("disjointness", (i + 1, j + 1),
                                     f"pico disks {i + 1} and {j + 1} overlap"))
    total = scn.catalog.total_length
    for i, c in enumerate(scn.storage, start=1):
        if c >= total:
            out.append(Violation("capacity", (i,),
                                 f"pico {i} storage {c} can hold the whole catalog ({total} bits)"))
    return out


def require_valid(scn: NetworkScenario) -> None:
    bad = validate_scenario(scn)
    if bad:
        raise ScenarioError("invalid scenario: " + "; ".join(str(v) for v in bad), bad)


def prefix_placement(catalog: FileCatalog, f: int, frac: float,
                     capacity: Optional[float] = None) -> np.ndarray:
    """Row ``(1, ..., 1, frac, 0, ..., 0)`` with ``frac`` at 1-based position ``f``.

    Raises :class:`InfeasiblePrefixError` when the row needs more than
    ``capacity`` bits.
    """
    n = catalog.n_files
    if not 1 <= f <= n:
        raise InvalidArgument(f"file index must be in 1..{n}, got {f}")
    if not 0.0 <= frac <= 1.0:
        raise InvalidArgument(f"fraction must be in [0, 1], got {frac}")
    row = np.zeros(n)
    row[: f - 1] = 1.0
    row[f - 1] = frac
    if capacity is not None:
        used = float(row @ catalog.lengths)
        if used > capacity * (1 + CAPACITY_RTOL):
            raise InfeasiblePrefixError(
                f"prefix needs {used:g} bits but capacity is {capacity:g} bits")
    return row


@dataclass(frozen=True)
class CachePlacement:
    """M x F matrix of cached fractions."""

    s: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float, ndmin=2)
        if s.ndim != 2:
            raise InvalidArgument("placement must be a 2-D matrix")
        if np.any(s < 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
            raise InvalidArgument("cached fractions must lie in [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @classmethod
    def zeros(cls, n_picos, n_files):
        return cls(np.zeros((n_picos, n_files)))

    def cached_bits(self, lengths) -> np.ndarray:
        return self.s @ np.asarray(lengths, dtype=float)

    def capacity_violations(self, lengths, storage) -> list:
        used = self.cached_bits(lengths)
        storage = np.asarray(storage, dtype=float)
        return [int(m) + 1 for m in np.nonzero(used > storage * (1 + CAPACITY_RTOL))[0]]

    def with_row(self, m: int, row) -> "CachePlacement":
        """Copy with pico ``m`` (1-based) replaced by ``row``."""
        s = np.array(self.s)
        s[m - 1] = row
        return CachePlacement(s)


@dataclass(frozen=True)
class BandwidthAllocation:
    """Bandwidths w_0..w_M in Hz (macro access band first)."""

    w: np.ndarray

    def __post_init__(self):
        w = _frozen_array(self.w)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidArgument("bandwidths must be finite and nonnegative")
        object.__setattr__(self, "w", w)

    @property
    def total(self) -> float:
        return float(self.w.sum())

    @classmethod
    def equal(cls, total, n_picos):
        return cls(np.full(n_picos + 1, total / (n_picos + 1)))


@dataclass(frozen=True)
class DelayCoefficients:
    """Access coefficients a_0..a_M and fronthaul coefficients b_1..b_M.

    Both are time x bandwidth per bit (s Hz / bit).
    """

    a: np.ndarray
    b: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = _frozen_array(self.a)
        b = np.array(self.b, dtype=float).reshape(-1)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.size != b.size + 1:
            raise InvalidArgument(f"need M+1 access and M fronthaul coefficients, got {a.size} and {b.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidArgument("delay coefficients must be finite")
        if np.any(a <= 0) or np.any(b < 0):
            raise InvalidArgument("delay coefficients must be positive")

    @property
    def n_picos(self):
        return self.b.size

    def to_dict(self):
        return {"format": "hetcache-coefficients", "version": 1,
                "a": self.a.tolist(), "b": self.b.tolist(), "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["a"], d["b"], dict(d.get("meta", {})))
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed coefficient document: {exc}") from exc


# --- JSON I/O -----------------------------------------------------------------

def _catalog_from_dict(d) -> FileCatalog:
    if "zipf" in d:
        z = d["zipf"]
        if "length_bits" not in d:
            raise InvalidArgument("zipf catalog needs 'length_bits'")
        return FileCatalog.zipf(int(z["F"]), float(z["nu"]), d["length_bits"])
    lengths = np.asarray(d["lengths"], dtype=float)
    q = np.asarray(d["popularities"], dtype=float)
    return FileCatalog(lengths, break_ties(q))


def scenario_from_dict(d: dict) -> NetworkScenario:
    """Build a scenario from the JSON document layout (canonical units)."""
    try:
        cat = _catalog_from_dict(d["catalog"])
        storage = d["storage"]
        n = len(d["pico_radii"])
        if np.isscalar(storage):
            storage = [storage] * n
        return NetworkScenario(
            macro_radius=d["macro_radius"],
            pico_radii=d["pico_radii"],
            pico_positions=np.asarray(d["pico_positions"], dtype=float).reshape(-1, 2),
            tx_powers=d["tx_powers"],
            noise_power=d["noise_power"],
            pathloss_exponent=d["pathloss_exponent"],
            user_density=d["user_density"],
            total_bandwidth=d["total_bandwidth"],
            buffer_delay_rate=d["buffer_delay_rate"],
            storage=storage,
            catalog=cat,
        )
    except KeyError as exc:
        raise InvalidArgument(f"scenario is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgument):
            raise
        raise InvalidArgument(f"malformed scenario: {exc}") from exc


def scenario_to_dict(scn: NetworkScenario) -> dict:
    return {
        "macro_radius": scn.macro_radius,
        "pico_radii": scn.pico_radii.tolist(),
        "pico_positions": scn.pico_positions.tolist(),
        "tx_powers": scn.tx_powers.tolist(),
        "noise_power": scn.noise_power,
        "pathloss_exponent": scn.pathloss_exponent,
        "user_density": scn.user_density,
        "total_bandwidth": scn.total_bandwidth,
        "buffer_delay_rate": scn.buffer_delay_rate,
        "storage": scn.storage.tolist(),
        "catalog": {"lengths": scn.catalog.lengths.tolist(),
                    "popularities": scn.catalog.popularities.tolist()},
    }


def load_scenario(path) -> NetworkScenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InvalidArgument(f"{path}: scenario must be a JSON object")
    return scenario_from_dict(doc)


def builtin_scenario(name: str = "scaled", **overrides) -> NetworkScenario:
    """Shipped scenarios: ``"scaled"`` (F=100) and ``"full"`` (F=1000)."""
    fname = {"scaled": "default_scaled.json", "full": "default_full.json"}.get(name)
    if fname is None:
        raise InvalidArgument(f"unknown builtin scenario {name!r}")
    doc = json.loads(resources.files("hetcache").joinpath("data").joinpath(fname).read_text())
    doc.update(overrides)
    return scenario_from_dict(doc)
