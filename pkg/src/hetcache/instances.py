"""Seeded small instances for oracle comparisons.

Geometry is the default cell cut down to the first ``n_picos`` picos. Delay
coefficients are drawn at random rather than computed from it. The
magnitudes are chosen so that the access, fronthaul and buffer terms are
all of the same order, which keeps the placement trade-off non-trivial.
"""

from __future__ import annotations

import numpy as np

from .model import DelayCoefficients, FileCatalog, builtin_scenario

__all__ = ["random_catalog", "random_instance", "single_file_instance"]

MBIT = 1e6


def random_catalog(rng, n_files, equal_lengths=False) -> FileCatalog:
    q = np.sort(rng.uniform(0.05, 1.0, n_files))[::-1]
    q = q + 1e-3 * np.arange(n_files)[::-1]   # keep a visible gap between neighbours
    q = q / q.sum()
    lengths = np.full(n_files, MBIT) if equal_lengths else rng.uniform(0.5, 2.0, n_files) * MBIT
    return FileCatalog(lengths, q)


def random_instance(seed, n_picos=1, n_files=3):
    """``(scenario, coefficients)`` for a toy problem.

    Storage is between 20% and 80% of the catalog size, W = 1 MHz and the
    coefficients make every delay term of order one second.
    """
    rng = np.random.default_rng([seed, n_picos, n_files])
    base = builtin_scenario("scaled")
    cat = random_catalog(rng, n_files)
    storage = rng.uniform(0.2, 0.8, n_picos) * cat.total_length
    scn = base.replace(
        pico_radii=base.pico_radii[:n_picos],
        pico_positions=base.pico_positions[:n_picos],
        tx_powers=base.tx_powers[: n_picos + 1],
        storage=storage,
        catalog=cat,
        total_bandwidth=1e6,
        buffer_delay_rate=float(rng.uniform(0.05, 1.0)),
    )
    coeffs = DelayCoefficients(rng.uniform(0.05, 0.5, n_picos + 1), rng.uniform(0.2, 3.0, n_picos),
                               {"source": "random", "seed": int(seed)})
    return scn, coeffs


def single_file_instance(b=1.0):
    """Single pico, single file: L = 1 Mbit, C = 0.5 Mbit, D = 0.1 s, w_0 = w_1 = 1 MHz.

    With ``a_0 + a_1 = 1`` the access delay is 1 s and ``b / w_1 = 1 s/Mbit``.
    """
    base = builtin_scenario("scaled")
    cat = FileCatalog(np.array([MBIT]), np.array([1.0]))
    scn = base.replace(pico_radii=base.pico_radii[:1], pico_positions=base.pico_positions[:1],
                       tx_powers=base.tx_powers[:2], storage=np.array([0.5 * MBIT]),
                       catalog=cat, total_bandwidth=2e6, buffer_delay_rate=0.1)
    return scn, DelayCoefficients(np.array([0.5, 0.5]), np.array([b]), {"source": "single-file"})
