import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetcache.baselines import solve_oceb
from hetcache.delay import (access_weight, average_delay, buffer_space, delay_terms, file_delay,
                            hit_ratio, reduced_objective)
from hetcache.errors import CapacityError, ConstraintError, InvalidArgument
from hetcache.instances import random_instance, single_file_instance
from hetcache.joint import optimal_bandwidth
from hetcache.model import BandwidthAllocation, CachePlacement, DelayCoefficients, FileCatalog
from hetcache.validate import random_placement

MB = 1e6


def single_file(s):
    # a = b = 1 s Hz / bit with 1 MHz links gives 1 s/Mbit
    return file_delay(MB, s, 1.0, 1.0, MB, MB, 0.5 * MB, s * MB, 0.1)


def test_single_file_delay_points():
    assert single_file(0.0) == pytest.approx(2.2, rel=1e-12)
    assert single_file(0.2764) == pytest.approx(1 + 0.7236 + 0.7236 * 0.1 / 0.2236, rel=1e-12)
    assert single_file(0.2764) == pytest.approx(2.0472, abs=1e-4)


def test_single_file_grid_minimum():
    s = np.arange(0, 0.5 + 1e-12, 1e-4)
    d = np.array([single_file(x) for x in s])
    k = int(np.argmin(d))
    assert 0 < k < s.size - 1
    assert s[k] == pytest.approx(0.2764, abs=1e-3)
    assert d[k] == pytest.approx(2.0472, abs=1e-3)
    # decreasing then increasing
    assert np.all(np.diff(d[: k + 1]) < 0) and np.all(np.diff(d[k:]) > 0)


def test_fully_cached_file_has_only_access_delay():
    assert file_delay(0.4 * MB, 1.0, 1.0, 1.0, MB, MB, MB, 0.4 * MB, 0.1) == pytest.approx(0.4)
    # no fronthaul bandwidth and no buffer needed
    assert file_delay(0.4 * MB, 1.0, 1.0, 1.0, MB, 0.0, 0.4 * MB, 0.4 * MB, 0.1) == pytest.approx(0.4)


def test_zero_denominator_conventions():
    assert file_delay(MB, 0.5, 1.0, 1.0, MB, 0.0, MB, 0.2 * MB, 0.1) == math.inf
    assert file_delay(MB, 0.5, 1.0, 1.0, MB, MB, MB, MB, 0.1) == math.inf
    with pytest.raises(CapacityError):
        file_delay(MB, 0.5, 1.0, 1.0, MB, MB, MB, 1.1 * MB, 0.1)
    with pytest.raises(InvalidArgument):
        file_delay(MB, 0.5, 1.0, 1.0, 0.0, MB, MB, 0.1 * MB, 0.1)


def test_buffer_space_tolerance():
    assert buffer_space(1.0, 1.0 + 1e-12) == 0.0
    with pytest.raises(CapacityError):
        buffer_space(1.0, 1.0 + 1e-6)


def test_average_delay_single_pico_reduces_to_file_delay():
    scn, co = single_file_instance()
    alloc = BandwidthAllocation(np.array([1e6, 1e6]))
    for s in (0.0, 0.3, 0.5):
        p = CachePlacement(np.array([[s]]))
        assert average_delay(scn, co, p, alloc) == pytest.approx(single_file(s), rel=1e-12)


def test_all_cached_toy():
    cat = FileCatalog(np.array([1e5, 2e5]), np.array([0.7, 0.3]))
    scn, _ = random_instance(0, 2, 2)
    scn = scn.replace(catalog=cat, storage=np.array([4e5, 4e5]))
    co = DelayCoefficients(np.array([0.2, 0.3, 0.4]), np.array([1.0, 2.0]))
    p = CachePlacement(np.ones((2, 2)))
    alloc = BandwidthAllocation(np.array([4e5, 3e5, 3e5]))
    expect = (cat.weighted_lengths.sum()) * co.a.sum() / 4e5
    assert average_delay(scn, co, p, alloc) == pytest.approx(expect, rel=1e-12)


def test_decomposition_resums(scaled, scaled_coeffs):
    rep = solve_oceb(scaled, scaled_coeffs)
    br = delay_terms(scaled, scaled_coeffs, rep.placement, rep.allocation)
    w, ql = rep.allocation.w, scaled.catalog.weighted_lengths
    manual = 0.0
    for m in range(scaled.n_picos + 1):
        manual += scaled_coeffs.a[m] * ql.sum() / w[0]
    for m in range(scaled.n_picos):
        s = rep.placement.s[m]
        free = scaled.storage[m] - s @ scaled.catalog.lengths
        for f in range(scaled.n_files):
            manual += ql[f] * (1 - s[f]) * (scaled_coeffs.b[m] / w[m + 1] + scaled.buffer_delay_rate / free)
    assert math.isfinite(br.total)
    assert br.total == pytest.approx(manual, rel=1e-12)


def test_constraint_errors(scaled, scaled_coeffs):
    p = CachePlacement.zeros(3, 100)
    with pytest.raises(ConstraintError) as exc:
        average_delay(scaled, scaled_coeffs, p, BandwidthAllocation(np.full(4, 3e6)))
    assert exc.value.constraint == "total bandwidth"
    with pytest.raises(ConstraintError):
        average_delay(scaled, scaled_coeffs, CachePlacement(np.ones((3, 100))),
                      BandwidthAllocation.equal(1e7, 3))
    with pytest.raises(ConstraintError):
        average_delay(scaled, scaled_coeffs, CachePlacement.zeros(2, 100), BandwidthAllocation.equal(1e7, 3))


def test_reduced_objective_limits(scaled, scaled_coeffs):
    a = access_weight(scaled, scaled_coeffs)
    scn = scaled.replace(buffer_delay_rate=0.0)
    ql = scaled.catalog.weighted_lengths.sum()
    expect = (a + np.sqrt(scaled_coeffs.b * ql).sum()) ** 2 / scaled.total_bandwidth
    got = reduced_objective(scn, scaled_coeffs, CachePlacement.zeros(3, 100))
    assert got == pytest.approx(expect, rel=1e-12)


def test_reduced_objective_fully_cached():
    cat = FileCatalog(np.array([1e5, 2e5]), np.array([0.7, 0.3]))
    scn, _ = random_instance(1, 1, 2)
    # storage equal to the catalog size: outside the scenario invariant, objective still defined
    scn = scn.replace(catalog=cat, storage=np.array([3e5]))
    co = DelayCoefficients(np.array([0.2, 0.3]), np.array([1.0]))
    a = access_weight(scn, co)
    got = reduced_objective(scn, co, CachePlacement(np.ones((1, 2))))
    assert got == pytest.approx(a * a / scn.total_bandwidth, rel=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_reduced_objective_equals_delay_at_optimal_bandwidth(seed):
    scn, co = random_instance(seed % 50, 1 + seed % 3, 2 + seed % 4)
    p = random_placement(np.random.default_rng(seed), scn)
    alloc = optimal_bandwidth(co, scn.catalog, p, scn.total_bandwidth)
    red = reduced_objective(scn, co, p)
    assert average_delay(scn, co, p, alloc) == pytest.approx(red, rel=1e-10)
    # any other split is no better
    other = BandwidthAllocation.equal(scn.total_bandwidth, scn.n_picos)
    assert average_delay(scn, co, p, other) >= red * (1 - 1e-12)


def test_hit_ratio_examples():
    cat = FileCatalog(np.ones(2), np.array([0.6, 0.4]))
    assert hit_ratio(cat, CachePlacement(np.zeros((2, 2)))) == 0.0
    assert hit_ratio(cat, CachePlacement(np.ones((2, 2)))) == pytest.approx(1.0)
    assert hit_ratio(cat, CachePlacement(np.array([[1, 0], [0.5, 0.5]]))) == pytest.approx(0.55)
    with pytest.raises(InvalidArgument):
        hit_ratio(cat, CachePlacement(np.zeros((0, 2))))
