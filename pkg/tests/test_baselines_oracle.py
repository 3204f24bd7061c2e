import math

import numpy as np
import pytest

from hetcache.baselines import solve, solve_icp, solve_oceb, solve_ocfbob
from hetcache.errors import BudgetExceeded, InvalidArgument
from hetcache.instances import random_instance
from hetcache.joint import greedy_half_fill, optimal_bandwidth
from hetcache.model import BandwidthAllocation, CachePlacement, DelayCoefficients, FileCatalog
from hetcache.oracles import grid_search_oracle, kkt_residual_bandwidth, structure_check
from hetcache.validate import kappa_series, random_placement, run_suite

MB = 1e6


def test_structure_check_examples():
    flags = structure_check(np.array([[1, 0.3, 0], [1, 0.3, 0.2], [0.5, 1, 0]]))
    assert [f.ok for f in flags] == [True, False, False]
    assert flags[1].monotone and not flags[1].single_fractional
    assert not flags[2].monotone
    assert structure_check(np.array([[1, 1 - 1e-12, 1e-12, 0]]))[0].ok


def test_greedy_fill_examples():
    cat3 = FileCatalog(np.full(3, MB), np.array([0.5, 0.3, 0.2]))
    np.testing.assert_array_equal(greedy_half_fill(cat3, 2 * MB / 2), [1, 0, 0])
    cat2 = FileCatalog(np.full(2, MB), np.array([0.7, 0.3]))
    np.testing.assert_allclose(greedy_half_fill(cat2, 3 * MB / 2), [1, 0.5])


def test_oceb_single_pico_split():
    scn, co = random_instance(0, 1, 3)
    rep = solve_oceb(scn, co)
    np.testing.assert_array_equal(rep.allocation.w, [scn.total_bandwidth / 2] * 2)
    assert all(r.ok for r in rep.structure)


def test_ocfbob_reserves_half_storage(scaled, scaled_coeffs):
    rep = solve_ocfbob(scaled, scaled_coeffs)
    np.testing.assert_allclose(rep.placement.cached_bits(scaled.catalog.lengths), scaled.storage / 2)
    alloc = optimal_bandwidth(scaled_coeffs, scaled.catalog, rep.placement, scaled.total_bandwidth)
    np.testing.assert_array_equal(rep.allocation.w, alloc.w)


def test_ordering_on_default(scaled, scaled_coeffs):
    icp = solve_icp(scaled, scaled_coeffs)
    assert icp.objective <= solve_oceb(scaled, scaled_coeffs).objective * (1 + 1e-9)
    assert icp.objective <= solve_ocfbob(scaled, scaled_coeffs).objective * (1 + 1e-9)


def test_greedy_init_trace_monotone(scaled, scaled_coeffs):
    rep = solve_icp(scaled, scaled_coeffs, init="greedy")
    obj = rep.trace.objectives
    assert np.all(np.diff(obj) <= 1e-12 * obj[:-1])


def test_unknown_names(scaled, scaled_coeffs):
    with pytest.raises(InvalidArgument):
        solve("lru", scaled, scaled_coeffs)
    with pytest.raises(InvalidArgument):
        solve_icp(scaled, scaled_coeffs, init="random")


def test_report_dict(scaled, scaled_coeffs):
    d = solve("icp", scaled, scaled_coeffs).to_dict()
    assert set(d) >= {"algorithm", "objective", "hit_ratio", "allocation", "placement", "delay",
                      "structure", "trace"}
    assert d["delay"]["total"] == pytest.approx(d["objective"])


def test_kkt_residual_optimal_and_equal():
    rng = np.random.default_rng(0)
    for seed in range(100):
        scn, co = random_instance(seed, 1 + seed % 3, 2 + seed % 4)
        p = random_placement(rng, scn)
        alloc = optimal_bandwidth(co, scn.catalog, p, scn.total_bandwidth)
        assert kkt_residual_bandwidth(co, scn.catalog, p, alloc) <= 1e-8
    scn, co = random_instance(3, 3, 4)
    p = random_placement(rng, scn)
    assert kkt_residual_bandwidth(co, scn.catalog, p, BandwidthAllocation.equal(scn.total_bandwidth, 3)) > 1e-3


def test_kkt_residual_degenerate_cases():
    cat = FileCatalog(np.ones(2), np.array([0.6, 0.4]))
    co0 = DelayCoefficients(np.array([1.0]), np.array([]))
    assert kkt_residual_bandwidth(co0, cat, CachePlacement(np.zeros((0, 2))), BandwidthAllocation([5.0])) == 0.0
    co1 = DelayCoefficients(np.array([1.0, 1.0]), np.array([1.0]))
    assert kkt_residual_bandwidth(co1, cat, CachePlacement(np.zeros((1, 2))),
                                  BandwidthAllocation([5.0, 0.0])) == math.inf


def test_grid_oracle_budget_guard():
    scn, co = random_instance(0, 3, 3)
    with pytest.raises(BudgetExceeded):
        grid_search_oracle(scn, co, "joint", step=1e-2)
    scn, co = random_instance(0, 1, 5)
    with pytest.raises(BudgetExceeded):
        grid_search_oracle(scn, co, "joint", step=1e-2)
    scn, co = random_instance(0, 1, 4)
    with pytest.raises(BudgetExceeded):
        grid_search_oracle(scn, co, "joint", step=1e-4)
    with pytest.raises(InvalidArgument):
        grid_search_oracle(scn, co, "joint", step=0.1)
    with pytest.raises(InvalidArgument):
        grid_search_oracle(scn, co, "fixed-bw", step=1e-2)


def brute_force(scn, co, step):
    # every grid point, vectorised; independent of the pruned scan
    levels = np.linspace(0, 1, round(1 / step) + 1)
    k = scn.n_picos * scn.n_files
    pts = np.stack(np.meshgrid(*([levels] * k), indexing="ij"), -1).reshape(-1, scn.n_picos, scn.n_files)
    used = pts @ scn.catalog.lengths
    ok = np.all(used <= scn.storage * (1 + 1e-9), axis=1)
    pts, used = pts[ok], used[ok]
    unc = (1 - pts) @ scn.catalog.weighted_lengths
    a = math.sqrt(scn.catalog.weighted_lengths.sum() * co.a.sum())
    with np.errstate(divide="ignore"):
        buf = np.where(unc > 0, scn.buffer_delay_rate * unc / (scn.storage - used), 0.0)
    val = (a + np.sqrt(co.b * unc).sum(axis=1)) ** 2 / scn.total_bandwidth + buf.sum(axis=1)
    return float(val.min())


@pytest.mark.parametrize("seed, m, f", [(0, 1, 3), (1, 2, 1), (2, 1, 2), (3, 1, 1)])
def test_pruned_grid_equals_brute_force(seed, m, f):
    scn, co = random_instance(seed, m, f)
    rep = grid_search_oracle(scn, co, "joint", step=1e-2)
    assert rep.oracle_objective == pytest.approx(brute_force(scn, co, 1e-2), rel=1e-12)


def test_grid_oracle_two_picos_vs_icp():
    from hetcache.joint import icp
    for seed in range(3):
        scn, co = random_instance(seed, 2, 3)
        p, _, _ = icp(scn, co)
        rep = grid_search_oracle(scn, co, "joint", step=1e-2, solver_placement=p)
        assert rep.gap <= 1e-3
        row = rep.csv_row()
        assert row[1] == "joint" and row[-1] == 1


def test_kappa_series_helper():
    assert kappa_series(1.0) == pytest.approx(0.7669883540794344, rel=1e-14)


def test_validate_suites_pass():
    for suite in ("special-fn", "bandwidth"):
        checks = run_suite(suite)
        assert checks and all(c.passed for c in checks), [c for c in checks if not c.passed]


def test_validate_unknown_suite():
    with pytest.raises(InvalidArgument):
        run_suite("nope")
