"""Access and fronthaul delay coefficients, by quadrature and by Monte Carlo.

The access coefficient of BS m is ``a_m = 1 / (kappa_m * E[Rbar_m])`` where
``kappa_m`` is the inverse mean of the (>= 1 conditioned) Poisson user count
in the region served by m and ``E[Rbar_m]`` the spectral efficiency averaged
over Rayleigh fading and a uniformly placed user. The equal per-user split of
the access band cancels the band itself, so ``a_m`` carries no bandwidth.

``E[Rbar_m]`` is computed as the integral of the rate CCDF over r (layer
cake), the CCDF being available in closed form for Rayleigh fading, then
averaged over the region with a polar tensor-product rule that is refined
until two successive levels agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, NumericError
from .model import DelayCoefficients, NetworkScenario, require_valid
from .special import exp_integral_E1_scaled, truncated_poisson_inverse_mean

__all__ = [
    "QuadSpec",
    "McEstimate",
    "fronthaul_coefficient",
    "access_coefficient",
    "location_mean_rate",
    "region_mean_rate",
    "rate_ccdf",
    "mc_access_coefficient",
    "mc_fronthaul_coefficient",
    "mc_location_mean_rate",
    "compute_coefficients",
]

LN2 = math.log(2.0)

# RNG stream identifiers; each (seed, stream, BS index) gets its own Philox key
_STREAM_ACCESS = 1
_STREAM_FRONTHAUL = 2
_STREAM_LOCATION = 3

_MC_BATCH = 200_000


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature controls for :func:`access_coefficient`.

    Attributes
    ----------
    rel_tol : float
        Stop refining the spatial rule once two successive levels differ by
        less than this (relative).
    tail : float
        The rate integral is truncated where the CCDF drops below this.
    rate_nodes : int
        Gauss-Legendre nodes per unit-width panel of the rate axis.
    radial_nodes, angular_nodes : int
        Starting resolution of the polar rule; both double per level.
    max_radial_nodes : int
        Refinement budget; exceeding it raises :class:`NumericError`.
    """

    rel_tol: float = 1e-5
    tail: float = 1e-12
    rate_nodes: int = 8
    radial_nodes: int = 16
    angular_nodes: int = 32
    max_radial_nodes: int = 512
    chunk_points: int = 2048


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples: int
    seed: int

    def agrees_with(self, reference, rel=0.02, sigmas=3.0):
        """True when ``|value - reference| <= max(rel * |reference|, sigmas * std_error)``."""
        return abs(self.value - reference) <= max(rel * abs(reference), sigmas * self.std_error)


def _generator(seed, stream, index):
    seq = np.random.SeedSequence([int(seed), stream, int(index)])
    return np.random.Generator(np.random.Philox(seq))


# --- fronthaul -----------------------------------------------------------------

def fronthaul_coefficient(macro_power, distance, alpha, noise_power):
    """Fronthaul coefficient ``b = ln 2 / (e^x E1(x))`` with ``x = sigma^2 d^alpha / P_0``.

    ``1/b`` is the ergodic spectral efficiency of a Rayleigh link at mean
    SNR ``1/x``.
    """
    for name, v in (("macro_power", macro_power), ("distance", distance),
                    ("alpha", alpha), ("noise_power", noise_power)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v!r}")
    x = noise_power * distance ** alpha / macro_power
    return LN2 / exp_integral_E1_scaled(x)


def mc_fronthaul_coefficient(macro_power, distance, alpha, noise_power,
                             samples=1_000_000, seed=0, index=0):
    """Monte Carlo estimate of the fronthaul coefficient (1 / E[log2(1 + SNR h)])."""
    x = noise_power * distance ** alpha / macro_power
    rng = _generator(seed, _STREAM_FRONTHAUL, index)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(_MC_BATCH, samples - done)
        r = np.log2(1.0 + rng.exponential(size=n) / x)
        total += float(r.sum())
        total_sq += float(np.dot(r, r))
        done += n
    mean, se = _mean_se(total, total_sq, samples)
    return McEstimate(1.0 / mean, se / mean ** 2, samples, seed)


def _mean_se(total, total_sq, n):
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n)


# --- per-location rate ---------------------------------------------------------

def rate_ccdf(r, inv_snr, ratios):
    """``P[Rbar > r]`` at fixed locations.

    Parameters
    ----------
    r : float or array_like
        Spectral-efficiency thresholds (bits/s/Hz).
    inv_snr : ndarray, shape (n,)
        ``sigma^2 / (P_m d_m^-alpha)`` per location.
    ratios : ndarray, shape (n, K)
        ``P_k d_k^-alpha / (P_m d_m^-alpha)`` for each interferer k.

    Returns
    -------
    ndarray, shape (n,) for scalar ``r`` else (n, len(r))
    """
    inv_snr = np.atleast_1d(np.asarray(inv_snr, dtype=float))
    ratios = np.asarray(ratios, dtype=float).reshape(inv_snr.size, -1)
    t = np.atleast_1d(np.expm1(np.asarray(r, dtype=float) * LN2))
    logp = -np.outer(inv_snr, t)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(ratios.shape[1]):
            logp -= np.log1p(np.outer(ratios[:, k], t))
    out = np.exp(logp)
    return out[:, 0] if np.ndim(r) == 0 else out


def _rate_grid(inv_snr, ratios, spec):
    """Composite Gauss-Legendre nodes/weights on [0, R] with CCDF(R) < tail."""
    big = 8.0
    while True:
        tail = rate_ccdf(big, inv_snr, ratios)
        if np.all(tail < spec.tail):
            break
        big *= 2.0
        if big > 4096:
            raise NumericError("rate CCDF does not decay; interference-free zero-noise location?",
                               achieved=float(np.max(tail)))
    n_panels = int(math.ceil(big))
    x, w = np.polynomial.legendre.leggauss(spec.rate_nodes)
    edges = np.linspace(0.0, big, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def location_mean_rate(inv_snr, ratios, spec: QuadSpec = QuadSpec()):
    """``E_h[Rbar]`` at fixed locations as ``int_0^inf P[Rbar > r] dr``.

    ``inv_snr`` has shape (n,), ``ratios`` shape (n, K); see :func:`rate_ccdf`.
    With no interferers this equals ``e^x E1(x) / ln 2``.
    """
    inv_snr = np.atleast_1d(np.asarray(inv_snr, dtype=float))
    ratios = np.asarray(ratios, dtype=float).reshape(inv_snr.size, -1)
    nodes, weights = _rate_grid(inv_snr, ratios, spec)
    out = np.empty(inv_snr.size)
    step = max(1, spec.chunk_points)
    for lo in range(0, inv_snr.size, step):
        sl = slice(lo, lo + step)
        out[sl] = rate_ccdf(nodes, inv_snr[sl], ratios[sl]) @ weights
    return out


def _link_terms(scn: NetworkScenario, m: int, pts):
    """Inverse SNR and interference ratios for users at ``pts`` served by BS m."""
    bs = scn.bs_positions
    p = scn.tx_powers
    alpha = scn.pathloss_exponent
    d = np.hypot(pts[:, None, 0] - bs[None, :, 0], pts[:, None, 1] - bs[None, :, 1])
    with np.errstate(divide="ignore"):
        logd = np.log(d)
    # gain_k / gain_m = (P_k / P_m) (d_m / d_k)^alpha, formed in log space
    log_rel = np.log(p / p[m])[None, :] + alpha * (logd[:, m:m + 1] - logd)
    others = [k for k in range(bs.shape[0]) if k != m]
    with np.errstate(over="ignore"):
        ratios = np.exp(log_rel[:, others])
        inv_snr = scn.noise_power * np.exp(alpha * logd[:, m]) / p[m]
    return inv_snr, ratios


def _polar_rule(centre, radius, n_rad, n_ang):
    x, w = np.polynomial.legendre.leggauss(n_rad)
    rho = 0.5 * radius * (x + 1.0)
    w_rho = 0.5 * radius * w * rho
    theta = (np.arange(n_ang) + 0.5) * (2 * math.pi / n_ang)
    pts = np.empty((n_rad, n_ang, 2))
    pts[..., 0] = centre[0] + rho[:, None] * np.cos(theta)[None, :]
    pts[..., 1] = centre[1] + rho[:, None] * np.sin(theta)[None, :]
    weights = np.broadcast_to(w_rho[:, None] * (2 * math.pi / n_ang), (n_rad, n_ang))
    return pts.reshape(-1, 2), weights.ravel()


def _disk_integral(scn, m, centre, radius, n_rad, n_ang, spec):
    pts, wts = _polar_rule(centre, radius, n_rad, n_ang)
    inv_snr, ratios = _link_terms(scn, m, pts)
    return float(location_mean_rate(inv_snr, ratios, spec) @ wts)


def _region_rate_integral(scn, m, n_rad, n_ang, spec):
    """Integral of the per-location mean rate over the region served by m."""
    if m > 0:
        return _disk_integral(scn, m, scn.pico_positions[m - 1], scn.pico_radii[m - 1],
                              n_rad, n_ang, spec)
    total = _disk_integral(scn, 0, (0.0, 0.0), scn.macro_radius, n_rad, n_ang, spec)
    for k in range(scn.n_picos):
        total -= _disk_integral(scn, 0, scn.pico_positions[k], scn.pico_radii[k],
                                n_rad, n_ang, spec)
    return total


def region_mean_rate(scn: NetworkScenario, m: int, spec: QuadSpec = QuadSpec()):
    """``E[Rbar_m]``: per-location mean rate averaged uniformly over region m."""
    area = scn.region_area(m)
    n_rad, n_ang = spec.radial_nodes, spec.angular_nodes
    prev = _region_rate_integral(scn, m, n_rad, n_ang, spec) / area
    change = math.inf
    while True:
        n_rad *= 2
        n_ang *= 2
        if n_rad > spec.max_radial_nodes:
            raise NumericError(f"spatial quadrature for BS {m} did not reach rel_tol={spec.rel_tol}",
                               achieved=change, index=m)
        cur = _region_rate_integral(scn, m, n_rad, n_ang, spec) / area
        change = abs(cur - prev) / abs(cur)
        if change < spec.rel_tol:
            return cur
        prev = cur


def access_coefficient(scn: NetworkScenario, m: int, spec: QuadSpec = QuadSpec()):
    """Access coefficient ``a_m = 1 / (kappa_m E[Rbar_m])`` by quadrature."""
    kappa = truncated_poisson_inverse_mean(scn.user_density * scn.region_area(m))
    return 1.0 / (kappa * region_mean_rate(scn, m, spec))


# --- Monte Carlo ----------------------------------------------------------------

def _sample_region(rng, scn, m, n):
    if m > 0:
        c = scn.pico_positions[m - 1]
        rad = scn.pico_radii[m - 1] * np.sqrt(rng.random(n))
        th = 2 * math.pi * rng.random(n)
        return np.column_stack([c[0] + rad * np.cos(th), c[1] + rad * np.sin(th)])
    out = np.empty((0, 2))
    while out.shape[0] < n:
        k = int((n - out.shape[0]) * 1.2) + 16
        rad = scn.macro_radius * np.sqrt(rng.random(k))
        th = 2 * math.pi * rng.random(k)
        pts = np.column_stack([rad * np.cos(th), rad * np.sin(th)])
        dp = np.hypot(pts[:, None, 0] - scn.pico_positions[None, :, 0],
                      pts[:, None, 1] - scn.pico_positions[None, :, 1])
        keep = np.all(dp >= scn.pico_radii[None, :], axis=1)
        out = np.vstack([out, pts[keep]])
    return out[:n]


def _sample_user_counts(rng, mean, n):
    # inverse CDF restricted to U >= 1
    p0 = math.exp(-mean)
    u = p0 + (1.0 - p0) * rng.random(n)
    k = stats.poisson.ppf(u, mean)
    return np.maximum(k, 1.0)


def _sample_rates(rng, inv_snr, ratios):
    n = inv_snr.size
    h = rng.exponential(size=(n, ratios.shape[1] + 1))
    sinr = h[:, 0] / (inv_snr + np.sum(ratios * h[:, 1:], axis=1))
    return np.log2(1.0 + sinr)


def mc_access_coefficient(scn: NetworkScenario, m: int, samples=1_000_000, seed=0):
    """Monte Carlo estimate of ``a_m``.

    Draws a truncated-Poisson user count, a uniform location in the region
    served by m and i.i.d. Exp(1) channel gains for every BS; the standard
    error comes from the delta method on ``1 / (mean(1/U) mean(Rbar))``.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = _generator(seed, _STREAM_ACCESS, m)
    mean_users = scn.user_density * scn.region_area(m)
    s_inv = s_inv2 = s_r = s_r2 = 0.0
    done = 0
    while done < samples:
        n = min(_MC_BATCH, samples - done)
        inv_u = 1.0 / _sample_user_counts(rng, mean_users, n)
        pts = _sample_region(rng, scn, m, n)
        inv_snr, ratios = _link_terms(scn, m, pts)
        r = _sample_rates(rng, inv_snr, ratios)
        s_inv += float(inv_u.sum())
        s_inv2 += float(inv_u @ inv_u)
        s_r += float(r.sum())
        s_r2 += float(r @ r)
        done += n
    m1, se1 = _mean_se(s_inv, s_inv2, samples)
    m2, se2 = _mean_se(s_r, s_r2, samples)
    value = 1.0 / (m1 * m2)
    se = value * math.hypot(se1 / m1, se2 / m2)
    return McEstimate(value, se, samples, seed)


def mc_location_mean_rate(inv_snr, ratios=(), samples=1_000_000, seed=0):
    """Monte Carlo ``E_h[Rbar]`` at one fixed location."""
    rng = _generator(seed, _STREAM_LOCATION, 0)
    ratios = np.asarray(ratios, dtype=float).reshape(1, -1)
    s = s2 = 0.0
    done = 0
    while done < samples:
        n = min(_MC_BATCH, samples - done)
        r = _sample_rates(rng, np.full(n, float(inv_snr)), np.repeat(ratios, n, axis=0))
        s += float(r.sum())
        s2 += float(r @ r)
        done += n
    mean, se = _mean_se(s, s2, samples)
    return McEstimate(mean, se, samples, seed)


def compute_coefficients(scn: NetworkScenario, spec: QuadSpec = QuadSpec()) -> DelayCoefficients:
    """All ``a_0..a_M`` by quadrature and ``b_1..b_M`` in closed form."""
    require_valid(scn)
    a = []
    for m in range(scn.n_picos + 1):
        try:
            a.append(access_coefficient(scn, m, spec))
        except NumericError as exc:
            raise NumericError(f"BS {m}: {exc}", achieved=exc.achieved, index=m) from exc
    d = scn.fronthaul_distances
    b = [fronthaul_coefficient(scn.tx_powers[0], d[m], scn.pathloss_exponent, scn.noise_power)
         for m in range(scn.n_picos)]
    meta = {"rel_tol": spec.rel_tol, "tail": spec.tail}
    return DelayCoefficients(np.array(a), np.array(b), meta)
