"""Analytical error bounds and channel-statistics fitting.

The core result is a union bound on the average bit error ratio of an
ML receiver over an enumerable candidate set: pairwise error
probabilities Q(sqrt(gamma_ex * ||H (x_t - x)||_F^2)) are weighted by
the Hamming distance between the candidate bit labels and averaged over
Monte Carlo channel draws. ``gamma_ex`` is half the linear SNR under
unit-energy transmit vectors and a unit-power reference path.

Also provided: a maximum-likelihood Rice amplitude fit with a
chi-squared goodness-of-fit test, and an empirical CDF helper.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import channel as channel_mod
from . import modem
from .errors import ConfigurationError, DegenerateInputError, DimensionError

__all__ = [
    "BoundConfig",
    "RicianFit",
    "q_function",
    "pairwise_error_probability",
    "bit_weight_matrix",
    "union_bound_aber_for_channels",
    "union_bound_aber",
    "fit_rician",
    "empirical_cdf",
]

MAX_CANDIDATES = 2**16


def q_function(w):
    """Gaussian tail probability Q(w) = P(N(0,1) > w)."""
    return 0.5 * special.erfc(np.asarray(w, dtype=np.float64) / np.sqrt(2.0))


def pairwise_error_probability(x_t, x, h, gamma_ex):
    """Probability of deciding x when x_t was sent, conditioned on H."""
    if gamma_ex < 0:
        raise ConfigurationError("gamma_ex must be nonnegative")
    d = np.asarray(h) @ (np.asarray(x_t) - np.asarray(x))
    return float(q_function(np.sqrt(gamma_ex * np.vdot(d, d).real)))


def bit_weight_matrix(m):
    """W[i, j] = Hamming distance between the m-bit labels of i and j."""
    idx = np.arange(2**m, dtype=np.int64)
    x = idx[:, None] ^ idx[None, :]
    w = np.zeros(x.shape, dtype=np.int64)
    while x.any():
        w += x & 1
        x >>= 1
    return w


def _pairwise_sq_distances(candidates, h_stack):
    """||H (x_i - x_j)||_F^2 for every pair, per channel draw.

    candidates: (n_cand, nt); h_stack: (n_draws, nr, nt).
    Returns (n_draws, n_cand, n_cand) real array.
    """
    hx = np.einsum("ct,nrt->ncr", candidates, h_stack)
    gram = np.einsum("ncr,nkr->nck", hx, hx.conj())
    nsq = np.einsum("ncc->nc", gram).real
    d = nsq[:, :, None] + nsq[:, None, :] - 2.0 * gram.real
    return np.maximum(d, 0.0)


def union_bound_aber_for_channels(candidates, h_stack, snr_grid_db, batch=64):
    """Union-bound ABER averaged over an explicit stack of channel draws.

    ``candidates`` must hold all 2**m vectors in bit-label order (row i
    belongs to bit block i); ``h_stack`` is (n_draws, nr, nt). Returns
    the raw bound per SNR point -- values above 0.5 are preserved.
    """
    x = np.asarray(candidates, dtype=np.complex128)
    hs = np.asarray(h_stack, dtype=np.complex128)
    if hs.ndim == 2:
        hs = hs[None, :, :]
    n_cand = x.shape[0]
    if n_cand < 2 or n_cand & (n_cand - 1):
        raise ConfigurationError("candidate count must be a power of two >= 2")
    if n_cand > MAX_CANDIDATES:
        raise ConfigurationError(
            f"candidate set of {n_cand} exceeds the {MAX_CANDIDATES} guard"
        )
    if hs.shape[2] != x.shape[1]:
        raise DimensionError("channel stack must be (n_draws, nr, nt) matching candidates")
    m = n_cand.bit_length() - 1
    weights = bit_weight_matrix(m) / m
    snr = np.asarray(snr_grid_db, dtype=np.float64)
    gamma_ex = 10.0 ** (snr / 10.0) / 2.0

    totals = np.zeros(snr.size)
    n_draws = hs.shape[0]
    for start in range(0, n_draws, batch):
        root_d = np.sqrt(_pairwise_sq_distances(x, hs[start : start + batch]))
        for s, g in enumerate(gamma_ex):
            totals[s] += np.einsum("nck,ck->", q_function(np.sqrt(g) * root_d), weights)
    return totals / (n_draws * n_cand)


@dataclass(frozen=True)
class BoundConfig:
    """Inputs of the Monte Carlo union bound."""

    scheme: str
    nt: int
    nr: int
    modulation_order: int
    fading: channel_mod.FadingModel
    snr_grid_db: tuple
    imbalance: channel_mod.PowerImbalance | None = field(default=None)
    n_channels: int = 10_000

    def __post_init__(self):
        if self.n_channels < 1:
            raise ConfigurationError("n_channels must be >= 1")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if list(grid) != sorted(grid):
            raise ConfigurationError("snr_grid_db must be sorted ascending")
        object.__setattr__(self, "snr_grid_db", grid)


def union_bound_aber(config, rng=None):
    """Monte Carlo union-bound ABER over the configured channel model."""
    if rng is None:
        rng = np.random.default_rng()
    constellation = modem.build_constellation(config.modulation_order)
    candidates = modem.candidate_vectors(config.scheme, config.nt, constellation)
    h_stack = channel_mod.draw_channels(
        config.n_channels, config.nr, config.nt, config.fading, config.imbalance, rng
    )
    return union_bound_aber_for_channels(candidates, h_stack, config.snr_grid_db)


@dataclass(frozen=True)
class RicianFit:
    """Rice amplitude fit: K factor, fitted parameters and GOF p-value."""

    k_factor_db: float
    mean_amplitude: float
    nu: float
    sigma: float
    gof_p_value: float
    iterations: int


def fit_rician(amplitude_samples, tol=1e-9, max_iterations=2000, gof_bins=20):
    """Maximum-likelihood Rice fit of nonnegative amplitude samples.

    Solves the ML stationarity conditions by fixed-point iteration on
    (nu, sigma) to ``tol``, reports K = nu^2 / (2 sigma^2) in dB, and
    attaches a chi-squared goodness-of-fit p-value computed from
    ``gof_bins`` equal-probability bins of the fitted distribution
    (bins merged if an expected count would fall below 5).
    """
    x = np.asarray(amplitude_samples, dtype=np.float64)
    if x.ndim != 1 or x.size < 1000:
        raise DegenerateInputError("need at least 1000 one-dimensional samples")
    if (x < 0).any() or not np.isfinite(x).all():
        raise DegenerateInputError("amplitude samples must be finite and >= 0")
    if np.ptp(x) == 0.0:
        raise DegenerateInputError("samples are all equal; no distribution to fit")

    power = float(np.mean(x**2))
    nu = float(np.mean(x))
    sigma_sq = max((power - nu**2) / 2.0, 1e-300)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        r = x * nu / sigma_sq
        # i1e/i0e keeps the Bessel ratio finite for large arguments.
        ratio = special.i1e(r) / special.i0e(r)
        nu_new = float(np.mean(x * ratio))
        sigma_sq_new = max((power - nu_new**2) / 2.0, 1e-300)
        moved = max(abs(nu_new - nu), abs(np.sqrt(sigma_sq_new) - np.sqrt(sigma_sq)))
        nu, sigma_sq = nu_new, sigma_sq_new
        if moved < tol:
            break
    sigma = float(np.sqrt(sigma_sq))
    k_linear = nu**2 / (2.0 * sigma_sq)
    k_db = float(10.0 * np.log10(k_linear)) if k_linear > 0 else float("-inf")
    p_value = _rice_gof_p_value(x, nu, sigma, gof_bins)
    return RicianFit(
        k_factor_db=k_db,
        mean_amplitude=float(np.mean(x)),
        nu=nu,
        sigma=sigma,
        gof_p_value=p_value,
        iterations=iterations,
    )


def _rice_gof_p_value(x, nu, sigma, n_bins):
    """Chi-squared GOF of samples against a fitted Rice(nu, sigma).

    Under the fit, (x/sigma)^2 is noncentral chi-squared with 2 degrees
    of freedom and noncentrality (nu/sigma)^2; bin edges are its
    equal-probability quantiles. Two parameters were estimated from the
    data, so the statistic has n_bins - 3 degrees of freedom.
    """
    n = x.size
    while n_bins > 3 and n / n_bins < 5:
        n_bins -= 1
    if n_bins <= 3:
        raise DegenerateInputError("too few samples for a chi-squared GOF")
    dist = stats.ncx2(df=2, nc=(nu / sigma) ** 2)
    edges = dist.ppf(np.arange(1, n_bins) / n_bins)
    counts, _ = np.histogram((x / sigma) ** 2, bins=np.concatenate(([0.0], edges, [np.inf])))
    expected = n / n_bins
    statistic = float(np.sum((counts - expected) ** 2) / expected)
    dof = n_bins - 1 - 2
    return float(stats.chi2.sf(statistic, dof))


def empirical_cdf(samples):
    """Empirical CDF: (sorted unique support, cumulative fractions).

    The returned step function is right-continuous and ends at 1.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise DegenerateInputError("empirical CDF of an empty sample set")
    support, counts = np.unique(x, return_counts=True)
    return support, np.cumsum(counts) / x.size
