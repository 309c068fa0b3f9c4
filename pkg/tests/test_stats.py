import mpmath as mp
import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from osrpc.errors import DecompositionError, InvalidParameterError, NumericalUnderflowError
from osrpc.stats import (TruncationBounds, cholesky_lower, dirichlet_rows, log_interval_prob,
                         normal_cdf, normal_logcdf, normal_quantile, rng_stream, sample_dirichlet,
                         sample_mvn, sample_mvn_canonical, sample_truncnorm)

mp.mp.dps = 40


def mp_cdf(x):
    return mp.ncdf(mp.mpf(x))


def mp_quantile(p):
    # bisection on the high-precision CDF: independent of any inverse-erf routine
    lo, hi = mp.mpf(-40), mp.mpf(40)
    for _ in range(200):
        mid = (lo + hi) / 2
        if mp_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


@pytest.mark.parametrize("x", [-37.5, -20.0, -8.0, -1.96, -0.3, 0.0, 0.7, 1.96, 5.0, 8.0])
def test_normal_cdf_matches_high_precision(x):
    ref = float(mp_cdf(x))
    assert normal_cdf(x) == pytest.approx(ref, rel=1e-13, abs=1e-300)
    assert normal_logcdf(x) == pytest.approx(float(mp.log(mp_cdf(x))), rel=1e-12)


def test_normal_cdf_known_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-15)


@pytest.mark.parametrize("p", [1e-300, 1e-12, 0.001, 0.025, 0.5, 0.8, 0.975, 1 - 1e-10])
def test_normal_quantile_matches_bisection(p):
    ref = float(mp_quantile(mp.mpf(p)))
    assert normal_quantile(p) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_normal_quantile_examples():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_normal_quantile_rejects_out_of_range(p):
    with pytest.raises(InvalidParameterError):
        normal_quantile(p)


@pytest.mark.parametrize("lo,hi", [(-1.0, 1.0), (8.0, 9.0), (-40.0, -39.0), (30.0, np.inf),
                                   (-np.inf, -25.0), (0.5, 0.5000001), (-np.inf, np.inf)])
def test_log_interval_prob(lo, hi):
    with mp.workdps(400):
        ref = mp.log(mp.ncdf(mp.mpf(hi)) - mp.ncdf(mp.mpf(lo)))
    assert log_interval_prob(lo, hi) == pytest.approx(float(ref), rel=1e-9, abs=1e-12)


def test_rng_stream_determinism_and_independence():
    a = rng_stream(5, 1, 2).random(10)
    b = rng_stream(5, 1, 2).random(10)
    c = rng_stream(5, 1, 3).random(10)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    with pytest.raises(InvalidParameterError):
        rng_stream(None)


# ---------------------------------------------------------------------------
# Dirichlet
# ---------------------------------------------------------------------------

def test_dirichlet_moments():
    rng = np.random.default_rng(0)
    a = np.array([2.0, 5.0, 3.0])
    draws = sample_dirichlet(np.broadcast_to(a, (200_000, 3)), rng)
    np.testing.assert_allclose(draws.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(draws.mean(axis=0), a / a.sum(), atol=2e-3)
    var = a * (a.sum() - a) / (a.sum() ** 2 * (a.sum() + 1))
    np.testing.assert_allclose(draws.var(axis=0), var, rtol=0.03)


@pytest.mark.parametrize("a", [[0.05, 0.05, 0.05], [0.3, 2.0], [1e-3, 1.0, 4.0]])
def test_dirichlet_small_concentration_marginals(a):
    a = np.asarray(a)
    rng = np.random.default_rng(1)
    draws = sample_dirichlet(np.broadcast_to(a, (50_000, a.size)), rng)
    assert np.all(draws >= 0) and np.all(np.isfinite(draws))
    np.testing.assert_allclose(draws.sum(axis=1), 1.0, atol=1e-12)
    # first component ~ Beta(a0, sum - a0); compared on the logit scale, built from
    # log(x0) - log(rest) so draws near 0 or 1 do not collapse into ties
    a0, b0 = a[0], a.sum() - a[0]
    with np.errstate(divide="ignore"):
        logit = np.log(draws[:, 0]) - np.log(draws[:, 1:].sum(axis=1))

    def cdf(v):
        v = np.asarray(v)
        return np.where(v < 0, stats.beta.cdf(expit(v), a0, b0),
                        stats.beta.sf(expit(-v), b0, a0))
    # values below float range are clamped, so test the mass below a cut separately
    cut = np.log(1e-250)
    f_cut = float(cdf(cut))
    below = logit <= cut
    assert abs(below.mean() - f_cut) <= 5 * np.sqrt(f_cut * (1 - f_cut) / below.size) + 1e-12
    p = stats.kstest(logit[~below], lambda v: (cdf(v) - f_cut) / (1 - f_cut)).pvalue
    assert p > 1e-3


def test_dirichlet_mask_gives_exact_zeros():
    rng = np.random.default_rng(2)
    a = np.array([[1.0, 2.0, 3.0, 9.0], [0.5, 0.5, 7.0, 1.0]])
    mask = np.array([[True, True, True, False], [True, False, True, True]])
    for _ in range(100):
        w = dirichlet_rows(a, rng, mask=mask)
        assert np.all(w[~mask] == 0.0)
        assert np.all(w[mask] > 0.0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("a", [[], [1.0, 0.0], [1.0, -2.0], [np.inf, 1.0]])
def test_dirichlet_rejects_bad_concentration(a):
    with pytest.raises(InvalidParameterError):
        sample_dirichlet(a, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# truncated normal
# ---------------------------------------------------------------------------

def _mp_trunc_cdf(lo, hi):
    zlo, zhi = mp_cdf(lo), mp_cdf(hi)

    def cdf(v):
        return np.array([float((mp_cdf(t) - zlo) / (zhi - zlo)) for t in np.ravel(v)])
    return cdf


@pytest.mark.parametrize("lo,hi", [(-1.0, 2.0), (0.0, np.inf), (-np.inf, -1.5), (3.0, 3.5),
                                   (5.0, 6.0), (-9.0, -8.5), (10.0, np.inf), (-np.inf, -30.0),
                                   (4.2, 4.21)])
def test_truncnorm_distribution(lo, hi):
    rng = np.random.default_rng(abs(hash((lo, hi))) % 2**32)
    x = sample_truncnorm(np.zeros(20_000), 1.0, (lo, hi), rng)
    assert np.all((x > lo) & (x < hi))
    p = stats.kstest(x, _mp_trunc_cdf(lo, hi)).pvalue
    assert p > 1e-3


def test_truncnorm_mean_sd_and_scalar():
    rng = np.random.default_rng(3)
    x = sample_truncnorm(2.0, 0.5, TruncationBounds(2.0, np.inf), rng)
    assert isinstance(x, float) and x > 2.0
    xs = sample_truncnorm(np.full(100_000, 2.0), 0.5, TruncationBounds(2.0, np.inf), rng)
    # half-normal mean: mu + sd * sqrt(2/pi)
    assert xs.mean() == pytest.approx(2.0 + 0.5 * np.sqrt(2 / np.pi), abs=3e-3)


def test_truncnorm_broadcast_shape():
    rng = np.random.default_rng(4)
    out = sample_truncnorm(np.zeros((3, 4)), 1.0, (np.full(4, -1.0), 1.0), rng)
    assert out.shape == (3, 4)
    assert np.all(np.abs(out) < 1)


def test_truncnorm_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidParameterError):
        TruncationBounds(1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        sample_truncnorm(0.0, 1.0, (2.0, 1.0), rng)
    with pytest.raises(InvalidParameterError):
        sample_truncnorm(0.0, 0.0, (0.0, 1.0), rng)
    with pytest.raises(NumericalUnderflowError):
        sample_truncnorm(0.0, 1.0, (60.0, 60.0 + 1e-14), rng)


# ---------------------------------------------------------------------------
# multivariate normal
# ---------------------------------------------------------------------------

def test_cholesky_matches_numpy_and_reports_minor():
    a = np.array([[4.0, 2.0, 0.4], [2.0, 3.0, 0.5], [0.4, 0.5, 2.0]])
    np.testing.assert_allclose(cholesky_lower(a), np.linalg.cholesky(a), atol=1e-14)
    with pytest.raises(DecompositionError, match="order 2"):
        cholesky_lower(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(DecompositionError):
        cholesky_lower(np.array([[1.0, 0.5], [0.2, 1.0]]))


def test_mvn_moments():
    rng = np.random.default_rng(5)
    mean = np.array([1.0, -2.0])
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    draws = np.array([sample_mvn(mean, cov, rng) for _ in range(40_000)])
    np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.03)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.05)


def test_mvn_canonical_matches_moment_form():
    rng = np.random.default_rng(6)
    P = np.array([[3.0, 1.0], [1.0, 2.0]])
    h = np.array([1.0, 0.5])
    draws = np.array([sample_mvn_canonical(h, P, rng) for _ in range(40_000)])
    cov = np.linalg.inv(P)
    np.testing.assert_allclose(draws.mean(axis=0), cov @ h, atol=0.02)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)
