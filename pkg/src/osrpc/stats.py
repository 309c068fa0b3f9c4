"""Seedable samplers and normal-distribution special functions.

Every sampler takes an explicit :class:`numpy.random.Generator`; nothing here
touches global random state.  Streams are derived from a root seed with
:func:`rng_stream` so that a ``(seed, key...)`` pair always reproduces the
same draw sequence.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import DecompositionError, InvalidParameterError, NumericalUnderflowError

RngStream = np.random.Generator

# Both standardized bounds beyond this on the same side -> rejection sampler.
TAIL_SWITCH = 4.0
MIN_INTERVAL_MASS = 1e-300


def rng_stream(seed, *key):
    """Return the generator for root ``seed`` and stream key ``key``.

    Keys are non-negative integers, e.g. ``rng_stream(seed, replicate, chain)``.
    Distinct keys give statistically independent streams (numpy
    ``SeedSequence`` spawn keys); equal keys give identical streams.
    """
    if seed is None or int(seed) < 0:
        raise InvalidParameterError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class TruncationBounds:
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InvalidParameterError(
                f"truncation bounds must satisfy lower < upper, got ({self.lower}, {self.upper})")


# ---------------------------------------------------------------------------
# normal distribution functions
# ---------------------------------------------------------------------------

def normal_cdf(x):
    """Standard normal CDF (Cephes erf/erfc based, ~1e-16 relative error)."""
    return ndtr(x)


def normal_logcdf(x):
    return log_ndtr(x)


def normal_quantile(p):
    """Inverse of :func:`normal_cdf`; ``p`` must lie strictly inside (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise InvalidParameterError("normal_quantile requires 0 < p < 1")
    return ndtri(p)


def log_interval_prob(lo, hi):
    """``log(Phi(hi) - Phi(lo))`` evaluated without cancellation in either tail."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    # reflect intervals lying mostly in the upper tail onto the lower tail
    with np.errstate(invalid="ignore"):
        flip = (lo + hi) > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    lb = log_ndtr(b)
    la = log_ndtr(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lb + np.log1p(-np.exp(la - lb))
    return out


# ---------------------------------------------------------------------------
# simplex draws
# ---------------------------------------------------------------------------

def sample_dirichlet(concentration, rng):
    """Draw from Dirichlet(``concentration``) along the last axis.

    Leading axes are treated as a batch of independent draws.
    """
    a = np.asarray(concentration, dtype=float)
    if a.ndim == 0 or a.shape[-1] == 0:
        raise InvalidParameterError("Dirichlet concentration must be a non-empty vector")
    if not np.all(a > 0) or not np.all(np.isfinite(a)):
        raise InvalidParameterError("Dirichlet concentrations must be finite and > 0")
    return dirichlet_rows(a, rng)


def dirichlet_rows(a, rng, mask=None):
    """Batched Dirichlet via normalised Gamma draws.

    Entries with ``mask == False`` get probability exactly 0 and consume no
    randomness from the simplex proper (a Gamma draw is still made for them
    so the stream layout does not depend on the mask).
    """
    a = np.asarray(a, dtype=float)
    if mask is None:
        mask = np.ones(a.shape, dtype=bool)
    safe = np.where(mask, a, 1.0)
    if not np.any(safe[mask] < 1.0):
        g = rng.gamma(safe)
        g = np.where(mask, g, 0.0)
        tot = g.sum(axis=-1, keepdims=True)
        return g / tot
    # Small shapes: Gamma(a) = Gamma(a+1) * U**(1/a), kept in log space.
    lg = np.log(rng.gamma(safe + 1.0)) + np.log(rng.random(safe.shape)) / safe
    lg = np.where(mask, lg, -np.inf)
    m = lg.max(axis=-1, keepdims=True)
    w = np.exp(lg - m)
    w = w / w.sum(axis=-1, keepdims=True)
    # keep strictly positive where allowed
    w = np.where(mask, np.maximum(w, np.finfo(float).tiny), 0.0)
    return w / w.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# truncated normal
# ---------------------------------------------------------------------------

def _tail_rejection(a, b, rng):
    """Standard normal restricted to (a, b) with a >= TAIL_SWITCH (Robert, 1995)."""
    out = np.empty(a.shape)
    todo = np.arange(a.size)
    rate = 0.5 * (a + np.sqrt(a * a + 4.0))
    narrow = (b - a) < 1.0 / a
    while todo.size:
        aa, bb, nn, rr = a[todo], b[todo], narrow[todo], rate[todo]
        u = rng.random(todo.size)
        # narrow intervals: uniform proposal; wide ones: translated exponential
        x_unif = aa + (np.where(np.isfinite(bb), bb, aa + 1.0) - aa) * rng.random(todo.size)
        x_exp = aa + rng.exponential(size=todo.size) / rr
        x = np.where(nn, x_unif, x_exp)
        log_acc = np.where(nn, -0.5 * (x * x - aa * aa), -0.5 * (x - rr) ** 2)
        ok = (np.log(u) < log_acc) & (x < bb) & (x > aa)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def sample_truncnorm(mean, sd, bounds, rng):
    """Normal(``mean``, ``sd``) draws restricted to an open interval.

    ``bounds`` is a :class:`TruncationBounds` or a ``(lower, upper)`` pair of
    scalars/arrays; everything broadcasts.  Inverse-CDF sampling is used unless
    both standardized bounds lie beyond ``TAIL_SWITCH`` on the same side, in
    which case an exact rejection sampler takes over.
    """
    if isinstance(bounds, TruncationBounds):
        lower, upper = bounds.lower, bounds.upper
    else:
        lower, upper = bounds
    mean, sd, lower, upper = np.broadcast_arrays(
        np.asarray(mean, dtype=float), np.asarray(sd, dtype=float),
        np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    shape = mean.shape
    mean, sd, lower, upper = (np.atleast_1d(v).ravel() for v in (mean, sd, lower, upper))
    if np.any(~(sd > 0)):
        raise InvalidParameterError("truncated normal requires sd > 0")
    if np.any(~(lower < upper)):
        raise InvalidParameterError("truncated normal requires lower < upper")

    a = (lower - mean) / sd
    b = (upper - mean) / sd
    # work in the lower tail where Phi keeps full relative precision
    flip = (a + b) > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    plo = ndtr(lo)
    phi = ndtr(hi)
    mass = phi - plo
    bad = ~(mass >= MIN_INTERVAL_MASS)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NumericalUnderflowError(
            f"truncation interval ({lower[k]}, {upper[k]}) has negligible mass "
            f"under Normal({mean[k]}, {sd[k]})")

    x = np.empty_like(lo)
    tail = hi < -TAIL_SWITCH
    central = ~tail
    if central.any():
        u = rng.random(int(central.sum()))
        p = plo[central] + u * mass[central]
        x[central] = ndtri(p)
    if tail.any():
        # reflect (lo, hi) in the far lower tail to (-hi, -lo) in the upper tail
        x[tail] = -_tail_rejection(-hi[tail], -lo[tail], rng)
    x = np.clip(x, np.nextafter(lo, np.inf), np.nextafter(hi, -np.inf))
    x = np.where(flip, -x, x)
    out = mean + sd * x
    # guard against rounding in the affine map
    out = np.clip(out, np.nextafter(lower, np.inf), np.nextafter(upper, -np.inf))
    return float(out[0]) if shape == () else out.reshape(shape)


# ---------------------------------------------------------------------------
# multivariate normal
# ---------------------------------------------------------------------------

def cholesky_lower(a):
    """Lower Cholesky factor; raises :class:`DecompositionError` naming the failing minor."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DecompositionError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12):
        raise DecompositionError("matrix is not symmetric")
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise DecompositionError(
            f"matrix is not positive definite: leading minor of order {info} fails")
    if info < 0:
        raise DecompositionError(f"dpotrf rejected argument {-info}")
    return c


def sample_mvn(mean, covariance, rng):
    """One draw from MVN(``mean``, ``covariance``)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    chol = cholesky_lower(np.atleast_2d(covariance))
    if chol.shape[0] != mean.shape[0]:
        raise InvalidParameterError("mean and covariance dimensions differ")
    return mean + chol @ rng.standard_normal(mean.shape[0])


def sample_mvn_canonical(linear, precision, rng):
    """Draw from MVN(P^-1 h, P^-1) given precision ``P`` and ``h = linear``.

    This is the Gaussian full-conditional form; it avoids forming P^-1.
    """
    chol = cholesky_lower(precision)
    mu = solve_triangular(chol.T, solve_triangular(chol, linear, lower=True), lower=False)
    eps = solve_triangular(chol.T, rng.standard_normal(mu.shape[0]), lower=False)
    return mu + eps
