"""Data-augmented ordinal probit block.

Latent ``z_i ~ N(W_i xi, 1)`` is truncated to the boundary interval of the
observed category; boundaries ``delta_1 < ... < delta_{M-1}`` carry an
(implicit) N(0, s0^2) prior restricted to the ordering constraint.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError, NumericalUnderflowError
from .stats import log_interval_prob, normal_cdf, normal_quantile, sample_mvn_canonical, sample_truncnorm

log = logging.getLogger(__name__)


@dataclass
class ProbitState:
    z: np.ndarray
    xi: np.ndarray
    delta: np.ndarray
    s0: float = 1.0
    fixed_delta: bool = False

    def copy(self):
        return ProbitState(self.z.copy(), self.xi.copy(), self.delta.copy(), self.s0,
                           self.fixed_delta)


def extended_boundaries(delta):
    return np.concatenate(([-np.inf], np.asarray(delta, dtype=float), [np.inf]))


def initial_boundaries(y, n_outcomes, s0=1.0):
    """Boundaries at the normal quantiles of the empirical cumulative proportions."""
    y = np.asarray(y)
    n = max(y.size, 1)
    cum = np.array([(y <= m).sum() for m in range(1, n_outcomes)], dtype=float) / n
    cum = np.clip(cum, 0.5 / n, 1.0 - 0.5 / n)
    delta = s0 * normal_quantile(cum)
    for m in range(1, delta.size):
        delta[m] = max(delta[m], delta[m - 1] + 1e-3)
    return delta


def init_probit(y, n_outcomes, q, mu0=None, s0=1.0):
    """Starting probit state; with M = 2 the single boundary is pinned at 0."""
    xi = np.zeros(q) if mu0 is None else np.array(mu0, dtype=float)
    if n_outcomes == 2:
        delta = np.zeros(1)
        fixed = True
    else:
        delta = initial_boundaries(y, n_outcomes, s0)
        fixed = False
    return ProbitState(z=np.zeros(len(y)), xi=xi, delta=delta, s0=s0, fixed_delta=fixed)


def draw_z(probit, design, y, rng):
    """Latent responses truncated to the interval of each observed category."""
    y = np.asarray(y)
    ext = extended_boundaries(probit.delta)
    eta = design.W @ probit.xi
    try:
        return sample_truncnorm(eta, 1.0, (ext[y - 1], ext[y]), rng)
    except NumericalUnderflowError as exc:
        lo, hi = ext[y - 1], ext[y]
        with np.errstate(invalid="ignore"):
            mass = normal_cdf(hi - eta) - normal_cdf(lo - eta)
        i = int(np.argmin(mass))
        raise NumericalUnderflowError(f"latent draw for subject {i}: {exc}") from exc


def update_xi(probit, design, mu0, Sigma0, rng, prior_precision=None):
    """Gaussian full conditional of the regression coefficients."""
    W = design.W
    mu0 = np.broadcast_to(np.asarray(mu0, dtype=float), (W.shape[1],))
    if prior_precision is None:
        prior_precision = np.linalg.inv(np.asarray(Sigma0, dtype=float))
    prec = prior_precision + W.T @ W
    lin = prior_precision @ mu0 + W.T @ probit.z
    return sample_mvn_canonical(lin, prec, rng)


def update_delta(probit, y, z, rng):
    """Boundary updates, one boundary at a time from the lowest up.

    Each boundary is drawn from N(0, s0^2) restricted to the gap between the
    largest latent value below it and the smallest above it (and to its
    neighbouring boundaries).  For M = 3 this is exactly the uniform-on-Phi
    transform scheme: ``delta_1 = Phi^-1(Phi(delta_2) u)`` with ``u`` uniform
    on ``(Phi(c11)/Phi(delta_2), Phi(c12)/Phi(delta_2))``, and likewise for
    ``delta_2``.  A boundary adjacent to an empty category is left unchanged.
    """
    delta = np.array(probit.delta, dtype=float)
    if probit.fixed_delta:
        return delta
    y = np.asarray(y)
    z = np.asarray(z)
    M = delta.size + 1
    for m in range(M - 1):
        below = z[y == m + 1]
        above = z[y == m + 2]
        if below.size == 0 or above.size == 0:
            log.debug("outcome category %d or %d is empty; boundary %d not updated",
                        m + 1, m + 2, m + 1)
            continue
        lo = below.max()
        hi = above.min()
        if m > 0:
            lo = max(lo, delta[m - 1])
        if m < M - 2:
            hi = min(hi, delta[m + 1])
        if not lo < hi:
            raise InvalidStateError(
                f"latent values inconsistent with boundaries near delta_{m + 1}: ({lo}, {hi})")
        delta[m] = sample_truncnorm(0.0, probit.s0, (lo, hi), rng)
    return delta


def category_log_probs(eta, y, delta, s0=1.0):
    """log Pr(y | eta) elementwise; ``eta`` broadcasts against ``y``."""
    ext = extended_boundaries(delta)
    y = np.asarray(y)
    return log_interval_prob((ext[y - 1] - eta) / s0, (ext[y] - eta) / s0)


def category_probs(eta, delta, s0=1.0):
    """(..., M) category probabilities for linear predictor(s) ``eta``."""
    ext = extended_boundaries(delta)
    cdf = normal_cdf((ext - np.asarray(eta)[..., None]) / s0)
    return np.diff(cdf, axis=-1)


def outcome_likelihood(probit, design, y):
    """Per-subject category probabilities and the joint outcome log-likelihood."""
    eta = design.W @ probit.xi
    probs = category_probs(eta, probit.delta, probit.s0)
    ll = float(category_log_probs(eta, y, probit.delta, probit.s0).sum())
    return probs, ll
