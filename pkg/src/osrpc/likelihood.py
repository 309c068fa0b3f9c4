"""Mixture log-likelihoods shared by the sampler and post-processing."""
import numpy as np
from scipy.special import logsumexp

from .kernels import global_loglik_kernel
from .probit import category_log_probs


def safe_log(a):
    """Elementwise log with padded (zero) slots mapped to 0 instead of -inf."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), 0.0)


def global_loglik(dataset, theta0, G=None):
    """(n, K) sum over variables with ``G_ij = 1`` of log theta0[k, j, x_ij]."""
    if G is None:
        G = np.ones(dataset.codes.shape, dtype=np.int8)
    return global_loglik_kernel(np.ascontiguousarray(safe_log(theta0).transpose(1, 2, 0)),
                                np.ascontiguousarray(G, dtype=np.int8),
                                dataset.codes)


def cluster_outcome_loglik(dataset, xi, delta, s0, K):
    """(n, K) log Pr(y_i | subject i placed in cluster k) under the cell-means probit.

    The linear predictor only depends on (subpopulation, cluster), so the
    (S, M, K) table is evaluated once and gathered.
    """
    S, M = dataset.n_subpops, dataset.n_outcomes
    eta = xi[:S][:, None, None] + xi[S:S + K][None, None, :]
    cats = np.arange(1, M + 1)[None, :, None]
    table = category_log_probs(eta, cats, delta, s0)          # (S, M, K)
    return table[dataset.sub, dataset.y - 1]


def local_marginal(lam, theta1):
    """(S, p, D) local-model probability of each level, clusters summed out."""
    return np.einsum("sl,sljr->sjr", lam, theta1)


def joint_loglik(dataset, pi, theta0, lam, theta1, G, xi, delta, s0=1.0):
    """Log-likelihood of all subjects given the global/local indicators ``G``.

    Global cluster and local cluster memberships are summed out; the outcome
    enters through the global mixture.
    """
    K = theta0.shape[0]
    glob = np.log(pi)[None, :] + global_loglik(dataset, theta0, G) + cluster_outcome_loglik(
        dataset, xi, delta, s0, K)
    with np.errstate(divide="ignore"):
        total = logsumexp(glob, axis=1).sum()
    loc = G == 0
    if loc.any():
        marg = local_marginal(lam, theta1)
        i, j = np.nonzero(loc)
        total += np.log(marg[dataset.sub[i], j, dataset.codes[i, j]]).sum()
    return float(total)


def cluster_scores(dataset, pi, theta0, lam, theta1, nu, xi, delta, s0=1.0):
    """(n, K) log of pi_k Pr(x_i, y_i | C_i = k) with G and L summed out.

    ``lam``/``theta1`` may be None when every variable is global (nu = 1).
    """
    K, p, D = theta0.shape
    S = dataset.n_subpops
    marg = local_marginal(lam, theta1) if lam is not None else np.zeros((S, p, D))
    out = np.empty((dataset.n, K))
    outcome = cluster_outcome_loglik(dataset, xi, delta, s0, K)
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
    for s, members in enumerate(dataset.subpop_members):
        nu_s = nu[s][None, :, None]
        tab = safe_log(nu_s * theta0 + (1.0 - nu_s) * marg[s][None]).reshape(K, p * D)
        oh = dataset.onehot[members].reshape(members.size, p * D)
        out[members] = oh @ tab.T + logpi[None, :] + outcome[members]
    return out


def observed_subject_loglik(dataset, pi, theta0, lam, theta1, nu, xi, delta, s0=1.0):
    """(n,) observed-data log-likelihood per subject (C, G, L summed out)."""
    return logsumexp(cluster_scores(dataset, pi, theta0, lam, theta1, nu, xi, delta, s0), axis=1)


def observed_loglik(dataset, pi, theta0, lam, theta1, nu, xi, delta, s0=1.0):
    return float(observed_subject_loglik(dataset, pi, theta0, lam, theta1, nu, xi, delta, s0).sum())


def assignment_log_probs(dataset, pi, theta0, lam, theta1, nu, xi, delta, s0=1.0):
    """(n, K) normalised log Pr(C_i = k | parameters, data)."""
    sc = cluster_scores(dataset, pi, theta0, lam, theta1, nu, xi, delta, s0)
    return sc - logsumexp(sc, axis=1, keepdims=True)
