"""Compiled inner loops for the per-(subject, variable) Gibbs updates."""
import numpy as np
from numba import njit


@njit(cache=True)
def search_rows(cdf_rows, group, u):
    """Index of the first entry of ``cdf_rows[group[t]]`` exceeding ``u[t]``."""
    K = cdf_rows.shape[1]
    out = np.empty(group.size, dtype=np.int64)
    for t in range(group.size):
        row = cdf_rows[group[t]]
        lo, hi = 0, K - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if row[mid] > u[t]:
                hi = mid
            else:
                lo = mid + 1
        out[t] = lo
    return out


@njit(cache=True)
def draw_global_flags(theta0, theta1, C, L, sub, codes, nu, u):
    n, p = codes.shape
    G = np.empty((n, p), dtype=np.int8)
    for i in range(n):
        s = sub[i]
        c = C[i]
        for j in range(p):
            r = codes[i, j]
            a = nu[s, j] * theta0[c, j, r]
            b = (1.0 - nu[s, j]) * theta1[s, L[i, j], j, r]
            G[i, j] = 1 if u[i, j] * (a + b) < a else 0
    return G


@njit(cache=True)
def global_loglik_kernel(log_theta0_t, G, codes):
    """``log_theta0_t`` is log theta0 laid out (p, D, K)."""
    n, p = codes.shape
    K = log_theta0_t.shape[2]
    out = np.zeros((n, K))
    for i in range(n):
        for j in range(p):
            if G[i, j]:
                row = log_theta0_t[j, codes[i, j]]
                for k in range(K):
                    out[i, k] += row[k]
    return out


@njit(cache=True)
def global_counts_kernel(C, G, codes, K, D):
    n, p = codes.shape
    out = np.zeros((K, p, D))
    for i in range(n):
        c = C[i]
        for j in range(p):
            if G[i, j]:
                out[c, j, codes[i, j]] += 1.0
    return out


@njit(cache=True)
def local_counts_kernel(sub, L, G, codes, S, Ks, D):
    n, p = codes.shape
    out = np.zeros((S, Ks, p, D))
    for i in range(n):
        s = sub[i]
        for j in range(p):
            if not G[i, j]:
                out[s, L[i, j], j, codes[i, j]] += 1.0
    return out
