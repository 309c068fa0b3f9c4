"""Small frozen datasets and sampler states shared across the tests."""
import numpy as np

from osrpc.data import CategoricalDataset
from osrpc.gibbs import ChainRng, Hyperparameters, ModelState, SamplerConfig
from osrpc.probit import ProbitState


def tiny_dataset():
    """n=6, p=2 (3 and 2 levels), S=2, M=3."""
    x = np.array([[1, 1], [2, 2], [3, 1], [1, 2], [2, 1], [3, 2]])
    return CategoricalDataset(x=x, d=np.array([3, 2]), s=np.array([1, 1, 1, 2, 2, 2]),
                              y=np.array([1, 2, 3, 1, 3, 2]), n_subpops=2, n_outcomes=3)


def tiny_state(dataset=None, K=2, Ks=2):
    ds = dataset or tiny_dataset()
    n, p, D, S = ds.n, ds.p, ds.d_max, ds.n_subpops
    theta0 = np.zeros((K, p, D))
    theta0[:, 0, :3] = [[0.6, 0.3, 0.1], [0.2, 0.3, 0.5]][:K] if K <= 2 else 1 / 3
    theta0[:, 1, :2] = [[0.7, 0.3], [0.4, 0.6]][:K] if K <= 2 else 0.5
    theta1 = np.zeros((S, Ks, p, D))
    theta1[..., 0, :3] = 1.0 / 3
    theta1[..., 1, :2] = [0.5, 0.5]
    theta1[:, 0, 0, :3] = [0.1, 0.1, 0.8]
    probit = ProbitState(z=np.array([-1.0, 0.2, 1.5, -0.8, 1.2, 0.1]),
                         xi=np.array([0.1, -0.2, 0.3, -0.1][:S + K] if S + K == 4 else np.zeros(S + K)),
                         delta=np.array([-0.3, 0.8]))
    return ModelState(
        C=np.array([0, 1, 1, 0, 1, 0]) % K, L=np.array([[0, 1], [1, 0], [0, 0], [1, 1], [0, 1], [1, 0]]) % Ks,
        G=np.array([[1, 0], [1, 1], [0, 1], [1, 1], [0, 0], [1, 0]], dtype=np.int8),
        pi=np.full(K, 1.0 / K), lam=np.full((S, Ks), 1.0 / Ks), theta0=theta0, theta1=theta1,
        nu=np.array([[0.7, 0.4], [0.9, 0.2]]), beta=np.array([1.5, 0.7]), probit=probit)


def random_dataset(rng, n=None, p=None, S=None, M=None, dmax=4):
    S = S or int(rng.integers(1, 4))
    n = n or int(rng.integers(S, S + 10))
    p = p or int(rng.integers(1, 5))
    M = M or int(rng.integers(2, 5))
    d = rng.integers(2, dmax + 1, size=p)
    x = 1 + (rng.random((n, p)) * d).astype(int)
    s = np.concatenate([np.arange(1, S + 1), rng.integers(1, S + 1, size=n - S)])
    y = rng.integers(1, M + 1, size=n)
    return CategoricalDataset(x=x, d=d, s=s, y=y, n_subpops=S, n_outcomes=M)


def small_config(mode="osrpc", **kw):
    base = dict(adaptive_iters=40, adaptive_burnin=20, fixed_iters=40, fixed_burnin=10, thin=2,
                mode=mode, seed=11)
    base.update(kw)
    return SamplerConfig(**base)


def small_hyper(**kw):
    base = dict(K0=6, Ks=4)
    base.update(kw)
    return Hyperparameters(**base)


def chain_rng(seed=0):
    return ChainRng.from_seed(seed, 0)
