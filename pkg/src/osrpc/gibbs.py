"""Gibbs sampler for the ordinal supervised robust profile clustering model
(osRPC) and its all-global special case (osLCM).

A chain owns two random streams: ``rng.glob`` drives the global-cluster and
probit blocks, ``rng.loc`` drives the local block (G, L, lambda, theta1, nu,
beta).  Keeping them apart makes an osRPC chain with nu pinned at 1 reproduce
an osLCM chain draw for draw.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from . import probit as pb
from .data import build_design_matrix
from .errors import DegenerateFitError, InvalidParameterError, NumericalError
from .likelihood import global_loglik, joint_loglik, safe_log, cluster_outcome_loglik
from .stats import dirichlet_rows, rng_stream
from .trace import ChainTrace

log = logging.getLogger(__name__)

MODES = ("osrpc", "oslcm")
NU_CEILING = 1.0 - 1e-12


@dataclass
class Hyperparameters:
    alpha: float = 1.0
    eta: float = 1.0
    a_beta: float = 1.0
    b_beta: float = 1.0
    mu0: float = 0.0           # scalar (broadcast) or length-q vector
    sigma0: float = 1.0        # Sigma0 = sigma0 * I unless Sigma0 is given
    Sigma0: np.ndarray = None
    s0: float = 1.0
    K0: int = 50
    Ks: int = 50
    nu_init: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "eta", "a_beta", "b_beta", "sigma0", "s0"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0")
        if int(self.K0) < 1 or int(self.Ks) < 1:
            raise InvalidParameterError("K0 and Ks must be >= 1")
        if not 0.0 < self.nu_init <= 1.0:
            raise InvalidParameterError("nu_init must lie in (0, 1]")

    def xi_prior(self, q):
        """(mu0, Sigma0, Sigma0^-1) for a q-column design."""
        mu0 = np.broadcast_to(np.asarray(self.mu0, dtype=float), (q,)).copy()
        if self.Sigma0 is not None:
            Sig = np.asarray(self.Sigma0, dtype=float)
            if Sig.shape != (q, q):
                raise InvalidParameterError(f"Sigma0 has shape {Sig.shape}, design needs ({q}, {q})")
        else:
            Sig = self.sigma0 * np.eye(q)
        return mu0, Sig, np.linalg.inv(Sig)


@dataclass
class SamplerConfig:
    adaptive_iters: int = 10_000
    adaptive_burnin: int = 5_000
    fixed_iters: int = 25_000
    fixed_burnin: int = 15_000
    thin: int = 10
    nonempty_threshold: float = 0.05
    permute_every: int = 10
    mode: str = "osrpc"
    seed: int = None
    nu_fixed: float = None     # pin nu (skips its update); 1.0 gives an all-global fit
    log_every: int = None      # defaults to thin

    def __post_init__(self):
        self.mode = str(self.mode).lower()
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}")
        if not 0 <= self.adaptive_burnin < self.adaptive_iters:
            raise InvalidParameterError("adaptive burn-in must be < adaptive iterations")
        if not 0 <= self.fixed_burnin < self.fixed_iters:
            raise InvalidParameterError("fixed burn-in must be < fixed iterations")
        if self.thin < 1 or self.permute_every < 0:
            raise InvalidParameterError("thin must be >= 1 and permute_every >= 0")
        if not 0.0 < self.nonempty_threshold < 1.0:
            raise InvalidParameterError("nonempty_threshold must lie in (0, 1)")
        if self.nu_fixed is not None and not 0.0 < self.nu_fixed <= 1.0:
            raise InvalidParameterError("nu_fixed must lie in (0, 1]")

    @property
    def n_draws(self):
        return (self.fixed_iters - self.fixed_burnin) // self.thin


@dataclass
class ChainRng:
    glob: np.random.Generator
    loc: np.random.Generator

    @classmethod
    def from_seed(cls, seed, *key):
        return cls(rng_stream(seed, *key, 0), rng_stream(seed, *key, 1))

    def get_state(self):
        return {"glob": self.glob.bit_generator.state, "loc": self.loc.bit_generator.state}

    def set_state(self, st):
        self.glob.bit_generator.state = st["glob"]
        self.loc.bit_generator.state = st["loc"]


@dataclass
class ModelState:
    """Full parameter set.  Cluster labels are 0-based.

    ``G`` is 1 where a variable follows the subject's global pattern.
    ``local_mask[s, l]`` marks local clusters in use for subpopulation s.
    """

    C: np.ndarray
    L: np.ndarray
    G: np.ndarray
    pi: np.ndarray
    lam: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray
    nu: np.ndarray
    beta: np.ndarray
    probit: pb.ProbitState
    local_mask: np.ndarray = None

    def __post_init__(self):
        if self.local_mask is None:
            self.local_mask = np.ones(self.lam.shape, dtype=bool)

    @property
    def K(self):
        return self.pi.shape[0]

    @property
    def Ks(self):
        return self.lam.shape[1]

    def copy(self):
        out = replace(self, **{k: getattr(self, k).copy() for k in (
            "C", "L", "G", "pi", "lam", "theta0", "theta1", "nu", "beta", "local_mask")})
        out.probit = self.probit.copy()
        return out


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def sample_categorical_log(logp, rng):
    """One categorical draw per row of unnormalised log-probabilities."""
    logp = np.atleast_2d(logp)
    m = logp.max(axis=1, keepdims=True)
    bad = ~np.isfinite(m[:, 0])
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        err = NumericalError(f"all category log-probabilities are -inf for row {row}")
        err.row = row
        raise err
    w = np.exp(logp - m)
    cum = np.cumsum(w, axis=1)
    u = rng.random(logp.shape[0]) * cum[:, -1]
    return np.minimum((cum <= u[:, None]).sum(axis=1), logp.shape[1] - 1)


def _grouped_categorical(cdf_rows, group, rng):
    """Draw from categorical row ``cdf_rows[group[t]]`` for every t."""
    u = rng.random(group.shape)
    return kernels.search_rows(np.ascontiguousarray(cdf_rows), group.ravel(), u.ravel()).reshape(group.shape)


def _normalised_cdf(logw):
    m = logw.max(axis=-1, keepdims=True)
    w = np.exp(logw - m)
    cdf = np.cumsum(w, axis=-1)
    cdf /= cdf[..., -1:]
    cdf[..., -1] = 1.0
    return cdf


# ---------------------------------------------------------------------------
# full conditionals
# ---------------------------------------------------------------------------

def update_G(state, dataset, hyper, rng):
    """Global/local indicator per (subject, variable), Bernoulli(p_ij)."""
    u = rng.random((dataset.n, dataset.p))
    return kernels.draw_global_flags(state.theta0, state.theta1, state.C, state.L, dataset.sub,
                                     dataset.codes, state.nu, u)


def update_C(state, dataset, rng):
    """Global cluster per subject: pi x global-pattern likelihood x outcome likelihood."""
    pr = state.probit
    with np.errstate(divide="ignore"):
        logp = np.log(state.pi)[None, :] + global_loglik(dataset, state.theta0, state.G)
    logp = logp + cluster_outcome_loglik(dataset, pr.xi, pr.delta, pr.s0, state.K)
    try:
        return sample_categorical_log(logp, rng)
    except NumericalError as exc:
        raise NumericalError(f"update_C: subject {exc.row} has zero probability under every cluster") from exc


def update_pi(state, hyper, rng):
    counts = np.bincount(state.C, minlength=state.K)
    return dirichlet_rows(hyper.alpha + counts, rng)


def update_lambda(state, dataset, hyper, rng):
    S, Ks = state.lam.shape
    idx = dataset.sub[:, None] * Ks + state.L
    counts = np.bincount(idx.ravel(), minlength=S * Ks).reshape(S, Ks)
    return dirichlet_rows(hyper.alpha + counts, rng, mask=state.local_mask)


def update_L(state, dataset, rng):
    """Local cluster per (subject, variable).

    Where the variable is local (G = 0) the weight of cluster l is
    ``lambda_l theta1[l, j, x_ij]``; where it is global the local label does
    not enter the likelihood and is drawn from ``lambda`` alone.
    """
    S, Ks, p, D = state.theta1.shape
    with np.errstate(divide="ignore"):
        loglam = np.log(state.lam)                                   # (S, Ks)
    logw = loglam[:, None, None, :] + safe_log(state.theta1).transpose(0, 2, 3, 1)
    logw = np.where(state.local_mask[:, None, None, :], logw, -np.inf)
    prior = np.broadcast_to(loglam[:, None, None, :], (S, p, 1, Ks))
    table = _normalised_cdf(np.concatenate([logw, prior], axis=2))  # (S, p, D+1, Ks)
    r = np.where(state.G == 0, dataset.codes, D)
    group = (dataset.sub[:, None] * p + np.arange(p)[None, :]) * (D + 1) + r
    return _grouped_categorical(table.reshape(-1, Ks), group, rng)


def global_counts(state, dataset):
    K, p, D = state.theta0.shape
    return kernels.global_counts_kernel(state.C, state.G, dataset.codes, K, D)


def local_counts(state, dataset):
    S, Ks, p, D = state.theta1.shape
    return kernels.local_counts_kernel(dataset.sub, state.L, state.G, dataset.codes, S, Ks, D)


def update_theta0(state, dataset, hyper, rng):
    mask = np.broadcast_to(dataset.level_mask, state.theta0.shape)
    return dirichlet_rows(hyper.eta + global_counts(state, dataset), rng, mask=mask)


def update_theta1(state, dataset, hyper, rng):
    mask = np.broadcast_to(dataset.level_mask, state.theta1.shape)
    return dirichlet_rows(hyper.eta + local_counts(state, dataset), rng, mask=mask)


def update_theta(state, dataset, hyper, rng):
    """Both pattern tables; ``rng`` is a :class:`ChainRng` or a single generator."""
    rg = getattr(rng, "glob", rng)
    rl = getattr(rng, "loc", rng)
    return update_theta0(state, dataset, hyper, rg), update_theta1(state, dataset, hyper, rl)


def update_nu_beta(state, dataset, hyper, rng):
    """nu from its Beta conditional, then beta from its Gamma conditional."""
    S = dataset.n_subpops
    g_sum = dataset.subpop_indicator @ state.G
    n_s = np.bincount(dataset.sub, minlength=S)[:, None]
    nu = rng.beta(1.0 + g_sum, state.beta[:, None] + (n_s - g_sum))
    nu = np.minimum(nu, NU_CEILING)
    rate = hyper.b_beta - np.log1p(-nu).sum(axis=1)
    beta = rng.gamma(hyper.a_beta + dataset.p, 1.0 / rate)
    return nu, beta


def permute_labels(state, perm):
    """Relabel global clusters: old label k becomes ``perm[k]``."""
    S = state.theta1.shape[0]
    inv = np.argsort(perm)
    state.C = perm[state.C]
    state.pi = state.pi[inv]
    state.theta0 = state.theta0[inv]
    xi = state.probit.xi
    state.probit.xi = np.concatenate([xi[:S], xi[S:][inv]])
    return state


# ---------------------------------------------------------------------------
# initialisation and sweeps
# ---------------------------------------------------------------------------

def initial_state(dataset, hyper, config, rng, K=None, Ks=None):
    K = int(hyper.K0 if K is None else K)
    local = config.mode == "osrpc"
    Ks = int(hyper.Ks if Ks is None else Ks) if local else 1
    n, p, D, S = dataset.n, dataset.p, dataset.d_max, dataset.n_subpops
    rg, rl = rng.glob, rng.loc

    C = rg.integers(0, K, size=n)
    if local:
        nu0 = hyper.nu_init if config.nu_fixed is None else config.nu_fixed
        G = (rl.random((n, p)) < nu0).astype(np.int8)
        L = rl.integers(0, Ks, size=(n, p))
        nu = np.full((S, p), min(nu0, NU_CEILING) if config.nu_fixed is None else config.nu_fixed)
    else:
        G = np.ones((n, p), dtype=np.int8)
        L = np.zeros((n, p), dtype=np.int64)
        nu = np.ones((S, p))
    state = ModelState(
        C=C, L=L, G=G, pi=np.full(K, 1.0 / K), lam=np.full((S, Ks), 1.0 / Ks),
        theta0=np.zeros((K, p, D)), theta1=np.zeros((S, Ks, p, D)) + dataset.level_mask / dataset.d[:, None],
        nu=nu, beta=np.full(S, hyper.a_beta / hyper.b_beta), probit=None)
    state.pi = update_pi(state, hyper, rg)
    state.theta0 = update_theta0(state, dataset, hyper, rg)
    if local:
        state.lam = update_lambda(state, dataset, hyper, rl)
        state.theta1 = update_theta1(state, dataset, hyper, rl)
    q = S + K
    mu0, _, _ = hyper.xi_prior(q)
    state.probit = pb.init_probit(dataset.y, dataset.n_outcomes, q, mu0=mu0, s0=hyper.s0)
    design = build_design_matrix(dataset, state.C, K)
    state.probit.z = pb.draw_z(state.probit, design, dataset.y, rg)
    return state


def sweep(state, dataset, config, hyper, rng, xi_prior=None):
    """One full scan in place: G, C, pi, lambda, L, theta, nu/beta, z, xi, delta."""
    rg, rl = rng.glob, rng.loc
    local = config.mode == "osrpc"
    if local:
        state.G = update_G(state, dataset, hyper, rl)
    state.C = update_C(state, dataset, rg)
    state.pi = update_pi(state, hyper, rg)
    if local:
        state.lam = update_lambda(state, dataset, hyper, rl)
        state.L = update_L(state, dataset, rl)
    state.theta0 = update_theta0(state, dataset, hyper, rg)
    if local:
        state.theta1 = update_theta1(state, dataset, hyper, rl)
        if config.nu_fixed is None:
            state.nu, state.beta = update_nu_beta(state, dataset, hyper, rl)
    design = build_design_matrix(dataset, state.C, state.K)
    mu0, Sig, prec0 = xi_prior if xi_prior is not None else hyper.xi_prior(design.q)
    pr = state.probit
    pr.z = pb.draw_z(pr, design, dataset.y, rg)
    pr.xi = pb.update_xi(pr, design, mu0, Sig, rg, prior_precision=prec0)
    pr.delta = pb.update_delta(pr, dataset.y, pr.z, rg)
    return state


def state_loglik(state, dataset):
    """Joint log-likelihood at the current state (C and L summed out, G given)."""
    pr = state.probit
    return joint_loglik(dataset, state.pi, state.theta0, state.lam, state.theta1, state.G,
                        pr.xi, pr.delta, pr.s0)


def local_occupancy(state, dataset):
    """(S, Ks) fraction of locally-generated (i, j) pairs in each local cluster."""
    S, Ks = state.lam.shape
    i, j = np.nonzero(state.G == 0)
    counts = np.bincount(dataset.sub[i] * Ks + state.L[i, j], minlength=S * Ks).reshape(S, Ks)
    tot = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, tot, out=np.zeros(counts.shape), where=tot > 0)


# ---------------------------------------------------------------------------
# two-phase schedule with checkpointing
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    K_active: int
    Ks_active: np.ndarray
    trace: ChainTrace
    log_rows: list = field(default_factory=list)
    state: ModelState = None


class FitSession:
    """Adaptive phase, pruning, then the fixed phase, resumable at any sweep.

    ``run(stop_after=k)`` returns after ``k`` more sweeps so a checkpoint can be
    written and the session restored later with :meth:`from_checkpoint`.
    """

    def __init__(self, dataset, config, hyper, seed=None, stream=(0,)):
        self.dataset = dataset
        self.config = config
        self.hyper = hyper
        self.seed = config.seed if seed is None else seed
        if self.seed is None:
            raise InvalidParameterError("a seed is required")
        self.stream = tuple(stream)
        self.rng = ChainRng.from_seed(self.seed, *self.stream)
        self.phase = "adaptive"
        self.it = 0
        self.state = initial_state(dataset, hyper, config, self.rng)
        S = dataset.n_subpops
        self.occ_global = np.zeros(self.state.K)
        self.occ_local = np.zeros((S, self.state.Ks))
        self.n_occ = 0
        self.K_active = None
        self.Ks_active = None
        self.draws = []
        self.log_rows = []
        self._prior = hyper.xi_prior(S + self.state.K)

    @classmethod
    def fixed_only(cls, dataset, K, Ks, config, hyper, seed=None, stream=(0,)):
        """Session that skips the adaptive phase and starts with ``K`` global clusters."""
        sess = cls.__new__(cls)
        sess.dataset, sess.config, sess.hyper = dataset, config, hyper
        sess.seed = config.seed if seed is None else seed
        if sess.seed is None:
            raise InvalidParameterError("a seed is required")
        sess.stream = tuple(stream)
        sess.rng = ChainRng.from_seed(sess.seed, *sess.stream)
        S = dataset.n_subpops
        Ks = np.broadcast_to(np.asarray(Ks if Ks is not None else 1, dtype=int), (S,)).copy()
        if config.mode != "osrpc":
            Ks[:] = 1
        st = initial_state(dataset, hyper, config, sess.rng, K=K, Ks=int(Ks.max()))
        if config.mode == "osrpc":
            st.local_mask = np.arange(st.Ks)[None, :] < Ks[:, None]
            st.lam = np.where(st.local_mask, st.lam, 0.0)
            st.lam /= st.lam.sum(axis=1, keepdims=True)
            st.L = np.minimum(st.L, (Ks[dataset.sub] - 1)[:, None])
        sess.state = st
        sess.phase, sess.it = "fixed", 0
        sess.occ_global = np.zeros(st.K)
        sess.occ_local = np.zeros((S, st.Ks))
        sess.n_occ = 0
        sess.K_active, sess.Ks_active = int(K), Ks
        sess.draws, sess.log_rows = [], []
        sess._prior = hyper.xi_prior(S + st.K)
        return sess

    # -- phases -------------------------------------------------------------
    def _adaptive_step(self):
        cfg = self.config
        sweep(self.state, self.dataset, cfg, self.hyper, self.rng, self._prior)
        if self.it >= cfg.adaptive_burnin:
            self.occ_global += np.bincount(self.state.C, minlength=self.state.K) / self.dataset.n
            self.occ_local += local_occupancy(self.state, self.dataset)
            self.n_occ += 1
        self._maybe_log()
        self.it += 1
        if self.it == cfg.adaptive_iters:
            self._prune()

    def _prune(self):
        cfg, ds = self.config, self.dataset
        mean_g = self.occ_global / max(self.n_occ, 1)
        keep = np.flatnonzero(mean_g >= cfg.nonempty_threshold)
        if keep.size == 0:
            raise DegenerateFitError(
                f"no global cluster reached {cfg.nonempty_threshold:.0%} average occupancy")
        keep = keep[np.argsort(-mean_g[keep], kind="stable")]
        self.K_active = int(keep.size)
        st = self.state
        remap = np.full(st.K, -1)
        remap[keep] = np.arange(keep.size)
        st.pi = st.pi[keep] / st.pi[keep].sum()
        st.theta0 = st.theta0[keep]
        st.C = np.where(remap[st.C] >= 0, remap[st.C], 0)

        if cfg.mode == "osrpc":
            mean_l = self.occ_local / max(self.n_occ, 1)
            S = ds.n_subpops
            keeps = []
            for s in range(S):
                ks = np.flatnonzero(mean_l[s] >= cfg.nonempty_threshold)
                if ks.size == 0:
                    ks = np.array([int(np.argmax(mean_l[s]))])
                keeps.append(ks[np.argsort(-mean_l[s][ks], kind="stable")])
            self.Ks_active = np.array([k.size for k in keeps])
            Kmax = int(self.Ks_active.max())
            lam = np.zeros((S, Kmax))
            th1 = np.zeros((S, Kmax) + st.theta1.shape[2:])
            mask = np.zeros((S, Kmax), dtype=bool)
            L = np.zeros_like(st.L)
            for s, ks in enumerate(keeps):
                lam[s, :ks.size] = st.lam[s, ks] / st.lam[s, ks].sum()
                th1[s, :ks.size] = st.theta1[s, ks]
                mask[s, :ks.size] = True
                rm = np.full(st.Ks, -1)
                rm[ks] = np.arange(ks.size)
                rows = ds.subpop_members[s]
                L[rows] = np.maximum(rm[st.L[rows]], 0)
            st.lam, st.theta1, st.local_mask, st.L = lam, th1, mask, L
        else:
            self.Ks_active = np.ones(ds.n_subpops, dtype=int)

        # probit block restarts at the prior mean for the new column count
        q = ds.n_subpops + self.K_active
        self._prior = self.hyper.xi_prior(q)
        st.probit.xi = self._prior[0].copy()
        rg = self.rng.glob
        st.C = update_C(st, ds, rg)
        if cfg.mode == "osrpc":
            st.L = update_L(st, ds, self.rng.loc)
        design = build_design_matrix(ds, st.C, st.K)
        st.probit.z = pb.draw_z(st.probit, design, ds.y, rg)
        log.info("adaptive phase kept K=%d global clusters, local %s", self.K_active,
                 self.Ks_active.tolist())
        self.phase = "fixed"
        self.it = 0

    def _fixed_step(self):
        cfg = self.config
        sweep(self.state, self.dataset, cfg, self.hyper, self.rng, self._prior)
        if cfg.permute_every and (self.it + 1) % cfg.permute_every == 0 and self.state.K > 1:
            permute_labels(self.state, self.rng.glob.permutation(self.state.K))
        if self.it >= cfg.fixed_burnin and (self.it + 1 - cfg.fixed_burnin) % cfg.thin == 0:
            self.draws.append(self._snapshot())
        self._maybe_log()
        self.it += 1
        if self.it == cfg.fixed_iters:
            self.phase = "done"

    def _snapshot(self):
        st = self.state
        return {
            "iteration": self.it, "C": st.C.copy(), "pi": st.pi.copy(),
            "theta0": st.theta0.copy(), "lam": st.lam.copy(), "theta1": st.theta1.copy(),
            "nu": st.nu.copy(), "beta": st.beta.copy(), "xi": st.probit.xi.copy(),
            "delta": st.probit.delta.copy(), "loglik": state_loglik(st, self.dataset),
        }

    def _maybe_log(self):
        every = self.config.log_every or self.config.thin
        if (self.it + 1) % every:
            return
        counts = np.bincount(self.state.C, minlength=self.state.K)
        self.log_rows.append({
            "phase": self.phase, "iteration": self.it + 1,
            "loglik": state_loglik(self.state, self.dataset),
            "k_occupied": int((counts > 0).sum()),
            "k_over_threshold": int((counts >= self.config.nonempty_threshold * self.dataset.n).sum()),
        })

    # -- driver -------------------------------------------------------------
    def run(self, stop_after=None, checkpoint=None, checkpoint_every=None):
        done = 0
        while self.phase != "done":
            if stop_after is not None and done >= stop_after:
                break
            if self.phase == "adaptive":
                self._adaptive_step()
            else:
                self._fixed_step()
            done += 1
            if checkpoint is not None and checkpoint_every and done % checkpoint_every == 0:
                self.save(checkpoint)
        if checkpoint is not None:
            self.save(checkpoint)
        return self

    @property
    def finished(self):
        return self.phase == "done"

    def result(self):
        if not self.finished:
            raise InvalidParameterError("fit has not finished")
        return FitResult(K_active=self.K_active, Ks_active=self.Ks_active,
                         trace=self.trace(), log_rows=list(self.log_rows), state=self.state)

    def trace(self):
        meta = {
            "mode": self.config.mode, "K_active": self.K_active,
            "Ks_active": None if self.Ks_active is None else [int(k) for k in self.Ks_active],
            "seed": self.seed, "stream": list(self.stream), "s0": self.hyper.s0,
            "n_subpops": self.dataset.n_subpops, "thin": self.config.thin,
            "fixed_burnin": self.config.fixed_burnin, "fixed_iters": self.config.fixed_iters,
        }
        return ChainTrace.from_draws(self.draws, meta)

    # -- checkpointing ------------------------------------------------------
    def save(self, path):
        from .trace import save_checkpoint
        save_checkpoint(self, path)

    @classmethod
    def from_checkpoint(cls, path, dataset):
        from .trace import load_checkpoint
        return load_checkpoint(cls, path, dataset)


def run_adaptive(dataset, config, hyper, seed=None, stream=(0,)):
    """Adaptive phase only; returns (K_active, Ks_active, session positioned at the fixed phase)."""
    sess = FitSession(dataset, config, hyper, seed=seed, stream=stream)
    sess.run(stop_after=config.adaptive_iters)
    return sess.K_active, sess.Ks_active, sess


def run_fixed(dataset, K_active, Ks_active, config, hyper, seed=None, stream=(0,), session=None):
    """Fixed phase with ``K_active`` global clusters; returns the :class:`ChainTrace`.

    Continues ``session`` (from :func:`run_adaptive`) when given, otherwise
    starts cold from a fresh state with the requested cluster counts.
    """
    if session is None:
        session = FitSession.fixed_only(dataset, K_active, Ks_active, config, hyper,
                                        seed=seed, stream=stream)
    session.run()
    return session.trace()


def fit(dataset, config, hyper, seed=None, stream=(0,)):
    """Adaptive then fixed phase; returns a :class:`FitResult`."""
    return FitSession(dataset, config, hyper, seed=seed, stream=stream).run().result()
