"""Chain traces and resumable checkpoints.

Both are single ``.npz`` archives.  A trace stores one stacked array per
parameter block, leading axis = retained draw, plus a JSON ``meta`` entry::

    iteration (T,)        fixed-phase sweep index of each draw
    C         (T, n)      0-based global assignments
    pi        (T, K)      theta0 (T, K, p, D)
    lam       (T, S, Ks)  theta1 (T, S, Ks, p, D)
    nu        (T, S, p)   beta   (T, S)
    xi        (T, S + K)  delta  (T, M - 1)
    loglik    (T,)        joint log-likelihood at the draw

A checkpoint additionally holds the live sampler state, the random stream
states and the adaptive-phase occupancy accumulators.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidStateError

BLOCKS = ("iteration", "C", "pi", "theta0", "lam", "theta1", "nu", "beta", "xi", "delta", "loglik")
PERMUTED_BLOCKS = ("pi", "theta0")


@dataclass
class ChainTrace:
    arrays: dict
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_draws(cls, draws, meta):
        if not draws:
            return cls({}, dict(meta))
        arrays = {k: np.stack([d[k] for d in draws]) for k in BLOCKS}
        return cls(arrays, dict(meta))

    def __len__(self):
        return 0 if not self.arrays else self.arrays["C"].shape[0]

    def __getitem__(self, key):
        return self.arrays[key]

    @property
    def K(self):
        return self.arrays["pi"].shape[1]

    @property
    def n_subpops(self):
        return int(self.meta["n_subpops"])

    def draw(self, t):
        return {k: v[t] for k, v in self.arrays.items()}

    def copy(self):
        return ChainTrace({k: v.copy() for k, v in self.arrays.items()}, json.loads(json.dumps(self.meta)))

    def save(self, path):
        path = Path(path)
        np.savez_compressed(path, meta=np.array(json.dumps(self.meta)), **self.arrays)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            arrays = {k: z[k] for k in z.files if k != "meta"}
        return cls(arrays, meta)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_STATE_ARRAYS = ("C", "L", "G", "pi", "lam", "theta0", "theta1", "nu", "beta", "local_mask")


def save_checkpoint(session, path):
    st = session.state
    arrays = {f"state_{k}": getattr(st, k) for k in _STATE_ARRAYS}
    arrays.update(
        probit_z=st.probit.z, probit_xi=st.probit.xi, probit_delta=st.probit.delta,
        occ_global=session.occ_global, occ_local=session.occ_local,
    )
    if session.Ks_active is not None:
        arrays["Ks_active"] = np.asarray(session.Ks_active)
    for k in BLOCKS:
        if session.draws:
            arrays[f"draws_{k}"] = np.stack([d[k] for d in session.draws])
    meta = {
        "phase": session.phase, "it": session.it, "n_occ": session.n_occ,
        "K_active": session.K_active, "seed": session.seed, "stream": list(session.stream),
        "rng": _jsonable(session.rng.get_state()), "n_draws": len(session.draws),
        "s0": st.probit.s0, "fixed_delta": bool(st.probit.fixed_delta),
        "log_rows": session.log_rows,
        "config": _jsonable(vars(session.config)), "hyper": _jsonable(vars(session.hyper)),
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, meta=np.array(json.dumps(meta)), **arrays)
    tmp.replace(path)


def load_checkpoint(cls, path, dataset):
    from . import probit as pb
    from .gibbs import ChainRng, Hyperparameters, ModelState, SamplerConfig

    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        arr = {k: z[k] for k in z.files if k != "meta"}
    config = SamplerConfig(**meta["config"])
    hyper_kw = dict(meta["hyper"])
    if hyper_kw.get("Sigma0") is not None:
        hyper_kw["Sigma0"] = np.asarray(hyper_kw["Sigma0"])
    hyper = Hyperparameters(**hyper_kw)
    if arr["state_C"].shape[0] != dataset.n:
        raise InvalidStateError("checkpoint was written for a dataset of different size")

    sess = cls.__new__(cls)
    sess.dataset, sess.config, sess.hyper = dataset, config, hyper
    sess.seed, sess.stream = meta["seed"], tuple(meta["stream"])
    sess.rng = ChainRng.from_seed(sess.seed, *sess.stream)
    sess.rng.set_state(_restore_ints(meta["rng"]))
    probit = pb.ProbitState(z=arr["probit_z"], xi=arr["probit_xi"], delta=arr["probit_delta"],
                            s0=meta["s0"], fixed_delta=meta["fixed_delta"])
    sess.state = ModelState(**{k: arr[f"state_{k}"] for k in _STATE_ARRAYS}, probit=probit)
    sess.phase, sess.it, sess.n_occ = meta["phase"], meta["it"], meta["n_occ"]
    sess.occ_global, sess.occ_local = arr["occ_global"], arr["occ_local"]
    sess.K_active = meta["K_active"]
    sess.Ks_active = arr.get("Ks_active")
    sess.log_rows = meta["log_rows"]
    n_draws = meta["n_draws"]
    sess.draws = [{k: arr[f"draws_{k}"][t] for k in BLOCKS} for t in range(n_draws)]
    for d in sess.draws:
        d["iteration"] = int(d["iteration"])
        d["loglik"] = float(d["loglik"])
    sess._prior = hyper.xi_prior(dataset.n_subpops + sess.state.K)
    return sess


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, int) and obj.bit_length() > 62:
        # 128-bit PCG64 state words do not survive every JSON reader
        return {"__bigint__": str(obj)}
    return obj


def _restore_ints(obj):
    if isinstance(obj, dict):
        if set(obj) == {"__bigint__"}:
            return int(obj["__bigint__"])
        return {k: _restore_ints(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore_ints(v) for v in obj]
    return obj
