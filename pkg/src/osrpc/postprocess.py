"""Post-MCMC processing: label alignment, posterior summaries, DIC and the
simulation-study metrics."""
import csv
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import squareform

from .errors import InvalidStateError, NumericalError
from .likelihood import assignment_log_probs, observed_loglik
from .probit import category_probs

DIC_VARIANT = "observed-data DIC: -4 E[log L] + 2 log L(posterior medians)"
Y_ORD_NOTE = "share of subjects whose modal predicted outcome category is not a true modal category"


@dataclass
class SimilarityMatrix:
    m: np.ndarray


def build_similarity(trace):
    """Fraction of retained draws in which each pair of subjects shares a global cluster."""
    C = trace["C"] if not isinstance(trace, np.ndarray) else trace
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] == 0:
        raise InvalidStateError("similarity needs a non-empty (draws, subjects) assignment trace")
    T, n = C.shape
    K = int(C.max()) + 1
    acc = np.zeros((n, n))
    # chunk the one-hot product to bound memory
    step = max(1, 4096 // K)
    for t0 in range(0, T, step):
        block = C[t0:t0 + step]
        oh = np.zeros((n, block.shape[0] * K))
        cols = block.T + K * np.arange(block.shape[0])[None, :]
        np.put_along_axis(oh, cols, 1.0, axis=1)
        acc += oh @ oh.T
    m = acc / T
    np.fill_diagonal(m, 1.0)
    return SimilarityMatrix(m=m)


def reference_classes(similarity, K_active):
    """Complete-linkage clustering of ``1 - similarity`` cut into ``K_active`` groups (0-based)."""
    m = similarity.m if isinstance(similarity, SimilarityMatrix) else np.asarray(similarity)
    n = m.shape[0]
    if n == 1 or K_active <= 1:
        return np.zeros(n, dtype=np.int64)
    dist = squareform(np.clip(1.0 - m, 0.0, 1.0), checks=False)
    Z = linkage(dist, method="complete")
    return fcluster(Z, t=K_active, criterion="maxclust").astype(np.int64) - 1


def _contingency(a, b, ka, kb):
    tab = np.zeros((ka, kb))
    np.add.at(tab, (a, b), 1.0)
    return tab


def best_matching(table):
    """Row -> column assignment maximising the matched total (Hungarian method)."""
    rows, cols = linear_sum_assignment(-np.asarray(table))
    return dict(zip(rows.tolist(), cols.tolist()))


def _canonical_labels(C_t, pi_t, ref, R, K):
    """Label-free slot for every component of one draw.

    Occupied components (blocks of the partition, ordered by their first
    subject) are matched to reference classes; the remaining blocks and then
    the empty components (by decreasing weight) fill the free slots in order.
    Only the partition and the weights are used, never the incoming labels.
    """
    labels, first = np.unique(C_t, return_index=True)
    blocks = labels[np.argsort(first)]
    pos = np.full(K, -1)
    pos[blocks] = np.arange(blocks.size)
    overlap = _contingency(pos[C_t], ref, blocks.size, R)
    rows, cols = linear_sum_assignment(-overlap)
    slot = np.full(K, -1)
    slot[blocks[rows]] = cols
    free = iter(np.setdiff1d(np.arange(K), cols))
    for b in blocks:
        if slot[b] < 0:
            slot[b] = next(free)
    empty = np.setdiff1d(np.arange(K), labels)
    for k in empty[np.lexsort((empty, -pi_t[empty]))]:
        slot[k] = next(free)
    return slot


def relabel_trace(trace, similarity, K_active):
    """Permute each draw's global labels to agree with the similarity-matrix reference.

    Complete linkage on ``1 - similarity`` cut at ``K_active`` groups gives the
    reference classes.  Each draw's partition is matched to them (Hungarian
    method); one global renaming, chosen to agree best with the incoming
    labels, then maps the matched slots to output labels.  A consistently
    labelled trace is therefore left unchanged, and relabelling is idempotent.
    """
    out = trace.copy()
    C = out["C"]
    T, n = C.shape
    K = out["pi"].shape[1]
    ref = reference_classes(similarity, min(int(K_active), K))
    R = int(ref.max()) + 1
    slots = np.array([_canonical_labels(C[t], out["pi"][t], ref, R, K) for t in range(T)])
    # agreement between slots and incoming labels: subjects, plus a sub-unit
    # weight per component so that never-occupied labels are also pinned down
    agree = np.zeros((K, K))
    eps = 1.0 / (T * K + 1)
    for t in range(T):
        agree += _contingency(slots[t][C[t]], C[t], K, K)
        agree[slots[t], np.arange(K)] += eps
    rows, cols = linear_sum_assignment(-agree)
    name = np.empty(K, dtype=np.int64)
    name[rows] = cols
    S = out.n_subpops
    perms = name[slots]                              # incoming label -> output label
    for t in range(T):
        perm = perms[t]
        inv = np.argsort(perm)
        C[t] = perm[C[t]]
        out["pi"][t] = out["pi"][t][inv]
        out["theta0"][t] = out["theta0"][t][inv]
        xi = out["xi"][t]
        xi[S:] = xi[S:][inv]
    out.meta["relabelled"] = True
    out.arrays["relabel_perm"] = perms
    return out


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def _median_simplex(a, axis=-1):
    med = np.median(a, axis=0)
    tot = med.sum(axis=axis, keepdims=True)
    return np.divide(med, tot, out=np.zeros_like(med), where=tot > 0)


@dataclass
class PosteriorSummary:
    mode: str
    pi_med: np.ndarray
    theta0_med: np.ndarray
    theta1_med: np.ndarray
    lam_med: np.ndarray
    nu_med: np.ndarray
    beta_med: np.ndarray
    xi_med: np.ndarray
    delta_med: np.ndarray
    s0: float
    C_hat: np.ndarray
    C_prob: np.ndarray
    L_hat: np.ndarray
    modal_patterns: np.ndarray       # (K, p) 1-based levels
    local_modal_patterns: np.ndarray  # (S, Ks, p) 1-based levels
    outcome_prob: np.ndarray         # (S, K, M)
    dic: float = None
    dic_variant: str = DIC_VARIANT
    Ks_active: list = field(default_factory=list)

    @property
    def K(self):
        return self.pi_med.shape[0]

    def subject_outcome_prob(self, dataset):
        return self.outcome_prob[dataset.sub, self.C_hat]

    def to_json(self):
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, np.ndarray):
                v = v.tolist()
            out[k] = v
        out["K"] = self.K
        # export cluster labels and levels 1-based
        out["C_hat"] = (self.C_hat + 1).tolist()
        out["L_hat"] = (self.L_hat + 1).tolist()
        return out


def summarize(trace, dataset, K_active=None, relabel=True, dic=True):
    """Posterior medians, hard assignments, modal patterns and (optionally) DIC."""
    if len(trace) == 0:
        raise InvalidStateError("trace has no retained draws")
    if relabel and not trace.meta.get("relabelled"):
        K_active = trace.K if K_active is None else K_active
        trace = relabel_trace(trace, build_similarity(trace), K_active)
    s0 = float(trace.meta.get("s0", 1.0))
    mode = trace.meta.get("mode", "osrpc")
    pi = _median_simplex(trace["pi"])
    theta0 = _median_simplex(trace["theta0"])
    theta1 = _median_simplex(trace["theta1"])
    lam = _median_simplex(trace["lam"])
    nu = np.median(trace["nu"], axis=0)
    beta = np.median(trace["beta"], axis=0)
    xi = np.median(trace["xi"], axis=0)
    delta = np.median(trace["delta"], axis=0)

    T = len(trace)
    probs = np.empty((T, dataset.n, trace.K))
    for t in range(T):
        d = trace.draw(t)
        probs[t] = np.exp(assignment_log_probs(dataset, d["pi"], d["theta0"], d["lam"], d["theta1"],
                                               d["nu"], d["xi"], d["delta"], s0))
    C_prob = np.median(probs, axis=0)
    C_hat = np.argmax(C_prob, axis=1)

    j = np.arange(dataset.p)[None, :]
    with np.errstate(divide="ignore"):
        local_w = np.log(lam)[dataset.sub][:, :, None] + np.log(
            theta1[dataset.sub[:, None], :, j, dataset.codes].transpose(0, 2, 1))
    L_hat = np.argmax(local_w, axis=1)

    S, K = dataset.n_subpops, trace.K
    eta = xi[:S][:, None] + xi[S:S + K][None, :]
    outcome = category_probs(eta, delta, s0)
    summary = PosteriorSummary(
        mode=mode, pi_med=pi, theta0_med=theta0, theta1_med=theta1, lam_med=lam, nu_med=nu,
        beta_med=beta, xi_med=xi, delta_med=delta, s0=s0, C_hat=C_hat, C_prob=C_prob,
        L_hat=L_hat, modal_patterns=np.argmax(theta0, axis=2) + 1,
        local_modal_patterns=np.argmax(theta1, axis=3) + 1, outcome_prob=outcome,
        Ks_active=list(trace.meta.get("Ks_active") or []))
    if dic:
        summary.dic = compute_dic(trace, dataset, summary)
    return summary


def draw_logliks(trace, dataset):
    """Observed-data log-likelihood (C, G, L summed out) at every retained draw."""
    s0 = float(trace.meta.get("s0", 1.0))
    return np.array([
        observed_loglik(dataset, d["pi"], d["theta0"], d["lam"], d["theta1"], d["nu"], d["xi"],
                        d["delta"], s0)
        for d in (trace.draw(t) for t in range(len(trace)))])


def compute_dic(trace, dataset, summary=None):
    """DIC = -4 mean(log L) + 2 log L(plug-in at posterior medians)."""
    if len(trace) == 0:
        raise InvalidStateError("trace has no retained draws")
    if summary is None:
        summary = summarize(trace, dataset, dic=False)
    ll = draw_logliks(trace, dataset)
    plug = observed_loglik(dataset, summary.pi_med, summary.theta0_med, summary.lam_med,
                           summary.theta1_med, summary.nu_med, summary.xi_med, summary.delta_med,
                           summary.s0)
    if not np.isfinite(plug) or not np.all(np.isfinite(ll)):
        raise NumericalError("non-finite log-likelihood in DIC computation")
    return float(-4.0 * ll.mean() + 2.0 * plug)


# ---------------------------------------------------------------------------
# simulation metrics
# ---------------------------------------------------------------------------

@dataclass
class MetricBundle:
    k_pred: int
    dic: float
    p_y_mse: float
    y_ord: float
    pattern_classification: list
    nu_mse: float = None
    y_ord_definition: str = Y_ORD_NOTE

    def to_json(self):
        return asdict(self)


def classification_rates(pred, true, K_pred, K_true):
    """Per-true-pattern share of subjects in the cluster matched to it (one-to-one matching)."""
    tab = _contingency(np.asarray(true), np.asarray(pred), K_true, K_pred)
    match = best_matching(tab)
    sizes = tab.sum(axis=1)
    rates = []
    for t in range(K_true):
        if t in match and sizes[t] > 0:
            rates.append(float(tab[t, match[t]] / sizes[t]))
        else:
            rates.append(0.0 if sizes[t] > 0 else 1.0)
    return rates


def evaluate(summary, truth, dataset):
    """Compare a posterior summary with simulation truth."""
    if truth.true_C.shape != (dataset.n,):
        raise InvalidStateError("truth and dataset disagree on the number of subjects")
    S, M = dataset.n_subpops, dataset.n_outcomes
    if truth.true_outcome_prob.shape[1:] != (S, M):
        raise InvalidStateError("truth outcome table does not match the dataset")
    K_true = truth.true_outcome_prob.shape[0]
    rates = classification_rates(summary.C_hat, truth.true_C, summary.K, K_true)

    model_p = summary.subject_outcome_prob(dataset)
    true_p = truth.true_outcome_prob[truth.true_C, dataset.sub]
    p_y_mse = float(np.mean((model_p - true_p) ** 2))

    pred_mode = np.argmax(model_p, axis=1)
    true_max = true_p.max(axis=1, keepdims=True)
    is_modal = np.abs(true_p - true_max) <= 1e-9
    y_ord = float(np.mean(~is_modal[np.arange(dataset.n), pred_mode]))

    nu_mse = None
    if summary.mode == "osrpc":
        if truth.true_nu.shape != summary.nu_med.shape:
            raise InvalidStateError("truth and summary disagree on the nu shape")
        nu_mse = float(np.mean((summary.nu_med - truth.true_nu) ** 2))
    return MetricBundle(k_pred=int(summary.K), dic=summary.dic, p_y_mse=p_y_mse, y_ord=y_ord,
                        pattern_classification=rates, nu_mse=nu_mse)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def write_summary(summary, outdir, prefix="summary", metrics=None):
    """JSON summary plus modal-pattern and nu CSV matrices; returns written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}
    obj = summary.to_json()
    if metrics is not None:
        obj["metrics"] = metrics.to_json()
    p = outdir / f"{prefix}.json"
    with p.open("w") as fh:
        json.dump(obj, fh, indent=1)
    paths["json"] = p

    p = outdir / f"{prefix}.modal_patterns.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable"] + [f"cluster{k + 1}" for k in range(summary.K)])
        for j in range(summary.modal_patterns.shape[1]):
            w.writerow([f"v{j + 1}"] + summary.modal_patterns[:, j].tolist())
    paths["modal_patterns"] = p

    p = outdir / f"{prefix}.nu.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        S = summary.nu_med.shape[0]
        w.writerow(["variable"] + [f"subpop{s + 1}" for s in range(S)])
        for j in range(summary.nu_med.shape[1]):
            w.writerow([f"v{j + 1}"] + [f"{v:.6g}" for v in summary.nu_med[:, j]])
    paths["nu"] = p
    return paths
