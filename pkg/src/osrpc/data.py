"""Categorical exposure datasets, CSV ingestion, design matrices and the
global/local simulation generator.

Codes follow the file convention: exposure levels, subpopulations and outcome
categories are 1-based integers.  Latent cluster labels used by the sampler
are 0-based.
"""
import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DataParseError, InvalidParameterError, InvalidStateError


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    """n subjects, p categorical exposures, a subpopulation and an ordinal outcome.

    Attributes
    ----------
    x : (n, p) int array, ``1 <= x[i, j] <= d[j]``
    d : (p,) int array of level counts, each >= 2
    s : (n,) int array of subpopulation indices in ``1..S``
    y : (n,) int array of outcome categories in ``1..M``
    """

    x: np.ndarray
    d: np.ndarray
    s: np.ndarray
    y: np.ndarray
    n_subpops: int = None
    n_outcomes: int = None
    subject_ids: tuple = None
    subpop_labels: tuple = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        d = np.asarray(self.d, dtype=np.int64)
        s = np.asarray(self.s, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int64)
        if x.ndim != 2:
            raise InvalidParameterError(f"x must be 2-D, got shape {x.shape}")
        n, p = x.shape
        if d.shape != (p,):
            raise InvalidParameterError(f"d must have length p={p}")
        if s.shape != (n,) or y.shape != (n,):
            raise InvalidParameterError("s and y must have one entry per subject")
        if np.any(d < 2):
            raise InvalidParameterError("every variable needs at least 2 levels")
        if n and (x.min() < 1 or np.any(x > d[None, :])):
            i, j = np.argwhere((x < 1) | (x > d[None, :]))[0]
            raise InvalidParameterError(f"x[{i}, {j}] = {x[i, j]} outside 1..{d[j]}")
        S = int(self.n_subpops) if self.n_subpops is not None else int(s.max(initial=1))
        M = int(self.n_outcomes) if self.n_outcomes is not None else max(int(y.max(initial=2)), 2)
        if M < 2:
            raise InvalidParameterError("ordinal outcome needs M >= 2 categories")
        if n and (s.min() < 1 or s.max() > S):
            raise InvalidParameterError(f"subpopulation indices must lie in 1..{S}")
        missing = sorted(set(range(1, S + 1)) - set(s.tolist()))
        if missing:
            raise InvalidParameterError(f"subpopulations {missing} have no subjects")
        if n and (y.min() < 1 or y.max() > M):
            raise InvalidParameterError(f"outcomes must lie in 1..{M}")
        ids = tuple(self.subject_ids) if self.subject_ids is not None else tuple(
            str(i + 1) for i in range(n))
        if len(ids) != n:
            raise InvalidParameterError("subject_ids length differs from n")
        labels = tuple(self.subpop_labels) if self.subpop_labels is not None else tuple(
            str(k) for k in range(1, S + 1))
        for name, val in (("x", x), ("d", d), ("s", s), ("y", y)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "n_subpops", S)
        object.__setattr__(self, "n_outcomes", M)
        object.__setattr__(self, "subject_ids", ids)
        object.__setattr__(self, "subpop_labels", labels)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def d_max(self):
        return int(self.d.max())

    @cached_property
    def codes(self):
        """0-based exposure codes."""
        return self.x - 1

    @cached_property
    def sub(self):
        """0-based subpopulation indices."""
        return self.s - 1

    @cached_property
    def level_mask(self):
        """(p, d_max) bool: which level slots exist for each variable."""
        return np.arange(self.d_max)[None, :] < self.d[:, None]

    @cached_property
    def onehot(self):
        """(n, p, d_max) float indicator of the observed level."""
        oh = np.zeros((self.n, self.p, self.d_max))
        np.put_along_axis(oh, self.codes[:, :, None], 1.0, axis=2)
        return oh

    @cached_property
    def subpop_indicator(self):
        """(S, n) 0/1 membership matrix."""
        return (self.sub[None, :] == np.arange(self.n_subpops)[:, None]).astype(float)

    @cached_property
    def subpop_members(self):
        return [np.flatnonzero(self.sub == k) for k in range(self.n_subpops)]


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

@dataclass
class CsvSchema:
    """Column mapping for :func:`load_csv`.

    ``exposures=None`` means every column other than the id/subpop/outcome
    columns, in file order.  ``levels`` overrides inferred level counts
    (mapping column name -> d_j).  ``subpop_labels`` fixes the admissible
    subpopulation labels and their order.
    """

    id: str = "id"
    subpop: str = "subpop"
    outcome: str = "outcome"
    exposures: list = None
    levels: dict = field(default_factory=dict)
    subpop_labels: list = None
    n_outcomes: int = None


def _parse_int(text, row, column):
    if text is None or text.strip() == "":
        raise DataParseError("missing value", row=row, column=column)
    try:
        return int(text.strip())
    except ValueError:
        raise DataParseError(f"non-integer code {text!r}", row=row, column=column) from None


def load_csv(path, schema=None):
    """Read a header-first CSV of integer level codes into a dataset.

    Blank cells are errors; there is no imputation.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataParseError(f"{path} is empty") from None
        for col in (schema.id, schema.subpop, schema.outcome):
            if col not in header:
                raise DataParseError(f"required column {col!r} not in header", row=1)
        fixed = {schema.id, schema.subpop, schema.outcome}
        exposures = list(schema.exposures) if schema.exposures else [h for h in header if h not in fixed]
        for col in exposures:
            if col not in header:
                raise DataParseError(f"exposure column {col!r} not in header", row=1)
        if not exposures:
            raise DataParseError("no exposure columns", row=1)
        pos = {h: k for k, h in enumerate(header)}
        known = None if schema.subpop_labels is None else [str(v) for v in schema.subpop_labels]

        ids, subs, ys, xs = [], [], [], []
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(c.strip() == "" for c in rec):
                continue
            if len(rec) != len(header):
                raise DataParseError(f"expected {len(header)} fields, got {len(rec)}", row=rownum)
            ids.append(rec[pos[schema.id]].strip())
            lab = rec[pos[schema.subpop]].strip()
            if lab == "":
                raise DataParseError("missing value", row=rownum, column=schema.subpop)
            if known is not None and lab not in known:
                raise DataParseError(f"unknown subpopulation label {lab!r}", row=rownum,
                                     column=schema.subpop)
            subs.append(lab)
            yv = _parse_int(rec[pos[schema.outcome]], rownum, schema.outcome)
            if yv < 1 or (schema.n_outcomes is not None and yv > schema.n_outcomes):
                raise DataParseError(f"outcome {yv} out of range", row=rownum, column=schema.outcome)
            ys.append(yv)
            xrow = []
            for col in exposures:
                v = _parse_int(rec[pos[col]], rownum, col)
                top = schema.levels.get(col)
                if v < 1 or (top is not None and v > top):
                    raise DataParseError(f"level code {v} out of range", row=rownum, column=col)
                xrow.append(v)
            xs.append(xrow)
    if not xs:
        raise DataParseError(f"{path} has no data rows")

    x = np.asarray(xs, dtype=np.int64)
    d = np.array([schema.levels.get(col, max(int(x[:, k].max()), 2))
                  for k, col in enumerate(exposures)])
    if known is None:
        labels = sorted(set(subs), key=_label_key)
    else:
        labels = known
    index = {lab: k + 1 for k, lab in enumerate(labels)}
    s = np.array([index[lab] for lab in subs])
    y = np.asarray(ys)
    M = schema.n_outcomes if schema.n_outcomes is not None else max(int(y.max()), 2)
    try:
        return CategoricalDataset(x=x, d=d, s=s, y=y, n_subpops=len(labels), n_outcomes=M,
                                  subject_ids=ids, subpop_labels=labels)
    except InvalidParameterError as exc:
        raise DataParseError(str(exc)) from exc


def _label_key(lab):
    # numeric labels sort numerically, everything else lexically after them
    try:
        return (0, int(lab), "")
    except ValueError:
        return (1, 0, lab)


def write_csv(dataset, path):
    """Write ``dataset`` in the ``id, subpop, outcome, v1..vp`` layout."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "subpop", "outcome"] + [f"v{j + 1}" for j in range(dataset.p)])
        for i in range(dataset.n):
            w.writerow([dataset.subject_ids[i], dataset.subpop_labels[dataset.s[i] - 1],
                        int(dataset.y[i])] + dataset.x[i].tolist())


# ---------------------------------------------------------------------------
# design matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Cell-means probit design: subpopulation indicators then cluster indicators."""

    W: np.ndarray
    column_labels: tuple
    n_subpops: int
    n_clusters: int

    @property
    def q(self):
        return self.W.shape[1]


def build_design_matrix(dataset, C, K):
    """Build ``W = [subpop one-hot | cluster one-hot]`` with no intercept.

    ``C`` holds 0-based cluster labels in ``0..K-1``.
    """
    K = int(K)
    if K <= 0:
        raise InvalidStateError("design matrix needs at least one cluster")
    C = np.asarray(C)
    if C.shape != (dataset.n,):
        raise InvalidStateError("C must have one label per subject")
    if dataset.n and (C.min() < 0 or C.max() >= K):
        raise InvalidStateError(f"cluster labels must lie in 0..{K - 1}")
    S = dataset.n_subpops
    W = np.zeros((dataset.n, S + K))
    rows = np.arange(dataset.n)
    W[rows, dataset.sub] = 1.0
    W[rows, S + C] = 1.0
    labels = tuple(f"subpop:{lab}" for lab in dataset.subpop_labels) + tuple(
        f"cluster:{k + 1}" for k in range(K))
    return DesignMatrix(W=W, column_labels=labels, n_subpops=S, n_clusters=K)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

CASES = ("A", "B")

# Outcome Pr(y = top category) ranges for patterns 1..3 (high, low, medium risk).
RISK_RANGES = ((0.97, 0.99), (0.14, 0.22), (0.46, 0.58))


@dataclass
class SimulationConfig:
    """Settings for the three-pattern global (A) / global-local (B) generator.

    ``local_spec`` maps 1-based variable index -> {1-based subpop: favored
    level}; ``None`` uses the default (last fifth of the variables local in
    every subpopulation, subpopulation ``s`` favoring level ``(s-1) % d + 1``).
    ``low_split`` is the share of the non-top outcome mass given to
    category 1 (the rest goes to the middle categories).
    """

    case: str = "A"
    n_per_subpop: int = 1200
    n_subpops: int = 4
    p: int = 50
    d: int = 4
    n_replicates: int = 500
    seed: int = None
    favored_prob: float = 0.85
    n_outcomes: int = 3
    low_split: float = 0.5
    local_spec: dict = None
    risk_ranges: tuple = RISK_RANGES

    def __post_init__(self):
        self.case = str(self.case).upper()
        if self.case not in CASES:
            raise InvalidParameterError(f"case must be one of {CASES}, got {self.case!r}")
        for name in ("n_per_subpop", "n_subpops", "p", "n_replicates"):
            if int(getattr(self, name)) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.d < 2:
            raise InvalidParameterError("d must be >= 2")
        if self.n_outcomes < 2:
            raise InvalidParameterError("n_outcomes must be >= 2")
        if not 1.0 / self.d < self.favored_prob < 1.0:
            raise InvalidParameterError("favored_prob must lie in (1/d, 1)")
        if not 0.0 <= self.low_split <= 1.0:
            raise InvalidParameterError("low_split must lie in [0, 1]")
        if self.case == "B":
            spec = self.local_spec if self.local_spec is not None else default_local_spec(
                self.p, self.n_subpops, self.d)
            self.local_spec = _normalise_local_spec(spec, self.p, self.n_subpops, self.d)
            if not self.local_spec:
                raise InvalidParameterError("case B needs at least one local variable")


def default_local_spec(p, n_subpops, d):
    start = p - max(p // 5, 1)
    return {j + 1: {s + 1: (s % d) + 1 for s in range(n_subpops)} for j in range(start, p)}


def _normalise_local_spec(spec, p, n_subpops, d):
    out = {}
    for var, per_sub in spec.items():
        j = int(var)
        if not 1 <= j <= p:
            raise InvalidParameterError(f"local variable index {j} outside 1..{p}")
        row = {}
        for sub, lev in per_sub.items():
            s, lev = int(sub), int(lev)
            if not 1 <= s <= n_subpops:
                raise InvalidParameterError(f"subpopulation {s} outside 1..{n_subpops}")
            if not 1 <= lev <= d:
                raise InvalidParameterError(f"favored level {lev} outside 1..{d}")
            row[s] = lev
        out[j] = row
    return out


def load_local_spec(path):
    with open(path) as fh:
        return json.load(fh)


def global_favored_levels(p, d):
    """(3, p) favored levels (1-based) for the three global patterns.

    Breakpoints scale with ``p``; at p = 50 they are 25 | 10 | 10, 30.
    Levels above ``d`` are clamped to ``d``.
    """
    def cut(frac):
        return int(round(frac * p))

    fav = np.empty((3, p), dtype=np.int64)
    fav[0, :cut(0.5)] = 3
    fav[0, cut(0.5):] = 1
    fav[1, :cut(0.2)] = 2
    fav[1, cut(0.2):] = 5
    fav[2, :cut(0.2)] = 1
    fav[2, cut(0.2):cut(0.6)] = 2
    fav[2, cut(0.6):] = 3
    return np.minimum(fav, d)


def favored_table(favored, d, prob):
    """Probability tables with ``prob`` on the favored level, the rest spread evenly."""
    favored = np.asarray(favored)
    tab = np.full(favored.shape + (d,), (1.0 - prob) / (d - 1))
    np.put_along_axis(tab, (favored - 1)[..., None], prob, axis=-1)
    return tab


def outcome_table(config):
    """(3, S, M) true outcome probabilities per pattern and subpopulation."""
    S, M = config.n_subpops, config.n_outcomes
    out = np.zeros((3, S, M))
    for k, (lo, hi) in enumerate(config.risk_ranges):
        top = np.linspace(lo, hi, S) if S > 1 else np.array([0.5 * (lo + hi)])
        rest = 1.0 - top
        out[k, :, M - 1] = top
        if M == 2:
            out[k, :, 0] = rest
        else:
            out[k, :, 0] = config.low_split * rest
            # middle categories share the remainder evenly
            out[k, :, 1:M - 1] = ((1.0 - config.low_split) * rest / (M - 2))[:, None]
    return out


@dataclass
class SimulationTruth:
    true_C: np.ndarray            # (n,) 0-based pattern per subject
    true_theta0: np.ndarray       # (3, p, d)
    true_G: np.ndarray            # (p, S) 1 = global
    true_local_patterns: dict     # {var (1-based): {subpop (1-based): level}}
    true_outcome_prob: np.ndarray  # (3, S, M)
    case: str = "A"

    @property
    def true_nu(self):
        """(S, p) implied deviation probabilities: 1 for global, 0 for local."""
        return self.true_G.T.astype(float)

    def to_json(self):
        return {
            "case": self.case,
            "true_C": (self.true_C + 1).tolist(),
            "true_theta0": self.true_theta0.tolist(),
            "true_G": self.true_G.astype(int).tolist(),
            "true_local_patterns": {str(j): {str(s): int(v) for s, v in row.items()}
                                    for j, row in self.true_local_patterns.items()},
            "true_outcome_prob": self.true_outcome_prob.tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            true_C=np.asarray(obj["true_C"], dtype=np.int64) - 1,
            true_theta0=np.asarray(obj["true_theta0"], dtype=float),
            true_G=np.asarray(obj["true_G"], dtype=np.int64),
            true_local_patterns={int(j): {int(s): int(v) for s, v in row.items()}
                                 for j, row in obj["true_local_patterns"].items()},
            true_outcome_prob=np.asarray(obj["true_outcome_prob"], dtype=float),
            case=obj.get("case", "A"),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def simulate(config, rng):
    """Generate one dataset and its ground truth."""
    S, p, d = config.n_subpops, config.p, config.d
    n = config.n_per_subpop * S
    s = np.repeat(np.arange(S), config.n_per_subpop)
    true_C = rng.integers(0, 3, size=n)

    fav = global_favored_levels(p, d)
    theta0 = favored_table(fav, d, config.favored_prob)
    true_G = np.ones((p, S), dtype=np.int64)
    local = {}
    if config.case == "B":
        local = config.local_spec
        for j, row in local.items():
            for sub in row:
                true_G[j - 1, sub - 1] = 0

    # per-subject generating table: global pattern unless the variable is local in s
    probs = theta0[true_C]                      # (n, p, d)
    for j, row in local.items():
        for sub, lev in row.items():
            members = s == sub - 1
            tab = favored_table(np.array([lev]), d, config.favored_prob)[0]
            probs[members, j - 1, :] = tab
    cum = probs.cumsum(axis=2)
    u = rng.random((n, p, 1))
    x = (u > cum).sum(axis=2) + 1
    x = np.minimum(x, d)

    out_prob = outcome_table(config)
    py = out_prob[true_C, s]                    # (n, M)
    uy = rng.random((n, 1))
    y = np.minimum((uy > py.cumsum(axis=1)).sum(axis=1) + 1, config.n_outcomes)

    dataset = CategoricalDataset(x=x, d=np.full(p, d), s=s + 1, y=y, n_subpops=S,
                                 n_outcomes=config.n_outcomes)
    truth = SimulationTruth(true_C=true_C, true_theta0=theta0, true_G=true_G,
                            true_local_patterns=local, true_outcome_prob=out_prob,
                            case=config.case)
    return dataset, truth
