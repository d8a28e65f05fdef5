"""
Smooth local costs, their constants, and data ingestion.

Two cost families are supported::

    logistic   J_k(w) = 1/L sum log(1 + exp(-y x^T w)) + lam/2 |w|^2
    quadratic  J_k(w) = 1/2 w^T Q w - b^T w          + lam/2 |w|^2
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, LibsvmParseError, NotStronglyConvex, TooFewSamples

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise DimensionMismatch(f"features {X.shape} and labels {y.shape} disagree")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def num_samples(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


class AgentCost:
    """Common interface of the per-agent smooth costs."""

    kind = None
    dim = 0
    l2_reg = 0.0

    def value(self, w):
        raise NotImplementedError

    def gradient(self, w):
        raise NotImplementedError

    def lipschitz(self):
        """Lipschitz constant of the gradient."""
        raise NotImplementedError

    def curvature_floor(self):
        """Symmetric matrix ``H`` with ``grad J`` being ``H``-strongly monotone."""
        raise NotImplementedError

    def _check(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise DimensionMismatch(f"expected a vector of length {self.dim}, got shape {w.shape}")
        return w


class LogisticCost(AgentCost):
    kind = "logistic"

    def __init__(self, features, labels, l2_reg=0.0):
        self.X = np.asarray(features, dtype=float)
        self.y = np.asarray(labels, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],) or self.X.shape[0] == 0:
            raise DimensionMismatch("logistic cost needs L >= 1 rows and matching labels")
        if l2_reg < 0:
            raise ValueError("l2_reg must be nonnegative")
        self.l2_reg = float(l2_reg)
        self.dim = self.X.shape[1]
        self._yX = self.y[:, None] * self.X

    @property
    def num_samples(self):
        return self.X.shape[0]

    def value(self, w):
        w = self._check(w)
        margins = self._yX @ w
        return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * self.l2_reg * (w @ w))

    def gradient(self, w):
        w = self._check(w)
        weights = expit(-(self._yX @ w))
        return self.l2_reg * w - (weights @ self._yX) / self.num_samples

    def lipschitz(self):
        # sigmoid curvature is at most 1/4
        top = np.linalg.norm(self.X, 2) ** 2 if self.X.size else 0.0
        return self.l2_reg + top / (4.0 * self.num_samples)

    def curvature_floor(self):
        return self.l2_reg * np.eye(self.dim)


class QuadraticCost(AgentCost):
    kind = "quadratic"

    def __init__(self, Q, b, l2_reg=0.0):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.Q.shape != (self.b.size, self.b.size):
            raise DimensionMismatch(f"Q {self.Q.shape} does not match b {self.b.shape}")
        if np.max(np.abs(self.Q - self.Q.T), initial=0.0) > 1e-12:
            raise ValueError("Q must be symmetric")
        if np.linalg.eigvalsh(self.Q)[0] < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if l2_reg < 0:
            raise ValueError("l2_reg must be nonnegative")
        self.l2_reg = float(l2_reg)
        self.dim = self.b.size

    def value(self, w):
        w = self._check(w)
        return float(0.5 * w @ self.Q @ w - self.b @ w + 0.5 * self.l2_reg * (w @ w))

    def gradient(self, w):
        w = self._check(w)
        return self.Q @ w - self.b + self.l2_reg * w

    def lipschitz(self):
        return float(np.linalg.eigvalsh(self.Q)[-1]) + self.l2_reg

    def curvature_floor(self):
        return self.Q + self.l2_reg * np.eye(self.dim)


def gradient(cost, w):
    return cost.gradient(w)


def stacked_gradient(costs, W):
    """Row ``k`` is ``grad J_k(W[k])``."""
    return np.stack([cost.gradient(w) for cost, w in zip(costs, W)])


def average_value(costs, w):
    return sum(cost.value(w) for cost in costs) / len(costs)


def average_gradient(costs, w):
    return sum(cost.gradient(w) for cost in costs) / len(costs)


@dataclass(frozen=True)
class CostConstants:
    delta: float
    nu: float


def estimate_constants(costs):
    """
    ``delta`` is the largest local gradient Lipschitz constant; ``nu`` is the
    smallest eigenvalue of the averaged curvature floors (``lam`` alone for
    logistic costs, whose data curvature is not modeled).
    """
    if not costs:
        raise ValueError("need at least one cost")
    delta = max(cost.lipschitz() for cost in costs)
    floor = sum(cost.curvature_floor() for cost in costs) / len(costs)
    nu = float(np.linalg.eigvalsh(0.5 * (floor + floor.T))[0])
    if nu <= 1e-12 * max(delta, 1.0):
        raise NotStronglyConvex(f"average cost has strong-convexity constant {nu:.3g} <= 0")
    return CostConstants(float(delta), min(nu, float(delta)))


def average_lipschitz(costs):
    """Gradient Lipschitz constant of the averaged cost (used by the ISTA oracle)."""
    kinds = {cost.kind for cost in costs}
    if kinds == {"quadratic"}:
        Q = sum(c.Q + c.l2_reg * np.eye(c.dim) for c in costs) / len(costs)
        return float(np.linalg.eigvalsh(Q)[-1])
    if kinds == {"logistic"}:
        H = sum(c.X.T @ c.X / (4.0 * c.num_samples) + c.l2_reg * np.eye(c.dim) for c in costs)
        return float(np.linalg.eigvalsh(H / len(costs))[-1])
    return max(cost.lipschitz() for cost in costs)


def normalize_rows(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return X / norms


def partition(dataset, K, seed, l2_reg=0.0):
    """
    Shuffle deterministically and split as evenly as possible; the first
    ``L_total mod K`` agents get one extra sample.
    """
    n = dataset.num_samples
    if K < 1 or n < K:
        raise TooFewSamples(f"cannot split {n} samples over {K} agents")
    order = np.random.default_rng(seed).permutation(n)
    sizes = [n // K + (1 if k < n % K else 0) for k in range(K)]
    bounds = np.cumsum([0] + sizes)
    return [
        LogisticCost(dataset.features[order[lo:hi]], dataset.labels[order[lo:hi]], l2_reg)
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]


@dataclass(frozen=True, eq=False)
class SyntheticRecord:
    w_true: np.ndarray
    flipped: np.ndarray
    dataset: Dataset
    seed: int


def synthesize_logistic(K, L_per_agent, M, sparsity=0.2, noise=0.0, seed=0, l2_reg=0.0):
    """
    Planted sparse logistic model.

    Features are standard Gaussian rows scaled to unit norm; labels are
    ``sign(x^T w_true)`` with each label flipped with probability `noise`.
    `sparsity` is the fraction of nonzero entries of ``w_true``.
    """
    rng = np.random.default_rng(seed)
    nnz = min(M, max(1, int(round(sparsity * M))))
    w_true = np.zeros(M)
    support = np.sort(rng.choice(M, size=nnz, replace=False))
    w_true[support] = rng.standard_normal(nnz)
    X = normalize_rows(rng.standard_normal((K * L_per_agent, M)))
    y = np.where(X @ w_true >= 0.0, 1.0, -1.0)
    flipped = rng.random(y.size) < noise
    y[flipped] *= -1.0
    dataset = Dataset(X, y, normalized=True)
    costs = [
        LogisticCost(X[k * L_per_agent:(k + 1) * L_per_agent], y[k * L_per_agent:(k + 1) * L_per_agent], l2_reg)
        for k in range(K)
    ]
    return costs, SyntheticRecord(w_true, flipped, dataset, seed)


def synthesize_quadratic(K, M, seed=0, condition=10.0, rank=None, l2_reg=0.0):
    """
    Random PSD quadratics whose average has eigenvalues spread over
    ``[1, condition]``. Local ``Q_k`` may be rank deficient (`rank` < M).
    """
    rng = np.random.default_rng(seed)
    rank = M if rank is None else rank
    costs = []
    for _ in range(K):
        G = rng.standard_normal((M, rank))
        costs.append(G @ G.T / rank)
    avg = sum(costs) / K
    # rescale so the average spectrum lies in [1, condition]
    vals, vecs = np.linalg.eigh(avg)
    target = np.linspace(1.0, condition, M)
    fix = vecs @ np.diag(np.sqrt(target / np.maximum(vals, 1e-12))) @ vecs.T
    out = []
    for Q in costs:
        Q = fix @ Q @ fix
        out.append(QuadraticCost(0.5 * (Q + Q.T), rng.standard_normal(M), l2_reg))
    return out


def read_libsvm(path, n_features=None, negative_labels=None, keep_labels=None, normalize=True):
    """
    Parse a LIBSVM text file (``label index:value ...`` with 1-based indices).

    Labels in `negative_labels` map to -1 and everything else to +1; when
    `negative_labels` is not given, labels ``<= 0`` map to -1. `keep_labels`
    drops rows whose raw label is not listed (binary class selection).
    """
    negative = None if negative_labels is None else {float(v) for v in negative_labels}
    keep = None if keep_labels is None else {float(v) for v in keep_labels}
    rows, labels, max_index = [], [], 0
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                raw = float(tokens[0])
            except ValueError:
                raise LibsvmParseError(line_no, f"bad label {tokens[0]!r}") from None
            entries = {}
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    i, v = int(idx), float(val)
                except ValueError:
                    raise LibsvmParseError(line_no, f"bad feature {tok!r}") from None
                if i < 1:
                    raise LibsvmParseError(line_no, f"feature index {i} is not 1-based")
                if not np.isfinite(v):
                    raise LibsvmParseError(line_no, f"non-finite value in {tok!r}")
                entries[i - 1] = v
                max_index = max(max_index, i)
            if keep is not None and raw not in keep:
                continue
            if negative is None:
                labels.append(-1.0 if raw <= 0 else 1.0)
            else:
                labels.append(-1.0 if raw in negative else 1.0)
            rows.append(entries)
    M = max_index if n_features is None else int(n_features)
    if max_index > M:
        raise LibsvmParseError(0, f"feature index {max_index} exceeds n_features={M}")
    X = np.zeros((len(rows), M))
    for r, entries in enumerate(rows):
        for i, v in entries.items():
            X[r, i] = v
    if normalize:
        X = normalize_rows(X)
    logger.info("read %d samples with %d features from %s", X.shape[0], M, path)
    return Dataset(X, np.array(labels), normalized=normalize)
