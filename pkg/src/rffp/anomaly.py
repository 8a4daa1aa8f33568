"""
Local outlier factor in novelty-detection mode.

The reference population is fitted once; queries are scored against it and
never inserted. Neighbourhoods include every point tied at the k-distance,
and averages run over the actual neighbourhood size.

Zero-density convention: a point whose reachability distances sum to zero
(all neighbours coincident) has ``lrd = inf``. In the LOF ratio
``inf/inf = 1`` and ``finite/inf = 0``; ``inf/finite`` stays ``inf``.
"""
from dataclasses import dataclass

import numpy as np

from ._kernels import METRICS, pairwise_distances
from .errors import InvalidInputError

DEFAULT_K = 20
DEFAULT_METRIC = "manhattan"
DEFAULT_THRESHOLD = 1.0


@dataclass(frozen=True)
class LofModel:
    reference_points: np.ndarray
    k: int
    metric: str
    threshold: float
    k_distances: np.ndarray
    lrd: np.ndarray

    @property
    def dimension(self):
        return self.reference_points.shape[1]

    def with_threshold(self, threshold):
        return LofModel(self.reference_points, self.k, self.metric, float(threshold),
                        self.k_distances, self.lrd)


def _check(points, k, metric):
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2:
        raise InvalidInputError("reference points must form a 2-D matrix")
    if metric not in METRICS:
        raise InvalidInputError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if P.shape[0] < k + 1:
        raise InvalidInputError(f"need at least k+1={k + 1} points, got {P.shape[0]}")
    if not np.all(np.isfinite(P)):
        raise InvalidInputError("reference points must be finite")
    return P


def _lrd(dists, neigh_mask, kdist_ref):
    """lrd of each row given its distances to the references."""
    reach = np.maximum(dists, kdist_ref[None, :])
    counts = neigh_mask.sum(axis=1)
    sums = np.where(neigh_mask, reach, 0.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        return np.where(sums > 0, counts / np.where(sums > 0, sums, 1.0), np.inf)


def _ratio_mean(lrd_ref, neigh_mask, lrd_q):
    out = np.empty(lrd_q.size)
    for i in range(lrd_q.size):
        neigh = lrd_ref[neigh_mask[i]]
        if np.isinf(lrd_q[i]):
            ratios = np.where(np.isinf(neigh), 1.0, 0.0)
        else:
            ratios = neigh / lrd_q[i]
        out[i] = ratios.mean()
    return out


def _neighbourhood(dists, k):
    kdist = np.partition(dists, k - 1, axis=1)[:, k - 1]
    return kdist, dists <= kdist[:, None]


def lof_fit(points, k=DEFAULT_K, metric=DEFAULT_METRIC, threshold=DEFAULT_THRESHOLD):
    """Fit the reference population: k-distances and lrds of every point."""
    P = _check(points, int(k), metric)
    k = int(k)
    D = pairwise_distances(P, P, metric)
    np.fill_diagonal(D, np.inf)  # a point is not its own neighbour
    kdist, mask = _neighbourhood(D, k)
    lrd = _lrd(D, mask, kdist)
    P = P.copy()
    for arr in (P, kdist, lrd):
        arr.flags.writeable = False
    return LofModel(P, k, metric, float(threshold), kdist, lrd)


def lof_scores(model, queries):
    """LOF of each query row against the fitted references."""
    Q = np.asarray(queries, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[1] != model.dimension:
        raise InvalidInputError(f"query dimension {Q.shape[1]} does not match model ({model.dimension})")
    D = pairwise_distances(Q, model.reference_points, model.metric)
    _, mask = _neighbourhood(D, model.k)
    lrd_q = _lrd(D, mask, model.k_distances)
    return _ratio_mean(model.lrd, mask, lrd_q)


def lof_score(model, query):
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise InvalidInputError("lof_score takes a single vector")
    return float(lof_scores(model, q)[0])


def lof_classify(model, query):
    """``("outlier" | "inlier", score)``; outlier iff score > threshold."""
    s = lof_score(model, query)
    return ("outlier" if s > model.threshold else "inlier"), s


def classify_scores(scores, threshold):
    return np.where(np.asarray(scores) > threshold, "outlier", "inlier")


def calibrate_threshold(model, inlier_points, quantile=0.95):
    """Threshold at the given quantile of held-out inlier scores.

    Returns a new model; ``quantile`` bounds the false-alarm rate on data
    resembling the calibration set.
    """
    if not 0.0 < quantile <= 1.0:
        raise InvalidInputError("quantile must lie in (0, 1]")
    scores = lof_scores(model, inlier_points)
    finite = scores[np.isfinite(scores)]
    if finite.size == 0:
        raise InvalidInputError("no finite calibration scores")
    return model.with_threshold(float(np.quantile(finite, quantile)))
