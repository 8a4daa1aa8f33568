"""
Label trees, the reference kNN node classifier, the local-classifier-per-
parent-node cascade, and flat / hierarchical evaluation metrics.
"""
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._kernels import pairwise_distances
from .errors import InvalidInputError


# ---------------------------------------------------------------------------
# tree
# ---------------------------------------------------------------------------

class LabelTree:
    """Rooted tree over unique string node ids, built from (parent, child) edges.

    Child order follows first appearance in ``edges``.
    """

    def __init__(self, edges):
        self._children: Dict[str, List[str]] = {}
        self._parent: Dict[str, str] = {}
        order = []
        for parent, child in edges:
            parent, child = str(parent), str(child)
            if parent == child:
                raise InvalidInputError(f"self-loop on {parent!r}")
            if child in self._parent:
                if self._parent[child] == parent:
                    continue
                raise InvalidInputError(f"node {child!r} has two parents ({self._parent[child]!r}, {parent!r})")
            self._parent[child] = parent
            self._children.setdefault(parent, []).append(child)
            for node in (parent, child):
                if node not in order:
                    order.append(node)
        roots = [n for n in order if n not in self._parent]
        if len(roots) != 1:
            raise InvalidInputError(f"tree must have exactly one root, found {roots}")
        self.root = roots[0]
        self.nodes = tuple(order)
        # every node must reach the root (rules out cycles disconnected from it)
        for node in self.nodes:
            seen = set()
            while node != self.root:
                if node in seen:
                    raise InvalidInputError(f"cycle through {node!r}")
                seen.add(node)
                node = self._parent[node]

    @property
    def edges(self):
        return [(p, c) for p in self.nodes for c in self._children.get(p, [])]

    def children(self, node):
        return list(self._children.get(node, []))

    def parent(self, node):
        return self._parent.get(node)

    def is_leaf(self, node):
        return not self._children.get(node)

    def leaves(self):
        return [n for n in self.nodes if self.is_leaf(n)]

    def path_to(self, node):
        """Node ids from the root's child down to ``node`` (root excluded)."""
        if node not in self.nodes:
            raise InvalidInputError(f"unknown node {node!r}")
        out = []
        while node != self.root:
            out.append(node)
            node = self._parent[node]
        return out[::-1]

    def multi_child_parents(self):
        return [n for n in self.nodes if len(self._children.get(n, [])) >= 2]

    def depth(self):
        return max((len(self.path_to(n)) for n in self.leaves()), default=0)

    def normalize_path(self, path):
        """Validate a label path and strip a leading root label."""
        path = [str(p) for p in path]
        if path and path[0] == self.root:
            path = path[1:]
        node = self.root
        for label in path:
            if label not in self._children.get(node, []):
                raise InvalidInputError(f"path {path} is not a root-to-node path in the tree "
                                        f"({label!r} is not a child of {node!r})")
            node = label
        return tuple(path)

    def to_text(self):
        return "".join(f"{p} {c}\n" for p, c in self.edges)

    def __eq__(self, other):
        return isinstance(other, LabelTree) and self.edges == other.edges


def parse_tree(text):
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidInputError(f"line {lineno}: expected 'parent child', got {line!r}")
        edges.append(tuple(parts))
    if not edges:
        raise InvalidInputError("tree definition has no edges")
    return LabelTree(edges)


def read_tree(path):
    with open(path, encoding="utf-8") as fh:
        return parse_tree(fh.read())


def tree_from_paths(paths):
    edges = []
    for path in paths:
        for parent, child in zip(path[:-1], path[1:]):
            if (parent, child) not in edges:
                edges.append((parent, child))
    return LabelTree(edges)


# ---------------------------------------------------------------------------
# kNN
# ---------------------------------------------------------------------------

class KnnClassifier:
    """Exact brute-force k-nearest-neighbour majority vote.

    Neighbours are ordered by (distance, training index). Vote ties go to
    the class with the smaller summed neighbour distance, then to the class
    whose nearest member has the smaller training index. Confidence is the
    winning vote fraction.
    """

    def __init__(self, k=5, metric="euclidean"):
        if k < 1:
            raise InvalidInputError("k must be >= 1")
        self.k = int(k)
        self.metric = metric
        self.X = None
        self.y = None

    def fit(self, features, labels):
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray([str(v) for v in labels], dtype=object)
        if X.ndim != 2:
            raise InvalidInputError("features must be a 2-D matrix")
        if X.shape[0] != y.size:
            raise InvalidInputError(f"{X.shape[0]} feature rows but {y.size} labels")
        if X.shape[0] < self.k:
            raise InvalidInputError(f"need at least k={self.k} samples, got {X.shape[0]}")
        self.X = X.copy()
        self.y = y
        return self

    @property
    def dimension(self):
        return self.X.shape[1]

    def predict_many(self, queries):
        Q = np.asarray(queries, dtype=np.float64)
        if Q.ndim == 1:
            Q = Q[None, :]
        if Q.shape[1] != self.dimension:
            raise InvalidInputError(f"query dimension {Q.shape[1]} does not match training ({self.dimension})")
        D = pairwise_distances(Q, self.X, self.metric)
        labels, confs = [], []
        for row in D:
            idx = np.argsort(row, kind="stable")[:self.k]
            votes: Dict[str, list] = {}
            for i in idx:
                entry = votes.setdefault(self.y[i], [0, 0.0, i])
                entry[0] += 1
                entry[1] += row[i]
                entry[2] = min(entry[2], i)
            best = min(votes.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[1][2]))
            labels.append(best[0])
            confs.append(best[1][0] / self.k)
        return labels, np.array(confs)

    def predict(self, query):
        labels, confs = self.predict_many(np.asarray(query, dtype=np.float64)[None, :])
        return labels[0], float(confs[0])

    # serialization hooks used by dataset_io
    def state(self):
        return {"kind": "knn", "k": self.k, "metric": self.metric, "labels": list(self.y)}, {"X": self.X}

    @classmethod
    def from_state(cls, meta, arrays):
        obj = cls(meta["k"], meta.get("metric", "euclidean"))
        obj.X = np.asarray(arrays["X"], dtype=np.float64)
        obj.y = np.asarray(meta["labels"], dtype=object)
        return obj


def knn_fit(features, labels, k=5):
    return KnnClassifier(k).fit(features, labels)


def knn_predict(model, query):
    return model.predict(query)


# ---------------------------------------------------------------------------
# cascade
# ---------------------------------------------------------------------------

@dataclass
class PredictionPath:
    labels: Tuple[str, ...]
    confidences: Tuple[float, ...]


@dataclass
class HierarchyCascade:
    tree: LabelTree
    node_classifiers: Dict[str, object]
    confidence_floor: float = 0.0
    train_counts: Dict[str, int] = field(default_factory=dict)


def hc_train(tree, features, label_paths, make_classifier: Optional[Callable] = None,
             confidence_floor=0.0, k=5):
    """Fit one classifier per multi-child parent (LCPN).

    Each node classifier sees exactly the samples whose path passes through
    that node, labelled by the child taken. ``make_classifier`` returns a
    fresh object with ``fit(X, y)`` and ``predict_many(Q)``; it defaults to
    :class:`KnnClassifier` with ``k`` neighbours (clamped to the node's
    sample count).
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(label_paths):
        raise InvalidInputError("features must be a matrix with one row per label path")
    paths = [tree.normalize_path(p) for p in label_paths]
    classifiers, counts = {}, {}
    for node in tree.multi_child_parents():
        depth = len(tree.path_to(node))
        prefix = tuple(tree.path_to(node))
        rows, targets = [], []
        for i, p in enumerate(paths):
            if len(p) > depth and p[:depth] == prefix:
                rows.append(i)
                targets.append(p[depth])
        if not rows:
            raise InvalidInputError(f"no training samples pass through node {node!r}")
        if make_classifier is None:
            clf = KnnClassifier(min(k, len(rows)))
        else:
            clf = make_classifier()
        classifiers[node] = clf.fit(X[rows], targets)
        counts[node] = len(rows)
    return HierarchyCascade(tree, classifiers, float(confidence_floor), counts)


def hc_predict_many(cascade, features, confidence_floor=None):
    """Top-down prediction for each row.

    Descends from the root, stopping at a leaf or before the first step whose
    confidence is below the floor. Single-child parents pass through with
    confidence 1.
    """
    floor = cascade.confidence_floor if confidence_floor is None else float(confidence_floor)
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    tree = cascade.tree
    labels = [[] for _ in range(X.shape[0])]
    confs = [[] for _ in range(X.shape[0])]
    active = {tree.root: list(range(X.shape[0]))}
    while active:
        nxt = {}
        for node, rows in active.items():
            kids = tree.children(node)
            if not kids or not rows:
                continue
            if len(kids) == 1:
                preds, pconf = [kids[0]] * len(rows), np.ones(len(rows))
            else:
                preds, pconf = cascade.node_classifiers[node].predict_many(X[rows])
            for r, lab, c in zip(rows, preds, pconf):
                if c < floor:
                    continue
                labels[r].append(lab)
                confs[r].append(float(c))
                nxt.setdefault(lab, []).append(r)
        active = nxt
    return [PredictionPath(tuple(l), tuple(c)) for l, c in zip(labels, confs)]


def hc_predict(cascade, features, confidence_floor=None):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("hc_predict takes a single feature vector")
    dims = {c.dimension for c in cascade.node_classifiers.values()}
    if dims and x.size not in dims:
        raise InvalidInputError(f"feature dimension {x.size} does not match the cascade ({sorted(dims)})")
    return hc_predict_many(cascade, x, confidence_floor)[0]


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def flat_metrics(predictions, truth):
    """One-vs-rest confusion counts and metrics per class plus macro averages.

    ``accuracy`` per class is (TP+TN)/N; the top-level ``accuracy`` is the
    fraction of exact matches. Zero denominators give 0 and are listed in
    ``flags``.
    """
    pred = [str(p) for p in predictions]
    true = [str(t) for t in truth]
    if len(pred) != len(true):
        raise InvalidInputError(f"{len(pred)} predictions vs {len(true)} truths")
    n = len(true)
    classes = sorted(set(pred) | set(true))
    per_class, flags = {}, []
    for c in classes:
        tp = sum(1 for p, t in zip(pred, true) if p == c and t == c)
        fp = sum(1 for p, t in zip(pred, true) if p == c and t != c)
        fn = sum(1 for p, t in zip(pred, true) if p != c and t == c)
        tn = n - tp - fp - fn
        prec = _safe_div(tp, tp + fp, f"{c}.precision", flags)
        rec = _safe_div(tp, tp + fn, f"{c}.recall", flags)
        f1 = _safe_div(2 * prec * rec, prec + rec, f"{c}.f1", flags)
        per_class[c] = {"tp": tp, "fp": fp, "fn": fn, "tn": tn,
                        "accuracy": (tp + tn) / n if n else 0.0,
                        "precision": prec, "recall": rec, "f1": f1}
    macro = {m: float(np.mean([per_class[c][m] for c in classes])) if classes else 0.0
             for m in ("accuracy", "precision", "recall", "f1")}
    overall = sum(1 for p, t in zip(pred, true) if p == t) / n if n else 0.0
    return {"per_class": per_class, "macro": macro, "accuracy": overall, "n": n, "flags": flags}


def _safe_div(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def _node_set(tree, path):
    path = tree.normalize_path(path)
    return set(path)


def hier_metrics(pred_paths, true_paths, tree, beta=1.0):
    """Hierarchical precision, recall and F-beta over ancestor-closed node sets.

    Sets exclude the root. An empty predicted path contributes nothing to the
    numerator or to the predicted-set total, and is counted in ``empty``.
    """
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    pred_paths = [p.labels if isinstance(p, PredictionPath) else p for p in pred_paths]
    if len(pred_paths) != len(true_paths):
        raise InvalidInputError(f"{len(pred_paths)} predicted vs {len(true_paths)} true paths")
    inter = n_pred = n_true = 0
    empty = 0
    for p, t in zip(pred_paths, true_paths):
        P, T = _node_set(tree, p), _node_set(tree, t)
        if not P:
            empty += 1
        inter += len(P & T)
        n_pred += len(P)
        n_true += len(T)
    flags = []
    hp = _safe_div(inter, n_pred, "hP", flags)
    hr = _safe_div(inter, n_true, "hR", flags)
    b2 = beta * beta
    hf = _safe_div((b2 + 1) * hp * hr, b2 * hp + hr, "hF", flags)
    return {"hP": hp, "hR": hr, "hF": hf, "empty_predictions": empty, "flags": flags}


def truncate(path, depth):
    return tuple(path)[:depth]


def level_report(pred_paths, true_paths, tree, beta=1.0):
    """Per-level hierarchical metrics and exact-match accuracy.

    Level ``d`` truncates both paths to their first ``d`` labels; samples
    whose true path is shallower than ``d`` are skipped.
    """
    pred_paths = [p.labels if isinstance(p, PredictionPath) else tuple(p) for p in pred_paths]
    true_paths = [tree.normalize_path(t) for t in true_paths]
    out = []
    for d in range(1, tree.depth() + 1):
        idx = [i for i, t in enumerate(true_paths) if len(t) >= d]
        if not idx:
            continue
        P = [truncate(pred_paths[i], d) for i in idx]
        T = [truncate(true_paths[i], d) for i in idx]
        m = hier_metrics(P, T, tree, beta)
        m["level"] = d
        m["n"] = len(idx)
        m["accuracy"] = sum(1 for a, b in zip(P, T) if a == b) / len(idx)
        out.append(m)
    return out


def leaf_accuracy(pred_paths, true_paths, tree):
    pred_paths = [p.labels if isinstance(p, PredictionPath) else tuple(p) for p in pred_paths]
    true_paths = [tree.normalize_path(t) for t in true_paths]
    return sum(1 for p, t in zip(pred_paths, true_paths) if tuple(p) == t) / len(true_paths)


def node_flat_reports(cascade, features, label_paths):
    """Flat metrics of every node classifier on the samples that truly reach it."""
    X = np.asarray(features, dtype=np.float64)
    tree = cascade.tree
    paths = [tree.normalize_path(p) for p in label_paths]
    out = {}
    for node, clf in cascade.node_classifiers.items():
        depth = len(tree.path_to(node))
        prefix = tuple(tree.path_to(node))
        rows = [i for i, p in enumerate(paths) if len(p) > depth and p[:depth] == prefix]
        if not rows:
            continue
        preds, _ = clf.predict_many(X[rows])
        out[node] = flat_metrics(preds, [paths[i][depth] for i in rows])
    return out
