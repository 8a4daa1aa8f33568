"""
Library-level pipeline: feature extraction over a manifest, the SDAE-LOF
novelty detector, the hierarchical identifier and SNR sweeps.

The command-line front end only parses arguments and writes files; every
number it reports comes from these functions.
"""
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import dataset_io as dio
from .anomaly import DEFAULT_K, DEFAULT_METRIC, calibrate_threshold, lof_fit, lof_scores
from .compress import TrainConfig, sdae_encode, sdae_train
from .errors import InvalidInputError
from .features import assemble_hht_wpt, wpt_features
from .hht import EmdConfig, hht_features
from .hierarchy import (LabelTree, flat_metrics, hc_predict_many, hc_train, leaf_accuracy,
                        level_report, node_flat_reports, tree_from_paths)
from .wavelet import CwtConfig, WstConfig, cwt, cwt_avg_features, wpt_two_level, wst, wst_avg_features

METHODS = ("hht-wpt", "hht", "wpt", "cwt", "wst")
DEFAULT_SWEEP_SNRS = (30, 25, 20, 15, 10, 5, 0, -8)


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def make_extractor(method, config=None):
    """Return ``signal -> FeatureVector`` for a method name.

    ``config`` may hold ``emd``, ``cwt`` and ``wst`` sub-dicts of config
    fields, and ``cwt_part`` (``"real"`` or ``"modulus"``).
    """
    config = dict(config or {})
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}; expected one of {METHODS}")
    if method in ("hht-wpt", "hht"):
        emd_cfg = EmdConfig(**config.get("emd", {}))
        if method == "hht":
            return lambda s: hht_features(s, emd_cfg)
        return lambda s: assemble_hht_wpt(s, emd_cfg)
    if method == "wpt":
        return lambda s: wpt_features(wpt_two_level(s))
    if method == "cwt":
        cwt_cfg = CwtConfig(**config.get("cwt", {}))
        part = config.get("cwt_part", "real")
        return lambda s: cwt_avg_features(cwt(s, cwt_cfg), part=part)
    wst_cfg = WstConfig(**config.get("wst", {}))
    return lambda s: wst_avg_features(wst(s, wst_cfg))


def extract_features(manifest, method="hht-wpt", config=None, entries=None):
    """Feature table for the manifest's entries, in manifest order."""
    extractor = make_extractor(method, config)
    entries = manifest.entries if entries is None else entries
    if not entries:
        raise InvalidInputError("no manifest entries to extract")
    cache = dio.ParentCache(manifest)
    rows, flags, names, source = [], [], None, ""
    for e in entries:
        fv = extractor(dio.materialize(manifest, e, cache))
        if names is None:
            names, source = fv.names, fv.source
        rows.append(fv.values)
        flags.append(";".join(sorted(fv.flags)))
    return dio.FeatureTable([e.id for e in entries], [e.label_path for e in entries],
                            [e.split for e in entries], tuple(names), np.array(rows), flags, source)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    @classmethod
    def identity(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    def apply(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


# ---------------------------------------------------------------------------
# detector
# ---------------------------------------------------------------------------

@dataclass
class Detector:
    sdae: object
    lof: object
    known_paths: List[Tuple[str, ...]]
    meta: dict = field(default_factory=dict)

    def is_known(self, label_path):
        return tuple(label_path) in set(self.known_paths)


def _has_prefix(path, prefix):
    return prefix is None or tuple(path[:len(prefix)]) == tuple(prefix)


def train_detector(manifest, train_config=None, k=DEFAULT_K, metric=DEFAULT_METRIC,
                   quantile=0.95, known_prefix=None, progress=None):
    """SDAE on clean training slices, LOF on their noisy latent codes.

    Only entries whose label path starts with ``known_prefix`` (all entries
    when ``None``) are treated as the recognized population. The LOF
    threshold is calibrated on the validation split when it is non-empty.
    """
    known = manifest.filter(lambda e: _has_prefix(e.label_path, known_prefix))
    train = known.split("train")
    if not train:
        raise InvalidInputError("no known-class training entries in the manifest")
    clean = dio.materialize_all(dio.resnr_manifest(known, None), train)
    sdae = sdae_train(clean, train_config or TrainConfig(), progress)
    noisy = dio.materialize_all(known, train)
    codes = sdae_encode(sdae, np.array([s.samples for s in noisy]))
    lof = lof_fit(codes, k, metric)
    val = known.split("validation")
    if val:
        val_codes = sdae_encode(sdae, np.array([s.samples for s in dio.materialize_all(known, val)]))
        lof = calibrate_threshold(lof, val_codes, quantile)
    meta = {"quantile": quantile if val else None, "n_reference": len(train), "n_calibration": len(val),
            "known_prefix": list(known_prefix) if known_prefix else None}
    return Detector(sdae, lof, sorted(set(e.label_path for e in train)), meta)


@dataclass
class DetectionReport:
    ids: List[str]
    label_paths: List[Tuple[str, ...]]
    truth: List[str]
    decisions: List[str]
    scores: np.ndarray
    metrics: dict

    @property
    def accuracy(self):
        return self.metrics["accuracy"]


def detection_scores(detector, signals):
    X = np.array([s.samples for s in signals])
    if X.shape[1] != detector.sdae.input_dim:
        raise InvalidInputError(f"signal length {X.shape[1]} does not match the detector ({detector.sdae.input_dim})")
    return lof_scores(detector.lof, sdae_encode(detector.sdae, X))


def detect(detector, manifest, split="test"):
    """Label every entry of ``split`` inlier/outlier and score it against the truth."""
    entries = manifest.entries if split is None else manifest.split(split)
    if not entries:
        raise InvalidInputError(f"no entries in split {split!r}")
    scores = detection_scores(detector, dio.materialize_all(manifest, entries))
    decisions = ["outlier" if s > detector.lof.threshold else "inlier" for s in scores]
    truth = ["inlier" if detector.is_known(e.label_path) else "outlier" for e in entries]
    return DetectionReport([e.id for e in entries], [e.label_path for e in entries], truth,
                           decisions, scores, flat_metrics(decisions, truth))


# ---------------------------------------------------------------------------
# hierarchical identification
# ---------------------------------------------------------------------------

@dataclass
class Identifier:
    cascade: object
    feature_names: Tuple[str, ...]
    scaler: Standardizer
    meta: dict = field(default_factory=dict)


def _root_rows(table, root, split):
    return [i for i, (p, s) in enumerate(zip(table.label_paths, table.splits))
            if (split is None or s == split) and (root is None or p[0] == root)]


def train_hc(table, tree=None, root=None, k=5, confidence_floor=0.0, standardize=True):
    """Fit the LCPN cascade on the training rows of a feature table.

    ``root`` restricts training to one hierarchy when the table mixes
    several; ``tree`` defaults to the tree spanned by the training paths.
    """
    rows = _root_rows(table, root, "train")
    if not rows:
        raise InvalidInputError("no training rows" + (f" under root {root!r}" if root else ""))
    paths = [table.label_paths[i] for i in rows]
    if tree is None:
        roots = {p[0] for p in paths}
        if len(roots) != 1:
            raise InvalidInputError(f"training paths have several roots {sorted(roots)}; choose one with root=")
        tree = tree_from_paths(paths)
    X = table.values[rows]
    scaler = Standardizer.fit(X) if standardize else Standardizer.identity(X.shape[1])
    cascade = hc_train(tree, scaler.apply(X), paths, confidence_floor=confidence_floor, k=k)
    return Identifier(cascade, tuple(table.names), scaler,
                      {"k": k, "standardize": bool(standardize), "n_train": len(rows), "source": table.source})


@dataclass
class IdentificationReport:
    ids: List[str]
    true_paths: List[Tuple[str, ...]]
    predictions: list
    node_metrics: Dict[str, dict]
    levels: List[dict]
    leaf_accuracy: float

    def level_accuracy(self, level):
        for m in self.levels:
            if m["level"] == level:
                return m["accuracy"]
        raise KeyError(level)


def identify(identifier, table, split="test", confidence_floor=None):
    """Top-down predictions plus per-node flat and per-level hierarchical metrics."""
    if tuple(table.names) != tuple(identifier.feature_names):
        raise InvalidInputError("feature columns do not match the identifier's training features")
    tree = identifier.cascade.tree
    rows = _root_rows(table, tree.root, split)
    if not rows:
        raise InvalidInputError(f"no {split} rows under root {tree.root!r}")
    X = identifier.scaler.apply(table.values[rows])
    true = [tree.normalize_path(table.label_paths[i]) for i in rows]
    preds = hc_predict_many(identifier.cascade, X, confidence_floor)
    return IdentificationReport([table.ids[i] for i in rows], true, preds,
                                node_flat_reports(identifier.cascade, X, true),
                                level_report(preds, true, tree), leaf_accuracy(preds, true, tree))


# ---------------------------------------------------------------------------
# SNR sweep
# ---------------------------------------------------------------------------

def snr_sweep(manifest, snrs=DEFAULT_SWEEP_SNRS, detector=None, identifier=None, method="hht-wpt",
              config=None, split="test"):
    """Re-corrupt the split at each SNR and evaluate the given model.

    Exactly one of ``detector`` / ``identifier`` must be given. Each row
    holds the SNR, the stage metrics and wall-clock seconds per stage (the
    first SNR point is preceded by an untimed warm-up call).
    """
    if (detector is None) == (identifier is None):
        raise InvalidInputError("give exactly one of detector or identifier")
    entries = manifest.split(split)
    if not entries:
        raise InvalidInputError(f"no entries in split {split!r}")
    sub = manifest.filter(lambda e: e.split == split)
    rows = []
    warm = dio.resnr_manifest(sub, snrs[0])
    if detector is not None:
        detection_scores(detector, dio.materialize_all(warm, warm.entries[:1]))
    else:
        make_extractor(method, config)(dio.materialize(warm, warm.entries[0]))
    for snr in snrs:
        m = dio.resnr_manifest(sub, snr)
        t0 = time.perf_counter()
        if detector is not None:
            signals = dio.materialize_all(m)
            t1 = time.perf_counter()
            scores = detection_scores(detector, signals)
            t2 = time.perf_counter()
            decisions = ["outlier" if s > detector.lof.threshold else "inlier" for s in scores]
            truth = ["inlier" if detector.is_known(e.label_path) else "outlier" for e in m.entries]
            met = flat_metrics(decisions, truth)
            rows.append({"snr_db": float(snr), "n": len(truth), "accuracy": met["accuracy"],
                         "outlier_recall": met["per_class"].get("outlier", {}).get("recall", 0.0),
                         "inlier_recall": met["per_class"].get("inlier", {}).get("recall", 0.0),
                         "materialize_s": t1 - t0, "inference_s": t2 - t1})
        else:
            table = extract_features(m, method, config)
            t1 = time.perf_counter()
            rep = identify(identifier, table, split)
            t2 = time.perf_counter()
            rows.append({"snr_db": float(snr), "n": len(rep.ids), "accuracy": rep.leaf_accuracy,
                         "level1_accuracy": rep.level_accuracy(1),
                         "hF": rep.levels[-1]["hF"],
                         "features_s": t1 - t0, "inference_s": t2 - t1})
    return rows


TIMING_SUFFIX = "_s"


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------

def save_detector(path, detector):
    smeta, sarr = dio.sdae_state(detector.sdae)
    lmeta, larr = dio.lof_state(detector.lof)
    arrays = {f"sdae/{k}": v for k, v in sarr.items()}
    arrays.update({f"lof/{k}": v for k, v in larr.items()})
    meta = {"sdae": smeta, "lof": lmeta, "known_paths": [list(p) for p in detector.known_paths],
            "detector": detector.meta}
    dio.save_model(path, "detector", meta, arrays)


def _strip(arrays, prefix):
    return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}


def load_detector(path):
    _, meta, arrays = dio.load_model(path, "detector")
    return Detector(dio.sdae_from_state(meta["sdae"], _strip(arrays, "sdae/")),
                    dio.lof_from_state(meta["lof"], _strip(arrays, "lof/")),
                    [tuple(p) for p in meta["known_paths"]], meta.get("detector", {}))


def save_identifier(path, identifier):
    cmeta, carr = dio.cascade_state(identifier.cascade)
    arrays = {f"cascade/{k}": v for k, v in carr.items()}
    arrays["scaler/mean"] = identifier.scaler.mean
    arrays["scaler/scale"] = identifier.scaler.scale
    meta = {"cascade": cmeta, "feature_names": list(identifier.feature_names), "identifier": identifier.meta}
    dio.save_model(path, "identifier", meta, arrays)


def load_identifier(path):
    _, meta, arrays = dio.load_model(path, "identifier")
    cascade = dio.cascade_from_state(meta["cascade"], _strip(arrays, "cascade/"))
    return Identifier(cascade, tuple(meta["feature_names"]),
                      Standardizer(arrays["scaler/mean"], arrays["scaler/scale"]), meta.get("identifier", {}))
