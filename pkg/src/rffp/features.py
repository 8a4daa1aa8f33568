"""
Statistical summaries and feature-vector assembly.

Undefined statistics (zero mean under a ratio, zero spread, zero energy, a
harmonic mean over non-positive values, fewer than two samples for the
``N-1`` estimators) are reported as 0 and listed in ``flags``; no feature is
ever NaN.
"""
from dataclasses import dataclass, field
from typing import FrozenSet, Tuple

import numpy as np

from .errors import InvalidInputError

SOURCES = ("HHT26", "WPT16", "HHT_WPT42", "CWT_AVG", "WST_AVG")

STAT_NAMES = (
    "mean",
    "harmonic_mean",
    "std",
    "variance",
    "kurtosis",
    "rms",
    "shape_factor",
    "peak",
    "peak_to_peak",
    "iqr",
    "shannon_entropy",
    "summation",
    "skewness",
)

WPT_STATS = ("std", "variance", "peak_to_peak", "shannon_entropy")
WPT_PACKETS = ("aa", "ad", "da", "dd")


@dataclass(frozen=True)
class FeatureVector:
    names: Tuple[str, ...]
    values: np.ndarray
    source: str
    flags: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).ravel()
        names = tuple(self.names)
        if len(names) != vals.size:
            raise InvalidInputError(f"{len(names)} names for {vals.size} values")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("feature values must be finite")
        if self.source not in SOURCES:
            raise InvalidInputError(f"unknown feature source {self.source!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "flags", frozenset(self.flags))

    def __len__(self):
        return self.values.size

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


@dataclass(frozen=True)
class StatSummary:
    values: np.ndarray
    flags: FrozenSet[str]

    def __getitem__(self, name):
        return float(self.values[STAT_NAMES.index(name)])

    def as_dict(self):
        return dict(zip(STAT_NAMES, self.values.tolist()))


def shannon_entropy(x):
    """Entropy of the unit-energy normalized series, natural log.

    Returns ``(value, defined)``; a zero-energy series is undefined.
    """
    x = np.asarray(x, dtype=np.float64)
    e = np.dot(x, x)
    if e <= 0.0:
        return 0.0, False
    p = x * x / e
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz))), True


def stat_summary(series):
    """The thirteen table statistics of ``series``, in :data:`STAT_NAMES` order.

    Standard deviation uses ``N-1`` and variance ``N``, so ``std**2`` and
    ``variance`` differ; kurtosis and skewness are normalized by
    ``(N-1) * std**k`` (non-excess). Quantiles interpolate linearly.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    n = x.size
    if n == 0:
        raise InvalidInputError("stat_summary needs a non-empty series")
    flags = set()
    out = dict.fromkeys(STAT_NAMES, 0.0)

    mean = float(np.mean(x))
    out["mean"] = mean
    if np.all(x > 0):
        out["harmonic_mean"] = float(n / np.sum(1.0 / x))
    else:
        flags.add("harmonic_mean")

    dev = x - mean
    ss = float(np.dot(dev, dev))
    out["variance"] = ss / n
    std = np.sqrt(ss / (n - 1)) if n > 1 else 0.0
    if n > 1:
        out["std"] = float(std)
    else:
        flags.add("std")
    if std > 0 and n > 1:
        out["kurtosis"] = float(np.sum(dev ** 4) / ((n - 1) * std ** 4))
        out["skewness"] = float(np.sum(dev ** 3) / ((n - 1) * std ** 3))
    else:
        flags.update(("kurtosis", "skewness"))

    rms = float(np.sqrt(np.mean(x * x)))
    out["rms"] = rms
    if mean != 0.0:
        out["shape_factor"] = rms / mean
    else:
        flags.add("shape_factor")

    out["peak"] = float(np.max(x))
    out["peak_to_peak"] = float(np.max(x) - np.min(x))
    q1, q3 = np.percentile(x, [25, 75])
    out["iqr"] = float(q3 - q1)
    h, ok = shannon_entropy(x)
    out["shannon_entropy"] = h
    if not ok:
        flags.add("shannon_entropy")
    out["summation"] = float(np.sum(x))
    return StatSummary(np.array([out[k] for k in STAT_NAMES]), frozenset(flags))


def wpt_features(packets):
    """Std, variance, peak-to-peak and entropy of each of the four packets."""
    names, vals, flags = [], [], set()
    for pname, p in zip(WPT_PACKETS, packets.as_tuple()):
        summary = stat_summary(p)
        for stat in WPT_STATS:
            key = f"wpt_{pname}_{stat}"
            names.append(key)
            vals.append(summary[stat])
            if stat in summary.flags:
                flags.add(key)
    return FeatureVector(tuple(names), vals, "WPT16", flags)


def hht_wpt_names():
    from .hht import HHT_NAMES

    return HHT_NAMES + tuple(f"wpt_{p}_{s}" for p in WPT_PACKETS for s in WPT_STATS)


def assemble_hht_wpt(signal, emd_config=None):
    """Concatenate the 26 HHT features and the 16 WPT features."""
    from .hht import hht_features
    from .wavelet import wpt_two_level

    h = hht_features(signal, emd_config)
    w = wpt_features(wpt_two_level(signal))
    return FeatureVector(h.names + w.names, np.concatenate([h.values, w.values]),
                         "HHT_WPT42", h.flags | w.flags)
