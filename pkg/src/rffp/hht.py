"""
Hilbert-Huang analysis: EMD sifting, analytic signals and instantaneous
energy features.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.interpolate import CubicSpline

from ._kernels import count_zero_crossings, find_extrema
from .errors import InvalidInputError
from .features import STAT_NAMES, FeatureVector, stat_summary
from .signal import _samples

HHT_NAMES = tuple(f"imf{i}_energy_{s}" for i in (1, 2) for s in STAT_NAMES)

# mirrored extrema added beyond each boundary
_N_MIRROR = 2


@dataclass(frozen=True)
class EmdConfig:
    max_imfs: int = 8
    sift_sd_threshold: float = 0.2
    max_sift_iters: int = 100

    def __post_init__(self):
        if self.max_imfs < 2:
            raise InvalidInputError("max_imfs must be >= 2")
        if not self.sift_sd_threshold > 0:
            raise InvalidInputError("sift_sd_threshold must be positive")
        if self.max_sift_iters < 1:
            raise InvalidInputError("max_sift_iters must be >= 1")


@dataclass(frozen=True)
class EmdResult:
    imfs: List[np.ndarray]
    residual: np.ndarray
    meta: dict = field(default_factory=dict)

    def reconstruct(self):
        out = self.residual.copy()
        for imf in self.imfs:
            out = out + imf
        return out


@dataclass(frozen=True)
class AnalyticSeries:
    amplitude: np.ndarray
    phase: np.ndarray
    energy: np.ndarray

    def instantaneous_frequency(self):
        """Phase increment per sample, in cycles/sample."""
        return np.diff(self.phase) / (2 * np.pi)


def is_imf(x):
    maxima, minima = find_extrema(x)
    return abs(maxima.size + minima.size - count_zero_crossings(x)) <= 1


def _mirror(idx, vals, n):
    """Extend extrema by reflecting ``_N_MIRROR`` of them about each end."""
    k = min(_N_MIRROR, idx.size)
    left = -idx[:k][::-1]
    right = 2 * (n - 1) - idx[-k:][::-1]
    pos = np.concatenate([left, idx, right])
    v = np.concatenate([vals[:k][::-1], vals, vals[-k:][::-1]])
    # an extremum sitting on the boundary reflects onto itself
    pos, keep = np.unique(pos, return_index=True)
    return pos, v[keep]


def _envelope_mean(h, t):
    maxima, minima = find_extrema(h)
    if maxima.size < 2 or minima.size < 2:
        return None
    n = h.size
    up_x, up_y = _mirror(maxima, h[maxima], n)
    lo_x, lo_y = _mirror(minima, h[minima], n)
    upper = CubicSpline(up_x, up_y, bc_type="natural")(t)
    lower = CubicSpline(lo_x, lo_y, bc_type="natural")(t)
    return 0.5 * (upper + lower)


def _sift(x, config):
    """Extract one IMF candidate; returns (imf, converged)."""
    t = np.arange(x.size, dtype=np.float64)
    h = x.copy()
    for _ in range(config.max_sift_iters):
        m = _envelope_mean(h, t)
        if m is None:
            return h, is_imf(h)
        h_new = h - m
        denom = np.dot(h, h)
        sd = np.dot(m, m) / denom if denom > 0 else 0.0
        h = h_new
        if sd < config.sift_sd_threshold and is_imf(h):
            return h, True
    return h, is_imf(h)


def emd(signal, config=None):
    """Empirical mode decomposition by envelope-mean sifting.

    Envelopes are natural cubic splines through the extrema, extended by
    mirroring two extrema at each end. Sifting stops once the Cauchy SD
    ratio drops below ``sift_sd_threshold`` and the candidate satisfies the
    IMF extrema/zero-crossing condition. Decomposition stops when the
    residual has fewer than two maxima or minima, ``max_imfs`` is reached, or
    a candidate fails to become an IMF within ``max_sift_iters`` (it is then
    left in the residual).

    Examples
    --------
    >>> res = emd(np.arange(1.0, 101.0))
    >>> len(res.imfs)
    0
    """
    config = config or EmdConfig()
    x = _samples(signal).astype(np.float64)
    if x.size < 16:
        raise InvalidInputError("emd needs at least 16 samples")
    residual = x.copy()
    imfs = []
    stop = "max_imfs"
    while len(imfs) < config.max_imfs:
        maxima, minima = find_extrema(residual)
        if maxima.size < 2 or minima.size < 2:
            stop = "monotone"
            break
        imf, ok = _sift(residual, config)
        if not ok:
            stop = "not_converged"
            break
        imfs.append(imf)
        residual = residual - imf
    return EmdResult(imfs, residual, {"stop": stop})


def hilbert_analytic(imf):
    """Analytic signal via the DFT: negative bins zeroed, positive doubled.

    DC (and Nyquist for even lengths) are kept as is.
    """
    x = np.asarray(imf, dtype=np.float64).ravel()
    n = x.size
    if n == 0:
        raise InvalidInputError("hilbert_analytic needs a non-empty input")
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    z = np.fft.ifft(np.fft.fft(x) * h)
    amp = np.abs(z)
    return AnalyticSeries(amp, np.unwrap(np.angle(z)), amp * amp)


def hht_features(signal, config=None):
    """Thirteen statistics of the instantaneous energy of IMF1 and IMF2.

    Missing IMFs are replaced by zero sequences and flagged as
    ``imf1_missing`` / ``imf2_missing``.
    """
    x = _samples(signal)
    res = emd(x, config)
    values, flags = [], set()
    for i in (1, 2):
        if len(res.imfs) >= i:
            imf = res.imfs[i - 1]
        else:
            imf = np.zeros_like(x)
            flags.add(f"imf{i}_missing")
        summary = stat_summary(hilbert_analytic(imf).energy)
        values.append(summary.values)
        flags.update(f"imf{i}_energy_{s}" for s in summary.flags)
    return FeatureVector(HHT_NAMES, np.concatenate(values), "HHT26", flags)
