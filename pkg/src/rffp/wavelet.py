"""
Wavelet analysis: Haar DWT, two-level wavelet packets, analytic-Morlet CWT
and a two-layer wavelet scattering transform.

All convolutions in the CWT and the scattering transform are circular.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from ._util import atomic_write_bytes
from .errors import InvalidInputError
from .features import FeatureVector
from .signal import _samples

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Haar / WPT
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HaarDecomposition:
    approx: np.ndarray
    detail: np.ndarray
    dropped_sample: bool = False


@dataclass(frozen=True)
class WptPackets:
    aa: np.ndarray
    ad: np.ndarray
    da: np.ndarray
    dd: np.ndarray

    def as_tuple(self):
        return self.aa, self.ad, self.da, self.dd

    def energy(self):
        return float(sum(np.dot(p, p) for p in self.as_tuple()))


def haar_dwt(signal):
    """Single-level orthonormal Haar analysis.

    An odd trailing sample is dropped and ``dropped_sample`` is set.
    """
    x = _samples(signal)
    if x.size < 2:
        raise InvalidInputError("haar_dwt needs at least 2 samples")
    odd = bool(x.size % 2)
    if odd:
        x = x[:-1]
    even, odd_s = x[0::2], x[1::2]
    return HaarDecomposition((even + odd_s) / SQRT2, (even - odd_s) / SQRT2, odd)


def haar_idwt(dec):
    """Inverse of :func:`haar_dwt` for the retained (even-length) part."""
    a = np.asarray(dec.approx, dtype=np.float64)
    d = np.asarray(dec.detail, dtype=np.float64)
    if a.shape != d.shape:
        raise InvalidInputError(f"approx/detail length mismatch: {a.size} vs {d.size}")
    out = np.empty(2 * a.size)
    out[0::2] = (a + d) / SQRT2
    out[1::2] = (a - d) / SQRT2
    return out


def wpt_two_level(signal):
    """Two-level Haar packet tree: both branches of level one are split again."""
    x = _samples(signal)
    if x.size < 4:
        raise InvalidInputError("wpt_two_level needs at least 4 samples")
    first = haar_dwt(x)
    lo = haar_dwt(first.approx)
    hi = haar_dwt(first.detail)
    return WptPackets(lo.approx, lo.detail, hi.approx, hi.detail)


# ---------------------------------------------------------------------------
# CWT
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CwtConfig:
    """Continuous wavelet transform settings.

    Scales form the geometric grid ``min_scale * 2**(j / voices_per_octave)``.
    A scale ``s`` has centre frequency ``omega0 / (2 pi s)`` cycles/sample.
    """

    voices_per_octave: int = 12
    num_scales: int = 114
    omega0: float = 5.0
    min_scale: float = 2.0
    wavelet: str = "morlet"

    def __post_init__(self):
        if self.voices_per_octave < 1 or self.num_scales < 1:
            raise InvalidInputError("voices_per_octave and num_scales must be >= 1")
        if not self.omega0 > 0 or not self.min_scale > 0:
            raise InvalidInputError("omega0 and min_scale must be positive")
        if self.wavelet != "morlet":
            raise InvalidInputError("only the analytic Morlet wavelet is supported")

    def scales(self):
        j = np.arange(self.num_scales)
        return self.min_scale * 2.0 ** (j / self.voices_per_octave)

    def frequencies(self):
        return self.omega0 / (2 * np.pi * self.scales())


@dataclass(frozen=True)
class Scalogram:
    coefficients: np.ndarray  # complex, (num_scales, time)
    energy: np.ndarray
    scales: np.ndarray
    frequencies: np.ndarray

    @property
    def shape(self):
        return self.coefficients.shape


def _morlet_bank(n, scales, omega0):
    omega = 2 * np.pi * np.fft.fftfreq(n)
    positive = omega > 0
    if n % 2 == 0:
        # keep the Nyquist bin with the positive half
        positive[n // 2] = True
        omega = np.abs(omega)
    s = scales[:, None]
    norm = np.pi ** -0.25 * np.sqrt(2 * np.pi)
    bank = np.sqrt(s) * norm * np.exp(-0.5 * (s * omega[None, :] - omega0) ** 2)
    return bank * positive[None, :]


def scalogram_energy(scal):
    """Squared modulus of the coefficients."""
    c = np.asarray(scal.coefficients if isinstance(scal, Scalogram) else scal)
    return c.real * c.real + c.imag * c.imag


def cwt(signal, config=None):
    """Analytic Morlet CWT with ``1/sqrt(s)`` normalization.

    Computed as a circular correlation in the frequency domain; the Morlet
    spectrum is real so the conjugate in the correlation drops out.
    """
    config = config or CwtConfig()
    x = _samples(signal)
    if x.size < 16:
        raise InvalidInputError("cwt needs at least 16 samples")
    scales = config.scales()
    bank = _morlet_bank(x.size, scales, config.omega0)
    coeffs = np.fft.ifft(np.fft.fft(x)[None, :] * bank, axis=1)
    return Scalogram(coeffs, scalogram_energy(coeffs), scales, config.frequencies())


def cwt_avg_features(scal, part="real"):
    """One feature per scale: the time average of the coefficients.

    ``part="real"`` averages the real part. ``part="modulus"`` averages
    ``|w|`` instead, which is informative for zero-mean signals where the
    real-part average of an analytic transform collapses to the DC response.
    """
    c = scal.coefficients
    if c.size == 0:
        raise InvalidInputError("empty scalogram")
    if part == "real":
        vals = c.real.mean(axis=1)
        tag = "re"
    elif part == "modulus":
        vals = np.abs(c).mean(axis=1)
        tag = "abs"
    else:
        raise InvalidInputError(f"unknown part {part!r}")
    names = tuple(f"cwt_{tag}_s{j:03d}" for j in range(c.shape[0]))
    return FeatureVector(names, vals, "CWT_AVG")


def peak_frequency(scal):
    """Centre frequency of the scale with the largest time-averaged energy."""
    return float(scal.frequencies[int(np.argmax(scal.energy.mean(axis=1)))])


def render_scalogram(scal, path):
    """Write the scalogram energy as a binary 8-bit PGM (P5).

    The energy is log-compressed and min-max scaled per image. Row 0 is the
    finest scale, so coarse scales sit at the bottom.
    """
    e = np.asarray(scal.energy, dtype=np.float64)
    peak = e.max()
    if peak > 0:
        logged = np.log10(e + peak * 1e-12)
        lo, hi = logged.min(), logged.max()
        img = np.zeros_like(logged) if hi <= lo else (logged - lo) / (hi - lo)
    else:
        img = np.zeros_like(e)
    pix = np.round(img * 255.0).astype(np.uint8)
    rows, cols = pix.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    try:
        atomic_write_bytes(path, header + pix.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write scalogram to {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# wavelet scattering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WstConfig:
    """Scattering settings.

    ``invariance_scale`` defaults to the signal length. ``xi_max`` is the
    centre frequency (cycles/sample) of the highest wavelet in each bank.
    """

    invariance_scale: Optional[int] = None
    q1: int = 8
    q2: int = 4
    max_order: int = 2
    xi_max: float = 0.35

    def __post_init__(self):
        if not self.q1 >= self.q2 >= 1:
            raise InvalidInputError("quality factors need q1 >= q2 >= 1")
        if self.max_order != 2:
            raise InvalidInputError("max_order is fixed to 2")
        if self.invariance_scale is not None and self.invariance_scale < 2:
            raise InvalidInputError("invariance_scale must be >= 2")
        if not 0 < self.xi_max < 0.5:
            raise InvalidInputError("xi_max must lie in (0, 0.5)")


@dataclass(frozen=True)
class ScatteringPath:
    order: int
    filters: Tuple[int, ...]
    coefficients: np.ndarray


@dataclass(frozen=True)
class ScatteringResult:
    paths: List[ScatteringPath]
    step: int
    invariance_scale: int
    xi1: np.ndarray
    xi2: np.ndarray
    meta: dict = field(default_factory=dict)

    def energies(self):
        """Per-path energy at the full sampling rate (``step * sum |S|^2``)."""
        return np.array([self.step * float(np.dot(p.coefficients, p.coefficients)) for p in self.paths])

    def order_energy(self, order):
        e = self.energies()
        return float(sum(v for v, p in zip(e, self.paths) if p.order == order))

    def total_energy(self):
        return float(self.energies().sum())


def _sigma_constant_q(xi, q):
    # bandwidth at which neighbouring filters cross at 1/sqrt(2) amplitude
    factor = 2.0 ** (-1.0 / q)
    return xi * (1 - factor) / (1 + factor) / np.sqrt(np.log(2.0))


def _morlet_freq(nu, xi, sigma):
    g = np.exp(-((nu - xi) ** 2) / (2 * sigma ** 2))
    kappa = np.exp(-(xi ** 2) / (2 * sigma ** 2))
    return g - kappa * np.exp(-(nu ** 2) / (2 * sigma ** 2))


def _bank_centres(q, xi_max, t):
    sigma_floor = 2.0 / (np.pi * t)
    xis = []
    j = 0
    while True:
        xi = xi_max * 2.0 ** (-j / q)
        if _sigma_constant_q(xi, q) < sigma_floor:
            break
        xis.append(xi)
        j += 1
    return np.array(xis)


@lru_cache(maxsize=32)
def _filter_banks(n, t, q1, q2, xi_max):
    nu = np.fft.fftfreq(n)
    phi = np.exp(-(nu ** 2) / (2 * (0.1 / t) ** 2))
    banks = []
    for q in (q1, q2):
        xis = _bank_centres(q, xi_max, t)
        psi = np.array([_morlet_freq(nu, xi, _sigma_constant_q(xi, q)) for xi in xis]).reshape(len(xis), n)
        # Littlewood-Paley bound for real inputs: |phi|^2 + sym(sum |psi|^2) <= 1
        sym = 0.5 * (psi ** 2 + np.roll(psi[:, ::-1], 1, axis=1) ** 2).sum(axis=0)
        ok = sym > 1e-300
        if ok.any():
            psi = psi * np.sqrt(np.min((1.0 - phi[ok] ** 2) / sym[ok]))
        psi.flags.writeable = False
        xis.flags.writeable = False
        banks.append((xis, psi))
    phi.flags.writeable = False
    return phi, banks[0], banks[1]


def _subsample_step(n, t):
    target = max(1, t // 2)
    for step in range(min(target, n), 0, -1):
        if n % step == 0:
            return step
    return 1


def wst(signal, config=None):
    """Two-layer scattering: ``S0 = f*phi``, ``S1 = |f*psi1|*phi``,
    ``S2 = ||f*psi1|*psi2|*phi`` for second-bank filters below the first.

    Low-pass outputs are subsampled by roughly half the invariance scale.
    """
    config = config or WstConfig()
    x = _samples(signal)
    n = x.size
    t = int(config.invariance_scale or n)
    if n < t / 4 or n < 4:
        raise InvalidInputError(f"signal of length {n} too short for invariance scale {t}")
    phi, (xi1, psi1), (xi2, psi2) = _filter_banks(n, t, config.q1, config.q2, config.xi_max)
    step = _subsample_step(n, t)

    def lowpass(spec):
        return np.fft.ifft(spec * phi, axis=-1).real[..., ::step]

    fx = np.fft.fft(x)
    paths = [ScatteringPath(0, (), lowpass(fx))]

    u1 = np.abs(np.fft.ifft(fx[None, :] * psi1, axis=1))
    fu1 = np.fft.fft(u1, axis=1)
    s1 = lowpass(fu1)
    for j1 in range(len(xi1)):
        paths.append(ScatteringPath(1, (j1,), s1[j1]))

    for j1 in range(len(xi1)):
        keep = np.flatnonzero(xi2 < xi1[j1])
        if keep.size == 0:
            continue
        u2 = np.abs(np.fft.ifft(fu1[j1][None, :] * psi2[keep], axis=1))
        s2 = lowpass(np.fft.fft(u2, axis=1))
        for row, j2 in enumerate(keep):
            paths.append(ScatteringPath(2, (j1, int(j2)), s2[row]))

    return ScatteringResult(paths, step, t, xi1, xi2)


def wst_avg_features(res):
    """Mean of every scattering path, in path order."""
    if not res.paths:
        raise InvalidInputError("empty scattering result")
    names = []
    for p in res.paths:
        if p.order == 0:
            names.append("wst_s0")
        else:
            names.append("wst_s%d_" % p.order + "_".join(f"{j:02d}" for j in p.filters))
    vals = np.array([p.coefficients.mean() for p in res.paths])
    return FeatureVector(tuple(names), vals, "WST_AVG")
