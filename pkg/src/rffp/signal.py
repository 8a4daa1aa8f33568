"""
Signal representation, channel simulation, burst segmentation and the
synthetic device generator.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError
from .rng import Stream

DEFAULT_RMS_WINDOW = 64


@dataclass(frozen=True)
class Signal:
    """A finite, real, uniformly sampled waveform.

    Parameters
    ----------
    samples : array_like
        Real amplitudes. Stored as a read-only float64 array.
    sample_rate_hz : float
        Positive sample rate.
    label_path : tuple of str, optional
        Labels from the hierarchy root down to the device leaf.
    snr_db : float, optional
        Nominal SNR the signal was produced at.
    seed : int, optional
        Seed used to generate or corrupt the signal.
    """

    samples: np.ndarray
    sample_rate_hz: float = 1.0
    label_path: Optional[Tuple[str, ...]] = None
    snr_db: Optional[float] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64).ravel()
        if x.size == 0:
            raise InvalidInputError("signal must be non-empty")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("signal samples must be finite")
        if not self.sample_rate_hz > 0:
            raise InvalidInputError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        if self.label_path is not None:
            object.__setattr__(self, "label_path", tuple(self.label_path))

    def __len__(self):
        return self.samples.size

    def with_samples(self, samples, **changes):
        """Copy with new samples, keeping metadata unless overridden."""
        return replace(self, samples=samples, **changes)


@dataclass(frozen=True)
class BurstSegment:
    start_index: int
    end_index: int
    kind: str  # "transient" | "steady"

    def __post_init__(self):
        if not 0 <= self.start_index < self.end_index:
            raise InvalidInputError(f"invalid segment bounds [{self.start_index}, {self.end_index})")
        if self.kind not in ("transient", "steady"):
            raise InvalidInputError(f"unknown segment kind {self.kind!r}")

    def __len__(self):
        return self.end_index - self.start_index


@dataclass(frozen=True)
class DeviceSpec:
    """Parameters of one synthetic emitter class.

    ``carrier_bins`` are normalized frequencies (cycles/sample) visited in
    cyclic order, one per dwell of ``hop_period`` samples. The steady state is
    amplitude modulated at ``am_freq`` with depth ``am_depth``. The per-signal
    jitters model hardware spread between captures of the same device.
    """

    class_path: Tuple[str, ...]
    carrier_bins: Tuple[float, ...]
    hop_period: int = 4096
    ramp_length: int = 128
    amplitude: float = 1.0
    am_depth: float = 0.0
    am_freq: float = 0.004
    amp_jitter: float = 0.0
    freq_jitter: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "class_path", tuple(self.class_path))
        object.__setattr__(self, "carrier_bins", tuple(float(f) for f in self.carrier_bins))
        self.validate()

    def validate(self):
        if not self.class_path:
            raise InvalidInputError("class_path must be non-empty")
        if not self.carrier_bins:
            raise InvalidInputError("at least one carrier is required")
        for f in self.carrier_bins:
            if not 0.0 < f < 0.5:
                raise InvalidInputError(f"carrier {f} outside (0, 0.5)")
        if not 0.0 < self.am_freq < 0.5:
            raise InvalidInputError(f"am_freq {self.am_freq} outside (0, 0.5)")
        if self.hop_period < 1:
            raise InvalidInputError("hop_period must be >= 1")
        if self.ramp_length < 0:
            raise InvalidInputError("ramp_length must be >= 0")
        if not self.amplitude > 0:
            raise InvalidInputError("amplitude must be positive")
        if not 0.0 <= self.am_depth <= 1.0:
            raise InvalidInputError("am_depth must lie in [0, 1]")
        if self.amp_jitter < 0 or self.freq_jitter < 0:
            raise InvalidInputError("jitters must be non-negative")


def _samples(signal):
    if isinstance(signal, Signal):
        return signal.samples
    x = np.asarray(signal, dtype=np.float64).ravel()
    if x.size == 0:
        raise InvalidInputError("signal must be non-empty")
    return x


def _rewrap(template, samples, **changes):
    if isinstance(template, Signal):
        return template.with_samples(samples, **changes)
    return samples


def signal_power(signal):
    """Mean of squared samples."""
    x = _samples(signal)
    return float(np.mean(x * x))


def add_awgn(signal, target_snr_db, seed):
    """Add white Gaussian noise at ``target_snr_db`` relative to the signal power.

    The reference power is measured over the whole input. Noise comes from
    :class:`rffp.rng.Stream` seeded with ``seed``, so the result is
    bit-reproducible.
    """
    x = _samples(signal)
    p = signal_power(x)
    if p <= 0.0:
        raise InvalidInputError("cannot set an SNR on a zero-power signal")
    noise_var = p / 10.0 ** (float(target_snr_db) / 10.0)
    noise = np.sqrt(noise_var) * Stream(seed).normal(x.size)
    return _rewrap(signal, x + noise, snr_db=float(target_snr_db), seed=int(seed))


def minmax_normalize(signal, ref_min, ref_max):
    """Linear map sending ``ref_min -> 0`` and ``ref_max -> 1`` (no clamping)."""
    if not ref_max > ref_min:
        raise InvalidInputError(f"ref_max ({ref_max}) must exceed ref_min ({ref_min})")
    x = _samples(signal)
    return _rewrap(signal, (x - ref_min) / (ref_max - ref_min))


def minmax_denormalize(signal, ref_min, ref_max):
    """Inverse of :func:`minmax_normalize`."""
    if not ref_max > ref_min:
        raise InvalidInputError(f"ref_max ({ref_max}) must exceed ref_min ({ref_min})")
    x = _samples(signal)
    return _rewrap(signal, x * (ref_max - ref_min) + ref_min)


def windowed_rms(x, window=DEFAULT_RMS_WINDOW):
    """Centered moving RMS with zero padding at the ends."""
    x = np.asarray(x, dtype=np.float64)
    w = max(1, min(int(window), x.size))
    kernel = np.full(w, 1.0 / w)
    ms = np.convolve(x * x, kernel, mode="same")
    return np.sqrt(np.maximum(ms, 0.0))


def detect_bursts(signal, threshold, min_gap=0, window=DEFAULT_RMS_WINDOW):
    """Locate bursts by thresholding the moving RMS.

    Each maximal run where the RMS exceeds ``threshold`` (runs separated by
    fewer than ``min_gap`` samples are merged) is split into a transient
    segment, up to the first sample whose RMS reaches 90% of the run's peak,
    and a steady segment covering the remainder.

    Returns
    -------
    list of BurstSegment
        In time order; a run whose RMS peaks immediately has no transient.
    """
    if not threshold > 0:
        raise InvalidInputError("threshold must be positive")
    x = _samples(signal)
    rms = windowed_rms(x, window)
    above = rms > threshold
    if not above.any():
        return []
    padded = np.concatenate(([False], above, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    runs = [[int(a), int(b)] for a, b in zip(edges[0::2], edges[1::2])]

    merged = [runs[0]]
    for a, b in runs[1:]:
        if a - merged[-1][1] < min_gap:
            merged[-1][1] = b
        else:
            merged.append([a, b])

    segments = []
    for a, b in merged:
        seg = rms[a:b]
        split = a + int(np.argmax(seg >= 0.9 * seg.max()))
        if split > a:
            segments.append(BurstSegment(a, split, "transient"))
        segments.append(BurstSegment(split, b, "steady"))
    return segments


def slice_steady(signal, segment, n=1024):
    """Cut consecutive non-overlapping length-``n`` slices from a steady segment."""
    if segment.kind != "steady":
        raise InvalidInputError("slice_steady needs a steady segment")
    if n < 1:
        raise InvalidInputError("slice length must be >= 1")
    x = _samples(signal)
    if segment.end_index > x.size:
        raise InvalidInputError("segment extends beyond the signal")
    count = len(segment) // n
    out = []
    for i in range(count):
        lo = segment.start_index + i * n
        piece = x[lo:lo + n].copy()
        if isinstance(signal, Signal):
            out.append(signal.with_samples(piece, meta={"offset": lo}))
        else:
            out.append(Signal(piece))
    return out


def synth_generate(spec, length, seed, sample_rate_hz=1.0):
    """Generate one clean capture of a synthetic device.

    The waveform is a linear amplitude ramp of ``spec.ramp_length`` samples
    followed by the steady state; the carrier phase is continuous across hops.
    Initial phases, the hop offset and the jitters are drawn from ``seed``.
    """
    spec.validate()
    length = int(length)
    if length < max(spec.ramp_length, 1):
        raise InvalidInputError(f"length {length} shorter than the ramp ({spec.ramp_length})")
    rs = Stream(seed)
    carriers = np.asarray(spec.carrier_bins)
    n_car = carriers.size
    phase0 = rs.uniform(0.0, 2 * np.pi)
    am_phase = rs.uniform(0.0, 2 * np.pi)
    hop_offset = int(rs.integers(0, n_car)) if n_car > 1 else 0
    freq_scale = 1.0 + spec.freq_jitter * rs.normal(1)[0]
    amp = spec.amplitude * (1.0 + spec.amp_jitter * rs.normal(1)[0])

    t = np.arange(length)
    dwell = t // spec.hop_period
    inst_freq = np.clip(carriers[(dwell + hop_offset) % n_car] * freq_scale, 1e-6, 0.5 - 1e-6)
    phase = phase0 + 2 * np.pi * np.concatenate(([0.0], np.cumsum(inst_freq[:-1])))
    carrier = np.cos(phase)

    envelope = np.full(length, amp)
    if spec.am_depth > 0:
        envelope *= 1.0 + spec.am_depth * np.sin(2 * np.pi * spec.am_freq * t + am_phase)
    if spec.ramp_length > 0:
        envelope[:spec.ramp_length] *= (np.arange(spec.ramp_length) + 1) / spec.ramp_length

    return Signal(envelope * carrier, sample_rate_hz, label_path=spec.class_path, seed=int(seed))


def spectral_correlation(a, b):
    """Normalized correlation of DFT magnitude spectra, in [0, 1]."""
    fa = np.abs(np.fft.rfft(_samples(a)))
    fb = np.abs(np.fft.rfft(_samples(b)))
    n = min(fa.size, fb.size)
    fa, fb = fa[:n], fb[:n]
    denom = np.linalg.norm(fa) * np.linalg.norm(fb)
    return float(fa @ fb / denom) if denom > 0 else 0.0


def empirical_snr_db(clean, noisy):
    """SNR estimate from a clean reference and its noisy copy."""
    c = _samples(clean)
    n = _samples(noisy) - c
    return 10.0 * np.log10(np.mean(c * c) / np.mean(n * n))


def as_signals(items: Sequence, sample_rate_hz=1.0):
    return [s if isinstance(s, Signal) else Signal(s, sample_rate_hz) for s in items]
