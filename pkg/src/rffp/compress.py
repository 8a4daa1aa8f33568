"""
Dimensionality reduction: PCA with an explained-variance cutoff and a
stacked denoising autoencoder trained with Adam on an MAE loss.
"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import DegenerateDataError, InvalidInputError
from .rng import Stream, derive_seed
from .signal import Signal

SDAE_LAYERS = (1024, 512, 128, 32, 128, 512, 1024)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, dim), orthonormal rows
    eigenvalues: np.ndarray  # all eigenvalues, descending
    n_components: int
    ev_cutoff: float

    @property
    def explained_variance_ratio(self):
        total = self.eigenvalues.sum()
        return self.eigenvalues / total

    def retained_ratio(self):
        return float(self.explained_variance_ratio[:self.n_components].sum())


def pca_fit(rows, ev_cutoff=0.95):
    """Fit PCA on ``rows`` and keep the fewest components reaching ``ev_cutoff``."""
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidInputError("pca_fit needs a 2-D matrix with at least 2 rows")
    if not 0.0 < ev_cutoff <= 1.0:
        raise InvalidInputError("ev_cutoff must lie in (0, 1]")
    mean = X.mean(axis=0)
    centred = X - mean
    cov = centred.T @ centred / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T
    total = evals.sum()
    if total <= 0.0:
        raise DegenerateDataError("all rows are identical; no variance to explain")
    # deterministic sign: largest-magnitude loading positive
    pivots = evecs[np.arange(evecs.shape[0]), np.argmax(np.abs(evecs), axis=1)]
    evecs = evecs * np.where(pivots < 0, -1.0, 1.0)[:, None]
    cum = np.cumsum(evals) / total
    k = int(np.searchsorted(cum, ev_cutoff - 1e-12) + 1)
    k = min(k, evals.size)
    return PcaModel(mean, evecs[:k].copy(), evals, k, float(ev_cutoff))


def pca_transform(model, vec):
    """Project one vector (or a matrix of row vectors) onto the retained basis."""
    v = np.asarray(vec, dtype=np.float64)
    if v.shape[-1] != model.mean.size:
        raise InvalidInputError(f"dimension {v.shape[-1]} does not match model ({model.mean.size})")
    return (v - model.mean) @ model.components.T


def pca_inverse(model, reduced):
    return np.asarray(reduced) @ model.components + model.mean


# ---------------------------------------------------------------------------
# SDAE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    corruption_snr_range_db: Tuple[float, float] = (0.0, 30.0)
    validation_fraction: float = 0.1
    layer_sizes: Tuple[int, ...] = SDAE_LAYERS
    seed: int = 0

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.epochs >= 1 and self.batch_size >= 1):
            raise InvalidInputError("learning_rate, epochs and batch_size must be positive")
        lo, hi = self.corruption_snr_range_db
        if hi < lo:
            raise InvalidInputError("corruption_snr_range_db must be (low, high) with low <= high")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise InvalidInputError("validation_fraction must lie in [0, 1)")
        sizes = tuple(self.layer_sizes)
        if len(sizes) < 3 or len(sizes) % 2 == 0 or sizes != sizes[::-1]:
            raise InvalidInputError("layer_sizes must be an odd-length palindrome, e.g. (1024, ..., 32, ..., 1024)")
        object.__setattr__(self, "layer_sizes", sizes)


@dataclass
class SdaeModel:
    """Fully connected autoencoder.

    Hidden layers use ReLU and the output layer a logistic sigmoid. The code
    layer sits in the middle of ``layer_sizes``. ``ref_min``/``ref_max`` are
    the training-set extrema used to min-max normalize every input.
    """

    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    ref_min: float = 0.0
    ref_max: float = 1.0
    train_meta: dict = field(default_factory=dict)

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def latent_dim(self):
        return self.layer_sizes[len(self.layer_sizes) // 2]

    @property
    def n_encoder_layers(self):
        return len(self.layer_sizes) // 2

    def normalize(self, X):
        return (X - self.ref_min) / (self.ref_max - self.ref_min)

    def parameters(self):
        """Parameters in serialization order: per layer, weights then biases."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def copy(self):
        return SdaeModel(self.layer_sizes, [W.copy() for W in self.weights],
                         [b.copy() for b in self.biases], self.ref_min, self.ref_max,
                         dict(self.train_meta))


def init_sdae(layer_sizes, seed):
    """Glorot-uniform weights from the seeded stream, zero biases."""
    rs = Stream(derive_seed(seed, "sdae-init"))
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rs.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return SdaeModel(tuple(layer_sizes), weights, biases)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(model, X, upto=None):
    """Forward pass; returns the list of activations (input first).

    ``upto`` stops after that many layers (the encoder is
    ``upto=model.n_encoder_layers``).
    """
    acts = [X]
    n_layers = len(model.weights)
    stop = n_layers if upto is None else upto
    a = X
    for i in range(stop):
        z = a @ model.weights[i] + model.biases[i]
        a = _sigmoid(z) if i == n_layers - 1 else np.maximum(z, 0.0)
        acts.append(a)
    return acts


def mae_loss_and_grads(model, X, Y):
    """MAE between the reconstruction of ``X`` and ``Y`` plus its gradients."""
    acts = forward(model, X)
    out = acts[-1]
    diff = out - Y
    loss = float(np.mean(np.abs(diff)))
    delta = np.sign(diff) / diff.size
    # through the sigmoid
    delta = delta * out * (1.0 - out)
    gW = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, gW, gb


class _Adam:
    def __init__(self, params, cfg):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * (g * g)
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def _as_matrix(signals, length=None):
    rows = [s.samples if isinstance(s, Signal) else np.asarray(s, dtype=np.float64) for s in signals]
    X = np.array(rows, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError("signals must share one length")
    if length is not None and X.shape[1] != length:
        raise InvalidInputError(f"signals must have length {length}, got {X.shape[1]}")
    return X


def _corrupt(X, snr_db, rs):
    power = np.mean(X * X, axis=1)
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return X + sigma[:, None] * rs.normal(X.size).reshape(X.shape)


def sdae_train(clean, config=None, progress=None):
    """Train the denoising autoencoder on clean signals.

    Each epoch every training signal is corrupted with AWGN at an SNR drawn
    uniformly from ``corruption_snr_range_db``. Inputs and targets are both
    min-max normalized with the clean training-set extrema. A seeded
    ``validation_fraction`` of the signals is held out for the validation
    curve (inputs corrupted once, with a fixed seed).
    """
    config = config or TrainConfig()
    sizes = config.layer_sizes
    X = _as_matrix(clean, sizes[0])
    n = X.shape[0]
    seed = config.seed
    perm = Stream(derive_seed(seed, "sdae-split")).permutation(n)
    n_val = int(round(config.validation_fraction * n))
    val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    Xtr, Xval = X[train_idx], X[val_idx]
    if Xtr.shape[0] < config.batch_size:
        raise InvalidInputError(f"need at least batch_size={config.batch_size} training signals, got {Xtr.shape[0]}")

    model = init_sdae(sizes, seed)
    model.ref_min = float(Xtr.min())
    model.ref_max = float(Xtr.max())
    if not model.ref_max > model.ref_min:
        raise DegenerateDataError("training signals are constant")
    Ytr = model.normalize(Xtr)
    lo, hi = config.corruption_snr_range_db
    if n_val:
        vrs = Stream(derive_seed(seed, "sdae-val"))
        Xval_in = model.normalize(_corrupt(Xval, vrs.uniform(lo, hi, n_val), vrs))
        Yval = model.normalize(Xval)

    params = model.parameters()
    opt = _Adam(params, config)
    train_curve, val_curve = [], []
    for epoch in range(config.epochs):
        rs = Stream(derive_seed(seed, "sdae-epoch", epoch))
        snr = rs.uniform(lo, hi, Xtr.shape[0])
        Xin = model.normalize(_corrupt(Xtr, snr, rs))
        order = rs.permutation(Xtr.shape[0])
        total = 0.0
        for start in range(0, order.size, config.batch_size):
            b = order[start:start + config.batch_size]
            loss, gW, gb = mae_loss_and_grads(model, Xin[b], Ytr[b])
            grads = []
            for w_grad, b_grad in zip(gW, gb):
                grads.extend((w_grad, b_grad))
            opt.step(params, grads)
            total += loss * b.size
        train_curve.append(total / order.size)
        if n_val:
            val_curve.append(float(np.mean(np.abs(forward(model, Xval_in)[-1] - Yval))))
        if progress is not None:
            progress(epoch, train_curve[-1], val_curve[-1] if n_val else None)

    model.train_meta = {
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "seed": int(seed),
        "corruption_snr_range_db": [float(lo), float(hi)],
        "n_train": int(Xtr.shape[0]),
        "n_validation": int(n_val),
        "train_loss": train_curve,
        "validation_loss": val_curve,
        "final_train_loss": train_curve[-1],
        "final_validation_loss": val_curve[-1] if val_curve else None,
    }
    return model


def sdae_encode(model, signal):
    """Latent code of one signal (1-D) or of a batch (2-D rows)."""
    x = signal.samples if isinstance(signal, Signal) else np.asarray(signal, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise InvalidInputError(f"expected length {model.input_dim}, got {x.shape[-1]}")
    return forward(model, model.normalize(x), upto=model.n_encoder_layers)[-1]


def sdae_reconstruct(model, signal):
    """Reconstruction in the normalized domain and its MAE against the input."""
    x = signal.samples if isinstance(signal, Signal) else np.asarray(signal, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise InvalidInputError(f"expected length {model.input_dim}, got {x.shape[-1]}")
    m = model.normalize(x)
    out = forward(model, m)[-1]
    return out, float(np.mean(np.abs(out - m)))
