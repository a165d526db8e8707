"""A small 1-D variational autoencoder written directly in numpy.

Encoder ``Q(z|x)``: x -> tanh hidden layer -> (mu_z, log var_z).
Decoder ``P(x|z)``: z -> tanh hidden layer -> (mu_x, log var_x).
Prior ``P(z)``: standard normal.

Training maximises the evidence lower bound

    L(x) = E_{z~Q}[log P(x|z)] - KL[Q(z|x) || P(z)]

by Adam on ``-L`` averaged over the batch, using one reparameterised draw
``z = mu_z + exp(log var_z / 2) * eps`` per datapoint.  Gradients are
derived by hand; :func:`grad_check` verifies them against central finite
differences.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError, InsufficientDataError, TrainingError

LOG_2PI = math.log(2.0 * math.pi)

PARAM_NAMES = (
    "enc_w1", "enc_b1", "enc_w_mu", "enc_b_mu", "enc_w_logvar", "enc_b_logvar",
    "dec_w1", "dec_b1", "dec_w_mu", "dec_b_mu", "dec_w_logvar", "dec_b_logvar",
)


@dataclass(frozen=True)
class VaeHyper:
    latent_dim: int = 2
    hidden_units: int = 32
    # 1e-3 leaves bimodal data smeared between its modes after 2000 epochs
    learning_rate: float = 1e-2
    epochs: int = 2000
    batch_size: int | None = None  # None: full batch up to 256 samples, else 256
    seed: int = 0

    def __post_init__(self):
        for name in ("latent_dim", "hidden_units", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def resolve_batch(self, n: int) -> int:
        if self.batch_size is not None:
            return min(self.batch_size, n)
        return n if n <= 256 else 256


@dataclass
class VaeModel:
    hyper: VaeHyper
    params: dict[str, np.ndarray]
    shift: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    @classmethod
    def init(cls, hyper: VaeHyper, rng: np.random.Generator | None = None,
             shift: float = 0.0, scale: float = 1.0) -> VaeModel:
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(hyper.seed) if rng is None else rng
        h, d = hyper.hidden_units, hyper.latent_dim

        def glorot(fan_in, fan_out):
            a = math.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-a, a, size=(fan_in, fan_out))

        params = {
            "enc_w1": glorot(1, h), "enc_b1": np.zeros(h),
            "enc_w_mu": glorot(h, d), "enc_b_mu": np.zeros(d),
            "enc_w_logvar": glorot(h, d), "enc_b_logvar": np.zeros(d),
            "dec_w1": glorot(d, h), "dec_b1": np.zeros(h),
            "dec_w_mu": glorot(h, 1), "dec_b_mu": np.zeros(1),
            "dec_w_logvar": glorot(h, 1), "dec_b_logvar": np.zeros(1),
        }
        return cls(hyper, params, shift, scale)

    @classmethod
    def zeros(cls, hyper: VaeHyper, shift: float = 0.0, scale: float = 1.0) -> VaeModel:
        model = cls.init(hyper, np.random.default_rng(0), shift, scale)
        for v in model.params.values():
            v[...] = 0.0
        return model

    def copy(self) -> VaeModel:
        return VaeModel(self.hyper, {k: v.copy() for k, v in self.params.items()},
                        self.shift, self.scale)

    def normalize(self, rtt) -> np.ndarray:
        return (np.asarray(rtt, dtype=float) - self.shift) / self.scale

    def denormalize(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.shift

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.params.values())

    def to_dict(self) -> dict:
        return {
            "hyper": asdict(self.hyper),
            "shift": self.shift,
            "scale": self.scale,
            "params": {k: self.params[k].tolist() for k in PARAM_NAMES},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> VaeModel:
        hyper = VaeHyper(**doc["hyper"])
        params = {k: np.asarray(doc["params"][k], dtype=float) for k in PARAM_NAMES}
        return cls(hyper, params, float(doc["shift"]), float(doc["scale"]))

    @classmethod
    def from_json(cls, text: str) -> VaeModel:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ElboBreakdown:
    recon_term: float
    kl_term: float
    elbo: float


def gaussian_log_density(x, mean, logvar) -> np.ndarray:
    """Elementwise log N(x; mean, exp(logvar))."""
    return -0.5 * (LOG_2PI + logvar + (x - mean) ** 2 * np.exp(-logvar))


def kl_to_standard_normal(mu, logvar) -> np.ndarray:
    """KL[N(mu, diag exp(logvar)) || N(0, I)], summed over the last axis."""
    return 0.5 * np.sum(np.exp(logvar) + mu ** 2 - 1.0 - logvar, axis=-1)


def _column(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1)


def _forward(p: dict[str, np.ndarray], x: np.ndarray, eps: np.ndarray) -> dict[str, np.ndarray]:
    c = {"x": x, "eps": eps}
    c["h1"] = np.tanh(x @ p["enc_w1"] + p["enc_b1"])
    c["mu"] = c["h1"] @ p["enc_w_mu"] + p["enc_b_mu"]
    c["lv"] = c["h1"] @ p["enc_w_logvar"] + p["enc_b_logvar"]
    c["std"] = np.exp(0.5 * c["lv"])
    c["z"] = c["mu"] + c["std"] * eps
    c["h2"] = np.tanh(c["z"] @ p["dec_w1"] + p["dec_b1"])
    c["mx"] = c["h2"] @ p["dec_w_mu"] + p["dec_b_mu"]
    c["lvx"] = c["h2"] @ p["dec_w_logvar"] + p["dec_b_logvar"]
    c["recon"] = gaussian_log_density(x, c["mx"], c["lvx"]).sum(axis=1)
    c["kl"] = kl_to_standard_normal(c["mu"], c["lv"])
    return c


def _backward(p: dict[str, np.ndarray], c: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Gradient of mean(-recon + kl) with respect to every parameter."""
    n = c["x"].shape[0]
    g = {}
    inv_var_x = np.exp(-c["lvx"])
    resid = c["x"] - c["mx"]
    d_mx = -resid * inv_var_x / n
    d_lvx = 0.5 * (1.0 - resid ** 2 * inv_var_x) / n

    h2 = c["h2"]
    g["dec_w_mu"] = h2.T @ d_mx
    g["dec_b_mu"] = d_mx.sum(axis=0)
    g["dec_w_logvar"] = h2.T @ d_lvx
    g["dec_b_logvar"] = d_lvx.sum(axis=0)
    d_a2 = (d_mx @ p["dec_w_mu"].T + d_lvx @ p["dec_w_logvar"].T) * (1.0 - h2 ** 2)
    g["dec_w1"] = c["z"].T @ d_a2
    g["dec_b1"] = d_a2.sum(axis=0)
    d_z = d_a2 @ p["dec_w1"].T

    d_mu = d_z + c["mu"] / n
    d_lv = d_z * c["eps"] * 0.5 * c["std"] + 0.5 * (np.exp(c["lv"]) - 1.0) / n

    h1 = c["h1"]
    g["enc_w_mu"] = h1.T @ d_mu
    g["enc_b_mu"] = d_mu.sum(axis=0)
    g["enc_w_logvar"] = h1.T @ d_lv
    g["enc_b_logvar"] = d_lv.sum(axis=0)
    d_a1 = (d_mu @ p["enc_w_mu"].T + d_lv @ p["enc_w_logvar"].T) * (1.0 - h1 ** 2)
    g["enc_w1"] = c["x"].T @ d_a1
    g["enc_b1"] = d_a1.sum(axis=0)
    return g


def _check_noise(model: VaeModel, x: np.ndarray, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    expected = (x.shape[0], model.hyper.latent_dim)
    if noise.shape != expected:
        raise ValueError(f"noise shape {noise.shape} does not match {expected}")
    return noise


def elbo(model: VaeModel, x, noise) -> ElboBreakdown:
    """Batch-mean ELBO of normalised values ``x`` with latent noise held fixed."""
    if not model.is_finite():
        raise ValueError("model has non-finite parameters")
    x = _column(x)
    c = _forward(model.params, x, _check_noise(model, x, noise))
    recon = float(np.mean(c["recon"]))
    kl = float(np.mean(c["kl"]))
    return ElboBreakdown(recon, kl, recon - kl)


def loss_and_grads(model: VaeModel, x, noise) -> tuple[float, dict[str, np.ndarray]]:
    """Negative ELBO and its analytic gradient."""
    x = _column(x)
    c = _forward(model.params, x, _check_noise(model, x, noise))
    loss = float(np.mean(c["kl"] - c["recon"]))
    return loss, _backward(model.params, c)


def numeric_grads(model: VaeModel, x, noise, eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite-difference gradient of the negative ELBO."""
    x = _column(x)
    noise = _check_noise(model, x, noise)
    probe = model.copy()

    def f():
        c = _forward(probe.params, x, noise)
        return float(np.mean(c["kl"] - c["recon"]))

    out = {}
    for name, arr in probe.params.items():
        grad = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f()
            flat[i] = orig - eps
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        out[name] = grad
    return out


def grad_check(model: VaeModel, x, noise, eps: float = 1e-5) -> float:
    """Largest relative disagreement between analytic and numeric gradients.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-6)``, so entries whose
    true gradient is essentially zero are compared absolutely.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    _, analytic = loss_and_grads(model, x, noise)
    numeric = numeric_grads(model, x, noise, eps)
    worst = 0.0
    for name in PARAM_NAMES:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


@dataclass
class _Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_vae(samples: Sequence[float] | np.ndarray, hyper: VaeHyper = VaeHyper()
              ) -> tuple[VaeModel, np.ndarray]:
    """Fit a VAE to raw RTT values (ms). Returns the model and per-epoch mean loss."""
    rtt = np.asarray(samples, dtype=float).ravel()
    if rtt.size < 2:
        raise InsufficientDataError("VAE training needs at least 2 samples")
    if not np.all(np.isfinite(rtt)):
        raise ValueError("samples must be finite")
    scale = float(np.std(rtt))
    if not scale > 0:
        raise DegenerateDataError(
            "all training samples are identical; add fixed-width jitter before training")

    rng = np.random.default_rng(hyper.seed)
    model = VaeModel.init(hyper, rng, shift=float(np.mean(rtt)), scale=scale)
    x_all = _column(model.normalize(rtt))
    n = x_all.shape[0]
    batch = hyper.resolve_batch(n)
    opt = _Adam(hyper.learning_rate)
    trace = np.empty(hyper.epochs)

    for epoch in range(hyper.epochs):
        order = rng.permutation(n) if batch < n else np.arange(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            x = x_all[idx]
            noise = rng.standard_normal((x.shape[0], hyper.latent_dim))
            loss, grads = loss_and_grads(model, x, noise)
            if not math.isfinite(loss):
                raise TrainingError(epoch)
            opt.step(model.params, grads)
            total += loss * x.shape[0]
        trace[epoch] = total / n
        if not model.is_finite():
            raise TrainingError(epoch, "non-finite parameters")
    return model, trace


def sample_vae(model: VaeModel, n: int, seed: int) -> np.ndarray:
    """Draw ``z ~ N(0, I)``, then ``x ~ P(x|z)``; return RTTs in ms clamped at 0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.empty(0)
    rng = np.random.default_rng(seed)
    p = model.params
    z = rng.standard_normal((n, model.hyper.latent_dim))
    h2 = np.tanh(z @ p["dec_w1"] + p["dec_b1"])
    mx = (h2 @ p["dec_w_mu"] + p["dec_b_mu"]).ravel()
    sx = np.exp(0.5 * (h2 @ p["dec_w_logvar"] + p["dec_b_logvar"])).ravel()
    x = mx + sx * rng.standard_normal(n)
    return np.maximum(model.denormalize(x), 0.0)


def synthesize(samples: Sequence[float] | np.ndarray, n_generated: int = 10_000,
               hyper: VaeHyper = VaeHyper(), seed: int | None = None) -> np.ndarray:
    """Train on ``samples`` and return the originals followed by generated values."""
    rtt = np.asarray(samples, dtype=float).ravel()
    model, _ = train_vae(rtt, hyper)
    draws = sample_vae(model, n_generated, hyper.seed + 1 if seed is None else seed)
    return np.concatenate((rtt, draws))


def format_loss_trace(trace: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "loss"])
    for i, v in enumerate(trace):
        w.writerow([i, repr(float(v))])
    return buf.getvalue()
