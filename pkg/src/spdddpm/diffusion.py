"""Forward noising, reverse sampling and training on the SPD manifold.

The forward chain is ``X_t = alpha_t (.) X_{t-1} (+) beta_t (.) eps_t`` with
``eps_t ~ G(I, 1)`` and ``alpha_t = sqrt(1 - 0.08 t / T)``. In log
coordinates every update is affine, so the implementation works with
``log X`` directly and maps back with one matrix exponential.
"""
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import prob
from .errors import ChainFailure, DimensionMismatch, InconsistentPredictorLength, SpdError
from .prob import EigenSamplerConfig, FrechetConfig, frechet_mean
from .spd import (
    _compose,
    dist_affine,
    dist_frobenius,
    eig,
    mat_exp,
    mat_log,
    mat_pow,
    odot,
    ominus,
    validate_spd,
)
from .spdnet import AdamState, SPDUNet, UNetSpec, adam_step, cosine_lr

SCHEDULE_RULE = "alpha_t=sqrt(1-0.08*t/T)"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step coefficients, indexed directly by ``t``.

    Arrays have length ``T + 1``; entry 0 holds the ``t = 0`` convention
    (``alpha = alpha_bar = 1``, ``beta = beta_bar = sigma_tilde = 0``).
    """

    T: int
    alpha: np.ndarray
    beta: np.ndarray
    alpha_bar: np.ndarray
    beta_bar: np.ndarray
    sigma_tilde: np.ndarray
    rule: str = SCHEDULE_RULE


def build_schedule(T):
    if T < 1:
        raise ValueError("T must be >= 1")
    t = np.arange(T + 1, dtype=float)
    beta_sq = 0.08 * t / T
    alpha = np.sqrt(1.0 - beta_sq)
    beta = np.sqrt(beta_sq)
    alpha_bar = np.cumprod(alpha)
    beta_bar = np.sqrt(1.0 - alpha_bar**2)
    sigma_tilde = np.zeros(T + 1)
    sigma_tilde[1:] = beta_bar[:-1] * beta[1:] / beta_bar[1:]
    arrays = (alpha, beta, alpha_bar, beta_bar, sigma_tilde)
    for a in arrays:
        a.setflags(write=False)
    return NoiseSchedule(T, *arrays)


@dataclass(frozen=True)
class SamplerConfig:
    gamma: float = 10.0
    n_samples: int = 20

    def __post_init__(self):
        if not self.gamma > 0 or self.n_samples < 1:
            raise ValueError("gamma must be positive and n_samples >= 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 150
    learning_rate: float = 0.0015
    loss_metric: str = "affine"
    cond_dropout: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.loss_metric not in ("affine", "frobenius"):
            raise ValueError(f"unknown loss metric {self.loss_metric!r}")
        if not 0.0 <= self.cond_dropout < 1.0:
            raise ValueError("cond_dropout must lie in [0, 1)")


def _check_t(s, t, lo=1):
    t = np.asarray(t)
    if np.any(t < lo) or np.any(t > s.T):
        raise ValueError(f"time step out of range [{lo}, {s.T}]")
    return t


def _coef(values, t):
    c = np.asarray(values[t], dtype=float)
    return c[..., None, None] if c.ndim else c


def _same_dim(X, Y):
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionMismatch(f"dimension mismatch: {X.shape[-1]} vs {Y.shape[-1]}")


def forward_step(X_prev, t, eps, s):
    """``X_{t-1}^(a/2) eps^b X_{t-1}^(a/2)`` with ``a = alpha_t, b = beta_t``."""
    X_prev, eps = np.asarray(X_prev, float), np.asarray(eps, float)
    _same_dim(X_prev, eps)
    t = int(_check_t(s, t))
    half = mat_pow(X_prev, s.alpha[t] / 2.0)
    return validate_spd(half @ mat_pow(eps, s.beta[t]) @ half)


def forward_jump(X0, t, eps, s):
    """``alpha_bar_t (.) X0 (+) beta_bar_t (.) eps``; ``t`` may be a per-sample
    array for batched input, and ``t = 0`` returns ``X0``."""
    X0, eps = np.asarray(X0, float), np.asarray(eps, float)
    _same_dim(X0, eps)
    t = _check_t(s, t, lo=0)
    return mat_exp(_coef(s.alpha_bar, t) * mat_log(X0) + _coef(s.beta_bar, t) * mat_log(eps))


def posterior_params(X_t, eps, t, s):
    """Mean and dispersion of ``q(X_{t-1} | X_t, X_0)`` with ``eps`` the noise
    mixed into ``X_t``."""
    t = int(_check_t(s, t))
    a, b, bb = s.alpha[t], s.beta[t], s.beta_bar[t]
    mu = ominus(odot(1.0 / a, X_t), odot(b**2 / (a * bb), eps))
    return mu, float(s.sigma_tilde[t])


def posterior_sigma_alt(s, t):
    """``sigma_tilde_t`` re-derived as ``sqrt(bb_{t-1}^2 b_t^2 / (bb_{t-1}^2 a_t^2 + b_t^2))``."""
    bb_prev, a, b = s.beta_bar[t - 1], s.alpha[t], s.beta[t]
    return math.sqrt(bb_prev**2 * b**2 / (bb_prev**2 * a**2 + b**2))


def training_loss(eps, eps_pred, metric="affine"):
    eps, eps_pred = np.asarray(eps, float), np.asarray(eps_pred, float)
    _same_dim(eps, eps_pred)
    if metric == "affine":
        return dist_affine(eps, eps_pred) ** 2
    if metric == "frobenius":
        return dist_frobenius(eps, eps_pred) ** 2
    raise ValueError(f"unknown metric {metric!r}")


def reverse_step(X_t, eps_pred, t, z, s, gamma):
    """``(1/a_t) (.) (X_t (-) (b_t^2/bb_t) (.) eps_pred) (+) (sigma_tilde_t/gamma) (.) z``."""
    t = int(_check_t(s, t))
    a, b, bb = s.alpha[t], s.beta[t], s.beta_bar[t]
    log_next = (mat_log(X_t) - (b**2 / bb) * mat_log(eps_pred)) / a
    noise = s.sigma_tilde[t] / gamma
    if noise > 0.0:
        if z is None:
            raise ValueError(f"reverse step t={t} needs a noise matrix z")
        log_next = log_next + noise * mat_log(z)
    w, U = eig(log_next)
    return _compose(U, np.exp(w))


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainResult:
    net: SPDUNet
    trace: list = field(default_factory=list)  # (epoch, step, loss)
    epoch_losses: list = field(default_factory=list)
    steps: int = 0


def _stack(data):
    X = np.asarray([np.asarray(getattr(r, "matrix", r), float) for r in data])
    if X.ndim != 3 or X.shape[0] == 0:
        raise DimensionMismatch("training data must be a non-empty list of m x m matrices")
    return X


def _predictor_array(data, predictors, p):
    if predictors is None:
        predictors = [getattr(r, "predictors", None) for r in data]
    if any(y is None for y in predictors):
        raise InconsistentPredictorLength("every record needs a predictor vector")
    lengths = {len(y) for y in predictors}
    if lengths != {p}:
        raise InconsistentPredictorLength(f"predictor lengths {sorted(lengths)} != network condition width {p}")
    return np.asarray(predictors, dtype=float)


def _train(data, net, s, cfg, rng, predictors, eps_cfg, log):
    X = validate_spd(_stack(data))
    m = net.spec.m
    if X.shape[-1] != m:
        raise DimensionMismatch(f"data dim {X.shape[-1]} != network dim {m}")
    n = X.shape[0]
    per_epoch = math.ceil(n / cfg.batch_size)
    total = per_epoch * cfg.epochs
    state = AdamState()
    res = TrainResult(net)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            B = idx.size
            t = rng.integers(1, s.T + 1, size=B)
            eps = prob.sample_standard(1.0, m, eps_cfg, rng, size=B)
            X_t = forward_jump(X[idx], t, eps, s)
            y = None
            if predictors is not None:
                y = predictors[idx].copy()
                y[rng.random(B) < cfg.cond_dropout] = 0.0
            loss, grads, _ = net.loss_and_grads(X_t, t, eps, y, cfg.loss_metric)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at step {step}")
            adam_step(net.params, grads, state, cosine_lr(cfg.learning_rate, step, total))
            res.trace.append((epoch, step, loss))
            losses.append(loss)
            step += 1
        res.epoch_losses.append(float(np.mean(losses)))
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} loss {res.epoch_losses[-1]:.6f}")
    res.steps = step
    return res


def train_unconditional(data, net, s, cfg=None, rng=None, eps_cfg=None, log=None):
    """Fit ``net`` to predict the noise in ``X_t`` (uniform ``t``, fresh
    ``eps ~ G(I, 1)`` per example); one Adam step per mini-batch."""
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng() if rng is None else rng
    return _train(data, net, s, cfg, rng, None, eps_cfg, log)


def train_conditional(data, net, s, cfg=None, rng=None, predictors=None, eps_cfg=None, log=None):
    """As :func:`train_unconditional`, feeding each record's predictor vector;
    with probability ``cfg.cond_dropout`` it is replaced by the zero vector."""
    cfg = cfg or TrainConfig(epochs=20, batch_size=100)
    rng = np.random.default_rng() if rng is None else rng
    if net.spec.cond_dim == 0:
        raise InconsistentPredictorLength("conditional training needs a network with cond_dim > 0")
    Y = _predictor_array(data, predictors, net.spec.cond_dim)
    return _train(data, net, s, cfg, rng, Y, eps_cfg, log)


# ---------------------------------------------------------------------------
# Sampling

def _reverse_chains(net, s, cfg, rng, n, y, eps_cfg, trajectory):
    m = net.spec.m
    X = prob.sample_standard(1.0, m, eps_cfg, rng, size=n)
    path = [X] if trajectory else None
    for t in range(s.T, 0, -1):
        z = prob.sample_standard(1.0, m, eps_cfg, rng, size=n) if s.sigma_tilde[t] > 0 else None
        eps_pred = net(X, np.full(n, t), y)
        X = reverse_step(X, eps_pred, t, z, s, cfg.gamma)
        try:
            X = validate_spd(X)
        except SpdError as exc:
            raise ChainFailure(f"reverse chain left the SPD cone at t={t}: {exc}") from exc
        if trajectory:
            path.append(X)
    return X, path


def sample_unconditional(net, s, cfg=None, rng=None, n=1, eps_cfg=None, return_trajectory=False):
    """Run ``n`` independent reverse chains from ``X_T ~ G(I, 1)`` down to ``X_0``.

    Returns an array ``(n, m, m)``; with ``return_trajectory`` also the list
    of every intermediate stack.
    """
    cfg = cfg or SamplerConfig()
    rng = np.random.default_rng() if rng is None else rng
    X, path = _reverse_chains(net, s, cfg, rng, n, None, eps_cfg, return_trajectory)
    return (X, path) if return_trajectory else X


def sample_conditional(net, s, y, cfg=None, rng=None, n=None, eps_cfg=None):
    cfg = cfg or SamplerConfig()
    rng = np.random.default_rng() if rng is None else rng
    n = cfg.n_samples if n is None else n
    y = np.asarray(y, dtype=float).reshape(-1)
    return _reverse_chains(net, s, cfg, rng, n, y, eps_cfg, False)[0]


@dataclass
class ConditionalPrediction:
    mean: np.ndarray
    samples: np.ndarray
    converged: bool
    frechet_iterations: int


def predict_conditional(net, s, y, cfg=None, frechet_cfg=None, rng=None, eps_cfg=None):
    """Estimate ``E(X | y)`` as the Karcher mean of ``cfg.n_samples`` draws."""
    cfg = cfg or SamplerConfig()
    samples = sample_conditional(net, s, y, cfg, rng, eps_cfg=eps_cfg)
    res = frechet_mean(samples, frechet_cfg or FrechetConfig())
    return ConditionalPrediction(res.mean, samples, res.converged, res.n_iter)


# ---------------------------------------------------------------------------
# Persistence

def save_checkpoint(path, net, s, extra=None):
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "m": net.spec.m,
        "T": s.T,
        "schedule_rule": s.rule,
        "topology": net.spec.to_dict(),
        "params": {
            k: {"shape": list(v.shape), "data": [float(x) for x in v.ravel()]}
            for k, v in net.params.items()
        },
    }
    if extra:
        doc["extra"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    """Returns ``(net, schedule, extra)``."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    if doc.get("schedule_rule") != SCHEDULE_RULE:
        raise ValueError(f"unknown schedule rule {doc.get('schedule_rule')!r}")
    spec = UNetSpec.from_dict(doc["topology"])
    params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["params"].items()}
    return SPDUNet(spec, params=params), build_schedule(int(doc["T"])), doc.get("extra", {})


def write_loss_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "step", "loss"])
        for epoch, step, loss in trace:
            w.writerow([epoch, step, repr(float(loss))])
