"""SPD U-Net noise predictor.

Layout for input dimension ``m`` and stage dims ``d0 = m > d1 > d2``::

    dc1(d0) -> down(d0->d1) -> dc2(d1) -> down(d1->d2) -> dc3(d2)
            -> up(d2->d1) -> mean(., dc2) -> dc4(d1)
            -> up(d1->d0) -> mean(., dc1) -> dc5(d0)

A double convolution ``dc`` is ``[BiMap -> E X E' -> ReEig]`` twice, where
``E = I + 0.5 tanh(P)`` and ``P`` comes from a two-layer network fed with the
sinusoidal time embedding (and the condition vector, if any).
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import BadConditionLength, ShapeMismatch
from . import functional as F
from .losses import LOSSES
from .tape import Tape

BLOCKS = ("dc1", "dc2", "dc3", "dc4", "dc5")


@dataclass(frozen=True)
class UNetSpec:
    m: int
    cond_dim: int = 0
    emb_width: int = 32
    hidden: int = 32
    floor: float = F.REEIG_FLOOR
    dims: tuple = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.dims is None:
            d1 = max(1, min(math.ceil(3 * self.m / 4), self.m - 1))
            d2 = max(1, min(math.ceil(self.m / 2), d1 - 1))
            object.__setattr__(self, "dims", (self.m, d1, d2))
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or dims[0] != self.m or min(dims) < 1 or not dims[0] >= dims[1] >= dims[2]:
            raise ValueError(f"stage dims must be m >= d1 >= d2 >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    def block_dims(self):
        d0, d1, d2 = self.dims
        return {"dc1": d0, "dc2": d1, "dc3": d2, "dc4": d1, "dc5": d0}

    def to_dict(self):
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["dims"] = tuple(d["dims"])
        return cls(**d)


def init_params(spec, rng, init_noise=0.01, zero_injectors=False):
    """Square BiMaps near identity, down maps near ``[I 0]``, injector output
    layers zero so every ``E`` starts at the identity."""
    d0, d1, d2 = spec.dims
    inp = spec.emb_width + spec.cond_dim
    p = {}

    def near(shape):
        return np.eye(*shape) + init_noise * rng.standard_normal(shape)

    for name, d in spec.block_dims().items():
        for k in range(2):
            pre = f"{name}.{k}"
            p[f"{pre}.W"] = near((d, d))
            if zero_injectors:
                p[f"{pre}.inj.W1"] = np.zeros((spec.hidden, inp))
            else:
                p[f"{pre}.inj.W1"] = rng.standard_normal((spec.hidden, inp)) / math.sqrt(inp)
            p[f"{pre}.inj.b1"] = np.zeros(spec.hidden)
            p[f"{pre}.inj.W2"] = np.zeros((d * d, spec.hidden))
            p[f"{pre}.inj.b2"] = np.zeros(d * d)
    p["down1.W"] = near((d1, d0))
    p["down2.W"] = near((d2, d1))
    p["up1.W"] = near((d1, d1))
    p["up2.W"] = near((d0, d0))
    return p


class SPDUNet:
    def __init__(self, spec, rng=None, params=None, init_noise=0.01, zero_injectors=False):
        self.spec = spec
        if params is None:
            rng = np.random.default_rng(0) if rng is None else rng
            params = init_params(spec, rng, init_noise, zero_injectors)
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}

    # -- inputs -----------------------------------------------------------

    def condition_input(self, t, y=None):
        t = np.atleast_1d(np.asarray(t))
        emb = F.sinusoidal_embedding(t, self.spec.emb_width)
        if self.spec.cond_dim == 0:
            if y is not None:
                raise BadConditionLength("unconditional network got a condition vector")
            return emb
        if y is None:
            y = np.zeros((t.shape[0], self.spec.cond_dim))
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = np.broadcast_to(y, (t.shape[0], y.shape[0]))
        if y.shape != (t.shape[0], self.spec.cond_dim):
            raise BadConditionLength(
                f"condition must have length {self.spec.cond_dim}, got shape {y.shape}"
            )
        return np.concatenate([emb, y], axis=-1)

    # -- graph ------------------------------------------------------------

    def _injection(self, tape, P, z, pre, d):
        h = tape.tanh(tape.dense(z, P[f"{pre}.inj.W1"], P[f"{pre}.inj.b1"]))
        return tape.injection_matrix(tape.dense(h, P[f"{pre}.inj.W2"], P[f"{pre}.inj.b2"]), d)

    def _double_conv(self, tape, P, z, X, name, d):
        for k in range(2):
            pre = f"{name}.{k}"
            X = tape.bimap(P[f"{pre}.W"], X)
            X = tape.bimap(self._injection(tape, P, z, pre, d), X)
            X = tape.reeig(X, self.spec.floor)
        return X

    def forward(self, tape, X, t, y=None, param_nodes=None):
        """Record the network on ``tape``. ``X`` has shape ``(B, m, m)``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[None]
        if X.shape[-1] != self.spec.m:
            raise ShapeMismatch(f"network expects {self.spec.m}x{self.spec.m} input")
        P = param_nodes
        if P is None:
            P = {k: tape.variable(v) for k, v in self.params.items()}
        z = tape.constant(self.condition_input(t, y))
        if z.shape[0] == 1 and X.shape[0] > 1:
            z = tape.constant(np.broadcast_to(z.value, (X.shape[0], z.shape[1])))
        floor = self.spec.floor
        d0, d1, d2 = self.spec.dims

        x = tape.constant(X)
        s1 = self._double_conv(tape, P, z, x, "dc1", d0)
        h = tape.reeig(tape.bimap(P["down1.W"], s1), floor)
        s2 = self._double_conv(tape, P, z, h, "dc2", d1)
        h = tape.reeig(tape.bimap(P["down2.W"], s2), floor)
        h = self._double_conv(tape, P, z, h, "dc3", d2)
        h = tape.reeig(tape.bimap(P["up1.W"], tape.embed_identity(h, d1)), floor)
        h = self._double_conv(tape, P, z, tape.concat_mean(h, s2, floor), "dc4", d1)
        h = tape.reeig(tape.bimap(P["up2.W"], tape.embed_identity(h, d0)), floor)
        h = self._double_conv(tape, P, z, tape.concat_mean(h, s1, floor), "dc5", d0)
        return h, P

    def __call__(self, X, t, y=None):
        tape = Tape()
        out, _ = self.forward(tape, X, t, y)
        return out.value if np.ndim(X) == 3 else out.value[0]

    def loss_and_grads(self, X_t, t, eps, y=None, metric="affine"):
        """Mean training loss over the batch and its parameter gradients."""
        tape = Tape()
        pred, P = self.forward(tape, X_t, t, y)
        per_sample = LOSSES[metric](tape, np.asarray(eps, dtype=float).reshape(pred.shape), pred)
        loss = tape.mean(per_sample)
        grads = tape.backward(loss)
        return float(loss.value), {k: grads[node] for k, node in P.items()}, per_sample.value

    def n_params(self):
        return sum(v.size for v in self.params.values())
