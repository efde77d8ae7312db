"""Self-verification suites: finite-difference gradient checks and the
algebraic identities of the SPD operations."""
from dataclasses import dataclass

import numpy as np

from . import diffusion, kernels, prob
from .spd import (
    dist_affine,
    group_action,
    mat_log,
    oplus,
    ominus,
    odot,
    random_spd,
    symmetrize,
)
from .spdnet import Tape, SPDUNet, UNetSpec, functional as F

FD_STEP = 1e-5
GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float

    @property
    def passed(self):
        return bool(self.error < self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.error:.3e} (tol {self.tol:.0e})"


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    den = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / den)


def rel_err_matrix(L, R):
    """Largest per-matrix relative Frobenius error over a stack."""
    num = np.linalg.norm(L - R, axis=(-2, -1))
    den = np.maximum(np.linalg.norm(R, axis=(-2, -1)), 1e-300)
    return float(np.max(num / den))


def spd_with_gap(m, rng, size=None, gap=1e-3):
    """Random SPD matrices whose eigenvalues are separated by more than ``gap``."""
    while True:
        X = random_spd(m, rng, np.log(0.3), np.log(3.0), size=size)
        w = np.linalg.eigvalsh(X)
        if np.all(np.diff(w, axis=-1) > gap):
            return X


def fd_gradient(fn, x, h=FD_STEP):
    """Central differences of a scalar function of an array."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        o = x[i]
        x[i] = o + h
        fp = fn(x)
        x[i] = o - h
        fm = fn(x)
        x[i] = o
        g[i] = (fp - fm) / (2 * h)
    return g


def fd_directional(fn, x, v, h=FD_STEP):
    return (fn(x + h * v) - fn(x - h * v)) / (2 * h)


def _sym_direction(rng, m):
    V = rng.standard_normal((m, m))
    return symmetrize(V)


# ---------------------------------------------------------------------------
# Gradient suite

def grad_checks(dim=4, seed=7):
    rng = np.random.default_rng(seed)
    m = dim
    out = []

    # BiMap, rectangular W
    W = rng.standard_normal((m, m - 1))
    X = spd_with_gap(m - 1, rng)
    C = symmetrize(rng.standard_normal((m, m)))

    def f_w(Wv):
        return np.sum(C * F.bimap_forward(Wv, X))

    def f_x(Xv):
        return np.sum(C * F.bimap_forward(W, Xv))

    gW, gX = F.bimap_backward(W, X, C)
    out.append(CheckResult("bimap grad_W", rel_err(gW, fd_gradient(f_w, W)), GRAD_TOL))
    out.append(CheckResult("bimap grad_X", rel_err(gX, fd_gradient(f_x, X)), GRAD_TOL))

    # spectral functions, checked along random symmetric directions
    Xs = spd_with_gap(m, rng)
    w = np.linalg.eigvalsh(Xs)
    floor = 0.5 * (w[0] + w[1])  # clamps the smallest eigenvalue, away from the kink
    Cs = symmetrize(rng.standard_normal((m, m)))
    cases = [
        ("reeig", kernels.CLAMP, 0.0, floor),
        ("matlog", kernels.LOG, 0.0, 0.0),
        ("matpow(0.5)", kernels.POW, 0.5, 0.0),
        ("matpow(-1.3)", kernels.POW, -1.3, 0.0),
        ("matexp", kernels.EXP, 0.0, 0.0),
    ]
    for name, kind, param, fl in cases:
        Y, cache = F.spectral_forward(Xs, kind, param, fl)
        G = F.spectral_backward(cache, Cs, kind, param, fl)
        errs = []
        for _ in range(5):
            V = _sym_direction(rng, m)
            num = fd_directional(lambda Z: np.sum(Cs * F.spectral_forward(Z, kind, param, fl)[0]), Xs, V)
            errs.append(abs(np.sum(G * V) - num) / max(abs(num), np.linalg.norm(G) * np.linalg.norm(V) * 1e-3))
        out.append(CheckResult(f"{name} backward", float(max(errs)), GRAD_TOL))

    # loss d(eps, pred)^2 w.r.t. pred
    eps = spd_with_gap(m, rng)
    pred = spd_with_gap(m, rng)

    def loss_of(P):
        return float(dist_affine(eps, symmetrize(P)) ** 2)

    tape = Tape()
    pn = tape.variable(pred)
    from .spdnet.losses import affine_sq_distance

    ln = tape.mean(affine_sq_distance(tape, eps[None], tape.bimap(tape.constant(np.eye(m)), pn)))
    g = tape.backward(ln)[pn]
    errs = []
    for _ in range(5):
        V = _sym_direction(rng, m)
        num = fd_directional(loss_of, pred, V)
        errs.append(abs(np.sum(g * V) - num) / max(abs(num), 1e-12))
    out.append(CheckResult("affine d^2 loss", float(max(errs)), GRAD_TOL))

    # full network, every parameter, with active injectors
    net = SPDUNet(UNetSpec(m, cond_dim=2, emb_width=8, hidden=6), rng=rng, init_noise=0.1)
    for k in net.params:
        if ".inj.W2" in k or ".inj.b2" in k:
            net.params[k] = 0.1 * rng.standard_normal(net.params[k].shape)
    Xb = spd_with_gap(m, rng, size=2)
    eb = spd_with_gap(m, rng, size=2)
    t = np.array([3, 17])
    y = rng.standard_normal((2, 2))
    _, grads, _ = net.loss_and_grads(Xb, t, eb, y)
    worst = 0.0
    for k, p in net.params.items():
        def f(pv, k=k):
            old = net.params[k]
            net.params[k] = pv
            try:
                return net.loss_and_grads(Xb, t, eb, y)[0]
            finally:
                net.params[k] = old

        worst = max(worst, rel_err(grads[k], fd_gradient(f, p)))
    out.append(CheckResult("U-Net loss, all parameters", worst, GRAD_TOL))
    return out


# ---------------------------------------------------------------------------
# Identity suite

def _randoms(m, n, rng):
    return random_spd(m, rng, np.log(0.2), np.log(5.0), size=n)


def algebra_checks(seed=0, n_small=200, n_large=20, tol=1e-9):
    rng = np.random.default_rng(seed)
    out = []
    for m, n in ((3, n_small), (10, n_large)):
        X, Y, Z = (_randoms(m, n, rng) for _ in range(3))
        a = rng.uniform(-2, 2, size=n)
        b = rng.uniform(-2, 2, size=n)
        I = np.broadcast_to(np.eye(m), X.shape)

        def powa(c, M):
            return odot(c, M)

        checks = {
            "distributive a(X+Y) = aX + aY": (powa(a, oplus(X, Y)), oplus(powa(a, X), powa(a, Y))),
            "combine aX + bX = (a+b)X": (oplus(powa(a, X), powa(b, X)), powa(a + b, X)),
            "commutative": (oplus(X, Y), oplus(Y, X)),
            "associative": (oplus(oplus(X, Y), Z), oplus(X, oplus(Y, Z))),
            "identity X + I = X": (oplus(X, I), X),
            "inverse X - X = I": (ominus(X, X), I),
            "power law a(bX) = (ab)X": (powa(a, powa(b, X)), powa(a * b, X)),
            "unit 1X = X": (powa(1.0, X), X),
        }
        for name, (L, R) in checks.items():
            out.append(CheckResult(f"m={m} {name}", rel_err_matrix(L, R), tol))
    return out


def isometry_checks(seed=1, n=200, n_frechet=20, tol=1e-8, tol_frechet=1e-6):
    rng = np.random.default_rng(seed)
    out = []
    m = 3
    X, Y = _randoms(m, n, rng), _randoms(m, n, rng)
    A = rng.standard_normal((n, m, m))
    d = dist_affine(X, Y)
    dA = dist_affine(group_action(X, A), group_action(Y, A))
    out.append(CheckResult("congruence invariance", float(np.max(np.abs(dA - d) / d)), tol))
    dinv = dist_affine(np.linalg.inv(X), np.linalg.inv(Y))
    out.append(CheckResult("inversion invariance", float(np.max(np.abs(dinv - d) / d)), tol))
    # distance of matrix power, commuting pairs only (Y = I)
    a = rng.uniform(-2, 2, size=n)
    I = np.broadcast_to(np.eye(m), X.shape)
    dp = dist_affine(odot(a, X), I)
    out.append(CheckResult(
        "d(X^a, I) = |a| d(X, I)", float(np.max(np.abs(dp - np.abs(a) * dist_affine(X, I)) / dist_affine(X, I))), tol
    ))
    worst = 0.0
    for _ in range(n_frechet):
        S = _randoms(m, 5, rng)
        B = rng.standard_normal((m, m))
        M = prob.frechet_mean(S).mean
        MA = prob.frechet_mean(group_action(S, B)).mean
        worst = max(worst, rel_err_matrix(MA, group_action(M, B)))
    out.append(CheckResult("Frechet mean equivariance", worst, tol_frechet))
    return out


def schedule_checks(T=200):
    s = diffusion.build_schedule(T)
    out = [
        CheckResult("alpha^2 + beta^2 = 1", float(np.max(np.abs(s.alpha**2 + s.beta**2 - 1))), 1e-12),
        CheckResult("sigma_tilde_1 = 0", abs(float(s.sigma_tilde[1])), 1e-300),
    ]
    alt = np.array([diffusion.posterior_sigma_alt(s, t) for t in range(1, T + 1)])
    out.append(CheckResult("posterior sigma two forms", float(np.max(np.abs(alt - s.sigma_tilde[1:]))), 1e-12))
    prod = 1.0
    for t in range(1, T + 1):
        prod *= np.sqrt(1 - 0.08 * t / T)
    out.append(CheckResult(f"alpha_bar_{T} vs direct product", abs(prod - s.alpha_bar[T]), 1e-12))
    return out


def forward_consistency_check(seed=2, T=20, m=3):
    """t forward steps with commuting noises collapse to one forward jump."""
    rng = np.random.default_rng(seed)
    s = diffusion.build_schedule(T)
    O = prob.haar_orthogonal(m, rng)

    def diag_spd(v):
        return O @ np.diag(np.exp(v)) @ O.T

    X0 = diag_spd(rng.normal(size=m))
    logs = [rng.normal(size=m) for _ in range(T)]
    X = X0
    for t in range(1, T + 1):
        X = diffusion.forward_step(X, t, diag_spd(logs[t - 1]), s)
    coeff = [np.prod(s.alpha[i + 1 : T + 1]) * s.beta[i] for i in range(1, T + 1)]
    combined = sum(c * l for c, l in zip(coeff, logs))
    norm = np.sqrt(np.sum(np.square(coeff)))
    # one noise matrix carrying the same log increment, scaled by beta_bar_T
    Xj = diffusion.forward_jump(X0, T, diag_spd(combined / s.beta_bar[T]), s)
    return [
        CheckResult("composed steps = log-space jump", rel_err(mat_log(X), mat_log(Xj)), 1e-10),
        CheckResult("aggregate noise coefficient vs beta_bar_T", abs(norm - s.beta_bar[T]) / s.beta_bar[T], 1e-12),
    ]


def property_checks(seed=0):
    return (
        algebra_checks(seed)
        + isometry_checks(seed + 1)
        + schedule_checks()
        + forward_consistency_check(seed + 2)
    )
