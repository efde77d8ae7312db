"""A small reverse-mode differentiation tape over dense arrays.

Nodes are appended in evaluation order, so walking the list backwards is a
valid topological order. A tape is single-use: build it, call
:meth:`Tape.backward` once, read gradients.
"""
import numpy as np

from .. import kernels
from . import functional as F


class Node:
    __slots__ = ("value", "parents", "vjp", "requires_grad", "index")

    def __init__(self, value, parents=(), vjp=None, requires_grad=False, index=-1):
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.index = index

    @property
    def shape(self):
        return self.value.shape


class Tape:
    def __init__(self):
        self.nodes = []

    def _add(self, value, parents=(), vjp=None, requires_grad=None):
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        node = Node(value, tuple(parents), vjp, requires_grad, len(self.nodes))
        self.nodes.append(node)
        return node

    def constant(self, value):
        return self._add(np.asarray(value, dtype=float), requires_grad=False)

    def variable(self, value):
        return self._add(np.asarray(value, dtype=float), requires_grad=True)

    def backward(self, root, seed=None):
        """Accumulate gradients of ``root`` into a list indexed by node."""
        grads = [None] * len(self.nodes)
        grads[root.index] = np.ones_like(root.value) if seed is None else seed
        for node in reversed(self.nodes[: root.index + 1]):
            g = grads[node.index]
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if grads[parent.index] is None:
                    grads[parent.index] = pg
                else:
                    grads[parent.index] = grads[parent.index] + pg
        return Gradients(grads)

    # -- matrix ops -------------------------------------------------------

    def bimap(self, W, X):
        """``W X W'``; also used for the time/condition injection ``E X E'``."""
        out = F.bimap_forward(W.value, X.value)

        def vjp(g):
            return F.bimap_backward(W.value, X.value, g)

        return self._add(out, (W, X), vjp)

    def spectral(self, X, kind, param=0.0, floor=F.REEIG_FLOOR):
        out, cache = F.spectral_forward(X.value, kind, param, floor)

        def vjp(g):
            return (F.spectral_backward(cache, g, kind, param, floor),)

        return self._add(out, (X,), vjp)

    def reeig(self, X, floor=F.REEIG_FLOOR):
        return self.spectral(X, kernels.CLAMP, 0.0, floor)

    def log(self, X):
        return self.spectral(X, kernels.LOG)

    def pow(self, X, a):
        return self.spectral(X, kernels.POW, a)

    def embed_identity(self, X, dim):
        d = X.shape[-1]
        out = F.embed_identity(X.value, dim)
        return self._add(out, (X,), lambda g: (g[..., :d, :d],))

    def add(self, a, b):
        return self._add(a.value + b.value, (a, b), lambda g: (g, g))

    def sub(self, a, b):
        return self._add(a.value - b.value, (a, b), lambda g: (g, -g))

    def scale(self, a, c):
        return self._add(c * a.value, (a,), lambda g: (c * g,))

    def concat_mean(self, a, b, floor=F.REEIG_FLOOR):
        return self.reeig(self.scale(self.add(a, b), 0.5), floor)

    # -- vector ops -------------------------------------------------------

    def dense(self, x, W, b):
        """``x W' + b`` for a batch ``x`` of shape ``(B, k)``."""
        out = x.value @ W.value.T + b.value

        def vjp(g):
            return g @ W.value, g.T @ x.value, g.sum(axis=0)

        return self._add(out, (x, W, b), vjp)

    def tanh(self, x):
        y = np.tanh(x.value)
        return self._add(y, (x,), lambda g: (g * (1.0 - y * y),))

    def injection_matrix(self, P, dim):
        """``E = I + 0.5 tanh(P)`` with ``P`` reshaped to ``(B, dim, dim)``."""
        th = np.tanh(P.value).reshape(-1, dim, dim)
        out = np.eye(dim) + 0.5 * th

        def vjp(g):
            return ((0.5 * g * (1.0 - th * th)).reshape(P.value.shape),)

        return self._add(out, (P,), vjp)

    # -- reductions -------------------------------------------------------

    def sum_squares(self, X):
        """Per-sample squared Frobenius norm, shape ``(B,)``."""
        v = X.value
        return self._add(np.sum(v * v, axis=(-2, -1)), (X,), lambda g: (2.0 * g[..., None, None] * v,))

    def mean(self, v):
        n = v.value.size
        return self._add(
            np.asarray(v.value.mean()), (v,), lambda g: (np.full(v.value.shape, g / n),)
        )


class Gradients:
    def __init__(self, grads):
        self._grads = grads

    def __getitem__(self, node):
        g = self._grads[node.index]
        return np.zeros_like(node.value) if g is None else g
