"""Diagonally scaled metrics on block product spaces.

A block space ``E = E_1 x ... x E_m`` carries the squared norm

    ||z||^2 = sum_i alpha_i * <P_i z_i, z_i>,

where each ``P_i`` is a diagonal positive matrix on block ``i`` and the
``alpha_i > 0`` are block weights.  Gradients live in the dual space with

    ||g||_*^2 = sum_i alpha_i^{-1} * <g_i, P_i^{-1} g_i>.

Keeping ``P_i`` diagonal means every prox and projection used elsewhere in
the package stays closed-form.
"""

import numpy as np


class ScaledMetric:
    """Metric ``<P u, v>`` on a single block, with diagonal positive ``P``.

    Parameters
    ----------
    weights : array_like or int
        Diagonal of ``P``.  Passing an integer ``n`` gives the identity
        metric on ``R^n``.
    """

    def __init__(self, weights):
        if np.isscalar(weights) and isinstance(weights, (int, np.integer)):
            weights = np.ones(weights)
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("metric weights must form a nonempty vector")
        if not np.all(w > 0):
            raise ValueError("metric weights must be strictly positive")
        self.weights = w

    @property
    def dim(self):
        return self.weights.size

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(
                f"vector of shape {u.shape} does not match metric dimension {self.dim}"
            )
        return u

    def inner(self, u, v):
        """P-inner product ``<P u, v>``."""
        return float(np.dot(self.weights * self._check(u), self._check(v)))

    def norm(self, u):
        """Primal norm ``sqrt(<P u, u>)``."""
        u = self._check(u)
        return float(np.sqrt(np.dot(self.weights * u, u)))

    def dual_norm(self, g):
        """Dual norm ``sqrt(<g, P^{-1} g>)``."""
        g = self._check(g)
        return float(np.sqrt(np.dot(g / self.weights, g)))

    def apply(self, u):
        """Map a primal vector to its covector, ``u -> P u``."""
        return self.weights * self._check(u)

    def apply_inv(self, g):
        """Map a covector back to the primal space, ``g -> P^{-1} g``."""
        return self._check(g) / self.weights


class ProductMetric:
    """Weighted product of block metrics: ``||z||^2 = sum_i alpha_i ||z_i||_i^2``.

    Parameters
    ----------
    blocks : sequence of (ScaledMetric, float)
        Per-block metric and positive weight ``alpha_i``.
    """

    def __init__(self, blocks):
        if not blocks:
            raise ValueError("a product metric needs at least one block")
        self.metrics = []
        self.alphas = []
        for metric, alpha in blocks:
            if alpha <= 0:
                raise ValueError("block weights alpha_i must be positive")
            self.metrics.append(metric)
            self.alphas.append(float(alpha))
        self.dims = [m.dim for m in self.metrics]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])

    @property
    def dim(self):
        return int(self.offsets[-1])

    @property
    def n_blocks(self):
        return len(self.metrics)

    def split(self, z):
        """Split a joint vector into per-block views."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(
                f"vector of shape {z.shape} does not match joint dimension {self.dim}"
            )
        return [z[self.offsets[i]:self.offsets[i + 1]] for i in range(self.n_blocks)]

    def join(self, parts):
        """Concatenate per-block vectors into a joint vector."""
        if len(parts) != self.n_blocks:
            raise ValueError("wrong number of blocks")
        for part, d in zip(parts, self.dims):
            if np.asarray(part).shape != (d,):
                raise ValueError("block dimension mismatch in join")
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def norm(self, z):
        parts = self.split(z)
        s = 0.0
        for m, a, p in zip(self.metrics, self.alphas, parts):
            s += a * m.norm(p) ** 2
        return float(np.sqrt(s))

    def dual_norm(self, g):
        parts = self.split(g)
        s = 0.0
        for m, a, p in zip(self.metrics, self.alphas, parts):
            s += m.dual_norm(p) ** 2 / a
        return float(np.sqrt(s))

    def inner(self, u, v):
        us, vs = self.split(u), self.split(v)
        return float(sum(a * m.inner(x, y)
                         for m, a, x, y in zip(self.metrics, self.alphas, us, vs)))

    def apply(self, z):
        return self.join([a * m.apply(p)
                          for m, a, p in zip(self.metrics, self.alphas, self.split(z))])

    def apply_inv(self, g):
        return self.join([m.apply_inv(p) / a
                          for m, a, p in zip(self.metrics, self.alphas, self.split(g))])


def identity_product(dims, alphas=None):
    """Product metric with identity block metrics.

    Parameters
    ----------
    dims : sequence of int
    alphas : sequence of float, optional
        Defaults to all ones.
    """
    if alphas is None:
        alphas = [1.0] * len(dims)
    return ProductMetric([(ScaledMetric(d), a) for d, a in zip(dims, alphas)])
