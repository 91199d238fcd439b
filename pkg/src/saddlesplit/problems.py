"""Problem containers, prox-friendly composite terms, and instance generators.

Saddle problems are

    min_x max_y  f(x, y) + psi_x(x) - psi_y(y),

with convex-concave smooth ``f`` and simple convex ``psi``.  The associated
monotone operator is ``V(z) = (grad_x f(z), -grad_y f(z))``.  Variational
inequality instances carry one operator block and one composite term per
agent.  All first-order information flows through per-agent oracles so that
query accounting (see :mod:`saddlesplit.accounting`) stays faithful.

Composite terms support exact prox steps in any diagonal metric, canonical
subgradient selection, domain projection, and minimisation against a linear
term; those four operations are everything the solvers need.
"""

import ast
import configparser
from dataclasses import dataclass, field

import numpy as np

from saddlesplit.metrics import ScaledMetric

_INF = float("inf")


# ---------------------------------------------------------------------------
# composite terms
# ---------------------------------------------------------------------------

class CompositeTerm:
    """Interface for the nonsmooth part of one block."""

    def value(self, metric, w):
        raise NotImplementedError

    def prox(self, metric, v, step):
        """``argmin_w  psi(w) + 1/(2*step) * ||w - v||_P^2`` (exact)."""
        raise NotImplementedError

    def subgradient(self, metric, w):
        """A canonical element of the subdifferential at `w`."""
        raise NotImplementedError

    def project_domain(self, metric, v):
        """Metric projection of `v` onto the domain."""
        raise NotImplementedError

    def contains(self, metric, w, tol=1e-9):
        return True


class ZeroTerm(CompositeTerm):
    """psi = 0."""

    def value(self, metric, w):
        return 0.0

    def prox(self, metric, v, step):
        return np.array(v, dtype=float, copy=True)

    def subgradient(self, metric, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    def project_domain(self, metric, v):
        return np.array(v, dtype=float, copy=True)


class QuadraticReg(CompositeTerm):
    """psi(w) = (mu/2) * ||w - center||_P^2 in the block metric."""

    def __init__(self, mu, center):
        if mu < 0:
            raise ValueError("quadratic modulus must be nonnegative")
        self.mu = float(mu)
        self.center = np.asarray(center, dtype=float)

    def value(self, metric, w):
        return 0.5 * self.mu * metric.norm(np.asarray(w) - self.center) ** 2

    def prox(self, metric, v, step):
        # The metric cancels: minimiser of (1/2s)|w-v|^2 + (mu/2)|w-c|^2.
        v = np.asarray(v, dtype=float)
        return (v + step * self.mu * self.center) / (1.0 + step * self.mu)

    def subgradient(self, metric, w):
        return self.mu * metric.apply(np.asarray(w) - self.center)

    def project_domain(self, metric, v):
        return np.array(v, dtype=float, copy=True)


class BallIndicator(CompositeTerm):
    """Indicator of the metric ball ``||w - center||_P <= radius``."""

    def __init__(self, center, radius):
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def value(self, metric, w):
        return 0.0 if self.contains(metric, w) else _INF

    def prox(self, metric, v, step):
        d = np.asarray(v, dtype=float) - self.center
        nrm = metric.norm(d)
        if nrm <= self.radius:
            return self.center + d
        return self.center + d * (self.radius / nrm)

    def subgradient(self, metric, w):
        # Zero belongs to the normal cone at every feasible point.
        return np.zeros_like(np.asarray(w, dtype=float))

    def project_domain(self, metric, v):
        return self.prox(metric, v, 1.0)

    def contains(self, metric, w, tol=1e-9):
        return metric.norm(np.asarray(w) - self.center) <= self.radius + tol * (
            1.0 + self.radius)


class BoxIndicator(CompositeTerm):
    """Indicator of the box ``lower <= w <= upper`` (coordinatewise)."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("box bounds are inconsistent")

    def value(self, metric, w):
        return 0.0 if self.contains(metric, w) else _INF

    def prox(self, metric, v, step):
        # Exact for diagonal metrics.
        return np.clip(np.asarray(v, dtype=float), self.lower, self.upper)

    def subgradient(self, metric, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    def project_domain(self, metric, v):
        return self.prox(metric, v, 1.0)

    def contains(self, metric, w, tol=1e-9):
        w = np.asarray(w, dtype=float)
        scale = 1.0 + float(np.max(np.abs(np.concatenate([self.lower, self.upper]))))
        return bool(np.all(w >= self.lower - tol * scale)
                    and np.all(w <= self.upper + tol * scale))


class RegularizedTerm(CompositeTerm):
    """Sum of a quadratic and another term: ``psi = quad + base``.

    Used by the decoupled inner solves, where the anchor regulariser is added
    on top of the block's own composite term.
    """

    def __init__(self, quad, base):
        if not isinstance(quad, QuadraticReg):
            raise TypeError("first summand must be a QuadraticReg")
        if isinstance(base, RegularizedTerm):
            raise TypeError("nested regularised terms are not supported")
        self.quad = quad
        self.base = base

    def value(self, metric, w):
        return self.quad.value(metric, w) + self.base.value(metric, w)

    def prox(self, metric, v, step):
        # Absorb the quadratic first, then prox the base with a shrunk step.
        mu, c = self.quad.mu, self.quad.center
        v = np.asarray(v, dtype=float)
        shrink = 1.0 + step * mu
        return self.base.prox(metric, (v + step * mu * c) / shrink, step / shrink)

    def subgradient(self, metric, w):
        return self.quad.subgradient(metric, w) + self.base.subgradient(metric, w)

    def project_domain(self, metric, v):
        return self.base.project_domain(metric, v)

    def contains(self, metric, w, tol=1e-9):
        return self.base.contains(metric, w, tol)


def prox_composite(term, metric, v, step):
    """Functional wrapper around ``term.prox``."""
    if step <= 0:
        raise ValueError("prox step must be positive")
    return term.prox(metric, v, step)


def argmin_linear(term, metric, cov, fallback=None):
    """``argmin_w  <cov, w> + psi(w)`` for terms where this is well posed.

    Needed when a block operator is constant: the regularised subproblem is
    then linear-plus-composite and solvable in closed form.
    """
    cov = np.asarray(cov, dtype=float)
    if isinstance(term, QuadraticReg):
        if term.mu == 0:
            raise ValueError("flat quadratic cannot absorb a linear term")
        return term.center - metric.apply_inv(cov) / term.mu
    if isinstance(term, RegularizedTerm):
        mu, c = term.quad.mu, term.quad.center
        if mu == 0:
            return argmin_linear(term.base, metric, cov, fallback)
        return term.base.prox(metric, c - metric.apply_inv(cov) / mu, 1.0 / mu)
    if isinstance(term, BallIndicator):
        dual = metric.dual_norm(cov)
        if dual == 0.0:
            return np.array(term.center, copy=True)
        return term.center - term.radius * metric.apply_inv(cov) / dual
    if isinstance(term, BoxIndicator):
        return np.where(cov > 0, term.lower,
                        np.where(cov < 0, term.upper,
                                 0.5 * (term.lower + term.upper)))
    if isinstance(term, ZeroTerm):
        if np.linalg.norm(cov) <= 1e-14 and fallback is not None:
            return np.array(fallback, dtype=float, copy=True)
        raise ValueError("linear objective is unbounded below on a free block")
    raise TypeError(f"unsupported term {type(term).__name__}")


# ---------------------------------------------------------------------------
# problem containers
# ---------------------------------------------------------------------------

@dataclass
class DomainSpec:
    """Restriction set for gap evaluation: one metric ball per block."""
    centers: list
    radii: list

    def block(self, i):
        return np.asarray(self.centers[i], dtype=float), float(self.radii[i])


@dataclass
class SaddleProblem:
    """Two-agent saddle problem with per-agent first-order oracles.

    ``grad_x(z)`` returns the partial gradient of ``f`` in ``x`` at
    ``z = (x, y)``.  ``grad_y(z)`` returns the raw oracle response of the
    ``y``-agent; its relation to the true partial gradient is fixed by
    ``grad_y_sign``:  ``grad_y_sign * grad_y(z) == \\nabla_y f(z)``.
    The monotone operator is then ``V = (grad_x, -grad_y_sign * grad_y)``.
    """
    grad_x: object
    grad_y: object
    psi_x: CompositeTerm
    psi_y: CompositeTerm
    x0: np.ndarray
    y0: np.ndarray
    L_x: float
    L_y: float
    L_xy: float
    D_x: float
    D_y: float
    grad_y_sign: int = 1
    metric_x: ScaledMetric = None
    metric_y: ScaledMetric = None
    costs: tuple = (1.0, 1.0)
    saddle: tuple = None
    f_value: object = None
    structure: dict = None
    name: str = ""

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.y0 = np.asarray(self.y0, dtype=float)
        if self.metric_x is None:
            self.metric_x = ScaledMetric(self.x0.size)
        if self.metric_y is None:
            self.metric_y = ScaledMetric(self.y0.size)
        if self.grad_y_sign not in (1, -1):
            raise ValueError("grad_y_sign must be +1 or -1")
        for L in (self.L_x, self.L_y, self.L_xy):
            if L < 0:
                raise ValueError("Lipschitz constants must be nonnegative")

    @property
    def nx(self):
        return self.x0.size

    @property
    def ny(self):
        return self.y0.size

    @property
    def z0(self):
        return (self.x0.copy(), self.y0.copy())

    def vx(self, z):
        """x-block of the monotone operator."""
        return np.asarray(self.grad_x(z), dtype=float)

    def vy(self, z):
        """y-block of the monotone operator (``-grad_y f``)."""
        return -self.grad_y_sign * np.asarray(self.grad_y(z), dtype=float)

    def vy_from_raw(self, raw):
        return -self.grad_y_sign * np.asarray(raw, dtype=float)

    def ascent_y_from_raw(self, raw):
        """``grad_y f`` recovered from a raw oracle response."""
        return self.grad_y_sign * np.asarray(raw, dtype=float)

    def default_domain(self):
        return DomainSpec([self.x0, self.y0], [self.D_x, self.D_y])


@dataclass
class VipProblem:
    """K-agent monotone variational inequality with block oracles.

    ``operators[i]`` maps a list of block vectors to the i-th operator
    block.  ``L[i][j]`` bounds the variation of block ``i`` against block
    ``j``; ``D[i]`` is the radius of the restriction ball of block ``i``.
    """
    operators: list
    psis: list
    z0: list
    L: np.ndarray
    D: list
    metrics: list = None
    costs: list = None
    solution: list = None
    block_is_gradient: list = None
    structure: dict = None
    name: str = ""

    def __post_init__(self):
        self.z0 = [np.asarray(b, dtype=float) for b in self.z0]
        self.L = np.asarray(self.L, dtype=float)
        K = len(self.operators)
        if not (len(self.psis) == len(self.z0) == len(self.D) == K):
            raise ValueError("inconsistent number of blocks")
        if self.L.shape != (K, K):
            raise ValueError("L must be a K x K matrix")
        if np.any(self.L < 0):
            raise ValueError("L entries must be nonnegative")
        if self.metrics is None:
            self.metrics = [ScaledMetric(b.size) for b in self.z0]
        if self.costs is None:
            self.costs = [1.0] * K
        if self.block_is_gradient is None:
            self.block_is_gradient = [False] * K

    @property
    def K(self):
        return len(self.operators)

    @property
    def dims(self):
        return [b.size for b in self.z0]

    def default_domain(self):
        return DomainSpec([b.copy() for b in self.z0], list(self.D))


# ---------------------------------------------------------------------------
# spectral norm (deterministic power iteration)
# ---------------------------------------------------------------------------

def spectral_norm(A, iters=500, tol=1e-12):
    """Largest singular value of `A` by power iteration on ``A^T A``.

    Deterministic: the start vector is fixed, so repeated calls agree to
    the last bit.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0 or not np.any(A):
        return 0.0
    n = A.shape[1]
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(nrm - prev) <= tol * max(nrm, 1.0):
            prev = nrm
            break
        prev = nrm
    return float(np.sqrt(prev))


# ---------------------------------------------------------------------------
# saddle generators
# ---------------------------------------------------------------------------

def make_bilinear(A, b=None, D_x=1.0, D_y=1.0, costs=(1.0, 1.0), name="bilinear"):
    """Bilinear saddle ``f(x, y) = <A x - b, y>`` with zero composite terms.

    Starts at the origin.  The saddle point ``(x*, 0)`` is attached when the
    linear system ``A x = b`` is consistent.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if b is None:
        b = np.zeros(m)
    b = np.asarray(b, dtype=float)
    if b.shape != (m,):
        raise ValueError("right-hand side does not match the row dimension")

    def grad_x(z):
        return A.T @ z[1]

    def grad_y(z):
        return A @ z[0] - b

    def f_value(z):
        return float(np.dot(A @ z[0] - b, z[1]))

    saddle = None
    xs, res, _, _ = np.linalg.lstsq(A, b, rcond=None)
    if np.linalg.norm(A @ xs - b) <= 1e-10 * (1.0 + np.linalg.norm(b)):
        saddle = (xs, np.zeros(m))
    return SaddleProblem(
        grad_x=grad_x, grad_y=grad_y, grad_y_sign=1,
        psi_x=ZeroTerm(), psi_y=ZeroTerm(),
        x0=np.zeros(n), y0=np.zeros(m),
        L_x=0.0, L_y=0.0, L_xy=spectral_norm(A),
        D_x=D_x, D_y=D_y, costs=costs, saddle=saddle,
        f_value=f_value,
        structure={"kind": "bilinear", "A": A, "b": b}, name=name)


def make_quadratic(A, b=None, side="x", other_dim=1, D_x=1.0, D_y=1.0,
                   costs=(1.0, 1.0), name=None):
    """One-sided quadratic saddle.

    ``side='x'`` gives ``f = 0.5 * ||A x - b||^2`` (the y-agent is inert);
    ``side='y'`` gives ``f = -0.5 * ||A y - b||^2``.  In both cases the
    active agent's oracle returns ``A^T (A w - b)``, the gradient of the
    convex function it is minimising.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if b is None:
        b = np.zeros(m)
    b = np.asarray(b, dtype=float)
    if side not in ("x", "y"):
        raise ValueError("side must be 'x' or 'y'")
    L_own = spectral_norm(A) ** 2
    ws, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
    if name is None:
        name = f"quadratic_{side}"

    if side == "x":
        def grad_x(z):
            return A.T @ (A @ z[0] - b)

        def grad_y(z):
            return np.zeros(other_dim)

        def f_value(z):
            return 0.5 * float(np.linalg.norm(A @ z[0] - b) ** 2)

        return SaddleProblem(
            grad_x=grad_x, grad_y=grad_y, grad_y_sign=1,
            psi_x=ZeroTerm(), psi_y=ZeroTerm(),
            x0=np.zeros(n), y0=np.zeros(other_dim),
            L_x=L_own, L_y=0.0, L_xy=0.0,
            D_x=D_x, D_y=D_y, costs=costs,
            saddle=(ws, np.zeros(other_dim)), f_value=f_value,
            structure={"kind": "quadratic_x", "A": A, "b": b,
                       "other_dim": other_dim}, name=name)

    def grad_x_(z):
        return np.zeros(other_dim)

    def grad_y_(z):
        # Raw response is the descent gradient of the inner convex problem,
        # i.e. -grad_y f; hence grad_y_sign = -1 below.
        return A.T @ (A @ z[1] - b)

    def f_value_(z):
        return -0.5 * float(np.linalg.norm(A @ z[1] - b) ** 2)

    return SaddleProblem(
        grad_x=grad_x_, grad_y=grad_y_, grad_y_sign=-1,
        psi_x=ZeroTerm(), psi_y=ZeroTerm(),
        x0=np.zeros(other_dim), y0=np.zeros(n),
        L_x=0.0, L_y=L_own, L_xy=0.0,
        D_x=D_x, D_y=D_y, costs=costs,
        saddle=(np.zeros(other_dim), ws), f_value=f_value_,
        structure={"kind": "quadratic_y", "A": A, "b": b,
                   "other_dim": other_dim}, name=name)


def make_strongly_convex_concave(mu_x, mu_y, coupling, n=1, D_x=1.0, D_y=1.0,
                                 costs=(1.0, 1.0), name="scsc"):
    """Coupled quadratic saddle with saddle point at the origin.

    ``f(x, y) = (mu_x/2)||x||^2 - (mu_y/2)||y||^2 + coupling * <x, y>`` on
    ``R^n x R^n``.  The start point sits at distance ``D_x`` (resp. ``D_y``)
    from the saddle in each block, so runs are nontrivial.
    """
    if mu_x <= 0 or mu_y <= 0:
        raise ValueError("strong convexity moduli must be positive")
    u = np.ones(n) / np.sqrt(n)

    def grad_x(z):
        return mu_x * z[0] + coupling * z[1]

    def grad_y(z):
        return -mu_y * z[1] + coupling * z[0]

    def f_value(z):
        x, y = z
        return float(0.5 * mu_x * x @ x - 0.5 * mu_y * y @ y
                     + coupling * x @ y)

    return SaddleProblem(
        grad_x=grad_x, grad_y=grad_y, grad_y_sign=1,
        psi_x=ZeroTerm(), psi_y=ZeroTerm(),
        x0=D_x * u, y0=D_y * u,
        L_x=float(mu_x), L_y=float(mu_y), L_xy=float(coupling),
        D_x=D_x, D_y=D_y, costs=costs,
        saddle=(np.zeros(n), np.zeros(n)), f_value=f_value,
        structure={"kind": "scsc", "mu_x": float(mu_x), "mu_y": float(mu_y),
                   "coupling": float(coupling), "n": n}, name=name)


# ---------------------------------------------------------------------------
# polymatrix variational inequalities
# ---------------------------------------------------------------------------

def make_polymatrix(dims, blocks, b=None, D=None, costs=None, psis=None,
                    name="polymatrix"):
    """Affine monotone VIP ``V_i(z) = sum_j A_ij z_j - b_i``.

    Monotonicity is enforced structurally: off-diagonal blocks must satisfy
    ``A_ji = -A_ij^T`` and diagonal blocks must be symmetric positive
    semidefinite.  Violations raise ``ValueError``.
    """
    K = len(dims)
    mats = [[None] * K for _ in range(K)]
    for i in range(K):
        for j in range(K):
            Aij = blocks[i][j]
            if Aij is None:
                mats[i][j] = np.zeros((dims[i], dims[j]))
            else:
                Aij = np.atleast_2d(np.asarray(Aij, dtype=float))
                if Aij.shape != (dims[i], dims[j]):
                    raise ValueError(f"block ({i},{j}) has wrong shape")
                mats[i][j] = Aij
    for i in range(K):
        Aii = mats[i][i]
        if not np.allclose(Aii, Aii.T, atol=1e-12):
            raise ValueError(f"diagonal block {i} is not symmetric")
        if Aii.size and np.min(np.linalg.eigvalsh(0.5 * (Aii + Aii.T))) < -1e-10:
            raise ValueError(f"diagonal block {i} is not positive semidefinite")
        for j in range(i + 1, K):
            if not np.allclose(mats[j][i], -mats[i][j].T, atol=1e-12):
                raise ValueError(f"skew condition fails for blocks ({i},{j})")

    if b is None:
        b = [np.zeros(d) for d in dims]
    b = [np.asarray(bi, dtype=float) for bi in b]
    L = np.array([[spectral_norm(mats[i][j]) for j in range(K)]
                  for i in range(K)])

    def make_op(i):
        def op(parts):
            out = -b[i]
            for j in range(K):
                out = out + mats[i][j] @ parts[j]
            return out
        return op

    Abar = np.block(mats)
    zflat, _, _, _ = np.linalg.lstsq(Abar, np.concatenate(b), rcond=None)
    solution = None
    if np.linalg.norm(Abar @ zflat - np.concatenate(b)) <= 1e-10 * (
            1.0 + np.linalg.norm(np.concatenate(b))):
        offs = np.concatenate([[0], np.cumsum(dims)])
        solution = [zflat[offs[i]:offs[i + 1]] for i in range(K)]

    return VipProblem(
        operators=[make_op(i) for i in range(K)],
        psis=psis if psis is not None else [ZeroTerm() for _ in range(K)],
        z0=[np.zeros(d) for d in dims],
        L=L, D=list(D) if D is not None else [1.0] * K,
        costs=costs, solution=solution,
        block_is_gradient=[True] * K,
        structure={"kind": "polymatrix", "blocks": mats, "b": b,
                   "dims": list(dims)}, name=name)


def random_polymatrix(K, dims, rng, coupling=1.0, diag=0.0, radius=0.8,
                      D=None, name="polymatrix_rand"):
    """Random polymatrix instance with a known interior solution.

    Off-diagonal couplings are scaled to spectral norm about `coupling`;
    diagonal blocks are PSD with norm `diag`.  A target point with block
    norms ``radius * D_i`` is drawn and the offsets are chosen so it solves
    the unconstrained system exactly.
    """
    if D is None:
        D = [1.0] * K
    blocks = [[None] * K for _ in range(K)]
    for i in range(K):
        if diag > 0:
            M = rng.standard_normal((dims[i], dims[i]))
            S = M @ M.T
            blocks[i][i] = diag * S / spectral_norm(S)
        for j in range(i + 1, K):
            M = rng.standard_normal((dims[i], dims[j]))
            scale = coupling * rng.uniform(0.5, 1.0)
            M *= scale / max(spectral_norm(M), 1e-12)
            blocks[i][j] = M
            blocks[j][i] = -M.T
    target = []
    for i in range(K):
        v = rng.standard_normal(dims[i])
        target.append(radius * D[i] * v / np.linalg.norm(v))
    b = []
    for i in range(K):
        bi = np.zeros(dims[i])
        for j in range(K):
            if blocks[i][j] is not None:
                bi = bi + blocks[i][j] @ target[j]
        b.append(bi)
    return make_polymatrix(dims, blocks, b=b, D=D, name=name)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt_array(a):
    return repr(np.asarray(a).tolist())


def _parse_array(s):
    return np.array(ast.literal_eval(s), dtype=float)


def save_instance(problem, path):
    """Write a generator-built instance to an INI file.

    Only instances produced by the generators in this module or in
    :mod:`saddlesplit.hard_instances` can be saved; hand-built oracle
    closures have no portable representation.
    """
    st = problem.structure if getattr(problem, "structure", None) else None
    if st is None or "kind" not in st:
        raise ValueError("instance carries no serialisable structure")
    cp = configparser.ConfigParser()
    cp["instance"] = {"kind": st["kind"], "name": problem.name}
    sec = cp["instance"]
    kind = st["kind"]
    if kind == "bilinear":
        sec["A"] = _fmt_array(st["A"])
        sec["b"] = _fmt_array(st["b"])
        sec["D_x"], sec["D_y"] = repr(problem.D_x), repr(problem.D_y)
        sec["costs"] = repr(list(problem.costs))
    elif kind in ("quadratic_x", "quadratic_y"):
        sec["A"] = _fmt_array(st["A"])
        sec["b"] = _fmt_array(st["b"])
        sec["other_dim"] = repr(st["other_dim"])
        sec["D_x"], sec["D_y"] = repr(problem.D_x), repr(problem.D_y)
        sec["costs"] = repr(list(problem.costs))
    elif kind == "scsc":
        for k in ("mu_x", "mu_y", "coupling", "n"):
            sec[k] = repr(st[k])
        sec["D_x"], sec["D_y"] = repr(problem.D_x), repr(problem.D_y)
        sec["costs"] = repr(list(problem.costs))
    elif kind == "polymatrix":
        sec["dims"] = repr(st["dims"])
        for i in range(len(st["dims"])):
            for j in range(len(st["dims"])):
                if np.any(st["blocks"][i][j]):
                    sec[f"a_{i}_{j}"] = _fmt_array(st["blocks"][i][j])
            sec[f"b_{i}"] = _fmt_array(st["b"][i])
        sec["D"] = repr(list(problem.D))
        sec["costs"] = repr(list(problem.costs))
    else:
        raise ValueError(f"unsupported kind {kind!r}")
    with open(path, "w") as fh:
        cp.write(fh)


def load_instance(path):
    """Rebuild an instance written by `save_instance`."""
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    return instance_from_section(cp["instance"])


def instance_from_section(sec):
    """Build an instance from a mapping in the `save_instance` key format."""
    kind = sec["kind"]
    name = sec.get("name", kind)
    if kind == "bilinear":
        return make_bilinear(
            _parse_array(sec["A"]), _parse_array(sec["b"]),
            D_x=ast.literal_eval(sec.get("D_x", "1.0")), D_y=ast.literal_eval(sec.get("D_y", "1.0")),
            costs=tuple(ast.literal_eval(sec.get("costs", "(1.0, 1.0)"))), name=name)
    if kind in ("quadratic_x", "quadratic_y"):
        return make_quadratic(
            _parse_array(sec["A"]), _parse_array(sec["b"]),
            side=kind[-1], other_dim=ast.literal_eval(sec["other_dim"]),
            D_x=ast.literal_eval(sec.get("D_x", "1.0")), D_y=ast.literal_eval(sec.get("D_y", "1.0")),
            costs=tuple(ast.literal_eval(sec.get("costs", "(1.0, 1.0)"))), name=name)
    if kind == "scsc":
        return make_strongly_convex_concave(
            ast.literal_eval(sec["mu_x"]), ast.literal_eval(sec["mu_y"]),
            ast.literal_eval(sec["coupling"]), n=ast.literal_eval(sec["n"]),
            D_x=ast.literal_eval(sec.get("D_x", "1.0")), D_y=ast.literal_eval(sec.get("D_y", "1.0")),
            costs=tuple(ast.literal_eval(sec.get("costs", "(1.0, 1.0)"))), name=name)
    if kind == "polymatrix":
        dims = ast.literal_eval(sec["dims"])
        K = len(dims)
        blocks = [[None] * K for _ in range(K)]
        for i in range(K):
            for j in range(K):
                key = f"a_{i}_{j}"
                if key in sec:
                    blocks[i][j] = _parse_array(sec[key])
        b = [_parse_array(sec[f"b_{i}"]) for i in range(K)]
        return make_polymatrix(
            dims, blocks, b=b, D=ast.literal_eval(sec.get("D", repr([1.0] * K))),
            costs=ast.literal_eval(sec.get("costs", repr([1.0] * K))), name=name)
    if kind in ("hard_xy", "hard_x", "hard_y"):
        # Hand-written configs may request the chain construction directly.
        from saddlesplit import hard_instances
        kwargs = {}
        if "D_other" in sec:
            kwargs["D_other"] = ast.literal_eval(sec["D_other"])
        return hard_instances.make_hard_saddle(
            kind.split("_", 1)[1],
            L=ast.literal_eval(sec["L"]), D=ast.literal_eval(sec["D"]),
            k=ast.literal_eval(sec["k"]), name=name, **kwargs)
    raise ValueError(f"unsupported kind {kind!r}")
