"""Response geometries.

Each space is isometric to a Euclidean space through ``embed``:
``d(a, b)**2 == scale * ||embed(a) - embed(b)||**2``.  Weighted Fréchet means
with (possibly signed) weights averaging to one are therefore computed in
closed form as the projection of the weighted average of embeddings.

Points are plain NumPy arrays:

* ``Wasserstein(m)``: quantile values at ``p_j = (j - 0.5)/m``, shape ``(m,)``.
* ``Laplacian(q)``: graph Laplacian, shape ``(q, q)``.
* ``Aitchison(k)``: strictly positive shares summing to one, shape ``(k,)``.
* ``Euclidean(k)``: coordinates, shape ``(k,)``.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ContractError,
    DegenerateCompositionError,
    DimensionError,
    NumericError,
)
from .numerics import pava_pools, pava_rows

ZERO_FLOOR = 1e-8


def zero_replace(shares, floor=ZERO_FLOOR):
    """Replace shares below ``floor`` by ``floor`` and renormalize to sum one."""
    x = np.array(shares, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DegenerateCompositionError("shares must be finite and nonnegative")
    if not x.sum(axis=-1).min(initial=np.inf) > 0:
        raise DegenerateCompositionError("composition has no positive mass")
    x = np.where(x < floor, floor, x)
    return x / x.sum(axis=-1, keepdims=True)


def clr(shares):
    """Centered log-ratio transform along the last axis."""
    lx = np.log(shares)
    return lx - lx.mean(axis=-1, keepdims=True)


def clr_inv(z):
    """Inverse clr (softmax after re-centering) along the last axis."""
    z = np.asarray(z, dtype=float)
    z = z - z.mean(axis=-1, keepdims=True)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class MetricSpace:
    """Base class; subclasses fill in the embedding and projection."""

    kind = "abstract"
    #: d(a, b)^2 = scale * ||embed(a) - embed(b)||^2
    scale = 1.0

    def __init__(self, dim: int):
        dim = int(dim)
        if dim < 1:
            raise DimensionError("space dimension must be positive")
        self.dim = dim

    def __repr__(self):
        return f"{type(self).__name__}({self.dim})"

    def __eq__(self, other):
        return type(self) is type(other) and self.dim == other.dim

    def __hash__(self):
        return hash((self.kind, self.dim))

    @property
    def point_shape(self) -> tuple:
        return (self.dim,)

    @property
    def embed_dim(self) -> int:
        return int(np.prod(self.point_shape))

    def _check_point(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != self.point_shape:
            raise DimensionError(f"{self!r} expects points of shape {self.point_shape}, got {a.shape}")
        return a

    def _check_points(self, points):
        points = np.asarray(points, dtype=float)
        if points.shape[1:] != self.point_shape:
            raise DimensionError(
                f"{self!r} expects points of shape {self.point_shape}, got {points.shape[1:]}"
            )
        return points

    # -- geometry -------------------------------------------------------
    def embed(self, point):
        return self.embed_many(self._check_point(point)[None])[0]

    def embed_many(self, points):
        return self._check_points(points).reshape(len(points), -1).copy()

    def project(self, raw):
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (self.embed_dim,):
            raise DimensionError(f"{self!r} expects raw vectors of length {self.embed_dim}")
        return self.project_many(raw[None])[0]

    def project_many(self, raw):
        raise NotImplementedError

    def distance(self, a, b) -> float:
        return float(np.sqrt(self.sq_dist_many(self._check_point(a)[None], self._check_point(b)[None])[0]))

    def sq_dist_many(self, a, b):
        """Row-wise squared distances between two stacks of points."""
        diff = self.embed_many(a) - self.embed_many(b)
        return self.scale * np.einsum("ij,ij->i", diff, diff)

    def is_valid(self, point, tol=1e-8) -> bool:
        return bool(np.all(np.isfinite(point)))

    # -- Fréchet means ----------------------------------------------------
    def weighted_frechet_mean(self, points, weights):
        """Minimizer of ``sum_i w_i d^2(Y_i, .)`` for weights averaging to one."""
        points = self._check_points(points)
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != points.shape[0]:
            raise ContractError("need one weight per point")
        if abs(w.mean() - 1.0) > 1e-6:
            raise ContractError(f"weights must average to one, got mean {w.mean():.6g}")
        raw = w @ self.embed_many(points) / len(w)
        return self.project(raw)

    def frechet_objective(self, omega, weights, points) -> float:
        """``(1/n) sum_i w_i d^2(Y_i, omega)``."""
        points = self._check_points(points)
        omega = self._check_point(omega)
        d2 = self.sq_dist_many(points, np.broadcast_to(omega, points.shape))
        return float(np.mean(np.asarray(weights, dtype=float) * d2))

    def project_adjoint(self, raw, grad, mode="straight_through"):
        """Pull a gradient w.r.t. ``embed(project(raw))`` back to ``raw``.

        ``straight_through`` treats the projection as the identity; ``exact``
        uses the Jacobian of the locally affine projection.
        """
        return grad


class Euclidean(MetricSpace):
    kind = "euclidean"

    def project_many(self, raw):
        raw = np.asarray(raw, dtype=float)
        if not np.all(np.isfinite(raw)):
            raise NumericError("non-finite raw point")
        return raw.copy()


class Wasserstein(MetricSpace):
    """Univariate distributions as quantile functions on a midpoint grid."""

    kind = "wasserstein"

    def __init__(self, dim: int = 100):
        super().__init__(dim)
        self.scale = 1.0 / self.dim

    @property
    def grid(self):
        return (np.arange(1, self.dim + 1) - 0.5) / self.dim

    def project_many(self, raw):
        raw = np.asarray(raw, dtype=float)
        if not np.all(np.isfinite(raw)):
            raise NumericError("non-finite raw quantile values")
        return pava_rows(raw)

    def is_valid(self, point, tol=1e-10):
        point = np.asarray(point)
        return bool(np.all(np.isfinite(point)) and np.all(np.diff(point) >= -tol))

    def project_adjoint(self, raw, grad, mode="straight_through"):
        if mode == "straight_through":
            return grad
        out = np.array(grad, dtype=float)
        for i in np.flatnonzero(np.any(np.diff(raw, axis=1) < 0, axis=1)):
            pools = pava_pools(raw[i])
            sums = np.bincount(pools, weights=out[i])
            counts = np.bincount(pools)
            out[i] = (sums / counts)[pools]
        return out


class Laplacian(MetricSpace):
    """Graph Laplacians with the Frobenius metric."""

    kind = "laplacian"

    @property
    def point_shape(self):
        return (self.dim, self.dim)

    def project_many(self, raw):
        raw = np.asarray(raw, dtype=float)
        if not np.all(np.isfinite(raw)):
            raise NumericError("non-finite raw Laplacian entries")
        q = self.dim
        M = raw.reshape(-1, q, q)
        S = 0.5 * (M + M.transpose(0, 2, 1))
        off = np.minimum(S, 0.0)
        idx = np.arange(q)
        off[:, idx, idx] = 0.0
        off[:, idx, idx] = -off.sum(axis=2)
        return off

    def is_valid(self, point, tol=1e-8):
        L = np.asarray(point)
        off = L - np.diag(np.diag(L))
        return bool(
            np.all(np.isfinite(L))
            and np.allclose(L, L.T, atol=tol, rtol=0)
            and np.all(np.abs(L.sum(axis=1)) <= tol)
            and np.all(off <= tol)
        )

    def project_adjoint(self, raw, grad, mode="straight_through"):
        if mode == "straight_through":
            return grad
        q = self.dim
        G = np.asarray(grad, dtype=float).reshape(-1, q, q)
        M = np.asarray(raw, dtype=float).reshape(-1, q, q)
        S = 0.5 * (M + M.transpose(0, 2, 1))
        diagG = np.diagonal(G, axis1=1, axis2=2)
        # output diag is minus the row sum of clipped off-diagonals
        dO = G - diagG[:, :, None]
        dS = np.where(S < 0, dO, 0.0)
        idx = np.arange(q)
        dS[:, idx, idx] = 0.0
        dM = 0.5 * (dS + dS.transpose(0, 2, 1))
        return dM.reshape(len(M), -1)


class Aitchison(MetricSpace):
    """Compositions on the simplex with the Aitchison (clr-Euclidean) metric."""

    kind = "aitchison"

    def embed_many(self, points):
        points = self._check_points(points)
        return clr(points)

    def project_many(self, raw):
        raw = np.asarray(raw, dtype=float)
        if not np.all(np.isfinite(raw)):
            raise NumericError("non-finite raw clr coordinates")
        return clr_inv(raw)

    def is_valid(self, point, tol=1e-10):
        x = np.asarray(point)
        return bool(np.all(np.isfinite(x)) and np.all(x > 0) and abs(x.sum() - 1.0) <= tol)

    def project_adjoint(self, raw, grad, mode="straight_through"):
        if mode == "straight_through":
            return grad
        # embed(project(z)) = z - mean(z), a symmetric projector
        return grad - grad.mean(axis=1, keepdims=True)


def random_points(space, n, rng):
    """``n`` random valid points of ``space``, stacked."""
    kind = space.kind
    if kind == "wasserstein":
        loc = rng.normal(0.0, 1.0, (n, 1))
        sd = rng.gamma(2.0, 0.5, (n, 1))
        return np.sort(rng.normal(loc, sd, (n, space.dim)), axis=1)
    if kind == "laplacian":
        q = space.dim
        W = rng.uniform(0.0, 2.0, (n, q, q)) * (rng.random((n, q, q)) < 0.6)
        W = np.triu(W, 1)
        W = W + W.transpose(0, 2, 1)
        L = -W
        idx = np.arange(q)
        L[:, idx, idx] = W.sum(axis=2)
        return L
    if kind == "aitchison":
        return rng.dirichlet(np.full(space.dim, 2.0), n)
    return rng.normal(0.0, 1.0, (n, space.dim))


SPACES = {cls.kind: cls for cls in (Euclidean, Wasserstein, Laplacian, Aitchison)}


def make_space(kind: str, dim: int) -> MetricSpace:
    try:
        return SPACES[kind](dim)
    except KeyError:
        raise ValueError(f"unknown space {kind!r}; choose from {sorted(SPACES)}") from None
