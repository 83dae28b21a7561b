"""Seeded sampling, small dense linear algebra and isotonic projection.

Random streams
--------------
Every stream is a :class:`numpy.random.Generator` driven by the PCG64 bit
generator (PCG-XSL-RR 128/64, O'Neill 2014), seeded directly with a 64-bit
unsigned integer.  The bit stream of PCG64 for a given seed is identical on
every platform.  Normal draws use NumPy's 256-step ziggurat and gamma draws
use the Marsaglia-Tsang squeeze/rejection method, with the ``U**(1/shape)``
boost for ``shape < 1``.

With ``seed=0`` the first ``rng.random()`` draw is ``FIRST_UNIFORM_SEED0``.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import ParameterError, SampleSizeError, SingularityError

FIRST_UNIFORM_SEED0 = 0.6369616873214543

_UINT64_MAX = 2**64 - 1


def seeded_rng(seed: int) -> np.random.Generator:
    """Return a PCG64-backed generator for a 64-bit unsigned ``seed``."""
    seed = int(seed)
    if seed < 0 or seed > _UINT64_MAX:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministically derive an independent 64-bit seed from ``seed`` and ``keys``."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_normal(rng, mean=0.0, sd=1.0, size=None):
    if not sd > 0:
        raise ParameterError(f"sd must be positive, got {sd}")
    return rng.normal(mean, sd, size)


def sample_gamma(rng, shape, scale, size=None):
    """Gamma draws in the shape-scale parametrization (mean ``shape*scale``)."""
    if not (np.all(np.asarray(shape) > 0) and np.all(np.asarray(scale) > 0)):
        raise ParameterError("gamma shape and scale must be positive")
    return rng.gamma(shape, scale, size)


def sample_uniform(rng, a, b, size=None):
    if not np.all(np.asarray(a) < np.asarray(b)):
        raise ParameterError(f"uniform interval must satisfy a < b, got [{a}, {b}]")
    return rng.uniform(a, b, size)


def sample_bernoulli(rng, p, size=None):
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"bernoulli p must lie in [0, 1], got {p}")
    return (rng.random(size) < p).astype(np.int64)


def sample_mvnormal(rng, mean, cov, size=None):
    """Multivariate normal draws via a symmetric square root of ``cov``.

    ``cov`` only needs to be positive semidefinite; a Cholesky factor is used
    when it exists and an eigen square root otherwise.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = mean.shape[0]
    if cov.shape != (d, d):
        raise ParameterError("covariance shape does not match mean")
    if not np.allclose(cov, cov.T, rtol=1e-8, atol=1e-12):
        raise ParameterError("covariance must be symmetric")
    try:
        root = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-10 * max(1.0, abs(vals).max()):
            raise ParameterError("covariance must be positive semidefinite") from None
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    z = rng.standard_normal(shape + (d,))
    return mean + z @ root.T


def mean_and_cov(rows):
    """Mean and 1/n-normalized covariance of the rows of an ``(n, d)`` array."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise SampleSizeError("mean_and_cov needs at least 2 rows of equal length")
    n = rows.shape[0]
    mean = rows.mean(axis=0)
    centered = rows - mean
    return mean, centered.T @ centered / n


def auto_ridge(A) -> float:
    """Scale-aware default ridge, ``1e-8 * trace(A) / dim``."""
    A = np.asarray(A, dtype=float)
    tr = float(np.trace(A))
    r = 1e-8 * tr / A.shape[0]
    return r if r > 0 else 1e-12


def cho_factor_ridged(A, ridge=0.0):
    """Cholesky factor of ``A + ridge*I``; raises :class:`SingularityError` on failure."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("ridge_solve needs a square matrix")
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if not np.allclose(A, A.T, rtol=1e-8, atol=1e-8 * scale):
        raise ParameterError("ridge_solve needs a symmetric matrix")
    if ridge == "auto":
        ridge = auto_ridge(A)
    ridge = float(ridge)
    if ridge < 0:
        raise ParameterError("ridge must be nonnegative")
    M = A + ridge * np.eye(A.shape[0])
    try:
        factor = sla.cho_factor(M, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularityError("factorization of A + ridge*I failed", ridge) from exc
    return factor, ridge


def ridge_solve(A, B, ridge=0.0):
    """Solve ``(A + ridge*I) X = B`` for symmetric PSD ``A`` by Cholesky.

    ``ridge`` may be the string ``"auto"``, meaning ``1e-8 * trace(A)/dim``.
    No explicit inverse is formed.
    """
    factor, _ = cho_factor_ridged(A, ridge)
    return sla.cho_solve(factor, np.asarray(B, dtype=float))


def _pava_blocks(y):
    """Pool-adjacent-violators on a 1-D array; returns (block starts, block means)."""
    starts = []
    sums = []
    counts = []
    for i, v in enumerate(y):
        starts.append(i)
        sums.append(v)
        counts.append(1)
        while len(sums) > 1 and sums[-2] * counts[-1] > sums[-1] * counts[-2]:
            s, c = sums.pop(), counts.pop()
            starts.pop()
            sums[-1] += s
            counts[-1] += c
    return starts, [s / c for s, c in zip(sums, counts)], counts


def pava_isotonic(values):
    """L2 projection of ``values`` onto nondecreasing vectors (pool adjacent violators)."""
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ParameterError("pava_isotonic needs a nonempty 1-D vector")
    if np.all(np.diff(y) >= 0):
        return y.copy()
    _, means, counts = _pava_blocks(y.tolist())
    return np.repeat(means, counts)


def pava_pools(values):
    """Integer pool label per coordinate of the isotonic fit of ``values``."""
    y = np.asarray(values, dtype=float)
    if np.all(np.diff(y) > 0):
        return np.arange(y.size)
    _, _, counts = _pava_blocks(y.tolist())
    return np.repeat(np.arange(len(counts)), counts)


def pava_rows(values):
    """Row-wise :func:`pava_isotonic` over a 2-D array; monotone rows are copied."""
    y = np.array(values, dtype=float)
    bad = np.flatnonzero(np.any(np.diff(y, axis=1) < 0, axis=1))
    for i in bad:
        _, means, counts = _pava_blocks(y[i].tolist())
        y[i] = np.repeat(means, counts)
    return y


def finite_diff_gradient(f, x, h=1e-5):
    """Central-difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for j in range(flat.size):
        old = flat[j]
        flat[j] = old + h
        fp = f(x)
        flat[j] = old - h
        fm = f(x)
        flat[j] = old
        gflat[j] = (fp - fm) / (2 * h)
    return g
