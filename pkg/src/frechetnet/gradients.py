"""Reverse-mode gradient of the empirical Fréchet risk.

For a batch with final-layer representations ``F`` (n x p) and embedded
responses ``E`` (n x k) the in-sample prediction of every batch member is::

    C = F - mean(F)          A = C^T C / n + ridge*I
    B = A^{-1} C^T E         R = mean(E) + C B / n
    P = project(R)           risk = (scale/n) * sum_i ||embed(P_i) - E_i||^2

``R`` is row-wise the weighted embedding average with the signed GFR weights
``1 + C_i A^{-1} C_j^T``.  The adjoints below follow this chain backwards;
the solve adjoint reuses the Cholesky factor of the symmetric ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import NumericError, SampleSizeError
from .head import select_factor
from .network import Architecture, NetworkParams, backward, forward, init_params
from .spaces import random_points


class GradientBundle(NetworkParams):
    """Gradients shaped like :class:`NetworkParams`."""


@dataclass
class LossReport:
    risk: float
    sq_dists: np.ndarray
    ridge: float


def head_risk_and_grad(F, E, space, ridge_policy="auto", projection="straight_through",
                       detach_stats=False, need_grad=True):
    """Batch Fréchet risk of the GFR head on ``F`` and its gradient w.r.t. ``F``.

    Returns ``(sq_dists, dF, ridge, R)`` where ``R`` are the raw (unprojected)
    predictions.
    """
    n = F.shape[0]
    if n < 2:
        raise SampleSizeError("Fréchet risk needs a batch of at least 2")
    bad_rows = ~(np.all(np.isfinite(F), axis=1) & np.all(np.isfinite(E), axis=1))
    if bad_rows.any():
        bad = int(np.flatnonzero(bad_rows)[0])
        raise NumericError(f"non-finite representation or response at batch example {bad}", index=bad)
    mu = F.mean(axis=0)
    C = F - mu
    factor, ridge = select_factor(C.T @ C / n, ridge_policy)
    B = sla.cho_solve(factor, C.T @ E)
    R = E.mean(axis=0) + C @ B / n
    P = space.project_many(R)
    diff = space.embed_many(P) - E
    sq = space.scale * np.einsum("ij,ij->i", diff, diff)
    if not np.all(np.isfinite(sq)):
        bad = int(np.flatnonzero(~np.isfinite(sq))[0])
        raise NumericError(f"non-finite loss at batch example {bad}", index=bad)
    if not need_grad:
        return sq, None, ridge, R

    gR = space.project_adjoint(R, (2.0 * space.scale / n) * diff, projection)
    dC = gR @ B.T / n
    Z = sla.cho_solve(factor, C.T @ gR / n)
    dC += E @ Z.T
    if detach_stats:
        return sq, dC, ridge, R
    M = -(Z @ B.T)
    dC += C @ (M + M.T) / n
    return sq, dC - dC.mean(axis=0), ridge, R


def loss_and_grad(X, Y, params: NetworkParams, arch: Architecture, space, rng=None, train=True,
                  ridge_policy="auto", projection="straight_through", detach_stats=False,
                  embedded=False):
    """Empirical Fréchet risk of a batch and its gradient w.r.t. every ``W_l, b_l``.

    ``Y`` holds response points, or their embeddings when ``embedded`` is set.
    Statistics, weights and weighted means all come from the batch itself.
    Dropout masks (training mode) are drawn once from ``rng`` and reused in
    the backward pass.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise SampleSizeError("batch size must be at least 2")
    E = np.asarray(Y, dtype=float) if embedded else space.embed_many(Y)
    F, cache = forward(params, arch, X, train=train, rng=rng)
    sq, dF, ridge, _ = head_risk_and_grad(F, E, space, ridge_policy, projection, detach_stats)
    gw, gb = backward(params, cache, dF)
    return LossReport(float(sq.mean()), sq, ridge), GradientBundle(gw, gb)


def batch_risk(X, Y, params, arch, space, ridge_policy="auto"):
    """Eval-mode batch risk (no dropout)."""
    F, _ = forward(params, arch, np.asarray(X, dtype=float), train=False)
    sq, _, _, _ = head_risk_and_grad(F, space.embed_many(Y), space, ridge_policy, need_grad=False)
    return float(sq.mean())


def _signature(params, arch, X, E, space, ridge):
    """Activation pattern plus projection active set, used to spot kinks."""
    F, cache = forward(params, arch, X, train=False)
    parts = [(z > 0).tobytes() for z in cache.pre]
    _, _, _, R = head_risk_and_grad(F, E, space, ridge, need_grad=False)
    if space.kind == "wasserstein":
        parts.append((np.diff(R, axis=1) < 0).tobytes())
    elif space.kind == "laplacian":
        q = space.dim
        S = R.reshape(-1, q, q)
        parts.append(((S + S.transpose(0, 2, 1)) < 0).tobytes())
    return b"".join(parts)


def _random_instance(space, rng):
    n = int(rng.integers(8, 17))
    p = int(rng.integers(2, 5))
    depth = int(rng.integers(1, 3))
    widths = tuple(int(rng.integers(2, 9)) for _ in range(depth - 1))
    widths += (int(rng.integers(1, min(8, n - 3) + 1)),)
    arch = Architecture(p, widths)
    params = init_params(arch, rng)
    X = rng.normal(0.0, 1.0, (n, p))
    Y = random_points(space, n, rng)
    return arch, params, X, Y


def check_gradients(space, trials=20, rng=None, h=1e-5, projection="exact", max_cond=1e6,
                    flat_tol=1e-8):
    """Compare :func:`loss_and_grad` with central differences on random small instances.

    The difference quotient is Richardson-extrapolated from steps ``h`` and
    ``h/2``, which cancels the O(h^2) truncation term.  Coordinates whose
    stencil changes the ReLU pattern or the projection's active set are
    excluded (kink-adjacent).  Instances whose batch covariance needs a ridge
    or has condition number above ``max_cond`` are redrawn.  So are flat
    instances, where the analytic and finite-difference gradient norms over
    the kept coordinates both fall below ``flat_tol`` times the risk.  There
    the true gradient is zero (for example when the representation only
    rescales, which the head ignores), central differences return roundoff
    and a relative error is undefined.

    Returns a dict with the maximum relative error over trials.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    errors = []
    excluded = 0
    total = 0
    redrawn = 0
    flat = 0
    while len(errors) < trials:
        arch, params, X, Y = _random_instance(space, rng)
        E = space.embed_many(Y)
        F, _ = forward(params, arch, X, train=False)
        C = F - F.mean(axis=0)
        cov = C.T @ C / len(F)
        _, ridge = select_factor(cov, "auto")
        if ridge > 0 or np.linalg.cond(cov) > max_cond:
            redrawn += 1
            continue
        report, grads = loss_and_grad(X, E, params, arch, space, train=False, ridge_policy=0.0,
                                      projection=projection, embedded=True)
        g = grads.flatten()
        theta = params.flatten()
        base_sig = _signature(params, arch, X, E, space, 0.0)
        g_fd = np.empty_like(theta)
        keep = np.ones(theta.size, dtype=bool)
        for j in range(theta.size):
            vals = []
            for step in (h, -h, h / 2, -h / 2):
                t = theta.copy()
                t[j] += step
                p = params.unflatten(t)
                F, _ = forward(p, arch, X, train=False)
                sq, _, _, _ = head_risk_and_grad(F, E, space, 0.0, need_grad=False)
                vals.append(sq.mean())
                if _signature(p, arch, X, E, space, 0.0) != base_sig:
                    keep[j] = False
            coarse = (vals[0] - vals[1]) / (2 * h)
            fine = (vals[2] - vals[3]) / h
            g_fd[j] = (4 * fine - coarse) / 3
        if max(np.linalg.norm(g[keep]), np.linalg.norm(g_fd[keep])) < flat_tol * abs(report.risk):
            flat += 1
            continue
        total += theta.size
        excluded += int((~keep).sum())
        num = np.linalg.norm(g[keep] - g_fd[keep])
        den = max(np.linalg.norm(g[keep]), np.linalg.norm(g_fd[keep]), 1e-12)
        errors.append(num / den)
    return {
        "space": space.kind,
        "trials": trials,
        "max_rel_error": float(max(errors)),
        "rel_errors": errors,
        "excluded_coords": excluded,
        "total_coords": total,
        "redrawn": redrawn,
        "flat": flat,
    }
