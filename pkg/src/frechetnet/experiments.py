"""Simulation designs, the compositional-data loader and the evaluation harness."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .config import TrainConfig
from .errors import DimensionError, FormatError, FrechetNetError, ParameterError
from .head import fit_head, predict
from .numerics import (
    derive_seed,
    sample_bernoulli,
    sample_gamma,
    sample_mvnormal,
    sample_normal,
    sample_uniform,
    seeded_rng,
)
from .spaces import Aitchison, Laplacian, Wasserstein, zero_replace
from .training import train

log = logging.getLogger(__name__)

P_SIM = 10
N_TEST = 100
QUANTILE_GRID = 100
N_SHARES = 9
N_STATE_PREDICTORS = 17
N_STATES = 49
METHODS = ("GFR", "DFNN", "MEAN")


# -- Experiment 1: distributional responses ------------------------------

def exp1_location_scale(X):
    """Conditional location ``mu`` and scale parameter ``theta`` for each row of ``X``."""
    X = np.asarray(X, dtype=float)
    x = [None] + [X[:, j] for j in range(P_SIM)]  # 1-based columns
    mu = x[1] * np.cos(np.pi * x[2]) - 0.5 * x[3] ** 2 + 4 * np.log1p(x[4] ** 2) - 4 / (1 + np.abs(x[5]))
    with np.errstate(divide="ignore"):
        t = 2 * x[6] * x[10] + 2 * x[9] ** 2 * np.sin(np.pi * x[8]) + 4 / (1 + x[7])
    theta = 0.5 + 3.5 * expit(t)
    return mu, theta


def exp1_predictors(n, rng):
    equicorr = np.full((4, 4), 0.1) + 0.9 * np.eye(4)
    X = np.empty((n, P_SIM))
    X[:, :4] = sample_mvnormal(rng, np.zeros(4), equicorr, n)
    X[:, 4:9] = sample_normal(rng, 1.0, 1.0, (n, 5))
    X[:, 9] = sample_bernoulli(rng, 0.3, n)
    return X


def gen_experiment1(n, rng, m=QUANTILE_GRID, n_draws=100):
    """Predictors ``(n, 10)`` and empirical quantile-function responses ``(n, m)``.

    Each response is the sorted sample of ``n_draws`` points from
    ``N(eta, sigma^2)``; with ``m == n_draws`` these are exactly the empirical
    quantiles at ``p_j = (j - 0.5)/m``.
    """
    if n < 1:
        raise ParameterError("n must be positive")
    X = exp1_predictors(n, rng)
    mu, theta = exp1_location_scale(X)
    eta = sample_normal(rng, mu, 0.5)
    sigma = sample_gamma(rng, theta**2, 1.0 / theta)
    Z = np.sort(eta[:, None] + sigma[:, None] * rng.standard_normal((n, n_draws)), axis=1)
    if m != n_draws:
        Z = np.quantile(Z, (np.arange(1, m + 1) - 0.5) / m, axis=1, method="inverted_cdf").T
    return X, Z


# -- Experiment 2: network responses ---------------------------------------

def gen_mask(q, rng):
    """Symmetric 0/1 edge mask with Bernoulli(0.3) upper triangle and zero diagonal."""
    upper = np.triu(sample_bernoulli(rng, 0.3, (q, q)), 1)
    return upper + upper.T


def exp2_edge_weights(X, A, a=0.0, rng=None):
    """Edge-weight matrices ``(n, q, q)`` for predictors ``X`` and mask ``A``."""
    q = A.shape[0]
    n = len(X)
    k = np.arange(1, q + 1)
    base = np.sin((k[:, None] + k[None, :]) * np.pi / (2 * q))
    Xq = X[:, :q]
    W = base * (1.0 / (np.abs(Xq)[:, :, None] + 1.0)) * (2.0 + Xq[:, None, :] ** 2)
    if a > 0:
        W = W + sample_uniform(rng, -a, a, (n, q, q))
    W = np.where(np.triu(A, 1)[None] > 0, W, 0.0)
    W = np.maximum(W, 0.0)
    return W + W.transpose(0, 2, 1)


def laplacian_from_weights(W):
    L = -W.copy()
    idx = np.arange(W.shape[-1])
    L[..., idx, idx] = W.sum(axis=-1)
    return L


def gen_experiment2(n, rng, q=10, a=0.0):
    """Mask ``A``, predictors ``(n, 10)`` and Laplacian responses ``(n, q, q)``."""
    if n < 1:
        raise ParameterError("n must be positive")
    if not 1 <= q <= P_SIM:
        raise ParameterError(f"q must lie in [1, {P_SIM}] (edge weights index predictors by node)")
    if a < 0:
        raise ParameterError("noise half-width a must be nonnegative")
    A = gen_mask(q, rng)
    X = sample_uniform(rng, 0.0, 1.0, (n, P_SIM))
    return A, X, laplacian_from_weights(exp2_edge_weights(X, A, a, rng))


# -- Experiment 3: compositional responses ---------------------------------

def composition_header():
    return (["state"] + [f"share_{j}" for j in range(1, N_SHARES + 1)]
            + [f"pred_{j}" for j in range(1, N_STATE_PREDICTORS + 1)])


def load_compositions(path, expected_rows=N_STATES, return_states=False):
    """Read the state compositions CSV; returns ``X (49, 17)`` and ``Y (49, 9)``.

    Shares are renormalized to sum one and zero shares are floored at 1e-8.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != composition_header():
        raise FormatError("compositions CSV must start with the header "
                          + ",".join(composition_header()))
    body = [r for r in rows[1:] if r]
    if expected_rows is not None and len(body) != expected_rows:
        raise FormatError(f"expected {expected_rows} data rows, found {len(body)}")
    states, values = [], []
    for lineno, r in enumerate(body, start=2):
        if len(r) != 1 + N_SHARES + N_STATE_PREDICTORS:
            raise FormatError(f"line {lineno}: expected {1 + N_SHARES + N_STATE_PREDICTORS} columns, got {len(r)}")
        try:
            values.append([float(v) for v in r[1:]])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
        states.append(r[0])
    values = np.array(values, dtype=float).reshape(-1, N_SHARES + N_STATE_PREDICTORS)
    shares = values[:, :N_SHARES]
    if np.any(shares < 0):
        raise FormatError("negative shares")
    if not np.all(np.isfinite(values)):
        raise FormatError("non-finite values")
    sums = shares.sum(axis=1)
    off = np.abs(sums - 1.0) > 1e-6
    if np.any(off):
        log.warning("%d rows of shares do not sum to one; renormalizing", int(off.sum()))
    Y = zero_replace(shares / sums[:, None])
    X = values[:, N_SHARES:]
    return (X, Y, states) if return_states else (X, Y)


# -- evaluation -------------------------------------------------------------

def mspe(predictions, truths, space):
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if len(predictions) != len(truths) or len(truths) == 0:
        raise DimensionError("predictions and truths must have equal nonzero length")
    if space.kind == "aitchison":
        predictions = zero_replace(predictions)
    return float(np.mean(space.sq_dist_many(predictions, truths)))


def standardization(X):
    """Column means and standard deviations (1/n); constant columns get scale one."""
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    return shift, np.where(scale > 0, scale, 1.0)


def fit_predict(method, X_tr, Y_tr, X_te, space, config: TrainConfig | None = None, seed=0):
    """Fit ``method`` on raw predictors and predict ``X_te``."""
    shift, scale = standardization(X_tr)
    Z_tr = (X_tr - shift) / scale
    Z_te = (X_te - shift) / scale
    if method == "GFR":
        return fit_head(Z_tr, Y_tr, space).predict_features(Z_te)
    if method == "MEAN":
        w = np.ones(len(Y_tr))
        mean = space.weighted_frechet_mean(Y_tr, w)
        return np.broadcast_to(mean, (len(X_te),) + space.point_shape).copy()
    if method == "DFNN":
        cfg = (config or TrainConfig()).replace(seed=seed)
        ckpt, _ = train(Z_tr, Y_tr, space, cfg)
        return predict(Z_te, ckpt.params, ckpt.arch, ckpt.head)
    raise ParameterError(f"unknown method {method!r}; choose from {METHODS}")


@dataclass
class McResult:
    method: str
    values: list = field(default_factory=list)
    failures: int = 0

    @property
    def mean(self):
        return float(np.mean(self.values)) if self.values else float("nan")

    @property
    def sd(self):
        return float(np.std(self.values, ddof=1)) if len(self.values) > 1 else float("nan")


def simulate(experiment, n, rng, a=0.0, q=10):
    """Draw ``n`` pairs from Experiment 1 or 2; returns ``(X, Y, space)``."""
    if experiment == 1:
        X, Y = gen_experiment1(n, rng)
        return X, Y, Wasserstein(QUANTILE_GRID)
    if experiment == 2:
        _, X, Y = gen_experiment2(n, rng, q=q, a=a)
        return X, Y, Laplacian(q)
    raise ParameterError(f"simulation experiments are 1 and 2, got {experiment}")


def _mc_replicate(args):
    experiment, n, a, q, methods, config, seed, n_test = args
    X, Y, space = simulate(experiment, n + n_test, seeded_rng(seed), a=a, q=q)
    X_tr, Y_tr, X_te, Y_te = X[:n], Y[:n], X[n:], Y[n:]
    out = {}
    for method in methods:
        try:
            pred = fit_predict(method, X_tr, Y_tr, X_te, space, config, seed=derive_seed(seed, 100))
            out[method] = mspe(pred, Y_te, space)
        except FrechetNetError as exc:
            log.warning("replicate seed %d, method %s failed: %s", seed, method, exc)
            out[method] = None
    return out


def _run(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _collect(methods, outs):
    results = {m: McResult(m) for m in methods}
    for out in outs:
        for m in methods:
            if out[m] is None:
                results[m].failures += 1
            else:
                results[m].values.append(out[m])
    return results


def run_monte_carlo(experiment, n, replicates, methods=("GFR", "DFNN"), config=None, base_seed=0,
                    a=0.0, q=10, n_test=N_TEST, jobs=1):
    """Replicate ``r`` uses seed ``base_seed + r`` for one draw of ``n + n_test`` pairs.

    Every method sees the same training and test data within a replicate.
    Returns ``{method: McResult}``.
    """
    if replicates < 1:
        raise ParameterError("need at least one replicate")
    tasks = [(experiment, n, a, q, tuple(methods), config, base_seed + r, n_test) for r in range(replicates)]
    return _collect(methods, _run(_mc_replicate, tasks, jobs))


def _cv_repeat(args):
    X, Y, space, folds, methods, config, seed = args
    n = len(X)
    rng = seeded_rng(seed)
    fold_of = rng.permutation(np.arange(n) % folds)
    out = {}
    for method in methods:
        pred = np.empty_like(Y)
        try:
            for k in range(folds):
                te = fold_of == k
                pred[te] = fit_predict(method, X[~te], Y[~te], X[te], space, config,
                                       seed=derive_seed(seed, 200, k))
            out[method] = mspe(pred, Y, space)
        except FrechetNetError as exc:
            log.warning("cv repeat seed %d, method %s failed: %s", seed, method, exc)
            out[method] = None
    return out


def run_cv(X, Y, space=None, folds=10, repeats=10, methods=("GFR", "DFNN"), config=None,
           base_seed=0, jobs=1):
    """Repeated ``folds``-fold cross-validated MSPE; repeat ``r`` uses seed ``base_seed + r``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    space = space or Aitchison(Y.shape[1])
    if len(X) < folds:
        raise ParameterError("need at least as many observations as folds")
    tasks = [(X, Y, space, folds, tuple(methods), config, base_seed + r) for r in range(repeats)]
    return _collect(methods, _run(_cv_repeat, tasks, jobs))


# -- result files -------------------------------------------------------------

def write_results(results, setting, path, append=False):
    """Per-replicate rows ``method,setting,replicate,mspe``."""
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not append:
            w.writerow(["method", "setting", "replicate", "mspe"])
        for method, res in results.items():
            for r, v in enumerate(res.values):
                w.writerow([method, setting, r, repr(float(v))])


def summary_rows(results, setting):
    rows = []
    for method, res in results.items():
        cell = f"{res.mean:.3f} ({res.sd:.3f})" if not math.isnan(res.sd) else f"{res.mean:.3f}"
        rows.append([setting, method, repr(res.mean), repr(res.sd), len(res.values), res.failures, cell])
    return rows


SUMMARY_HEADER = ["setting", "method", "mean", "sd", "replicates", "failures", "cell"]


def write_summary(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)
