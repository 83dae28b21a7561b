"""Global Fréchet regression output layer.

Given reference representations ``F`` (rows ``g_L(X_i)``) the weight of
reference ``i`` for a query representation ``f`` is::

    s_i(f) = 1 + (f - mu)^T (Sigma + ridge*I)^{-1} (F_i - mu)

with ``mu`` and ``Sigma`` the 1/n mean and covariance of ``F``.  Because the
rows of ``F - mu`` sum to zero, the weights average to exactly one for every
query, and the prediction is the weighted Fréchet mean of the reference
responses.  With ``F`` set to the raw predictors this is plain global
Fréchet regression (GFR).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DimensionError, SampleSizeError, SingularityError
from .network import forward
from .numerics import auto_ridge, cho_factor_ridged, mean_and_cov

# smallest accepted squared-pivot ratio of the unridged Cholesky factor
_PIVOT_RATIO = 1e-12
_MAX_ESCALATIONS = 12


@dataclass
class RepresentationStats:
    mean: np.ndarray
    cov: np.ndarray
    ridge: float
    factor: tuple

    def solve(self, B):
        return sla.cho_solve(self.factor, B)


def select_factor(cov, ridge_policy="auto"):
    """Factor ``cov + ridge*I`` according to ``ridge_policy``.

    ``"auto"`` uses no ridge when the plain Cholesky factor exists with a sane
    pivot ratio, else ``1e-8 * trace/dim`` escalated tenfold until it works.
    A number fixes the ridge.
    """
    if ridge_policy != "auto":
        return cho_factor_ridged(cov, float(ridge_policy))
    try:
        factor, ridge = cho_factor_ridged(cov, 0.0)
        piv = np.diag(factor[0]) ** 2
        if piv.min() > _PIVOT_RATIO * piv.max():
            return factor, ridge
    except SingularityError:
        pass
    ridge = auto_ridge(cov)
    for _ in range(_MAX_ESCALATIONS):
        try:
            return cho_factor_ridged(cov, ridge)
        except SingularityError:
            ridge *= 10.0
    raise SingularityError("covariance could not be stabilized", ridge)


def fit_stats(F, ridge_policy="auto") -> RepresentationStats:
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < 2:
        raise SampleSizeError("need at least 2 reference representations")
    mu, cov = mean_and_cov(F)
    factor, ridge = select_factor(cov, ridge_policy)
    return RepresentationStats(mu, cov, ridge, factor)


def weights(f_x, F, stats: RepresentationStats):
    """Signed GFR weights of each reference row for one or many queries.

    Returns shape ``(n,)`` for a single query of shape ``(p,)`` and
    ``(m, n)`` for ``m`` stacked queries.
    """
    F = np.asarray(F, dtype=float)
    f_x = np.asarray(f_x, dtype=float)
    if f_x.shape[-1] != F.shape[1]:
        raise DimensionError(f"query has {f_x.shape[-1]} features, references have {F.shape[1]}")
    coef = stats.solve((F - stats.mean).T)
    return 1.0 + (f_x - stats.mean) @ coef


@dataclass
class FittedHead:
    """Reference sample (representations and responses) plus its statistics."""

    features: np.ndarray
    responses: np.ndarray
    space: object
    stats: RepresentationStats

    def __post_init__(self):
        if len(self.features) != len(self.responses):
            raise DimensionError("need one response per reference representation")
        self._embedded = self.space.embed_many(self.responses)

    @property
    def n(self):
        return len(self.features)

    def raw_predict(self, f_x):
        s = weights(np.atleast_2d(f_x), self.features, self.stats)
        return s @ self._embedded / self.n

    def predict_features(self, f_x):
        """Predicted points for stacked query representations ``(m, p_L)``."""
        return self.space.project_many(self.raw_predict(f_x)).reshape((-1,) + self.space.point_shape)


def fit_head(features, responses, space, ridge_policy="auto") -> FittedHead:
    features = np.asarray(features, dtype=float)
    return FittedHead(features, np.asarray(responses, dtype=float), space, fit_stats(features, ridge_policy))


def predict(x, params, arch, head: FittedHead, space=None):
    """DFNN prediction for a single input ``(p,)`` or a batch ``(m, p)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    f_x, _ = forward(params, arch, np.atleast_2d(x), train=False)
    out = head.predict_features(f_x)
    return out[0] if single else out


def gfr_predict(x, X_train, responses, space, ridge_policy="auto"):
    """Global Fréchet regression: the head applied to the raw predictors."""
    x = np.asarray(x, dtype=float)
    head = fit_head(X_train, responses, space, ridge_policy)
    out = head.predict_features(np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def frechet_objective(omega, s, responses, space) -> float:
    """``(1/n) sum_i s_i d^2(Y_i, omega)``."""
    return space.frechet_objective(omega, s, responses)
