"""SGD-with-momentum training loop, early stopping and grid search."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint  # noqa: F401
from .config import TrainConfig
from .errors import FrechetNetError, NumericError, SampleSizeError, TrainingError
from .gradients import loss_and_grad
from .head import fit_head
from .network import forward, init_params
from .numerics import derive_seed, seeded_rng

log = logging.getLogger(__name__)

# stream keys for derive_seed
_SPLIT, _INIT, _DROPOUT, _SHUFFLE = 1, 2, 3, 4


@dataclass
class TrainHistory:
    train_risk: list = field(default_factory=list)
    val_mspe: list = field(default_factory=list)  # nan before burn-in
    best_epoch: int = 0
    stop_reason: str = ""

    @property
    def epochs(self):
        return len(self.train_risk)

    @property
    def best_val(self):
        return self.val_mspe[self.best_epoch - 1] if self.best_epoch else float("nan")


def split_indices(n, rng):
    """Random 4:1 train/validation partition of ``range(n)``."""
    if n < 5:
        raise SampleSizeError("need at least 5 examples for a 4:1 split")
    n_val = max(1, int(round(n / 5)))
    perm = rng.permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def split_train_val(X, Y, rng):
    tr, va = split_indices(len(X), rng)
    return (X[tr], Y[tr]), (X[va], Y[va])


def sgd_step(params, velocity, grads, learning_rate, momentum, inplace=False):
    """Classical momentum: ``v <- momentum*v + g``; ``theta <- theta - lr*v``."""
    if not inplace:
        params, velocity = params.copy(), velocity.copy()
    for p, v, g in zip(params.arrays(), velocity.arrays(), grads.arrays()):
        v *= momentum
        v += g
        p -= learning_rate * v
    return params, velocity


def _batches(n, batch_size, rng):
    if batch_size is None or batch_size >= n:
        return [np.arange(n)]
    perm = rng.permutation(n)
    chunks = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate(chunks[-2:])
        chunks.pop()
    return chunks


def _val_mspe(params, arch, X_tr, Y_tr, X_va, Y_va, space, ridge_policy):
    F_tr, _ = forward(params, arch, X_tr)
    head = fit_head(F_tr, Y_tr, space, ridge_policy)
    F_va, _ = forward(params, arch, X_va)
    pred = head.predict_features(F_va)
    return float(np.mean(space.sq_dist_many(pred, Y_va)))


def train(X, Y, space, config: TrainConfig, x_shift=None, x_scale=None):
    """Fit a DFNN on ``(X, Y)`` with a 4:1 validation split and early stopping.

    After epoch ``burn_in`` the validation MSPE is evaluated every epoch;
    training stops once it has failed to improve on the previous epoch by at
    least ``tol`` for ``patience`` consecutive epochs.  The parameters with
    the lowest validation MSPE are restored and the returned checkpoint's
    head is fitted on the whole training split.

    ``x_shift``/``x_scale`` record a predictor standardization already applied
    to ``X`` so the checkpoint can predict from raw inputs.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    arch = config.architecture(X.shape[1])
    if len(X) < max(5, arch.output_dim + 2):
        raise SampleSizeError(f"need at least {max(5, arch.output_dim + 2)} examples")

    (X_tr, Y_tr), (X_va, Y_va) = split_train_val(X, Y, seeded_rng(derive_seed(config.seed, _SPLIT)))
    params = init_params(arch, seeded_rng(derive_seed(config.seed, _INIT)))
    drop_rng = seeded_rng(derive_seed(config.seed, _DROPOUT))
    shuffle_rng = seeded_rng(derive_seed(config.seed, _SHUFFLE))
    E_tr = space.embed_many(Y_tr)
    velocity = params.zeros_like()

    hist = TrainHistory()
    best_params = params.copy()
    best_val = np.inf
    prev_val = None
    fails = 0
    first_eval = max(config.burn_in, 1)
    for epoch in range(1, config.max_epochs + 1):
        risks = []
        try:
            for idx in _batches(len(X_tr), config.batch_size, shuffle_rng):
                report, grads = loss_and_grad(
                    X_tr[idx], E_tr[idx], params, arch, space, rng=drop_rng, train=True,
                    ridge_policy=config.ridge_policy, projection=config.projection,
                    detach_stats=config.detach_stats, embedded=True,
                )
                risks.append((report.risk, len(idx)))
                sgd_step(params, velocity, grads, config.learning_rate, config.momentum, inplace=True)
        except NumericError as exc:
            raise TrainingError(f"non-finite risk ({exc})", epoch - 1) from exc
        risk = sum(r * m for r, m in risks) / len(X_tr)
        if not (np.isfinite(risk) and params.is_finite()):
            raise TrainingError("training diverged", epoch - 1)
        hist.train_risk.append(risk)

        if epoch < first_eval:
            hist.val_mspe.append(float("nan"))
            continue
        try:
            val = _val_mspe(params, arch, X_tr, Y_tr, X_va, Y_va, space, config.ridge_policy)
        except FrechetNetError as exc:
            raise TrainingError(f"validation failed ({exc})", epoch - 1) from exc
        if not np.isfinite(val):
            raise TrainingError("non-finite validation MSPE", epoch - 1)
        hist.val_mspe.append(val)
        if val < best_val:
            best_val, hist.best_epoch = val, epoch
            best_params = params.copy()
        if prev_val is not None:
            fails = fails + 1 if prev_val - val < config.tol else 0
        prev_val = val
        if fails >= config.patience:
            hist.stop_reason = "early"
            break
    else:
        hist.stop_reason = "max_epochs"
    log.debug("stopped at epoch %d (%s), best epoch %d, val %.5g",
              hist.epochs, hist.stop_reason, hist.best_epoch, best_val)

    F_tr, _ = forward(best_params, arch, X_tr)
    p = X.shape[1]
    ckpt = Checkpoint(
        arch=arch,
        params=best_params,
        config=config,
        space=space,
        features=F_tr,
        responses=Y_tr,
        x_shift=np.zeros(p) if x_shift is None else np.asarray(x_shift, dtype=float),
        x_scale=np.ones(p) if x_scale is None else np.asarray(x_scale, dtype=float),
    )
    return ckpt, hist


GRID_KEYS = ("depth", "width", "learning_rate", "dropout", "last_width")


def grid_search(X, Y, space, grids: dict, base_config: TrainConfig | None = None, **train_kw):
    """Train one model per grid point and pick the lowest validation MSPE.

    ``grids`` maps any of ``width, last_width, depth, learning_rate, dropout``
    to candidate lists.  Ties go to smaller depth, width, learning rate and
    dropout, in that order.  Failed grid points are recorded with an infinite
    score.
    """
    base_config = base_config or TrainConfig()
    unknown = set(grids) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys {sorted(unknown)}")
    if not grids or any(len(v) == 0 for v in grids.values()):
        raise ValueError("grids must be nonempty")
    keys = list(grids)
    table = []
    for combo in itertools.product(*(grids[k] for k in keys)):
        cfg = base_config.replace(**dict(zip(keys, combo)))
        row = {"config": cfg, "score": float("inf"), "error": None}
        try:
            _, hist = train(X, Y, space, cfg, **train_kw)
            row["score"] = hist.best_val
            row["epochs"] = hist.epochs
        except FrechetNetError as exc:
            row["error"] = str(exc)
        table.append(row)

    def rank(row):
        c = row["config"]
        return (row["score"], c.depth, c.width, c.learning_rate, c.dropout)

    best = min(table, key=rank)
    return best["config"], table
