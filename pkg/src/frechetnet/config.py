"""Training configuration and per-experiment hyperparameter presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ParameterError
from .network import Architecture

PROJECTIONS = ("straight_through", "exact")


@dataclass(frozen=True)
class TrainConfig:
    hidden_widths: tuple = (32, 8)
    dropout: float = 0.0
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int | None = None  # None = full batch
    max_epochs: int = 5000
    burn_in: int = 50
    tol: float = 1e-5
    patience: int = 150
    seed: int = 0
    ridge_policy: object = "auto"
    projection: str = "straight_through"
    detach_stats: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must lie in [0, 1)")
        if self.patience < 1:
            raise ParameterError("patience must be at least 1")
        if self.max_epochs < 1 or self.burn_in < 0:
            raise ParameterError("max_epochs must be >= 1 and burn_in >= 0")
        if self.tol < 0:
            raise ParameterError("tol must be nonnegative")
        if self.batch_size is not None and self.batch_size < 2:
            raise ParameterError("batch_size must be at least 2")
        if self.projection not in PROJECTIONS:
            raise ParameterError(f"projection must be one of {PROJECTIONS}")
        if not self.hidden_widths or min(self.hidden_widths) < 1:
            raise ParameterError("hidden widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must lie in [0, 1)")

    @property
    def depth(self):
        return len(self.hidden_widths)

    @property
    def width(self):
        return self.hidden_widths[0] if self.depth > 1 else self.hidden_widths[-1]

    @property
    def last_width(self):
        return self.hidden_widths[-1]

    def architecture(self, input_dim) -> Architecture:
        return Architecture(input_dim, self.hidden_widths, self.dropout)

    def replace(self, **changes):
        """Copy with changes; ``width``/``depth``/``last_width`` rebuild the widths."""
        shape = {k: changes.pop(k) for k in ("width", "depth", "last_width") if k in changes}
        if shape:
            width = shape.get("width", self.width)
            depth = shape.get("depth", self.depth)
            last = shape.get("last_width", self.last_width)
            changes["hidden_widths"] = (width,) * (depth - 1) + (last,)
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["hidden_widths"] = list(self.hidden_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known - {"width", "depth", "last_width"}
        if unknown:
            raise ParameterError(f"unknown configuration keys: {sorted(unknown)}")
        shape = {k: d.pop(k) for k in ("width", "depth", "last_width") if k in d}
        cfg = cls(**d)
        return cfg.replace(**shape) if shape else cfg


# Selected architecture / regularization values per experiment
HYPERPARAMS = {
    1: dict(width=2048, depth=4, last_width=8, learning_rate=0.001, dropout=0.3),
    2: dict(width=4096, depth=4, last_width=15, learning_rate=0.01, dropout=0.3),
    3: dict(width=1024, depth=4, last_width=14, learning_rate=0.01, dropout=0.3),
}

# Early-stopping constants per experiment
STOPPING = {
    1: dict(burn_in=50, tol=1e-5, patience=150),
    2: dict(burn_in=50, tol=1e-5, patience=100),
    3: dict(burn_in=500, tol=1e-5, patience=1000),
}

# Hyperparameter grids per experiment (the experiment 3 learning-rate grid lists 0.01 twice)
GRIDS = {
    1: dict(width=[512, 1024, 2048], last_width=[8, 16, 24], depth=[3, 4],
            learning_rate=[0.001, 0.005, 0.01], dropout=[0.1, 0.2, 0.3]),
    2: dict(width=[256, 512, 1024, 4096], last_width=[5, 10, 15], depth=[3, 4],
            learning_rate=[0.001, 0.01, 0.1], dropout=[0.1, 0.2, 0.3]),
    3: dict(width=[128, 256, 512, 1024], last_width=[7, 14, 21], depth=[3, 4],
            learning_rate=[0.001, 0.01, 0.01], dropout=[0.1, 0.2, 0.3]),
}


def experiment_config(experiment: int, **overrides) -> TrainConfig:
    """Selected hyperparameters and early-stopping constants for an experiment."""
    if experiment not in HYPERPARAMS:
        raise ParameterError(f"unknown experiment {experiment}")
    base = TrainConfig().replace(**HYPERPARAMS[experiment], **STOPPING[experiment])
    return base.replace(**overrides) if overrides else base
