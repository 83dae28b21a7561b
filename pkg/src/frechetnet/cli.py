"""Command-line entry point: ``frechetnet <command> [flags]``.

Exit codes: 0 success, 1 runtime failure (training divergence, numerical
failure, I/O), 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import GRIDS, TrainConfig, experiment_config
from .datasets import (
    file_digest,
    read_dataset,
    read_inputs,
    write_dataset,
    write_predictions,
)
from .errors import FormatError, FrechetNetError
from .experiments import (
    METHODS,
    load_compositions,
    mspe,
    run_cv,
    run_monte_carlo,
    simulate,
    standardization,
    summary_rows,
    write_results,
    write_summary,
)
from .numerics import seeded_rng
from .spaces import make_space
from .training import grid_search, train

log = logging.getLogger("frechetnet")

SEED_ENV = "FRECHETNET_SEED"
FORMATS_DOC = "docs/formats.md"

# replicate counts, sample sizes and noise levels per scale
SCALES = {
    "desk": dict(replicates=10, ns=(200,), noises=None, cv_repeats=10),
    "full": dict(replicates=250, ns=(200, 500, 1000), noises=(0.0, 0.02, 0.1), cv_repeats=100),
}
# architecture used at desk scale; the preset widths are too slow for one CPU
DESK_ARCH = dict(width=512, depth=3)

FLAG_HELP = """\
flags (every flag accepted by any command):
  --experiment {1,2,3}  simulation design or data experiment
  --n N                 sample size (simulate) / training size (reproduce)
  --noise A             edge-weight noise half-width a (experiment 2)
  --nodes Q             node count q <= 10 (experiment 2)
  --seed S              RNG seed; falls back to $FRECHETNET_SEED, then 0
  --space KIND          response space override: wasserstein|laplacian|aitchison|euclidean
  --dim D               dimension for --space (grid size, nodes, parts)
  --config FILE         JSON training configuration (flags override it)
  --lr, --dropout, --depth, --width, --last-width, --batch,
  --max-epochs, --burn-in, --tol, --patience, --momentum, --projection
                        training configuration overrides
  --jobs J              parallel worker processes for replicates
  --out PATH            output file or directory
  --dataset FILE        dataset file (train, evaluate, grid-search) or
                        compositions CSV (reproduce --experiment 3)
  --checkpoint FILE     trained model (predict, evaluate)
  --inputs FILE         predictor CSV (predict)
  --scale {desk,full}   replicate counts and architecture (reproduce)
  --replicates R        override the replicate/repeat count (reproduce)
  --methods LIST        comma-separated subset of GFR,DFNN,MEAN (reproduce)
  --grid FILE           JSON hyperparameter grid (grid-search)
  --verbose             log progress to stderr
"""


class UsageError(Exception):
    """Bad flags or unusable inputs (exit code 2)."""


# -- argument parsing ----------------------------------------------------------

def _add_config_flags(p):
    g = p.add_argument_group("training configuration")
    g.add_argument("--config", help="JSON file with TrainConfig fields")
    g.add_argument("--lr", type=float, dest="learning_rate", help="learning rate")
    g.add_argument("--dropout", type=float, help="dropout rate on hidden layers 1..L-1")
    g.add_argument("--depth", type=int, help="number of hidden layers L")
    g.add_argument("--width", type=int, help="width of hidden layers 1..L-1")
    g.add_argument("--last-width", type=int, dest="last_width", help="width of the final hidden layer")
    g.add_argument("--batch", type=int, dest="batch_size", help="minibatch size (default: full batch)")
    g.add_argument("--max-epochs", type=int, dest="max_epochs")
    g.add_argument("--burn-in", type=int, dest="burn_in")
    g.add_argument("--tol", type=float)
    g.add_argument("--patience", type=int)
    g.add_argument("--momentum", type=float)
    g.add_argument("--projection", choices=("straight_through", "exact"))


def _add_common(p):
    p.add_argument("--seed", type=int, help=f"RNG seed (fallback ${SEED_ENV}, then 0)")
    p.add_argument("--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frechetnet",
        description="Deep Fréchet regression for metric-space responses.",
        epilog=FLAG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("simulate", help="generate a simulated dataset file")
    p.add_argument("--experiment", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("train", help="train a DFNN on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--experiment", type=int, choices=(1, 2, 3),
                   help="start from this experiment's preset hyperparameters")
    p.add_argument("--space", help="override the dataset's space kind")
    p.add_argument("--dim", type=int)
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    _add_common(p)

    p = sub.add_parser("predict", help="predict responses for new predictors")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("evaluate", help="MSPE of a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="write the result as JSON")
    _add_common(p)

    p = sub.add_parser("grid-search", help="select hyperparameters by validation MSPE")
    p.add_argument("--dataset", required=True)
    p.add_argument("--experiment", type=int, choices=(1, 2, 3), help="use this experiment's preset grid")
    p.add_argument("--grid", help="JSON grid file (keys: width,last_width,depth,learning_rate,dropout)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    _add_common(p)

    p = sub.add_parser("reproduce", help="run an experiment's Monte Carlo or CV table")
    p.add_argument("--experiment", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--scale", choices=tuple(SCALES), default="desk")
    p.add_argument("--n", type=int, help="training sample size (default per scale)")
    p.add_argument("--noise", type=float, help="noise level a (experiment 2)")
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--replicates", type=int)
    p.add_argument("--methods", default="GFR,DFNN")
    p.add_argument("--dataset", help="compositions CSV for experiment 3")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    _add_common(p)
    return parser


# -- helpers ---------------------------------------------------------------------

def resolve_seed(args):
    if args.seed is not None:
        seed = args.seed
    else:
        env = os.environ.get(SEED_ENV)
        try:
            seed = int(env) if env not in (None, "") else 0
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    if not 0 <= seed < 2**32:
        raise UsageError("seed must lie in [0, 2**32)")
    return seed


_CONFIG_FLAGS = ("learning_rate", "dropout", "depth", "width", "last_width", "batch_size",
                 "max_epochs", "burn_in", "tol", "patience", "momentum", "projection")


def resolve_config(args, base: TrainConfig, seed) -> TrainConfig:
    """Built-in defaults < config file < flags."""
    cfg = base
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
        shape = {k: data.pop(k) for k in ("width", "depth", "last_width") if k in data}
        merged = cfg.to_dict()
        merged.update(data)
        cfg = TrainConfig.from_dict(merged)
        if shape:
            cfg = cfg.replace(**shape)
    flags = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
    return cfg.replace(seed=seed, **flags)


def write_manifest(out_dir, command, **fields):
    manifest = {"command": command, "version": __version__}
    manifest.update(fields)
    with open(Path(out_dir) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_file(path, what):
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def _load_dataset(args):
    _require_file(args.dataset, "dataset")
    X, Y, space = read_dataset(args.dataset)
    if getattr(args, "space", None):
        space = make_space(args.space, args.dim or space.dim)
        Y = Y.reshape((len(Y),) + space.point_shape)
    return X, Y, space


# -- commands ----------------------------------------------------------------------

def cmd_simulate(args):
    seed = resolve_seed(args)
    if args.n < 1:
        raise UsageError("--n must be positive")
    if args.experiment == 2 and not 1 <= args.nodes <= 10:
        raise UsageError("--nodes must lie in 1..10 (edge weights index predictors by node)")
    if args.noise < 0:
        raise UsageError("--noise must be nonnegative")
    X, Y, space = simulate(args.experiment, args.n, seeded_rng(seed), a=args.noise, q=args.nodes)
    digest = write_dataset(args.out, X, Y, space)
    print(f"wrote {args.n} records to {args.out}")
    print(f"sha256 {digest}")
    return 0


def cmd_train(args):
    seed = resolve_seed(args)
    X, Y, space = _load_dataset(args)
    base = experiment_config(args.experiment) if args.experiment else TrainConfig()
    cfg = resolve_config(args, base, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shift, scale = standardization(X)
    ckpt, hist = train((X - shift) / scale, Y, space, cfg, x_shift=shift, x_scale=scale)
    save_checkpoint(ckpt, out / "checkpoint.fnet")
    with open(out / "history.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,train_risk,val_mspe\n")
        for e, (r, v) in enumerate(zip(hist.train_risk, hist.val_mspe), start=1):
            fh.write(f"{e},{r!r},{'' if np.isnan(v) else repr(v)}\n")
    write_manifest(out, "train", config=cfg.to_dict(), dataset=str(args.dataset),
                   dataset_sha256=file_digest(args.dataset), space={"kind": space.kind, "dim": space.dim},
                   epochs=hist.epochs, best_epoch=hist.best_epoch, best_val_mspe=hist.best_val,
                   stop_reason=hist.stop_reason)
    print(f"trained {hist.epochs} epochs ({hist.stop_reason}); best epoch {hist.best_epoch}, "
          f"validation MSPE {hist.best_val:.6g}")
    print(f"checkpoint {out / 'checkpoint.fnet'}")
    return 0


def cmd_predict(args):
    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.inputs, "inputs file")
    ckpt = load_checkpoint(args.checkpoint)
    X = read_inputs(args.inputs, p=None)
    if len(X) == 0:
        X = np.empty((0, ckpt.arch.input_dim))
    pred = ckpt.predict(X)
    write_predictions(args.out, pred, ckpt.space)
    print(f"wrote {len(pred)} predictions to {args.out}")
    return 0


def cmd_evaluate(args):
    _require_file(args.checkpoint, "checkpoint")
    ckpt = load_checkpoint(args.checkpoint)
    X, Y, space = _load_dataset(args)
    if space != ckpt.space:
        raise UsageError(f"dataset space {space!r} does not match checkpoint space {ckpt.space!r}")
    result = {"n": len(X), "space": space.kind, "mspe": mspe(ckpt.predict(X), Y, space)}
    print(json.dumps(result, sort_keys=True))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_grid_search(args):
    seed = resolve_seed(args)
    X, Y, space = _load_dataset(args)
    if args.grid:
        try:
            with open(args.grid, encoding="utf-8") as fh:
                grids = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read grid file {args.grid}: {exc}") from exc
    elif args.experiment:
        grids = GRIDS[args.experiment]
    else:
        raise UsageError("grid-search needs --grid or --experiment")
    base = experiment_config(args.experiment) if args.experiment else TrainConfig()
    cfg = resolve_config(args, base, seed)
    shift, scale = standardization(X)
    try:
        best, table = grid_search((X - shift) / scale, Y, space, grids, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grid.csv", "w", encoding="utf-8") as fh:
        fh.write("depth,width,last_width,learning_rate,dropout,val_mspe,error\n")
        for row in table:
            c = row["config"]
            err = (row["error"] or "").replace(",", ";").replace("\n", " ")
            fh.write(f"{c.depth},{c.width},{c.last_width},{c.learning_rate!r},{c.dropout!r},"
                     f"{row['score']!r},{err}\n")
    with open(out / "best_config.json", "w", encoding="utf-8") as fh:
        json.dump(best.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out, "grid-search", grid=grids, base_config=cfg.to_dict(),
                   dataset_sha256=file_digest(args.dataset))
    print(f"best: depth {best.depth}, width {best.width}, last width {best.last_width}, "
          f"lr {best.learning_rate}, dropout {best.dropout}")
    return 0


def cmd_reproduce(args):
    seed = resolve_seed(args)
    scale = SCALES[args.scale]
    methods = tuple(m.strip().upper() for m in args.methods.split(",") if m.strip())
    unknown = set(methods) - set(METHODS)
    if not methods or unknown:
        raise UsageError(f"--methods must be a subset of {','.join(METHODS)}")
    base = experiment_config(args.experiment)
    if args.scale == "desk":
        base = base.replace(**DESK_ARCH)
    cfg = resolve_config(args, base, seed)
    replicates = args.replicates or (scale["cv_repeats"] if args.experiment == 3 else scale["replicates"])
    if replicates < 1:
        raise UsageError("--replicates must be positive")
    out = Path(args.out)

    if args.experiment == 3:
        if not args.dataset:
            raise UsageError(f"experiment 3 needs --dataset pointing to a compositions CSV; "
                             f"the schema is documented in {FORMATS_DOC}")
        _require_file(args.dataset, "compositions file")
        X, Y = load_compositions(args.dataset)
        out.mkdir(parents=True, exist_ok=True)
        res = run_cv(X, Y, folds=10, repeats=replicates, methods=methods, config=cfg,
                     base_seed=seed, jobs=args.jobs)
        settings = [("exp3_cv10", res)]
    else:
        if args.experiment == 2 and not 1 <= args.nodes <= 10:
            raise UsageError("--nodes must lie in 1..10")
        ns = (args.n,) if args.n else scale["ns"]
        if args.experiment == 1:
            noises = (0.0,)
        elif args.noise is not None:
            noises = (args.noise,)
        else:
            noises = scale["noises"] or (0.0,)
        out.mkdir(parents=True, exist_ok=True)
        settings = []
        for n in ns:
            for a in noises:
                label = f"exp{args.experiment}_n{n}" + (f"_a{a:g}" if args.experiment == 2 else "")
                log.info("running %s with %d replicates", label, replicates)
                res = run_monte_carlo(args.experiment, n, replicates, methods, cfg, base_seed=seed,
                                      a=a, q=args.nodes, jobs=args.jobs)
                settings.append((label, res))

    rows = []
    for i, (label, res) in enumerate(settings):
        write_results(res, label, out / "results.csv", append=i > 0)
        rows += summary_rows(res, label)
    write_summary(rows, out / "summary.csv")
    write_manifest(out, "reproduce", experiment=args.experiment, scale=args.scale, seed=seed,
                   replicates=replicates, methods=list(methods), config=cfg.to_dict(),
                   settings=[label for label, _ in settings],
                   dataset_sha256=file_digest(args.dataset) if args.dataset else None)
    for r in rows:
        print(f"{r[0]:<20} {r[1]:<5} {r[6]}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "grid-search": cmd_grid_search,
    "reproduce": cmd_reproduce,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"frechetnet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FormatError) as exc:
        # parameter, dimension and format errors are validation failures
        print(f"frechetnet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FrechetNetError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"frechetnet {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
