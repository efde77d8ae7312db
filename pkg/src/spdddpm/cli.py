"""``spdddpm`` command line.

Settings come from built-in defaults, then an optional TOML file
(``--config``), then command-line flags; later sources win. A TOML file may
hold top-level keys and a table named after the subcommand, e.g.::

    seed = 3
    [train]
    T = 50
    epochs = 10

Exit status: 0 ok, 1 usage or configuration error, 2 data error,
3 numerical failure (including failed self-checks).
"""
import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data, diffusion, verify
from .errors import ChainFailure, ConfigError, ConvergenceFailure, DatasetError, SpdError
from .spdnet import SPDUNet, UNetSpec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("spdddpm")

# field -> (type, default, constraint); constraint is "pos", "nonneg" or None
_COMMON = {"seed": (int, DEFAULT_SEED, "nonneg")}
FIELDS = {
    "gen-toy": {
        "dim": (int, 3, "pos"),
        "sigma": (float, 0.1, "pos"),
        "count": (int, 15000, "pos"),
        "out": (str, "toy.jsonl", None),
        "center": (str, None, None),
        "center_out": (str, "center.json", None),
    },
    "train": {
        "data": (str, None, None),
        "T": (int, 200, "pos"),
        "epochs": (int, None, "pos"),
        "batch_size": (int, None, "pos"),
        "lr": (float, 0.0015, "pos"),
        "loss_metric": (str, "affine", None),
        "cond_dropout": (float, 0.1, "nonneg"),
        "standardize": (bool, False, None),
        "diagonal_loading": (float, 0.0, "nonneg"),
        "checkpoint": (str, "checkpoint.json", None),
        "loss_csv": (str, "loss.csv", None),
    },
    "sample": {
        "checkpoint": (str, "checkpoint.json", None),
        "n": (int, 100, "pos"),
        "gamma": (float, 10.0, "pos"),
        "y": (str, None, None),
        "out": (str, "samples.jsonl", None),
    },
    "predict": {
        "checkpoint": (str, "checkpoint.json", None),
        "y": (str, None, None),
        "n_samples": (int, 20, "pos"),
        "gamma": (float, 10.0, "pos"),
        "out": (str, "prediction.json", None),
        "heat_csv": (str, None, None),
    },
    "eval": {
        "samples": (str, "samples.jsonl", None),
        "ref": (str, None, None),
        "metric": (str, "affine", None),
        "out": (str, "metrics.csv", None),
    },
    "grad-check": {"dim": (int, 4, "pos")},
    "prop-check": {},
}
REQUIRED = {"train": ("data",), "predict": ("y",), "eval": ("ref",)}
CHOICES = {"loss_metric": ("affine", "frobenius"), "metric": ("affine", "frobenius")}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flag(name):
    return "--" + name.replace("_", "-") if name != "T" else "--T"


def build_parser():
    p = _Parser(prog="spdddpm", description="Diffusion models on SPD matrices.")
    sub = p.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    for mode, fields in FIELDS.items():
        sp = sub.add_parser(mode)
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("-v", "--verbose", action="store_true")
        for name, (typ, _, _) in {**_COMMON, **fields}.items():
            if typ is bool:
                sp.add_argument(_flag(name), dest=name, action="store_true", default=None)
            else:
                sp.add_argument(_flag(name), dest=name, type=typ, default=None)
    return p


def _check_type(name, typ, value):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, bool):
        raise ConfigError(name, "expected an integer")
    if not isinstance(value, typ):
        raise ConfigError(name, f"expected {typ.__name__}, got {type(value).__name__}")
    return value


def resolve_config(mode, args):
    """Merge defaults, the TOML file and flags into one validated dict."""
    fields = {**_COMMON, **FIELDS[mode]}
    cfg = {k: v[1] for k, v in fields.items()}
    if args.get("config"):
        try:
            with open(args["config"], "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args['config']}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"invalid TOML: {exc}") from exc
        table = {k: v for k, v in doc.items() if not isinstance(v, dict)}
        table.update(doc.get(mode, {}))
        for key, value in table.items():
            key = key.replace("-", "_")
            if key not in fields:
                raise ConfigError(key, f"unknown setting for {mode}")
            if key == "y" and isinstance(value, list):
                cfg[key] = value
            else:
                cfg[key] = _check_type(key, fields[key][0], value)
    for key in fields:
        if args.get(key) is not None:
            cfg[key] = args[key]
    for key in REQUIRED.get(mode, ()):
        if cfg.get(key) is None:
            raise ConfigError(key, f"required for {mode}")
    for key, (_, _, rule) in fields.items():
        v = cfg[key]
        if v is None or rule is None:
            continue
        if rule == "pos" and not v > 0:
            raise ConfigError(key, f"must be positive, got {v}")
        if rule == "nonneg" and not v >= 0:
            raise ConfigError(key, f"must be non-negative, got {v}")
    for key, allowed in CHOICES.items():
        if key in cfg and cfg[key] not in allowed:
            raise ConfigError(key, f"must be one of {allowed}, got {cfg[key]!r}")
    if mode == "train" and not cfg["cond_dropout"] < 1:
        raise ConfigError("cond_dropout", "must be below 1")
    if mode in ("sample", "predict") and cfg.get("y") is not None:
        cfg["y"] = _parse_vector("y", cfg["y"])
    return cfg


def _parse_vector(name, text):
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = [s for s in str(text).split(",") if s.strip()]
    try:
        v = np.asarray([float(s) for s in parts])
    except ValueError as exc:
        raise ConfigError(name, f"expected comma-separated numbers, got {text!r}") from exc
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ConfigError(name, "expected at least one finite number")
    return v


def _require_file(name, path):
    if not Path(path).is_file():
        raise DatasetError(f"{name}: file not found: {path}")


def _limit_threads():
    n = os.environ.get("SPDDDPM_THREADS")
    if not n:
        return None
    try:
        n = int(n)
    except ValueError as exc:
        raise ConfigError("SPDDDPM_THREADS", f"expected an integer, got {n!r}") from exc
    if n < 1:
        raise ConfigError("SPDDDPM_THREADS", "must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_gen_toy(cfg, rng):
    if cfg["center"]:
        _require_file("center", cfg["center"])
        center = data.load_center(cfg["center"])
        if center.shape[0] != cfg["dim"]:
            raise ConfigError("dim", f"center is {center.shape[0]}x{center.shape[0]}")
    else:
        center = data.default_center(cfg["dim"], rng)
    records = data.generate_toy(data.ToySpec(center, cfg["sigma"], cfg["count"]), rng)
    data.save_dataset(records, cfg["out"])
    if not cfg["center"]:
        data.save_center(center, cfg["center_out"])
        log.info("center written to %s", cfg["center_out"])
    print(f"wrote {len(records)} matrices to {cfg['out']}")


def cmd_train(cfg, rng):
    _require_file("data", cfg["data"])
    records = data.load_dataset(cfg["data"], cfg["diagonal_loading"])
    if not records:
        raise DatasetError(f"{cfg['data']} holds no records")
    conditional = records[0].predictors is not None
    extra = {"seed": cfg["seed"]}
    if conditional and cfg["standardize"]:
        records, means, stds = data.standardize_predictors(records)
        extra.update(predictor_means=means.tolist(), predictor_stds=stds.tolist())
    epochs = cfg["epochs"] or (20 if conditional else 50)
    batch = cfg["batch_size"] or (100 if conditional else 150)
    tcfg = diffusion.TrainConfig(epochs, batch, cfg["lr"], cfg["loss_metric"], cfg["cond_dropout"])
    m = records[0].matrix.shape[0]
    p = records[0].predictors.size if conditional else 0
    net = SPDUNet(UNetSpec(m, cond_dim=p), rng=rng)
    s = diffusion.build_schedule(cfg["T"])
    train = diffusion.train_conditional if conditional else diffusion.train_unconditional
    res = train(records, net, s, tcfg, rng, log=log.info)
    diffusion.save_checkpoint(cfg["checkpoint"], net, s, extra)
    diffusion.write_loss_csv(cfg["loss_csv"], res.trace)
    print(f"trained {res.steps} steps, final epoch loss {res.epoch_losses[-1]:.6f}; "
          f"checkpoint {cfg['checkpoint']}")


def _load_net(cfg):
    _require_file("checkpoint", cfg["checkpoint"])
    net, s, extra = diffusion.load_checkpoint(cfg["checkpoint"])
    y = cfg.get("y")
    if y is not None:
        if net.spec.cond_dim == 0:
            raise ConfigError("y", "checkpoint is unconditional")
        if y.size != net.spec.cond_dim:
            raise ConfigError("y", f"expected {net.spec.cond_dim} values, got {y.size}")
        if "predictor_means" in extra:
            stds = np.asarray(extra["predictor_stds"])
            y = np.where(stds == 0, 0.0, (y - extra["predictor_means"]) / np.where(stds == 0, 1.0, stds))
    return net, s, y


def cmd_sample(cfg, rng):
    net, s, y = _load_net(cfg)
    scfg = diffusion.SamplerConfig(cfg["gamma"], cfg["n"])
    if y is None:
        X = diffusion.sample_unconditional(net, s, scfg, rng, n=cfg["n"])
    else:
        X = diffusion.sample_conditional(net, s, y, scfg, rng)
    data.save_dataset([data.MatrixRecord(x) for x in X], cfg["out"])
    print(f"wrote {len(X)} samples to {cfg['out']}")


def cmd_predict(cfg, rng):
    net, s, y = _load_net(cfg)
    scfg = diffusion.SamplerConfig(cfg["gamma"], cfg["n_samples"])
    pred = diffusion.predict_conditional(net, s, y, scfg, rng=rng)
    data.save_center(pred.mean, cfg["out"])
    if cfg["heat_csv"]:
        data.export_heat_csv(pred.mean, cfg["heat_csv"])
    print(f"prediction written to {cfg['out']} (Karcher iterations {pred.frechet_iterations})")


def cmd_eval(cfg, rng):
    _require_file("samples", cfg["samples"])
    _require_file("ref", cfg["ref"])
    ref = data.load_center(cfg["ref"])
    records = data.load_dataset(cfg["samples"])
    report = data.eval_mean_distance(records, ref, cfg["metric"])
    data.write_metrics_csv(report, cfg["out"])
    print(f"mean {cfg['metric']} distance {report.mean:.6f}; metrics in {cfg['out']}")


def _report(checks):
    for c in checks:
        print(c.line())
    worst = max((c.error for c in checks), default=0.0)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} passed, max error {worst:.3e}")
    return EXIT_OK if not failed else EXIT_NUMERIC


def cmd_grad_check(cfg, rng):
    return _report(verify.grad_checks(cfg["dim"], cfg["seed"]))


def cmd_prop_check(cfg, rng):
    return _report(verify.property_checks(cfg["seed"]))


COMMANDS = {
    "gen-toy": cmd_gen_toy,
    "train": cmd_train,
    "sample": cmd_sample,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "grad-check": cmd_grad_check,
    "prop-check": cmd_prop_check,
}


def main(argv=None):
    args = vars(build_parser().parse_args(argv))
    mode = args["mode"]
    logging.basicConfig(
        level=logging.INFO if args.get("verbose") else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(mode, args)
        limiter = _limit_threads()
        print(f"seed {cfg['seed']}")
        try:
            status = COMMANDS[mode](cfg, np.random.default_rng(cfg["seed"]))
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except ConfigError as exc:
        print(f"spdddpm: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, SpdError, OSError, ValueError, KeyError) as exc:
        print(f"spdddpm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ChainFailure, ConvergenceFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"spdddpm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if status is None else status


if __name__ == "__main__":
    sys.exit(main())
