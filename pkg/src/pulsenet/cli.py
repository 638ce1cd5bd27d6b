"""Command-line pipeline: dataset generation, training, evaluation, bench.

Subcommands
    gen-data   write dataset pairs for one or more noise ranges
    train      fit a network on one dataset pair, save checkpoint + curve
    eval       event-driven evaluation of a checkpoint, CSV metrics
    bench      gen-data + train + eval across all four benchmark noise ranges

Settings resolve in three layers: built-in defaults, then a --config file of
flat "key = value" lines, then explicit flags.  The fully resolved settings
for every stage are printed and also written into the output directory, so
any run can be reproduced from its artifacts alone.  All randomness fans out
of the root --seed through labeled derivations; two runs with the same
resolved settings write byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys

from .core import KernelConfig
from .events import (agreement_check, evaluate, write_confusion_csv,
                     write_histogram_csv, write_metrics_csv, write_traces_csv)
from .scenes import (generate_dataset, load_dataset, save_dataset,
                     write_class_table)
from .training import TrainConfig, derive_seed, load_model, save_model, train

BENCH_NOISES = (0.1, 0.2, 0.33, 0.5)
TRAIN_PER_CLASS = 100
TEST_PER_CLASS = 20
QUICK_TRAIN_PER_CLASS = 10
QUICK_TEST_PER_CLASS = 5
QUICK_EPOCHS = 5

_DEFAULTS = {
    "noise": None,       # per-command fallback below
    "seed": 42,
    "out": ".",
    "data": ".",
    "model": "model.txt",
    "epochs": TrainConfig.max_epochs,
    "lr": TrainConfig.learning_rate,
    "batch": TrainConfig.batch_size,
    "l2": TrainConfig.l2_lambda,
    "trace": False,
    "quick": False,
}

# settings echoed per command, in printed order
_ECHO_KEYS = {
    "gen-data": ("noise", "seed", "out", "quick"),
    "train": ("noise", "seed", "data", "out", "epochs", "lr", "batch",
              "l2", "quick"),
    "eval": ("noise", "model", "data", "out", "trace"),
    "bench": ("noise", "seed", "out", "epochs", "lr", "batch", "l2",
              "trace", "quick"),
}

_COERCE = {
    "noise": lambda v: tuple(float(x) for x in str(v).split(",")),
    "seed": int,
    "epochs": int,
    "batch": int,
    "lr": float,
    "l2": float,
    "trace": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
    "quick": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
}


def _read_config_file(path: str) -> dict:
    """Flat key = value lines; '#' starts a comment; keys match flag names."""
    values = {}
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, val = line.partition("=")
            else:
                key, _, val = line.partition(" ")
            key = key.strip().replace("-", "_")
            if key not in _DEFAULTS:
                raise ValueError(f"{path}: unknown setting {key!r}")
            values[key] = val.strip()
    return values


def _resolve(args: argparse.Namespace, command: str) -> dict:
    """Defaults, then config file, then explicit flags."""
    settings = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for key, raw in _read_config_file(args.config).items():
            settings[key] = _COERCE.get(key, str)(raw)
    for key in _DEFAULTS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None and flag is not False:
            settings[key] = flag
    if settings["noise"] is None:
        settings["noise"] = BENCH_NOISES if command == "bench" else (0.1,)
    settings["noise"] = tuple(settings["noise"])
    return settings


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(f"{v:g}" for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _echo_resolved(command: str, settings: dict) -> None:
    lines = [f"{key} = {_format_value(settings[key])}"
             for key in _ECHO_KEYS[command]]
    for line in lines:
        print(f"config [{command}] {line}")
    out_dir = settings["out"]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"resolved_{command}.txt")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _dataset_paths(data_dir: str, noise: float):
    return (os.path.join(data_dir, f"pulses_train_r{noise:.2f}.txt"),
            os.path.join(data_dir, f"pulses_test_r{noise:.2f}.txt"))


def cmd_gen_data(settings: dict) -> int:
    _echo_resolved("gen-data", settings)
    out_dir = settings["out"]
    n_train = QUICK_TRAIN_PER_CLASS if settings["quick"] else TRAIN_PER_CLASS
    n_test = QUICK_TEST_PER_CLASS if settings["quick"] else TEST_PER_CLASS
    for noise in settings["noise"]:
        seed = derive_seed(settings["seed"], f"dataset-r{noise:.2f}")
        train_set, test_set = generate_dataset(n_train, n_test, noise, seed)
        train_path, test_path = _dataset_paths(out_dir, noise)
        save_dataset(train_set, train_path)
        save_dataset(test_set, test_path)
        print(f"gen-data: noise [0, {noise:g}] -> {len(train_set)} train"
              f" + {len(test_set)} test patterns")
    write_class_table(os.path.join(out_dir, "classes.csv"))
    return 0


def cmd_train(settings: dict) -> int:
    _echo_resolved("train", settings)
    noise = settings["noise"][0]
    train_path, test_path = _dataset_paths(settings["data"], noise)
    train_set = load_dataset(train_path)
    test_set = load_dataset(test_path)
    cfg = TrainConfig(learning_rate=settings["lr"],
                      batch_size=settings["batch"],
                      max_epochs=QUICK_EPOCHS if settings["quick"]
                      else settings["epochs"],
                      l2_lambda=settings["l2"],
                      rng_seed=derive_seed(settings["seed"], "train"))
    kernel = KernelConfig(tau_syn=cfg.tau_syn_us)
    report = train((train_set.times(kernel), train_set.labels),
                   (test_set.times(kernel), test_set.labels), cfg)
    out_dir = settings["out"]
    save_model(report.best_model, os.path.join(out_dir, "model.txt"))
    with open(os.path.join(out_dir, "accuracy.csv"), "w",
              encoding="ascii") as fh:
        fh.write("epoch,test_accuracy,train_loss\n")
        for epoch, (acc, loss) in enumerate(zip(report.test_accuracies,
                                                report.train_losses)):
            fh.write(f"{epoch},{acc:.17g},{loss:.17g}\n")
    print(f"train: noise [0, {noise:g}] best accuracy"
          f" {report.best_accuracy:.4f} (epoch {report.best_epoch}),"
          f" final {report.final_accuracy:.4f}")
    return 0


def cmd_eval(settings: dict) -> int:
    _echo_resolved("eval", settings)
    model = load_model(settings["model"])
    noise = settings["noise"][0]
    _, test_path = _dataset_paths(settings["data"], noise)
    test_set = load_dataset(test_path)
    times = test_set.times(model.kernel)

    mismatches = agreement_check(times, model)
    metrics = evaluate(times, test_set.labels, model)

    out_dir = settings["out"]
    write_metrics_csv(metrics, os.path.join(out_dir, "metrics.csv"))
    write_histogram_csv(metrics, os.path.join(out_dir, "histogram.csv"))
    write_confusion_csv(metrics, os.path.join(out_dir, "confusion.csv"))
    if settings["trace"]:
        write_traces_csv(metrics, test_set.labels,
                         os.path.join(out_dir, "traces.csv"))
    print(f"eval: noise [0, {noise:g}] accuracy {metrics.accuracy:.4f}"
          f" mean delay {metrics.mean_delay_us:.4f} us"
          f" spikes [{metrics.spikes_min}, {metrics.spikes_max}]")
    print(f"eval: analytic/event agreement mismatches: {mismatches}")
    if mismatches:
        return 2
    return 0


def cmd_bench(settings: dict) -> int:
    _echo_resolved("bench", settings)
    out_root = settings["out"]
    rows = []
    for noise in settings["noise"]:
        sub = os.path.join(out_root, f"r{noise:.2f}")
        stage = dict(settings, noise=(noise,), out=sub, data=sub,
                     model=os.path.join(sub, "model.txt"))
        status = cmd_gen_data(stage) or cmd_train(stage) or cmd_eval(stage)
        if status:
            return status
        metrics_path = os.path.join(sub, "metrics.csv")
        with open(metrics_path, encoding="ascii") as fh:
            values = dict(line.strip().split(",", 1)
                          for line in fh if line.strip())
        rows.append((noise, float(values["accuracy"]),
                     float(values["mean_delay_us"]),
                     int(values["spikes_min"]), int(values["spikes_max"])))
    with open(os.path.join(out_root, "results.csv"), "w",
              encoding="ascii") as fh:
        fh.write("noise_range,accuracy,mean_delay_us,min_spikes,max_spikes\n")
        for noise, acc, delay, smin, smax in rows:
            fh.write(f"0-{noise:g},{acc:.17g},{delay:.17g},{smin},{smax}\n")
    for noise, acc, delay, smin, smax in rows:
        print(f"bench: noise [0, {noise:g}] accuracy {acc:.4f}"
              f" mean delay {delay:.4f} us spikes [{smin}, {smax}]")
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsenet",
        description="Temporal-coded spiking classifier for lidar pulse maps")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value settings file")
        p.add_argument("--seed", type=int, help="root seed for all stages")
        p.add_argument("--out", help="output directory")
        p.add_argument("--quick", action="store_true",
                       help="reduced-size smoke run")

    p = sub.add_parser("gen-data", help="generate dataset pairs")
    common(p)
    p.add_argument("--noise", type=float, action="append",
                   help="noise upper bound, repeatable")

    p = sub.add_parser("train", help="train on one dataset pair")
    common(p)
    p.add_argument("--noise", type=float, action="append",
                   help="noise range of the dataset pair to train on")
    p.add_argument("--data", help="directory holding the dataset files")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--l2", type=float)

    p = sub.add_parser("eval", help="evaluate a checkpoint, event-driven")
    common(p)
    p.add_argument("--noise", type=float, action="append",
                   help="noise range of the test set to evaluate")
    p.add_argument("--data", help="directory holding the dataset files")
    p.add_argument("--model", help="checkpoint file to evaluate")
    p.add_argument("--trace", action="store_true",
                   help="also write per-pattern traces.csv")

    p = sub.add_parser("bench", help="full four-noise-range reproduction")
    common(p)
    p.add_argument("--noise", type=float, action="append",
                   help="override the default four noise ranges")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--trace", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        settings = _resolve(args, args.command)
        return _COMMANDS[args.command](settings)
    except (OSError, ValueError) as exc:
        print(f"pulsenet {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
