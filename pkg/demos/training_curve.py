"""Train a reduced model and plot its progress in the terminal.

Shows the test-accuracy curve epoch by epoch, then the recognition-delay
histogram of the finished model.  With --full this reproduces one noise
range of the benchmark at paper scale (3000/600, 100 epochs), which takes
a few minutes; the default is a 900/150 run that finishes in about two.
"""

import argparse

import numpy as np

from pulsenet.core import KernelConfig
from pulsenet.events import evaluate
from pulsenet.scenes import generate_dataset
from pulsenet.training import TrainConfig, train

BAR = " .:-=+*#%@"


def sparkline(values, width=72) -> str:
    v = np.asarray(values)
    if v.size > width:
        edges = np.linspace(0, v.size, width + 1).astype(int)
        v = np.array([v[a:b].mean() for a, b in zip(edges, edges[1:])])
    idx = np.clip((v * (len(BAR) - 1)).astype(int), 0, len(BAR) - 1)
    return "".join(BAR[i] for i in idx)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--full", action="store_true",
                    help="paper-scale run: 100/20 per class, 100 epochs")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    n_train, n_test = (100, 20) if args.full else (30, 5)
    epochs = 100 if args.full else 40
    tr, te = generate_dataset(n_train, n_test, args.noise, seed=args.seed)
    cfg = TrainConfig(max_epochs=epochs, rng_seed=args.seed)
    kernel = KernelConfig(tau_syn=cfg.tau_syn_us)

    print(f"training on {len(tr.labels)} patterns, noise U[0, {args.noise:g}], "
          f"{epochs} epochs")
    report = train((tr.times(kernel), tr.labels), (te.times(kernel), te.labels), cfg)

    print("\ntest accuracy by epoch (0 at the floor, 1 at the roof):")
    print("  " + sparkline(report.test_accuracies))
    marks = {0: report.test_accuracies[0],
             len(report.test_accuracies) // 2:
                 report.test_accuracies[len(report.test_accuracies) // 2],
             len(report.test_accuracies) - 1: report.final_accuracy}
    print("  " + ", ".join(f"epoch {e}: {a:.3f}" for e, a in marks.items()))
    print(f"  best {report.best_accuracy:.3f} at epoch {report.best_epoch}, "
          f"final {report.final_accuracy:.3f}")

    metrics = evaluate(te.times(kernel), te.labels, report.best_model)
    print(f"\nevent-driven evaluation of the best checkpoint:")
    print(f"  accuracy {metrics.accuracy:.3f}, mean recognition delay "
          f"{metrics.mean_delay_us * 1e3:.0f} ns")
    labels = ("< 0.23 us", "0.23-0.30", "0.30-1.00", "> 1.00 us")
    total = max(int(metrics.band_counts.sum()), 1)
    for name, count in zip(labels, metrics.band_counts):
        bar = "#" * round(40 * count / total)
        print(f"  {name:>9}: {count:4d} {bar}")
    print(f"  input spikes consumed: {metrics.spikes_min}-{metrics.spikes_max} "
          f"of 256")


if __name__ == "__main__":
    main()
