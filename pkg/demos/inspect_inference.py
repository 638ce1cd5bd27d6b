"""Follow one pattern through both inference engines.

Trains a small quick model (or loads a checkpoint), runs one test pattern
through the analytic closed-form pass and the event-driven simulator, and
prints what each saw: the input pulse spread, when each layer started
firing, the winning output, and how many input pulses the event engine
actually consumed before it could stop listening.
"""

import argparse

import numpy as np

from pulsenet.batch import forward_network_batch
from pulsenet.core import KernelConfig
from pulsenet.events import run_event_inference
from pulsenet.scenes import class_name, generate_dataset
from pulsenet.training import TrainConfig, load_model, train


def quick_model(noise: float, kernel: KernelConfig):
    tr, te = generate_dataset(30, 5, noise, seed=7)
    cfg = TrainConfig(max_epochs=30, rng_seed=3)
    report = train((tr.times(kernel), tr.labels), (te.times(kernel), te.labels), cfg)
    print(f"quick-trained model: best test accuracy "
          f"{report.best_accuracy:.3f} at epoch {report.best_epoch}")
    return report.best_model


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default=None, help="checkpoint to load "
                    "(default: quick-train a fresh one, ~60 s)")
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--pattern", type=int, default=0, help="test pattern index")
    args = ap.parse_args()

    cfg = TrainConfig()
    kernel = KernelConfig(tau_syn=cfg.tau_syn_us)
    if args.model:
        model = load_model(args.model)
        kernel = model.kernel
    else:
        model = quick_model(args.noise, kernel)

    _, te = generate_dataset(30, 5, args.noise, seed=7)
    times = te.times(kernel)
    label = int(te.labels[args.pattern])
    x = times[args.pattern]

    print(f"\npattern {args.pattern}: true class {label} ({class_name(label)})")
    print(f"input pulses: first {x.min():.3f}, median {np.median(x):.3f}, "
          f"last {x.max():.3f} (normalized units, 1 unit = "
          f"{kernel.tau_syn:.2f} us)")

    out_t, _ = forward_network_batch(x[None, :], model)
    pred_analytic = int(out_t.argmin(axis=1)[0])
    t_win = float(out_t[0, pred_analytic])
    print("\nanalytic pass:")
    print(f"  winner: class {pred_analytic} ({class_name(pred_analytic)}) "
          f"at t = {t_win:.3f}")
    order = np.argsort(out_t[0])[:3]
    for rank, c in enumerate(order, 1):
        print(f"  #{rank}: class {int(c):2d} {class_name(int(c)):<18} "
              f"t = {out_t[0, c]:.3f}")

    trace = run_event_inference(x, model)
    print("\nevent-driven pass:")
    print(f"  winner: class {trace.predicted_class} "
          f"({class_name(trace.predicted_class)})")
    print(f"  recognition delay: {trace.recognition_delay_us * 1e3:.0f} ns "
          f"after the first input pulse")
    print(f"  input pulses consumed before halt: "
          f"{trace.input_spikes_consumed} of {int(np.isfinite(x).sum())}")
    for i, lt in enumerate(trace.layer_times, 1):
        fired = np.isfinite(lt)
        if fired.any():
            print(f"  layer {i}: {int(fired.sum())}/{lt.size} neurons fired "
                  f"by halt, earliest {lt[fired].min():.3f}")
        else:
            print(f"  layer {i}: nothing fired by halt")

    agree = trace.predicted_class == pred_analytic
    print(f"\nengines agree: {agree}")
    if not agree:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
