"""Event-driven inference: deliver pulses in time order, stop at the answer.

The analytic path in batch.py solves every neuron's firing time against the
complete input.  This engine instead walks a global time-ordered event
stream: each delivered spike updates the destination layer's running causal
sums, each neuron holds a provisional firing time from those sums, and a
provisional firing is confirmed the moment nothing pending can precede it.
The simulation halts when any output neuron fires, so late pulses are never
even looked at; that is where the recognition-delay and consumed-spike
numbers come from.

Both paths accumulate weighted sums in the same sorted order, so they agree
to float precision, which agreement_check enforces.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .batch import forward_network_batch
from .core import NEVER, Model, ShapeMismatch

# Recognition-delay report bins (microseconds): below, inside, and above
# the band the delays are expected to concentrate in, plus an overflow row
# past the 1.0 us encode cap so the partition property is checkable.
DELAY_BAND_EDGES = (0.23, 0.30)
FINE_HIST_BINS = 20


class DatasetMismatch(ValueError):
    """Dataset shape does not match the model's input width."""


@dataclass(frozen=True)
class EventTrace:
    """Outcome of one event-driven run on one pattern.

    Times are in normalized kernel units except recognition_delay_us.
    layer_times holds one array per non-input layer; neurons that had not
    fired by the halt are NEVER.
    """

    predicted_class: int | None
    first_output_time: float
    recognition_delay_us: float | None
    input_spikes_consumed: int
    layer_times: tuple[np.ndarray, ...]


@dataclass
class EvalMetrics:
    accuracy: float
    n_patterns: int
    n_no_prediction: int
    mean_delay_us: float
    band_counts: np.ndarray      # [0,0.23), [0.23,0.30], (0.30,1.0], >1.0
    fine_hist: np.ndarray        # FINE_HIST_BINS uniform bins over [0,1] us
    spikes_min: int
    spikes_max: int
    confusion: np.ndarray        # confusion[label, predicted]; last col = none
    delays_us: np.ndarray        # per-pattern, NaN where no prediction
    consumed: np.ndarray         # per-pattern consumed input spikes
    predictions: np.ndarray = field(default=None)


def run_event_inference(spikes, model: Model) -> EventTrace:
    """Chronological event simulation of one pattern; halts at first output.

    spikes is a vector of normalized input times (NEVER allowed).  Events
    at equal times are processed in (layer, index) order, inputs counting
    as layer 0, so deliveries land before same-instant firings confirm.
    """
    t_in = np.asarray(spikes, dtype=np.float64).reshape(-1)
    if t_in.shape[0] != model.n_inputs:
        raise ShapeMismatch(f"{t_in.shape[0]} spikes for {model.n_inputs} inputs")
    theta = model.kernel.threshold
    n_layers = len(model.weights)

    finite_in = np.isfinite(t_in)
    order = np.argsort(t_in[finite_in], kind="stable")
    src_times = t_in[finite_in][order]
    src_index = np.nonzero(finite_in)[0][order]
    src_z = np.exp(src_times)

    # Per layer: running sums over delivered spikes, last delivered z, and
    # the confirmed firing times.  A provisional firing exists where the
    # denominator is positive and the candidate does not predate the most
    # recent delivery.
    sum_w = [np.zeros(model.weights[l].shape[0]) for l in range(n_layers)]
    sum_wz = [np.zeros(model.weights[l].shape[0]) for l in range(n_layers)]
    z_last = [1.0] * n_layers
    fired = [np.full(model.weights[l].shape[0], NEVER) for l in range(n_layers)]
    fired_z = [np.full(model.weights[l].shape[0], NEVER) for l in range(n_layers)]
    # cached earliest provisional per layer: (z_candidate, neuron) or None
    pending: list[tuple[float, int] | None] = [None] * n_layers

    def refresh(layer: int) -> None:
        denom = sum_w[layer] - theta
        with np.errstate(divide="ignore", invalid="ignore"):
            zc = sum_wz[layer] / denom
        ok = (denom > 0.0) & (zc >= z_last[layer]) & ~np.isfinite(fired_z[layer]) \
            & np.isfinite(zc)
        if ok.any():
            cand = np.where(ok, zc, NEVER)
            j = int(np.argmin(cand))
            pending[layer] = (float(cand[j]), j)
        else:
            pending[layer] = None

    n_src = src_times.shape[0]
    cursor = 0                      # next raw input arrival
    halt_z = NEVER
    halt_t = NEVER
    predicted: int | None = None

    while True:
        # Candidate events: (z, layer-of-emission, index).  Raw inputs are
        # emissions of layer 0; a confirmed firing of weight-layer l is an
        # emission of layer l+1 in this keying.
        best = None
        if cursor < n_src:
            best = (src_z[cursor], 0, int(src_index[cursor]))
        for l in range(n_layers):
            if pending[l] is not None:
                zc, j = pending[l]
                key = (zc, l + 1, j)
                if best is None or key < best:
                    best = key
        if best is None:
            break
        z_ev, emit_layer, idx = best

        if emit_layer == 0:
            # deliver raw input idx to the first weight layer
            w_col = model.weights[0][:, idx]
            sum_w[0] += w_col
            sum_wz[0] += w_col * z_ev
            z_last[0] = z_ev
            cursor += 1
            refresh(0)
            continue

        layer = emit_layer - 1
        fired[layer][idx] = math.log(z_ev)
        fired_z[layer][idx] = z_ev
        if layer == n_layers - 1:
            halt_z = z_ev
            halt_t = float(fired[layer][idx])
            predicted = idx
            break
        # propagate to next layer
        w_col = model.weights[layer + 1][:, idx]
        sum_w[layer + 1] += w_col
        sum_wz[layer + 1] += w_col * z_ev
        z_last[layer + 1] = z_ev
        refresh(layer)
        refresh(layer + 1)

    if predicted is None:
        consumed = int(finite_in.sum())
        delay = None
    else:
        consumed = int((src_times < halt_t).sum())
        t_first = float(src_times[0]) if n_src else NEVER
        delay = (halt_t - t_first) * model.kernel.tau_syn
    return EventTrace(
        predicted_class=predicted,
        first_output_time=halt_t,
        recognition_delay_us=delay,
        input_spikes_consumed=consumed,
        layer_times=tuple(fired),
    )


def _worker_count() -> int:
    raw = os.environ.get("PULSENET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def evaluate(times: np.ndarray, labels: np.ndarray, model: Model,
             workers: int | None = None) -> EvalMetrics:
    """Event-driven evaluation of a whole split.

    times is (P, n_inputs) normalized spike times.  Work is split across a
    small thread pool (PULSENET_THREADS, default 1) in fixed order, so the
    metrics are identical whatever the worker count.
    """
    times = np.asarray(times, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if times.ndim != 2 or times.shape[1] != model.n_inputs:
        raise DatasetMismatch(f"times shape {times.shape} vs input width {model.n_inputs}")
    if labels.shape[0] != times.shape[0]:
        raise DatasetMismatch("labels and times disagree on pattern count")
    n = times.shape[0]
    n_out = model.n_outputs

    if workers is None:
        workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(lambda row: run_event_inference(row, model), times))
    else:
        traces = [run_event_inference(row, model) for row in times]

    delays = np.full(n, np.nan)
    consumed = np.zeros(n, dtype=np.int64)
    preds = np.full(n, -1, dtype=np.int64)
    for i, tr in enumerate(traces):
        consumed[i] = tr.input_spikes_consumed
        if tr.predicted_class is not None:
            preds[i] = tr.predicted_class
            delays[i] = tr.recognition_delay_us

    correct = (preds == labels).sum()
    have = np.isfinite(delays)
    band = np.zeros(4, dtype=np.int64)
    d = delays[have]
    band[0] = (d < DELAY_BAND_EDGES[0]).sum()
    band[1] = ((d >= DELAY_BAND_EDGES[0]) & (d <= DELAY_BAND_EDGES[1])).sum()
    band[2] = ((d > DELAY_BAND_EDGES[1]) & (d <= 1.0)).sum()
    band[3] = (d > 1.0).sum()
    # delays past 1 us sit only in the overflow band, not the fine bins
    fine, _ = np.histogram(d[d <= 1.0], bins=FINE_HIST_BINS, range=(0.0, 1.0))

    confusion = np.zeros((n_out, n_out + 1), dtype=np.int64)
    for lab, pr in zip(labels, preds):
        confusion[lab, pr if pr >= 0 else n_out] += 1

    return EvalMetrics(
        accuracy=float(correct / n),
        n_patterns=n,
        n_no_prediction=int((preds < 0).sum()),
        mean_delay_us=float(d.mean()) if d.size else float("nan"),
        band_counts=band,
        fine_hist=fine.astype(np.int64),
        spikes_min=int(consumed.min()) if n else 0,
        spikes_max=int(consumed.max()) if n else 0,
        confusion=confusion,
        delays_us=delays,
        consumed=consumed,
        predictions=preds,
    )


def agreement_check(times: np.ndarray, model: Model, tol: float = 1e-9) -> int:
    """Count patterns where the two inference paths disagree.

    A pattern counts as a mismatch when the predicted classes differ or the
    first output spike times differ by more than tol (normalized units).
    Contract: 0.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 2 or times.shape[1] != model.n_inputs:
        raise DatasetMismatch(f"times shape {times.shape} vs input width {model.n_inputs}")
    out_t, _ = forward_network_batch(times, model)
    mismatches = 0
    for row, out_row in zip(times, out_t):
        trace = run_event_inference(row, model)
        finite = np.isfinite(out_row)
        if not finite.any():
            analytic_pred = None
            analytic_t = NEVER
        else:
            analytic_pred = int(np.argmin(out_row))
            analytic_t = float(out_row[analytic_pred])
        if trace.predicted_class != analytic_pred:
            mismatches += 1
            continue
        if analytic_pred is not None:
            if not math.isclose(trace.first_output_time, analytic_t,
                                rel_tol=0.0, abs_tol=tol):
                mismatches += 1
    return mismatches


# --- CSV emission -----------------------------------------------------------


def write_metrics_csv(metrics: EvalMetrics, path) -> None:
    rows = [
        ("accuracy", f"{metrics.accuracy:.17g}"),
        ("patterns", metrics.n_patterns),
        ("no_prediction", metrics.n_no_prediction),
        ("mean_delay_us", f"{metrics.mean_delay_us:.17g}"),
        ("delay_below_band", metrics.band_counts[0]),
        ("delay_in_band", metrics.band_counts[1]),
        ("delay_above_band", metrics.band_counts[2]),
        ("delay_overflow", metrics.band_counts[3]),
        ("spikes_min", metrics.spikes_min),
        ("spikes_max", metrics.spikes_max),
    ]
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(("metric", "value"))
        w.writerows(rows)


def write_histogram_csv(metrics: EvalMetrics, path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(("bin_low", "bin_high", "count"))
        lo, hi = DELAY_BAND_EDGES
        w.writerow((0.0, lo, metrics.band_counts[0]))
        w.writerow((lo, hi, metrics.band_counts[1]))
        w.writerow((hi, 1.0, metrics.band_counts[2]))
        w.writerow((1.0, "inf", metrics.band_counts[3]))
        width = 1.0 / FINE_HIST_BINS
        for i, c in enumerate(metrics.fine_hist):
            w.writerow((round(i * width, 10), round((i + 1) * width, 10), c))


def write_confusion_csv(metrics: EvalMetrics, path) -> None:
    n = metrics.confusion.shape[0]
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"pred_{j}" for j in range(n)] + ["none"])
        for lab in range(n):
            w.writerow([lab] + metrics.confusion[lab].tolist())


def write_traces_csv(metrics: EvalMetrics, labels, path) -> None:
    labels = np.asarray(labels)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(("pattern", "label", "predicted", "recognition_delay_us",
                    "input_spikes_consumed"))
        for i in range(metrics.n_patterns):
            pred = int(metrics.predictions[i])
            delay = metrics.delays_us[i]
            w.writerow((i, int(labels[i]), pred,
                        "" if math.isnan(delay) else f"{delay:.17g}",
                        int(metrics.consumed[i])))
