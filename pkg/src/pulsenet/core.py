"""Exact spike-time math for non-leaky integrate-and-fire neurons.

A neuron here integrates exponentially decaying synaptic current and fires
once, the first time its membrane reaches threshold.  Because the membrane
is a sum of shifted exponentials, the first crossing is algebraic in
z = exp(t) coordinates; ``causal_spike_time`` solves it exactly.
``integrate_membrane`` is the deliberately plain numerical cross-check of
the same dynamics and never touches the closed form.

All solvers work in normalized time (kernel time constant = 1).  Physical
microseconds enter only at the encode/decode boundary, scaled by
``KernelConfig.tau_syn``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Absent spikes are "never", which must sort after every finite time.
NEVER = math.inf

# Latest encodable pulse delay, microseconds.
T_MAX_US = 1.0


class InvalidStep(ValueError):
    """Integration step width is non-positive or too coarse."""


class ShapeMismatch(ValueError):
    """Spike vector and weight vector/matrix disagree on size."""


class InvalidDims(ValueError):
    """Layer size chain is empty, too short, or not positive."""


@dataclass(frozen=True)
class KernelConfig:
    """Synaptic kernel parameters.

    tau_syn is the physical time constant in microseconds; it only matters
    when converting to or from wall-clock quantities.  threshold is the
    membrane level that triggers a spike, in the same units the weights
    integrate to.
    """

    tau_syn: float = 1.0
    threshold: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tau_syn) and self.tau_syn > 0.0):
            raise ValueError(f"tau_syn must be finite and positive, got {self.tau_syn!r}")
        if not (math.isfinite(self.threshold) and self.threshold > 0.0):
            raise ValueError(f"threshold must be finite and positive, got {self.threshold!r}")


DEFAULT_KERNEL = KernelConfig()


def kernel_response(x, cfg: KernelConfig = DEFAULT_KERNEL):
    """Causal exponential kernel: exp(-x / tau_syn) for x >= 0, exactly 0 before.

    Accepts scalars or arrays; x is in the same units as cfg.tau_syn.
    """
    arr = np.asarray(x, dtype=np.float64)
    # max() keeps exp() away from the x < 0 branch so 0 * inf cannot appear.
    out = np.where(arr >= 0.0, np.exp(-np.maximum(arr, 0.0) / cfg.tau_syn), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _clean_spike_inputs(spike_times, weights):
    t = np.asarray(spike_times, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if t.ndim != 1 or w.shape != t.shape:
        raise ShapeMismatch(f"times shape {t.shape} vs weights shape {w.shape}")
    if np.isnan(t).any() or np.isnan(w).any():
        raise ValueError("NaN in spike times or weights")
    if (t < 0.0).any():
        raise ValueError("spike times must be non-negative (or NEVER)")
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    return t, w


def integrate_membrane(spike_times, weights, cfg: KernelConfig = DEFAULT_KERNEL,
                       dt: float = 1e-4, horizon: float = 50.0) -> float:
    """Brute-force first-crossing time of the membrane, by numeric integration.

    Marches V' = sum_i w_i * kernel(t - t_i) forward from t = 0 with the
    trapezoid rule.  The grid is split at every arrival so the drive stays
    smooth inside each piece; the returned time gets one linear-interpolation
    refinement inside the crossing step.  Returns NEVER when threshold is not
    reached before the horizon (in kernel time constants).

    Times are normalized (kernel time constant = 1); NEVER entries are
    allowed and contribute nothing.  This is the reference oracle for
    causal_spike_time and shares no algebra with it.
    """
    if not dt > 0.0:
        raise InvalidStep(f"dt must be positive, got {dt!r}")
    if dt > 1e-3:
        raise InvalidStep(f"dt above 1e-3 is too coarse for the oracle, got {dt!r}")
    t, w = _clean_spike_inputs(spike_times, weights)
    finite = np.isfinite(t)
    t, w = t[finite], w[finite]
    keep = t < horizon
    t, w = t[keep], w[keep]
    if t.size == 0:
        return NEVER

    theta = cfg.threshold
    # Piece boundaries: t=0, every arrival, then the tail chunked so the
    # no-crossing bound below can abort early instead of gridding 50 units.
    cuts = [0.0] + sorted(set(t.tolist()))
    last = cuts[-1]
    while last < horizon:
        last = min(last + 2.0, horizon)
        cuts.append(last)

    t_last = float(t.max())
    v = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        active = t <= a
        if a >= t_last:
            # Every spike has arrived; positive drive can add at most this
            # much ever again.  If that cannot reach threshold the neuron is
            # silent from here on.
            wpos = np.maximum(w, 0.0)
            bound = float(np.sum(wpos * np.exp(-(a - t))))
            if v + bound < theta:
                return NEVER
        n = max(1, int(math.ceil((b - a) / dt)))
        grid = np.linspace(a, b, n + 1)
        if active.any():
            drive = (w[active][None, :]
                     * np.exp(-(grid[:, None] - t[active][None, :]))).sum(axis=1)
        else:
            drive = np.zeros(n + 1)
        steps = np.diff(grid)
        vgrid = v + np.concatenate(([0.0], np.cumsum(0.5 * (drive[1:] + drive[:-1]) * steps)))
        crossed = np.nonzero(vgrid >= theta)[0]
        if crossed.size:
            k = int(crossed[0])
            # k >= 1 because v < theta held when the piece started
            frac = (theta - vgrid[k - 1]) / (vgrid[k] - vgrid[k - 1])
            return float(grid[k - 1] + frac * (grid[k] - grid[k - 1]))
        v = float(vgrid[-1])
    return NEVER


def causal_spike_time(spike_times, weights, cfg: KernelConfig = DEFAULT_KERNEL):
    """First firing time of one neuron, solved exactly in z = exp(t).

    Scans arrival-ordered prefixes and accepts the first self-consistent
    crossing: prefix weight sum above threshold, crossing no earlier than the
    last spike inside the prefix, and no later than the next spike outside
    it.  Returns (t_out, causal_indices); t_out is NEVER and the index array
    empty when the neuron stays silent.

    The boundary comparisons make ties behave physically: a crossing landing
    exactly on the next arrival is accepted, because the incoming kernel has
    zero integrated area at that instant.  The returned index set therefore
    always equals {i : t_i < t_out} up to such zero-measure ties, and every
    excluded finite spike has t_i >= t_out.
    """
    t, w = _clean_spike_inputs(spike_times, weights)
    order = np.argsort(t, kind="stable")
    ts = t[order]
    n_fin = int(np.searchsorted(ts, np.inf))
    if n_fin == 0:
        return NEVER, np.empty(0, dtype=np.int64)
    ts = ts[:n_fin]
    ws = w[order[:n_fin]]
    zs = np.exp(ts)
    cw = np.cumsum(ws)
    cwz = np.cumsum(ws * zs)
    denom = cw - cfg.threshold
    with np.errstate(divide="ignore", invalid="ignore"):
        zc = cwz / denom
    znext = np.append(zs[1:], np.inf)
    ok = (denom > 0.0) & (zc >= zs) & (zc <= znext)
    if not ok.any():
        return NEVER, np.empty(0, dtype=np.int64)
    k = int(np.argmax(ok))
    return float(np.log(zc[k])), order[: k + 1].astype(np.int64, copy=False)


def layer_forward(in_times, weight_matrix, cfg: KernelConfig = DEFAULT_KERNEL) -> np.ndarray:
    """Fire one fully connected layer against a shared input spike vector.

    in_times has shape (n_src,), weight_matrix (n_dst, n_src); returns the
    (n_dst,) vector of output spike times, NEVER where a neuron is silent.
    Row j reproduces causal_spike_time(in_times, weight_matrix[j]) exactly;
    the prefix scan is just vectorized across destinations.
    """
    t = np.asarray(in_times, dtype=np.float64)
    wm = np.asarray(weight_matrix, dtype=np.float64)
    if t.ndim != 1 or wm.ndim != 2 or wm.shape[1] != t.shape[0]:
        raise ShapeMismatch(f"in_times {t.shape} vs weight_matrix {wm.shape}")
    if np.isnan(t).any():
        raise ValueError("NaN in spike times")
    if (t < 0.0).any():
        raise ValueError("spike times must be non-negative (or NEVER)")
    if not np.isfinite(wm).all():
        raise ValueError("weights must be finite")

    n_dst = wm.shape[0]
    order = np.argsort(t, kind="stable")
    ts = t[order]
    n_fin = int(np.searchsorted(ts, np.inf))
    if n_fin == 0:
        return np.full(n_dst, NEVER)
    ts = ts[:n_fin]
    zs = np.exp(ts)
    ws = wm[:, order[:n_fin]]
    cw = np.cumsum(ws, axis=1)
    cwz = np.cumsum(ws * zs[None, :], axis=1)
    denom = cw - cfg.threshold
    with np.errstate(divide="ignore", invalid="ignore"):
        zc = cwz / denom
    znext = np.append(zs[1:], np.inf)
    ok = (denom > 0.0) & (zc >= zs[None, :]) & (zc <= znext[None, :])
    fires = ok.any(axis=1)
    first = np.argmax(ok, axis=1)
    out = np.full(n_dst, NEVER)
    rows = np.nonzero(fires)[0]
    out[rows] = np.log(zc[rows, first[rows]])
    return out


@dataclass(frozen=True)
class Model:
    """Feedforward stack of fully connected spiking layers.

    weights[l] has shape (layer_dims[l+1], layer_dims[l]).  Treated as
    immutable: updates produce a new Model.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    kernel: KernelConfig = DEFAULT_KERNEL

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise InvalidDims(f"need >= 2 positive layer sizes, got {self.layer_dims!r}")
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        if len(ws) != len(dims) - 1:
            raise InvalidDims(f"{len(dims)} dims need {len(dims) - 1} matrices, got {len(ws)}")
        for l, w in enumerate(ws):
            want = (dims[l + 1], dims[l])
            if w.shape != want:
                raise ShapeMismatch(f"layer {l}: weight shape {w.shape}, expected {want}")
            if not np.isfinite(w).all():
                raise ValueError(f"layer {l}: non-finite weights")
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", ws)

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_dims[-1]


def network_forward(in_times, model: Model):
    """Run the whole stack; returns (output spike times, predicted class).

    Prediction is the earliest-firing output index, ties to the lowest
    index; None when every output stays silent.
    """
    t = np.asarray(in_times, dtype=np.float64)
    if t.shape != (model.n_inputs,):
        raise ShapeMismatch(f"expected {model.n_inputs} input times, got shape {t.shape}")
    for wm in model.weights:
        t = layer_forward(t, wm, model.kernel)
    if np.isfinite(t).any():
        return t, int(np.argmin(t))
    return t, None
