"""Gradient training for the spiking classifier.

The objective is softmax cross-entropy over negated output spike times, so
earlier target spikes mean lower loss and the whole thing is invariant to a
common shift of all outputs.  The logits are divided by a temperature
before the softmax: firing-time margins are a fraction of a time unit, so
at temperature 1 the probabilities never saturate and gradient goes into
widening margins that are already correct.  A sharp temperature turns the
loss into a near-hinge on the argmin decision, which is what accuracy
actually measures.  Silent outputs are substituted with the latest finite
time in the layer plus a fixed gap before the softmax; they get no data
gradient (there is no causal path), and a weight-sum penalty keeps rows
able to fire at all.  Plain SGD with L2 decay, as small as it sounds.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .batch import backward_layer_batch, forward_network_batch, predict_batch
from .core import NEVER, InvalidDims, KernelConfig, Model, ShapeMismatch

# Gap added past the latest finite output time when substituting for silent
# outputs in the loss.  exp(-5/temp) keeps their softmax mass negligible at
# any temperature the config accepts.
CLAMP_GAP = 5.0

# Per-element gradient clip used by the training loop.  The closed-form
# gradients carry a 1/(sum_C w - theta) factor that is unbounded when a
# neuron barely reaches threshold; one grazing sample can inflate a row sum
# by tens in a single step and that neuron then wins every argmin.  backward
# itself stays exact (finite differences check it); only train() clips.
GRAD_CLIP = 0.1


class DegenerateOutput(ValueError):
    """Every output neuron stayed silent; the loss is undefined."""


def derive_seed(root: int, *labels) -> int:
    """Stable child seed from a root seed and a purpose path.

    Hash-based so streams for different purposes never collide or overlap;
    every random draw in the pipeline fans out of one root this way.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(int(root)).encode())
    for lab in labels:
        h.update(b"/")
        h.update(repr(lab).encode())
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True)
class TrainConfig:
    layer_dims: tuple[int, ...] = (256, 400, 30)
    learning_rate: float = 0.01
    batch_size: int = 60
    max_epochs: int = 100
    l2_lambda: float = 1e-4
    # Coefficient on the squared row-sum hinge.  Must stay below
    # 1/(2*lr*fan_in) or one SGD step overshoots the barrier and row sums
    # explode; 0.1 closes 80% of a violation per step at the default sizes.
    weight_sum_penalty: float = 0.1
    firing_margin: float = 4.0          # rows must sum past theta*(1+margin)
    init_scale: float = 1.0
    init_row_sum: float = 5.5           # initial row sum, in threshold units
    # Softmax temperature over firing-time logits.  Trained margins are a
    # fraction of a time unit, so anything near 1 leaves the loss in its
    # never-saturating regime and accuracy stalls well below the ceiling.
    loss_temp: float = 0.05
    # Ceiling for row sums, enforced in train() by projecting out the
    # uniform component of any gradient that would push a saturated row
    # higher.  Rows that grow without bound fire unconditionally early and
    # take over the argmin.
    row_sum_cap: float = 6.5
    lr_decay_epoch: int = 40            # set >= max_epochs to disable
    lr_decay_factor: float = 0.2
    # Quadratic pull of the labeled output's firing time toward
    # first-input-plus-target.  Classification alone leaves the decision
    # time spread over twice the reporting band; the pull centers and
    # tightens it without costing accuracy.
    latency_pull: float = 0.1
    latency_target_us: float = 0.265
    tau_syn_us: float = 0.18            # physical time constant, microseconds
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if len(self.layer_dims) < 2 or any(d <= 0 for d in self.layer_dims):
            raise InvalidDims(f"bad layer_dims {self.layer_dims!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.l2_lambda < 0 or self.weight_sum_penalty < 0 or self.firing_margin < 0:
            raise ValueError("l2_lambda, weight_sum_penalty, firing_margin must be >= 0")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be positive")
        if self.init_row_sum <= 1.0 + self.firing_margin:
            raise ValueError("init_row_sum must clear the firing margin")
        if self.loss_temp <= 0:
            raise ValueError("loss_temp must be positive")
        if self.row_sum_cap < self.init_row_sum:
            raise ValueError("row_sum_cap must be at least init_row_sum")
        if self.lr_decay_epoch < 1:
            raise ValueError("lr_decay_epoch must be >= 1")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must be in (0, 1]")
        if self.latency_pull < 0 or self.latency_target_us < 0:
            raise ValueError("latency_pull and latency_target_us must be >= 0")
        if self.tau_syn_us <= 0:
            raise ValueError("tau_syn_us must be positive")


@dataclass
class TrainReport:
    """Accuracy curve plus both interesting checkpoints.

    best_model is the highest-test-accuracy epoch (earliest on ties),
    final_model the last epoch; both are reported because converged runs
    make the distinction small but not zero.
    """

    test_accuracies: list[float]
    train_losses: list[float]
    final_model: Model
    best_model: Model
    best_epoch: int
    best_accuracy: float
    final_accuracy: float
    final_train_loss: float


def init_weights(layer_dims, seed: int, scale: float = 1.0, margin: float = 0.25,
                 row_sum: float = 4.0,
                 kernel: KernelConfig = KernelConfig()) -> Model:
    """Fan-in scaled zero-mean init, rows lifted until they can fire.

    Weights are drawn N(0, scale/sqrt(n_src)) i.i.d., then every row is
    shifted uniformly so its sum lands at row_sum*theta, well past the
    theta*(1+margin) firing floor.  Starting rows high matters: sums near
    the floor force tiny causal denominators, which blow up the early
    gradients and shove rows into the penalty barrier.  Deterministic for
    a given seed.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InvalidDims(f"bad layer_dims {layer_dims!r}")
    rng = np.random.default_rng(seed)
    theta = kernel.threshold
    target = row_sum * theta
    if target <= theta * (1.0 + margin):
        raise ValueError("row_sum must clear the firing margin")
    weights = []
    for n_src, n_dst in zip(dims[:-1], dims[1:]):
        wm = rng.normal(0.0, scale / math.sqrt(n_src), (n_dst, n_src))
        wm += ((target - wm.sum(axis=1)) / n_src)[:, None]
        weights.append(wm)
    return Model(layer_dims=dims, weights=tuple(weights), kernel=kernel)


def _substitute_silent(out_times: np.ndarray) -> np.ndarray:
    """Replace NEVER entries with (latest finite time in the row + gap)."""
    finite = np.isfinite(out_times)
    if not finite.any():
        raise DegenerateOutput("all output neurons silent")
    t_max = np.max(np.where(finite, out_times, -np.inf))
    return np.where(finite, out_times, t_max + CLAMP_GAP)


def loss(out_times, label: int, temp: float = 1.0) -> float:
    """Softmax cross-entropy over negated spike times for one pattern."""
    t = np.asarray(out_times, dtype=np.float64)
    if t.ndim != 1:
        raise ShapeMismatch(f"expected 1-d output times, got shape {t.shape}")
    if not 0 <= int(label) < t.shape[0]:
        raise ValueError(f"label {label} out of range for {t.shape[0]} outputs")
    if temp <= 0:
        raise ValueError("temp must be positive")
    t = _substitute_silent(t)
    u = -t / temp
    u = u - u.max()
    return float(np.log(np.exp(u).sum()) - u[int(label)])


def weight_sum_penalty(model: Model, coeff: float, margin: float) -> float:
    """Hinge on row sums: coeff * sum_rows max(0, theta*(1+margin) - sum)^2."""
    target = model.kernel.threshold * (1.0 + margin)
    total = 0.0
    for wm in model.weights:
        gap = np.maximum(0.0, target - wm.sum(axis=1))
        total += float(np.sum(gap * gap))
    return coeff * total


def backward(times: np.ndarray, labels: np.ndarray, model: Model,
             penalty_coeff: float = 0.1, margin: float = 0.25,
             temp: float = 1.0, lat_pull: float = 0.0,
             lat_target: float = 0.0):
    """Mean loss and its weight gradients over a batch of patterns.

    times is (B, n_inputs) normalized spike times, labels (B,).  Returns
    (grads per layer, scalar loss) where loss = mean data loss + weight-sum
    penalty + optional latency pull lat_pull * mean((t_label - t_first -
    lat_target)^2), all times normalized.  L2 decay is NOT included here;
    sgd_step applies it.  Samples whose outputs all stay silent contribute
    zero data gradient (the penalty is what pulls the network out of that
    regime).
    """
    times = np.asarray(times, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_batch = times.shape[0]
    if labels.shape != (n_batch,):
        raise ShapeMismatch(f"labels shape {labels.shape} vs batch {n_batch}")
    if temp <= 0:
        raise ValueError("temp must be positive")
    out_t, records = forward_network_batch(times, model)

    finite = np.isfinite(out_t)
    live = finite.any(axis=1)
    row_max = np.max(np.where(finite, out_t, -np.inf), axis=1)
    t_hat = np.where(finite, out_t, row_max[:, None] + CLAMP_GAP)
    t_hat[~live] = 0.0  # keeps the softmax NaN-free; rows are masked below

    u = -t_hat / temp
    u = u - u.max(axis=1, keepdims=True)
    e = np.exp(u)
    p = e / e.sum(axis=1, keepdims=True)
    idx = np.arange(n_batch)
    with np.errstate(divide="ignore"):
        losses = -np.log(p[idx, labels])
    losses[~live] = 0.0
    data_loss = float(losses.sum() / n_batch)

    # dL/dt = (onehot - p)/temp; only firing outputs have a causal path,
    # and dt/dz = 1/z with z = exp(t_out) as recorded by the forward pass.
    dt = -p
    dt[idx, labels] += 1.0
    dt /= temp
    if lat_pull > 0.0:
        # per-pattern first input arrival; the clamp substitute for a
        # silent label output is treated as a constant, same as the data
        # term, and the finite mask below zeroes its path anyway
        t_first = np.min(np.where(np.isfinite(times), times, np.inf), axis=1)
        gap = t_hat[idx, labels] - t_first - lat_target
        gap[~live] = 0.0
        dt[idx, labels] += 2.0 * lat_pull * gap
        data_loss += float(lat_pull * np.sum(gap * gap) / n_batch)
    dt[~live] = 0.0
    z_rec = records[-1].z_out
    dz = np.where(finite, dt / np.where(finite, z_rec, 1.0), 0.0) / n_batch

    grads = [None] * len(model.weights)
    for layer in range(len(model.weights) - 1, -1, -1):
        dw, dz = backward_layer_batch(dz, records[layer], model.weights[layer])
        grads[layer] = dw

    # Row-sum hinge, a function of the weights alone.
    target = model.kernel.threshold * (1.0 + margin)
    pen = 0.0
    for layer, wm in enumerate(model.weights):
        gap = np.maximum(0.0, target - wm.sum(axis=1))
        pen += float(np.sum(gap * gap))
        grads[layer] -= (2.0 * penalty_coeff * gap)[:, None]
    return grads, data_loss + penalty_coeff * pen


def sgd_step(model: Model, grads, learning_rate: float, l2_lambda: float = 0.0) -> Model:
    """w <- w - lr * (grad + lambda * w); returns a new Model."""
    if len(grads) != len(model.weights):
        raise ShapeMismatch(f"{len(grads)} gradient blocks for {len(model.weights)} layers")
    new_weights = []
    for wm, g in zip(model.weights, grads):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != wm.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} vs weights {wm.shape}")
        new_weights.append(wm - learning_rate * (g + l2_lambda * wm))
    return Model(layer_dims=model.layer_dims, weights=tuple(new_weights), kernel=model.kernel)


def accuracy(times: np.ndarray, labels: np.ndarray, model: Model) -> float:
    """Fraction of patterns whose earliest output matches the label."""
    pred = predict_batch(np.asarray(times, dtype=np.float64), model)
    return float(np.mean(pred == np.asarray(labels)))


def train(train_set, test_set, cfg: TrainConfig) -> TrainReport:
    """Full training loop; bit-reproducible for a given (cfg, data).

    train_set and test_set are (times, labels) pairs with times already
    encoded to normalized spike units, shape (P, n_inputs).
    """
    tr_times, tr_labels = (np.asarray(a) for a in train_set)
    te_times, te_labels = (np.asarray(a) for a in test_set)
    if tr_times.ndim != 2 or tr_times.shape[1] != cfg.layer_dims[0]:
        raise ShapeMismatch(f"train times {tr_times.shape} vs input dim {cfg.layer_dims[0]}")
    n_train = tr_times.shape[0]

    model = init_weights(cfg.layer_dims, derive_seed(cfg.rng_seed, "init"),
                         scale=cfg.init_scale, margin=cfg.firing_margin,
                         row_sum=cfg.init_row_sum,
                         kernel=KernelConfig(tau_syn=cfg.tau_syn_us))
    shuffle_rng = np.random.default_rng(derive_seed(cfg.rng_seed, "shuffle"))
    # the pull target is configured in microseconds; gradients run in
    # normalized kernel units
    lat_target = cfg.latency_target_us / cfg.tau_syn_us

    accuracies: list[float] = []
    epoch_losses: list[float] = []
    best_acc = -1.0
    best_epoch = -1
    best_model = model
    for epoch in range(cfg.max_epochs):
        lr = cfg.learning_rate
        if epoch >= cfg.lr_decay_epoch:
            lr *= cfg.lr_decay_factor
        perm = shuffle_rng.permutation(n_train)
        batch_losses = []
        for start in range(0, n_train, cfg.batch_size):
            take = perm[start:start + cfg.batch_size]
            grads, batch_loss = backward(tr_times[take], tr_labels[take], model,
                                         penalty_coeff=cfg.weight_sum_penalty,
                                         margin=cfg.firing_margin,
                                         temp=cfg.loss_temp,
                                         lat_pull=cfg.latency_pull,
                                         lat_target=lat_target)
            grads = [np.clip(g, -GRAD_CLIP, GRAD_CLIP) for g in grads]
            # Hold saturated rows at the cap: sgd_step subtracts the
            # gradient, so a negative row total would grow the sum.  Only
            # the uniform component is removed; the shape of the update
            # survives, so the row keeps learning who to listen to.
            for g, wm in zip(grads, model.weights):
                row_sum = wm.sum(axis=1)
                grad_total = g.sum(axis=1)
                hot = (row_sum >= cfg.row_sum_cap) & (grad_total < 0.0)
                if hot.any():
                    g[hot] -= (grad_total[hot] / g.shape[1])[:, None]
            model = sgd_step(model, grads, lr, cfg.l2_lambda)
            batch_losses.append(batch_loss)
        epoch_losses.append(float(np.mean(batch_losses)))
        acc = accuracy(te_times, te_labels, model)
        accuracies.append(acc)
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_model = model
    return TrainReport(
        test_accuracies=accuracies,
        train_losses=epoch_losses,
        final_model=model,
        best_model=best_model,
        best_epoch=best_epoch,
        best_accuracy=best_acc,
        final_accuracy=accuracies[-1],
        final_train_loss=epoch_losses[-1],
    )


# --- checkpoint and curve files -------------------------------------------

MODEL_FORMAT = "pulsenet-model v1"


def save_model(model: Model, path) -> None:
    """Plain-text checkpoint: header then row-major weights, one row a line."""
    lines = [MODEL_FORMAT,
             "dims " + " ".join(str(d) for d in model.layer_dims),
             f"threshold {model.kernel.threshold:.17g}",
             f"tau_syn {model.kernel.tau_syn:.17g}"]
    for wm in model.weights:
        for row in wm:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> Model:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} checkpoint")
    dims = tuple(int(v) for v in lines[1].split()[1:])
    theta = float(lines[2].split()[1])
    tau = float(lines[3].split()[1])
    pos = 4
    weights = []
    for n_src, n_dst in zip(dims[:-1], dims[1:]):
        rows = [np.array(lines[pos + r].split(), dtype=np.float64)
                for r in range(n_dst)]
        pos += n_dst
        weights.append(np.vstack(rows))
        if weights[-1].shape != (n_dst, n_src):
            raise ValueError(f"{path}: weight block shape {weights[-1].shape}")
    return Model(layer_dims=dims, weights=tuple(weights),
                 kernel=KernelConfig(tau_syn=tau, threshold=theta))


def write_accuracy_csv(path, accuracies) -> None:
    """Per-epoch test accuracy curve: epoch,accuracy with a header row."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("epoch,accuracy\n")
        for epoch, acc in enumerate(accuracies, start=1):
            fh.write(f"{epoch},{acc:.17g}\n")
