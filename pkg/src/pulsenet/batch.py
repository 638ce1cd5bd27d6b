"""Batched forward/backward kernels for training and bulk evaluation.

Same math as pulsenet.core, transcribed into explicit loops and compiled
with numba so the full training bench fits a single-CPU time budget.  The
accumulation order inside each kernel matches the cumsum order of
core.layer_forward exactly, so the two routes agree to the last bit; tests
hold them together.

Gradients follow the z-domain chain rule with causal sets treated as
locally constant:

    z_out = sum_C(w_i z_i) / (sum_C(w_i) - theta)
    dz_out/dw_i = (z_i - z_out) / (sum_C(w_i) - theta)   for i in C, else 0
    dz_out/dz_i =  w_i          / (sum_C(w_i) - theta)   for i in C, else 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Model, ShapeMismatch


@njit(cache=True)
def _fwd_kernel(zs, n_fin, order, wm, theta, t_out, k_len, denom_out, z_out):
    n_batch, _ = zs.shape
    n_dst = wm.shape[0]
    for b in range(n_batch):
        nf = n_fin[b]
        for j in range(n_dst):
            cw = 0.0
            cwz = 0.0
            hit = False
            for k in range(nf):
                w = wm[j, order[b, k]]
                cw += w
                cwz += w * zs[b, k]
                d = cw - theta
                if d > 0.0:
                    zc = cwz / d
                    if zc >= zs[b, k] and (k == nf - 1 or zc <= zs[b, k + 1]):
                        t_out[b, j] = np.log(zc)
                        k_len[b, j] = k + 1
                        denom_out[b, j] = d
                        z_out[b, j] = zc
                        hit = True
                        break
            if not hit:
                t_out[b, j] = np.inf
                k_len[b, j] = 0
                denom_out[b, j] = 0.0
                z_out[b, j] = np.inf


@njit(cache=True)
def _bwd_kernel(dz_out, zs, order, wm, k_len, denom, z_out, dw, dz_in):
    n_batch, n_dst = dz_out.shape
    for b in range(n_batch):
        for j in range(n_dst):
            g = dz_out[b, j]
            kl = k_len[b, j]
            if kl == 0 or g == 0.0:
                continue
            d = denom[b, j]
            zo = z_out[b, j]
            for k in range(kl):
                i = order[b, k]
                dw[j, i] += g * (zs[b, k] - zo) / d
                dz_in[b, i] += g * wm[j, i] / d


@dataclass
class LayerRecord:
    """Everything the backward pass needs about one layer's forward run."""

    order: np.ndarray   # (B, n_src) int64, per-sample arrival order
    zs: np.ndarray      # (B, n_src) exp of sorted times, zero past n_fin
    n_fin: np.ndarray   # (B,) finite spike count per sample
    k_len: np.ndarray   # (B, n_dst) causal prefix length, 0 = silent
    denom: np.ndarray   # (B, n_dst) causal weight sum minus threshold
    z_out: np.ndarray   # (B, n_dst) firing z, inf where silent


def forward_layer_batch(times: np.ndarray, wm: np.ndarray, theta: float):
    """Fire one layer for a whole batch; returns (out_times, LayerRecord)."""
    times = np.ascontiguousarray(times, dtype=np.float64)
    wm = np.ascontiguousarray(wm, dtype=np.float64)
    if times.ndim != 2 or wm.ndim != 2 or times.shape[1] != wm.shape[1]:
        raise ShapeMismatch(f"times {times.shape} vs weights {wm.shape}")
    n_batch = times.shape[0]
    n_dst = wm.shape[0]

    order = np.argsort(times, axis=1, kind="stable")
    ts = np.take_along_axis(times, order, axis=1)
    finite = np.isfinite(ts)
    n_fin = finite.sum(axis=1).astype(np.int64)
    zs = np.where(finite, np.exp(np.where(finite, ts, 0.0)), 0.0)

    t_out = np.empty((n_batch, n_dst))
    k_len = np.empty((n_batch, n_dst), dtype=np.int64)
    denom = np.empty((n_batch, n_dst))
    z_out = np.empty((n_batch, n_dst))
    _fwd_kernel(zs, n_fin, order, wm, float(theta), t_out, k_len, denom, z_out)
    return t_out, LayerRecord(order, zs, n_fin, k_len, denom, z_out)


def backward_layer_batch(dz_out: np.ndarray, rec: LayerRecord, wm: np.ndarray):
    """Push z-gradients through one layer.

    Returns (dW summed over the batch, dz w.r.t. the layer inputs per
    sample, original index space).  Silent destinations and non-causal
    connections contribute exactly zero.
    """
    wm = np.ascontiguousarray(wm, dtype=np.float64)
    dz_out = np.ascontiguousarray(dz_out, dtype=np.float64)
    dw = np.zeros_like(wm)
    dz_in = np.zeros(rec.zs.shape)
    _bwd_kernel(dz_out, rec.zs, rec.order, wm, rec.k_len, rec.denom, rec.z_out, dw, dz_in)
    return dw, dz_in


def forward_network_batch(times: np.ndarray, model: Model):
    """Run the whole stack batched; returns (output times (B, K), records)."""
    t = np.asarray(times, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != model.n_inputs:
        raise ShapeMismatch(f"expected (B, {model.n_inputs}) times, got {t.shape}")
    records = []
    for wm in model.weights:
        t, rec = forward_layer_batch(t, wm, model.kernel.threshold)
        records.append(rec)
    return t, records


def predict_batch(times: np.ndarray, model: Model) -> np.ndarray:
    """Earliest-output class per sample; -1 where nothing fires."""
    out, _ = forward_network_batch(times, model)
    pred = np.argmin(out, axis=1)
    pred[~np.isfinite(out).any(axis=1)] = -1
    return pred
