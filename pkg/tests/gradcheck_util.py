"""Finite-difference gradient oracle shared by the trainer and acceptance tests.

Evaluates the training objective (mean data loss + weight-sum penalty, the
exact scalar backward() reports) through the forward path only, and diffs
it centrally in each weight coordinate.  Analytic gradients must match
wherever the causal sets stay stable under the probe.
"""

import numpy as np

from pulsenet.batch import forward_network_batch
from pulsenet.core import Model
from pulsenet.training import CLAMP_GAP, loss, weight_sum_penalty


def objective(times, labels, model, penalty_coeff, margin, temp=1.0,
              lat_pull=0.0, lat_target=0.0):
    out_t, _ = forward_network_batch(times, model)
    data = float(np.mean([loss(row, lab, temp) for row, lab in zip(out_t, labels)]))
    if lat_pull > 0.0:
        finite = np.isfinite(out_t)
        row_max = np.max(np.where(finite, out_t, -np.inf), axis=1)
        t_hat = np.where(finite, out_t, row_max[:, None] + CLAMP_GAP)
        idx = np.arange(out_t.shape[0])
        t_first = np.min(np.asarray(times), axis=1)
        gap = t_hat[idx, np.asarray(labels)] - t_first - lat_target
        data += float(lat_pull * np.mean(gap * gap))
    return data + weight_sum_penalty(model, penalty_coeff, margin)


def causal_signature(times, model):
    _, records = forward_network_batch(times, model)
    return [rec.k_len.copy() for rec in records]


def _with_weight(model, layer, j, i, value):
    ws = [w.copy() for w in model.weights]
    ws[layer][j, i] = value
    return Model(layer_dims=model.layer_dims, weights=tuple(ws), kernel=model.kernel)


def check_gradients(times, labels, model, grads, penalty_coeff, margin,
                    h=1e-5, rel_tol=1e-5, abs_floor=1e-9, temp=1.0,
                    lat_pull=0.0, lat_target=0.0):
    """Compare analytic grads to central differences coordinate by coordinate.

    Returns (checked, failures): coordinates whose causal sets change under
    the +-h probe are skipped, tiny gradients are compared absolutely.
    """
    base_sig = causal_signature(times, model)
    checked = 0
    failures = []
    for layer, wm in enumerate(model.weights):
        for j in range(wm.shape[0]):
            for i in range(wm.shape[1]):
                w0 = wm[j, i]
                m_hi = _with_weight(model, layer, j, i, w0 + h)
                m_lo = _with_weight(model, layer, j, i, w0 - h)
                sig_hi = causal_signature(times, m_hi)
                sig_lo = causal_signature(times, m_lo)
                stable = all((a == b).all() and (a == c).all()
                             for a, b, c in zip(base_sig, sig_hi, sig_lo))
                if not stable:
                    continue
                fd = (objective(times, labels, m_hi, penalty_coeff, margin,
                                temp, lat_pull, lat_target)
                      - objective(times, labels, m_lo, penalty_coeff, margin,
                                  temp, lat_pull, lat_target)) / (2.0 * h)
                an = grads[layer][j, i]
                err = abs(an - fd)
                if err >= rel_tol * max(abs(an), abs(fd)) and err >= abs_floor:
                    failures.append((layer, j, i, an, fd, err))
                checked += 1
    return checked, failures
