# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np


def dilated_conv_forward(const double[:, ::1] x, const double[:, :, ::1] w, Py_ssize_t dilation):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1], k_len = w.shape[2]
    cdef Py_ssize_t span = (k_len - 1) * dilation
    cdef Py_ssize_t t_out = x.shape[1] - span
    cdef Py_ssize_t r, c, k, t, off
    cdef double wv
    out_arr = np.zeros((c_out, t_out))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for r in range(c_out):
            for c in range(c_in):
                for k in range(k_len):
                    wv = w[r, c, k]
                    off = span - k * dilation
                    for t in range(t_out):
                        out[r, t] += wv * x[c, off + t]
    return out_arr


def dilated_conv_backward(const double[:, ::1] x, const double[:, :, ::1] w,
                          Py_ssize_t dilation, const double[:, ::1] grad_out):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1], k_len = w.shape[2]
    cdef Py_ssize_t span = (k_len - 1) * dilation
    cdef Py_ssize_t t_out = grad_out.shape[1]
    cdef Py_ssize_t r, c, k, t, off
    cdef double acc, wv
    gx_arr = np.zeros((c_in, x.shape[1]))
    gw_arr = np.empty((c_out, c_in, k_len))
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    with nogil:
        for r in range(c_out):
            for c in range(c_in):
                for k in range(k_len):
                    off = span - k * dilation
                    wv = w[r, c, k]
                    acc = 0.0
                    for t in range(t_out):
                        acc = acc + grad_out[r, t] * x[c, off + t]
                        gx[c, off + t] += wv * grad_out[r, t]
                    gw[r, c, k] = acc
    return gx_arr, gw_arr


def polyphase_resample(const double[::1] x, const double[::1] taps,
                       Py_ssize_t up, Py_ssize_t down, Py_ssize_t n_out):
    cdef Py_ssize_t n_in = x.shape[0], n_taps = taps.shape[0]
    cdef Py_ssize_t delay = (n_taps - 1) // 2
    cdef Py_ssize_t m, t, j, idx
    cdef double acc
    y_arr = np.empty(n_out)
    cdef double[::1] y = y_arr
    with nogil:
        for m in range(n_out):
            t = m * down + delay
            j = t % up
            idx = t // up
            acc = 0.0
            while j < n_taps and idx >= 0:
                if idx < n_in:
                    acc = acc + taps[j] * x[idx]
                j = j + up
                idx = idx - 1
            y[m] = acc
    return y_arr


cdef void _fwd(const double[:, ::1] x, const double[:, :, ::1] w, Py_ssize_t dilation,
               double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1], k_len = w.shape[2]
    cdef Py_ssize_t span = (k_len - 1) * dilation
    cdef Py_ssize_t t_out = out.shape[1]
    cdef Py_ssize_t r, c, k, t, off
    cdef double wv
    for r in range(c_out):
        for t in range(t_out):
            out[r, t] = 0.0
        for c in range(c_in):
            for k in range(k_len):
                wv = w[r, c, k]
                off = span - k * dilation
                for t in range(t_out):
                    out[r, t] += wv * x[c, off + t]


cdef void _bwd(const double[:, ::1] x, const double[:, :, ::1] w, Py_ssize_t dilation,
               const double[:, ::1] grad_out, double[:, ::1] gx, double[:, :, ::1] gw) noexcept nogil:
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1], k_len = w.shape[2]
    cdef Py_ssize_t span = (k_len - 1) * dilation
    cdef Py_ssize_t t_out = grad_out.shape[1]
    cdef Py_ssize_t r, c, k, t, off
    cdef double acc, wv
    for c in range(c_in):
        for t in range(gx.shape[1]):
            gx[c, t] = 0.0
    for r in range(c_out):
        for c in range(c_in):
            for k in range(k_len):
                off = span - k * dilation
                wv = w[r, c, k]
                acc = 0.0
                for t in range(t_out):
                    acc = acc + grad_out[r, t] * x[c, off + t]
                    gx[c, off + t] += wv * grad_out[r, t]
                gw[r, c, k] = acc


cdef double _quad_value(const double[:, ::1] gram, const double[::1] cross, double const_term,
                        const double[::1] g, double[::1] rg) noexcept nogil:
    cdef Py_ssize_t a, b, n = g.shape[0]
    cdef double s, quad = 0.0, lin = 0.0
    for a in range(n):
        s = 0.0
        for b in range(n):
            s = s + gram[a, b] * g[b]
        rg[a] = s
        quad = quad + g[a] * s
        lin = lin + cross[a] * g[a]
    return 0.5 * (quad - 2.0 * lin + const_term)


cdef inline bint _bad(double v, double initial) noexcept nogil:
    return not (v == v) or v > 10.0 * initial or v - v != 0.0


def gd_full_batch(list weights, list dilations, const double[:, ::1] gram,
                  const double[::1] cross, double const_term, double lr, Py_ssize_t epochs):
    """Fused full-batch descent; same contract as ``_pykernels.gd_full_batch``."""
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t rf = gram.shape[0]
    cdef Py_ssize_t i, j, epoch, li
    cdef double cur, initial, best
    cdef double[::1] w_flat, gw_flat

    ws = [np.array(w, dtype=np.float64, order="C") for w in weights]
    acts = [np.zeros((1, 2 * rf - 1))]
    acts[0][0, rf - 1] = 1.0
    for li in range(n_layers):
        acts.append(np.zeros((ws[li].shape[0], acts[li].shape[1] - (ws[li].shape[2] - 1) * dilations[li])))
    gxs = [np.zeros_like(a) for a in acts[:-1]]
    gws = [np.zeros_like(w) for w in ws]
    dg_arr = np.zeros((1, rf))
    cdef double[::1] dg = dg_arr[0]
    cdef double[::1] rg = np.zeros(rf)
    cdef double[::1] g = acts[n_layers][0]
    losses = np.zeros(epochs + 1)
    best_ws = [w.copy() for w in ws]

    for li in range(n_layers):
        _fwd(acts[li], ws[li], dilations[li], acts[li + 1])
    initial = _quad_value(gram, cross, const_term, g, rg)
    best = initial
    for epoch in range(epochs):
        cur = initial if epoch == 0 else _quad_value(gram, cross, const_term, g, rg)
        losses[epoch] = cur
        if _bad(cur, initial):
            return best_ws, losses[:epoch + 1], epoch
        if cur < best:
            best = cur
            for li in range(n_layers):
                best_ws[li][...] = ws[li]
        for j in range(rf):
            dg[j] = rg[j] - cross[j]
        _bwd(acts[n_layers - 1], ws[n_layers - 1], dilations[n_layers - 1], dg_arr,
             gxs[n_layers - 1], gws[n_layers - 1])
        for li in range(n_layers - 2, -1, -1):
            _bwd(acts[li], ws[li], dilations[li], gxs[li + 1], gxs[li], gws[li])
        for li in range(n_layers):
            w_flat = ws[li].reshape(-1)
            gw_flat = gws[li].reshape(-1)
            for i in range(w_flat.shape[0]):
                w_flat[i] -= lr * gw_flat[i]
        for li in range(n_layers):
            _fwd(acts[li], ws[li], dilations[li], acts[li + 1])
    cur = _quad_value(gram, cross, const_term, g, rg)
    losses[epochs] = cur
    if _bad(cur, initial):
        return best_ws, losses, epochs
    if cur <= best:
        best_ws = ws
    return best_ws, losses, -1
