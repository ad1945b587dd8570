"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` signature for signature and are used whenever
the compiled extension is unavailable (or ``RDCNN_PURE_PYTHON=1``).
"""

import numpy as np


def dilated_conv_forward(x, w, dilation):
    """Valid-only causal dilated convolution.

    ``x`` has shape (in_channels, T) and ``w`` (out_channels, in_channels, K).
    Output sample ``t`` lines up with input sample ``t + (K - 1) * dilation``.
    """
    c_out, _, k_len = w.shape
    span = (k_len - 1) * dilation
    t_out = x.shape[1] - span
    out = np.zeros((c_out, t_out))
    for k in range(k_len):
        off = span - k * dilation
        out += w[:, :, k] @ x[:, off:off + t_out]
    return out


def dilated_conv_backward(x, w, dilation, grad_out):
    """Gradients of a scalar objective w.r.t. the input and the weights."""
    k_len = w.shape[2]
    span = (k_len - 1) * dilation
    t_out = grad_out.shape[1]
    grad_x = np.zeros_like(x)
    grad_w = np.empty_like(w)
    for k in range(k_len):
        off = span - k * dilation
        seg = x[:, off:off + t_out]
        grad_w[:, :, k] = grad_out @ seg.T
        grad_x[:, off:off + t_out] += w[:, :, k].T @ grad_out
    return grad_x, grad_w


def polyphase_resample(x, taps, up, down, n_out):
    """Rational resampling without materialising the zero-stuffed signal.

    Output ``m`` is the sample at upsampled index ``m * down + D`` of the
    filtered zero-stuffed input, where ``D = (len(taps) - 1) // 2`` removes the
    filter's group delay.
    """
    n_in = x.shape[0]
    n_taps = taps.shape[0]
    t = np.arange(n_out, dtype=np.int64) * down + (n_taps - 1) // 2
    phase = t % up
    base = t // up
    y = np.zeros(n_out)
    per_phase = -(-n_taps // up)
    for i in range(per_phase):
        j = phase + i * up
        idx = base - i
        ok = (j < n_taps) & (idx >= 0) & (idx < n_in)
        y[ok] += taps[j[ok]] * x[idx[ok]]
    return y


def gd_full_batch(weights, dilations, gram, cross, const_term, lr, epochs):
    """Full-batch gradient descent on ``0.5 * (g'Rg - 2p'g + c)``.

    ``g`` is the network's impulse response, obtained (and differentiated) by
    running the stack on a unit impulse. Returns ``(best_weights, losses,
    diverged_epoch)`` where ``losses[e]`` is the loss before epoch ``e`` plus
    the final loss, ``best_weights`` is the lowest-loss iterate and
    ``diverged_epoch`` is -1 unless the loss became non-finite or exceeded
    ten times its initial value.
    """
    rf = gram.shape[0]
    ws = [np.array(w, dtype=np.float64) for w in weights]
    delta = np.zeros((1, 2 * rf - 1))
    delta[0, rf - 1] = 1.0

    def forward():
        acts = [delta]
        for w, d in zip(ws, dilations):
            acts.append(dilated_conv_forward(acts[-1], w, d))
        return acts

    def value(g):
        rg = gram @ g
        return 0.5 * (g @ rg - 2.0 * cross @ g + const_term), rg

    def bad(v):
        return not np.isfinite(v) or v > 10.0 * initial

    losses = np.zeros(epochs + 1)
    acts = forward()
    initial, rg = value(acts[-1][0])
    best, best_ws = initial, [w.copy() for w in ws]
    for epoch in range(epochs):
        g = acts[-1][0]
        cur, rg = (initial, rg) if epoch == 0 else value(g)
        losses[epoch] = cur
        if bad(cur):
            return best_ws, losses[:epoch + 1], epoch
        if cur < best:
            best, best_ws = cur, [w.copy() for w in ws]
        grad = (rg - cross)[None, :]
        for i in range(len(ws) - 1, -1, -1):
            grad, gw = dilated_conv_backward(acts[i], ws[i], dilations[i], grad)
            ws[i] -= lr * gw
        acts = forward()
    cur, _ = value(acts[-1][0])
    losses[epochs] = cur
    if bad(cur):
        return best_ws, losses, epochs
    if cur <= best:
        best_ws = ws
    return best_ws, losses, -1
