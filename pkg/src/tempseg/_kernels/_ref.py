"""Pure-numpy reference implementations of the hot kernels.

Semantics must match tempseg._kernels._core exactly; the compiled module is
preferred at import time when it built successfully.
"""

import numpy as np

BACKEND = "python"


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int) -> np.ndarray:
    """Same-length dilated 1D convolution over a T x Cin sequence.

    x: (T, Cin), w: (Cout, Cin, r) with r odd, b: (Cout,).  Frames outside
    [0, T) contribute zero.  Tap j sits at temporal offset (j - (r-1)/2) * dilation.
    """
    T = x.shape[0]
    cout, _, r = w.shape
    half = (r - 1) // 2
    y = np.tile(b, (T, 1))
    for j in range(r):
        off = (j - half) * dilation
        lo = max(0, -off)
        hi = min(T, T - off)
        if lo >= hi:
            continue
        y[lo:hi] += x[lo + off:hi + off] @ w[:, :, j].T
    return y


def conv1d_backward(x, w, gy, dilation):
    """Gradients of conv1d_forward w.r.t. input, weight, and bias.

    gy: (T, Cout) upstream gradient.  Returns (gx, gw, gb).
    """
    T = x.shape[0]
    cout, cin, r = w.shape
    half = (r - 1) // 2
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    for j in range(r):
        off = (j - half) * dilation
        lo = max(0, -off)
        hi = min(T, T - off)
        if lo >= hi:
            continue
        gx[lo + off:hi + off] += gy[lo:hi] @ w[:, :, j]
        gw[:, :, j] = gy[lo:hi].T @ x[lo + off:hi + off]
    gb = gy.sum(axis=0)
    return gx, gw, gb


def viterbi_path(grid: np.ndarray):
    """Best monotone stay/advance path through a T x K score grid.

    The path starts in column 0 at t=0, ends in column K-1 at t=T-1, and per
    step either stays in its column or advances to the next one.  Ties prefer
    staying.  Returns (path positions int64 (T,), total score).
    """
    T, K = grid.shape
    neg_inf = -np.inf
    dp = np.full(K, neg_inf)
    dp[0] = grid[0, 0]
    advance = np.zeros((T, K), dtype=np.uint8)
    for t in range(1, T):
        stay = dp
        adv = np.concatenate(([neg_inf], dp[:-1]))
        take_adv = adv > stay
        advance[t] = take_adv
        dp = np.where(take_adv, adv, stay) + grid[t]
    path = np.empty(T, dtype=np.int64)
    j = K - 1
    path[T - 1] = j
    for t in range(T - 1, 0, -1):
        if advance[t, j]:
            j -= 1
        path[t - 1] = j
    return path, float(dp[K - 1])
