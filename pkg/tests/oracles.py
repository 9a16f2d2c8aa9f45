"""Naive reference implementations, written first and kept frozen.

These are deliberately slow, loop-based, and independent of the package
internals; the real implementations must match them exactly.
"""
import numpy as np

# Neighbor order: clockwise starting at the top-left corner.
_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]


def naive_lbp_codes(gray):
    """Double-loop LBP(8,1) with replicated borders.

    Bit k of a pixel's code is set iff the k-th neighbor (clockwise from
    top-left) is >= the center value.
    """
    gray = np.asarray(gray)
    h, w = gray.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            center = gray[y, x]
            code = 0
            for k, (dy, dx) in enumerate(_NEIGHBORS):
                ny = min(max(y + dy, 0), h - 1)
                nx = min(max(x + dx, 0), w - 1)
                if gray[ny, nx] >= center:
                    code |= 1 << k
            out[y, x] = code
    return out


def naive_pad_metrics(scores, labels, threshold):
    """Counting-loop APCER/BPCER/ACER/HTER in percent.

    labels: 1 = live, 0 = spoof. Decision rule: score >= threshold => live.
    """
    n_live = n_spoof = fa = fr = 0
    for s, l in zip(scores, labels):
        if l == 1:
            n_live += 1
            if s < threshold:
                fr += 1
        else:
            n_spoof += 1
            if s >= threshold:
                fa += 1
    apcer = 100.0 * fa / n_spoof
    bpcer = 100.0 * fr / n_live
    acer = (apcer + bpcer) / 2.0
    hter = (100.0 * fa / n_spoof + 100.0 * fr / n_live) / 2.0
    return apcer, bpcer, acer, hter


def naive_l1_mean(a, b):
    """Elementwise-loop mean absolute difference."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    total = 0.0
    for x, y in zip(a, b):
        total += abs(x - y)
    return total / a.size
