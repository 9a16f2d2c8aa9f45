"""Local binary pattern maps used as texture ground truth.

LBP(8,1): each pixel gets an 8-bit code comparing it to its 8 immediate
neighbors, visited clockwise from the top-left corner; a bit is set iff the
neighbor is >= the center. Borders are handled by edge replication.
"""
from __future__ import annotations

import numpy as np

# Clockwise from the top-left corner; bit k corresponds to offset k.
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1),
)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Convert H×W×3 to H×W luma (float32); pass single-channel through."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ np.asarray(LUMA_WEIGHTS, dtype=np.float32)
    raise ValueError(f"expected H×W or H×W×3 image, got shape {arr.shape}")


def lbp_code_map(gray: np.ndarray) -> np.ndarray:
    """8-bit LBP codes of a grayscale image, same spatial size, dtype uint8."""
    gray = np.asarray(gray)
    if gray.ndim != 2 or min(gray.shape) < 3:
        raise ValueError(f"need a 2-D image at least 3×3, got shape {gray.shape}")
    h, w = gray.shape
    padded = np.pad(gray, 1, mode="edge")
    center = padded[1:-1, 1:-1]
    codes = np.zeros((h, w), dtype=np.uint8)
    for bit, (dy, dx) in enumerate(NEIGHBOR_OFFSETS):
        neighbor = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        codes |= (neighbor >= center).astype(np.uint8) << bit
    return codes


def average_pool(arr: np.ndarray, out_size: int) -> np.ndarray:
    """Average-pool a square 2-D array down to out_size×out_size."""
    h, w = arr.shape
    if h % out_size or w % out_size:
        raise ValueError(f"out_size {out_size} does not divide shape {arr.shape}")
    fy, fx = h // out_size, w // out_size
    return arr.reshape(out_size, fy, out_size, fx).mean(axis=(1, 3))


def lbp_gt_map(image: np.ndarray, out_size: int) -> np.ndarray:
    """Normalized LBP target: grayscale → codes/255 → average-pool to out_size."""
    gray = to_grayscale(image)
    codes = lbp_code_map(gray).astype(np.float32) / 255.0
    return average_pool(codes, out_size)
