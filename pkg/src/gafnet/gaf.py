"""Gramian Angular Field encoding of 1-D segments, plus PGM export."""

import numpy as np

ARCCOS_CLAMP_TOL = 1e-9


def rescale(values) -> np.ndarray:
    """Affine map of a segment onto [-1, 1] (min -> -1, max -> +1).

    A constant segment maps to the interval midpoint 0.
    """
    x = np.asarray(values, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi - lo == 0.0:
        return np.zeros_like(x)
    return (x - lo) * 2.0 / (hi - lo) - 1.0


def angular_encode(rescaled) -> np.ndarray:
    """phi_j = arccos(x_j) for x in [-1, 1], each phase in [0, pi].

    Entries within ARCCOS_CLAMP_TOL outside [-1, 1] are clamped (rounding
    noise); anything farther out is a contract violation.
    """
    x = np.asarray(rescaled, dtype=np.float64)
    if np.any(x < -1.0 - ARCCOS_CLAMP_TOL) or np.any(x > 1.0 + ARCCOS_CLAMP_TOL):
        raise ValueError("angular_encode input outside [-1, 1] beyond clamp tolerance")
    return np.arccos(np.clip(x, -1.0, 1.0))


def gaf_matrix(phases) -> np.ndarray:
    """GAF[j, k] = cos(phi_j + phi_k); symmetric with entries in [-1, 1]."""
    p = np.asarray(phases, dtype=np.float64)
    return np.cos(p[:, None] + p[None, :])


def gaf_transform(values) -> np.ndarray:
    """rescale -> angular_encode -> gaf_matrix."""
    return gaf_matrix(angular_encode(rescale(values)))


def export_image(matrix: np.ndarray, path) -> None:
    """Write a GAF matrix as a binary PGM (P5, maxval 255).

    Value v in [-1, 1] maps to pixel round((v + 1) / 2 * 255).
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    pixels = np.rint((m + 1.0) / 2.0 * 255.0)
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
