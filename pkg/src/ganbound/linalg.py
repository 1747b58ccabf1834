"""Dense matrix/vector kernel used by the network classes.

Matrices and vectors are plain float64 numpy arrays (2-D and 1-D).
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

DEFAULT_RTOL = 1e-10
# radial scaling can land a few ulps outside the sphere; such matrices count
# as inside so that projecting twice changes nothing
_SPHERE_SLACK = 1.0 + 8 * np.finfo(np.float64).eps


def as_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Return a read-only finite float64 matrix built from ``values``.

    A flat sequence is reshaped row-major when ``rows`` and ``cols`` are given.
    """
    M = np.array(values, dtype=np.float64)
    if rows is not None and cols is not None:
        if M.size != rows * cols:
            raise ShapeError(f"{M.size} values cannot fill a {rows}x{cols} matrix")
        M = M.reshape(rows, cols)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    M.setflags(write=False)
    return M


def as_vector(values) -> np.ndarray:
    v = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    v.setflags(write=False)
    return v


def matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if M.ndim != 2 or v.ndim != 1:
        raise ShapeError(f"matvec needs a 2-D matrix and 1-D vector, got {M.shape} and {v.shape}")
    if M.shape[1] != v.shape[0]:
        raise ShapeError(
            f"matrix has {M.shape[1]} columns but vector has length {v.shape[0]}"
        )
    return M @ v


def frobenius_norm(M: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(M, dtype=np.float64)))))


def project_frobenius_ball(M: np.ndarray, bound: float) -> np.ndarray:
    """Euclidean projection of ``M`` onto ``{X : ||X||_F <= bound}``.

    Inside the ball the input is returned unchanged; outside it is scaled
    radially onto the sphere.
    """
    if not bound > 0:
        raise ValueError(f"projection radius must be positive, got {bound}")
    M = np.asarray(M, dtype=np.float64)
    norm = frobenius_norm(M)
    if norm <= bound * _SPHERE_SLACK:
        return M
    return M * (bound / norm)


def project_frobenius_ball_batch(M: np.ndarray, bound: float) -> np.ndarray:
    """Project a stack ``(B, rows, cols)`` of matrices, one ball per slice."""
    norms = np.sqrt(np.sum(np.square(M), axis=(-2, -1), keepdims=True))
    scale = np.where(norms > bound * _SPHERE_SLACK, bound / np.where(norms > 0, norms, 1.0), 1.0)
    return M * scale


def nonzero_count(M: np.ndarray) -> int:
    return int(np.count_nonzero(M))


def allclose_rel(a, b, rtol: float = DEFAULT_RTOL) -> bool:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(np.abs(a - b) <= rtol * scale))
