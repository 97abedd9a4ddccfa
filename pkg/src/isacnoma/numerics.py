"""Dense complex linear algebra shared by the rest of the package.

Matrices are plain 2-D ``numpy`` arrays of dtype ``complex128``; nothing here
keeps state, so every function is safe to call from several threads.
"""

import warnings

import numpy as np
from scipy import linalg as sla

from .errors import NumericalFailure, NumericalWarning, ShapeError

__all__ = [
    "as_matrix",
    "pseudo_inverse",
    "log_det_capacity",
    "phase_matrix",
    "trace",
    "frobenius_norm",
    "hermitian",
    "matmul",
    "cholesky_psd",
    "solve_hermitian_psd",
]

EPS = np.finfo(np.float64).eps


def as_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a finite, non-empty 2-D complex128 array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise ShapeError("matrix is empty")
    if not np.all(np.isfinite(a)):
        raise NumericalFailure("matrix contains NaN or Inf entries")
    return a


def pseudo_inverse(m, tol=None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via the SVD.

    Singular values below ``tol * s_max`` are treated as zero.  The default
    ``tol`` is ``max(rows, cols) * eps``.
    """
    a = as_matrix(m)
    if tol is None:
        tol = max(a.shape) * EPS
    elif tol < 0:
        raise ValueError("tol must be non-negative")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK gesdd does not report its sweep count back through numpy
        raise NumericalFailure(f"SVD did not converge: {exc}", iterations=None) from exc
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=np.complex128)
    keep = s > tol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vh.conj().T * s_inv) @ u.conj().T


def log_det_capacity(a) -> float:
    """Return ``log2 det(I + A)`` for a square ``A`` with ``I + A`` Hermitian PSD.

    ``A`` is symmetrised as ``(A + A^H) / 2`` first.  A non-positive
    determinant is clamped to zero capacity with a :class:`NumericalWarning`.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"log-det needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    m = 0.5 * (a + a.conj().T) + np.eye(n)
    try:
        c = np.linalg.cholesky(m)
        value = 2.0 * np.sum(np.log2(np.abs(np.diagonal(c))))
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(m)
        if np.any(w <= 0.0):
            warnings.warn("det(I + A) <= 0 after symmetrisation; rate clamped to 0",
                          NumericalWarning, stacklevel=2)
            return 0.0
        value = float(np.sum(np.log2(w)))
    return max(float(value), 0.0)


def phase_matrix(m, scale: float) -> np.ndarray:
    """Constant-modulus matrix ``scale * exp(j * arg(m))``.

    ``arg(0)`` is taken as 0, so zero entries map to ``+scale``.
    """
    a = as_matrix(m)
    if not scale > 0:
        raise ValueError("scale must be positive")
    # atan2 gives pi for a -0.0 real part, so zeros are pinned explicitly
    phase = np.angle(a)
    phase[a == 0] = 0.0
    return scale * np.exp(1j * phase)


def trace(m) -> complex:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"trace needs a square matrix, got shape {a.shape}")
    return complex(np.trace(a))


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m), "fro"))


def hermitian(m) -> np.ndarray:
    return np.asarray(m).conj().T


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def cholesky_psd(a) -> np.ndarray:
    """Lower Cholesky factor of a Hermitian PSD matrix, with jitter fallback.

    When the factorisation fails, ``1e-12 * tr(A)/n`` is added to the diagonal
    and the jitter is raised by a decade per retry, up to three retries.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"matrix must be square, got {a.shape}")
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    base = 1e-12 * max(np.trace(a).real / n, np.finfo(float).tiny)
    for attempt in range(4):
        jitter = 0.0 if attempt == 0 else base * 10.0 ** (attempt - 1)
        try:
            c = np.linalg.cholesky(a + jitter * np.eye(n) if jitter else a)
        except np.linalg.LinAlgError:
            continue
        if attempt:
            warnings.warn(f"Cholesky needed diagonal jitter {jitter:.3e}",
                          NumericalWarning, stacklevel=2)
        return c
    raise NumericalFailure("Cholesky failed even with diagonal jitter", iterations=4)


def solve_hermitian_psd(a, b) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian PSD ``A`` (see :func:`cholesky_psd`)."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"coefficient matrix must be square, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ShapeError(f"right-hand side has {b.shape[0]} rows, expected {a.shape[0]}")
    c = cholesky_psd(a)
    y = sla.solve_triangular(c, b, lower=True, check_finite=False)
    return sla.solve_triangular(c.conj().T, y, lower=False, check_finite=False)
