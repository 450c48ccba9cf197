"""Dense nonsymmetric eigensolver: Householder Hessenberg reduction + shifted QR.

Meant for the small matrices that show up here (N <= 64).  Bulk Monte-Carlo
sampling goes through :func:`eigenvalues_batch`, which delegates to LAPACK.
"""
from __future__ import annotations

import numpy as np

from .errors import NoConvergence

_EPS = np.finfo(float).eps


def hessenberg(matrix: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix unitarily similar to ``matrix``."""
    H = np.array(matrix, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    # eigenvalue of [[a, b], [c, d]] closest to d
    half = 0.5 * (a - d)
    root = np.sqrt(half * half + b * c)
    s1 = d - b * c / (half + root) if half + root != 0 else d
    s2 = d - b * c / (half - root) if half - root != 0 else d
    return s1 if abs(s1 - d) <= abs(s2 - d) else s2


def _qr_sweep(B: np.ndarray, shift: complex) -> None:
    """One explicit shifted QR step on the Hessenberg block ``B`` (in place)."""
    m = B.shape[0]
    B[np.diag_indices(m)] -= shift
    rots = []
    for k in range(m - 1):
        a, b = B[k, k], B[k + 1, k]
        r = np.hypot(abs(a), abs(b))
        if r == 0.0:
            G = np.eye(2, dtype=complex)
        else:
            G = np.array([[a.conjugate(), b.conjugate()], [-b, a]]) / r
        B[k : k + 2, k:] = G @ B[k : k + 2, k:]
        rots.append(G)
    for k, G in enumerate(rots):
        hi = min(k + 3, m)
        B[:hi, k : k + 2] = B[:hi, k : k + 2] @ G.conj().T
    B[np.diag_indices(m)] += shift


def eigenvalues(matrix: np.ndarray, max_sweeps: int | None = None) -> np.ndarray:
    """All eigenvalues of a real or complex square matrix.

    Args:
        matrix: square array.
        max_sweeps: QR sweep cap; defaults to 100 * N.

    Returns:
        complex array of length N (no particular order).

    Raises:
        NoConvergence: the sweep cap was reached before full deflation.
    """
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if not np.all(np.isfinite(A)):
        raise NoConvergence("matrix has non-finite entries")
    cap = 100 * n if max_sweeps is None else max_sweeps
    H = hessenberg(A)
    scale = np.abs(H).max()
    tiny = _EPS * scale if scale > 0 else 0.0
    out: list[complex] = []
    hi = n - 1
    sweeps = 0
    its = 0
    while hi >= 0:
        if hi == 0:
            out.append(H[0, 0])
            break
        lo = hi
        while lo > 0:
            off = abs(H[lo, lo - 1])
            if off <= _EPS * (abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])) or off <= tiny:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            out.append(H[hi, hi])
            hi -= 1
            its = 0
            continue
        if sweeps >= cap:
            raise NoConvergence(f"QR iteration did not converge in {cap} sweeps")
        its += 1
        if its % 11 == 10:
            shift = H[hi, hi] + (1.5 + 0.5j) * abs(H[hi, hi - 1])
        else:
            shift = _wilkinson_shift(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        block = H[lo : hi + 1, lo : hi + 1]
        _qr_sweep(block, shift)
        sweeps += 1
    vals = np.array(out, dtype=complex)
    if np.isrealobj(A) or not np.any(np.iscomplex(A)):
        # snap rounding-level imaginary parts of real spectra
        vals.imag[np.abs(vals.imag) <= 1e3 * _EPS * max(scale, 1.0)] = 0.0
    return vals


def eigenvalues_batch(stack: np.ndarray) -> np.ndarray:
    """Eigenvalues of a ``(batch, n, n)`` stack via LAPACK (geev)."""
    return np.linalg.eigvals(np.asarray(stack))


def characteristic_residual(matrix: np.ndarray, value: complex) -> float:
    """Smallest singular value of ``matrix - value * I``."""
    A = np.asarray(matrix, dtype=complex)
    return float(np.linalg.svd(A - value * np.eye(A.shape[0]), compute_uv=False)[-1])


def spectral_radius(matrix: np.ndarray) -> float:
    vals = eigenvalues(matrix)
    return float(np.abs(vals).max()) if vals.size else 0.0
