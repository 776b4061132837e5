"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays; complex Hermitian data is mapped to
real symmetric data with :func:`real_embedding` before it reaches the SDP
solver.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT
from .errors import DimensionMismatch, NotHermitian, NotIsometry, NotPSD


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def hermitian_defect(m: np.ndarray) -> float:
    return max_abs(m - dag(m))


def check_hermitian(m: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Raise :class:`NotHermitian` unless ``m`` is Hermitian; return its Hermitian part."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    tol = DEFAULT.hermitian if tol is None else tol
    if hermitian_defect(m) > tol * (1.0 + np.linalg.norm(m, 2)):
        raise NotHermitian(f"Hermiticity defect {hermitian_defect(m):.3e}")
    return (m + dag(m)) / 2


def is_unitary(u: np.ndarray, tol: float = 1e-9) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return max_abs(dag(u) @ u - np.eye(u.shape[0])) <= tol


def hermitian_sqrt(m: np.ndarray, hermitian_tol: float | None = None) -> np.ndarray:
    """Positive square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-1e-8, 0)`` are clamped to zero; anything more negative
    raises :class:`NotPSD`.
    """
    h = check_hermitian(m, hermitian_tol)
    w, v = np.linalg.eigh(h)
    if w.size and w[0] < -DEFAULT.psd_error:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e}")
    s = (v * np.sqrt(np.clip(w, 0.0, None))) @ dag(v)
    return (s + dag(s)) / 2


def polar_decompose(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right polar decomposition ``m = u @ p``.

    ``u`` is unitary even when ``m`` is singular: the SVD-based factor maps
    the kernel of ``m`` onto the orthogonal complement of its range.
    ``p`` equals ``hermitian_sqrt(m^* m)``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"polar decomposition needs a square matrix, got {m.shape}")
    u, p = sla.polar(m, side="right")
    return u, (p + dag(p)) / 2


def complete_isometry(t: np.ndarray, seed: int | None = None, tol: float | None = None) -> np.ndarray:
    """Extend the orthonormal columns of ``t`` to a unitary matrix.

    The first ``t.shape[1]`` columns of the result equal ``t`` exactly. The
    complement is an orthonormal basis of the orthogonal complement of the
    column space; with ``seed`` set it is rotated by a seeded Haar unitary so
    that different seeds give different (but reproducible) completions.
    """
    t = np.asarray(t, dtype=complex)
    if t.ndim != 2 or t.shape[0] < t.shape[1]:
        raise DimensionMismatch(f"expected a tall matrix, got shape {t.shape}")
    tol = DEFAULT.isometry if tol is None else tol
    dev = max_abs(dag(t) @ t - np.eye(t.shape[1]))
    if dev > tol:
        raise NotIsometry(f"columns deviate from orthonormal by {dev:.3e}")
    n, k = t.shape
    if n == k:
        return t.copy()
    comp = sla.null_space(dag(t), rcond=DEFAULT.completion)
    if comp.shape[1] != n - k:
        raise NotIsometry("could not find an orthonormal complement")
    # one re-orthogonalisation pass against t removes residual overlap
    comp = comp - t @ (dag(t) @ comp)
    comp, _ = np.linalg.qr(comp)
    if seed is not None:
        from .random_measures import sample_haar_unitary

        comp = comp @ sample_haar_unitary(n - k, np.random.default_rng(seed))
    return np.hstack([t, comp])


def real_embedding(h: np.ndarray, check: bool = True) -> np.ndarray:
    """Real symmetric image ``[[Re H, -Im H], [Im H, Re H]]`` of a Hermitian matrix.

    The map is an algebra homomorphism, so positive semidefiniteness is
    preserved in both directions and every eigenvalue appears twice.
    """
    h = check_hermitian(h) if check else np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def real_unembedding(x: np.ndarray) -> np.ndarray:
    """Hermitian matrix whose embedding is closest to the real symmetric ``x``.

    For ``x = real_embedding(h)`` this returns ``h``; for general ``x`` it
    returns the preimage of the projection of ``x`` onto embedded matrices.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0] // 2
    a, b = x[:d, :d], x[:d, d:]
    c, e = x[d:, :d], x[d:, d:]
    h = (a + e) / 2 + 1j * (c - b) / 2
    return (h + dag(h)) / 2


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis (Hilbert-Schmidt) of the d x d Hermitian matrices, shape (d*d, d, d)."""
    basis = []
    for p in range(d):
        g = np.zeros((d, d), dtype=complex)
        g[p, p] = 1.0
        basis.append(g)
    for p in range(d):
        for q in range(p + 1, d):
            g = np.zeros((d, d), dtype=complex)
            g[p, q] = g[q, p] = 1 / np.sqrt(2)
            basis.append(g)
            g = np.zeros((d, d), dtype=complex)
            g[p, q] = -1j / np.sqrt(2)
            g[q, p] = 1j / np.sqrt(2)
            basis.append(g)
    return np.array(basis)


def block_diag(*mats: np.ndarray) -> np.ndarray:
    return sla.block_diag(*mats)
