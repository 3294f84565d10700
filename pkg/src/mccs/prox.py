"""Proximal operators and projections shared by both subproblem solvers."""

from __future__ import annotations

import numpy as np

from .kernels import clip_unit_disk, soft_threshold


def prox_l1_complex(v, t: float):
    """Entrywise complex soft threshold: argmin_u t*||u||_1 + 0.5*||u - v||^2."""
    if not t > 0:
        raise ValueError("threshold must be positive")
    arr = np.asarray(v, dtype=np.complex128)
    out = soft_threshold(np.ascontiguousarray(arr.reshape(-1)), float(t))
    return out.reshape(arr.shape)


def project_unit_disk(v):
    """Clamp entry magnitudes to 1, preserving phase; idempotent."""
    arr = np.asarray(v, dtype=np.complex128)
    out = clip_unit_disk(np.ascontiguousarray(arr.reshape(-1)))
    return out.reshape(arr.shape)


def nuclear_norm(smat) -> float:
    """Sum of singular values, via the small Gram matrix of a tall input."""
    a = np.asarray(smat, dtype=np.complex128)
    gram = a.conj().T @ a
    w = np.linalg.eigvalsh((gram + gram.conj().T) / 2.0)
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def prox_nuclear(smat, t: float):
    """Singular-value soft thresholding of a tall (MN, C) matrix.

    The thin factorization comes from the C x C Gram matrix, so the cost is
    O(MN*C^2). Directions whose singular value shrinks to zero drop out of
    the reconstruction entirely.
    """
    if not t > 0:
        raise ValueError("threshold must be positive")
    a = np.asarray(smat, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError(f"expected a tall 2-D matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix has non-finite entries")
    gram = a.conj().T @ a
    w, vecs = np.linalg.eigh((gram + gram.conj().T) / 2.0)
    sig = np.sqrt(np.clip(w, 0.0, None))
    shrunk = np.maximum(sig - t, 0.0)
    keep = shrunk > 0.0
    if not keep.any():
        return np.zeros_like(a)
    basis = vecs[:, keep]
    ratio = shrunk[keep] / sig[keep]
    return ((a @ basis) * ratio) @ basis.conj().T


def prox_quadratic_data(y, t: float, c):
    """Prox of the data fit g(u) = 0.5*||u - c||^2: (y + t*c)/(1 + t)."""
    if not t > 0:
        raise ValueError("step must be positive")
    y = np.asarray(y, dtype=np.complex128)
    c = np.asarray(c, dtype=np.complex128)
    if y.shape != c.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {c.shape}")
    return (y + t * c) / (1.0 + t)


def prox_scaled_sq(y, t: float, sigma: float):
    """Prox of g(u) = (sigma/2)*||u||^2: pure shrinkage y/(1 + t*sigma)."""
    if not t > 0:
        raise ValueError("step must be positive")
    if sigma < 0:
        raise ValueError("weight must be nonnegative")
    return np.asarray(y, dtype=np.complex128) / (1.0 + t * sigma)


def prox_conjugate(prox_g, y, t: float):
    """Prox of the convex conjugate via the Moreau identity.

    ``prox_g(v, a)`` must return argmin_u g(u) + ||u - v||^2 / (2a).
    """
    if not t > 0:
        raise ValueError("step must be positive")
    y = np.asarray(y, dtype=np.complex128)
    return y - t * prox_g(y / t, 1.0 / t)
