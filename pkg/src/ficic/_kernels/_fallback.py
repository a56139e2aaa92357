"""Pure-Python/NumPy versions of the compiled kernels (same signatures)."""

import numpy as np


def _gram_without(h: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Stack of A_k = I + sum_{j != k} lam_j h_j h_j^H, shape (K, N_t, N_t)."""
    k, n_t = h.shape
    outer = lam[:, None, None] * (h[:, :, None] * h.conj()[:, None, :])
    total = np.eye(n_t) + outer.sum(axis=0)
    return total[None, :, :] - outer


def fixed_point(h, gamma, lam0, tol, max_iter):
    """Iterate lam_k <- gamma_k / (h_k^H A_k^{-1} h_k) until the relative step is below tol.

    Returns ``(lam, iterations, residual, converged)`` where ``residual`` is
    the relative change one further sweep would make.
    """
    h = np.ascontiguousarray(h, dtype=complex)
    gamma = np.asarray(gamma, dtype=float)
    lam = np.array(lam0, dtype=float)
    active = gamma > 0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        new = _sweep(h, gamma, lam, active)
        change = np.max(np.abs(new - lam) / np.maximum(new, 1.0)) if len(lam) else 0.0
        lam = new
        if change <= tol:
            converged = True
            break
    nxt = _sweep(h, gamma, lam, active)
    residual = float(np.max(np.abs(nxt - lam) / np.maximum(lam, 1.0))) if len(lam) else 0.0
    return lam, it, residual, converged


def _sweep(h, gamma, lam, active):
    a = _gram_without(h, lam)
    x = np.linalg.solve(a, h[:, :, None])[:, :, 0]
    q = np.einsum("ki,ki->k", h.conj(), x).real
    out = np.zeros_like(lam)
    out[active] = gamma[active] / q[active]
    return out


def directions(h, lam):
    """Regularized zero-forcing directions (I + sum_{j != k} lam_j h_j h_j^H)^{-1} h_k."""
    h = np.ascontiguousarray(h, dtype=complex)
    lam = np.asarray(lam, dtype=float)
    a = _gram_without(h, lam)
    return np.linalg.solve(a, h[:, :, None])[:, :, 0]
