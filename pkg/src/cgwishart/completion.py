"""Cholesky parameterization of the colored cone.

``K = Phi^T Phi`` with ``Phi`` upper triangular, ``D^{-1} = Q^T Q`` and
``Psi = Phi Q^{-1}``. Only the entries of ``Phi`` / ``Psi`` at the class
representatives are free; everything else is filled row by row in
lexicographic order so that ``K`` has the graph's zero pattern and is
constant on every color class.

The core routine works on a leading batch axis so that many Markov chains
(or many importance draws) are completed in one pass.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from .colored_graph import FreeEntryMap
from .errors import DimensionMismatch, DNotPositiveDefinite, NonpositiveDiagonal

TOL_EQ = 1e-8
TOL_ZERO = 1e-12

_FREE, _ZERO, _TIED = 0, 1, 2


def _plan(fmap: FreeEntryMap) -> list[list[tuple[int, int, int]]]:
    """Per-row list of ``(s, kind, class)`` in lexicographic order."""
    cached = getattr(fmap, "_plan_cache", None)
    if cached is not None:
        return cached
    p = fmap.p
    rows = []
    for r in range(p):
        row = []
        for s in range(r, p):
            c = int(fmap.class_of[r, s])
            if c < 0:
                row.append((s, _ZERO, -1))
                continue
            ri, rj = fmap.free_set[c]
            if (ri - 1, rj - 1) == (r, s):
                row.append((s, _FREE, c))
            else:
                # the representative is a lexicographic minimum, so its
                # target value is known before any other class member
                assert (ri - 1, rj - 1) < (r, s), "representative does not precede member"
                row.append((s, _TIED, c))
        rows.append(row)
    object.__setattr__(fmap, "_plan_cache", rows)
    return rows


def complete_batch(
    free: np.ndarray,
    Q: np.ndarray | None,
    fmap: FreeEntryMap,
    tol_zero: float = TOL_ZERO,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Complete a batch of free-entry vectors.

    Parameters
    ----------
    free
        ``(B, n_free)`` values of ``Psi`` at ``fmap.free_set``.
    Q
        ``(p, p)`` or ``(B, p, p)`` upper factor of ``D^{-1}``; ``None``
        means the identity, in which case ``Psi == Phi``.
    fmap
        Free-entry map of the colored graph.

    Returns
    -------
    psi, phi : ndarray
        ``(B, p, p)`` completed upper-triangular factors.
    ok : ndarray of bool
        ``False`` where a completed diagonal radicand was ``<= tol_zero``;
        the corresponding factors are placeholders.
    """
    free = np.atleast_2d(np.asarray(free, dtype=float))
    B, m = free.shape
    p = fmap.p
    if m != fmap.n_free:
        raise DimensionMismatch(f"expected {fmap.n_free} free values, got {m}")
    if Q is None:
        Qb = np.broadcast_to(np.eye(p), (B, p, p))
    else:
        Q = np.asarray(Q, dtype=float)
        if Q.shape[-2:] != (p, p):
            raise DimensionMismatch(f"Q has shape {Q.shape}, expected (..., {p}, {p})")
        Qb = np.broadcast_to(Q, (B, p, p))

    psi = np.zeros((B, p, p))
    phi = np.zeros((B, p, p))
    target = np.zeros((B, m))
    ok = np.ones(B, dtype=bool)

    for r, row in enumerate(_plan(fmap)):
        # K_rs - Phi_rr Phi_rs for all s >= r, from rows already completed
        partial = np.einsum("bk,bks->bs", phi[:, :r, r], phi[:, :r, r:])
        for s, kind, c in row:
            off = s - r
            if kind == _FREE:
                psi[:, r, s] = free[:, c]
                phi_rs = np.einsum("bj,bj->b", psi[:, r, r : s + 1], Qb[:, r : s + 1, s])
                phi[:, r, s] = phi_rs
                target[:, c] = partial[:, off] + phi[:, r, r] * phi_rs
                continue
            t = 0.0 if kind == _ZERO else target[:, c]
            if r == s:
                rad = t - partial[:, 0]
                bad = ~(rad > tol_zero)
                ok &= ~bad
                phi_rr = np.sqrt(np.where(bad, 1.0, rad))
                phi[:, r, r] = phi_rr
                psi[:, r, r] = phi_rr / Qb[:, r, r]
            else:
                phi_rs = (t - partial[:, off]) / phi[:, r, r]
                phi[:, r, s] = phi_rs
                acc = np.einsum("bj,bj->b", psi[:, r, r:s], Qb[:, r:s, s])
                psi[:, r, s] = (phi_rs - acc) / Qb[:, s, s]
    return psi, phi, ok


def complete(free: np.ndarray, Q: np.ndarray | None, fmap: FreeEntryMap) -> tuple[np.ndarray, np.ndarray]:
    """Complete one free vector; returns ``(psi, phi)``.

    Raises :class:`NonpositiveDiagonal` when the free values are not the
    coordinates of any matrix in the colored cone.
    """
    free = np.asarray(free, dtype=float)
    if free.ndim != 1:
        raise DimensionMismatch("complete() takes a single free vector; use complete_batch")
    if free.size != fmap.n_free:
        raise DimensionMismatch(f"expected {fmap.n_free} free values, got {free.size}")
    if np.any(_free_diag_values(free, fmap) <= 0):
        raise NonpositiveDiagonal("free diagonal values must be positive")
    psi, phi, ok = complete_batch(free[None, :], Q, fmap)
    if not ok[0]:
        raise NonpositiveDiagonal("completed diagonal radicand is not positive")
    return psi[0], phi[0]


def complete_phi(free_phi: np.ndarray, fmap: FreeEntryMap) -> np.ndarray:
    """Cholesky factor ``Phi`` of the colored matrix with the given free entries."""
    return complete(free_phi, None, fmap)[1]


def complete_psi(free_psi: np.ndarray, Q: np.ndarray, fmap: FreeEntryMap) -> np.ndarray:
    """Scaled factor ``Psi`` with the given free entries, for a fixed ``Q``."""
    return complete(free_psi, Q, fmap)[0]


def _free_diag_values(free: np.ndarray, fmap: FreeEntryMap) -> np.ndarray:
    mask = fmap.free_rows == fmap.free_cols
    return free[..., mask]


def extract_free(M: np.ndarray, fmap: FreeEntryMap) -> np.ndarray:
    """Entries of ``M`` (or a stack of matrices) at the free positions."""
    M = np.asarray(M)
    return M[..., fmap.free_rows, fmap.free_cols]


def upper_cholesky(K: np.ndarray) -> np.ndarray:
    """Upper factor ``Phi`` with ``K = Phi^T Phi``."""
    return np.linalg.cholesky(K).T


def scale_factor(D: np.ndarray) -> np.ndarray:
    """Upper-triangular ``Q`` with ``D^{-1} = Q^T Q``.

    ``D`` is factored as ``U U^T`` with ``U`` upper triangular (a Cholesky
    factorization of ``D`` with rows and columns reversed) and ``Q = U^{-1}``,
    so ``D`` itself is never inverted.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DimensionMismatch(f"D must be square, got shape {D.shape}")
    try:
        L = np.linalg.cholesky(D[::-1, ::-1])
    except np.linalg.LinAlgError as exc:
        raise DNotPositiveDefinite("D is not positive definite") from exc
    U = L[::-1, ::-1]
    return solve_triangular(U, np.eye(D.shape[0]), lower=False)


def reconstruct_k(psi: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``K = Q^T Psi^T Psi Q``, symmetrized so it is exactly symmetric."""
    psi = np.asarray(psi, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if psi.shape[-2:] != Q.shape[-2:] or psi.shape[-1] != psi.shape[-2]:
        raise DimensionMismatch(f"shapes {psi.shape} and {Q.shape} are not conformable")
    phi = psi @ Q
    K = np.swapaxes(phi, -1, -2) @ phi
    return 0.5 * (K + np.swapaxes(K, -1, -2))


def is_in_cone(K: np.ndarray, fmap: FreeEntryMap, tol_eq: float = TOL_EQ) -> bool:
    """Positive definite, zero off the graph, constant on every color class."""
    K = np.asarray(K, dtype=float)
    if K.shape != (fmap.p, fmap.p):
        raise DimensionMismatch(f"K has shape {K.shape}, graph has p={fmap.p}")
    if not np.allclose(K, K.T, rtol=0.0, atol=tol_eq):
        return False
    cls = fmap.class_of
    if np.any(np.abs(K[cls < 0]) > tol_eq):
        return False
    rep_vals = extract_free(K, fmap)
    if np.any(np.abs(K[cls >= 0] - rep_vals[cls[cls >= 0]]) > tol_eq):
        return False
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return False
    return True


def log_jacobian_k_to_phi(phi: np.ndarray, fmap: FreeEntryMap) -> float:
    """``log det d(K^{v(G)}) / d(Phi^{v(G)})``."""
    p = fmap.p
    i = np.arange(1, p + 1)
    expo = p - i + 1 - fmap.v_counts
    return fmap.n_vertex_classes * math.log(2.0) + float(np.sum(expo * np.log(np.diag(phi))))


def log_jacobian_phi_to_psi(Q: np.ndarray, fmap: FreeEntryMap) -> float:
    """``log det d(Phi^{v(G)}) / d(Psi^{v(G)})``; depends on ``Q`` only."""
    i = np.arange(1, fmap.p + 1)
    return float(np.sum((i - fmap.d_counts) * np.log(np.diag(Q))))


def log_density_psi(psi: np.ndarray, Q: np.ndarray, delta: float, fmap: FreeEntryMap) -> float:
    """Unnormalized log density of the colored G-Wishart in Psi coordinates.

    The normalizing constant is left out; everything else, including the
    ``Q``-dependent factor and the ``2^{|V|}`` term, is kept.
    """
    p = fmap.p
    dpsi = np.diag(psi)
    if np.any(dpsi <= 0):
        raise NonpositiveDiagonal("Psi has a nonpositive diagonal entry")
    i = np.arange(1, p + 1)
    v, d = fmap.v_counts, fmap.d_counts
    out = fmap.n_vertex_classes * math.log(2.0)
    out += np.sum((p - v - d + delta - 1) * np.log(np.diag(Q)))
    out += np.sum((p - i - v + delta - 1) * np.log(dpsi))
    out -= 0.5 * np.sum(np.triu(psi) ** 2)
    return float(out)


def log_density_k(K: np.ndarray, D: np.ndarray, delta: float) -> float:
    """``(delta - 2)/2 log|K| - <K, D>/2`` (no normalizing constant)."""
    sign, logdet = np.linalg.slogdet(K)
    if sign <= 0:
        return -math.inf
    return 0.5 * (delta - 2) * logdet - 0.5 * float(np.sum(K * D))


def project_to_colored(S: np.ndarray, fmap: FreeEntryMap) -> np.ndarray:
    """Orthogonal projection (trace inner product) onto the colored span.

    Each class value becomes the average of ``S`` over all cells of the
    class, counting both triangles for edge classes; non-edges become zero.
    """
    S = np.asarray(S, dtype=float)
    if S.shape != (fmap.p, fmap.p):
        raise DimensionMismatch(f"S has shape {S.shape}, graph has p={fmap.p}")
    cls = fmap.class_of
    mask = cls >= 0
    sums = np.bincount(cls[mask], weights=S[mask], minlength=fmap.n_free)
    avg = sums / fmap.multiplicity()
    out = np.zeros_like(S)
    out[mask] = avg[cls[mask]]
    return out


def colored_matrix(values: np.ndarray, fmap: FreeEntryMap) -> np.ndarray:
    """Symmetric matrix whose class ``c`` cells all equal ``values[c]``."""
    values = np.asarray(values, dtype=float)
    cls = fmap.class_of
    out = np.zeros((fmap.p, fmap.p))
    out[cls >= 0] = values[cls[cls >= 0]]
    return out
