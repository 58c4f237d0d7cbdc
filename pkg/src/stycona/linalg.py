"""Dense SVD via one-sided (Hestenes) Jacobi rotations.

The factorization is computed in float64 with a parallel (round-robin) pair
ordering so each round of disjoint column rotations is a handful of
vectorized numpy operations. Signs and ordering are canonicalized so the
result is a deterministic function of the input bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInput, NumericalFailure

MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``m = u @ diag(sigma) @ v.T`` with ``k = min(rows, cols)``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape[0], self.v.shape[0]

    def rank(self, rtol: float = RANK_RTOL) -> int:
        """Count of singular values above ``rtol * sigma[0]``."""
        if self.k == 0 or self.sigma[0] == 0.0:
            return 0
        return int(np.count_nonzero(self.sigma > rtol * self.sigma[0]))


def as_matrix(m) -> np.ndarray:
    """Validate ``m`` and return it as a float64 2-D array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInput(f"expected a 2-D matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(f"matrix dimensions must be positive, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix contains NaN or Inf")
    return a


@lru_cache(maxsize=64)
def _rounds(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    # circle-method tournament: every pair (p, q) meets exactly once per sweep
    players = list(range(n + (n % 2)))
    size = len(players)
    out = []
    for _ in range(size - 1):
        p, q = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        if p:
            out.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return tuple(out)


def _floor(a: np.ndarray) -> float:
    # squared column norms this small are roundoff; rotating them only churns subnormals
    return float(np.finfo(np.float64).tiny / np.finfo(np.float64).eps) * max(1.0, float(np.abs(a).max()) ** 2)


def _jacobi(a: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonalize the columns of ``a`` (rows >= cols).

    Returns ``(w, v)`` stored row-wise: ``w[j]`` is column j of ``a @ v`` and
    ``v[j]`` is column j of the accumulated rotation.
    """
    n = a.shape[1]
    w = np.array(a.T, order="C")
    v = np.eye(n)
    rounds = _rounds(n)
    for _ in range(MAX_SWEEPS):
        rotated = False
        for p, q in rounds:
            wp, wq = w[p], w[q]
            alpha = np.einsum("ij,ij->i", wp, wp)
            beta = np.einsum("ij,ij->i", wq, wq)
            gamma = np.einsum("ij,ij->i", wp, wq)
            # product of square roots: alpha * beta underflows for roundoff-level columns
            active = np.abs(gamma) > JACOBI_TOL * (np.sqrt(alpha) * np.sqrt(beta))
            active &= np.minimum(alpha, beta) > floor
            if not active.any():
                continue
            rotated = True
            if not active.all():
                p, q = p[active], q[active]
                wp, wq = wp[active], wq[active]
                alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = (c * t)[:, None]
            c = c[:, None]
            w[p], w[q] = c * wp - s * wq, s * wp + c * wq
            vp, vq = v[p], v[q]
            v[p], v[q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            return w, v
    raise NumericalFailure(f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")


def _complete_basis(cols: np.ndarray, missing: np.ndarray) -> None:
    """Fill columns flagged in ``missing`` with unit vectors orthogonal to the rest."""
    m = cols.shape[0]
    basis = [cols[:, j] for j in range(cols.shape[1]) if not missing[j]]
    fill = iter(np.flatnonzero(missing))
    target = next(fill, None)
    for e in range(m):
        if target is None:
            break
        x = np.zeros(m)
        x[e] = 1.0
        for _ in range(2):
            for b in basis:
                x -= (b @ x) * b
        nrm = np.linalg.norm(x)
        if nrm < 0.5:
            continue
        x /= nrm
        cols[:, target] = x
        basis.append(x)
        target = next(fill, None)


def svd(m) -> SvdFactors:
    """Thin SVD of a real matrix with non-increasing singular values.

    For every column r the largest-magnitude entry of ``u[:, r]`` is made
    non-negative (first such entry on ties); ``v[:, r]`` is flipped with it.
    """
    a = as_matrix(m)
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T
    floor = _floor(a)
    w, vrows = _jacobi(a, floor)
    norms2 = np.einsum("ij,ij->i", w, w)
    # sub-floor columns were never rotated against the rest; their direction is noise
    sigma = np.where(norms2 > floor, np.sqrt(norms2), 0.0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    w = w[order]
    vcols = vrows[order].T.copy()

    zero = sigma == 0.0
    ucols = np.zeros((a.shape[0], sigma.shape[0]))
    ucols[:, ~zero] = (w[~zero] / sigma[~zero, None]).T
    if zero.any():
        _complete_basis(ucols, zero)
    if not (np.all(np.isfinite(ucols)) and np.all(np.isfinite(vcols))):
        raise NumericalFailure("SVD produced non-finite factors")

    if transposed:
        ucols, vcols = vcols, ucols
    lead = np.argmax(np.abs(ucols), axis=0)
    flip = ucols[lead, np.arange(ucols.shape[1])] < 0
    ucols[:, flip] *= -1.0
    vcols[:, flip] *= -1.0
    return SvdFactors(u=ucols, sigma=sigma, v=vcols)


def _check(f: SvdFactors) -> None:
    if f.u.ndim != 2 or f.v.ndim != 2 or f.sigma.ndim != 1:
        raise InvalidInput("factors must be u (rows x k), sigma (k,), v (cols x k)")
    if f.u.shape[1] != f.k or f.v.shape[1] != f.k:
        raise InvalidInput(
            f"factor dimensions disagree: u {f.u.shape}, sigma {f.sigma.shape}, v {f.v.shape}"
        )


def reconstruct(f: SvdFactors) -> np.ndarray:
    """Return ``sum_r sigma[r] * outer(u[:, r], v[:, r])``."""
    _check(f)
    return (f.u * f.sigma) @ f.v.T


def rank_one(f: SvdFactors, r: int) -> np.ndarray:
    """Unscaled outer product of the r-th singular-vector pair."""
    _check(f)
    if not 0 <= r < f.k:
        raise InvalidInput(f"index {r} out of range for k={f.k}")
    return np.outer(f.u[:, r], f.v[:, r])
