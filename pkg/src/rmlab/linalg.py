"""Covariance construction, the one- and two-step estimators, and eigensolvers.

The estimators never form W: with column sums ``s_k = sum_i X[i, k]`` the row
sums of W = X X^T / n are ``W @ 1 = X @ s / n`` and ``1^T W 1 = |s|^2 / n``, so
both are O(pn).
"""

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DegenerateDenominator, EmptyInput, NoConvergence, SizeExceeded

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000
DEFAULT_SIZE_LIMIT = 1024


@dataclass(frozen=True)
class RowSumVector:
    values: np.ndarray
    total: float


@dataclass(frozen=True)
class EigenPairTop:
    lambda1: float
    lambda2: float
    v1: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True)
class OnesDecomposition:
    v_component: np.ndarray
    r: np.ndarray
    r_norm_sq: float
    identity_residual: float


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise EmptyInput(f"expected a non-empty 2-d matrix, got shape {X.shape}")
    return X


def _mirror_upper(G):
    upper = np.triu(G)
    return upper + np.triu(upper, 1).T


def covariance(X):
    """W = X X^T / n, made exactly symmetric by mirroring the upper triangle."""
    X = _as_matrix(X)
    return _mirror_upper(X @ X.T / X.shape[1])


def gram(X):
    """The smaller of X X^T / n and X^T X / n. Both share their nonzero spectrum."""
    X = _as_matrix(X)
    p, n = X.shape
    if p <= n:
        return covariance(X)
    return _mirror_upper(X.T @ X / n)


def row_sums(X):
    X = _as_matrix(X)
    n = X.shape[1]
    col = X.sum(axis=0)
    return RowSumVector(values=X @ col / n, total=float(col @ col) / n)


def estimator_one(X):
    """One power step from the all-ones vector: sum of row sums of W over p."""
    X = _as_matrix(X)
    p, n = X.shape
    col = X.sum(axis=0)
    return float(col @ col) / (n * p)


def estimator_two(X):
    """Two power steps: |W 1|^2 / (1, W 1)."""
    X = _as_matrix(X)
    rs = row_sums(X)
    if abs(rs.total) < 1e-12 * X.shape[0]:
        raise DegenerateDenominator(f"row-sum total {rs.total!r} is numerically zero")
    return float(rs.values @ rs.values) / rs.total


def _power(G, x, tol, max_iter, deflate=None, scale=None):
    """Power iteration on symmetric G from x, optionally orthogonal to ``deflate``.

    Iterates are scaled by their largest entry, so an exact eigenvector with
    representable entries (e.g. the all-ones vector of a constant matrix)
    stays exact. Converged when the Rayleigh quotient moves by at most
    tol * |rho| and |G x - rho x| <= tol * scale * |x| (scale defaults to
    |rho|). Returns (rho, unit x, iterations).
    """
    dot = np.dot
    if deflate is not None:
        x = x - dot(deflate, x) * deflate
    peak = np.max(np.abs(x))
    if peak == 0.0:
        return 0.0, x, 0
    x = x / peak
    rho_prev = np.inf
    for it in range(1, max_iter + 1):
        y = G @ x
        if deflate is not None:
            y -= dot(deflate, y) * deflate
        xx = dot(x, x)
        rho = float(dot(x, y) / xx)
        if abs(rho - rho_prev) <= tol * abs(rho):
            res = y - rho * x
            limit = tol * (abs(rho) if scale is None else scale)
            if dot(res, res) <= limit * limit * xx:
                return rho, x / np.sqrt(xx), it
        peak = np.max(np.abs(y))
        if peak == 0.0:
            # x lies in the null space of the (deflated) operator
            return 0.0, x / np.sqrt(xx), it
        rho_prev = rho
        x = y / peak
    raise NoConvergence(max_iter)


def _to_p_side(X, u):
    """Map an eigenvector of X^T X / n to the matching one of X X^T / n."""
    v = X @ u
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.full(X.shape[0], 1.0 / np.sqrt(X.shape[0]))
    return v / norm


def _default_start(X):
    p, n = X.shape
    if p <= n:
        return np.ones(p)
    start = X.T @ np.ones(p)
    return start if np.any(start) else np.ones(n)


def top_eigenpair(X, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, start=None):
    """Largest eigenvalue of W = X X^T / n and its unit eigenvector (p side).

    Power iteration on the smaller Gram matrix, started from the all-ones
    vector on the p side unless ``start`` (a vector for the Gram side) is
    given. The eigenvector sign is chosen so that 1^T v >= 0.
    Returns (lambda1, v1, gram-side vector, iterations).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = _as_matrix(X)
    G = gram(X)
    x0 = _default_start(X) if start is None else np.asarray(start, dtype=np.float64)
    lam1, u1, iterations = _power(G, x0, tol, max_iter)
    v1 = u1 if X.shape[0] <= X.shape[1] else _to_p_side(X, u1)
    if v1.sum() < 0:
        v1 = -v1
    return max(lam1, 0.0), v1, u1, iterations


def top_two_eigenvalues(X, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, start=None):
    """Two largest eigenvalues of W = X X^T / n by power iteration and deflation.

    Iterates on the smaller Gram matrix. The second eigenvalue comes from
    iterating again with the first eigenvector projected out of every
    iterate. When W has a single nonzero direction (p == 1, rank one) the
    second eigenvalue is 0; tiny negative rounding is clipped to the PSD floor.
    """
    X = _as_matrix(X)
    p, n = X.shape
    lam1, v1, u1, it1 = top_eigenpair(X, tol, max_iter, start)
    G = gram(X)
    lam2, it2 = 0.0, 0
    if G.shape[0] > 1 and lam1 > 0.0:
        # fixed start with no special relation to the all-ones vector
        x0 = np.cos(np.arange(1, G.shape[0] + 1) * 1.618033988749895)
        lam2, _, it2 = _power(G, x0, tol, max_iter, deflate=u1, scale=lam1)
    residual = float(np.linalg.norm(X @ (X.T @ v1) / n - lam1 * v1))
    return EigenPairTop(
        lambda1=lam1,
        lambda2=min(max(lam2, 0.0), lam1),
        v1=v1,
        iterations=it1 + it2,
        residual=residual,
    )


def gram_eigenvalues(X):
    """All eigenvalues of the smaller Gram matrix, descending (LAPACK)."""
    return np.linalg.eigvalsh(gram(X))[::-1]


@numba.njit(cache=True)
def _jacobi_sweeps(A, m, tol, max_sweeps):
    """Cyclic Jacobi on the leading m x m block of A in place; returns sweeps used."""
    total = 0.0
    for i in range(m):
        for j in range(m):
            total += A[i, j] * A[i, j]
    threshold = tol * np.sqrt(total)
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(m):
            for j in range(m):
                if i != j:
                    off += A[i, j] * A[i, j]
        if np.sqrt(off) < threshold:
            return sweep
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # rows p, q are contiguous; columns are mirrored from them
                for k in range(m):
                    if k == p or k == q:
                        continue
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                    A[k, p] = A[p, k]
                    A[k, q] = A[q, k]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
    return max_sweeps


def full_spectrum(W, size_limit=DEFAULT_SIZE_LIMIT, max_sweeps=60):
    """All eigenvalues of symmetric W, descending, by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is below 1e-12 * |W|_F.
    """
    A = np.array(W, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.size == 0:
        raise EmptyInput(f"expected a non-empty square matrix, got shape {A.shape}")
    d = A.shape[0]
    if d > size_limit:
        raise SizeExceeded(f"dimension {d} exceeds size limit {size_limit}")
    # an odd row stride keeps column writes from thrashing a few cache sets
    work = np.zeros((d, d + 1 + d % 2))
    work[:, :d] = A
    _jacobi_sweeps(work, d, 1e-12, max_sweeps)
    return np.sort(np.diag(work[:, :d]))[::-1]


def decompose_ones(W, pair, l):
    """Split the all-ones vector along v1 and check the squared-norm identity.

    |W1 - l1|^2 = (lambda1 - l)^2 |v|^2 + |W r - l r|^2 with v = (1.v1) v1 for unit v1
    and r = 1 - v. ``identity_residual`` is the gap between the two sides,
    relative to the left side when that is nonzero.
    """
    W = np.asarray(W, dtype=np.float64)
    p = W.shape[0]
    ones = np.ones(p)
    v1 = np.asarray(pair.v1, dtype=np.float64)
    # project onto span(v1) through its max-entry scaling, so a direction with
    # equal entries reproduces 1 exactly instead of via 1/sqrt(p) rounding
    u = v1 / np.max(np.abs(v1))
    v = (ones @ u) / (u @ u) * u
    r = ones - v
    lhs_vec = W @ ones - l * ones
    lhs = float(lhs_vec @ lhs_vec)
    wr = W @ r - l * r
    rhs = (pair.lambda1 - l) ** 2 * float(v @ v) + float(wr @ wr)
    gap = abs(lhs - rhs)
    return OnesDecomposition(
        v_component=v,
        r=r,
        r_norm_sq=float(r @ r),
        identity_residual=gap / lhs if lhs > 0.0 else gap,
    )
