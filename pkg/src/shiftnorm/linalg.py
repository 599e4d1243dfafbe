"""Operator norms and extremal eigenpairs of Hermitian pencils."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

DENSE_LIMIT = 2500
EIG_TOL = 1e-9
EIG_MAXITER = 5000
KERNEL_RTOL = 1e-10
BLOCK_LIMIT = 64


class EigenConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class SingularGramError(ValueError):
    pass


def power_norm(apply, apply_adjoint, size: int, iterations: int = 50, seed: int = 0,
               dtype=complex) -> float:
    """Estimate ``||X||_2`` by power iteration on ``X^* X``.

    The estimate never exceeds the true norm (up to rounding).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(size)
    if np.issubdtype(dtype, np.complexfloating):
        x = x + 1j * rng.standard_normal(size)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iterations):
        y = apply(x)
        sigma = float(np.linalg.norm(y))
        if sigma == 0.0:
            return 0.0
        x = apply_adjoint(y)
        x /= np.linalg.norm(x)
    return float(np.linalg.norm(apply(x)))


def dense_norm(M) -> float:
    """Spectral norm through a dense SVD; for oracle-scale matrices only."""
    if sp.issparse(M):
        M = M.toarray()
    return float(np.linalg.norm(M, 2))


@dataclass
class PencilExtremes:
    lam_min: float
    lam_max: float
    v_min: np.ndarray
    v_max: np.ndarray
    residual: float
    kernel_dim: int
    method: str


def _is_positive_diagonal(H) -> bool:
    if not sp.issparse(H):
        return False
    H = H.tocsr()
    d = H.diagonal()
    return H.nnz == np.count_nonzero(d) and np.all(d > 0)


def _kernel(H, scale: float, dense: bool, max_dim: int = 8) -> np.ndarray:
    N = H.shape[0]
    k = min(max_dim, N - 1)
    if dense:
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, V = la.eigh(Hd, subset_by_index=[0, k - 1])
    else:
        w, V = spla.eigsh(H.tocsc(), k=k, sigma=-1e-6 * scale, which="LM")
        order = np.argsort(w)
        w, V = w[order], V[:, order]
    Z = V[:, w < KERNEL_RTOL * scale]
    if Z.shape[1] == k:
        raise SingularGramError("Gram matrix kernel is too large; grid too coarse")
    return Z


def _inf_norm(A) -> float:
    return float(abs(A).sum(axis=1).max()) if A.nnz else 0.0


def _residual(S, H, lam, v) -> float:
    """``|S v - lam H v| / ((|S| + |lam| |H|) |v|)`` with infinity-norm bounds."""
    den = max((_inf_norm(S) + abs(lam) * _inf_norm(H)) * np.linalg.norm(v), 1e-300)
    return float(np.linalg.norm(S @ v - lam * (H @ v)) / den)


def _rank_update(A, Z, c):
    """``A + c Z Z^T`` as an operator, without forming the dense product."""
    if Z.shape[1] == 0 or c == 0:
        return A
    return spla.LinearOperator(A.shape, matvec=lambda x: A @ x + c * (Z @ (Z.T @ x)), dtype=float)


def _bordered_solver(K, Z, c):
    """Solve ``(K + c Z Z^T) x = b`` exactly through a bordered sparse LU.

    ``[[K, Z], [Z^T, -1/c]] [x, y] = [b, 0]`` gives ``y = c Z^T x`` and hence
    the rank-updated system, while keeping the factorised matrix sparse.
    """
    N, k = Z.shape
    if k == 0:
        return spla.splu(sp.csc_matrix(K)).solve
    Kb = sp.bmat([[K, sp.csr_matrix(Z)], [sp.csr_matrix(Z.T), -sp.identity(k) / c]]).tocsc()
    lu = spla.splu(Kb)
    pad = np.zeros(k)
    return lambda b: lu.solve(np.concatenate([b, pad]))[:N]


def _blockwise(S, H, labels: np.ndarray, ncomp: int):
    """Extremes of a block-diagonal pencil from batched dense solves of its blocks.

    Returns ``None`` if some block of ``H`` is not positive definite.
    """
    N = S.shape[0]
    sizes = np.bincount(labels, minlength=ncomp)
    order = np.argsort(labels, kind="stable")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    pos = np.empty(N, dtype=np.int64)
    pos[order] = np.arange(N) - np.repeat(starts, sizes)
    lo = (np.inf, None)
    hi = (-np.inf, None)
    for size in np.unique(sizes):
        comps = np.flatnonzero(sizes == size)
        rank = np.full(ncomp, -1)
        rank[comps] = np.arange(comps.size)

        def blocks(A):
            C = A.tocoo()
            b = rank[labels[C.row]]
            keep = b >= 0
            out = np.zeros((comps.size, size, size))
            np.add.at(out, (b[keep], pos[C.row[keep]], pos[C.col[keep]]), C.data[keep])
            return out

        try:
            Lc = np.linalg.cholesky(blocks(H))
        except np.linalg.LinAlgError:
            return None
        Li = np.linalg.inv(Lc)
        w, V = np.linalg.eigh(Li @ blocks(S) @ np.swapaxes(Li, 1, 2))
        for k, col, better in ((int(np.argmin(w[:, 0])), 0, lambda a, b: a < b),
                               (int(np.argmax(w[:, -1])), -1, lambda a, b: a > b)):
            lam = float(w[k, col])
            if better(lam, (lo if col == 0 else hi)[0]):
                v = np.zeros(N)
                members = order[starts[comps[k]]:starts[comps[k]] + size]
                v[members] = Li[k].T @ V[k, :, col]
                if col == 0:
                    lo = (lam, v)
                else:
                    hi = (lam, v)
    return lo, hi


def extremal_pencil_eigs(S, H, dense_limit: int = DENSE_LIMIT, tol: float = EIG_TOL,
                         maxiter: int = EIG_MAXITER, seed: int = 0,
                         split_blocks: bool = True) -> PencilExtremes:
    """Smallest and largest eigenvalues of ``S v = lam H v``.

    ``S`` and ``H`` are real symmetric positive semi-definite.  A kernel of
    ``H`` is allowed only if ``S`` vanishes on it too; the pencil is then
    solved on the orthogonal complement of that common kernel.  Pencils
    that split into small diagonal blocks are solved block by block; other
    sizes up to ``dense_limit`` use a dense solver; larger ones use Lanczos for the top
    eigenvalue and shift-invert Lanczos for the bottom one.
    """
    N = S.shape[0]
    S = sp.csr_matrix(S)
    H = sp.csr_matrix(H)
    ncomp, labels = connected_components(abs(S) + abs(H), directed=False)
    if split_blocks and ncomp > 1 and np.bincount(labels).max() <= BLOCK_LIMIT:
        found = _blockwise(S, H, labels, ncomp)
        if found is not None:
            (lam_min, v_min), (lam_max, v_max) = found
            res = max(_residual(S, H, lam_max, v_max), _residual(S, H, lam_min, v_min))
            return PencilExtremes(lam_min=lam_min, lam_max=lam_max, v_min=v_min, v_max=v_max,
                                  residual=res, kernel_dim=0, method="blockwise")
    dense = N <= dense_limit
    scale = _inf_norm(H)
    if _is_positive_diagonal(H):
        Z = np.zeros((N, 0))
    else:
        Z = _kernel(H, scale, dense)
    if Z.shape[1]:
        leak = np.linalg.norm(S @ Z) / max(_inf_norm(S), 1e-300)
        if leak > 1e-8:
            raise SingularGramError("H is singular on fields where S is not")
    # Kernel directions get eigenvalue 0 for the max solve and lam_max for the min solve.
    hs = scale

    if dense:
        Sd, Hd = S.toarray(), H.toarray() + hs * (Z @ Z.T)
        w, V = la.eigh(Sd, Hd, subset_by_index=[N - 1, N - 1])
        lam_max, v_max = float(w[0]), V[:, 0]
        Sd_min = Sd + lam_max * hs * (Z @ Z.T)
        w, V = la.eigh(Sd_min, Hd, subset_by_index=[0, 0])
        lam_min, v_min = float(w[0]), V[:, 0]
        method = "dense"
    else:
        Hop = _rank_update(H, Z, hs)
        Hinv = spla.LinearOperator((N, N), matvec=_bordered_solver(H, Z, hs), dtype=float)
        rng = np.random.default_rng(seed)
        try:
            w, V = spla.eigsh(S, k=1, M=Hop, Minv=Hinv, which="LA", tol=tol,
                              maxiter=maxiter, v0=rng.standard_normal(N))
            lam_max, v_max = float(w[0]), V[:, 0]
            c = lam_max * hs
            delta = 1e-6 * max(lam_max, 1e-300)
            OPinv = spla.LinearOperator(
                (N, N), matvec=_bordered_solver(S + delta * H, Z, c + delta * hs), dtype=float)
            w, V = spla.eigsh(_rank_update(S, Z, c), k=1, M=Hop, sigma=-delta, OPinv=OPinv,
                              which="LM", tol=tol, maxiter=maxiter, v0=rng.standard_normal(N))
            lam_min, v_min = float(w[0]), V[:, 0]
        except spla.ArpackNoConvergence as exc:
            res = (max(_residual(S, H, lam, exc.eigenvectors[:, i])
                       for i, lam in enumerate(exc.eigenvalues)) if len(exc.eigenvalues) else 1.0)
            raise EigenConvergenceError("pencil eigen-iteration did not converge", res) from exc
        method = "arpack"

    res = max(_residual(S, H, lam_max, v_max), _residual(S, H, lam_min, v_min))
    if not dense and res > 1e3 * tol:
        raise EigenConvergenceError("pencil eigen-iteration did not converge", res)
    return PencilExtremes(lam_min=lam_min, lam_max=lam_max, v_min=v_min, v_max=v_max,
                          residual=res, kernel_dim=Z.shape[1], method=method)
