import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from shiftnorm.linalg import SingularGramError, dense_norm, extremal_pencil_eigs, power_norm


def spd(rng, n, cond=10.0):
    Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
    return Q @ np.diag(np.geomspace(1, cond, n)) @ Q.T


def test_power_norm_below_and_close_to_dense(rng):
    M = rng.normal(size=(40, 40)) + 1j * rng.normal(size=(40, 40))
    est = power_norm(lambda x: M @ x, lambda y: M.conj().T @ y, 40, iterations=500)
    exact = dense_norm(M)
    assert est <= exact * (1 + 1e-12)
    assert est == pytest.approx(exact, rel=1e-4)


@pytest.mark.parametrize("limit", [10_000, 0])
def test_pencil_matches_dense_oracle(rng, limit):
    n = 80
    S = spd(rng, n, 50.0)
    H = spd(rng, n, 5.0)
    w = la.eigh(S, H, eigvals_only=True)
    ext = extremal_pencil_eigs(sp.csr_matrix(S), sp.csr_matrix(H), dense_limit=limit)
    assert ext.lam_min == pytest.approx(w[0], rel=1e-8)
    assert ext.lam_max == pytest.approx(w[-1], rel=1e-8)
    assert ext.residual < 1e-8


def test_blockwise_path_agrees(rng):
    blocks_S = [spd(rng, 3, 4.0) for _ in range(30)]
    blocks_H = [np.eye(3) * 0.5 for _ in range(30)]
    S, H = sp.block_diag(blocks_S, format="csr"), sp.block_diag(blocks_H, format="csr")
    a = extremal_pencil_eigs(S, H)
    b = extremal_pencil_eigs(S, H, split_blocks=False)
    assert a.method == "blockwise" and b.method == "dense"
    assert a.lam_min == pytest.approx(b.lam_min, rel=1e-10)
    assert a.lam_max == pytest.approx(b.lam_max, rel=1e-10)


@pytest.mark.parametrize("limit", [10_000, 0])
def test_common_kernel_is_deflated(rng, limit):
    n = 60
    z = rng.normal(size=n)
    z /= np.linalg.norm(z)
    Pz = np.eye(n) - np.outer(z, z)
    S = Pz @ spd(rng, n, 20.0) @ Pz
    H = Pz @ spd(rng, n, 3.0) @ Pz
    Qc = la.null_space(z[None, :])
    w = la.eigh(Qc.T @ S @ Qc, Qc.T @ H @ Qc, eigvals_only=True)
    ext = extremal_pencil_eigs(sp.csr_matrix(S), sp.csr_matrix(H), dense_limit=limit)
    assert ext.kernel_dim == 1
    assert ext.lam_min == pytest.approx(w[0], rel=1e-7)
    assert ext.lam_max == pytest.approx(w[-1], rel=1e-7)


def test_kernel_of_H_only_is_rejected(rng):
    n = 30
    z = np.zeros(n)
    z[0] = 1
    H = np.eye(n) - np.outer(z, z)
    with pytest.raises(SingularGramError):
        extremal_pencil_eigs(sp.csr_matrix(spd(rng, n)), sp.csr_matrix(H))
