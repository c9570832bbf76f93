from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg

from conftest import stable_matrix
from pintconv import prop_norms
from pintconv.prop_norms import (CoarseBlockPair, PropagatorPair, ReducedBidiagonal,
                                 SingularBlockError, SizeGuardError,
                                 direct_norm_oracle, error_norm_f, error_norm_fcf,
                                 residual_norm_f, smallest_singular_value)


def scalar_pair(lam, mu, k, nc):
    return PropagatorPair(phi=np.array([[lam]]), psi=np.array([[mu]]), k=k, n_coarse=nc)


def test_single_interval_scalar_is_difference():
    pair = scalar_pair(0.8, 0.5, 3, 2)
    want = abs(0.5 - 0.8**3)
    assert residual_norm_f(pair) == pytest.approx(want, rel=1e-13)
    assert error_norm_f(pair) == pytest.approx(want, rel=1e-13)


def test_backward_euler_scalar_rational_value():
    # u' = -u, dt = 0.1: lam = 10/11, mu = 5/6, k = 2; exact value 5/726
    lam, mu = Fraction(10, 11), Fraction(5, 6)
    want = abs(mu - lam**2)
    assert want == Fraction(5, 726)
    pair = scalar_pair(float(lam), float(mu), 2, 2)
    assert residual_norm_f(pair) == pytest.approx(float(want), rel=1e-13)


def test_residual_norm_matches_oracle_matrix_case(rng):
    for _ in range(5):
        pair = PropagatorPair(phi=stable_matrix(rng, 3), psi=stable_matrix(rng, 3),
                              k=2, n_coarse=6)
        want = direct_norm_oracle(pair, "F", "residual")
        assert residual_norm_f(pair) == pytest.approx(want, rel=1e-10)


def test_error_and_residual_agree_time_independent_scalar(rng):
    for _ in range(20):
        lam = rng.uniform(-0.95, 0.95)
        mu = rng.uniform(-0.95, 0.95)
        pair = scalar_pair(lam, mu, 2, 7)
        assert error_norm_f(pair) == pytest.approx(residual_norm_f(pair), rel=1e-12)


def test_error_norm_time_dependent_scalar_vs_oracle(rng):
    for _ in range(10):
        nc = int(rng.integers(3, 8))
        phis = [np.array([[rng.uniform(-0.9, 0.9)]]) for _ in range(nc - 1)]
        psis = [np.array([[rng.uniform(-0.9, 0.9)]]) for _ in range(nc - 1)]
        pair = CoarseBlockPair(phi_products=phis, psis=psis)
        assert error_norm_f(pair) == pytest.approx(
            direct_norm_oracle(pair, "F", "error"), rel=1e-10)
        assert residual_norm_f(pair) == pytest.approx(
            direct_norm_oracle(pair, "F", "residual"), rel=1e-10)


def test_fcf_scalar_three_points():
    lam, mu, k = 0.7, 0.44, 2
    pair = scalar_pair(lam, mu, k, 3)
    want = abs(lam) ** k * abs(mu - lam**k)
    assert error_norm_fcf(pair) == pytest.approx(want, rel=1e-12)
    assert direct_norm_oracle(pair, "FCF", "error") == pytest.approx(want, rel=1e-12)


def test_fcf_matches_oracle(rng):
    for _ in range(10):
        nc = int(rng.integers(3, 7))
        pair = PropagatorPair(phi=stable_matrix(rng, 2), psi=stable_matrix(rng, 2),
                              k=3, n_coarse=nc)
        assert error_norm_fcf(pair) == pytest.approx(
            direct_norm_oracle(pair, "FCF", "error"), rel=1e-10)


def test_fcf_time_dependent_vs_oracle(rng):
    for _ in range(10):
        nc = int(rng.integers(3, 8))
        phis = [stable_matrix(rng, 2) for _ in range(nc - 1)]
        psis = [stable_matrix(rng, 2) for _ in range(nc - 1)]
        pair = CoarseBlockPair(phi_products=phis, psis=psis)
        assert error_norm_fcf(pair) == pytest.approx(
            direct_norm_oracle(pair, "FCF", "error"), rel=1e-10)


def test_fcf_contracts_relative_to_f_for_stable_scalars(rng):
    for _ in range(50):
        lam = rng.uniform(-0.99, 0.99)
        mu = rng.uniform(-0.99, 0.99)
        if abs(mu - lam**2) < 1e-12:
            continue
        pair = scalar_pair(lam, mu, 2, 5)
        assert error_norm_fcf(pair) <= error_norm_f(pair) * (1 + 1e-10)


def test_exact_coarse_operator_is_singular_case():
    # Psi equal to the k-step product: the closed form's difference blocks are
    # singular (reported distinctly); the dense oracle gives exactly zero
    phi = np.array([[0.9]])
    pair = PropagatorPair(phi=phi, psi=phi @ phi, k=2, n_coarse=4)
    with pytest.raises(SingularBlockError):
        residual_norm_f(pair)
    with pytest.raises(SingularBlockError):
        error_norm_fcf(pair)
    for relax in ("F", "FCF"):
        for quantity in ("error", "residual"):
            assert direct_norm_oracle(pair, relax, quantity) == pytest.approx(0.0, abs=1e-14)


def test_oracle_scalar_consistency_sweep(rng):
    for _ in range(50):
        lam = rng.uniform(-0.95, 0.95)
        mu = rng.uniform(-0.95, 0.95)
        k = int(rng.integers(1, 5))
        nc = int(rng.integers(2, 9))
        if abs(mu - lam**k) < 1e-10:
            continue
        pair = scalar_pair(lam, mu, k, nc)
        assert residual_norm_f(pair) == pytest.approx(
            direct_norm_oracle(pair, "F", "residual"), rel=1e-10)


def _full_fine_system(phi, n_time):
    n = phi.shape[0]
    A = np.eye(n_time * n)
    for l in range(1, n_time):
        A[l * n:(l + 1) * n, (l - 1) * n:l * n] = -phi
    return A


def test_residual_norm_equals_weighted_error_norm(rng):
    # || R_F || = || E_F ||_{A^*A}: residual propagation is the A-conjugated
    # error propagation of the full fine system
    n, k, nc = 1, 2, 3
    n_time = k * (nc - 1) + 1
    phi = stable_matrix(rng, n)
    psi = stable_matrix(rng, n)
    A_fine = _full_fine_system(phi, n_time)

    c_idx = [l for l in range(n_time) if l % k == 0]
    f_idx = [l for l in range(n_time) if l % k != 0]
    perm = f_idx + c_idx
    P = np.zeros((n_time, n_time))
    for new, old in enumerate(perm):
        P[old, new] = 1.0
    Pn = np.kron(P, np.eye(n))
    Ap = Pn.T @ A_fine @ Pn
    nf = len(f_idx) * n
    A_ff, A_fc = Ap[:nf, :nf], Ap[:nf, nf:]
    A_cf = Ap[nf:, :nf]

    pair = PropagatorPair(phi=phi, psi=psi, k=k, n_coarse=nc)
    phis, psis = pair.coarse_blocks()
    A_d = prop_norms._dense_coarse(phis)
    B_d = prop_norms._dense_coarse(psis)
    E_tilde = np.eye(nc * n) - np.linalg.solve(B_d, A_d)
    R_tilde = np.eye(nc * n) - np.linalg.solve(B_d.T, A_d.T).T

    top = -np.linalg.solve(A_ff, A_fc)
    E_full = np.vstack([top, np.eye(nc * n)]) @ np.hstack([np.zeros((nc * n, nf)), E_tilde])
    R_full = np.vstack([np.zeros((nf, nc * n)), R_tilde]) @ np.hstack(
        [-A_cf @ np.linalg.inv(A_ff), np.eye(nc * n)])

    lhs = scipy.linalg.svdvals(R_full)[0]
    rhs = scipy.linalg.svdvals(Ap @ E_full @ np.linalg.inv(Ap))[0]
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_ideal_interpolation_block_norm(rng):
    # leading term [ -A_ff^{-1} A_fc ; I ] per interval stacks I, Phi, ...,
    # Phi^{k-1}; its norm stays within k*(1+eps) for contractive Phi
    for _ in range(100):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(1, 6))
        phi = stable_matrix(rng, n, radius=rng.uniform(0.2, 1.0))
        stack = np.vstack([np.linalg.matrix_power(phi, j) for j in range(k)])
        assert scipy.linalg.svdvals(stack)[0] <= k * (1 + 1e-8)


def test_residual_norm_monotone_in_coarse_points():
    pair_vals = [residual_norm_f(scalar_pair(0.9, 0.7, 2, nc)) for nc in range(2, 11)]
    diffs = np.diff(pair_vals)
    assert np.all(diffs >= -1e-12)


def test_oracle_size_guard():
    pair = scalar_pair(0.5, 0.4, 2, 2)
    with pytest.raises(SizeGuardError):
        blocks = [np.eye(100)] * 50
        direct_norm_oracle(CoarseBlockPair(blocks, blocks), "F", "error")
    with pytest.raises(ValueError):
        direct_norm_oracle(pair, "F", "norm")
    with pytest.raises(ValueError):
        direct_norm_oracle(pair, "FC", "error")


def test_smallest_singular_value_iterative_branch(rng, monkeypatch):
    M = rng.standard_normal((60, 60)) + 5 * np.eye(60)
    dense = smallest_singular_value(M)
    monkeypatch.setattr(prop_norms, "DENSE_SVD_LIMIT", 10)
    iterative = smallest_singular_value(M)
    assert iterative == pytest.approx(dense, rel=1e-8)


def test_propagator_pair_validation():
    with pytest.raises(ValueError):
        PropagatorPair(phi=np.eye(2), psi=np.eye(3), k=2, n_coarse=4)
    with pytest.raises(ValueError):
        PropagatorPair(phi=np.eye(2), psi=np.eye(2), k=2, n_coarse=1)
    with pytest.raises(ValueError):
        CoarseBlockPair(phi_products=[np.eye(2)], psis=[])


def test_reduced_bidiagonal_assembly():
    op = ReducedBidiagonal(diag_blocks=[np.eye(2), 2 * np.eye(2)],
                           sub_blocks=[3 * np.eye(2)], layout="residual_F")
    M = op.assemble()
    assert M.shape == (4, 4)
    assert M[2, 0] == 3.0 and M[3, 3] == 2.0 and M[0, 2] == 0.0
    assert op.norm() == pytest.approx(1.0 / smallest_singular_value(M))
    with pytest.raises(ValueError):
        ReducedBidiagonal(diag_blocks=[np.eye(2)], sub_blocks=[np.eye(2)],
                          layout="error_F")
