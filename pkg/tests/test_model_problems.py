import numpy as np
import pytest
import scipy.linalg
import scipy.sparse

from pintconv.model_problems import (EIG_DIM_LIMIT, SpatialProblem,
                                     build_advection_diffusion, build_wave_first_order,
                                     dirichlet_laplacian_eigenvalues, ensure_eigendata,
                                     forcing, forcing_vector, velocity_field,
                                     wave_eigensystem, wave_initial_condition,
                                     wave_mode_operators, wave_mode_transform)


def test_pure_diffusion_is_symmetric_positive_definite():
    prob = build_advection_diffusion(8, "zero", 0.5)
    L = np.asarray(prob.L)
    assert np.array_equal(L, L.T)  # entrywise symmetric by construction
    xi = prob.eigendata.values
    assert np.all(np.abs(xi.imag) < 1e-12)
    assert np.all(xi.real > 0)


def test_translation_field_is_defective():
    prob = build_advection_diffusion(16, "v1", 0.0)
    U = prob.eigendata.vectors
    s = np.linalg.svd(U, compute_uv=False)
    assert s[0] / s[-1] > 1e8


def test_recirculating_field_is_well_conditioned():
    prob = build_advection_diffusion(16, "v3", 0.0)
    U = prob.eigendata.vectors
    s = np.linalg.svd(U, compute_uv=False)
    assert s[0] / s[-1] < 1e6


def test_eigendata_residual():
    prob = build_advection_diffusion(8, "v2", 0.1 / 8)
    L = np.asarray(prob.L)
    U, xi = prob.eigendata.vectors, prob.eigendata.values
    assert np.linalg.norm(L @ U - U @ np.diag(xi)) <= 1e-8 * np.linalg.norm(L)


def test_grid_and_coefficient_validation():
    with pytest.raises(ValueError):
        build_advection_diffusion(3, "v1", 0.0)
    with pytest.raises(ValueError):
        build_advection_diffusion(8, "v1", -1.0)
    with pytest.raises(ValueError):
        build_advection_diffusion(8, "v9", 0.0)
    with pytest.raises(ValueError):
        build_wave_first_order(4)


def test_velocity_fields_closed_forms():
    v1 = velocity_field("v1").components(np.array([0.3]), np.array([0.7]))
    assert v1[0][0] == pytest.approx(np.sqrt(2 / 3)) and v1[1][0] == pytest.approx(np.sqrt(1 / 3))
    x, y = np.array([0.25, 0.5]), np.array([0.75, 0.5])
    vx, vy = velocity_field("v3").components(x, y)
    # rigid rotation about the domain center, divergence-free
    assert np.allclose(vx, (y - 0.5) * np.pi / 2)
    assert np.allclose(vy, -(x - 0.5) * np.pi / 2)
    assert vx[1] == 0.0 and vy[1] == 0.0


def test_eigendata_guard(monkeypatch):
    prob = build_advection_diffusion(8, "v1", 0.0, compute_eig=False)
    assert prob.eigendata is None
    monkeypatch.setattr("pintconv.model_problems.EIG_DIM_LIMIT", 10)
    with pytest.raises(ValueError, match="dimension"):
        ensure_eigendata(prob)


def test_wave_operator_structure():
    prob = build_wave_first_order(9, 10.0)
    L = prob.L
    assert scipy.sparse.issparse(L)
    assert L.diagonal().sum() == 0.0
    n = prob.mesh.n_per_dim ** 2
    assert (L[:n, :n] != 0).nnz == 0  # zero upper-left block


def test_wave_spectrum_is_purely_imaginary_conjugate_pairs():
    prob = build_wave_first_order(41, 10.0)
    xi = prob.eigendata.values
    assert np.all(np.abs(xi.real) <= 1e-10 * np.abs(xi))
    assert np.allclose(np.sort(xi.imag), -np.sort(xi.imag)[::-1])


@pytest.mark.parametrize("m", [9, 15, 21])
def test_wave_numeric_spectrum_matches_analytic(m):
    # oracle: dense eigendecomposition of the assembled operator
    prob = build_wave_first_order(m, 10.0)
    numeric = np.linalg.eigvals(prob.L.toarray())
    analytic = prob.eigendata.values
    assert np.allclose(np.sort(np.abs(numeric)), np.sort(np.abs(analytic)), rtol=1e-6)
    # smallest magnitude equals c*sqrt of the 2D 5-point eigenvalue formula
    h = prob.mesh.h
    lam_min = 2.0 * (4.0 / h**2) * np.sin(np.pi * h / (2 * 2 * np.pi)) ** 2
    assert np.min(np.abs(analytic)) == pytest.approx(np.sqrt(10.0 * lam_min), rel=1e-12)


def test_wave_eigensystem_pairs_and_gram():
    prob = build_wave_first_order(11, 10.0)
    es = wave_eigensystem(prob)
    L = prob.L.toarray()
    R = L @ es.vectors - es.vectors * es.values[None, :]
    norms = np.linalg.norm(R, axis=0)
    assert np.all(norms <= 1e-8 * np.linalg.norm(es.vectors, axis=0))

    n = prob.mesh.n_per_dim ** 2
    expected = np.zeros((2 * n, 2 * n), dtype=complex)
    for l, z in enumerate(es.zeta):
        r = (1 - z) / (1 + z)
        expected[2 * l, 2 * l] = expected[2 * l + 1, 2 * l + 1] = 1.0
        expected[2 * l, 2 * l + 1] = expected[2 * l + 1, 2 * l] = r
    assert np.max(np.abs(es.gram - expected)) < 1e-10

    # 2x2 block spectra: {2 zeta/(1+zeta), 2/(1+zeta)}
    for l in (0, n // 2, n - 1):
        block = es.gram[2 * l:2 * l + 2, 2 * l:2 * l + 2]
        ev = np.sort(np.linalg.eigvalsh(block.real))
        z = es.zeta[l]
        want = np.sort([2 * z / (1 + z), 2 / (1 + z)])
        assert np.allclose(ev, want, rtol=1e-12)


def test_wave_eigensystem_kind_check():
    prob = build_advection_diffusion(8, "v1", 0.0, compute_eig=False)
    with pytest.raises(ValueError, match="wave_first_order"):
        wave_eigensystem(prob)


def test_mode_transform_block_diagonalizes():
    prob = build_wave_first_order(7, 10.0)
    Q = wave_mode_transform(prob)
    assert np.max(np.abs(Q.T @ Q - np.eye(Q.shape[0]))) < 1e-13
    Ld = Q.T @ prob.L.toarray() @ Q
    Lb = scipy.linalg.block_diag(*wave_mode_operators(prob))
    assert np.max(np.abs(Ld - Lb)) < 1e-12


def test_initial_condition_is_single_sine_mode():
    prob = build_wave_first_order(9, 10.0)
    u0 = wave_initial_condition(prob)
    L = prob.L.toarray()
    n = prob.mesh.n_per_dim ** 2
    # u = sin(x)sin(y) is a Laplacian eigenvector: L[u;0] = [0; c^2 P u] parallel to [0; u]
    w = u0[:n]
    out = L @ u0
    assert np.linalg.norm(out[:n]) == 0.0
    cross = out[n:] @ w / (np.linalg.norm(out[n:]) * np.linalg.norm(w))
    assert abs(cross) == pytest.approx(1.0, abs=1e-12)


def test_laplacian_eigenvalue_formula():
    lam = dirichlet_laplacian_eigenvalues(5, 0.25)
    brute = np.sort(np.linalg.eigvalsh(
        (np.diag([2.0] * 5) - np.diag([1.0] * 4, 1) - np.diag([1.0] * 4, -1)) / 0.25**2))
    assert np.allclose(np.sort(lam), brute, rtol=1e-13)


def test_forcing_box_and_phase():
    assert forcing(0.0, (0.25, 0.25), 2.0) == 1.0
    assert forcing(1.23, (0.9, 0.9), 2.0) == 0.0
    assert forcing(0.5, (0.25, 0.25), 2.0) == pytest.approx(0.0, abs=1e-30)
    prob = build_advection_diffusion(8, "v1", 0.0, compute_eig=False)
    vec = forcing_vector(prob, 0.0, 2.0)
    assert vec.shape == (64,)
    assert vec.max() == 1.0 and vec.min() == 0.0
