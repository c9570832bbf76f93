import numpy as np
import pytest

from conftest import stable_matrix
from pintconv.model_problems import build_advection_diffusion, forcing_vector
from pintconv.schemes import get_scheme
from pintconv.spacetime import (BlockDiagStep, CoarseSystem, InsufficientDataError,
                                MatrixStep, ProductStep, SpaceTimeSystem, assemble,
                                coarsen, convergence_factors, coarse_residual,
                                f_relaxation, mgrit_solve, residual, residual_norm,
                                sequential_solve)


def scalar_system(phis, k, rhs=None):
    steps = [np.array([[p]]) for p in phis]
    if rhs is None:
        rhs = np.zeros((len(phis) + 1, 1))
        rhs[0, 0] = 1.0
    return SpaceTimeSystem(steps=steps, rhs=rhs, k=k)


def random_system(rng, n, n_time, k, time_dependent=False):
    count = n_time - 1 if time_dependent else 1
    mats = [stable_matrix(rng, n) for _ in range(count)]
    steps = mats if time_dependent else mats * (n_time - 1)
    rhs = rng.standard_normal((n_time, n))
    return SpaceTimeSystem(steps=steps, rhs=rhs, k=k)


def test_sequential_solve_is_time_stepping(rng):
    sys = random_system(rng, 3, 7, 2, time_dependent=True)
    u = sequential_solve(sys)
    v = sys.rhs[0]
    for l in range(1, 7):
        v = sys.steps[l - 1].M @ v + sys.rhs[l]
        assert np.array_equal(u[l], v)
    assert np.linalg.norm(residual(sys, u)) < 1e-12


def test_closed_form_inverse_pattern():
    # N = 3, scalar steps a: rows of the inverse are [1], [a, 1], [a^2, a, 1]
    a = 0.7
    sys = scalar_system([a, a], k=2)
    f = np.array([[1.0], [2.0], [3.0]])
    sys.rhs = f
    u = sequential_solve(sys)
    inv = np.array([[1, 0, 0], [a, 1, 0], [a * a, a, 1]])
    assert np.allclose(u.ravel(), inv @ f.ravel(), atol=1e-15)


def test_apply_inverse_then_forward(rng):
    sys = random_system(rng, 2, 5, 2, time_dependent=True)
    u = sequential_solve(sys)  # u = A^{-1} f
    r = residual(sys, u)       # f - A u
    assert np.max(np.abs(r)) < 1e-12 * max(1.0, np.max(np.abs(sys.rhs)))


def test_coarse_blocks_are_step_products(rng):
    a = 0.83
    sys = scalar_system([a] * 4, k=2)
    co = coarsen(sys, psi=np.array([[0.5]]))
    assert co.a_ops[0].matrix()[0, 0] == pytest.approx(a * a, rel=1e-15)

    sysm = random_system(rng, 3, 9, 4)
    com = coarsen(sysm, psi=np.eye(3))
    phi = sysm.steps[0].M
    x = rng.standard_normal(3)
    want = np.linalg.matrix_power(phi, 4) @ x
    assert np.allclose(com.a_ops[1].apply(x), want, atol=1e-13)


def test_exact_coarsening_solves_in_two_iterations(rng):
    for trial in range(5):
        n, k, nc = [(1, 2, 4), (2, 3, 3), (3, 2, 5), (1, 4, 3), (2, 2, 6)][trial]
        sys = random_system(rng, n, k * (nc - 1) + 1, k)
        co = coarsen(sys, exact=True)
        trace = mgrit_solve(sys, co, relax="F", max_iters=5, tol=1e-10, seed=trial)
        assert trace.iterations <= 2
        assert trace.residual_norms[-1] <= 1e-10


def test_parareal_finite_termination(rng):
    for trial in range(5):
        k, nc = [(2, 4), (3, 3), (2, 6), (4, 4), (2, 8)][trial]
        sys = random_system(rng, 2, k * (nc - 1) + 1, k)
        co = coarsen(sys, psi=stable_matrix(rng, 2, radius=0.8))
        trace = mgrit_solve(sys, co, relax="F", max_iters=nc, tol=1e-300, seed=trial)
        assert trace.final_residual_norm <= 1e-10


def test_one_iteration_matches_coarse_error_propagator(rng):
    # error supported on C-points: after one F-iteration the C-point error
    # equals (I - B^{-1} A) e_c
    k, nc, n = 3, 5, 1
    sys = random_system(rng, n, k * (nc - 1) + 1, k)
    psi = np.array([[0.6]])
    co = coarsen(sys, psi=psi)
    u_star = sequential_solve(sys)
    e_c = rng.standard_normal((nc, n))
    u = u_star.copy()
    c = sys.c_rows()
    u[c] += e_c
    f_relaxation(sys, u)  # make the perturbed guess consistent at F-points
    trace = mgrit_solve(sys, co, relax="F", u0=u, max_iters=1, tol=1e-300)

    phi = sys.steps[0].M[0, 0]
    A = np.eye(nc) + np.diag([-phi**k] * (nc - 1), -1)
    B = np.eye(nc) + np.diag([-psi[0, 0]] * (nc - 1), -1)
    want = (np.eye(nc) - np.linalg.solve(B, A)) @ e_c.ravel()
    got = (trace.solution - u_star)[c].ravel()
    assert np.allclose(got, want, atol=1e-10)


def test_fcf_iteration_matches_coarse_error_propagator(rng):
    k, nc = 2, 6
    sys = random_system(rng, 1, k * (nc - 1) + 1, k)
    psi = np.array([[0.55]])
    co = coarsen(sys, psi=psi)
    u_star = sequential_solve(sys)
    e_c = rng.standard_normal((nc, 1))
    u = u_star.copy()
    c = sys.c_rows()
    u[c] += e_c
    f_relaxation(sys, u)
    trace = mgrit_solve(sys, co, relax="FCF", u0=u, max_iters=1, tol=1e-300)

    phi = sys.steps[0].M[0, 0]
    A = np.eye(nc) + np.diag([-phi**k] * (nc - 1), -1)
    B = np.eye(nc) + np.diag([-psi[0, 0]] * (nc - 1), -1)
    E = (np.eye(nc) - np.linalg.solve(B, A)) @ (np.eye(nc) - A)
    want = E @ e_c.ravel()
    got = (trace.solution - u_star)[c].ravel()
    assert np.allclose(got, want, atol=1e-10)


def test_divergence_flag(rng):
    sys = scalar_system([0.9] * 8, k=2)
    co = coarsen(sys, psi=np.array([[40.0]]))  # terrible coarse operator
    trace = mgrit_solve(sys, co, relax="F", max_iters=400, tol=1e-12, seed=0)
    assert trace.diverged
    assert trace.residual_norms[-1] > 1e6 * trace.residual_norms[0]


def test_convergence_factor_examples():
    worst, avg = convergence_factors([1.0, 0.5, 0.25], skip_first=1)
    assert worst == avg == pytest.approx(0.5)

    # the worst factor dominates the windowed geometric mean
    rng_local = np.random.default_rng(11)
    res = np.cumprod(np.concatenate([[1.0], rng_local.uniform(0.1, 0.9, 20)]))
    worst, avg = convergence_factors(res, skip_first=1)
    assert worst >= avg

    worst, _ = convergence_factors([1.0, 10.0, 1e-4, 1e-8], skip_first=1)
    assert worst == pytest.approx(1e-4)

    c = 0.37
    _, avg = convergence_factors([1.0, c, c**2, c**3], skip_first=0)
    assert avg == pytest.approx(c, rel=1e-12)


def test_convergence_factor_stagnation_floor():
    # ratios with denominator at/below 10*tol are floor-polluted and dropped
    res = [1.0, 1e-2, 1e-4, 1e-9, 9e-10, 8.5e-10]
    worst, _ = convergence_factors(res, skip_first=1, tol=1e-10)
    # the ~0.9 ratios with denominators at the 10*tol floor are dropped
    assert worst == pytest.approx(1e-2)


def test_convergence_factor_insufficient_data():
    with pytest.raises(InsufficientDataError):
        convergence_factors([1.0, 0.5], skip_first=1)
    with pytest.raises(InsufficientDataError):
        convergence_factors([1.0, 1e-12, 1e-13], skip_first=1, tol=1e-10)


def test_converged_solution_matches_sequential():
    prob = build_advection_diffusion(8, "v2", 10.0 / 8)
    scheme = get_scheme("sdirk1")
    dt = 1.0 / 8
    n_time, k = 25, 4
    t_final = (n_time - 1) * dt
    sys = assemble(prob, scheme, dt, n_time, k,
                   forcing=lambda t: forcing_vector(prob, t, t_final))
    co = coarsen(sys)
    trace = mgrit_solve(sys, co, relax="FCF", max_iters=60, tol=1e-12, seed=0)
    u_star = sequential_solve(sys)
    err = np.linalg.norm(trace.solution - u_star) / np.linalg.norm(u_star)
    assert err < 1e-8


def test_diffusion_dominated_monotone_convergence():
    scheme = get_scheme("sdirk1")
    for field in ("v1", "v2", "v3"):
        prob = build_advection_diffusion(8, field, 10.0 / 8, compute_eig=False)
        for k in (2, 4, 8, 16):
            n_time = 10 * k + 1
            sys = assemble(prob, scheme, 1.0 / 8, n_time, k)
            sys.rhs[0] = 1.0
            co = coarsen(sys)
            trace = mgrit_solve(sys, co, relax="FCF", max_iters=40, tol=1e-10, seed=2)
            res = trace.residual_norms
            assert res[-1] <= 1e-10
            assert np.all(np.diff(res[1:]) < 0)


def test_block_diag_step_equals_dense(rng):
    blocks = rng.standard_normal((5, 2, 2))
    step = BlockDiagStep(blocks)
    dense = MatrixStep(step.matrix())
    x = rng.standard_normal((10, 3))
    assert np.allclose(step.apply(x), dense.apply(x), atol=1e-14)
    v = rng.standard_normal(10)
    assert np.allclose(step.apply(v), dense.apply(v), atol=1e-14)


def test_time_dependent_relaxation_matches_shared(rng):
    # shared-operator fast path and per-step loop must agree exactly
    n, k, nc = 2, 3, 4
    M = stable_matrix(rng, n)
    n_time = k * (nc - 1) + 1
    rhs = rng.standard_normal((n_time, n))
    shared = SpaceTimeSystem(steps=[MatrixStep(M)] * (n_time - 1), rhs=rhs.copy(), k=k)
    listed = SpaceTimeSystem(steps=[MatrixStep(M.copy()) for _ in range(n_time - 1)],
                             rhs=rhs.copy(), k=k)
    u1 = rng.standard_normal((n_time, n))
    u2 = u1.copy()
    f_relaxation(shared, u1)
    f_relaxation(listed, u2)
    # batched (GEMM) and per-column (GEMV) paths agree to rounding
    assert np.allclose(u1, u2, rtol=0, atol=5e-15)
    assert np.allclose(coarse_residual(shared, u1), coarse_residual(listed, u2),
                       rtol=0, atol=5e-15)
    assert residual_norm(shared, u1) == pytest.approx(residual_norm(listed, u2), rel=1e-13)


def test_system_validation(rng):
    with pytest.raises(ValueError, match="multiple of k"):
        SpaceTimeSystem(steps=[np.eye(2)] * 4, rhs=np.zeros((5, 2)), k=3)
    with pytest.raises(ValueError, match="rhs"):
        SpaceTimeSystem(steps=[np.eye(2)] * 4, rhs=np.zeros((4, 2)), k=2)
    sys = random_system(rng, 2, 5, 2)
    with pytest.raises(ValueError, match="inconsistent"):
        mgrit_solve(sys, CoarseSystem(a_ops=[np.eye(2)], b_ops=[np.eye(2)], k=2, n_coarse=2))
    with pytest.raises(ValueError, match="relax"):
        mgrit_solve(sys, coarsen(sys, psi=np.eye(2)), relax="FCFCF")
