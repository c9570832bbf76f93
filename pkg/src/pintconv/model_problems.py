"""Spatial test operators: 2D advection-diffusion and the 2D wave system.

Both constructions follow the package convention u' = -L u, so modes with
Re(eig(L)) > 0 decay under exact integration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse

EIG_DIM_LIMIT = 4096  # dense eigendecompositions are only attempted up to here


@dataclass(frozen=True)
class MeshInfo:
    n_per_dim: int            # interior unknowns per dimension
    h: float
    bounds: tuple[float, float]


@dataclass
class EigenData:
    values: np.ndarray                 # (n,) complex
    vectors: np.ndarray | None = None  # (n, n) complex, columns; None if not formed


@dataclass
class SpatialProblem:
    L: object                    # (n, n) ndarray or scipy.sparse matrix
    kind: str                    # "advection_diffusion" | "wave_first_order"
    mesh: MeshInfo
    eigendata: EigenData | None = None
    meta: dict | None = None

    @property
    def dim(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class VelocityField:
    """A named velocity field on the unit square."""

    id: str
    components: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def _v1(x, y):
    return (np.full_like(x, np.sqrt(2.0 / 3.0)), np.full_like(y, np.sqrt(1.0 / 3.0)))


def _v2(x, y):
    return (np.cos(np.pi * y) ** 2, np.cos(np.pi * x) ** 2)


def _v3(x, y):
    # rigid rotation about the domain center: genuinely recirculating on [0,1]^2
    return ((y - 0.5) * np.pi / 2.0, -(x - 0.5) * np.pi / 2.0)


def _vzero(x, y):
    return (np.zeros_like(x), np.zeros_like(y))


_FIELDS = {
    "v1": VelocityField("v1", _v1),          # constant translation
    "v2": VelocityField("v2", _v2),          # curved, non-recirculating
    "v3": VelocityField("v3", _v3),          # recirculating rotation
    "zero": VelocityField("zero", _vzero),   # pure diffusion (testing)
}


def velocity_field(field_id: str) -> VelocityField:
    try:
        return _FIELDS[field_id]
    except KeyError:
        raise ValueError(f"unknown velocity field {field_id!r}; choose from {sorted(_FIELDS)}") from None


def build_advection_diffusion(
    n: int,
    field: VelocityField | str,
    alpha: float,
    *,
    compute_eig: bool | None = None,
) -> SpatialProblem:
    """First-order upwind advection plus 5-point diffusion on the unit square.

    n is the number of cells per dimension (h = 1/n, unknowns at cell
    centers, homogeneous Dirichlet data on all inflow/diffusive boundaries).
    alpha >= 0 is the diffusion coefficient; L discretizes
    v . grad(u) - alpha * laplacian(u), so u' = -L u is the semi-discrete
    problem.  A dense eigendecomposition is attached when n^2 <= 4096.
    """
    if n < 4:
        raise ValueError("grid must have n >= 4 cells per dimension")
    if alpha < 0:
        raise ValueError("diffusion coefficient must be nonnegative")
    if isinstance(field, str):
        field = velocity_field(field)

    h = 1.0 / n
    centers = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(centers, centers, indexing="ij")
    vx, vy = field.components(X, Y)

    size = n * n
    idx = lambda i, j: i * n + j
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    inv_h = 1.0 / h
    inv_h2 = 1.0 / (h * h)
    for i in range(n):
        for j in range(n):
            r = idx(i, j)
            ax, ay = vx[i, j], vy[i, j]
            # upwind first differences; missing upstream neighbors are Dirichlet zero
            if ax >= 0:
                add(r, r, ax * inv_h)
                if i > 0:
                    add(r, idx(i - 1, j), -ax * inv_h)
            else:
                add(r, r, -ax * inv_h)
                if i < n - 1:
                    add(r, idx(i + 1, j), ax * inv_h)
            if ay >= 0:
                add(r, r, ay * inv_h)
                if j > 0:
                    add(r, idx(i, j - 1), -ay * inv_h)
            else:
                add(r, r, -ay * inv_h)
                if j < n - 1:
                    add(r, idx(i, j + 1), ay * inv_h)
            if alpha > 0:
                add(r, r, 4.0 * alpha * inv_h2)
                for ii, jj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                    if 0 <= ii < n and 0 <= jj < n:
                        add(r, idx(ii, jj), -alpha * inv_h2)

    L = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    mesh = MeshInfo(n_per_dim=n, h=h, bounds=(0.0, 1.0))
    if size <= EIG_DIM_LIMIT:
        L = np.asarray(L.todense())
    problem = SpatialProblem(L=L, kind="advection_diffusion", mesh=mesh,
                             meta={"field": field.id, "alpha": alpha})
    if compute_eig is None:
        compute_eig = size <= EIG_DIM_LIMIT
    if compute_eig:
        ensure_eigendata(problem)
    return problem


def ensure_eigendata(problem: SpatialProblem) -> EigenData:
    """Attach (or return existing) dense eigendata; guarded by EIG_DIM_LIMIT."""
    if problem.eigendata is not None:
        return problem.eigendata
    n = problem.dim
    if n > EIG_DIM_LIMIT:
        raise ValueError(f"eigendecomposition disabled for dimension {n} > {EIG_DIM_LIMIT}")
    dense = problem.L.toarray() if scipy.sparse.issparse(problem.L) else np.asarray(problem.L)
    vals, vecs = np.linalg.eig(dense)
    problem.eigendata = EigenData(values=vals, vectors=vecs)
    return problem.eigendata


def dirichlet_laplacian_eigenvalues(m_interior: int, h: float) -> np.ndarray:
    """Eigenvalues of the 1D 5-point -d2/dx2 stencil with Dirichlet ends."""
    p = np.arange(1, m_interior + 1)
    return (4.0 / h**2) * np.sin(p * np.pi / (2.0 * (m_interior + 1))) ** 2


def build_wave_first_order(m: int, c2: float = 10.0) -> SpatialProblem:
    """First-order form of u_tt = c^2 lap(u) on (0, 2pi)^2, Dirichlet walls.

    m counts grid points per dimension including the boundary, so
    h = 2*pi/(m-1) and there are (m-2)^2 interior unknowns per component.
    The 2n-dimensional operator has the block form

        L = [ 0    -I  ]
            [ c^2 P  0 ]

    with P the 5-point discretization of -laplacian, so that u' = -L u
    reproduces [u v]' = [[0, I], [-c^2 P, 0]] [u v].  All eigenvalues are
    purely imaginary; the analytic spectrum is attached (eigenvectors are
    built on demand by wave_eigensystem).
    """
    if m < 5:
        raise ValueError("wave grid needs m >= 5 points per dimension")
    if c2 <= 0:
        raise ValueError("wave speed squared must be positive")
    h = 2.0 * np.pi / (m - 1)
    mi = m - 2
    n = mi * mi

    ones = np.ones(mi)
    T = scipy.sparse.diags([-ones[:-1], 2.0 * ones, -ones[:-1]], (-1, 0, 1)) / h**2
    I1 = scipy.sparse.eye(mi)
    P = scipy.sparse.kron(T, I1) + scipy.sparse.kron(I1, T)  # 2D -laplacian, SPD

    Z = scipy.sparse.csr_matrix((n, n))
    L = scipy.sparse.bmat([[Z, -scipy.sparse.eye(n)], [c2 * P, Z]], format="csr")

    lam_1d = dirichlet_laplacian_eigenvalues(mi, h)
    zeta = c2 * (lam_1d[:, None] + lam_1d[None, :]).ravel()  # (p, q) row-major
    sq = np.sqrt(zeta)
    values = np.empty(2 * n, dtype=complex)
    values[0::2] = 1j * sq
    values[1::2] = -1j * sq

    mesh = MeshInfo(n_per_dim=mi, h=h, bounds=(0.0, 2.0 * np.pi))
    return SpatialProblem(
        L=L,
        kind="wave_first_order",
        mesh=mesh,
        eigendata=EigenData(values=values, vectors=None),
        meta={"c2": c2, "m": m, "zeta": zeta},
    )


@dataclass
class WaveEigensystem:
    vectors: np.ndarray   # (2n, 2n) complex, columns ordered in conjugate pairs
    values: np.ndarray    # (2n,) complex, aligned with columns
    zeta: np.ndarray      # (n,) spectrum of c^2 * P
    gram: np.ndarray      # vectors^H vectors


def wave_eigensystem(problem: SpatialProblem) -> WaveEigensystem:
    """Analytic eigenpairs of the first-order wave operator.

    Each Laplacian eigenpair (w, zeta) yields the conjugate pair
    (1+zeta)^{-1/2} [w; -+ i sqrt(zeta) w] with eigenvalues +- i sqrt(zeta)
    of L.  The Gram matrix vectors^H vectors is block diagonal with 2x2
    blocks [[1, r], [r, 1]], r = (1-zeta)/(1+zeta): conjugate pairs are the
    only non-orthogonal directions.
    """
    if problem.kind != "wave_first_order":
        raise ValueError(f"wave_eigensystem needs a wave_first_order problem, got {problem.kind!r}")
    mi = problem.mesh.n_per_dim
    n = mi * mi
    zeta = problem.meta["zeta"]

    # orthonormal discrete sine modes of the 1D stencil
    i_grid = np.arange(1, mi + 1)
    p_grid = np.arange(1, mi + 1)
    S = np.sin(np.outer(i_grid, p_grid) * np.pi / (mi + 1)) * np.sqrt(2.0 / (mi + 1))

    W = np.einsum("ip,jq->ijpq", S, S).reshape(n, n)  # column (p,q) row-major

    sq = np.sqrt(zeta)
    scale = 1.0 / np.sqrt(1.0 + zeta)
    U = np.empty((2 * n, 2 * n), dtype=complex)
    U[:n, 0::2] = scale * W
    U[n:, 0::2] = (-1j * sq * scale) * W
    U[:n, 1::2] = scale * W
    U[n:, 1::2] = (1j * sq * scale) * W

    values = np.empty(2 * n, dtype=complex)
    values[0::2] = 1j * sq
    values[1::2] = -1j * sq

    gram = U.conj().T @ U
    return WaveEigensystem(vectors=U, values=values, zeta=zeta, gram=gram)


def wave_mode_operators(problem: SpatialProblem) -> np.ndarray:
    """The wave operator decoupled into per-mode 2x2 blocks, shape (n, 2, 2).

    In the orthonormal sine-mode basis of the Laplacian the first-order wave
    operator splits into independent blocks [[0, -1], [zeta_l, 0]]; the
    change of basis is real orthogonal, so l2 norms of residuals and errors
    in the decoupled representation equal those of the assembled operator.
    """
    if problem.kind != "wave_first_order":
        raise ValueError("wave_mode_operators needs a wave_first_order problem")
    zeta = problem.meta["zeta"]
    blocks = np.zeros((len(zeta), 2, 2))
    blocks[:, 0, 1] = -1.0
    blocks[:, 1, 0] = zeta
    return blocks


def wave_mode_transform(problem: SpatialProblem) -> np.ndarray:
    """Orthogonal matrix Q with Q^T L Q block diagonal as in wave_mode_operators.

    Column 2l + c of Q holds the assembled-basis vector of decoupled
    coordinate (mode l, component c).  Dense; intended for small problems
    (equivalence testing).
    """
    mi = problem.mesh.n_per_dim
    n = mi * mi
    i_grid = np.arange(1, mi + 1)
    S = np.sin(np.outer(i_grid, i_grid) * np.pi / (mi + 1)) * np.sqrt(2.0 / (mi + 1))
    W = np.einsum("ip,jq->ijpq", S, S).reshape(n, n)
    Q = np.zeros((2 * n, 2 * n))
    Q[:n, 0::2] = W
    Q[n:, 1::2] = W
    return Q


def wave_initial_condition(problem: SpatialProblem) -> np.ndarray:
    """[u; v](0) with u = sin(x) sin(y) and v = 0 on the interior grid."""
    mi = problem.mesh.n_per_dim
    h = problem.mesh.h
    x = h * np.arange(1, mi + 1)
    u0 = np.outer(np.sin(x), np.sin(x)).ravel()
    return np.concatenate([u0, np.zeros_like(u0)])


def forcing(t: float, x: tuple[float, float], t_final: float) -> float:
    """cos^2(2 pi t / t_final) inside the box [1/8, 3/8]^2, zero outside."""
    if 0.125 <= x[0] <= 0.375 and 0.125 <= x[1] <= 0.375:
        return float(np.cos(2.0 * np.pi * t / t_final) ** 2)
    return 0.0


def forcing_vector(problem: SpatialProblem, t: float, t_final: float) -> np.ndarray:
    """The forcing sampled at every cell center of an advection grid."""
    if problem.kind != "advection_diffusion":
        raise ValueError("forcing_vector is defined for advection_diffusion problems")
    n = problem.mesh.n_per_dim
    h = problem.mesh.h
    centers = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(centers, centers, indexing="ij")
    box = (X >= 0.125) & (X <= 0.375) & (Y >= 0.125) & (Y <= 0.375)
    return (np.cos(2.0 * np.pi * t / t_final) ** 2 * box).ravel()
