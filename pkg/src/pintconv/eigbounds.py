"""Eigenvalue-based convergence bounds and complex-plane convergence maps.

For simultaneously diagonalizable fine/coarse steps the convergence of the
two-level iteration is controlled mode by mode through the fine multiplier
lambda = R(-dt*xi) and coarse multiplier mu = R(-k*dt*xi).  This module
evaluates the finite-coarse-grid upper/lower bounds, their limiting form,
and the stronger single-iteration bound, plus maps of these quantities over
a rectangle of the complex spatial-eigenvalue plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .schemes import ButcherTableau, stability_on_grid, stability_value

DEFECTIVE_CONDITION = 1e8


@dataclass(frozen=True)
class ModePair:
    """Spatial eigenvalue with its fine and coarse step multipliers."""

    xi: complex
    lam: complex
    mu: complex


def mode_pairs(xi, scheme: ButcherTableau, dt: float, k: int,
               coarse_scheme: ButcherTableau | None = None) -> list[ModePair]:
    """Map spatial eigenvalues to (lambda, mu) multiplier pairs."""
    coarse = coarse_scheme if coarse_scheme is not None else scheme
    out = []
    for x in np.asarray(xi, dtype=complex).ravel():
        lam = stability_value(scheme, -dt * x)
        mu = stability_value(coarse, -k * dt * x)
        out.append(ModePair(xi=complex(x), lam=lam, mu=mu))
    return out


def _lam_mu(modes) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(modes, tuple) and len(modes) == 2:
        return np.asarray(modes[0], dtype=complex), np.asarray(modes[1], dtype=complex)
    return (np.array([m.lam for m in modes], dtype=complex),
            np.array([m.mu for m in modes], dtype=complex))


def _numerators(lam: np.ndarray, mu: np.ndarray, k: int, relax: str) -> np.ndarray:
    num = np.abs(mu - lam**k)
    if relax == "FCF":
        num = num * np.abs(lam) ** k
    elif relax != "F":
        raise ValueError("relax must be 'F' or 'FCF'")
    return num


@dataclass
class FiniteGridBounds:
    lower: float
    upper: float


def finite_grid_bounds(modes, k: int, n_coarse: int, relax: str = "F") -> FiniteGridBounds:
    """Finite-coarse-grid worst-case convergence bounds (diagonalizable case).

    lower = sup |mu - lam^k| / sqrt((1-|mu|)^2 + pi^2 |mu| / n_coarse^2),
    upper = sup |mu - lam^k| / sqrt((1-|mu|)^2 + pi^2 |mu| / (6 n_coarse^2)),
    with an extra |lam|^k numerator factor under FCF-relaxation.  n_coarse
    counts coarse-grid intervals.
    """
    if n_coarse < 2:
        raise ValueError("need n_coarse >= 2")
    lam, mu = _lam_mu(modes)
    num = _numerators(lam, mu, k, relax)
    amu = np.abs(mu)
    base = (1.0 - amu) ** 2
    lower = np.max(num / np.sqrt(base + np.pi**2 * amu / n_coarse**2))
    upper = np.max(num / np.sqrt(base + np.pi**2 * amu / (6.0 * n_coarse**2)))
    return FiniteGridBounds(lower=float(lower), upper=float(upper))


def _limit_ratio(num: np.ndarray, amu: np.ndarray) -> float:
    denom = 1.0 - amu
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num == 0.0, 0.0, np.where(denom > 0.0, num / denom, np.inf))
    return float(np.max(ratio))


def eval_bound_limit(modes, k: int, relax: str = "F") -> float:
    """Limiting (coarse grid -> infinity) eigenvalue convergence bound.

    sup |mu - lam^k| / (1 - |mu|), FCF with the extra |lam|^k factor.
    Returns +inf when some mode has |mu| >= 1 with a nonzero numerator; the
    infinity is the divergence flag.
    """
    lam, mu = _lam_mu(modes)
    return _limit_ratio(_numerators(lam, mu, k, relax), np.abs(mu))


def _stage_sum_factor(lam: np.ndarray, k: int) -> np.ndarray:
    # sum_{l<k} |lam|^{2l}, evaluated termwise: stable for |lam| near 1
    a2 = np.abs(lam) ** 2
    s = np.zeros_like(a2)
    p = np.ones_like(a2)
    for _ in range(k):
        s = s + p
        p = p * a2
    return np.sqrt(s)


def single_it_eig(modes, k: int, relax: str = "F") -> float:
    """Single-iteration eigenvalue bound (coarse grid -> infinity limit).

    The limiting bound gains the factor sqrt((1-|lam|^{2k})/(1-|lam|^2)),
    evaluated as the power sum so |lam| -> 1 tends to sqrt(k) smoothly.
    """
    lam, mu = _lam_mu(modes)
    num = _numerators(lam, mu, k, relax) * _stage_sum_factor(lam, k)
    return _limit_ratio(num, np.abs(mu))


@dataclass
class BoundReport:
    """All computed bounds for one configuration."""

    config: dict
    relax: str
    eval_bound: float
    lower_bound: float
    upper_bound: float
    single_it_f: float
    single_it_fcf: float
    n_coarse: int
    gsvd_f: float | None = None
    gsvd_fcf: float | None = None

    def ordering_ok(self) -> bool:
        return (self.lower_bound <= self.upper_bound * (1 + 1e-12)
                and self.upper_bound <= self.eval_bound * (1 + 1e-12)
                and self.eval_bound <= max(self.single_it_f, self.single_it_fcf) * (1 + 1e-12))


def bound_report(modes, k: int, n_coarse: int, relax: str = "F", config: dict | None = None) -> BoundReport:
    finite_grid = finite_grid_bounds(modes, k, n_coarse, relax)
    return BoundReport(
        config=dict(config or {}),
        relax=relax,
        eval_bound=eval_bound_limit(modes, k, relax),
        lower_bound=finite_grid.lower,
        upper_bound=finite_grid.upper,
        single_it_f=single_it_eig(modes, k, "F"),
        single_it_fcf=single_it_eig(modes, k, "FCF"),
        n_coarse=n_coarse,
    )


@dataclass
class ComplexMap:
    """Bound values over a rectangle of dt-scaled spatial eigenvalues."""

    re: np.ndarray          # (nx,)
    im: np.ndarray          # (ny,)
    panels: dict[str, np.ndarray] = field(default_factory=dict)  # each (ny, nx)
    pole_mask: np.ndarray | None = None


def complex_map(
    scheme: ButcherTableau,
    k: int,
    relax: str = "F",
    bound_kind: str = "eval",
    region: tuple[float, float, float, float] = (-1.0, 6.0, -6.0, 6.0),
    resolution: int | tuple[int, int] = 200,
) -> ComplexMap:
    """Per-mode convergence bound over a complex rectangle of z = dt * xi.

    Every grid point is treated as a scalar mode with lam = R(-z) and
    mu = R(-k z); panels carry the requested bound, |lambda|, and the
    real/imaginary parts of lambda^k and mu.  Stability-function poles are
    flagged in pole_mask, not fatal.
    """
    if bound_kind not in ("eval", "single_it"):
        raise ValueError("bound_kind must be 'eval' or 'single_it'")
    nx, ny = (resolution, resolution) if isinstance(resolution, int) else resolution
    if nx < 16 or ny < 16:
        raise ValueError("resolution must be at least 16 per axis")
    re_min, re_max, im_min, im_max = region
    if not (re_max > re_min and im_max > im_min):
        raise ValueError("region must have positive area")
    re = np.linspace(re_min, re_max, nx)
    im = np.linspace(im_min, im_max, ny)
    if abs(im_min + im_max) < 1e-12 * (im_max - im_min):
        im = (im - im[::-1]) / 2.0  # exactly antisymmetric grid: conjugate pairs align
    Z = re[None, :] + 1j * im[:, None]

    lam = stability_on_grid(scheme, -Z)
    mu = stability_on_grid(scheme, -k * Z)
    pole = ~(np.isfinite(lam.real) & np.isfinite(lam.imag)
             & np.isfinite(mu.real) & np.isfinite(mu.imag))

    num = np.abs(mu - lam**k)
    if relax == "FCF":
        num = num * np.abs(lam) ** k
    elif relax != "F":
        raise ValueError("relax must be 'F' or 'FCF'")
    if bound_kind == "single_it":
        num = num * _stage_sum_factor(lam, k)
    denom = 1.0 - np.abs(mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(num == 0.0, 0.0, np.where(denom > 0.0, num / denom, np.inf))
    value = np.where(pole, np.nan, value)

    panels = {
        "value": value,
        "abs_lambda": np.abs(lam),
        "re_lambda_k": (lam**k).real,
        "im_lambda_k": (lam**k).imag,
        "re_mu": mu.real,
        "im_mu": mu.imag,
    }
    return ComplexMap(re=re, im=im, panels=panels, pole_mask=pole)


@dataclass
class ConditionReport:
    """Eigenvector conditioning summary driving the trust label on
    eigenvalue bounds."""

    condition: float
    defective: bool
    trust: str                      # "high" | "low"
    block_pair_condition: float | None = None


def weighted_norm_factors(U: np.ndarray | None = None, *,
                          zeta: np.ndarray | None = None) -> ConditionReport:
    """Conditioning of the eigenvector basis behind the weighted-norm bounds.

    Pass the eigenvector matrix U for generic operators (defective when the
    condition number exceeds 1e8), or the wave spectrum zeta: the wave
    eigenvectors are ill-conditioned only inside conjugate 2x2 pairs, so the
    trust label stays high regardless of the per-pair condition numbers.
    """
    if zeta is not None:
        zeta = np.asarray(zeta, dtype=float)
        pair_cond = float(np.max(np.maximum(zeta, 1.0 / zeta)))
        evals = np.concatenate([2.0 * zeta / (1.0 + zeta), 2.0 / (1.0 + zeta)])
        cond = float(np.sqrt(np.max(evals) / np.min(evals)))
        return ConditionReport(condition=cond, defective=False, trust="high",
                               block_pair_condition=pair_cond)
    if U is None:
        raise ValueError("need either an eigenvector matrix or a wave spectrum")
    sv = scipy.linalg.svdvals(np.asarray(U))
    cond = math.inf if sv[-1] == 0.0 else float(sv[0] / sv[-1])
    defective = cond > DEFECTIVE_CONDITION
    return ConditionReport(condition=cond, defective=defective,
                           trust="low" if defective else "high")
