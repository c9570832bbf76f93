"""Temporal approximation property: per-angle GSVD values, angle scans,
closed-form minima, restricted variants, and the weighted single-iteration
constant.

How well k fine steps approximate the coarse step, measured against the
rotated resolvent (I - e^{ix} Psi), governs two-level convergence: the scan
maximum over x is the tight convergence constant.  All computations here
use complex arithmetic even for real inputs.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class ResolventSingularError(ArithmeticError):
    """(I - e^{ix} Psi) is singular: e^{-ix} collides with an eigenvalue of Psi."""


@dataclass
class TapScan:
    """GSVD values over an angle grid on [0, pi] and their maximum."""

    x_samples: np.ndarray
    values: np.ndarray
    relax: str
    constant: float
    skipped: list[float]  # angles where the resolvent was singular

    @property
    def argmax_x(self) -> float:
        return float(self.x_samples[int(np.argmax(self.values))])


def _pair_ops(pair) -> tuple[np.ndarray, np.ndarray, int]:
    phi = np.atleast_2d(np.asarray(pair.phi, dtype=complex))
    psi = np.atleast_2d(np.asarray(pair.psi, dtype=complex))
    return phi, psi, pair.k


def _resolvent_solve_right(num: np.ndarray, psi: np.ndarray, x: float) -> np.ndarray:
    """num @ (I - e^{ix} Psi)^{-1} via an LU solve with pole detection."""
    n = psi.shape[0]
    M = np.eye(n, dtype=complex) - np.exp(1j * x) * psi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() <= 1e-13 * max(d.max(), 1.0):
        raise ResolventSingularError(f"resolvent singular at x={x}")
    return scipy.linalg.lu_solve((lu, piv), num.T, trans=1, check_finite=False).T


def _scan_terms(pair, relax: str) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """(numerator, Psi, optional right factor) shared across scan samples."""
    phi, psi, k = _pair_ops(pair)
    phik = np.linalg.matrix_power(phi, k)
    num = psi - phik
    if relax == "F":
        return num, psi, None
    if relax == "FCF":
        return num, psi, phik
    raise ValueError("relax must be 'F' or 'FCF'")


def _gsvd_value(num: np.ndarray, psi: np.ndarray, x: float,
                right: np.ndarray | None) -> float:
    op = _resolvent_solve_right(num, psi, x)
    if right is not None:
        op = op @ right
    return float(scipy.linalg.svdvals(op)[0])


def tap_value_at(pair, x: float, relax: str = "F") -> float:
    """Largest singular value of (Psi - Phi^k)(I - e^{ix} Psi)^{-1}.

    For FCF the resolvent is weighted by Phi^{-k}, equivalently the operator
    gains a right factor Phi^k.
    """
    num, psi, right = _scan_terms(pair, relax)
    return _gsvd_value(num, psi, x, right)


def tap_constant(pair, relax: str = "F", samples: int = 65, threads: int = 1) -> TapScan:
    """Scan the GSVD value over a uniform angle grid on [0, pi].

    Symmetry of the scan in x for real operators makes the half interval
    sufficient.  Angles where the resolvent is singular are skipped and
    reported in the scan.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    xs = np.linspace(0.0, np.pi, samples)
    num, psi, right = _scan_terms(pair, relax)

    def one(x: float) -> float:
        try:
            return _gsvd_value(num, psi, x, right)
        except ResolventSingularError:
            return np.nan

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = np.array(list(pool.map(one, xs)))
    else:
        vals = np.array([one(x) for x in xs])
    skipped = [float(x) for x, v in zip(xs, vals) if np.isnan(v)]
    keep = ~np.isnan(vals)
    if not np.any(keep):
        raise ResolventSingularError("every sampled angle hit a singular resolvent")
    return TapScan(x_samples=xs[keep], values=vals[keep], relax=relax,
                   constant=float(np.max(vals[keep])), skipped=skipped)


def tap_denominator_min(psi: np.ndarray, v: np.ndarray, relax: str = "F",
                        phi_k: np.ndarray | None = None) -> float:
    """Closed-form min over x of ||(I - e^{ix} Psi) v||^2 for real Psi.

    Equals ||v||^2 + ||Psi v||^2 - 2 |<Psi v, v>|; the FCF variant weights
    everything by Phi^{-k} (phi_k is the matrix Phi^k, applied via a solve).
    """
    psi = np.atleast_2d(np.asarray(psi))
    if np.iscomplexobj(psi):
        raise ValueError("closed form requires a real-valued Psi")
    v = np.asarray(v, dtype=complex).ravel()
    w = psi @ v
    if relax == "FCF":
        if phi_k is None:
            raise ValueError("FCF variant needs the Phi^k matrix")
        v = np.linalg.solve(phi_k, v)
        w = np.linalg.solve(phi_k, w)
    elif relax != "F":
        raise ValueError("relax must be 'F' or 'FCF'")
    return float(np.vdot(v, v).real + np.vdot(w, w).real - 2.0 * abs(np.vdot(v, w)))


def tap_restricted(pair_or_psi, v: np.ndarray, variant: str = "symm") -> float:
    """Restricted closed forms of the angle minimum for real Psi.

    variant="symm" restricts to x in {0, pi} (real rotation), selecting
    (I + Psi) when <Psi v, v> has nonpositive real part and (I - Psi)
    otherwise; variant="skew" restricts to x in {pi/2, 3pi/2} with the
    (I -+ i Psi) split on the imaginary part.  Both dominate tap_denominator_min.
    """
    psi = pair_or_psi.psi if hasattr(pair_or_psi, "psi") else pair_or_psi
    psi = np.atleast_2d(np.asarray(psi))
    if np.iscomplexobj(psi):
        raise ValueError("restricted forms require a real-valued Psi")
    v = np.asarray(v, dtype=complex).ravel()
    inner = np.vdot(v, psi @ v)  # <Psi v, v>
    eye = np.eye(psi.shape[0])
    if variant == "symm":
        op = eye + psi if inner.real <= 0 else eye - psi
    elif variant == "skew":
        op = eye - 1j * psi if inner.imag <= 0 else eye + 1j * psi
    else:
        raise ValueError("variant must be 'symm' or 'skew'")
    w = op @ v
    return float(np.vdot(w, w).real)


def sufficient_condition_gap(pair, v: np.ndarray) -> dict[str, float]:
    """Quantities of the minimization-free sufficient conditions.

    Returns lhs = ||(Psi - Phi^k) v||, rhs_F = ||v|| - ||Psi v||,
    rhs_FCF = ||v|| - ||Phi^{-k} Psi Phi^k v||, plus the matching FCF
    left-hand side ||(Psi - Phi^k) Phi^k v||; a constant c satisfies the
    sufficient condition when lhs <= c * rhs.
    """
    phi, psi, k = _pair_ops(pair)
    v = np.asarray(v, dtype=complex).ravel()
    phik = np.linalg.matrix_power(phi, k)
    lhs = float(np.linalg.norm((psi - phik) @ v))
    rhs_f = float(np.linalg.norm(v) - np.linalg.norm(psi @ v))
    w = phik @ v
    rhs_fcf = float(np.linalg.norm(v) - np.linalg.norm(np.linalg.solve(phik, psi @ w)))
    lhs_fcf = float(np.linalg.norm((psi - phik) @ w))
    return {"lhs": lhs, "rhs_F": rhs_f, "rhs_FCF": rhs_fcf, "lhs_FCF": lhs_fcf}


def single_iteration_weight(phi: np.ndarray, k: int, relax: str = "F") -> np.ndarray:
    """The HPD weight sqrt(sum_l Phi^l (Phi^l)^*), l = 0..k-1 (F) or k..2k-1 (FCF)."""
    phi = np.atleast_2d(np.asarray(phi))
    n = phi.shape[0]
    lo, hi = (0, k) if relax == "F" else (k, 2 * k)
    S = np.zeros((n, n), dtype=phi.dtype)
    P = np.linalg.matrix_power(phi, lo)
    for _ in range(lo, hi):
        S = S + P @ P.conj().T
        P = phi @ P
    w, V = np.linalg.eigh((S + S.conj().T) / 2.0)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def single_iteration_tap(pair, relax: str = "F", samples: int = 65) -> float:
    """Weighted single-iteration convergence constant (coarse-grid limit).

    Maximum over the angle grid of
    sigma_max((Psi - Phi^k)(I - e^{ix} Psi)^{-1} W) with W the F or FCF
    stage-sum weight; reduces to tap_constant when k = 1 under F-relaxation.
    """
    if relax not in ("F", "FCF"):
        raise ValueError("relax must be 'F' or 'FCF'")
    phi, psi, k = _pair_ops(pair)
    W = single_iteration_weight(phi, k, relax).astype(complex)
    num = psi - np.linalg.matrix_power(phi, k)
    xs = np.linspace(0.0, np.pi, samples)
    best = 0.0
    for x in xs:
        try:
            best = max(best, _gsvd_value(num, psi, x, W))
        except ResolventSingularError:
            continue
    return best
