"""Non-private cluster model estimation.

Evaluates the regularized least-squares objective and solves the two
block-coordinate subproblems in the clear: the weights-fixed problem is an
unconstrained linear least squares over the remaining coefficients, and the
dynamics-fixed problem is an equality-constrained convex QP over the zone
weights (with an active-set fallback for the nonnegativity bounds).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import AtdmParameters, DesignMatrices

__all__ = [
    "EstimationError",
    "GapRecord",
    "FitResult",
    "objective",
    "solve_sp1",
    "solve_sp1_from_parts",
    "solve_sp2_plain",
    "solve_weights_qp",
    "solve_constrained_quadratic",
    "hat_tau",
    "gap",
    "bcd_fit",
]


class EstimationError(RuntimeError):
    """Solver failure: singular system, active-set cycle, or divergence."""


@dataclass
class GapRecord:
    """One iteration of the alternating fit: both objective values and the gap."""

    f1: float
    f2: float
    gap: float
    negative: bool = False
    absolute_only: bool = False

    def as_dict(self) -> dict:
        return {
            "f1": self.f1,
            "f2": self.f2,
            "gap": self.gap,
            "negative": self.negative,
            "absolute_only": self.absolute_only,
        }


@dataclass
class FitResult:
    params: AtdmParameters
    objective: float
    iterations: int
    gap_trace: list = field(default_factory=list)
    converged: bool = False
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "objective": self.objective,
            "iterations": self.iterations,
            "gap_trace": [g.as_dict() for g in self.gap_trace],
            "converged": self.converged,
            "warnings": list(self.warnings),
        }


def _residual(params: AtdmParameters, design: DesignMatrices) -> np.ndarray:
    r = design.c0 @ params.xi
    for m in range(1, design.M + 1):
        r = r - params.alpha[m - 1] * (design.c1_block(m) @ params.xi)
    r = r - design.c2 @ params.beta
    r = r - design.c3 @ params.gamma
    r = r - design.c4 @ params.theta
    r = r - design.P_occ @ params.tau_occ_free
    return r


def objective(params: AtdmParameters, design: DesignMatrices, lam: float) -> float:
    """Sum of squared model residuals plus the lam * ||xi||^2 penalty."""
    if lam < 0:
        raise ValueError("penalty must be >= 0")
    if params.K != design.K or params.M != design.M:
        raise ValueError(
            f"parameter dims (K={params.K}, M={params.M}) do not match design "
            f"(K={design.K}, M={design.M})"
        )
    if len(params.tau_occ_free) != design.T_occ:
        raise ValueError("tau_occ_free length does not match design T_occ")
    r = _residual(params, design)
    return float(r @ r + lam * (params.xi @ params.xi))


def solve_sp1_from_parts(
    y: np.ndarray,
    lag_cols: np.ndarray,
    c2: np.ndarray,
    c3: np.ndarray,
    c4: np.ndarray,
    P_occ: np.ndarray,
    lam: float,
    xi_norm_sq: float,
):
    """Weights-fixed least squares from already-aggregated regressors.

    ``y`` is the weighted zero-lag state and ``lag_cols`` its lag-1..M
    counterparts; neither requires access to per-zone data.  Returns
    (alpha, beta, gamma, theta, tau_occ_free, f1).
    """
    M = lag_cols.shape[1]
    Z = np.hstack([lag_cols, c2, c3, c4, P_occ])
    coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
    resid = y - Z @ coef
    f1 = float(resid @ resid + lam * xi_norm_sq)
    alpha, rest = coef[:M], coef[M:]
    n1 = c2.shape[1]
    beta, gamma, theta, tau_occ = (
        rest[:n1],
        rest[n1 : 2 * n1],
        rest[2 * n1 : 3 * n1],
        rest[3 * n1 :],
    )
    return alpha, beta, gamma, theta, tau_occ, f1


def solve_sp1(xi: np.ndarray, design: DesignMatrices, lam: float):
    """Minimize the objective over all coefficients with the zone weights fixed.

    Returns (alpha, beta, gamma, theta, tau_occ_free, f1); rank-deficient
    regressors resolve to the minimum-norm solution.  f1 includes the
    (constant) weight penalty term.
    """
    xi = np.asarray(xi, dtype=float).ravel()
    if not np.all(np.isfinite(xi)):
        raise ValueError("xi contains non-finite entries")
    if len(xi) != design.K:
        raise ValueError(f"xi must have {design.K} entries, got {len(xi)}")
    lag_cols = np.column_stack(
        [design.c1_block(m) @ xi for m in range(1, design.M + 1)]
    )
    return solve_sp1_from_parts(
        design.c0 @ xi,
        lag_cols,
        design.c2,
        design.c3,
        design.c4,
        design.P_occ,
        lam,
        float(xi @ xi),
    )


def solve_constrained_quadratic(H: np.ndarray, g: np.ndarray, C: np.ndarray, d: np.ndarray):
    """Solve min x'Hx + g'x subject to Cx = d via the KKT linear system.

    Returns (x, multipliers).  Falls back to a least-squares solve when the
    KKT matrix is singular; raises EstimationError if even that leaves a
    large system residual.
    """
    n, p = H.shape[0], C.shape[0]
    kkt = np.zeros((n + p, n + p))
    kkt[:n, :n] = 2.0 * H
    kkt[:n, n:] = C.T
    kkt[n:, :n] = C
    rhs = np.concatenate([-g, d])
    try:
        sol = scipy.linalg.solve(kkt, rhs, assume_a="sym")
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("non-finite KKT solution")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        sol = None
    if sol is None:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    scale = max(1.0, float(np.abs(kkt).max()), float(np.abs(rhs).max()))
    gap_norm = float(np.max(np.abs(kkt @ sol - rhs)))
    if gap_norm > 1e-6 * scale:
        raise EstimationError(
            f"singular KKT system: residual {gap_norm:.3e} exceeds tolerance"
        )
    return sol[:n], sol[n:]


def solve_weights_qp(
    S: np.ndarray,
    c2: np.ndarray,
    c3: np.ndarray,
    c4: np.ndarray,
    P_occ: np.ndarray,
    reg: np.ndarray,
    cvec: np.ndarray,
    nonneg: bool,
):
    """Shared weights-block QP: min ||S v - c2 b - c3 g - c4 th - P u||^2 + v'reg v
    subject to cvec'v = 1 (and optionally v >= 0 via an active set).
    """
    T, K = S.shape
    n1 = c2.shape[1]
    A = np.hstack([S, -c2, -c3, -c4, -P_occ])
    n = A.shape[1]
    H = A.T @ A
    H[:K, :K] += reg
    g = np.zeros(n)
    e = np.zeros(n)
    e[:K] = cvec

    fixed: list[int] = []
    for _ in range(2 * K + 1):
        C = np.vstack([e] + [np.eye(n)[i] for i in fixed]) if fixed else e[None, :]
        d = np.concatenate([[1.0], np.zeros(len(fixed))])
        x, w = solve_constrained_quadratic(H, g, C, d)
        v = x[:K]
        if not nonneg:
            break
        violated = [i for i in range(K) if i not in fixed and v[i] < -1e-9]
        if violated:
            fixed.append(min(violated, key=lambda i: v[i]))
            continue
        # bound multipliers: mu_i = -w_i for the fixed rows
        mu = -w[1:]
        if len(mu) and mu.min() < -1e-9:
            fixed.pop(int(np.argmin(mu)))
            continue
        break
    else:
        raise EstimationError("active-set cycle limit exceeded in weights subproblem")

    resid = A @ x
    f = float(resid @ resid + v @ reg @ v)
    rest = x[K:]
    beta, gamma, theta, tau_occ = (
        rest[:n1],
        rest[n1 : 2 * n1],
        rest[2 * n1 : 3 * n1],
        rest[3 * n1 :],
    )
    return v, beta, gamma, theta, tau_occ, f


def hat_tau(alpha: np.ndarray, design: DesignMatrices) -> np.ndarray:
    """Dynamics-filtered indoor temperatures: c0 minus the alpha-weighted lags."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    if len(alpha) != design.M:
        raise ValueError(f"alpha must have {design.M} entries, got {len(alpha)}")
    S = design.c0.copy()
    for m in range(1, design.M + 1):
        S -= alpha[m - 1] * design.c1_block(m)
    return S


def solve_sp2_plain(alpha: np.ndarray, design: DesignMatrices, lam: float):
    """Minimize the objective over weights and coefficients with alpha fixed.

    The zone weights are constrained to the probability simplex; negative
    coordinates are handled by an active-set loop on the KKT system.
    Returns (xi, beta, gamma, theta, tau_occ_free, f2).
    """
    S = hat_tau(alpha, design)
    K = design.K
    return solve_weights_qp(
        S,
        design.c2,
        design.c3,
        design.c4,
        design.P_occ,
        lam * np.eye(K),
        np.ones(K),
        nonneg=True,
    )


def gap(f1: float, f2: float) -> float:
    """Convergence measure min(f1 - f2, (f1 - f2) / f2); absolute-only if f2 == 0."""
    diff = f1 - f2
    if f2 == 0.0:
        return diff
    return min(diff, diff / f2)


def bcd_fit(
    design: DesignMatrices,
    lam: float,
    tol: float = 1e-6,
    xi0: np.ndarray | None = None,
    max_iter: int = 20,
) -> FitResult:
    """Alternate the two subproblems until the gap drops below tol.

    The second-block objective must be non-increasing across iterations
    (within 1e-9 slack); any increase beyond that aborts with a diagnostic.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    K = design.K
    xi = np.full(K, 1.0 / K) if xi0 is None else np.asarray(xi0, dtype=float).ravel()
    if len(xi) != K:
        raise ValueError(f"xi0 must have {K} entries")
    if abs(xi.sum() - 1.0) > 1e-8 or xi.min() < -1e-8:
        raise ValueError("xi0 must lie on the probability simplex")

    trace: list[GapRecord] = []
    warnings: list[str] = []
    f2_prev = None
    converged = False
    alpha = beta = gamma_ = theta = tau_occ = None
    f2 = np.inf
    iterations = 0
    for _ in range(max_iter):
        alpha, *_unused, f1 = solve_sp1(xi, design, lam)
        xi_new, beta, gamma_, theta, tau_occ, f2 = solve_sp2_plain(alpha, design, lam)
        iterations += 1
        if f2_prev is not None and f1 > f2_prev + 1e-9:
            raise EstimationError(
                f"divergence at iteration {iterations}: f1={f1!r} > previous f2={f2_prev!r}"
            )
        if f2 > f1 + 1e-9:
            raise EstimationError(
                f"divergence at iteration {iterations}: f2={f2!r} > f1={f1!r}"
            )
        g = gap(f1, f2)
        rec = GapRecord(f1=f1, f2=f2, gap=g, negative=f1 - f2 < 0, absolute_only=f2 == 0.0)
        trace.append(rec)
        if rec.negative:
            warnings.append(f"iteration {iterations}: negative gap {g!r}")
        if rec.absolute_only:
            warnings.append(f"iteration {iterations}: f2 == 0, absolute-only gap")
        xi = xi_new
        f2_prev = f2
        if g < tol:
            converged = True
            break

    params = AtdmParameters(
        xi=xi, alpha=alpha, beta=beta, gamma=gamma_, theta=theta, tau_occ_free=tau_occ
    )
    return FitResult(
        params=params,
        objective=float(f2),
        iterations=iterations,
        gap_trace=trace,
        converged=converged,
        warnings=warnings,
    )
