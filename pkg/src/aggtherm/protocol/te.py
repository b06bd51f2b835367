"""Multiplicative transformation masking for the weights subproblem.

Each agent holds a private random column of the encryption matrix W,
uploads only outer products of its filtered temperature column and that
column (secure-aggregated), and the coordinator solves the transformed
problem in the encrypted weight vector.  With invertible W the transformed
problem is an exact reparameterization of the plain one.
"""

from __future__ import annotations

import numpy as np

from ..estimator import solve_weights_qp

__all__ = [
    "gen_encryption_col",
    "compute_hat_tau_col",
    "compute_te_uploads",
    "solve_sp2_masked",
    "te_recover",
]


def gen_encryption_col(K: int, rng: np.random.Generator, mean: float = 0.1, sd: float = 0.1):
    """One agent's private encryption column: K draws from Normal(mean, sd)."""
    return rng.normal(mean, sd, size=K)


def compute_hat_tau_col(alpha: np.ndarray, zone_series: np.ndarray) -> np.ndarray:
    """Filter one zone's temperature series by the fixed dynamics.

    ``zone_series`` carries T + M rows (lag history first); entry t of the
    result is the period-t value minus the alpha-weighted lagged values.
    """
    alpha = np.asarray(alpha, dtype=float).ravel()
    zone_series = np.asarray(zone_series, dtype=float).ravel()
    M = len(alpha)
    n = len(zone_series)
    if n <= M:
        raise ValueError(f"series must have more than M={M} rows, got {n}")
    out = zone_series[M:].copy()
    for m in range(1, M + 1):
        out -= alpha[m - 1] * zone_series[M - m : n - m]
    return out


def compute_te_uploads(hat_tau_col: np.ndarray, w_col: np.ndarray):
    """Outer-product uploads of one agent: (hat_tau x w^T, w x w^T)."""
    hat_tau_col = np.asarray(hat_tau_col, dtype=float).ravel()
    w_col = np.asarray(w_col, dtype=float).ravel()
    A1 = np.outer(hat_tau_col, w_col)
    A2 = np.outer(w_col, w_col)
    return A1, A2


def solve_sp2_masked(
    A1_sum: np.ndarray,
    A2_sum: np.ndarray,
    w_sum: np.ndarray,
    c2: np.ndarray,
    c3: np.ndarray,
    c4: np.ndarray,
    P_occ: np.ndarray,
    lam: float,
):
    """Coordinator-side solve of the transformed weights subproblem.

    Minimizes ||A1_sum v - c2 b - c3 g - c4 th - P_occ u||^2 + lam v'A2_sum v
    subject to w_sum'v = 1.  Returns (xi_bar, beta, gamma, theta,
    tau_occ_free, f2).
    """
    A1_sum = np.asarray(A1_sum, dtype=float)
    A2_sum = np.asarray(A2_sum, dtype=float)
    w_sum = np.asarray(w_sum, dtype=float).ravel()
    K = len(w_sum)
    if A2_sum.shape != (K, K) or A1_sum.shape[1] != K:
        raise ValueError("upload sums have inconsistent shapes")
    asym = float(np.max(np.abs(A2_sum - A2_sum.T))) if K else 0.0
    if asym > 1e-9 * max(1.0, float(np.max(np.abs(A2_sum)))):
        raise ValueError(f"aggregated Gram matrix is asymmetric (max dev {asym:.3e})")
    if not np.any(w_sum):
        raise ValueError("aggregated encryption-column sum is zero")
    A2_sym = 0.5 * (A2_sum + A2_sum.T)
    return solve_weights_qp(
        A1_sum, c2, c3, c4, P_occ, lam * A2_sym, w_sum, nonneg=False
    )


def te_recover(w_col: np.ndarray, xi_bar: np.ndarray) -> float:
    """Agent-side recovery of its own weight: w_col dot xi_bar."""
    return float(np.asarray(w_col, dtype=float) @ np.asarray(xi_bar, dtype=float))
