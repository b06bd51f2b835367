"""Seeded synthetic cluster generation.

Each zone follows its own M-order linear recursion driven by the shared
weather, its own load and a periodic occupancy profile.  Per-zone
coefficients are arranged so that the xi-weighted combination of the zone
recursions reproduces the target aggregate model exactly: the aggregate
measurement residual at the target parameters is the injected Gaussian
noise, and exactly zero when ``noise_sigma`` is zero.
"""

from __future__ import annotations

import numpy as np

from .model import AtdmParameters, ClusterDataset

__all__ = ["default_true_params", "generate_synthetic"]


def _ar_roots(alpha: np.ndarray) -> np.ndarray:
    """Roots of z^M - alpha_1 z^(M-1) - ... - alpha_M."""
    return np.roots(np.concatenate([[1.0], -np.asarray(alpha, dtype=float)]))


def default_true_params(K: int, M: int, T_occ: int, seed: int = 0) -> AtdmParameters:
    """A stable, interior-xi parameter set suitable as a generation target."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(901,)))
    g = rng.uniform(0.6, 1.4, size=K)
    xi = g / g.sum()
    alpha = np.zeros(M)
    alpha[0] = 1.2 if M > 1 else 0.7
    if M > 1:
        alpha[1] = -0.35
    # beta multiplies the cluster-total load, so keep its scale ~1/K
    beta = np.array([0.03, 0.02, 0.005] + [0.002] * max(0, M - 2))[: M + 1] * (7.0 / K)
    gamma = np.array([0.05, 0.03, 0.01] + [0.005] * max(0, M - 2))[: M + 1]
    theta = np.array([0.4, 0.1, -0.2] + [0.05] * max(0, M - 2))[: M + 1]
    occ_slots = np.arange(T_occ)
    tau_occ = 0.25 + 0.2 * np.sin(2 * np.pi * occ_slots / T_occ) + 0.05 * rng.standard_normal(T_occ)
    return AtdmParameters(
        xi=xi, alpha=alpha, beta=beta, gamma=gamma, theta=theta, tau_occ_free=tau_occ
    )


def _weather(rng: np.random.Generator, rows: int, per_day: int):
    """Outdoor temperature and solar radiation with a daily cycle plus AR noise."""
    t = np.arange(rows)
    day_phase = 2 * np.pi * t / per_day
    tau_out = 10.0 + 5.0 * np.sin(day_phase - np.pi / 2)
    noise = np.zeros(rows)
    e = rng.standard_normal(rows) * 0.5
    for i in range(1, rows):
        noise[i] = 0.9 * noise[i - 1] + e[i]
    tau_out = tau_out + noise
    rad = np.clip(np.sin(day_phase - np.pi / 2), 0.0, None) ** 2
    rad = 0.8 * rad + 0.05 * np.abs(rng.standard_normal(rows)) * rad
    return tau_out, rad


def _zone_loads(rng, rows: int, K: int, per_day: int):
    """Per-zone heating load: daily pattern plus independent AR(1) variation."""
    t = np.arange(rows)
    base = rng.uniform(3.0, 8.0, size=K)
    amp = rng.uniform(0.5, 2.0, size=K)
    phase = rng.uniform(0.0, 2 * np.pi, size=K)
    loads = np.empty((rows, K))
    for i in range(K):
        pattern = base[i] + amp[i] * np.sin(2 * np.pi * t / per_day + phase[i])
        ar = np.zeros(rows)
        e = rng.standard_normal(rows) * 0.8
        for s in range(1, rows):
            ar[s] = 0.7 * ar[s - 1] + e[s]
        loads[:, i] = np.clip(pattern + ar, 0.1, None)
    return loads


def generate_synthetic(
    K: int,
    T: int,
    M: int,
    T_occ: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    true_params: AtdmParameters | None = None,
    dt_minutes: float = 30.0,
    zone_noise_sigma: float = 0.5,
):
    """Generate a cluster dataset whose aggregate obeys the target model.

    ``noise_sigma`` is the aggregate measurement-equation noise;
    ``zone_noise_sigma`` adds idiosyncratic per-zone disturbances whose
    weighted sum is exactly zero, so zones behave individually without
    touching the aggregate residual.

    Returns
    -------
    (ClusterDataset, AtdmParameters)
        The dataset and the aggregate-level parameters it was built from.

    Raises
    ------
    ValueError
        If the target autoregressive dynamics are unstable or xi has
        (near-)zero entries, which the construction cannot support.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    if true_params is None:
        true_params = default_true_params(K, M, T_occ, seed)
    if true_params.K != K or true_params.M != M or len(true_params.tau_occ_free) != T_occ:
        raise ValueError("true_params dimensions do not match K/M/T_occ")
    true_params.validate_simplex()
    roots = _ar_roots(true_params.alpha)
    if np.any(np.abs(roots) >= 1.0):
        raise ValueError(
            f"unstable zone dynamics: characteristic roots {np.abs(roots)} not all < 1"
        )
    xi = true_params.xi
    if xi.min() < 1e-6:
        raise ValueError("generation requires strictly positive xi entries")

    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(902,)))
    rows = T + M
    per_day = max(2, int(round(24 * 60 / dt_minutes)))
    tau_out, h_rad = _weather(rng, rows, per_day)
    h_load = _zone_loads(rng, rows, K, per_day)

    # Per-zone coefficients.  The alpha block is shared and the load response
    # is beta/xi_i, so the xi-weighted sum telescopes to the aggregate model;
    # gamma/theta/occupancy get a +-10% spread re-centered to the target.
    def _spread(target_vec):
        draws = target_vec[None, :] * (1.0 + 0.1 * rng.uniform(-1, 1, size=(K, len(target_vec))))
        correction = target_vec - xi @ draws
        return draws + correction[None, :]

    beta_z = true_params.beta[None, :] / xi[:, None]
    gamma_z = _spread(true_params.gamma)
    theta_z = _spread(true_params.theta)
    occ_z = _spread(true_params.tau_occ_free)

    # Common process noise: the aggregate residual per period is exactly eps.
    eps = rng.standard_normal(T) * noise_sigma if noise_sigma > 0 else np.zeros(T)
    # Idiosyncratic zone disturbances, projected so their weighted sum is 0.
    eta = np.zeros((T, K))
    if zone_noise_sigma > 0:
        eta = rng.standard_normal((T, K)) * zone_noise_sigma
        eta -= np.outer((eta @ xi) / (xi @ xi), xi)

    tau_in = np.empty((rows, K))
    tau_in[:M] = 20.0 + rng.uniform(-1.0, 1.0, size=K)[None, :]
    for t in range(T):
        r = M + t  # row of period t+1
        slot = t % T_occ
        for i in range(K):
            v = occ_z[i, slot] + eps[t] + eta[t, i]
            for m in range(1, M + 1):
                v += true_params.alpha[m - 1] * tau_in[r - m, i]
            for m in range(M + 1):
                v += beta_z[i, m] * h_load[r - m, i]
                v += gamma_z[i, m] * tau_out[r - m]
                v += theta_z[i, m] * h_rad[r - m]
            tau_in[r, i] = v
    if not np.all(np.isfinite(tau_in)):
        raise ValueError("zone simulation diverged; check target dynamics")

    dataset = ClusterDataset(
        K=K,
        T=T,
        M=M,
        dt_minutes=dt_minutes,
        tau_in=tau_in,
        h_load=h_load,
        tau_out=tau_out,
        h_rad=h_rad,
    )
    return dataset, true_params
