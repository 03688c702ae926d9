"""
Flow SDE coefficients and path simulation.

In flow coordinates the model reads

    dQ = (m'(t) + σ²/2 − κ(log Q − m(t))) Q dt + σ Q dW,

where m is the seasonal log-mean r, or the forecast path g_k inside the
forecast window. In log coordinates x = log Q it is the OU equation
dx = (m'(t) − κ(x − m(t))) dt + σ dW with constant diffusion, which is what
the VI solver and the simulator use.
"""

from __future__ import annotations

import numpy as np
import structlog

from app.v1.core.exceptions import DataError
from app.v1.models.flow import OUParams, SeasonalProfile
from app.v1.models.forecast import DriftSpec, ForecastSpec, PathSet

logger = structlog.get_logger(__name__)


def build_drift(
    k: int,
    q_now: float,
    forecast: ForecastSpec,
    profile: SeasonalProfile,
    ou: OUParams,
) -> DriftSpec:
    """
    Mean log-flow path seen from day k.

    g_k(k) = log q_now, g_k(k+i) = log F_{k+i} for i = 1..l, then a linear
    return to r_{k+l+ℓ} over ℓ days. g'_k is the backward difference with
    a one-day step. With l = 0 there is no window and the seasonal drift
    applies everywhere.

    Raises:
        DataError: Non-positive current flow or forecast value, or a forecast
            issued on another day.
    """
    if not q_now > 0.0:
        raise DataError(f"current flow must be positive, got {q_now}")
    if forecast.start_index != k:
        raise DataError(f"forecast issued on day {forecast.start_index}, expected day {k}")
    if np.any(forecast.values <= 0.0):
        raise DataError("forecast flows must be positive")

    l = forecast.horizon
    if l == 0:
        return DriftSpec(
            start_index=k,
            window_end=k,
            g=[np.log(q_now)],
            g_slope=[0.0],
            profile=profile,
            ou=ou,
        )

    ell = forecast.relaxation_days
    g = np.empty(l + ell + 1)
    g[0] = np.log(q_now)
    g[1 : l + 1] = np.log(forecast.values)
    anchor = g[l]
    target = float(profile.at(k + l + ell)[0])
    weights = np.arange(1, ell + 1) / ell
    g[l + 1 :] = anchor * (1.0 - weights) + target * weights

    slope = np.zeros_like(g)
    slope[1:] = np.diff(g)
    return DriftSpec(
        start_index=k,
        window_end=k + l + ell,
        g=g,
        g_slope=slope,
        profile=profile,
        ou=ou,
    )


def drift_q(q: np.ndarray | float, t_n: np.ndarray | int, spec: DriftSpec) -> np.ndarray:
    """Drift of Q in m³/s per day at flow ``q`` on day ``t_n``."""
    q = np.asarray(q, dtype=np.float64)
    mean, slope = spec.mean_and_slope(t_n)
    ou = spec.ou
    return (slope + 0.5 * ou.sigma**2 - ou.kappa * (np.log(q) - mean)) * q


def coefficients_log(
    x: np.ndarray | float, t_n: np.ndarray | int, spec: DriftSpec
) -> tuple[np.ndarray, np.ndarray]:
    """
    Drift and squared diffusion of x = log Q on day ``t_n``.

    Returns:
        (m' − κ(x − m), σ²), both per day and broadcast to the shape of x.
    """
    x = np.asarray(x, dtype=np.float64)
    mean, slope = spec.mean_and_slope(t_n)
    drift = slope - spec.ou.kappa * (x - mean)
    diffusion = np.full(np.shape(drift), spec.ou.sigma**2)
    return drift, diffusion


def simulate_paths(
    q0: float,
    spec: DriftSpec,
    n_paths: int,
    n_steps: int,
    dt: float = 1.0,
    seed: int = 0,
) -> PathSet:
    """
    Euler–Maruyama paths of the flow, stepped in log space.

    Each path draws its normals from its own substream spawned from ``seed``,
    so path p is the same whatever ``n_paths`` is.

    Args:
        q0: Initial flow on day ``spec.start_index``.
        spec: Drift specification.
        n_paths: Number of paths.
        n_steps: Number of time points per path, the initial one included.
        dt: Step in days.
        seed: Root seed.
    """
    if not q0 > 0.0:
        raise DataError(f"initial flow must be positive, got {q0}")
    if not dt > 0.0:
        raise DataError(f"time step must be positive, got {dt}")
    if n_paths < 1 or n_steps < 1:
        raise DataError("n_paths and n_steps must be positive")

    streams = np.random.SeedSequence(seed).spawn(n_paths)
    shocks = np.stack(
        [np.random.default_rng(s).standard_normal(n_steps - 1) for s in streams]
    ) if n_steps > 1 else np.empty((n_paths, 0))

    sigma = spec.ou.sigma
    x = np.empty((n_paths, n_steps))
    x[:, 0] = np.log(q0)
    for s in range(1, n_steps):
        day = spec.start_index + int(np.floor((s - 1) * dt))
        drift, _ = coefficients_log(x[:, s - 1], day, spec)
        x[:, s] = x[:, s - 1] + drift * dt + sigma * np.sqrt(dt) * shocks[:, s - 1]

    logger.debug("paths_simulated", n_paths=n_paths, n_steps=n_steps, seed=seed)
    return PathSet(paths=np.exp(x), seed=seed, dt=dt, start_index=spec.start_index)


def blended_mean_flow(spec: DriftSpec, n_days: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Days, e^{m(t)} and e^{r(t)} from the issue day onwards.

    Plot data comparing the forecast-blended mean with the seasonal model.
    """
    days = np.arange(spec.start_index, spec.start_index + n_days)
    mean, _ = spec.mean_and_slope(days)
    seasonal, _ = spec.profile.at(days)
    return days, np.exp(mean), np.exp(seasonal)
