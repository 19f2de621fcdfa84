"""Goodness-of-fit residuals, QQ data, prediction intervals, coverage, and
density curves for fitted models.

Residuals: z_hat = tau^{-1}((y - mu)/sigma) is standard normal under a
correctly specified model; u = Phi(z_hat) is then uniform on (0, 1).  The
report carries both, QQ pairs at k/(n+1) plotting positions, the two-sided
KS distance of u from uniform, and the mean negative log-likelihood
(constant included).

Intervals: the symmetric variant places alpha/2 in each tail; the shortest
variant spends the tail budget asymmetrically, minimizing
sigma * (tau(z_{1-gamma}) - tau(-z_{1-alpha+gamma})) over gamma in
[0, alpha] by a coarse grid plus golden-section refinement.  Coverage is
exactly 1 - alpha for every gamma by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import tgh
from .data import write_csv
from .tgh import (
    DEFAULT_SOLVER,
    InverseSolverConfig,
    TghParams,
    standard_normal_cdf,
    standard_normal_quantile,
)

__all__ = [
    "ResidualReport",
    "PredictionInterval",
    "residuals",
    "ks_uniform",
    "ks_critical_value",
    "symmetric_interval",
    "shortest_interval",
    "interval_coverage",
    "coverage_table",
    "density_curve",
    "binned_residual_summary",
    "write_report_csv",
    "write_qq_csv",
    "write_summary_json",
]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ResidualReport:
    """Per-sample residuals plus summary statistics."""

    z_hat: np.ndarray
    u: np.ndarray
    qq_theoretical: np.ndarray
    qq_empirical: np.ndarray
    ks_statistic: float
    mean_nll: float


@dataclass(frozen=True)
class PredictionInterval:
    """Interval endpoints in target units.

    gamma is the lower-tail budget of the shortest variant; the symmetric
    variant stores the 0 sentinel with variant="symmetric".  Fields are
    arrays when built from per-row parameters.
    """

    lower: np.ndarray | float
    upper: np.ndarray | float
    alpha: float
    gamma: np.ndarray | float
    variant: str

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise ValueError("interval endpoints out of order")
        gamma = np.asarray(self.gamma)
        if np.any(gamma < 0) or np.any(gamma > self.alpha):
            raise ValueError("gamma must lie in [0, alpha]")


def ks_uniform(u: np.ndarray) -> float:
    """Two-sided KS distance of a sample from the uniform law on [0, 1]."""
    u = np.sort(np.asarray(u, dtype=float))
    n = len(u)
    if n == 0:
        raise ValueError("empty sample")
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u)
    d_minus = np.max(u - (i - 1) / n)
    return float(max(d_plus, d_minus))


def ks_critical_value(n: int, level: float = 0.01) -> float:
    """Asymptotic KS critical value sqrt(-ln(level/2)/2)/sqrt(n).

    Approximate below n ~ 100; fine for the sample sizes used here.
    """
    return float(np.sqrt(-0.5 * np.log(level / 2.0)) / np.sqrt(n))


def residuals(y, params: TghParams, cfg: InverseSolverConfig = DEFAULT_SOLVER) -> ResidualReport:
    """Residual report of targets against per-sample parameters.

    Uniform residuals are clipped into the open interval at the float
    boundary (Phi saturates to exactly 0/1 for |z_hat| beyond ~39).
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(params.mu, dtype=float)
    sigma = np.asarray(params.sigma, dtype=float)
    if mu.ndim == 1 and len(mu) != len(y):
        raise ValueError(f"length mismatch: {len(y)} targets vs {len(mu)} parameter rows")
    z_tilde = (y - mu) / sigma
    z_hat = np.asarray(tgh.tau_inverse(z_tilde, params.shape, cfg))
    u = np.clip(
        np.asarray(standard_normal_cdf(z_hat)),
        np.nextafter(0.0, 1.0),
        np.nextafter(1.0, 0.0),
    )
    n = len(y)
    positions = np.arange(1, n + 1) / (n + 1.0)
    qq_theoretical = np.asarray(standard_normal_quantile(positions))
    qq_empirical = np.sort(z_hat)
    mean_nll = float(np.mean(-np.asarray(tgh.log_density(y, params, cfg))))
    return ResidualReport(
        z_hat=z_hat,
        u=u,
        qq_theoretical=qq_theoretical,
        qq_empirical=qq_empirical,
        ks_statistic=ks_uniform(u),
        mean_nll=mean_nll,
    )


def _interval_at_gamma(params: TghParams, alpha: float, gamma):
    """Endpoints [mu + sigma*tau(-z_{1-alpha+gamma}), mu + sigma*tau(z_{1-gamma})]."""
    mu = np.asarray(params.mu, dtype=float)
    sigma = np.asarray(params.sigma, dtype=float)
    shape = params.shape
    z_lo = -np.asarray(standard_normal_quantile(1.0 - alpha + np.asarray(gamma)))
    z_hi = np.asarray(standard_normal_quantile(1.0 - np.asarray(gamma)))
    lower = mu + sigma * np.asarray(tgh.tau(z_lo, shape))
    upper = mu + sigma * np.asarray(tgh.tau(z_hi, shape))
    return lower, upper


def symmetric_interval(params: TghParams, alpha: float) -> PredictionInterval:
    """Central interval with alpha/2 tail mass on each side."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    lower, upper = _interval_at_gamma(params, alpha, alpha / 2.0)
    scalar = np.ndim(params.mu) == 0
    zeros = 0.0 if scalar else np.zeros_like(np.asarray(params.mu, dtype=float))
    if scalar:
        lower, upper = float(lower), float(upper)
    return PredictionInterval(lower, upper, alpha, zeros, "symmetric")


def shortest_interval(params: TghParams, alpha: float, grid_size: int = 101,
                      refine_tol: float = 1e-6) -> PredictionInterval:
    """Interval of minimal length among all with coverage 1 - alpha.

    A uniform gamma grid on [eps, alpha - eps] locates the basin; golden
    section narrows it to refine_tol.  The symmetric gamma = alpha/2 is
    always among the candidates, so the result is never longer than the
    symmetric interval.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    scalar = np.ndim(params.mu) == 0
    mu = np.atleast_1d(np.asarray(params.mu, dtype=float))
    sigma = np.atleast_1d(np.asarray(params.sigma, dtype=float))
    g = np.broadcast_to(np.asarray(params.g, dtype=float), mu.shape)
    h = np.broadcast_to(np.asarray(params.h, dtype=float), mu.shape)
    vec = TghParams(mu, sigma, g, h)

    def length(gamma):
        lower, upper = _interval_at_gamma(vec, alpha, gamma)
        return upper - lower

    eps = alpha * 1e-4
    grid = np.linspace(eps, alpha - eps, grid_size)
    lengths = np.stack([length(gam) for gam in grid])  # (grid_size, n)
    best = np.argmin(lengths, axis=0)
    step = grid[1] - grid[0]
    lo = np.maximum(grid[best] - step, eps)
    hi = np.minimum(grid[best] + step, alpha - eps)

    a, b = lo, hi
    while np.max(b - a) > refine_tol:
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        take_left = length(c) < length(d)
        b = np.where(take_left, d, b)
        a = np.where(take_left, a, c)
    gamma_star = 0.5 * (a + b)

    # candidate set: refined optimum and the exact symmetric split
    cand = np.stack([gamma_star, np.full_like(gamma_star, alpha / 2.0)])
    cand_len = np.stack([length(gam) for gam in cand])
    pick = np.argmin(cand_len, axis=0)
    gamma_star = cand[pick, np.arange(len(gamma_star))]
    lower, upper = _interval_at_gamma(vec, alpha, gamma_star)
    if scalar:
        return PredictionInterval(
            float(lower[0]), float(upper[0]), alpha, float(gamma_star[0]), "shortest"
        )
    return PredictionInterval(lower, upper, alpha, gamma_star, "shortest")


def interval_coverage(y, lower, upper) -> float:
    """Fraction of targets inside [lower, upper]."""
    y = np.asarray(y, dtype=float)
    inside = (y >= np.asarray(lower)) & (y <= np.asarray(upper))
    return float(np.mean(inside))


def coverage_table(y, params: TghParams,
                   alphas=(0.5, 0.2, 0.1, 0.05, 0.01)) -> dict[str, float]:
    """Empirical coverage of symmetric intervals at several levels.

    Keys are the nominal coverages formatted as strings (e.g. "0.95"); a
    calibrated model gives values near the keys.
    """
    table = {}
    for alpha in alphas:
        iv = symmetric_interval(params, alpha)
        table[f"{1 - alpha:g}"] = interval_coverage(y, iv.lower, iv.upper)
    return table


def density_curve(params: TghParams, y_grid) -> np.ndarray:
    """Density values exp(log_density) on a sorted target grid."""
    y_grid = np.asarray(y_grid, dtype=float)
    if np.any(np.diff(y_grid) < 0):
        raise ValueError("y_grid must be sorted ascending")
    return np.exp(np.asarray(tgh.log_density(y_grid, params)))


def binned_residual_summary(feature, u, n_bins: int = 10):
    """Mean uniform residual per feature bin, as a dependence diagnostic.

    Returns (bin_edges, bin_mean, bin_count); under a correct model each
    bin mean is near 0.5 with no trend in the feature.
    """
    feature = np.asarray(feature, dtype=float)
    u = np.asarray(u, dtype=float)
    edges = np.linspace(feature.min(), feature.max(), n_bins + 1)
    which = np.clip(np.digitize(feature, edges[1:-1]), 0, n_bins - 1)
    means = np.full(n_bins, np.nan)
    counts = np.zeros(n_bins, dtype=int)
    for b in range(n_bins):
        mask = which == b
        counts[b] = int(np.sum(mask))
        if counts[b]:
            means[b] = float(np.mean(u[mask]))
    return edges, means, counts


def write_report_csv(path, y, params: TghParams, report: ResidualReport) -> None:
    """One row per sample: y, mu, sigma, g, h, z_hat, u."""
    n = len(report.z_hat)
    write_csv(
        path,
        {
            "y": np.asarray(y, dtype=float),
            "mu": np.broadcast_to(np.asarray(params.mu, dtype=float), (n,)),
            "sigma": np.broadcast_to(np.asarray(params.sigma, dtype=float), (n,)),
            "g": np.broadcast_to(np.asarray(params.g, dtype=float), (n,)),
            "h": np.broadcast_to(np.asarray(params.h, dtype=float), (n,)),
            "z_hat": report.z_hat,
            "u": report.u,
        },
    )


def write_qq_csv(path, report: ResidualReport) -> None:
    write_csv(
        path,
        {
            "theoretical": report.qq_theoretical,
            "empirical": report.qq_empirical,
        },
    )


def write_summary_json(path, report: ResidualReport, extra: dict | None = None) -> None:
    summary = {
        "n": len(report.z_hat),
        "mean_nll": report.mean_nll,
        "ks_statistic": report.ks_statistic,
        "ks_critical_1pct": ks_critical_value(len(report.z_hat), 0.01),
        "z_hat_mean": float(np.mean(report.z_hat)),
        "z_hat_var": float(np.var(report.z_hat)),
    }
    if extra:
        summary.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
