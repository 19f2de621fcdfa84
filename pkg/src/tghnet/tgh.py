"""Tukey g-and-h transform core: forward map, derivatives, numerically exact
inverse, density, quantiles, and sampling.

The transform is

    tau(z) = ((exp(g*z) - 1) / g) * exp(h * z^2 / 2)

continuously extended to ``z * exp(h*z^2/2)`` at g = 0.  For h >= 0 it is
strictly increasing in z, so its inverse can be found by bisection to any
requested tolerance; there is no closed form.  A variable
``mu + sigma * tau(Z)`` with Z standard normal follows the g-and-h
distribution: g controls skewness, h tail weight, and (g, h) = (0, 0)
recovers the normal distribution.

All functions accept scalars or numpy arrays (broadcast against each other)
and return a scalar when every input is scalar.  They are pure and safe to
call concurrently.  When an exp term exceeds the double range the forward
map saturates to +/-inf with the correct sign rather than producing NaN;
a saturated value compares correctly against any finite target, which is
what the bisection solver relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import SolverError

__all__ = [
    "ShapeParams",
    "TghParams",
    "InverseSolverConfig",
    "DEFAULT_SOLVER",
    "SMALL_G",
    "tau",
    "tau_prime",
    "dtau_dg",
    "dtau_dh",
    "tau_log_abs",
    "tau_inverse",
    "dtauinv_dztilde",
    "dtauinv_dg",
    "dtauinv_dh",
    "inverse_with_derivs",
    "log_density",
    "quantile",
    "sample",
    "standard_normal_cdf",
    "standard_normal_quantile",
    "solver_call_count",
]

# Below this |g| the g-dependent factors are replaced by their g->0 series:
# (exp(g*z)-1)/g and [exp(g*z)(g*z-1)+1]/g^2 lose all significant digits to
# cancellation as g -> 0.
SMALL_G = 1e-5

HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# Incremented once per inverse solve (scalar or vectorized); test diagnostics
# only, not synchronized across threads.
_solver_calls = 0


def solver_call_count() -> int:
    """Number of tau_inverse solves performed so far in this process."""
    return _solver_calls


def _validate_finite(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class ShapeParams:
    """Skewness g and tail-weight h >= 0 of the transform.

    Fields may be scalars or arrays (per-sample parameters); arrays must be
    mutually broadcastable.
    """

    g: float | np.ndarray
    h: float | np.ndarray

    def __post_init__(self):
        _validate_finite("g", self.g)
        h = _validate_finite("h", self.h)
        if np.any(h < 0):
            raise ValueError("h must be non-negative")


@dataclass(frozen=True)
class TghParams:
    """Location mu, scale sigma > 0, skewness g, tail weight h >= 0.

    mu and sigma carry the units of the target variable; g and h are
    dimensionless.  Fields may be scalars or broadcastable arrays.
    """

    mu: float | np.ndarray
    sigma: float | np.ndarray
    g: float | np.ndarray
    h: float | np.ndarray

    def __post_init__(self):
        _validate_finite("mu", self.mu)
        sigma = _validate_finite("sigma", self.sigma)
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        _validate_finite("g", self.g)
        h = _validate_finite("h", self.h)
        if np.any(h < 0):
            raise ValueError("h must be non-negative")

    @property
    def shape(self) -> ShapeParams:
        return ShapeParams(self.g, self.h)


@dataclass(frozen=True)
class InverseSolverConfig:
    """Bracketing and bisection controls for the transform inverse.

    abs_tolerance is the bracket width (in z units) at which bisection
    stops; the returned midpoint is within half that of the true root.
    Bracketing starts at [-initial_half_width, +initial_half_width] and
    doubles each endpoint that does not yet enclose the target.
    """

    abs_tolerance: float = 1e-12
    max_bisection_iters: int = 200
    initial_half_width: float = 8.0
    max_bracket_doublings: int = 60

    def __post_init__(self):
        if not self.abs_tolerance > 0:
            raise ValueError("abs_tolerance must be positive")
        if self.max_bisection_iters < 1:
            raise ValueError("max_bisection_iters must be >= 1")
        if not self.initial_half_width > 0:
            raise ValueError("initial_half_width must be positive")
        if self.max_bracket_doublings < 0:
            raise ValueError("max_bracket_doublings must be >= 0")


DEFAULT_SOLVER = InverseSolverConfig()


def _is_scalar(*values) -> bool:
    return all(np.ndim(v) == 0 for v in values)


def _ret(value: np.ndarray, scalar: bool):
    return float(value) if scalar else value


def _scaled_expm1(z, g, small):
    """(exp(g*z) - 1) / g with its g->0 limit z on the small-|g| branch."""
    g_safe = np.where(small, 1.0, g)
    with np.errstate(over="ignore"):
        full = np.expm1(g_safe * z) / g_safe
    return np.where(small, z, full)


def _dg_kernel(z, g, small):
    """[exp(u)(u - 1) + 1] / g^2 for u = g*z, series-protected near u = 0.

    Equals z^2 * K(u) with K(u) = sum_{k>=2} (k-1) u^{k-2} / k!; the direct
    formula cancels catastrophically for small |u|, so switch to the series
    K ~ 1/2 + u/3 + u^2/8 + u^3/30 when |u| < 1e-3 (truncation error below
    1e-14 relative there).  The small-|g| branch uses the same series, which
    reduces to z^2/2 + g*z^3/3 to the order retained.
    """
    u = np.asarray(g, dtype=float) * z
    series = 0.5 + u * (1.0 / 3.0 + u * (0.125 + u / 30.0))
    use_series = small | (np.abs(u) < 1e-3)
    u_safe = np.where(use_series, 1.0, u)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = (np.exp(u_safe) * (u_safe - 1.0) + 1.0) / (u_safe * u_safe)
    k = np.where(use_series, series, direct)
    return z * z * k


def _log_bracket(z, g, h, small):
    """log of [exp(g*z) + h*z*(exp(g*z)-1)/g], stable for large |g*z|.

    The bracket equals tau'(z) * exp(-h*z^2/2) and is strictly positive for
    h >= 0.  For g*z > 0 it is rewritten as
    g*z + log1p((h*z/g) * (1 - exp(-g*z))) so that no intermediate
    overflows; for g*z <= 0 the direct form cannot overflow.
    """
    z = np.asarray(z, dtype=float)
    g_safe = np.where(small, 1.0, g)
    u = g_safe * z
    pos = u > 0
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.where(small, 0.0, h * z / g_safe)
        log_pos = u + np.log1p(ratio * (-np.expm1(-np.abs(u))))
        direct = np.log(np.exp(np.where(pos, 0.0, u))
                        + np.where(pos, 0.0, h * z * np.expm1(u) / g_safe))
    out = np.where(pos, log_pos, direct)
    return np.where(small, np.log1p(h * z * z), out)


def tau(z, p: ShapeParams):
    """Forward transform ((exp(g*z)-1)/g) * exp(h*z^2/2).

    Strictly increasing in z for h >= 0 and tau(0) = 0.  Saturates to
    +/-inf (never NaN) when the exp terms overflow the double range.
    """
    scalar = _is_scalar(z, p.g, p.h)
    z = _validate_finite("z", z)
    g = np.asarray(p.g, dtype=float)
    h = np.asarray(p.h, dtype=float)
    small = np.abs(g) < SMALL_G
    with np.errstate(over="ignore"):
        out = _scaled_expm1(z, g, small) * np.exp(0.5 * h * z * z)
    return _ret(out, scalar)


def tau_prime(z, p: ShapeParams):
    """Derivative of tau in z: [exp(g*z) + h*z*(exp(g*z)-1)/g] * exp(h*z^2/2).

    Strictly positive for all z when h >= 0; equals 1 at z = 0.
    """
    scalar = _is_scalar(z, p.g, p.h)
    z = _validate_finite("z", z)
    g = np.asarray(p.g, dtype=float)
    h = np.asarray(p.h, dtype=float)
    small = np.abs(g) < SMALL_G
    with np.errstate(over="ignore", invalid="ignore"):
        bracket = np.where(
            small,
            1.0 + h * z * z,
            np.exp(np.where(small, 0.0, g) * z) + h * z * _scaled_expm1(z, g, small),
        )
        out = bracket * np.exp(0.5 * h * z * z)
    return _ret(out, scalar)


def dtau_dg(z, p: ShapeParams):
    """Sensitivity of tau to g: [exp(g*z)(g*z-1)+1]/g^2 * exp(h*z^2/2).

    Near g = 0 the bracketed ratio is evaluated by series,
    (z^2/2 + g*z^3/3 + ...) to avoid cancellation.
    """
    scalar = _is_scalar(z, p.g, p.h)
    z = _validate_finite("z", z)
    g = np.asarray(p.g, dtype=float)
    h = np.asarray(p.h, dtype=float)
    small = np.abs(g) < SMALL_G
    with np.errstate(over="ignore"):
        out = _dg_kernel(z, g, small) * np.exp(0.5 * h * z * z)
    return _ret(out, scalar)


def dtau_dh(z, p: ShapeParams):
    """Sensitivity of tau to h: (z^2/2) * tau(z)."""
    scalar = _is_scalar(z, p.g, p.h)
    z_arr = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore"):
        out = 0.5 * z_arr * z_arr * np.asarray(tau(z, p))
    return _ret(out, scalar)


def tau_log_abs(z, p: ShapeParams):
    """Sign and log-magnitude of tau, valid beyond the double range.

    Returns (sign, log|tau|); sign is sign(z) because tau is increasing
    with tau(0) = 0.  Used where tau itself would saturate.
    """
    scalar = _is_scalar(z, p.g, p.h)
    z = _validate_finite("z", z)
    g = np.asarray(p.g, dtype=float)
    h = np.asarray(p.h, dtype=float)
    small = np.abs(g) < SMALL_G
    g_safe = np.where(small, 1.0, g)
    u = g_safe * z
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        # log|expm1(u)|: u + log1p(-exp(-u)) for u > 0 avoids overflow.
        log_em1 = np.where(
            u > 0,
            u + np.log1p(-np.exp(-u)),
            np.log(np.abs(np.expm1(np.minimum(u, 0.0)))),
        )
        log_abs = np.where(
            small,
            np.log(np.abs(z)),
            log_em1 - np.log(np.abs(g_safe)),
        ) + 0.5 * h * z * z
    sign = np.sign(z)
    return _ret(sign, scalar), _ret(log_abs, scalar)


def tau_inverse(z_tilde, p: ShapeParams, cfg: InverseSolverConfig = DEFAULT_SOLVER):
    """Invert tau by bracket doubling followed by pure bisection.

    The initial bracket [-w, w] (w = cfg.initial_half_width) is widened by
    doubling each failing endpoint until tau(lo) <= z_tilde <= tau(hi);
    bisection then halves the bracket until its width is at most
    cfg.abs_tolerance and the midpoint is returned.  Monotonicity makes
    this unconditionally convergent.  Saturated (+/-inf) tau values during
    expansion compare correctly against the finite target, because a
    saturated magnitude exceeds every representable one.

    Raises SolverError if no bracket is found within
    cfg.max_bracket_doublings doublings (e.g. a target outside the closure
    of the range of tau, which is bounded on one side when h = 0 and
    g != 0).
    """
    global _solver_calls
    scalar = _is_scalar(z_tilde, p.g, p.h)
    zt = _validate_finite("z_tilde", z_tilde)
    g = np.asarray(p.g, dtype=float)
    h = np.asarray(p.h, dtype=float)
    zt, g, h = np.broadcast_arrays(zt, g, h)
    zt = zt.astype(float)
    _solver_calls += 1

    shape = ShapeParams(g, h)
    lo = np.full(zt.shape, -cfg.initial_half_width)
    hi = np.full(zt.shape, cfg.initial_half_width)
    t_lo = np.asarray(tau(lo, shape))
    t_hi = np.asarray(tau(hi, shape))
    for _ in range(cfg.max_bracket_doublings):
        need_lo = t_lo > zt
        need_hi = t_hi < zt
        if not (np.any(need_lo) or np.any(need_hi)):
            break
        lo = np.where(need_lo, 2.0 * lo, lo)
        hi = np.where(need_hi, 2.0 * hi, hi)
        if np.any(need_lo):
            t_lo = np.where(need_lo, np.asarray(tau(lo, shape)), t_lo)
        if np.any(need_hi):
            t_hi = np.where(need_hi, np.asarray(tau(hi, shape)), t_hi)
    bad = (t_lo > zt) | (t_hi < zt)
    if np.any(bad):
        i = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
        raise SolverError(
            "no bracket for inverse transform after "
            f"{cfg.max_bracket_doublings} doublings at sample index "
            f"{i[0] if len(i) == 1 else i}: "
            f"z_tilde={zt[i]!r}, g={g[i]!r}, h={h[i]!r}"
        )

    for _ in range(cfg.max_bisection_iters):
        if np.all(hi - lo <= cfg.abs_tolerance):
            break
        mid = 0.5 * (lo + hi)
        go_right = np.asarray(tau(mid, shape)) < zt
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    out = 0.5 * (lo + hi)
    return _ret(out, scalar)


def dtauinv_dztilde(z_tilde, p: ShapeParams, cfg: InverseSolverConfig = DEFAULT_SOLVER):
    """Derivative of the inverse in its argument: 1 / tau'(tau^{-1}(z_tilde))."""
    z_hat = tau_inverse(z_tilde, p, cfg)
    scalar = _is_scalar(z_tilde, p.g, p.h)
    out = 1.0 / np.asarray(tau_prime(z_hat, p))
    return _ret(out, scalar)


def dtauinv_dg(z_tilde, p: ShapeParams, cfg: InverseSolverConfig = DEFAULT_SOLVER):
    """Sensitivity of the inverse to g: -dtau_dg(z_hat) / tau'(z_hat)."""
    z_hat = tau_inverse(z_tilde, p, cfg)
    scalar = _is_scalar(z_tilde, p.g, p.h)
    out = -np.asarray(dtau_dg(z_hat, p)) / np.asarray(tau_prime(z_hat, p))
    return _ret(out, scalar)


def dtauinv_dh(z_tilde, p: ShapeParams, cfg: InverseSolverConfig = DEFAULT_SOLVER):
    """Sensitivity of the inverse to h: -dtau_dh(z_hat) / tau'(z_hat)."""
    z_hat = tau_inverse(z_tilde, p, cfg)
    scalar = _is_scalar(z_tilde, p.g, p.h)
    out = -np.asarray(dtau_dh(z_hat, p)) / np.asarray(tau_prime(z_hat, p))
    return _ret(out, scalar)


def inverse_with_derivs(z_tilde, p: ShapeParams, cfg: InverseSolverConfig = DEFAULT_SOLVER):
    """One inverse solve plus all three inverse derivatives.

    Returns (z_hat, d/dz_tilde, d/dg, d/dh).  The loss layer uses this to
    keep the cost at exactly one solve per evaluation.
    """
    scalar = _is_scalar(z_tilde, p.g, p.h)
    z_hat = tau_inverse(z_tilde, p, cfg)
    tp = np.asarray(tau_prime(z_hat, p))
    d_zt = 1.0 / tp
    d_g = -np.asarray(dtau_dg(z_hat, p)) / tp
    d_h = -np.asarray(dtau_dh(z_hat, p)) / tp
    return (
        _ret(np.asarray(z_hat), scalar),
        _ret(d_zt, scalar),
        _ret(d_g, scalar),
        _ret(d_h, scalar),
    )


def log_density(y, params: TghParams, cfg: InverseSolverConfig = DEFAULT_SOLVER):
    """Log of the g-and-h density at y, constant included.

    Equals -log(sigma) - log(tau'(z_hat)) - z_hat^2/2 - log(2*pi)/2 with
    z_hat = tau^{-1}((y - mu)/sigma); log tau' is evaluated in log space so
    large |g*z_hat| cannot overflow.
    """
    scalar = _is_scalar(y, params.mu, params.sigma, params.g, params.h)
    y = _validate_finite("y", y)
    mu = np.asarray(params.mu, dtype=float)
    sigma = np.asarray(params.sigma, dtype=float)
    g = np.asarray(params.g, dtype=float)
    h = np.asarray(params.h, dtype=float)
    z_tilde = (y - mu) / sigma
    z_hat = np.asarray(tau_inverse(z_tilde, ShapeParams(g, h), cfg))
    small = np.abs(g) < SMALL_G
    log_tp = _log_bracket(z_hat, g, h, small) + 0.5 * h * z_hat * z_hat
    out = -np.log(sigma) - log_tp - 0.5 * z_hat * z_hat - HALF_LOG_TWO_PI
    return _ret(out, scalar)


def quantile(alpha, params: TghParams):
    """Quantile function mu + sigma * tau(Phi^{-1}(alpha)).

    Monotone non-decreasing in alpha; alpha = 0.5 gives mu exactly.
    """
    alpha_arr = np.asarray(alpha, dtype=float)
    if np.any(alpha_arr <= 0) or np.any(alpha_arr >= 1):
        raise ValueError("alpha must lie strictly inside (0, 1)")
    scalar = _is_scalar(alpha, params.mu, params.sigma, params.g, params.h)
    z = ndtri(alpha_arr)
    out = np.asarray(params.mu) + np.asarray(params.sigma) * np.asarray(
        tau(z, params.shape)
    )
    return _ret(out, scalar)


def sample(params: TghParams, n: int, seed: int) -> np.ndarray:
    """Draw n variates mu + sigma * tau(Z), Z standard normal.

    Deterministic for a fixed seed.  Parameter fields may be scalars or
    length-n arrays (per-draw parameters).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    return np.asarray(params.mu) + np.asarray(params.sigma) * np.asarray(
        tau(z, params.shape)
    )


def standard_normal_cdf(z):
    """Phi(z), the standard normal CDF."""
    scalar = _is_scalar(z)
    out = ndtr(np.asarray(z, dtype=float))
    return _ret(out, scalar)


def standard_normal_quantile(alpha):
    """Phi^{-1}(alpha); raises on alpha outside (0, 1)."""
    arr = np.asarray(alpha, dtype=float)
    if np.any(arr <= 0) or np.any(arr >= 1):
        raise ValueError("alpha must lie strictly inside (0, 1)")
    scalar = _is_scalar(alpha)
    return _ret(ndtri(arr), scalar)
