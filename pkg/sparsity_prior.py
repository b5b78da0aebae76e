"""Heavy-tailed sparsity prior.

Density (up to its normalising constant) on the l1 ball of radius R:

    prod_j exp(-huber(alpha * lambda_j)) / (tau^2 + lambda_j^2)^2

With alpha = 0 and R = inf each coordinate is tau * U where U has density
2 / (pi (1 + u^2)^2), a rescaled Student t(3). The normalising constant is
never needed: the Langevin sampler only uses the gradient of the log-density.
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats


class UnsupportedRegimeError(ValueError):
    """Raised when an operation is only available for a restricted parameter regime."""


@dataclass(frozen=True)
class PriorParams:
    alpha: float = 0.0
    tau: float = 1.0
    radius: float = math.inf

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")


def huber(t):
    """t^2 on [-1, 1], 2|t| - 1 outside. Works on scalars and arrays."""
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    out = np.where(a <= 1.0, t * t, 2.0 * a - 1.0)
    return float(out) if out.ndim == 0 else out


def huber_prime(t):
    """Derivative of huber: 2t on [-1, 1], 2 sign(t) outside."""
    t = np.asarray(t, dtype=np.float64)
    out = np.where(np.abs(t) <= 1.0, 2.0 * t, 2.0 * np.sign(t))
    return float(out) if out.ndim == 0 else out


def log_prior_unnorm(lam, params):
    """Log-density without the tau^{2M}/C constant; -inf outside the l1 ball."""
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    if np.sum(np.abs(lam)) > params.radius:
        return -math.inf
    value = -2.0 * np.sum(np.log(params.tau ** 2 + lam * lam))
    if params.alpha > 0:
        value -= np.sum(huber(params.alpha * lam))
    return float(value)


def grad_log_prior(lam, params):
    """Gradient of log_prior_unnorm in the open l1 ball.

    Coordinate j: -4 lambda_j / (tau^2 + lambda_j^2) - alpha * huber'(alpha lambda_j).
    """
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    if math.isfinite(params.radius) and np.sum(np.abs(lam)) >= params.radius:
        raise ValueError("grad_log_prior evaluated outside the open support ||lambda||_1 < R")
    grad = -4.0 * lam / (params.tau ** 2 + lam * lam)
    if params.alpha > 0:
        grad = grad - params.alpha * huber_prime(params.alpha * lam)
    return grad


def prior_marginal_density(x, tau):
    """Univariate density 2 tau^3 / (pi (tau^2 + x^2)^2) (alpha = 0, R = inf)."""
    x = np.asarray(x, dtype=np.float64)
    out = 2.0 * tau ** 3 / (math.pi * (tau ** 2 + x * x) ** 2)
    return float(out) if out.ndim == 0 else out


def _unit_marginal_inverse_cdf(p):
    """Inverse of F(u) = 1/2 + (arctan u)/pi + u / (pi (1 + u^2)).

    Substituting u = tan(theta) gives F = 1/2 + (2 theta + sin 2 theta) / (2 pi),
    so we solve 2 theta + sin 2 theta = pi (2p - 1) for theta in (-pi/2, pi/2)
    by Newton's method; the left side is increasing with derivative 4 cos^2 theta.
    """
    target = math.pi * (2.0 * p - 1.0)
    # 2t + sin 2t <= 4t for t > 0, so this start sits on the near side of the root
    # and the iterates increase monotonically (the map is concave there)
    theta = np.clip(target / 4.0, -1.5, 1.5)
    for _ in range(60):
        f = 2.0 * theta + np.sin(2.0 * theta) - target
        deriv = 4.0 * np.cos(theta) ** 2
        step = np.where(deriv > 1e-300, f / np.maximum(deriv, 1e-300), 0.0)
        theta = np.clip(theta - step, -math.pi / 2 + 1e-15, math.pi / 2 - 1e-15)
        if np.max(np.abs(step)) < 1e-15:
            break
    return np.tan(theta)


def sample_prior_marginal(params, count, seed):
    """iid draws from one coordinate of the prior, alpha = 0 and R = inf only.

    Uses the t(3) representation: if T ~ t(3) then T / sqrt(3) has density
    2 / (pi (1 + u^2)^2), so lambda = tau * T / sqrt(3).
    """
    if params.alpha != 0 or math.isfinite(params.radius):
        raise UnsupportedRegimeError(
            "exact marginal sampling needs alpha = 0 and radius = inf "
            f"(got alpha={params.alpha}, radius={params.radius})"
        )
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    return params.tau * rng.standard_t(3, size=int(count)) / math.sqrt(3.0)


def sample_prior_marginal_inverse_cdf(params, count, seed):
    """Same law as sample_prior_marginal, drawn by numerical inversion of the CDF."""
    if params.alpha != 0 or math.isfinite(params.radius):
        raise UnsupportedRegimeError("exact marginal sampling needs alpha = 0 and radius = inf")
    rng = np.random.default_rng(seed)
    p = rng.uniform(size=int(count))
    return params.tau * _unit_marginal_inverse_cdf(p)


HEAVY_TAIL_LAWS = ("gaussian", "laplace", "student_t3")


def heavy_tail_draws(count, seed, density_at_origin=100.0):
    """Scaled Gaussian, Laplace and t(3) draws with equal density at the origin.

    Returns {law: array of count draws}, laws in HEAVY_TAIL_LAWS order.
    """
    if int(count) < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not density_at_origin > 0:
        raise ValueError(f"density_at_origin must be positive, got {density_at_origin}")
    rng = np.random.default_rng(seed)
    d0 = float(density_at_origin)
    laws = {
        # N(0, s^2) has density 1/(s sqrt(2 pi)) at 0
        "gaussian": stats.norm(scale=1.0 / (d0 * math.sqrt(2.0 * math.pi))),
        # Laplace(b) has density 1/(2b) at 0
        "laplace": stats.laplace(scale=1.0 / (2.0 * d0)),
        # t(3) has density 2/(pi sqrt(3)) at 0
        "student_t3": stats.t(df=3, scale=2.0 / (math.pi * math.sqrt(3.0) * d0)),
    }
    return {name: laws[name].rvs(size=int(count), random_state=rng) for name in HEAVY_TAIL_LAWS}


def heavy_tail_comparison(count, seed, density_at_origin=100.0):
    """Quantile summary of heavy_tail_draws.

    Returns {law: {"q01", "q25", "median", "q75", "q99", "frac_small"}} where
    frac_small is the share of draws within 1/density_at_origin of zero.
    Heavier tails leave most draws near zero and a few far away.
    """
    d0 = float(density_at_origin)
    summary = {}
    for name, draws in heavy_tail_draws(count, seed, d0).items():
        q = np.quantile(draws, [0.01, 0.25, 0.5, 0.75, 0.99])
        summary[name] = {
            "q01": float(q[0]),
            "q25": float(q[1]),
            "median": float(q[2]),
            "q75": float(q[3]),
            "q99": float(q[4]),
            "frac_small": float(np.mean(np.abs(draws) <= 1.0 / d0)),
        }
    return summary


def write_heavy_tail_csv(path, count, seed, density_at_origin=100.0):
    """Dump the raw draws, one column per law, same streams as heavy_tail_comparison."""
    frame = pd.DataFrame(heavy_tail_draws(count, seed, density_at_origin), columns=list(HEAVY_TAIL_LAWS))
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
