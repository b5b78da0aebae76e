"""Risk-bound calculators.

Nothing here feeds back into estimation. The functions evaluate the
right-hand sides of the PAC-Bayes bound (finite dictionaries) and of the
sparsity oracle inequality so tests and diagnostics can assert them.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr


# C_{g,f} for the supported link functions
LINK_CONSTANTS = {
    "identity": 1.0,
    "logistic": 3.0,
    "probit": (1.0 / math.pi + 1.0) / 2.0,
}


@dataclass(frozen=True)
class SoiInputs:
    lambda_star: np.ndarray
    beta: float
    tau: float
    alpha: float
    n: int
    M: int
    bias_term: float = 0.0
    link_constant: float = 1.0
    radius: float = math.inf

    def __post_init__(self):
        lam = np.asarray(self.lambda_star, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "lambda_star", lam)
        if lam.shape[0] != self.M:
            raise ValueError(f"lambda_star has length {lam.shape[0]}, expected M={self.M}")
        if not self.beta > 0 or not self.tau > 0:
            raise ValueError("beta and tau must be positive")
        if self.alpha < 0 or self.bias_term < 0:
            raise ValueError("alpha and bias_term must be nonnegative")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.link_constant > 0:
            raise ValueError(f"link_constant must be positive, got {self.link_constant}")

    @classmethod
    def from_dict(cls, payload):
        payload = dict(payload)
        payload["lambda_star"] = np.asarray(payload["lambda_star"], dtype=np.float64)
        payload.setdefault("M", payload["lambda_star"].shape[0])
        if "radius" in payload and payload["radius"] is None:
            payload["radius"] = math.inf
        return cls(**payload)


def _log_ratio_sum(lambda_star, tau):
    return float(np.sum(np.log1p(np.abs(lambda_star) / tau)))


def soi_terms(inputs):
    """The four summands of the oracle inequality, by name."""
    lam = inputs.lambda_star
    n, beta = inputs.n, inputs.beta
    return {
        "bias": float(inputs.bias_term),
        "log_sparsity": 4.0 * beta / n * _log_ratio_sum(lam, inputs.tau),
        "l1_penalty": 2.0 * beta * (inputs.alpha * float(np.sum(np.abs(lam))) + 1.0) / n,
        "prior_spread": 4.0 * math.e * inputs.link_constant * inputs.tau ** 2 * inputs.M,
    }


def soi_rhs(inputs):
    """bias + (4 beta/n) sum log(1 + |l*_j|/tau) + 2 beta (alpha |l*|_1 + 1)/n + 4e C tau^2 M"""
    terms = soi_terms(inputs)
    return terms["bias"] + terms["log_sparsity"] + terms["l1_penalty"] + terms["prior_spread"]


def soi_preconditions(inputs):
    """Which hypotheses of the oracle inequality hold for these inputs."""
    two_m_tau = 2.0 * inputs.M * inputs.tau
    l1 = float(np.sum(np.abs(inputs.lambda_star)))
    alpha_cap = 1.0 / (4.0 * inputs.M * inputs.tau)
    checks = {
        "radius_exceeds_2Mtau": inputs.radius > two_m_tau,
        "alpha_at_most_1_over_4Mtau": inputs.alpha <= alpha_cap,
        "lambda_star_inside_shrunk_ball": l1 <= inputs.radius - two_m_tau,
    }
    checks["all"] = all(checks.values())
    return checks


def kl_sparsity_bound(lambda_star, tau, alpha):
    """2 (alpha |l*|_1 + 1) + 4 sum log(1 + |l*_j| / tau); needs M >= 2."""
    lam = np.asarray(lambda_star, dtype=np.float64).reshape(-1)
    if lam.shape[0] < 2:
        raise ValueError(f"the KL bound needs M >= 2, got M={lam.shape[0]}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return 2.0 * (alpha * float(np.sum(np.abs(lam))) + 1.0) + 4.0 * _log_ratio_sum(lam, tau)


def kl_second_moment_bound(tau, alpha, M):
    """Bound 4 tau^2 exp(4 M alpha tau) on the per-coordinate second moment
    of the shifted prior used in the KL estimate."""
    return 4.0 * tau * tau * math.exp(4.0 * M * alpha * tau)


def corollary1_rhs(candidate_losses, beta, n):
    """min_j loss_j + beta log(M) / n for the uniform prior on M candidates."""
    losses = np.asarray(candidate_losses, dtype=np.float64).reshape(-1)
    if losses.size == 0:
        raise ValueError("candidate_losses is empty")
    return float(losses.min()) + beta * math.log(losses.size) / n


def theorem1_rhs_discrete(candidate_losses, beta, n, posterior, prior=None):
    """sum_j p_j loss_j + beta KL(p, pi) / n for a finite dictionary.

    The bound holds for every p; minimising over p recovers
    -(beta/n) log sum_j pi_j exp(-n loss_j / beta).
    """
    losses = np.asarray(candidate_losses, dtype=np.float64).reshape(-1)
    p = np.asarray(posterior, dtype=np.float64).reshape(-1)
    if losses.size == 0:
        raise ValueError("candidate_losses is empty")
    prior = np.full(losses.size, 1.0 / losses.size) if prior is None else np.asarray(prior, dtype=np.float64)
    if p.shape != losses.shape or prior.shape != losses.shape:
        raise ValueError("losses, posterior and prior must have the same length")
    if not (math.isclose(p.sum(), 1.0, abs_tol=1e-9) and math.isclose(prior.sum(), 1.0, abs_tol=1e-9)):
        raise ValueError("posterior and prior must each sum to 1")
    kl = float(np.sum(rel_entr(p, prior)))
    return float(p @ losses) + beta * kl / n


def link_constant(link):
    try:
        return LINK_CONSTANTS[link]
    except KeyError:
        raise ValueError(f"unknown link {link!r} (choose from {', '.join(LINK_CONSTANTS)})") from None


def dictionary_bound(radius, phi_sup, link_slope_sup=1.0):
    """L = 2 R ||g'||_inf L_phi, the sup-norm bound on f_lambda - f over the l1 ball."""
    if not radius > 0 or phi_sup < 0 or link_slope_sup < 0:
        raise ValueError("radius must be positive, phi_sup and link_slope_sup nonnegative")
    return 2.0 * radius * link_slope_sup * phi_sup
