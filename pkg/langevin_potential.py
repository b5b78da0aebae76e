"""Langevin potential for the linear EWA posterior.

    V(lambda) = -||Y - X lambda||^2 / beta + log prior(lambda)

expanded through the Gram cache as
    -(||Y||^2 - 2 lambda'X'Y + lambda'X'X lambda) / beta + log prior(lambda),
so one evaluation of the gradient costs one M x M matrix-vector product.
Only the identity link is supported.
"""

from dataclasses import dataclass

import numpy as np

from regression_data import GramCache
from sparsity_prior import PriorParams, log_prior_unnorm, grad_log_prior


@dataclass(frozen=True)
class Potential:
    gram: GramCache
    beta: float
    prior: PriorParams
    # Debug switch: drop the prior and keep the pure quadratic part
    include_prior: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def dim(self):
        return self.gram.xty.shape[0]


def _check_dim(potential, lam):
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    if lam.shape[0] != potential.dim:
        raise ValueError(f"lambda has length {lam.shape[0]}, potential has dimension {potential.dim}")
    return lam


def value(potential, lam, responses_norm_sq=None):
    """V(lambda). responses_norm_sq defaults to the ||Y||^2 cached in the Gram data."""
    lam = _check_dim(potential, lam)
    g = potential.gram
    y2 = g.responses_norm_sq if responses_norm_sq is None else float(responses_norm_sq)
    residual_sq = y2 - 2.0 * (lam @ g.xty) + lam @ (g.xtx @ lam)
    out = -residual_sq / potential.beta
    if potential.include_prior:
        out += log_prior_unnorm(lam, potential.prior)
    return float(out)


def gradient(potential, lam):
    """(2/beta)(X'Y - X'X lambda) + grad log prior(lambda)."""
    lam = _check_dim(potential, lam)
    g = potential.gram
    grad = (2.0 / potential.beta) * (g.xty - g.xtx @ lam)
    if potential.include_prior:
        grad += grad_log_prior(lam, potential.prior)
    return grad


def make_gradient(potential):
    """Unchecked gradient closure for the sampler's inner loop (radius = inf only).

    Same arithmetic as gradient(), minus the per-call validation.
    """
    g = potential.gram
    xtx, xty = g.xtx, g.xty
    scale = 2.0 / potential.beta
    tau_sq = potential.prior.tau ** 2
    alpha = potential.prior.alpha

    if not potential.include_prior:
        def grad(lam):
            return scale * (xty - xtx @ lam)
    elif alpha > 0:
        def grad(lam):
            out = scale * (xty - xtx @ lam)
            out += -4.0 * lam / (tau_sq + lam * lam)
            t = alpha * lam
            out -= alpha * np.where(np.abs(t) <= 1.0, 2.0 * t, 2.0 * np.sign(t))
            return out
    else:
        def grad(lam):
            out = scale * (xty - xtx @ lam)
            out += -4.0 * lam / (tau_sq + lam * lam)
            return out
    return grad


def curvature_bound(potential):
    """Spectral norm of the quadratic part's Hessian, (2/beta) ||X'X||_2."""
    return 2.0 * float(np.linalg.norm(potential.gram.xtx, 2)) / potential.beta
