"""Estimators: EWA by Langevin Monte-Carlo, discrete EWA, Lasso, ideal Lasso-Gauss.

Default EWA tuning (noise level sigma known):
    alpha = 0,  beta = 4 sigma^2,  tau = 4 sigma / sqrt(Tr(X'X)),
    T = n,      h = beta / Tr(X'X)   (= beta / (M n) for +-1 designs)

Lasso objective:
    (1/n) ||Y - X lambda||^2 + 2 r ||lambda||_1,
so coordinates are soft-thresholded at r and scikit-learn's Lasso(alpha=r) solves the
same problem. The auto level is sigma sqrt(2 log M / n), half of theoretical_reg_level.
"""

import sys
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import softmax

import settings
from regression_data import build_gram, empirical_norm_sq, functional_loss
from sparsity_prior import PriorParams
from langevin_potential import Potential, curvature_bound
from langevin_sampler import SamplerConfig, run_with_restarts


class StepSizeWarning(UserWarning):
    """Euler step outside the stability region of the quadratic part."""


class LassoConvergenceWarning(UserWarning):
    """Coordinate descent stopped at max_sweeps before reaching tol."""


# ═══════════════════════════════════════════════════════════
#  EWA via Langevin Monte-Carlo
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class EwaConfig:
    # None means "derive from sigma" in resolve_tuning
    beta: float = None
    tau: float = None
    alpha: float = 0.0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.beta is not None and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")

    @property
    def resolved(self):
        return self.beta is not None and self.tau is not None and self.sampler.resolved

    def to_dict(self):
        s = self.sampler
        return {
            "beta": self.beta,
            "tau": self.tau,
            "alpha": self.alpha,
            "step": s.step,
            "horizon": s.horizon,
            "burn_in": s.burn_in,
            "seed": s.seed,
            "max_restarts": s.max_restarts,
            "divergence_threshold": s.divergence_threshold,
        }


def resolve_tuning(dataset, config, gram=None):
    """Fill every auto (None) field of the config from sigma and the design."""
    if config.resolved:
        _check_step(dataset, config, gram)
        return config

    sigma = dataset.noise_level
    if sigma is None and (config.beta is None or config.tau is None):
        raise ValueError("auto tuning needs the noise level sigma (pass --sigma or a sidecar)")
    gram = build_gram(dataset) if gram is None else gram

    beta = 4.0 * sigma ** 2 if config.beta is None else config.beta
    tau = 4.0 * sigma / math.sqrt(gram.trace_xtx) if config.tau is None else config.tau
    sampler = config.sampler
    step = beta / gram.trace_xtx if sampler.step is None else sampler.step
    horizon = float(dataset.n) if sampler.horizon is None else sampler.horizon
    resolved = replace(config, beta=beta, tau=tau, sampler=replace(sampler, step=step, horizon=horizon))
    _check_step(dataset, resolved, gram)
    return resolved


def _check_step(dataset, config, gram):
    """Warn when h (2/beta)||X'X||_2 > 2, outside Euler stability for the quadratic part."""
    gram = build_gram(dataset) if gram is None else gram
    potential = Potential(gram=gram, beta=config.beta, prior=PriorParams(alpha=config.alpha, tau=config.tau))
    ratio = config.sampler.step * curvature_bound(potential)
    if ratio > 2.0:
        warnings.warn(
            f"step h={config.sampler.step:.3g} gives h*(2/beta)*||X'X|| = {ratio:.3g} > 2; "
            "the chain will likely diverge and be restarted",
            StepSizeWarning,
        )
    return ratio


def ewa_fit(dataset, config, gram=None, verbose=False):
    """Continuous EWA: the Langevin average for the sparsity-prior posterior.

    Returns (estimate, SamplerReport). A diverged run returns the zero vector
    and report.diverged = True.
    """
    gram = build_gram(dataset) if gram is None else gram
    config = resolve_tuning(dataset, config, gram)
    prior = PriorParams(alpha=config.alpha, tau=config.tau)
    potential = Potential(gram=gram, beta=config.beta, prior=prior)
    report = run_with_restarts(potential, config.sampler, verbose=verbose)
    if verbose:
        status = "DIVERGED" if report.diverged else f"{report.steps_taken:,} steps"
        print(f"[EWA] n={dataset.n} M={dataset.M} beta={config.beta:.4g} tau={config.tau:.4g} "
              f"h={report.final_step:.3g} -> {status}, {report.restarts_used} restart(s)", file=sys.stderr)
    return report.average.copy(), report


# ═══════════════════════════════════════════════════════════
#  Discrete EWA (finite dictionary)
# ═══════════════════════════════════════════════════════════

def ewa_discrete(predictions, responses, beta, prior_weights=None):
    """Exponential weights over a finite dictionary.

    predictions: n x M matrix, column j holds f_j(Z_i). Weight j is
    proportional to prior_j * exp(-||Y - f_j||^2 / beta); the prior defaults to
    uniform. softmax subtracts the max exponent, so huge losses do not underflow.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    predictions = np.asarray(predictions, dtype=np.float64)
    responses = np.asarray(responses, dtype=np.float64).reshape(-1)
    if predictions.ndim != 2 or predictions.shape[0] != responses.shape[0]:
        raise ValueError(f"predictions shape {predictions.shape} does not match n = {responses.shape[0]}")
    residual = responses[:, None] - predictions
    exponents = -np.einsum("ij,ij->j", residual, residual) / beta
    if prior_weights is not None:
        prior_weights = np.asarray(prior_weights, dtype=np.float64).reshape(-1)
        if prior_weights.shape[0] != predictions.shape[1] or np.any(prior_weights < 0):
            raise ValueError("prior_weights must be nonnegative with one entry per candidate")
        if not np.any(prior_weights > 0):
            raise ValueError("prior_weights must put positive mass on at least one candidate")
        with np.errstate(divide="ignore"):
            exponents = exponents + np.log(prior_weights)
    return softmax(exponents)


def aggregate_predictions(predictions, weights):
    """Aggregated prediction sum_j w_j f_j."""
    return np.asarray(predictions, dtype=np.float64) @ np.asarray(weights, dtype=np.float64)


# ═══════════════════════════════════════════════════════════
#  Lasso (cyclic coordinate descent)
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class LassoConfig:
    reg_level: float = None
    max_sweeps: int = None
    tol: float = None

    def __post_init__(self):
        defaults = settings.section("lasso")
        if self.max_sweeps is None:
            object.__setattr__(self, "max_sweeps", int(defaults["max_sweeps"]))
        if self.tol is None:
            object.__setattr__(self, "tol", float(defaults["tol"]))
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.reg_level is not None and not self.reg_level > 0:
            raise ValueError(f"reg_level must be positive, got {self.reg_level}")


def theoretical_reg_level(sigma, n, M):
    """sigma * sqrt(8 log M / n)."""
    return sigma * math.sqrt(8.0 * math.log(M) / n)


def auto_reg_level(sigma, n, M):
    """Default Lasso level, sigma * sqrt(2 log M / n)."""
    return 0.5 * theoretical_reg_level(sigma, n, M)


def soft_threshold(x, r):
    """sign(x) * max(|x| - r, 0)."""
    return np.sign(x) * np.maximum(np.abs(x) - r, 0.0)


def lasso_objective(dataset, estimate, reg_level):
    residual = dataset.responses - dataset.design @ estimate
    return empirical_norm_sq(residual) + 2.0 * reg_level * float(np.sum(np.abs(estimate)))


def _coordinate_descent(gram, n, reg_level, max_sweeps, tol, start=None):
    """Covariance-update coordinate descent on (1/n)||Y - X l||^2 + 2r ||l||_1.

    Per coordinate: l_j = S(rho_j, r) / a_j with a_j = (X'X)_jj / n and
    rho_j = ((X'Y)_j - (X'X l)_j + (X'X)_jj l_j) / n.
    """
    xtx, xty = gram.xtx, gram.xty
    M = xty.shape[0]
    diag = np.diag(xtx) / n
    lam = np.zeros(M) if start is None else np.array(start, dtype=np.float64)
    xtx_lam = xtx @ lam
    threshold = reg_level
    y2 = gram.responses_norm_sq

    def objective():
        residual_sq = y2 - 2.0 * (lam @ xty) + lam @ xtx_lam
        return max(residual_sq, 0.0) / n + 2.0 * reg_level * float(np.sum(np.abs(lam)))

    history = [objective()]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(M):
            if diag[j] == 0.0:
                continue
            old = lam[j]
            rho = (xty[j] - xtx_lam[j]) / n + diag[j] * old
            new = math.copysign(max(abs(rho) - threshold, 0.0), rho) / diag[j]
            if new != old:
                xtx_lam += xtx[j] * (new - old)  # row j == column j, contiguous
                lam[j] = new
                max_change = max(max_change, abs(new - old))
        history.append(objective())
        if max_change < tol:
            converged = True
            break
    return lam, sweeps, converged, history


def lasso_fit(dataset, config, gram=None, start=None, verbose=False):
    """Lasso by cyclic coordinate descent. Returns (estimate, info).

    info: reg_level, sweeps, converged, objective (per-sweep trace).
    Hitting max_sweeps emits LassoConvergenceWarning and returns the current iterate.
    """
    gram = build_gram(dataset) if gram is None else gram
    reg_level = config.reg_level
    if reg_level is None:
        if dataset.noise_level is None:
            raise ValueError("auto Lasso level needs the noise level sigma")
        reg_level = auto_reg_level(dataset.noise_level, dataset.n, dataset.M)

    lam, sweeps, converged, history = _coordinate_descent(
        gram, dataset.n, reg_level, config.max_sweeps, config.tol, start=start)
    if not converged:
        warnings.warn(f"Lasso did not converge in {config.max_sweeps} sweeps (r={reg_level:.4g})",
                      LassoConvergenceWarning)
    if verbose:
        print(f"[Lasso] r={reg_level:.4g}: {sweeps} sweeps, {int(np.sum(lam != 0))} nonzero, "
              f"converged={converged}", file=sys.stderr)
    info = {"reg_level": reg_level, "sweeps": sweeps, "converged": converged, "objective": history}
    return lam, info


# ═══════════════════════════════════════════════════════════
#  Ideal Lasso-Gauss (oracle benchmark)
# ═══════════════════════════════════════════════════════════

def _refit_on_support(dataset, support):
    estimate = np.zeros(dataset.M)
    if support.size == 0:
        return estimate
    # lstsq gives the minimum-norm solution when the support has more columns than rank
    coef, *_ = np.linalg.lstsq(dataset.design[:, support], dataset.responses, rcond=None)
    estimate[support] = coef
    return estimate


def lasso_gauss_ideal(dataset, grid_size=None, loss_gram=None, config=None, gram=None):
    """Lasso selection + least-squares refit at the oracle regularization level.

    The grid is grid_size log-spaced levels from r_max = ||X'Y||_inf / n (the
    smallest level with an all-zero solution) down four decades. The selected
    level minimizes the true loss: delta' G delta when loss_gram is given, the
    empirical prediction loss ||X delta||_n^2 otherwise. Returns (estimate, info).
    """
    if dataset.truth is None:
        raise ValueError("ideal Lasso-Gauss is an oracle and needs the true coefficients")
    defaults = settings.section("lasso")
    grid_size = int(defaults["gauss_grid_size"]) if grid_size is None else int(grid_size)
    if grid_size < 1:
        raise ValueError(f"grid_size must be >= 1, got {grid_size}")
    config = LassoConfig() if config is None else config
    gram = build_gram(dataset) if gram is None else gram

    r_max = float(np.max(np.abs(gram.xty))) / dataset.n
    if r_max == 0.0:
        return np.zeros(dataset.M), {"reg_level": 0.0, "support": [], "loss": 0.0, "grid_size": grid_size}
    decades = float(defaults["gauss_grid_decades"])
    grid = np.geomspace(r_max, r_max * 10.0 ** (-decades), grid_size)

    best = None
    lam = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LassoConvergenceWarning)
        for r in grid:
            # Walk down the path with warm starts
            lam, _ = lasso_fit(dataset, replace(config, reg_level=float(r)), gram=gram, start=lam)
            support = np.flatnonzero(lam)
            refit = _refit_on_support(dataset, support)
            delta = refit - dataset.truth
            if loss_gram is not None:
                loss = functional_loss(delta, loss_gram)
            else:
                loss = empirical_norm_sq(dataset.design @ delta)
            if best is None or loss < best[0]:
                best = (loss, float(r), support, refit)

    loss, r, support, refit = best
    return refit, {"reg_level": r, "support": [int(j) for j in support], "loss": loss, "grid_size": grid_size}
