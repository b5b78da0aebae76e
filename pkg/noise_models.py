"""Noise models and Assumption-N couplings.

Assumption N asks, for a noise variable xi and every small gamma > 0, for a
companion zeta with
    (a) xi from the declared family,
    (b) xi + zeta distributed as (1 + gamma) xi,
    (c) E[zeta | xi] = 0,
plus a conditional Laplace-transform bound with a function v. The bound on
||v||_inf sets the smallest admissible temperature beta.

Couplings implemented: Gaussian, Rademacher, Laplace and bounded symmetric.
Uniform noise is available for data generation and, through its bounded
form, for the bounded symmetric coupling; its series coupling is not built.
"""

import sys
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

import settings
from sparsity_prior import UnsupportedRegimeError

FAMILIES = ("gaussian", "rademacher", "laplace", "uniform", "bounded")
BOUNDED_BASES = ("uniform", "rademacher", "triangular")


@dataclass(frozen=True)
class NoiseModel:
    """family + scale. For "bounded", scale is the bound B and base names a
    symmetric law on [-B, B]; for the other families scale is the standard
    deviation sigma."""
    family: str
    scale: float
    base: str = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r} (choose from {', '.join(FAMILIES)})")
        if not self.scale >= 0:
            raise ValueError(f"noise scale must be nonnegative, got {self.scale}")
        if self.family == "bounded":
            base = self.base or "uniform"
            if base not in BOUNDED_BASES:
                raise ValueError(f"bounded base must be one of {BOUNDED_BASES}, got {base!r}")
            object.__setattr__(self, "base", base)

    def variance(self):
        s = self.scale
        if self.family != "bounded":
            return s * s
        return {"uniform": s * s / 3.0, "rademacher": s * s, "triangular": s * s / 6.0}[self.base]

    def bound(self):
        """Almost-sure bound on |xi|, inf for unbounded families."""
        s = self.scale
        if self.family == "rademacher":
            return s
        if self.family == "uniform":
            return s * math.sqrt(3.0)
        if self.family == "bounded":
            return s
        return math.inf

    def as_bounded(self):
        """Same law written as BoundedSymmetric(B, base)."""
        if self.family == "bounded":
            return self
        if self.family in ("uniform", "rademacher"):
            return NoiseModel("bounded", self.bound(), base=self.family)
        raise ValueError(f"{self.family} noise is unbounded")

    def distribution(self):
        """Frozen scipy law for continuous families (None for two-point laws)."""
        s = self.scale
        if self.family == "gaussian":
            return stats.norm(scale=s)
        if self.family == "laplace":
            return stats.laplace(scale=s / math.sqrt(2.0))
        if self.family == "uniform":
            b = s * math.sqrt(3.0)
            return stats.uniform(loc=-b, scale=2.0 * b)
        if self.family == "bounded" and self.base == "uniform":
            return stats.uniform(loc=-s, scale=2.0 * s)
        if self.family == "bounded" and self.base == "triangular":
            return stats.triang(c=0.5, loc=-s, scale=2.0 * s)
        return None

    def cdf(self, x):
        law = self.distribution()
        if law is not None:
            return law.cdf(x)
        # two-point law on {-s, +s}
        x = np.asarray(x, dtype=np.float64)
        s = self.scale
        return np.where(x < -s, 0.0, np.where(x < s, 0.5, 1.0))

    def sample(self, count, seed=None):
        return sample_noise(self, count, seed)


@dataclass(frozen=True)
class CouplingSample:
    xi: np.ndarray
    zeta: np.ndarray
    gamma: float


def sample_noise(model, count, seed=None):
    """iid noise draws; seed may be an int, a SeedSequence list or a Generator."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    count = int(count)
    s = model.scale
    if model.family == "rademacher" or (model.family == "bounded" and model.base == "rademacher"):
        return s * np.where(rng.uniform(size=count) < 0.5, -1.0, 1.0)
    if model.family == "gaussian":
        return s * rng.standard_normal(count)
    return model.distribution().rvs(size=count, random_state=rng)


def _sgn(x):
    # sign with sgn(0) = +1; ties have probability zero
    return np.where(x >= 0, 1.0, -1.0)


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def couple_gaussian(xi, gamma, sigma, rng):
    """zeta ~ N(0, (2 gamma + gamma^2) sigma^2), independent of xi."""
    _check_gamma(gamma)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    xi = np.asarray(xi, dtype=np.float64)
    zeta = math.sqrt(2.0 * gamma + gamma * gamma) * sigma * rng.standard_normal(xi.shape)
    return CouplingSample(xi=xi, zeta=zeta, gamma=gamma)


def couple_rademacher(xi, gamma, sigma, rng):
    """zeta = (1+gamma) sigma sgn[xi/sigma - (1+gamma) U] - xi, U ~ U[-1, 1]."""
    _check_gamma(gamma)
    xi = np.asarray(xi, dtype=np.float64)
    if not np.all(np.isclose(np.abs(xi), sigma)):
        raise ValueError(f"Rademacher coupling needs xi in {{-{sigma}, +{sigma}}}")
    u = rng.uniform(-1.0, 1.0, size=xi.shape)
    zeta = (1.0 + gamma) * sigma * _sgn(xi / sigma - (1.0 + gamma) * u) - xi
    return CouplingSample(xi=xi, zeta=zeta, gamma=gamma)


def couple_laplace(xi, gamma, sigma, rng):
    """zeta independent of xi: 0 with probability 1/(1+gamma)^2, otherwise a
    Laplace draw with variance (1+gamma)^2 sigma^2.

    The weight is the t -> inf limit of the characteristic function
    (1/(1+g)^2) (1 + (2g + g^2) / (1 + (1+g)^2 sigma^2 t^2 / 2)).
    """
    _check_gamma(gamma)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    xi = np.asarray(xi, dtype=np.float64)
    p_zero = 1.0 / (1.0 + gamma) ** 2
    atom = rng.uniform(size=xi.shape) < p_zero
    scale = (1.0 + gamma) * sigma / math.sqrt(2.0)
    zeta = np.where(atom, 0.0, rng.laplace(scale=scale, size=xi.shape))
    return CouplingSample(xi=xi, zeta=zeta, gamma=gamma)


def laplace_coupling_cf(t, gamma, sigma):
    """Characteristic function of the Laplace-coupling zeta."""
    g = gamma
    return (1.0 + (2.0 * g + g * g) / (1.0 + (1.0 + g) ** 2 * (sigma * t) ** 2 / 2.0)) / (1.0 + g) ** 2


def couple_bounded_symmetric(xi, gamma, rng):
    """zeta = (1+gamma)|xi| sgn[sgn(xi) - (1+gamma) U] - xi, U ~ U[-1, 1]."""
    _check_gamma(gamma)
    xi = np.asarray(xi, dtype=np.float64)
    u = rng.uniform(-1.0, 1.0, size=xi.shape)
    zeta = (1.0 + gamma) * np.abs(xi) * _sgn(_sgn(xi) - (1.0 + gamma) * u) - xi
    return CouplingSample(xi=xi, zeta=zeta, gamma=gamma)


def couple(model, xi, gamma, rng):
    """Dispatch to the coupling of the model's family."""
    if model.family == "gaussian":
        return couple_gaussian(xi, gamma, model.scale, rng)
    if model.family == "rademacher":
        return couple_rademacher(xi, gamma, model.scale, rng)
    if model.family == "laplace":
        return couple_laplace(xi, gamma, model.scale, rng)
    if model.family == "bounded":
        return couple_bounded_symmetric(xi, gamma, rng)
    raise UnsupportedRegimeError(
        "uniform noise has no direct coupling here; use model.as_bounded() for the bounded symmetric one")


def beta_threshold(model):
    """(beta_min, t0) such that any beta >= max(beta_min, 2L/t0) is admissible."""
    s = model.scale
    if model.family in ("gaussian", "rademacher", "uniform"):
        return 4.0 * s * s, math.inf
    if model.family == "laplace":
        return 8.0 * s * s, 1.0 / (s * s)
    return 4.0 * s * s, math.inf


def temperature_for_dictionary(model, L):
    """max(beta_min, 2L/t0) once the dictionary bound L is known."""
    beta_min, t0 = beta_threshold(model)
    if math.isinf(t0):
        return beta_min
    return max(beta_min, 2.0 * L / t0)


# ═══════════════════════════════════════════════════════════
#  Statistical verification of Assumption N
# ═══════════════════════════════════════════════════════════

def ks_critical_value(m, n, constant=None):
    """Asymptotic two-sample KS critical value c sqrt((m + n) / (m n))."""
    if constant is None:
        constant = float(settings.section("noise_check")["ks_constant"])
    return constant * math.sqrt((m + n) / (m * n))


def _binned_conditional_means(xi, zeta, bins):
    """Per-bin mean of zeta and its standard error; bins are xi quantiles, or
    the distinct values of xi when there are fewer of them than bins."""
    values = np.unique(xi)
    if values.size <= bins:
        labels = np.searchsorted(values, xi)
        n_groups = values.size
    else:
        edges = np.quantile(xi, np.linspace(0.0, 1.0, bins + 1))
        labels = np.clip(np.searchsorted(edges, xi, side="right") - 1, 0, bins - 1)
        n_groups = bins
    counts = np.bincount(labels, minlength=n_groups).astype(np.float64)
    sums = np.bincount(labels, weights=zeta, minlength=n_groups)
    sq = np.bincount(labels, weights=zeta * zeta, minlength=n_groups)
    keep = counts > 1
    means = sums[keep] / counts[keep]
    var = (sq[keep] - counts[keep] * means ** 2) / (counts[keep] - 1)
    se = np.sqrt(np.maximum(var, 0.0) / counts[keep])
    return means, se


def check_assumption_n(model, gamma, draws=None, seed=0, bins=None, verbose=False):
    """Monte-Carlo check of clauses (a), (b), (c) for one noise model and gamma.

    (a) KS of xi against the declared law (two-point laws: |P(xi = +s) - 1/2|
        within 3 standard errors); (b) two-sample KS of xi + zeta against
        (1 + gamma) xi' on an independent sample, below the 99% critical value;
    (c) per-bin |mean(zeta)| within z standard errors, z chosen so the whole
        family of bins is tested at the two-sided 3-sigma level (Bonferroni).
    """
    defaults = settings.section("noise_check")
    draws = int(defaults["draws"]) if draws is None else int(draws)
    bins = int(defaults["bins"]) if bins is None else int(bins)
    if model.family == "uniform":
        model = model.as_bounded()
    rng = np.random.default_rng([int(seed), 0])
    ref_rng = np.random.default_rng([int(seed), 1])

    xi = sample_noise(model, draws, rng)
    pair = couple(model, xi, gamma, rng)
    reference = (1.0 + gamma) * sample_noise(model, draws, ref_rng)

    # (a)
    law = model.distribution()
    if law is not None:
        stat_a = float(stats.kstest(xi, law.cdf).statistic)
        # one-sample critical value c / sqrt(m)
        crit_a = float(defaults["ks_constant"]) / math.sqrt(draws)
        clause_a = {"statistic": stat_a, "critical": crit_a, "pass": stat_a < crit_a}
    else:
        p_hat = float(np.mean(xi > 0))
        se = 0.5 / math.sqrt(draws)
        clause_a = {"statistic": abs(p_hat - 0.5), "critical": 3.0 * se, "pass": abs(p_hat - 0.5) <= 3.0 * se}

    # (b)
    stat_b = float(stats.ks_2samp(pair.xi + pair.zeta, reference).statistic)
    crit_b = ks_critical_value(draws, draws)
    clause_b = {"statistic": stat_b, "critical": crit_b, "pass": stat_b < crit_b}

    # (c)
    means, se = _binned_conditional_means(pair.xi, pair.zeta, bins)
    family_sigma = float(defaults["family_sigma"])
    tail = 2.0 * stats.norm.sf(family_sigma)
    z = float(stats.norm.isf(tail / (2.0 * len(means))))
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(se > 0, np.abs(means) / se, np.where(means == 0, 0.0, np.inf))
    clause_c = {
        "bins": int(len(means)),
        "max_abs_z": float(scores.max()),
        "critical_z": z,
        "pass": bool(np.all(scores <= z)),
    }

    verdict = {
        "family": model.family,
        "scale": model.scale,
        "gamma": gamma,
        "draws": draws,
        "seed": int(seed),
        "marginal_law": clause_a,
        "sum_in_law": clause_b,
        "conditional_mean_zero": clause_c,
        "pass": bool(clause_a["pass"] and clause_b["pass"] and clause_c["pass"]),
    }
    if verbose:
        print(f"[Noise] {model.family} gamma={gamma}: KS(a)={clause_a['statistic']:.4g} "
              f"KS(b)={stat_b:.4g}/{crit_b:.4g} max|z|={clause_c['max_abs_z']:.3g}/{z:.3g} "
              f"-> {'PASS' if verdict['pass'] else 'FAIL'}", file=sys.stderr)
    return verdict
