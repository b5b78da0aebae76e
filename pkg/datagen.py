"""Synthetic regression instances.

Example 1: Rademacher design, the first S coefficients equal to one,
Gaussian noise with sigma^2 = S/9.

Example 2: points uniform on [0,1]^2, dictionary of the k*k rectangle
indicators 1[0,i/k]x[0,j/k], three active rectangles.

Every generator is a pure function of its seed; streams are derived as
default_rng([seed, purpose]) so the design and the noise never share draws.
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from regression_data import RegressionDataset
from noise_models import sample_noise

# 1-based active indices for Example 2 (k = 15)
EXAMPLE2_ACTIVE = (10, 100, 200)

DESIGN_FAMILIES = ("rademacher", "gaussian", "uniform")

_DESIGN_STREAM = 0
_NOISE_STREAM = 1


@dataclass(frozen=True)
class Example1Spec:
    n: int
    M: int
    S: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.M < 1 or self.S < 1:
            raise ValueError(f"n, M and S must be positive, got n={self.n}, M={self.M}, S={self.S}")
        if self.S > self.M:
            raise ValueError(f"S={self.S} exceeds M={self.M}")

    @property
    def sigma(self):
        return math.sqrt(self.S / 9.0)


@dataclass(frozen=True)
class Example2Spec:
    n: int
    sigma: float
    k: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise ValueError(f"k and n must be positive, got k={self.k}, n={self.n}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def M(self):
        return self.k * self.k

    @property
    def active_indices(self):
        """1-based active indices: min(i, k^2) for i in (10, 100, 200), deduplicated."""
        return tuple(sorted({min(i, self.M) for i in EXAMPLE2_ACTIVE}))


def _rngs(seed):
    return np.random.default_rng([int(seed), _DESIGN_STREAM]), np.random.default_rng([int(seed), _NOISE_STREAM])


def gen_example1(spec):
    design_rng, noise_rng = _rngs(spec.seed)
    X = np.where(design_rng.uniform(size=(spec.n, spec.M)) < 0.5, -1.0, 1.0)
    truth = np.zeros(spec.M)
    truth[:spec.S] = 1.0
    sigma = spec.sigma
    Y = X @ truth + sigma * noise_rng.standard_normal(spec.n)
    return RegressionDataset(design=X, responses=Y, truth=truth, noise_level=sigma)


def rectangle_features(points, k):
    """Evaluate the k*k rectangle dictionary at points of [0,1]^2.

    Column (i-1)k + j - 1 (0-based) is 1 when z1 <= i/k and z2 <= j/k.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {points.shape}")
    steps = np.arange(1, k + 1) / k
    inside_1 = points[:, [0]] <= steps[None, :]
    inside_2 = points[:, [1]] <= steps[None, :]
    # (n, k, k) -> row-major flatten gives index (i-1)k + j
    return (inside_1[:, :, None] & inside_2[:, None, :]).reshape(points.shape[0], k * k).astype(np.float64)


def example2_sample(spec):
    """Example 2 with its sample points: returns (points, dataset)."""
    design_rng, noise_rng = _rngs(spec.seed)
    points = design_rng.uniform(size=(spec.n, 2))
    X = rectangle_features(points, spec.k)
    truth = np.zeros(spec.M)
    truth[np.array(spec.active_indices) - 1] = 1.0
    Y = X @ truth + spec.sigma * noise_rng.standard_normal(spec.n)
    return points, RegressionDataset(design=X, responses=Y, truth=truth, noise_level=spec.sigma)


def gen_example2(spec):
    return example2_sample(spec)[1]


def pixel_centres(resolution):
    if int(resolution) < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    return (np.arange(int(resolution)) + 0.5) / int(resolution)


def rectangle_image(coefficients, k, resolution=100):
    """sum_j c_j phi_j on a resolution x resolution pixel grid.

    Entry [a, b] is the value at the pixel centre (z1, z2) = ((a + 1/2)/res, (b + 1/2)/res).
    """
    coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1)
    if coefficients.shape[0] != k * k:
        raise ValueError(f"expected k*k = {k * k} coefficients, got {coefficients.shape[0]}")
    centres = pixel_centres(resolution)
    z1, z2 = np.meshgrid(centres, centres, indexing="ij")
    features = rectangle_features(np.column_stack([z1.ravel(), z2.ravel()]), k)
    return (features @ coefficients).reshape(len(centres), len(centres))


def write_image_csv(path, estimate, k, resolution=100, truth=None):
    """Pixel table z1, z2, estimate[, truth] of the fitted rectangle-dictionary function."""
    centres = pixel_centres(resolution)
    z1, z2 = np.meshgrid(centres, centres, indexing="ij")
    frame = pd.DataFrame({
        "z1": z1.ravel(),
        "z2": z2.ravel(),
        "estimate": rectangle_image(estimate, k, resolution).ravel(),
    })
    if truth is not None:
        frame["truth"] = rectangle_image(truth, k, resolution).ravel()
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def write_sample_csv(path, points, responses):
    """Observed sample as z1, z2, y."""
    points = np.asarray(points, dtype=np.float64)
    frame = pd.DataFrame({"z1": points[:, 0], "z2": points[:, 1], "y": np.asarray(responses, dtype=np.float64)})
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _design(family, n, M, rng):
    if family == "rademacher":
        return np.where(rng.uniform(size=(n, M)) < 0.5, -1.0, 1.0)
    if family == "gaussian":
        X = rng.standard_normal((n, M))
        # columns rescaled to norm sqrt(n): unit diagonal of X'X / n
        return X * (math.sqrt(n) / np.linalg.norm(X, axis=0))
    if family == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(n, M))
    raise ValueError(f"unknown design family {family!r} (choose from {', '.join(DESIGN_FAMILIES)})")


def gen_generic(n, M, support, amplitudes, design_family="gaussian", noise_model=None, seed=0):
    """General instance builder: Y = X lambda* + xi.

    support holds 0-based indices; amplitudes is a scalar or one value per
    index. noise_model None or with scale 0 gives noiseless responses.
    """
    support = np.asarray(support, dtype=int).reshape(-1)
    if support.size and (support.min() < 0 or support.max() >= M):
        raise ValueError(f"support indices must lie in [0, {M - 1}]")
    amplitudes = np.broadcast_to(np.asarray(amplitudes, dtype=np.float64), support.shape)

    design_rng, noise_rng = _rngs(seed)
    X = _design(design_family, n, M, design_rng)
    truth = np.zeros(M)
    truth[support] = amplitudes
    Y = X @ truth
    sigma = None
    if noise_model is not None and noise_model.scale > 0:
        Y = Y + sample_noise(noise_model, n, noise_rng)
        sigma = math.sqrt(noise_model.variance())
    return RegressionDataset(design=X, responses=Y, truth=truth, noise_level=sigma)


def example_spec(experiment, n, seed, M=None, S=None, sigma=None, k=15):
    """Build the spec object for 'example1' or 'example2' from loose parameters."""
    if experiment == "example1":
        return Example1Spec(n=n, M=M, S=S, seed=seed)
    if experiment == "example2":
        return Example2Spec(n=n, sigma=sigma, k=k, seed=seed)
    raise ValueError(f"unknown experiment {experiment!r}")


def generate(spec):
    if isinstance(spec, Example1Spec):
        return gen_example1(spec)
    if isinstance(spec, Example2Spec):
        return gen_example2(spec)
    raise ValueError(f"unsupported experiment spec {type(spec).__name__}")

