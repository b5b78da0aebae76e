"""Regression data types, empirical norms and losses.

A dataset is the design matrix X (n x M, row i is X_i), the responses Y and,
for simulated data, the true coefficients and the noise level. GramCache holds
X'X and X'Y, which every estimator and the Langevin sampler reuse.

File format: CSV with header `y, x1, ..., xM` plus an optional JSON sidecar
`{"sigma": <real>, "truth": [<reals>]}` stored next to the CSV as <stem>.json.
"""

import os
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class RegressionDataset:
    design: np.ndarray
    responses: np.ndarray
    truth: np.ndarray = None
    noise_level: float = None

    def __post_init__(self):
        design = np.array(self.design, dtype=np.float64, order="C")
        responses = np.array(self.responses, dtype=np.float64).reshape(-1)
        if design.ndim != 2 or design.shape[0] < 1 or design.shape[1] < 1:
            raise ValueError(f"design must be a non-empty n x M matrix, got shape {design.shape}")
        if responses.shape[0] != design.shape[0]:
            raise ValueError(f"responses length {responses.shape[0]} != n = {design.shape[0]}")
        design.setflags(write=False)
        responses.setflags(write=False)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "responses", responses)

        if self.truth is not None:
            truth = np.array(self.truth, dtype=np.float64).reshape(-1)
            if truth.shape[0] != design.shape[1]:
                raise ValueError(f"truth length {truth.shape[0]} != M = {design.shape[1]}")
            truth.setflags(write=False)
            object.__setattr__(self, "truth", truth)
        if self.noise_level is not None:
            if not self.noise_level > 0:
                raise ValueError(f"noise_level must be positive, got {self.noise_level}")
            object.__setattr__(self, "noise_level", float(self.noise_level))

    @property
    def n(self):
        return self.design.shape[0]

    @property
    def M(self):
        return self.design.shape[1]

    def subset_columns(self, indices):
        """Dataset restricted to the given columns (truth restricted too)."""
        indices = np.asarray(indices, dtype=int)
        truth = None if self.truth is None else self.truth[indices]
        return RegressionDataset(self.design[:, indices], self.responses, truth, self.noise_level)


@dataclass(frozen=True)
class GramCache:
    xtx: np.ndarray
    xty: np.ndarray
    trace_xtx: float
    responses_norm_sq: float = 0.0


def build_gram(dataset):
    """X'X, X'Y and Tr(X'X), computed once per dataset."""
    X = dataset.design
    xtx = X.T @ X
    # Symmetrize away round-off so Cholesky/eigh callers see an exact symmetric matrix
    xtx = 0.5 * (xtx + xtx.T)
    xty = X.T @ dataset.responses
    trace = float(np.einsum("ij,ij->", X, X))
    xtx.setflags(write=False)
    xty.setflags(write=False)
    return GramCache(
        xtx=xtx,
        xty=xty,
        trace_xtx=trace,
        responses_norm_sq=float(dataset.responses @ dataset.responses),
    )


def empirical_norm_sq(values):
    """(1/n) * sum of squares."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ValueError("empirical norm of an empty vector")
    return float(values @ values) / values.size


def coefficient_loss(estimate, truth):
    """Squared Euclidean distance ||estimate - truth||^2."""
    estimate = np.asarray(estimate, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if estimate.shape != truth.shape:
        raise ValueError(f"length mismatch: {estimate.shape[0]} vs {truth.shape[0]}")
    diff = estimate - truth
    return float(diff @ diff)


def prediction_loss(dataset, estimate):
    """Empirical prediction risk ||X(estimate - truth)||_n^2."""
    if dataset.truth is None:
        raise ValueError("prediction_loss needs a dataset with truth")
    delta = np.asarray(estimate, dtype=np.float64) - dataset.truth
    return empirical_norm_sq(dataset.design @ delta)


def rectangle_gram(k):
    """L2([0,1]^2) Gram matrix of the k*k rectangle indicators.

    Index a = (i-1)k + j (1-based) is the indicator of [0, i/k] x [0, j/k];
    two such rectangles overlap on [0, min(i,p)/k] x [0, min(j,q)/k].
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    steps = np.arange(1, k + 1) / k
    overlap_1d = np.minimum.outer(steps, steps)
    # Row-major index (i, j) -> (i-1)k + j matches np.kron ordering
    return np.kron(overlap_1d, overlap_1d)


def functional_loss(delta, gram):
    """delta' G delta; with G = rectangle_gram(k) this is the L2 image loss."""
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    gram = np.asarray(gram, dtype=np.float64)
    if gram.ndim != 2 or gram.shape != (delta.size, delta.size):
        raise ValueError(f"gram shape {gram.shape} does not match delta length {delta.size}")
    return float(delta @ gram @ delta)


def support_recovery(estimate, truth, threshold=None):
    """Compare the selected coordinates |estimate_j| > threshold with supp(truth).

    The default threshold is half the smallest nonzero |truth_j|.
    """
    estimate = np.asarray(estimate, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    true_support = truth != 0
    if threshold is None:
        threshold = 0.5 * np.abs(truth[true_support]).min() if true_support.any() else 0.0
    selected = np.abs(estimate) > threshold
    return {
        "threshold": float(threshold),
        "true_positives": int(np.sum(selected & true_support)),
        "false_positives": int(np.sum(selected & ~true_support)),
        "false_negatives": int(np.sum(~selected & true_support)),
        "exact": bool(np.array_equal(selected, true_support)),
    }


# ── File I/O ──

def _sidecar_path(csv_path):
    stem, _ = os.path.splitext(csv_path)
    return stem + ".json"


def save_dataset(dataset, csv_path):
    """Write <csv_path> and, when sigma or truth is known, the JSON sidecar."""
    columns = {"y": dataset.responses}
    for j in range(dataset.M):
        columns[f"x{j + 1}"] = dataset.design[:, j]
    pd.DataFrame(columns).to_csv(csv_path, index=False, float_format="%.17g")

    sidecar = {}
    if dataset.noise_level is not None:
        sidecar["sigma"] = dataset.noise_level
    if dataset.truth is not None:
        sidecar["truth"] = [float(v) for v in dataset.truth]
    if sidecar:
        with open(_sidecar_path(csv_path), "w") as f:
            json.dump(sidecar, f, indent=2)


def load_dataset(csv_path, sigma=None):
    """Read a dataset CSV and its sidecar. An explicit sigma overrides the sidecar."""
    frame = pd.read_csv(csv_path, float_precision="round_trip")
    frame.columns = [c.strip() for c in frame.columns]
    if "y" not in frame.columns:
        raise ValueError(f"{csv_path}: missing 'y' column")
    x_cols = [c for c in frame.columns if c != "y"]
    if not x_cols:
        raise ValueError(f"{csv_path}: no predictor columns")
    # Keep x1..xM order even if the file shuffles them
    try:
        x_cols = sorted(x_cols, key=lambda c: int(c.lstrip("x")))
    except ValueError:
        raise ValueError(f"{csv_path}: predictor columns must be named x1..xM")

    truth = None
    noise_level = None
    sidecar = _sidecar_path(csv_path)
    if os.path.exists(sidecar):
        with open(sidecar, "r") as f:
            meta = json.load(f)
        truth = meta.get("truth")
        noise_level = meta.get("sigma")
    if sigma is not None:
        noise_level = sigma

    return RegressionDataset(
        design=frame[x_cols].to_numpy(dtype=np.float64),
        responses=frame["y"].to_numpy(dtype=np.float64),
        truth=truth,
        noise_level=noise_level,
    )
