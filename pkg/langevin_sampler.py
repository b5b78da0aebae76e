"""Langevin Monte-Carlo: constant-step Euler scheme with trajectory averaging.

    L_{k+1} = L_k + h grad V(L_k) + sqrt(2h) G_k,   L_0 = 0,   G_k iid N(0, I_M)

The estimate is the average of the iterates over the horizon T. Averaging
convention: with K = floor(T/h) steps the average is taken over the
pre-update iterates L_0, ..., L_{K-1} (L_0 = 0 included with weight 1/K), i.e.
the left-point Riemann sum (h/T) sum_{k<K} L_k. A run with T = h therefore
returns the zero vector. With a burn-in of b time units the first floor(b/h)
iterates are dropped and the rest are averaged with equal weights.

If the chain explodes (a non-finite coordinate or sup-norm above the
divergence threshold) run_with_restarts halves h and starts again from L_0 = 0
on a fresh random substream (seed, restart).
"""

import sys
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

import settings
from langevin_potential import make_gradient


@dataclass(frozen=True)
class SamplerConfig:
    step: float = None
    horizon: float = None
    burn_in: float = 0.0
    seed: int = 0
    max_restarts: int = None
    divergence_threshold: float = None
    antithetic: bool = False
    # Keep every thin-th iterate for diagnostics; 0 keeps no trace
    thin: int = 0

    def __post_init__(self):
        defaults = settings.section("sampler")
        if self.max_restarts is None:
            object.__setattr__(self, "max_restarts", int(defaults["max_restarts"]))
        if self.divergence_threshold is None:
            object.__setattr__(self, "divergence_threshold", float(defaults["divergence_threshold"]))
        if self.max_restarts < 0:
            raise ValueError(f"max_restarts must be >= 0, got {self.max_restarts}")
        if not self.divergence_threshold > 0:
            raise ValueError(f"divergence_threshold must be positive, got {self.divergence_threshold}")
        if self.seed is None or int(self.seed) < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        if self.thin < 0:
            raise ValueError(f"thin must be >= 0, got {self.thin}")
        if self.step is not None and not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.step is not None and self.horizon is not None:
            if self.horizon < self.step:
                raise ValueError(f"horizon {self.horizon} shorter than one step {self.step}")
            if not 0 <= self.burn_in < self.horizon:
                raise ValueError(f"burn_in must lie in [0, horizon), got {self.burn_in}")

    @property
    def resolved(self):
        return self.step is not None and self.horizon is not None

    def require_resolved(self):
        if not self.resolved:
            raise ValueError("sampler step and horizon must be set (run resolve_tuning first)")


@dataclass(frozen=True)
class SamplerReport:
    average: np.ndarray
    restarts_used: int
    final_step: float
    steps_taken: int
    diverged: bool
    trace_norm_summary: dict
    initial_step: float = None
    # Per-batch averages over the averaging window, shape (batches, M)
    batch_means: np.ndarray = None
    # Thinned trace rows (step_index, time, coords...), or None
    trace: np.ndarray = None

    def to_dict(self):
        out = {
            "restarts_used": self.restarts_used,
            "initial_step": self.initial_step,
            "final_step": self.final_step,
            "steps_taken": self.steps_taken,
            "diverged": self.diverged,
            "trace_norm_summary": self.trace_norm_summary,
        }
        if self.batch_means is not None and len(self.batch_means) > 1:
            out["mc_standard_error"] = [float(v) for v in batch_means_se(self.batch_means)]
        return out


def _step_counts(horizon, step, burn_in):
    # The small slack keeps e.g. 100 / 4e-4 from flooring to 249999
    n_steps = max(int(math.floor(horizon / step + 1e-9)), 1)
    n_burn = min(int(math.floor(burn_in / step + 1e-9)), n_steps - 1)
    return n_steps, n_burn


def _batch_edges(n_burn, n_steps, batches):
    window = n_steps - n_burn
    batches = max(min(batches, window), 1)
    return n_burn + (np.arange(batches + 1) * window) // batches


def _run_attempt(grad, dim, step, horizon, burn_in, rng, config, batches=20):
    """One Euler run. Returns (report fields dict, diverged flag)."""
    defaults = settings.section("sampler")
    block = int(defaults["block_size"])
    n_steps, n_burn = _step_counts(horizon, step, burn_in)
    edges = _batch_edges(n_burn, n_steps, batches)
    batch_sums = np.zeros((len(edges) - 1, dim))

    threshold = config.divergence_threshold
    noise_scale = math.sqrt(2.0 * step)
    L = np.zeros(dim)
    total = np.zeros(dim)
    buf = np.empty((block, dim))
    norm_min, norm_max, norm_sum = math.inf, 0.0, 0.0
    trace_rows = []

    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while k < n_steps:
            nb = min(block, n_steps - k)
            noise = rng.standard_normal((nb, dim))
            if config.antithetic:
                noise = np.negative(noise)
            noise *= noise_scale
            for i in range(nb):
                buf[i] = L
                L = L + step * grad(L) + noise[i]
            rows = buf[:nb]

            if not np.isfinite(rows).all() or np.abs(rows).max() > threshold:
                return {"steps_taken": k + nb}, True

            lo = max(n_burn - k, 0)
            if lo < nb:
                total += rows[lo:].sum(axis=0)
                for b in range(len(edges) - 1):
                    a, z = max(edges[b], k), min(edges[b + 1], k + nb)
                    if a < z:
                        batch_sums[b] += rows[a - k:z - k].sum(axis=0)

            norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
            norm_min = min(norm_min, float(norms.min()))
            norm_max = max(norm_max, float(norms.max()))
            norm_sum += float(norms.sum())

            if config.thin:
                first = (-k) % config.thin
                for i in range(first, nb, config.thin):
                    trace_rows.append(np.concatenate(([k + i, (k + i) * step], rows[i])))
            k += nb

    counts = np.diff(edges).astype(np.float64)
    fields = {
        "average": total / (n_steps - n_burn),
        "steps_taken": n_steps,
        "trace_norm_summary": {"min": norm_min, "mean": norm_sum / n_steps, "max": norm_max},
        "batch_means": batch_sums / counts[:, None],
        "trace": np.array(trace_rows) if trace_rows else None,
    }
    return fields, False


def _check_potential(potential):
    if math.isfinite(potential.prior.radius):
        raise ValueError("the Langevin sampler needs an unbounded prior support (radius = inf)")


def run_chain(potential, config, restart_index=0, step=None):
    """Single Euler run with no restart. A divergent run comes back with
    diverged=True, a zero average and restarts_used = max_restarts: no
    further attempt follows it here."""
    config.require_resolved()
    _check_potential(potential)
    step = config.step if step is None else step
    rng = np.random.default_rng([int(config.seed), int(restart_index)])
    grad = make_gradient(potential)
    dim = potential.dim

    fields, diverged = _run_attempt(grad, dim, step, config.horizon, config.burn_in, rng, config)
    if diverged:
        return SamplerReport(
            average=np.zeros(dim),
            restarts_used=config.max_restarts,
            final_step=step,
            steps_taken=fields["steps_taken"],
            diverged=True,
            trace_norm_summary={},
            initial_step=config.step,
        )
    return SamplerReport(
        restarts_used=restart_index,
        final_step=step,
        diverged=False,
        initial_step=config.step,
        **fields,
    )


def run_with_restarts(potential, config, verbose=False):
    """run_chain, halving the step after each divergence, up to max_restarts times."""
    config.require_resolved()
    shrink = float(settings.section("sampler")["step_shrink"])
    step = config.step
    report = None
    for restart in range(config.max_restarts + 1):
        if verbose:
            n_steps, _ = _step_counts(config.horizon, step, config.burn_in)
            print(f"[Sampler] attempt {restart}: h={step:.3g}, {n_steps:,} steps", file=sys.stderr)
        report = run_chain(potential, config, restart_index=restart, step=step)
        if not report.diverged:
            return report
        print(f"[Sampler] chain diverged at h={step:.3g} after {report.steps_taken:,} steps", file=sys.stderr)
        if restart < config.max_restarts:
            step = step / shrink

    print(f"[Sampler] giving up after {config.max_restarts} restarts", file=sys.stderr)
    return report


def batch_means_se(batch_means):
    """Monte-Carlo standard error of the overall average from equal-size batch means."""
    batch_means = np.asarray(batch_means, dtype=np.float64)
    b = batch_means.shape[0]
    if b < 2:
        raise ValueError("need at least two batches for a standard error")
    return np.std(batch_means, axis=0, ddof=1) / math.sqrt(b)


def write_trace_csv(report, path):
    """Dump the thinned trace as step_index, time, coord_0, ..., coord_{M-1}."""
    if report.trace is None:
        raise ValueError("no trace recorded (set SamplerConfig.thin > 0)")
    dim = report.trace.shape[1] - 2
    frame = pd.DataFrame(report.trace, columns=["step_index", "time"] + [f"coord_{j}" for j in range(dim)])
    frame["step_index"] = frame["step_index"].astype(np.int64)
    frame.to_csv(path, index=False, float_format="%.17g")
