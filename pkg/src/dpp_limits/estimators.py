"""Downstream estimators: subsampled 1-means losses and sphere integrals.

Both experiments compare an independent with-replacement baseline against a
repulsive sample drawn from a kernel, with inverse-inclusion weights making
each estimator unbiased for its target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dpp_engine import IndexSample, ValidatedDpp, sample_dpp
from .point_cloud import PointCloud
from .rng import SeededRng, as_generator


@dataclass(frozen=True)
class WeightedEstimate:
    """An estimate together with the sample and weights that produced it."""

    value: float
    sample: IndexSample
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.size and (not np.isfinite(w).all() or (w <= 0).any()):
            raise ValueError("weights must be positive and finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def true_loss(cloud: PointCloud, theta: np.ndarray) -> float:
    """Full 1-means loss ``sum_i ||x_i - theta||^2``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cloud.dim,):
        raise ValueError(f"theta must have shape ({cloud.dim},), got {theta.shape}")
    diff = cloud.points - theta
    return float((diff * diff).sum())


def sensitivity_scores(cloud: PointCloud) -> np.ndarray:
    """Sampling probabilities ``p_i ~ (1 + ||x_i||^2 / v) / n``.

    ``v`` is the mean squared norm; a cloud sitting entirely at the origin
    falls back to uniform probabilities.
    """
    n = cloud.n
    if n == 0:
        raise ValueError("cloud must be nonempty")
    sq = (cloud.points * cloud.points).sum(axis=1)
    v = float(sq.mean())
    if v == 0.0:
        return np.full(n, 1.0 / n)
    raw = (1.0 + sq / v) / n
    return raw / raw.sum()


def draw_with_replacement(
    m: int, probabilities: np.ndarray, rng: SeededRng | np.random.Generator
) -> IndexSample:
    """Draw ``m`` indices iid from ``probabilities``; counts become multiplicities."""
    if m < 1:
        raise ValueError("sample size must be at least 1")
    p = np.asarray(probabilities, dtype=float)
    gen = as_generator(rng)
    counts = np.bincount(gen.choice(p.shape[0], size=m, p=p), minlength=p.shape[0])
    retained = np.flatnonzero(counts)
    return IndexSample(tuple(int(i) for i in retained), tuple(int(c) for c in counts[retained]))


def coreset_estimate_iid(
    cloud: PointCloud,
    theta: np.ndarray,
    m: int,
    probabilities: np.ndarray,
    rng: SeededRng | np.random.Generator,
) -> WeightedEstimate:
    """Loss estimate from ``m`` with-replacement draws.

    ``L_S = sum_i ||x_i - theta||^2 * count_i / (m * p_i)``; unbiased for
    the full loss since each count has mean ``m * p_i``.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.shape != (cloud.n,):
        raise ValueError("probabilities must match the cloud size")
    sample = draw_with_replacement(m, p, rng)
    idx = np.array(sample.indices, dtype=np.intp)
    eps = np.array(sample.multiplicities, dtype=float)
    weights = eps / (m * p[idx])
    diff = cloud.points[idx] - np.asarray(theta, dtype=float)
    value = float((diff * diff).sum(axis=1) @ weights)
    return WeightedEstimate(value, sample, weights)


def coreset_estimate_dpp(
    cloud: PointCloud,
    theta: np.ndarray,
    dpp: ValidatedDpp,
    rng: SeededRng | np.random.Generator,
) -> WeightedEstimate:
    """Loss estimate from one repulsive draw, weighted by inclusion odds.

    ``L_S = sum_{i in S} ||x_i - theta||^2 / (K_ii / n)``; the diagonal must
    be strictly positive so every point can be weighted.
    """
    diag = dpp.kernel.diagonal()
    if (diag <= 0).any():
        raise ValueError(
            f"kernel diagonal vanishes at index {int(np.argmin(diag))}; "
            "that point can never be sampled"
        )
    sample = sample_dpp(dpp, rng)
    idx = np.array(sample.indices, dtype=np.intp)
    weights = dpp.n / diag[idx]
    diff = cloud.points[idx] - np.asarray(theta, dtype=float)
    value = float((diff * diff).sum(axis=1) @ weights) if idx.size else 0.0
    return WeightedEstimate(value, sample, weights)


def _check_density(e_p: np.ndarray, n: int) -> np.ndarray:
    e = np.asarray(e_p, dtype=float)
    if e.shape != (n,):
        raise ValueError("density estimates must match the cloud size")
    if (e <= 0).any():
        raise ValueError(
            f"density estimate nonpositive at index {int(np.argmin(e))}"
        )
    return e


def sphere_integral_iid(
    cloud: PointCloud,
    f: Callable[[np.ndarray], float],
    m: int,
    e_p: np.ndarray,
    rng: SeededRng | np.random.Generator,
) -> WeightedEstimate:
    """Volume-integral estimate from ``m`` density-proportional iid draws.

    ``I_S = sum_i f(x_i) count_i / (n m p_i e_i)`` with ``p_i ~ e_i``;
    unbiased for ``I_n = sum_i f(x_i) / (n e_i)``.
    """
    e = _check_density(e_p, cloud.n)
    p = e / e.sum()
    sample = draw_with_replacement(m, p, rng)
    idx = np.array(sample.indices, dtype=np.intp)
    eps = np.array(sample.multiplicities, dtype=float)
    weights = eps / (cloud.n * m * p[idx] * e[idx])
    value = float(sum(w * f(cloud.points[i]) for i, w in zip(idx, weights)))
    return WeightedEstimate(value, sample, weights)


def sphere_integral_dpp(
    cloud: PointCloud,
    f: Callable[[np.ndarray], float],
    dpp: ValidatedDpp,
    e_p: np.ndarray,
    rng: SeededRng | np.random.Generator,
) -> WeightedEstimate:
    """Volume-integral estimate from one repulsive draw.

    ``I_S = sum_{i in S} f(x_i) / (n e_i K_ii / n)``; unbiased for ``I_n``.
    """
    e = _check_density(e_p, cloud.n)
    diag = dpp.kernel.diagonal()
    if (diag <= 0).any():
        raise ValueError(
            f"kernel diagonal vanishes at index {int(np.argmin(diag))}; "
            "that point can never be sampled"
        )
    sample = sample_dpp(dpp, rng)
    idx = np.array(sample.indices, dtype=np.intp)
    weights = 1.0 / (e[idx] * diag[idx])
    value = float(sum(w * f(cloud.points[i]) for i, w in zip(idx, weights)))
    return WeightedEstimate(value, sample, weights)


def quantile_relative_error(errors: Sequence[float], q: float) -> float:
    """Ceiling order statistic: value at sorted index ``ceil(q * len) - 1``."""
    vals = sorted(float(e) for e in errors)
    if not vals:
        raise ValueError("errors must be nonempty")
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must be in (0, 1)")
    return vals[max(math.ceil(q * len(vals)) - 1, 0)]
