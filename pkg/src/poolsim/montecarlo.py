"""Vectorized replica engine for expected-payoff estimation.

Replicas are drawn in fixed-size blocks, each from a substream keyed by
(seed, tag, block index). Workers may process blocks in any order; results
land in a preallocated array by block index and are reduced with exact
summation, so estimates are bit-identical for any worker count.

Sampling goes through quantile functions applied to a fixed layout of
uniforms, which makes same-seed evaluations at different allocations
common-random-number paired.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from .model import DemandModel, MinerProfile, PlatformParams, cost_eval, c_tilde, substream

BLOCK_SIZE = 4096
TAG_PAYOFF = 101


def worker_count() -> int:
    """MC worker threads; overridable via POOLSIM_WORKERS."""
    raw = os.environ.get("POOLSIM_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def gamma_ppf(shape: float, u: np.ndarray) -> np.ndarray:
    """Quantile of Gamma(shape, 1); shape 0 maps everything to 0."""
    if shape < 0:
        raise ValueError("shape must be nonnegative")
    if shape == 0:
        return np.zeros_like(np.asarray(u, dtype=float))
    return special.gammaincinv(shape, u)


def _draw_difficulties(rng, shapes: np.ndarray, m: int) -> np.ndarray:
    """(m, n) difficulty matrix from one round's uniform layout."""
    u = rng.random((m, len(shapes)))
    d = np.empty_like(u)
    for i, s in enumerate(shapes):
        d[:, i] = gamma_ppf(float(s), u[:, i])
    return d


def _ppss_per_unit(
    d_col: np.ndarray,
    window_sum: np.ndarray,
    window_len: int,
    profile: MinerProfile,
    params: PlatformParams,
) -> np.ndarray:
    """b + B_i * subsidy_factor(D_i), vectorized over replicas."""
    ct = c_tilde(profile)
    numerator = ct / params.k - params.b
    threshold = params.lam * profile.capacity_A * params.k * (window_len + 1)
    flag = (window_sum + d_col) >= threshold
    per_unit = np.full_like(d_col, params.b)
    if numerator < 0 and params.subsidy_clamp_nonneg:
        return per_unit
    pos = (d_col > 0) & flag
    if np.any(pos):
        x = params.lam * profile.capacity_A * params.k / d_col[pos]
        K = np.maximum(1.0 - x * np.exp(1.0 - x), params.eps_k)
        per_unit[pos] += numerator / K
    return per_unit


def _block_payoffs(
    mechanism: str,
    miner_index: int,
    allocations: np.ndarray,
    params: PlatformParams,
    profiles: list[MinerProfile],
    demand: DemandModel,
    seed: int,
    block_index: int,
    m: int,
    fixed_M: float | None,
    fixed_windows: list[tuple[float, int]] | None,
) -> np.ndarray:
    rng = substream(seed, TAG_PAYOFF, block_index)
    n = len(profiles)
    shapes = params.k * allocations

    warm_sums = None
    warm_len = 0
    if mechanism == "ppss" and fixed_windows is None:
        # Warm windows: N pre-rounds at the evaluated strategy; the
        # indicator consumes the last N-1 of them plus the current draw.
        warm_len = max(params.window_N - 1, 0)
        history = [_draw_difficulties(rng, shapes, m) for _ in range(params.window_N)]
        tail = history[-warm_len:] if warm_len else []
        warm_sums = (
            np.sum(tail, axis=0) if tail else np.zeros((m, n))
        )

    u_m = rng.random(m)
    M = np.full(m, fixed_M) if fixed_M is not None else demand.ppf(u_m)
    d = _draw_difficulties(rng, shapes, m)

    totals = d.sum(axis=1)
    cap = np.minimum(totals, M)
    live = totals > 0
    share = np.zeros(m)
    share[live] = d[live, miner_index] / totals[live]

    if mechanism == "pps":
        rewards = share * params.b * cap
    elif mechanism == "ppss":
        if fixed_windows is not None:
            wsum_i, wlen_i = fixed_windows[miner_index]
            wsum = np.full(m, wsum_i)
            wlen = wlen_i
        else:
            wsum = warm_sums[:, miner_index]
            wlen = warm_len
        per_unit = _ppss_per_unit(d[:, miner_index], wsum, wlen, profiles[miner_index], params)
        rewards = share * per_unit * cap
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")

    return rewards - cost_eval(profiles[miner_index].cost, float(allocations[miner_index]))


def payoff_samples(
    mechanism: str,
    miner_index: int,
    allocations: np.ndarray,
    params: PlatformParams,
    profiles: list[MinerProfile],
    demand: DemandModel,
    replicas: int,
    seed: int,
    fixed_M: float | None = None,
    fixed_windows: list[tuple[float, int]] | None = None,
) -> np.ndarray:
    """Per-replica payoff draws for one miner, in replica order."""
    allocations = np.asarray(allocations, dtype=float)
    n_blocks = (replicas + BLOCK_SIZE - 1) // BLOCK_SIZE
    out = np.empty(replicas)

    def run(bi: int) -> None:
        lo = bi * BLOCK_SIZE
        hi = min(lo + BLOCK_SIZE, replicas)
        out[lo:hi] = _block_payoffs(
            mechanism, miner_index, allocations, params, profiles, demand,
            seed, bi, hi - lo, fixed_M, fixed_windows,
        )

    workers = worker_count()
    if workers == 1 or n_blocks == 1:
        for bi in range(n_blocks):
            run(bi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(n_blocks)))
    return out


def exact_mean_ci(samples: np.ndarray) -> tuple[float, float]:
    """(mean, 95% CI half-width) via fixed-order compensated summation."""
    r = len(samples)
    vals = samples.tolist()
    mean = math.fsum(vals) / r
    if r < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (r - 1)
    return mean, 1.96 * math.sqrt(var / r)
