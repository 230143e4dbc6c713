"""Per-symbol detector latency measurement."""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, make_rng, transmit
from .constellation import ConstellationSpec, build_constellation
from .detectors import (
    DetectorKind,
    build_sapsk_index,
    detect_gapd_counted,
    detect_sapsk_fast_counted,
    make_detector,
)

__all__ = ["BenchResult", "bench_detector", "count_ops"]


@dataclass(frozen=True)
class BenchResult:
    detector: str
    M: int
    gamma: int
    trials: int
    seconds: float
    ops_per_symbol: float

    @property
    def ns_per_symbol(self) -> float:
        return 1e9 * self.seconds / self.trials

    @property
    def symbols_per_second(self) -> float:
        return self.trials / self.seconds


def count_ops(kind, M: int, gamma: int, params: ChannelParams, samples: int = 64) -> float:
    """Mean counted operations per symbol on the scalar reference path.

    Only ``fast`` and ``gapd`` have counted paths; other kinds return NaN.
    """
    kind = DetectorKind(kind)
    c = build_constellation(ConstellationSpec("sapsk", M, gamma, params.mean_energy))
    rng = make_rng(params.seed, 1)
    tx = rng.integers(0, M, samples)
    r = transmit(c.points[tx], params, rng).complex
    counter: Counter = Counter()
    if kind is DetectorKind.SAPSK_FAST:
        idx = build_sapsk_index(c)
        for x in r:
            detect_sapsk_fast_counted(complex(x), idx, params, counter)
    elif kind is DetectorKind.GAPD:
        for x in r:
            detect_gapd_counted(complex(x), c, params, counter)
    else:
        return float("nan")
    return sum(counter.values()) / samples


def bench_detector(
    kind,
    M: int,
    gamma: int,
    trials: int,
    params: ChannelParams,
    repeats: int = 3,
    method: str = "exhaustive",
    batch: int = 4096,
) -> BenchResult:
    """Best-of-``repeats`` wall time for detecting ``trials`` symbols.

    Symbols are detected in batches of ``batch`` so the fixed vectorisation
    overhead is the same for every M.  ``method`` applies to the exact
    detectors; the default measures the plain O(M) search.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    kind = DetectorKind(kind)
    c = build_constellation(ConstellationSpec("sapsk", M, gamma, params.mean_energy))
    if kind is DetectorKind.SAPSK_FAST:
        detect = make_detector(kind, c, params)
    else:
        detect = make_detector(kind, c, params, method=method)
    rng = make_rng(params.seed, 0)
    tx = rng.integers(0, M, trials)
    rx = transmit(c.points[tx], params, rng)
    chunks = [rx[i : i + batch] for i in range(0, trials, batch)]
    detect(chunks[0])  # warm caches
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for ch in chunks:
            detect(ch)
        best = min(best, time.perf_counter() - t0)
    return BenchResult(kind.value, M, gamma, trials, float(best), count_ops(kind, M, gamma, params, samples=16))
