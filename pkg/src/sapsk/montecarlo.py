"""Monte Carlo SEP estimation.

A point is simulated in fixed-size batches.  Batch ``k`` of grid point ``i``
draws from its own stream ``(seed, i, k)``, so the outcome does not depend
on how batches are scheduled.  A point stops at the exact trial on which
the target error count is reached, or at ``max_trials``.  With several
workers, batches run in waves and are reduced in order, which makes the
result identical to a serial run.
"""

from __future__ import annotations

import functools
import json
import math
import os
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO, Callable, Optional, Union

import numpy as np
from scipy.stats import beta, norm

from .channel import ChannelParams, make_rng, transmit
from .constellation import Constellation, ConstellationSpec, build_constellation
from .detectors import DetectorKind, make_detector

__all__ = [
    "SimPlan",
    "SepPoint",
    "SepCurve",
    "binomial_interval",
    "run_trials",
    "simulate_point",
    "simulate_curve",
    "agreement_rate",
    "default_workers",
    "write_curve",
    "write_manifest",
]

EXACT_BELOW = 20


@dataclass(frozen=True)
class SimPlan:
    constellation: ConstellationSpec
    detector: DetectorKind
    sigma_phi_sq: float
    snr_grid: tuple
    max_trials: int = 20_000_000
    target_errors: int = 200
    confidence_level: float = 0.95
    seed: int = 0
    batch_size: int = 1 << 16
    candidates: str = "pair"

    def __post_init__(self):
        object.__setattr__(self, "detector", DetectorKind(self.detector))
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in self.snr_grid))
        object.__setattr__(self, "max_trials", int(self.max_trials))
        if not self.snr_grid:
            raise ValueError("SNR grid is empty")
        if any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise ValueError("SNR grid must be strictly ascending")
        if self.target_errors < 1 or self.max_trials < self.target_errors:
            raise ValueError("need 1 <= target_errors <= max_trials")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError("confidence_level must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.sigma_phi_sq < 0:
            raise ValueError("sigma_phi_sq must be non-negative")

    def manifest(self) -> dict:
        d = asdict(self)
        d["constellation"] = {
            "family": self.constellation.family.value,
            "order": self.constellation.order,
            "rings": self.constellation.rings,
            "mean_energy": self.constellation.mean_energy,
        }
        d["detector"] = self.detector.value
        d["snr_grid"] = list(self.snr_grid)
        d["ci_method"] = f"normal approximation, Clopper-Pearson below {EXACT_BELOW} errors"
        return d


@dataclass(frozen=True)
class SepPoint:
    snr_db: float
    sep: float
    ci_half_width: float
    trials: int
    errors: int
    ci_low: float
    ci_high: float

    @property
    def std_error(self) -> float:
        p = self.sep
        return math.sqrt(p * (1.0 - p) / self.trials)

    def overlaps(self, other: "SepPoint") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


@dataclass(frozen=True)
class SepCurve:
    points: tuple
    plan: Optional[SimPlan] = field(default=None, compare=False)

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def sep(self) -> np.ndarray:
        return np.array([p.sep for p in self.points])

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def binomial_interval(errors: int, trials: int, confidence: float) -> tuple[float, float, float]:
    """``(half_width, low, high)``; exact Clopper-Pearson when errors are few."""
    p = errors / trials
    alpha = 1.0 - confidence
    if errors < EXACT_BELOW:
        lo = 0.0 if errors == 0 else float(beta.ppf(alpha / 2, errors, trials - errors + 1))
        hi = 1.0 if errors == trials else float(beta.ppf(1 - alpha / 2, errors + 1, trials - errors))
        return 0.5 * (hi - lo), lo, hi
    h = float(norm.ppf(1 - alpha / 2)) * math.sqrt(p * (1.0 - p) / trials)
    return h, max(0.0, p - h), min(1.0, p + h)


def run_trials(
    batch_errors: Callable[[int, int], np.ndarray],
    target_errors: int,
    max_trials: int,
    batch_size: int,
    executor: Optional[Executor] = None,
    wave: int = 1,
) -> tuple[int, int]:
    """Drive ``batch_errors(k, n) -> bool[n]`` until the stopping rule fires.

    Returns ``(trials, errors)``.  Batch ``k`` always has the same size for a
    given rule, so any schedule produces the same counts.
    """
    trials = errors = 0
    k = 0
    while trials < max_trials:
        sizes = []
        start = trials
        for _ in range(wave):
            n = min(batch_size, max_trials - start)
            if n <= 0:
                break
            sizes.append(n)
            start += n
        if executor is None or len(sizes) == 1:
            results = (batch_errors(k + j, n) for j, n in enumerate(sizes))
        else:
            results = executor.map(batch_errors, range(k, k + len(sizes)), sizes)
        for flags in results:
            need = target_errors - errors
            count = int(np.count_nonzero(flags))
            if count >= need:
                hit = int(np.flatnonzero(flags)[need - 1])
                return trials + hit + 1, target_errors
            trials += flags.size
            errors += count
        k += len(sizes)
    return trials, errors


@functools.lru_cache(maxsize=16)
def _constellation(spec: ConstellationSpec) -> Constellation:
    return build_constellation(spec)


def _channel(plan: SimPlan, snr_db: float) -> ChannelParams:
    if math.isinf(snr_db) and snr_db > 0:
        return ChannelParams(0.0, plan.sigma_phi_sq, plan.constellation.mean_energy, plan.seed, noiseless=True)
    return ChannelParams(snr_db, plan.sigma_phi_sq, plan.constellation.mean_energy, plan.seed)


@functools.lru_cache(maxsize=64)
def _detector(plan: SimPlan, snr_db: float):
    c = _constellation(plan.constellation)
    params = _channel(plan, snr_db)
    kind = plan.detector
    if params.n0 == 0:
        # metric weights are undefined without AWGN; decide by distance
        kind = DetectorKind.EUCD
    return make_detector(kind, c, params, candidates=plan.candidates)


class _PointBatches:
    """Picklable ``batch_errors`` callable for one grid point."""

    def __init__(self, plan: SimPlan, snr_db: float, point_index: int):
        self.plan, self.snr_db, self.point_index = plan, snr_db, point_index

    def __call__(self, k: int, n: int) -> np.ndarray:
        plan = self.plan
        c = _constellation(plan.constellation)
        rng = make_rng(plan.seed, self.point_index, k)
        tx = rng.integers(0, c.size, n)
        rx = transmit(c.points[tx], _channel(plan, self.snr_db), rng)
        return _detector(plan, self.snr_db)(rx) != tx


def simulate_point(
    plan: SimPlan, snr_db: float, point_index: int = 0, executor: Optional[Executor] = None, wave: int = 1
) -> SepPoint:
    trials, errors = run_trials(
        _PointBatches(plan, snr_db, point_index),
        plan.target_errors,
        plan.max_trials,
        plan.batch_size,
        executor=executor,
        wave=wave,
    )
    h, lo, hi = binomial_interval(errors, trials, plan.confidence_level)
    return SepPoint(float(snr_db), errors / trials, h, trials, errors, lo, hi)


def _point_task(plan: SimPlan, i: int) -> SepPoint:
    return simulate_point(plan, plan.snr_grid[i], i)


def default_workers() -> int:
    env = os.environ.get("SAPSK_WORKERS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def simulate_curve(plan: SimPlan, workers: int = 1) -> SepCurve:
    """Simulate every grid point; the result does not depend on ``workers``.

    Points are spread over worker processes; a single-point grid is split
    into batch waves instead.
    """
    n = len(plan.snr_grid)
    if workers <= 1:
        points = [simulate_point(plan, s, i) for i, s in enumerate(plan.snr_grid)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            if n == 1:
                points = [simulate_point(plan, plan.snr_grid[0], 0, executor=ex, wave=workers)]
            else:
                points = list(ex.map(_point_task, [plan] * n, range(n)))
    return SepCurve(tuple(points), plan)


def agreement_rate(
    c: Constellation,
    det_a: Union[str, DetectorKind, Callable],
    det_b: Union[str, DetectorKind, Callable],
    params: ChannelParams,
    trials: int,
    batch_size: int = 1 << 16,
) -> float:
    """Fraction of identical decisions on shared noise realisations."""
    fa = det_a if callable(det_a) else make_detector(det_a, c, params)
    fb = det_b if callable(det_b) else make_detector(det_b, c, params)
    same = done = k = 0
    while done < trials:
        n = min(batch_size, trials - done)
        rng = make_rng(params.seed, 0, k)
        tx = rng.integers(0, c.size, n)
        rx = transmit(c.points[tx], params, rng)
        same += int(np.count_nonzero(fa(rx) == fb(rx)))
        done += n
        k += 1
    return same / trials


def _header_text(header: str) -> str:
    return "".join(f"# {line}\n" for line in header.splitlines()) if header else ""


def write_curve(curve: SepCurve, out: Union[str, IO[str]], extended: bool = False, header: str = "") -> None:
    """Two columns ``snr_db sep``, or with ``extended`` also CI and counts."""
    text = _header_text(header)
    if extended:
        text += "# snr_db sep ci_half_width ci_low ci_high trials errors\n"
        for p in curve:
            text += (
                f"{p.snr_db:.10g} {p.sep:.10g} {p.ci_half_width:.6g} "
                f"{p.ci_low:.6g} {p.ci_high:.6g} {p.trials} {p.errors}\n"
            )
    else:
        text += "# snr_db sep\n"
        text += "".join(f"{p.snr_db:.10g} {p.sep:.10g}\n" for p in curve)
    if isinstance(out, str):
        with open(out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def write_manifest(plan: SimPlan, path: str, extra: Optional[dict] = None) -> None:
    """``key: value`` lines, values JSON-encoded, under a ``#`` header."""
    data = plan.manifest()
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        fh.write("# run manifest\n")
        for key in sorted(data):
            fh.write(f"{key}: {json.dumps(data[key], sort_keys=True)}\n")
