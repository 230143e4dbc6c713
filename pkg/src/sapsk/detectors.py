"""Hard-decision symbol detectors.

All detectors map received samples to symbol indices of a
:class:`~sapsk.constellation.Constellation` and break ties towards the
lowest index.

``eucd``   minimum Euclidean distance.
``gapd``   Gaussian amplitude/phase maximum-likelihood metric
           ``(|r|-|s|)^2/(N0/2) + dθ^2/(σφ² + N0/(2|s|^2)) + ln(σφ² + N0/(2|s|^2))``.
``gpdd``   weighted polar distance ``2(|r|-|s|)^2/N0 + dθ^2/(σφ² + N0/(2|r|^2))``.
``fast``   constant-time SAPSK detector: interpolates the ring and phase
           positions of ``r`` and scores two candidates with the ``gpdd`` metric.

Phase differences ``dθ`` are always wrapped to (-pi, pi].

The first three metrics are exact minimisations over all M symbols.  For a
fixed ring each of them is minimised by the ring symbol nearest in phase, so
the default ``method="rings"`` scans a window of rings around ``|r|`` and
certifies the result against a lower bound for every ring outside the
window, widening the window until the bound holds.  ``method="exhaustive"``
evaluates the metric against every symbol and is kept for benchmarking and
cross-checks.
"""

from __future__ import annotations

import enum
import functools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .channel import ChannelParams, ReceivedSymbols, received_from_complex
from .constellation import Constellation, Family
from .errors import DegenerateNoise, WrongFamily

__all__ = [
    "DetectorKind",
    "SapskIndex",
    "wrap_phase",
    "detect_eucd",
    "detect_gapd",
    "detect_gpdd",
    "build_sapsk_index",
    "detect_sapsk_fast",
    "detect_sapsk_fast_counted",
    "detect_gapd_counted",
    "make_detector",
]

TWO_PI = 2.0 * math.pi
_CHUNK = 1 << 16
_WINDOWS = (2, 8, 32, 128)


class DetectorKind(str, enum.Enum):
    EUCD = "eucd"
    GAPD = "gapd"
    GPDD = "gpdd"
    SAPSK_FAST = "fast"


def wrap_phase(x):
    """Wrap to (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(x, dtype=float), TWO_PI)


def _received(r) -> tuple[ReceivedSymbols, bool]:
    if isinstance(r, ReceivedSymbols):
        return r, False
    scalar = np.ndim(r) == 0
    return received_from_complex(r), scalar


def _phase_weight_undefined(u: np.ndarray, n0: float) -> np.ndarray:
    """True where ``n0 / (2 u^2)`` is not finite (``u = 0`` or underflow)."""
    with np.errstate(divide="ignore", over="ignore"):
        return ~np.isfinite(n0 / (2.0 * u * u))


def _finish(idx: np.ndarray, scalar: bool):
    return int(idx[0]) if scalar else idx


def _noise(params: ChannelParams) -> tuple[float, float]:
    n0 = params.n0
    if n0 <= 0:
        raise DegenerateNoise("detector metric needs a positive AWGN variance")
    return n0, params.sigma_phi_sq


# -- ring tables ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _RingTable:
    amps: np.ndarray  # (G,) ascending
    starts: np.ndarray  # (G,)
    counts: np.ndarray  # (G,)
    phases: np.ndarray  # (M,) ascending within each ring
    symbols: np.ndarray  # (M,) symbol index per slot
    keys: np.ndarray  # phases + 4*pi*ring, globally ascending


@functools.lru_cache(maxsize=64)
def _ring_table(c: Constellation) -> _RingTable:
    ring0 = c.ring_index - 1
    order = np.lexsort((np.arange(c.size), c.phase, ring0))
    ring_sorted = ring0[order]
    G = c.n_rings
    starts = np.searchsorted(ring_sorted, np.arange(G))
    counts = np.bincount(ring_sorted, minlength=G)
    phases = c.phase[order]
    return _RingTable(
        amps=c.ring_amplitudes.astype(float),
        starts=starts,
        counts=counts,
        phases=phases,
        symbols=order.astype(np.int64),
        keys=phases + 2.0 * TWO_PI * ring_sorted,
    )


def _nearest_on_rings(t: _RingTable, theta: np.ndarray, rings: np.ndarray):
    """Slot of the symbol nearest in phase on each ring; ties to lower index."""
    th = theta[:, None] if rings.ndim == 2 else theta
    pos = np.searchsorted(t.keys, th + 2.0 * TWO_PI * rings)
    start = t.starts[rings]
    cnt = t.counts[rings]
    j = pos - start
    left = start + np.mod(j - 1, cnt)
    right = start + np.mod(j, cnt)
    dl = np.abs(wrap_phase(th - t.phases[left]))
    dr = np.abs(wrap_phase(th - t.phases[right]))
    take_right = (dr < dl) | ((dr == dl) & (t.symbols[right] < t.symbols[left]))
    slot = np.where(take_right, right, left)
    return slot, np.where(take_right, dr, dl)


def _metric(kind: DetectorKind, u, rho, dtheta, n0, sp):
    if kind is DetectorKind.EUCD:
        s = np.sin(0.5 * dtheta)
        return (u - rho) ** 2 + 4.0 * u * rho * s * s
    if kind is DetectorKind.GAPD:
        var_t = sp + n0 / (2.0 * rho * rho)
        return (u - rho) ** 2 / (0.5 * n0) + dtheta**2 / var_t + np.log(var_t)
    var_t = sp + n0 / (2.0 * u * u)
    return 2.0 * (u - rho) ** 2 / n0 + dtheta**2 / var_t


def _amp_bound(kind: DetectorKind, d, n0, log_min):
    if kind is DetectorKind.EUCD:
        return d * d
    if kind is DetectorKind.GAPD:
        return 2.0 * d * d / n0 + log_min
    return 2.0 * d * d / n0


def _detect_rings_chunk(kind, t: _RingTable, u, theta, n0, sp):
    G = t.amps.size
    log_min = math.log(sp + n0 / (2.0 * t.amps[-1] ** 2)) if kind is DetectorKind.GAPD else 0.0
    out = np.empty(u.size, dtype=np.int64)
    todo = np.arange(u.size)

    k = np.clip(np.searchsorted(t.amps, u), 1, max(G - 1, 1))
    if G > 1:
        centre = np.where(np.abs(u - t.amps[k - 1]) <= np.abs(t.amps[k] - u), k - 1, k)
    else:
        centre = np.zeros(u.size, dtype=np.int64)

    for W in _WINDOWS + (G,):
        width = min(2 * W + 1, G)
        uu, tt, cc = u[todo], theta[todo], centre[todo]
        lo = np.clip(cc - W, 0, G - width)
        rings = lo[:, None] + np.arange(width)[None, :]
        slot, dth = _nearest_on_rings(t, tt, rings)
        m = _metric(kind, uu[:, None], t.amps[rings], dth, n0, sp)
        best_col = np.argmin(m, axis=1)
        rows = np.arange(todo.size)
        best = m[rows, best_col]
        choice = t.symbols[slot[rows, best_col]]
        if width == G:
            out[todo] = choice
            break
        hi = lo + width - 1
        bound = np.full(todo.size, np.inf)
        has_lo = lo > 0
        d_lo = np.maximum(uu - t.amps[np.maximum(lo - 1, 0)], 0.0)
        bound = np.where(has_lo, np.minimum(bound, _amp_bound(kind, d_lo, n0, log_min)), bound)
        has_hi = hi < G - 1
        d_hi = np.maximum(t.amps[np.minimum(hi + 1, G - 1)] - uu, 0.0)
        bound = np.where(has_hi, np.minimum(bound, _amp_bound(kind, d_hi, n0, log_min)), bound)
        ok = best < bound
        out[todo[ok]] = choice[ok]
        todo = todo[~ok]
        if todo.size == 0:
            break
    return out


def _detect_rings(kind, c: Constellation, rx: ReceivedSymbols, n0: float, sp: float):
    t = _ring_table(c)
    n = len(rx)
    out = np.empty(n, dtype=np.int64)
    for s in range(0, n, _CHUNK):
        sl = slice(s, s + _CHUNK)
        out[sl] = _detect_rings_chunk(kind, t, rx.amplitude[sl], rx.phase[sl], n0, sp)
    return out


def _detect_exhaustive(kind, c: Constellation, rx: ReceivedSymbols, n0: float, sp: float):
    n, M = len(rx), c.size
    out = np.empty(n, dtype=np.int64)
    step = max(1, (1 << 21) // M)
    for s in range(0, n, step):
        u = rx.amplitude[s : s + step, None]
        th = rx.phase[s : s + step, None]
        if kind is DetectorKind.EUCD:
            m = (rx.in_phase[s : s + step, None] - c.in_phase) ** 2 + (
                rx.quadrature[s : s + step, None] - c.quadrature
            ) ** 2
        else:
            m = _metric(kind, u, c.amplitude[None, :], wrap_phase(th - c.phase), n0, sp)
        out[s : s + step] = np.argmin(m, axis=1)
    return out


def _dispatch(kind, r, c, n0, sp, method):
    rx, scalar = _received(r)
    if method == "rings":
        idx = _detect_rings(kind, c, rx, n0, sp)
    elif method == "exhaustive":
        idx = _detect_exhaustive(kind, c, rx, n0, sp)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _finish(idx, scalar)


def detect_eucd(r, c: Constellation, method: str = "rings"):
    """Nearest symbol in Euclidean distance."""
    return _dispatch(DetectorKind.EUCD, r, c, 0.0, 0.0, method)


def detect_gapd(r, c: Constellation, params: ChannelParams, method: str = "rings"):
    n0, sp = _noise(params)
    return _dispatch(DetectorKind.GAPD, r, c, n0, sp, method)


def detect_gpdd(r, c: Constellation, params: ChannelParams, method: str = "rings"):
    """Weighted polar distance detector; ``|r| = 0`` falls back to ``eucd``."""
    n0, sp = _noise(params)
    rx, scalar = _received(r)
    zero = _phase_weight_undefined(rx.amplitude, n0)
    if method == "rings":
        idx = _detect_rings(DetectorKind.GPDD, c, _safe(rx, zero), n0, sp)
    elif method == "exhaustive":
        idx = _detect_exhaustive(DetectorKind.GPDD, c, _safe(rx, zero), n0, sp)
    else:
        raise ValueError(f"unknown method {method!r}")
    if zero.any():
        idx[zero] = detect_eucd(rx[zero], c)
    return _finish(idx, scalar)


def _safe(rx: ReceivedSymbols, zero: np.ndarray) -> ReceivedSymbols:
    if not zero.any():
        return rx
    amp = np.where(zero, 1.0, rx.amplitude)
    return ReceivedSymbols(rx.in_phase, rx.quadrature, amp, rx.phase)


# -- constant-time SAPSK detector -----------------------------------------------


@dataclass(frozen=True, eq=False)
class SapskIndex:
    """Lookup arrays for the constant-time detector.

    ``ring_amplitudes`` holds ring amplitudes (not energies) because the ring
    interpolation is linear in amplitude.  Row ``q`` of ``ring_phase_tables``
    is the ascending phase list of ring ``q`` and ``ring_symbols`` the
    matching symbol indices.
    """

    ring_amplitudes: np.ndarray
    ring_phase_tables: np.ndarray
    ring_symbols: np.ndarray
    delta_rho: float
    delta_theta: float
    constellation: Constellation

    @property
    def first_amplitude(self) -> float:
        return float(self.ring_amplitudes[0])

    @property
    def first_phase(self) -> np.ndarray:
        return self.ring_phase_tables[:, 0]

    @property
    def n_rings(self) -> int:
        return self.ring_phase_tables.shape[0]

    @property
    def per_ring(self) -> int:
        return self.ring_phase_tables.shape[1]


def build_sapsk_index(c: Constellation) -> SapskIndex:
    if c.family is not Family.SAPSK:
        raise WrongFamily(f"constant-time detector needs SAPSK, got {c.family.value}")
    G, K = c.spec.rings, c.spec.per_ring
    ph = c.phase.reshape(G, K)
    order = np.argsort(ph, axis=1, kind="stable")
    sym = np.arange(c.size).reshape(G, K)
    return SapskIndex(
        ring_amplitudes=c.ring_amplitudes.copy(),
        ring_phase_tables=np.take_along_axis(ph, order, axis=1),
        ring_symbols=np.take_along_axis(sym, order, axis=1),
        delta_rho=c.delta_rho,
        delta_theta=c.delta_theta,
        constellation=c,
    )


def _bracket(idx: SapskIndex, q0: np.ndarray, theta: np.ndarray):
    """Table positions below/above ``theta`` on ring ``q0`` and the lower phase."""
    K = idx.per_ring
    first = idx.first_phase[q0]
    w = np.floor((theta - first) / idx.delta_theta + 1.0).astype(np.int64)
    lower_phase = first + (w - 1) * idx.delta_theta
    return np.mod(w - 1, K), np.mod(w, K), lower_phase


def detect_sapsk_fast(r, idx: SapskIndex, params: ChannelParams, candidates: str = "pair"):
    """Constant-time detection on a SAPSK constellation.

    ``candidates`` selects the candidate set:

    ``"pair"``     the two symbols at opposite corners of the half-step cell
                   containing ``r`` (one on each bracketing ring).
    ``"literal"``  pick the pair by the parity of the lower ring index alone.
                   Only correct on half of each phase bracket; diagnostics only.
    ``"quad"``     all four bracketing symbols.
    """
    n0, sp = _noise(params)
    rx, scalar = _received(r)
    u, th = rx.amplitude, rx.phase
    G, K = idx.n_rings, idx.per_ring

    if G == 1:
        q0 = np.zeros(u.size, dtype=np.int64)
        q1 = q0
    else:
        f = u / idx.delta_rho + 1.0 - idx.first_amplitude / idx.delta_rho
        q = np.clip(np.floor(f), 1, G - 1).astype(np.int64)
        q0 = q - 1
        q1 = q0 + 1
    lo0, hi0, base0 = _bracket(idx, q0, th)
    lo1, hi1, base1 = _bracket(idx, q1, th)

    if G == 1:
        cand_q = [q0, q0]
        cand_w = [lo0, hi0]
    elif candidates == "pair":
        upper_cell = base0 >= base1
        cand_q = [q0, q1]
        cand_w = [np.where(upper_cell, lo0, hi0), np.where(upper_cell, hi1, lo1)]
    elif candidates == "literal":
        even = (q0 + 1) % 2 == 0
        cand_q = [q0, q1]
        cand_w = [np.where(even, lo0, hi0), np.where(even, hi1, lo1)]
    elif candidates == "quad":
        cand_q = [q0, q0, q1, q1]
        cand_w = [lo0, hi0, lo1, hi1]
    else:
        raise ValueError(f"unknown candidate mode {candidates!r}")

    Q = np.stack(cand_q, axis=1)
    Wp = np.stack(cand_w, axis=1)
    zero = _phase_weight_undefined(u, n0)
    uu = np.where(zero, 1.0, u)[:, None]
    m = _metric(
        DetectorKind.GPDD,
        uu,
        idx.ring_amplitudes[Q],
        wrap_phase(th[:, None] - idx.ring_phase_tables[Q, Wp]),
        n0,
        sp,
    )
    sym = idx.ring_symbols[Q, Wp]
    best = m.min(axis=1, keepdims=True)
    out = np.where(m == best, sym, np.iinfo(np.int64).max).min(axis=1)
    if zero.any():
        out[zero] = detect_eucd(rx[zero], idx.constellation)
    return _finish(out, scalar)


# -- scalar reference paths with work counters ----------------------------------------


def detect_sapsk_fast_counted(r: complex, idx: SapskIndex, params: ChannelParams, counter: Counter) -> int:
    """Scalar ``pair``-mode fast detector that tallies its work in ``counter``.

    Counted kinds: ``arith`` (add/sub/mul/div/floor/mod/compare),
    ``table_read`` and ``metric``.  The tallies do not depend on M.
    """
    n0, sp = _noise(params)
    u = abs(r)
    th = math.atan2(r.imag, r.real) % TWO_PI
    counter["arith"] += 2
    if _phase_weight_undefined(np.array(u), n0):
        return int(detect_eucd(r, idx.constellation))
    G, K = idx.n_rings, idx.per_ring
    dr, dt = idx.delta_rho, idx.delta_theta

    if G == 1:
        q0 = q1 = 0
    else:
        f = u / dr + 1.0 - idx.first_amplitude / dr
        q = min(max(math.floor(f), 1), G - 1)
        counter["arith"] += 7
        counter["table_read"] += 1
        q0, q1 = q - 1, q
        counter["arith"] += 2

    def bracket(qi):
        first = idx.ring_phase_tables[qi, 0]
        w = math.floor((th - first) / dt + 1.0)
        base = first + (w - 1) * dt
        counter["table_read"] += 1
        counter["arith"] += 10
        return (w - 1) % K, w % K, base

    lo0, hi0, base0 = bracket(q0)
    lo1, hi1, base1 = bracket(q1)
    if G == 1:
        cands = [(q0, lo0), (q0, hi0)]
    else:
        counter["arith"] += 1
        if base0 >= base1:
            cands = [(q0, lo0), (q1, hi1)]
        else:
            cands = [(q0, hi0), (q1, lo1)]

    var_t = sp + n0 / (2.0 * u * u)
    counter["arith"] += 4
    best, best_sym = math.inf, -1
    for qi, wi in cands:
        rho = idx.ring_amplitudes[qi]
        phi = idx.ring_phase_tables[qi, wi]
        sym = int(idx.ring_symbols[qi, wi])
        counter["table_read"] += 3
        d = float(wrap_phase(th - phi))
        m = 2.0 * (u - rho) ** 2 / n0 + d * d / var_t
        counter["arith"] += 12
        counter["metric"] += 1
        if m < best or (m == best and sym < best_sym):
            best, best_sym = m, sym
        counter["arith"] += 2
    return best_sym


def detect_gapd_counted(r: complex, c: Constellation, params: ChannelParams, counter: Counter) -> int:
    """Scalar exhaustive GAP-D with the same work accounting."""
    n0, sp = _noise(params)
    u = abs(r)
    th = math.atan2(r.imag, r.real) % TWO_PI
    counter["arith"] += 2
    best, best_sym = math.inf, -1
    for k in range(c.size):
        rho, phi = float(c.amplitude[k]), float(c.phase[k])
        counter["table_read"] += 2
        var_t = sp + n0 / (2.0 * rho * rho)
        d = float(wrap_phase(th - phi))
        m = (u - rho) ** 2 / (0.5 * n0) + d * d / var_t + math.log(var_t)
        counter["arith"] += 16
        counter["metric"] += 1
        if m < best:
            best, best_sym = m, k
        counter["arith"] += 1
    return best_sym


def make_detector(
    kind, c: Constellation, params: ChannelParams, method: str = "rings", candidates: str = "pair"
) -> Callable[[ReceivedSymbols], np.ndarray]:
    """Bind a detector to a constellation and channel; returns ``f(received) -> indices``."""
    kind = DetectorKind(kind)
    if kind is DetectorKind.EUCD:
        return lambda rx: detect_eucd(rx, c, method=method)
    if kind is DetectorKind.GAPD:
        return lambda rx: detect_gapd(rx, c, params, method=method)
    if kind is DetectorKind.GPDD:
        return lambda rx: detect_gpdd(rx, c, params, method=method)
    index = build_sapsk_index(c)
    return lambda rx: detect_sapsk_fast(rx, index, params, candidates=candidates)
