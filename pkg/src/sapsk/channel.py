"""AWGN plus Gaussian phase-noise channel.

``r = |s| exp(j(phi + arg s)) + n`` with ``phi ~ N(0, sigma_phi^2)`` drawn
independently per symbol and ``n`` circular complex Gaussian with total
variance ``N0 = Es / snr``.

Random streams use numpy's Philox4x32-10 counter-based generator.  A stream
is keyed by ``SeedSequence([seed, *stream_id])`` so Monte Carlo batches can
be drawn in any order, or on any worker, and still reproduce bit-for-bit.
Normal variates come from numpy's ziggurat sampler, which is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelParams",
    "ReceivedSymbols",
    "snr_linear",
    "make_rng",
    "transmit",
    "received_from_complex",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ChannelParams:
    snr_db: float
    sigma_phi_sq: float = 0.0
    mean_energy: float = 1.0
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite; use noiseless=True for an AWGN-free channel")
        if self.sigma_phi_sq < 0 or not math.isfinite(self.sigma_phi_sq):
            raise ValueError(f"sigma_phi_sq must be a finite non-negative value, got {self.sigma_phi_sq}")
        if self.mean_energy <= 0:
            raise ValueError("mean_energy must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def snr(self) -> float:
        return snr_linear(self)

    @property
    def n0(self) -> float:
        """AWGN variance sigma_n^2 (both quadratures together)."""
        if self.noiseless:
            return 0.0
        return self.mean_energy / snr_linear(self)

    @property
    def sigma_n_sq(self) -> float:
        return self.n0


def snr_linear(params) -> float:
    """``10 ** (snr_db / 10)``; accepts ChannelParams or a plain dB value."""
    snr_db = params.snr_db if isinstance(params, ChannelParams) else float(params)
    return 10.0 ** (snr_db / 10.0)


def make_rng(seed: int, *stream_id: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *stream_id)``."""
    ss = np.random.SeedSequence([int(seed), *(int(s) for s in stream_id)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ReceivedSymbols:
    """Received samples in both rectangular and polar form (phase in [0, 2pi))."""

    in_phase: np.ndarray
    quadrature: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray

    @property
    def complex(self) -> np.ndarray:
        return self.in_phase + 1j * self.quadrature

    def __len__(self) -> int:
        return int(np.size(self.amplitude))

    def __getitem__(self, key) -> "ReceivedSymbols":
        return ReceivedSymbols(
            np.atleast_1d(self.in_phase[key]),
            np.atleast_1d(self.quadrature[key]),
            np.atleast_1d(self.amplitude[key]),
            np.atleast_1d(self.phase[key]),
        )


def received_from_complex(r) -> ReceivedSymbols:
    r = np.atleast_1d(np.asarray(r, dtype=complex))
    phase = np.mod(np.angle(r), TWO_PI)
    phase = np.where(phase >= TWO_PI, 0.0, phase)
    return ReceivedSymbols(r.real.copy(), r.imag.copy(), np.abs(r), phase)


def transmit(s, params: ChannelParams, rng: np.random.Generator) -> ReceivedSymbols:
    """Pass symbols ``s`` (complex scalar or array) through the channel.

    Draw order per call is fixed: all phase-noise samples, then the in-phase
    noise, then the quadrature noise.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    n = s.size
    if params.sigma_phi_sq > 0:
        phi = rng.standard_normal(n) * math.sqrt(params.sigma_phi_sq)
        r = s * np.exp(1j * phi)
    else:
        r = s.copy()
    n0 = params.n0
    if n0 > 0:
        sd = math.sqrt(n0 / 2.0)
        nx = rng.standard_normal(n)
        ny = rng.standard_normal(n)
        r = r + sd * (nx + 1j * ny)
    return received_from_complex(r)

