"""Staggered amplitude/phase-shift keying (SAPSK) under Gaussian phase noise.

Constellation builders, a phase-noise channel, maximum-likelihood and
constant-time detectors, a closed-form SEP model and a reproducible Monte
Carlo engine.
"""

__version__ = "0.1.0"

from .channel import ChannelParams, ReceivedSymbols, make_rng, transmit
from .constellation import (
    Constellation,
    ConstellationSpec,
    Family,
    build_constellation,
    build_pqam,
    build_qam,
    build_sapsk,
    validate,
)
from .detectors import (
    DetectorKind,
    build_sapsk_index,
    detect_eucd,
    detect_gapd,
    detect_gpdd,
    detect_sapsk_fast,
    make_detector,
)
from .errors import (
    DegenerateNoise,
    InvalidOrder,
    NonDividingGamma,
    NotPerfectSquare,
    SapskError,
    WrongFamily,
    ZeroPhaseNoise,
)
from .montecarlo import SepCurve, SepPoint, SimPlan, agreement_rate, simulate_curve, simulate_point
from .sep import (
    SepModelParams,
    error_floor,
    gamma_threshold,
    optimize_gamma,
    phase_floor,
    q_function,
    ring_error_prob,
    ring_geometry,
    sep_approx,
)
