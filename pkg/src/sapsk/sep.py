"""Closed-form SAPSK symbol error probability.

Work happens in a scaled polar plane where both noise axes have unit
variance.  The amplitude axis is divided by ``sqrt(N0/2)`` and the phase
axis by ``sqrt(σφ² + N0/(2 E_q))``.  There the SAPSK lattice around ring
``q`` has ring gap ``a = δρ'`` and phase gap ``b = δθ'`` with alternate rows
offset by ``b/2``, so the decision region of a symbol is a hexagon.  The
hexagon elongates along the amplitude axis while ``a <= b/2`` (ρ-branch)
and along the phase axis otherwise (θ-branch).  The switch happens at the
per-ring SNR threshold ``gamma_threshold``.

Each hexagon is split into a central rectangle plus four right triangles.
The rectangle probability is a product of two Gaussian intervals.  Each
triangle is replaced by ``N`` inscribed rectangles, so the triangle mass is
underestimated and the error probability overestimated; both errors shrink
as ``N`` grows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import erfc

from .errors import NonDividingGamma, ZeroPhaseNoise

__all__ = [
    "Orientation",
    "SepModelParams",
    "RingGeometry",
    "GammaSearch",
    "q_function",
    "gamma_threshold",
    "ring_geometry",
    "tan_alpha_closed_form",
    "ring_error_prob",
    "ring_error_prob_literal",
    "sep_approx",
    "sep_curve",
    "error_floor",
    "phase_floor",
    "divisors",
    "optimize_gamma",
    "write_table",
]

_SQRT2 = math.sqrt(2.0)


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt 2) / 2``.

    Uses the Cephes ``erfc`` shipped with scipy: a rational approximation
    for small arguments and a continued-fraction style asymptotic form in
    the tails, accurate to about 1e-15 relative.  Results underflow to 0
    beyond ``x ≈ 38.5``.
    """
    out = 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)
    return float(out) if np.ndim(out) == 0 else out


class Orientation(str, enum.Enum):
    RHO = "rho"
    THETA = "theta"


@dataclass(frozen=True)
class SepModelParams:
    M: int
    gamma: int
    snr_linear: float
    sigma_phi_sq: float = 0.0
    rect_count: int = 10
    mean_energy: float = 1.0

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.gamma < 1 or self.M % self.gamma:
            raise NonDividingGamma(f"ring count {self.gamma} does not divide {self.M}")
        if not self.snr_linear > 0:
            raise ValueError("snr must be positive")
        if self.sigma_phi_sq < 0:
            raise ValueError("sigma_phi_sq must be non-negative")
        if self.rect_count < 1:
            raise ValueError("rect_count must be >= 1")

    @classmethod
    def from_db(cls, M: int, gamma: int, snr_db: float, sigma_phi_sq: float = 0.0, **kw) -> "SepModelParams":
        return cls(M, gamma, 10.0 ** (snr_db / 10.0), sigma_phi_sq, **kw)

    @property
    def sigma_n_sq(self) -> float:
        return self.mean_energy / self.snr_linear

    @property
    def A(self) -> float:
        G = self.gamma
        return math.pi * G * math.sqrt(4.0 * G * G - 1.0) / self.M


@dataclass(frozen=True)
class RingGeometry:
    q: int
    delta_rho_prime: float
    delta_theta_prime: float
    tan_alpha: float
    D1: float
    D2: float
    gamma_threshold: float
    orientation: Orientation
    R_d: float
    R_w: float
    A: float


def _threshold_numerator(M, G, q):
    k = (2.0 * q - 1.0) ** 2
    return (4.0 * G * G - 1.0) * (k * math.pi**2 * G * G - 4.0 * M * M)


def gamma_threshold(M: int, gamma: int, q, sigma_phi_sq: float):
    """Linear SNR at which ring ``q`` flips from ρ- to θ-elongated regions.

    Negative values mean the ring is θ-elongated at every SNR.
    """
    if sigma_phi_sq <= 0:
        raise ZeroPhaseNoise("threshold is unbounded without phase noise")
    q = np.asarray(q, dtype=float)
    k = (2.0 * q - 1.0) ** 2
    G = float(gamma)
    num = (4.0 * G * G - 1.0) * (k * math.pi**2 * G * G - 4.0 * M * M)
    with np.errstate(over="ignore"):
        out = num / (24.0 * M * M * k * sigma_phi_sq)
    return float(out) if out.ndim == 0 else out


def _ring_terms(p: SepModelParams, q):
    """Vectorised a, b, S, D1, D2 for ring indices ``q``."""
    q = np.asarray(q, dtype=float)
    G = float(p.gamma)
    g = p.snr_linear
    c = 4.0 * G * G - 1.0
    S = p.sigma_phi_sq + c / (6.0 * g * (2.0 * q - 1.0) ** 2)
    a = math.sqrt(24.0 * g / c) * np.ones_like(q)
    b = 2.0 * math.pi * G / (p.M * np.sqrt(S))
    A2 = p.A**2
    X = 24.0 * g * S
    D1 = (X + A2) / (2.0 * A2)
    D2 = (X + A2) / (2.0 * X)
    return a, b, S, D1, D2


def _rho_branch(p: SepModelParams, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if p.sigma_phi_sq > 0:
        return p.snr_linear <= gamma_threshold(p.M, p.gamma, q, p.sigma_phi_sq)
    # no phase noise: the threshold is +inf or -inf depending on its numerator
    k = (2.0 * q - 1.0) ** 2
    return k * math.pi**2 * p.gamma**2 - 4.0 * p.M**2 >= 0


def ring_geometry(params: SepModelParams, q: int, orientation: Optional[Orientation] = None) -> RingGeometry:
    """Scaled hexagon geometry for ring ``q`` (1-based).

    ``orientation`` forces a branch; by default it follows the threshold.
    """
    a, b, _, D1, D2 = (float(v) for v in _ring_terms(params, q))
    if params.sigma_phi_sq > 0:
        gq = gamma_threshold(params.M, params.gamma, q, params.sigma_phi_sq)
    else:
        gq = math.copysign(math.inf, _threshold_numerator(params.M, params.gamma, q))
    if orientation is None:
        orientation = Orientation.RHO if bool(_rho_branch(params, q)) else Orientation.THETA
    orientation = Orientation(orientation)
    if orientation is Orientation.RHO:
        R_d, R_w = 0.5 * b * D1, b * (1.0 - D1)
    else:
        R_d, R_w = a * D2, 2.0 * a * (1.0 - D2)
    return RingGeometry(
        q=q,
        delta_rho_prime=a,
        delta_theta_prime=b,
        tan_alpha=b / (2.0 * a),
        D1=D1,
        D2=D2,
        gamma_threshold=gq,
        orientation=orientation,
        R_d=R_d,
        R_w=R_w,
        A=params.A,
    )


def tan_alpha_closed_form(params: SepModelParams, q: int) -> float:
    """``tan α`` written directly in the system parameters."""
    G = params.gamma
    c = 4.0 * G * G - 1.0
    S = params.sigma_phi_sq + c / (6.0 * params.snr_linear * (2.0 * q - 1.0) ** 2)
    return params.A / math.sqrt(24.0 * params.snr_linear * S)


def _interval_pair(x, y):
    """``1 - (1-2Qx)(1-2Qy)`` without cancellation."""
    Qx, Qy = q_function(x), q_function(y)
    return 2.0 * Qx + 2.0 * Qy - 4.0 * Qx * Qy


def _error_prob(a, b, D1, D2, rho, N, literal_a=None, sqrt_bz=False):
    z = np.arange(1, N + 1, dtype=float)[:, None]
    a_main = a if literal_a is None else literal_a

    # ρ-branch: rectangle |x| <= a, |y| <= b(1-D1)/2
    y_side = 0.5 * b * (1.0 - D1)
    Bz1 = (1.0 - 2.0 * D1) * z / N + D1
    pt_r = np.sum(
        (q_function((z - 1) * a / N) - q_function(z * a / N)) * (q_function(y_side) - q_function(0.5 * b * Bz1)),
        axis=0,
    )
    p_r = _interval_pair(a_main, y_side) - 4.0 * pt_r

    # θ-branch: rectangle |x| <= a(1-D2), |y| <= b/2
    x_side = a * (1.0 - D2)
    Bz2 = (1.0 - 2.0 * D2) * z / N + D2
    x_tip = a * np.sqrt(np.maximum(Bz2, 0.0)) if sqrt_bz else a * Bz2
    pt_t = np.sum(
        (q_function((z - 1) * b / (2 * N)) - q_function(z * b / (2 * N))) * (q_function(x_side) - q_function(x_tip)),
        axis=0,
    )
    p_t = _interval_pair(x_side, 0.5 * b) - 4.0 * pt_t

    return np.clip(np.where(rho, p_r, p_t), 0.0, 1.0)


def ring_error_prob(params: SepModelParams, q, orientation: Optional[Orientation] = None):
    """Error probability of a symbol on ring ``q`` (scalar or array of rings)."""
    scalar = np.ndim(q) == 0
    q = np.atleast_1d(np.asarray(q))
    a, b, _, D1, D2 = _ring_terms(params, q)
    if orientation is None:
        rho = _rho_branch(params, q)
    else:
        rho = np.full(q.shape, Orientation(orientation) is Orientation.RHO)
    out = _error_prob(a, b, D1, D2, rho, params.rect_count)
    return float(out[0]) if scalar else out


def ring_error_prob_literal(params: SepModelParams, q):
    """Diagnostic: a literal reading of the closed form, kept for comparison.

    Differs from :func:`ring_error_prob` in two places: the ρ-branch
    rectangle uses ``sqrt(24γ/(2Γ²-1))`` for its amplitude half-width and
    the θ-branch triangle steps use ``sqrt(B_z)`` instead of ``B_z``.
    """
    scalar = np.ndim(q) == 0
    q = np.atleast_1d(np.asarray(q))
    a, b, _, D1, D2 = _ring_terms(params, q)
    G = params.gamma
    a_literal = math.sqrt(24.0 * params.snr_linear / (2.0 * G * G - 1.0)) if G > 1 else math.inf
    out = _error_prob(a, b, D1, D2, _rho_branch(params, q), params.rect_count, literal_a=a_literal, sqrt_bz=True)
    return float(out[0]) if scalar else out


def sep_approx(params: SepModelParams) -> float:
    """Average of the ring error probabilities (equiprobable symbols)."""
    return float(np.mean(ring_error_prob(params, np.arange(1, params.gamma + 1))))


def sep_curve(M: int, gamma: int, snr_db: Iterable[float], sigma_phi_sq: float, rect_count: int = 10) -> np.ndarray:
    return np.array(
        [sep_approx(SepModelParams.from_db(M, gamma, s, sigma_phi_sq, rect_count=rect_count)) for s in snr_db]
    )


def error_floor(M: int, gamma: int, sigma_phi_sq: float) -> float:
    """High-SNR floor in the published closed form ``Q(2πΓ/(M σφ))``."""
    if sigma_phi_sq <= 0:
        raise ZeroPhaseNoise("no floor without phase noise")
    return q_function(2.0 * math.pi * gamma / (M * math.sqrt(sigma_phi_sq)))


def phase_floor(M: int, gamma: int, sigma_phi_sq: float) -> float:
    """Limit of :func:`sep_approx` as SNR grows: ``2 Q(πΓ/(M σφ))``.

    A symbol is lost once its phase error passes half the phase step in
    either direction, hence two tails at half the argument.
    """
    if sigma_phi_sq <= 0:
        raise ZeroPhaseNoise("no floor without phase noise")
    return 2.0 * q_function(math.pi * gamma / (M * math.sqrt(sigma_phi_sq)))


def divisors(n: int) -> list[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


@dataclass(frozen=True)
class GammaSearch:
    gamma_opt: int
    sep_opt: float
    table: tuple  # ((Γ, P_e), ...) over every divisor


def optimize_gamma(M: int, snr_db: float, sigma_phi_sq: float, rect_count: int = 10) -> GammaSearch:
    """Exhaustive search over all divisors of ``M``; ties go to the smaller Γ."""
    if M < 2:
        raise ValueError("M must be >= 2")
    table = []
    for G in divisors(M):
        table.append((G, sep_approx(SepModelParams.from_db(M, G, snr_db, sigma_phi_sq, rect_count=rect_count))))
    best = min(table, key=lambda row: (row[1], row[0]))
    return GammaSearch(best[0], best[1], tuple(table))


def write_table(
    rows: Iterable[Sequence[float]], columns: Sequence[str], out: Union[str, IO[str]], header: str = ""
) -> None:
    """Whitespace table with ``#`` header lines and a ``#`` column line."""
    text = "".join(f"# {line}\n" for line in header.splitlines()) if header else ""
    text += "# " + " ".join(columns) + "\n"
    for row in rows:
        text += " ".join(_fmt(v) for v in row) + "\n"
    if isinstance(out, str):
        with open(out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"
