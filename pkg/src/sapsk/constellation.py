"""SAPSK, PQAM and square-QAM constellations.

Symbols are stored ring-major: symbol ``k`` lives on ring ``k // (M/Γ)``
for the ring families, and rings are the distinct amplitude levels for
QAM.  Ring and position indices are 1-based, array indices 0-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import IO, Optional, Union

import numpy as np

from .errors import InvalidOrder, NonDividingGamma, NotPerfectSquare

TWO_PI = 2.0 * math.pi

__all__ = [
    "Family",
    "ConstellationSpec",
    "Constellation",
    "Check",
    "ValidationReport",
    "build_sapsk",
    "build_pqam",
    "build_qam",
    "build_constellation",
    "validate",
    "format_constellation",
    "write_constellation",
]


class Family(str, enum.Enum):
    SAPSK = "sapsk"
    PQAM = "pqam"
    QAM = "qam"


@dataclass(frozen=True)
class ConstellationSpec:
    family: Family
    order: int
    rings: int = 1
    mean_energy: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.order < 2:
            raise InvalidOrder(f"constellation order must be >= 2, got {self.order}")
        if self.mean_energy <= 0 or not math.isfinite(self.mean_energy):
            raise ValueError(f"mean energy must be positive, got {self.mean_energy}")
        if self.family is Family.QAM:
            side = math.isqrt(self.order)
            if side * side != self.order:
                raise NotPerfectSquare(f"QAM order {self.order} is not a perfect square")
        else:
            if self.rings < 1:
                raise NonDividingGamma(f"ring count must be >= 1, got {self.rings}")
            if self.order % self.rings:
                raise NonDividingGamma(
                    f"ring count {self.rings} does not divide order {self.order}"
                )

    @property
    def per_ring(self) -> int:
        return self.order // self.rings


@dataclass(frozen=True, eq=False)
class Constellation:
    """Materialized symbol set.

    ``delta_theta`` is ``None`` for QAM, where rings carry unequal symbol
    counts; ``delta_rho`` is then the in-phase grid step.
    """

    spec: ConstellationSpec
    amplitude: np.ndarray
    phase: np.ndarray
    in_phase: np.ndarray
    quadrature: np.ndarray
    ring_index: np.ndarray
    position_index: np.ndarray
    delta_rho: float
    delta_theta: Optional[float]
    ring_amplitudes: np.ndarray
    ring_energies: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.amplitude.size)

    @property
    def family(self) -> Family:
        return self.spec.family

    @property
    def n_rings(self) -> int:
        return int(self.ring_amplitudes.size)

    @property
    def points(self) -> np.ndarray:
        return self.in_phase + 1j * self.quadrature

    def __len__(self) -> int:
        return self.size


def _ring_family(spec: ConstellationSpec, staggered: bool) -> Constellation:
    M, G, Es = spec.order, spec.rings, spec.mean_energy
    K = M // G
    delta_rho = math.sqrt(12.0 * Es / (4.0 * G * G - 1.0))
    delta_theta = TWO_PI * G / M

    q = np.repeat(np.arange(1, G + 1), K)
    p = np.tile(np.arange(1, K + 1), G)
    # phases on a half-step grid of pi/K keep the canonical wrap exact
    half_steps = 2 * p - 1
    if staggered:
        half_steps = half_steps + (q % 2)
    phase = np.mod(half_steps, 2 * K) * (math.pi / K)

    ring_amplitudes = 0.5 * delta_rho * (2.0 * np.arange(1, G + 1) - 1.0)
    ring_energies = 3.0 * Es * (2.0 * np.arange(1, G + 1) - 1.0) ** 2 / (4.0 * G * G - 1.0)
    amplitude = ring_amplitudes[q - 1]
    return Constellation(
        spec=spec,
        amplitude=amplitude,
        phase=phase,
        in_phase=amplitude * np.cos(phase),
        quadrature=amplitude * np.sin(phase),
        ring_index=q,
        position_index=p,
        delta_rho=delta_rho,
        delta_theta=delta_theta,
        ring_amplitudes=ring_amplitudes,
        ring_energies=ring_energies,
    )


def build_sapsk(spec: ConstellationSpec) -> Constellation:
    """SAPSK(M, Γ): Γ equispaced rings, odd rings rotated by half a phase step.

    The half-step rotation makes every symbol and its two neighbours on an
    adjacent ring an isosceles triangle in the (amplitude, phase) plane.
    """
    if spec.family is not Family.SAPSK:
        raise ValueError(f"build_sapsk needs a SAPSK spec, got {spec.family.value}")
    return _ring_family(spec, staggered=True)


def build_pqam(spec: ConstellationSpec) -> Constellation:
    """PQAM(M, Γ): SAPSK radii with every ring sharing one phase set."""
    if spec.family is not Family.PQAM:
        raise ValueError(f"build_pqam needs a PQAM spec, got {spec.family.value}")
    return _ring_family(spec, staggered=False)


def build_qam(spec: ConstellationSpec) -> Constellation:
    if spec.family is not Family.QAM:
        raise ValueError(f"build_qam needs a QAM spec, got {spec.family.value}")
    M, Es = spec.order, spec.mean_energy
    side = math.isqrt(M)
    levels = np.arange(-(side - 1), side, 2)
    ii, qq = np.meshgrid(levels, levels, indexing="ij")
    ii, qq = ii.ravel(), qq.ravel()
    scale = math.sqrt(Es / (2.0 * (M - 1) / 3.0))

    # rings are the distinct integer values of i^2 + q^2, so grouping is exact
    norm2 = ii * ii + qq * qq
    raw_phase = np.mod(np.arctan2(qq, ii), TWO_PI)
    order = np.lexsort((raw_phase, norm2))
    ii, qq, norm2, raw_phase = ii[order], qq[order], norm2[order], raw_phase[order]
    distinct, ring0 = np.unique(norm2, return_inverse=True)
    starts = np.searchsorted(ring0, np.arange(distinct.size))
    position = np.arange(M) - starts[ring0] + 1

    amplitude = np.sqrt(norm2.astype(float)) * scale
    ring_amplitudes = np.sqrt(distinct.astype(float)) * scale
    return Constellation(
        spec=spec,
        amplitude=amplitude,
        phase=raw_phase,
        in_phase=ii * scale,
        quadrature=qq * scale,
        ring_index=ring0 + 1,
        position_index=position,
        delta_rho=2.0 * scale,
        delta_theta=None,
        ring_amplitudes=ring_amplitudes,
        ring_energies=ring_amplitudes**2,
    )


_BUILDERS = {Family.SAPSK: build_sapsk, Family.PQAM: build_pqam, Family.QAM: build_qam}


def build_constellation(spec: ConstellationSpec) -> Constellation:
    return _BUILDERS[spec.family](spec)


# -- validation ---------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    deviation: float = 0.0
    applicable: bool = True
    detail: str = ""

    def __str__(self):
        if not self.applicable:
            return f"{self.name:<14} n/a   {self.detail}"
        flag = "PASS" if self.passed else "FAIL"
        return f"{self.name:<14} {flag}  deviation={self.deviation:.3e} {self.detail}"


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self):
        return "\n".join(str(c) for c in self.checks)


def _wrap(x):
    """Wrap angles to (-pi, pi]."""
    y = np.mod(x + math.pi, TWO_PI) - math.pi
    return np.where(y == -math.pi, math.pi, y)


def validate(c: Constellation, rel_tol: float = 1e-12) -> ValidationReport:
    """Check the structural invariants of ``c`` and report measured deviations."""
    checks = []
    fam = c.family
    Es = c.spec.mean_energy
    M = c.size

    pairs = set(zip(c.ring_index.tolist(), c.position_index.tolist()))
    checks.append(Check("indices", len(pairs) == M == c.spec.order, float(M - len(pairs))))

    dev = abs(float(np.mean(c.amplitude**2)) - Es) / Es
    checks.append(Check("mean_energy", dev <= rel_tol, dev))

    z = c.amplitude * np.exp(1j * c.phase)
    scale = max(float(np.max(c.amplitude)), 1e-300)
    dev = float(np.max(np.abs(z - c.points))) / scale
    in_range = bool(np.all((c.phase >= 0) & (c.phase < TWO_PI)))
    checks.append(Check("coordinates", dev <= rel_tol and in_range, dev))

    ring_e = c.ring_energies[c.ring_index - 1]
    dev = float(np.max(np.abs(c.amplitude**2 - ring_e) / ring_e))
    checks.append(Check("ring_energy", dev <= rel_tol, dev))

    if fam is Family.QAM:
        for name in ("ring_spacing", "phase_spacing", "stagger", "isosceles"):
            checks.append(Check(name, True, applicable=False, detail="square QAM"))
        return ValidationReport(checks)

    G, K = c.spec.rings, c.spec.per_ring
    dr, dt = c.delta_rho, c.delta_theta
    gaps = np.diff(c.ring_amplitudes)
    dev = float(np.max(np.abs(gaps - dr))) / dr if gaps.size else 0.0
    dev = max(dev, abs(c.ring_amplitudes[0] - dr / 2) / dr)
    checks.append(Check("ring_spacing", dev <= 1e-9, dev))

    ph = np.sort(c.phase.reshape(G, K), axis=1)
    steps = np.diff(np.concatenate([ph, ph[:, :1] + TWO_PI], axis=1), axis=1)
    dev = float(np.max(np.abs(steps - dt))) / dt
    checks.append(Check("phase_spacing", dev <= 1e-9, dev))

    if G == 1:
        checks.append(Check("stagger", True, applicable=False, detail="single ring"))
    else:
        expected = dt / 2 if fam is Family.SAPSK else 0.0
        offset = np.mod(ph[1:, 0] - ph[:-1, 0], dt)
        dev = float(np.max(np.minimum(np.abs(offset - expected), dt - np.abs(offset - expected)))) / dt
        checks.append(Check("stagger", dev <= 1e-9, dev))

    if fam is not Family.SAPSK:
        checks.append(Check("isosceles", True, applicable=False, detail=fam.value))
    else:
        worst = 0.0
        for q in range(G - 1):
            d = _wrap(ph[q + 1][None, :] - ph[q][:, None])
            two = np.sort(np.abs(d), axis=1)[:, :2] if K > 1 else np.abs(d)
            worst = max(worst, float(np.max(np.abs(two - dt / 2))) / dt)
        checks.append(Check("isosceles", worst <= 1e-9, worst))
    return ValidationReport(checks)


# -- text export ----------------------------------------------------------------


def format_constellation(c: Constellation) -> str:
    """One symbol per line: ``q p amplitude phase in_phase quadrature``."""
    rows = []
    for q, p, a, t, x, y in zip(
        c.ring_index, c.position_index, c.amplitude, c.phase, c.in_phase, c.quadrature
    ):
        rows.append(f"{q} {p} {a:.9g} {t:.9g} {x:.9g} {y:.9g}")
    return "\n".join(rows) + "\n"


def write_constellation(c: Constellation, out: Union[str, IO[str]], header: str = "") -> None:
    text = ""
    if header:
        text += "".join(f"# {line}\n" for line in header.splitlines())
    text += "# q p amplitude phase in_phase quadrature\n"
    text += format_constellation(c)
    if isinstance(out, str):
        with open(out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
