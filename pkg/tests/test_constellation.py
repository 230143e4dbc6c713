import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sapsk.constellation import (
    ConstellationSpec,
    Family,
    build_constellation,
    build_pqam,
    build_qam,
    build_sapsk,
    validate,
    write_constellation,
)
from sapsk.errors import InvalidOrder, NonDividingGamma, NotPerfectSquare, SapskError


@st.composite
def ring_specs(draw, family=None):
    fam = draw(st.sampled_from([Family.SAPSK, Family.PQAM])) if family is None else family
    K = draw(st.integers(1, 64))
    G = draw(st.integers(1, 64))
    Es = draw(st.floats(0.01, 100.0))
    return ConstellationSpec(fam, max(2, K * G), G if K * G >= 2 else 1, Es)


class TestSpecValidation:
    def test_order_too_small(self):
        with pytest.raises(InvalidOrder):
            ConstellationSpec("sapsk", 1, 1)

    def test_non_dividing(self):
        with pytest.raises(NonDividingGamma):
            ConstellationSpec("sapsk", 32, 5)

    def test_qam_square(self):
        with pytest.raises(NotPerfectSquare):
            ConstellationSpec("qam", 15)

    def test_errors_are_value_errors(self):
        assert issubclass(NonDividingGamma, SapskError)
        assert issubclass(SapskError, ValueError)

    def test_bad_energy(self):
        with pytest.raises(ValueError):
            ConstellationSpec("pqam", 16, 2, 0.0)

    def test_builder_family_mismatch(self):
        with pytest.raises(ValueError):
            build_sapsk(ConstellationSpec("pqam", 16, 2))


class TestSapskGeometry:
    def test_sapsk_32_8_radii(self):
        c = build_sapsk(ConstellationSpec("sapsk", 32, 8))
        q = np.arange(1, 9)
        assert np.allclose(c.ring_amplitudes, math.sqrt(3 / 255) * (2 * q - 1), rtol=1e-14)
        assert np.all(np.abs(c.ring_amplitudes / (2 * q - 1) - 0.1085) < 5e-4)

    def test_ring_energy_formula(self):
        c = build_sapsk(ConstellationSpec("sapsk", 64, 4, 2.0))
        q = np.arange(1, 5)
        assert np.allclose(c.ring_energies, 3 * 2.0 * (2 * q - 1) ** 2 / (4 * 16 - 1), rtol=1e-14)

    def test_single_ring_is_psk(self):
        c = build_sapsk(ConstellationSpec("sapsk", 8, 1))
        assert np.allclose(c.amplitude, 1.0)
        assert np.allclose(np.diff(np.sort(c.phase)), math.pi / 4)

    def test_stagger_half_step(self):
        c = build_sapsk(ConstellationSpec("sapsk", 32, 8))
        ph = c.phase.reshape(8, 4)
        off = np.mod(ph[1] - ph[0], c.delta_theta)
        assert np.allclose(off, c.delta_theta / 2)

    def test_pqam_has_no_stagger(self):
        c = build_pqam(ConstellationSpec("pqam", 32, 8))
        ph = np.sort(c.phase.reshape(8, 4), axis=1)
        assert np.allclose(ph, ph[0])

    def test_single_ring_families_agree_up_to_rotation(self):
        s = build_sapsk(ConstellationSpec("sapsk", 16, 1))
        p = build_pqam(ConstellationSpec("pqam", 16, 1))
        rot = np.mod(np.sort(s.phase) - np.sort(p.phase), 2 * math.pi)
        assert np.allclose(rot, rot[0])
        assert np.allclose(s.amplitude, p.amplitude)

    def test_indices_one_based_ring_major(self):
        c = build_sapsk(ConstellationSpec("sapsk", 12, 3))
        assert list(c.ring_index) == [1] * 4 + [2] * 4 + [3] * 4
        assert list(c.position_index) == [1, 2, 3, 4] * 3


class TestQam:
    def test_grid_and_energy(self):
        c = build_qam(ConstellationSpec("qam", 16))
        assert np.mean(c.amplitude**2) == pytest.approx(1.0, rel=1e-14)
        levels = np.unique(np.round(c.in_phase / np.abs(c.in_phase).min(), 9))
        assert np.allclose(sorted(np.abs(levels)), [1, 1, 3, 3])

    def test_rings(self):
        c = build_qam(ConstellationSpec("qam", 16))
        assert c.n_rings == 3
        assert c.delta_theta is None

    def test_validate_marks_geometry_na(self):
        rep = validate(build_qam(ConstellationSpec("qam", 64)))
        assert rep.passed
        assert not rep["isosceles"].applicable


@given(ring_specs())
def test_validate_passes_for_any_ring_family(spec):
    rep = validate(build_constellation(spec))
    assert rep.passed, str(rep)


@given(ring_specs(Family.SAPSK))
def test_mean_energy_exact(spec):
    c = build_constellation(spec)
    assert abs(np.mean(c.amplitude**2) - spec.mean_energy) <= 1e-12 * spec.mean_energy


@given(ring_specs())
def test_phases_in_range_and_distinct(spec):
    c = build_constellation(spec)
    assert np.all((c.phase >= 0) & (c.phase < 2 * math.pi))
    pts = np.round(c.points, 12)
    assert len(set(pts.tolist())) == c.size


@given(st.integers(1, 20).map(lambda s: (2 * s) ** 2))
def test_qam_energy(M):
    c = build_qam(ConstellationSpec("qam", M))
    assert np.mean(c.amplitude**2) == pytest.approx(1.0, rel=1e-12)


def test_write_constellation_header():
    buf = io.StringIO()
    write_constellation(build_sapsk(ConstellationSpec("sapsk", 8, 2)), buf, header="demo\nline two")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# demo" and lines[1] == "# line two"
    assert lines[2].startswith("# q p")
    assert len(lines) == 3 + 8
    q, p, amp, ph, x, y = lines[3].split()
    assert math.isclose(float(amp) * math.cos(float(ph)), float(x), abs_tol=1e-8)


def test_validation_detects_corruption():
    c = build_sapsk(ConstellationSpec("sapsk", 16, 4))
    c.phase[3] += 0.01  # arrays are mutable even on a frozen dataclass
    rep = validate(c)
    assert not rep["phase_spacing"].passed
    assert rep["phase_spacing"].deviation > 1e-3
