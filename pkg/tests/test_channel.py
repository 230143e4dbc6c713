import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sapsk.channel import ChannelParams, make_rng, received_from_complex, snr_linear, transmit


def test_snr_conversion():
    assert snr_linear(30.0) == pytest.approx(1000.0)
    p = ChannelParams(20.0, mean_energy=2.0)
    assert p.n0 == pytest.approx(0.02)


def test_noiseless_passthrough():
    s = np.exp(1j * np.linspace(0, 6, 50)) * 0.7
    rx = transmit(s, ChannelParams(0.0, noiseless=True), make_rng(1))
    assert np.array_equal(rx.complex, s)


@pytest.mark.parametrize("bad", [dict(snr_db=math.inf), dict(snr_db=10, sigma_phi_sq=-1), dict(snr_db=10, mean_energy=0)])
def test_param_validation(bad):
    with pytest.raises(ValueError):
        ChannelParams(**bad)


def test_awgn_variance():
    p = ChannelParams(10.0)
    rx = transmit(np.zeros(400_000), p, make_rng(3))
    assert np.var(rx.in_phase) == pytest.approx(p.n0 / 2, rel=0.01)
    assert np.var(rx.quadrature) == pytest.approx(p.n0 / 2, rel=0.01)
    assert abs(np.mean(rx.in_phase * rx.quadrature)) < 3e-3 * p.n0


def test_phase_noise_is_pure_rotation():
    p = ChannelParams(0.0, sigma_phi_sq=0.04, noiseless=True)
    s = 0.5 * np.exp(1j * 0.3) * np.ones(200_000)
    rx = transmit(s, p, make_rng(4))
    assert np.allclose(rx.amplitude, 0.5)
    d = np.angle(rx.complex * np.conj(s))
    assert np.std(d) == pytest.approx(0.2, rel=0.01)
    assert abs(np.mean(d)) < 0.002


def test_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1, 2).standard_normal(5)
    b = make_rng(7, 1, 2).standard_normal(5)
    c = make_rng(7, 2, 1).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_polar_form_roundtrip(z):
    rx = received_from_complex(z)
    assert 0.0 <= rx.phase[0] < 2 * math.pi
    assert rx.amplitude[0] * np.exp(1j * rx.phase[0]) == pytest.approx(z, abs=1e-9 * (1 + abs(z)))
