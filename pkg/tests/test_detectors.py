import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sapsk.channel import ChannelParams, make_rng, received_from_complex, transmit
from sapsk.constellation import ConstellationSpec, build_constellation
from sapsk.detectors import (
    build_sapsk_index,
    detect_eucd,
    detect_gapd,
    detect_gapd_counted,
    detect_gpdd,
    detect_sapsk_fast,
    detect_sapsk_fast_counted,
    make_detector,
    wrap_phase,
)
from sapsk.errors import DegenerateNoise, WrongFamily


def brute(kind, r, c, p):
    """Direct per-sample argmin, written independently of the package."""
    out = []
    n0, sp = p.n0, p.sigma_phi_sq
    for z in np.atleast_1d(r):
        u, th = abs(z), math.atan2(z.imag, z.real)
        best, arg = math.inf, -1
        for k in range(c.size):
            rho, phi = c.amplitude[k], c.phase[k]
            d = (th - phi + math.pi) % (2 * math.pi) - math.pi
            if kind == "eucd":
                m = abs(z - c.points[k]) ** 2
            elif kind == "gapd":
                v = sp + n0 / (2 * rho * rho)
                m = (u - rho) ** 2 / (n0 / 2) + d * d / v + math.log(v)
            else:
                v = sp + n0 / (2 * u * u)
                m = 2 * (u - rho) ** 2 / n0 + d * d / v
            if m < best:
                best, arg = m, k
        out.append(arg)
    return np.array(out)


def noisy(c, p, n, seed=0):
    rng = make_rng(seed, 99)
    tx = rng.integers(0, c.size, n)
    return tx, transmit(c.points[tx], p, rng)


CONFIGS = [("sapsk", 64, 8), ("pqam", 64, 4), ("qam", 64, 1), ("sapsk", 256, 32), ("sapsk", 8, 1)]


@pytest.mark.parametrize("family,M,G", CONFIGS)
@pytest.mark.parametrize("kind", ["eucd", "gapd", "gpdd"])
def test_exact_detectors_match_brute_force(family, M, G, kind):
    c = build_constellation(ConstellationSpec(family, M, G))
    p = ChannelParams(22.0, 1e-3)
    _, rx = noisy(c, p, 300)
    got = make_detector(kind, c, p)(rx)
    assert np.array_equal(got, brute(kind, rx.complex, c, p))


@pytest.mark.parametrize("family,M,G", [("sapsk", 4096, 512), ("sapsk", 4096, 2048), ("pqam", 4096, 256), ("qam", 1024, 1)])
@pytest.mark.parametrize("snr,sp", [(30, 1e-2), (55, 1e-4), (80, 1e-4), (15, 0.0)])
def test_ring_search_equals_exhaustive(family, M, G, snr, sp):
    c = build_constellation(ConstellationSpec(family, M, G))
    p = ChannelParams(snr, sp)
    _, rx = noisy(c, p, 5000, seed=snr)
    for kind in ("eucd", "gapd", "gpdd"):
        a = make_detector(kind, c, p)(rx)
        b = make_detector(kind, c, p, method="exhaustive")(rx)
        assert np.array_equal(a, b), kind


@pytest.mark.parametrize("kind", ["eucd", "gapd", "gpdd", "fast"])
def test_exact_symbol_maps_to_itself(kind):
    c = build_constellation(ConstellationSpec("sapsk", 32, 8))
    p = ChannelParams(30.0, 1e-4)
    rx = received_from_complex(c.points)
    assert np.array_equal(make_detector(kind, c, p)(rx), np.arange(32))


def test_gapd_beats_eucd_on_qam_with_phase_noise():
    c = build_constellation(ConstellationSpec("qam", 4096))
    p = ChannelParams(50.0, 1e-4)
    tx, rx = noisy(c, p, 100_000)
    e_eucd = np.count_nonzero(detect_eucd(rx, c) != tx)
    e_gapd = np.count_nonzero(detect_gapd(rx, c, p) != tx)
    assert e_gapd < e_eucd


def test_single_ring_detectors_agree():
    c = build_constellation(ConstellationSpec("sapsk", 8, 1))
    p = ChannelParams(5.0, 1e-2)
    _, rx = noisy(c, p, 20_000)
    a = detect_gapd(rx, c, p)
    assert np.array_equal(a, detect_gpdd(rx, c, p))
    assert np.array_equal(a, detect_sapsk_fast(rx, build_sapsk_index(c), p))


# below ~1e-30 the phase term vanishes against the amplitude term in double
# precision and exhaustive search sees spurious ties
@given(
    st.one_of(st.just(0.0), st.floats(1e-6, 2.0)),
    st.floats(-10.0, 10.0),
    st.sampled_from([(16, 4), (64, 8), (128, 128), (32, 1)]),
)
def test_fast_pair_equals_gpdd(u, th, mg):
    c = build_constellation(ConstellationSpec("sapsk", *mg))
    p = ChannelParams(25.0, 1e-3)
    r = u * np.exp(1j * th)
    idx = build_sapsk_index(c)
    assert detect_sapsk_fast(r, idx, p) == detect_gpdd(r, c, p)
    assert detect_sapsk_fast(r, idx, p, candidates="quad") == detect_gpdd(r, c, p)


@given(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False))
def test_valid_index_for_any_input(r):
    c = build_constellation(ConstellationSpec("sapsk", 64, 8))
    p = ChannelParams(20.0, 1e-3)
    for kind in ("eucd", "gapd", "gpdd", "fast"):
        k = make_detector(kind, c, p)(received_from_complex(r))[0]
        assert 0 <= k < 64


@given(st.floats(0.01, 2.0), st.floats(0, 2 * math.pi))
def test_metric_invariant_to_full_turns(u, th):
    c = build_constellation(ConstellationSpec("sapsk", 64, 8))
    p = ChannelParams(20.0, 1e-3)
    r1 = u * np.exp(1j * th)
    r2 = u * np.exp(1j * (th + 2 * math.pi))
    assert detect_gapd(r1, c, p) == detect_gapd(r2, c, p)


def test_wrap_phase_range():
    x = np.array([-math.pi, math.pi, 3 * math.pi, -3 * math.pi + 1e-9, 0.0, 7.0])
    w = wrap_phase(x)
    assert np.all((w > -math.pi) & (w <= math.pi))
    assert w[0] == pytest.approx(math.pi)


def test_ties_go_to_lowest_index():
    c = build_constellation(ConstellationSpec("sapsk", 8, 1))
    # midway between symbols 0 and 1 on the unit circle
    mid = np.exp(1j * 0.5 * (c.phase[0] + c.phase[1]))
    assert detect_eucd(mid, c) == 0


def test_zero_amplitude_falls_back_to_eucd():
    c = build_constellation(ConstellationSpec("sapsk", 32, 8))
    p = ChannelParams(20.0, 1e-3)
    assert detect_gpdd(0j, c, p) == detect_eucd(0j, c)
    assert detect_sapsk_fast(0j, build_sapsk_index(c), p) == detect_eucd(0j, c)


def test_below_innermost_ring_clamps():
    c = build_constellation(ConstellationSpec("sapsk", 32, 8))
    p = ChannelParams(20.0, 1e-3)
    r = 0.01 * np.exp(1j * 1.0)
    k = detect_sapsk_fast(r, build_sapsk_index(c), p)
    assert c.ring_index[k] in (1, 2)


def test_beyond_outer_ring_clamps():
    c = build_constellation(ConstellationSpec("sapsk", 32, 8))
    p = ChannelParams(20.0, 1e-3)
    k = detect_sapsk_fast(5.0 * np.exp(1j * 2.0), build_sapsk_index(c), p)
    assert c.ring_index[k] in (7, 8)


def test_degenerate_noise():
    c = build_constellation(ConstellationSpec("sapsk", 32, 8))
    p = ChannelParams(0.0, 1e-3, noiseless=True)
    with pytest.raises(DegenerateNoise):
        detect_gapd(1.0, c, p)
    with pytest.raises(DegenerateNoise):
        detect_gpdd(1.0, c, p)


def test_index_requires_sapsk():
    with pytest.raises(WrongFamily):
        build_sapsk_index(build_constellation(ConstellationSpec("pqam", 32, 8)))


def test_index_contents():
    idx = build_sapsk_index(build_constellation(ConstellationSpec("sapsk", 32, 8)))
    assert idx.ring_amplitudes.shape == (8,)
    assert np.allclose(np.diff(idx.ring_amplitudes), idx.delta_rho)
    assert np.all(np.diff(idx.ring_phase_tables, axis=1) > 0)
    single = build_sapsk_index(build_constellation(ConstellationSpec("sapsk", 8, 1)))
    assert np.allclose(np.diff(single.ring_phase_tables[0]), math.pi / 4)


def test_literal_parity_rule_loses_half_the_cells():
    c = build_constellation(ConstellationSpec("sapsk", 4096, 512))
    p = ChannelParams(50.0, 1e-4)
    _, rx = noisy(c, p, 20_000)
    idx = build_sapsk_index(c)
    lit = detect_sapsk_fast(rx, idx, p, candidates="literal")
    ref = detect_gpdd(rx, c, p)
    assert 0.3 < np.mean(lit == ref) < 0.7


def test_fast_work_is_independent_of_order():
    p = ChannelParams(40.0, 1e-4)
    totals = []
    for M in (1024, 16384):
        c = build_constellation(ConstellationSpec("sapsk", M, M // 16))
        idx = build_sapsk_index(c)
        counter = Counter()
        _, rx = noisy(c, p, 50)
        for z in rx.complex:
            detect_sapsk_fast_counted(complex(z), idx, p, counter)
        totals.append(dict(counter))
    assert totals[0] == totals[1]


def test_counted_paths_agree_with_vector_paths():
    c = build_constellation(ConstellationSpec("sapsk", 256, 32))
    p = ChannelParams(30.0, 1e-3)
    _, rx = noisy(c, p, 200)
    idx = build_sapsk_index(c)
    fast = [detect_sapsk_fast_counted(complex(z), idx, p, Counter()) for z in rx.complex]
    gapd = [detect_gapd_counted(complex(z), c, p, Counter()) for z in rx.complex]
    assert np.array_equal(fast, detect_sapsk_fast(rx, idx, p))
    assert np.array_equal(gapd, detect_gapd(rx, c, p))


def test_gapd_work_grows_linearly():
    p = ChannelParams(40.0, 1e-4)
    counts = []
    for M in (1024, 16384):
        c = build_constellation(ConstellationSpec("sapsk", M, M // 16))
        counter = Counter()
        detect_gapd_counted(0.5 + 0.1j, c, p, counter)
        counts.append(counter["metric"])
    assert counts == [1024, 16384]
