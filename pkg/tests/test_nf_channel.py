import math

import numpy as np
import pytest

from ris_sim.circular_noise import NoiseSpec
from ris_sim.nf_channel import (
    SPEED_OF_LIGHT,
    Scenario,
    build_grid,
    cascaded_channel,
    grid_offsets,
    heatmap,
    link_amplitude,
)
from ris_sim.pda import PdaParams

PDA = PdaParams(1.0, 0.2, 0.43 * math.pi)
NOISE = NoiseSpec("composite", tau=math.pi / 8, kappa=5.0, iota=0.0)


def small(**kw):
    return Scenario(M=kw.pop("M", 400), **kw)


def test_single_pixel_at_center():
    g = build_grid(Scenario(M=1))
    assert (g.x[0], g.y[0]) == (0.0, 10.0)
    assert g.d_ap[0] == pytest.approx(math.sqrt(489), abs=1e-12)
    assert g.d_ap[0] == pytest.approx(22.11, abs=5e-3)


def test_even_and_odd_layouts():
    d = 0.1
    g = build_grid(Scenario(M=4, d_x=d, d_y=d))
    pts = sorted(zip(np.round(g.x, 12), np.round(g.y - 10.0, 12)))
    assert pts == sorted((sx * d / 2, sy * d / 2) for sx in (-1, 1) for sy in (-1, 1))
    g = build_grid(Scenario(M=9, d_x=d, d_y=d))
    assert np.sum((np.abs(g.x) < 1e-15) & (np.abs(g.y - 10.0) < 1e-15)) == 1
    np.testing.assert_allclose(grid_offsets(3, d), [-d, 0, d])


def test_row_major_mapping():
    g = build_grid(Scenario(M=9, d_x=0.1, d_y=0.2))
    xs = heatmap(g, g.x)
    ys = heatmap(g, g.y)
    assert np.all(np.diff(xs, axis=0) > 0) and np.allclose(np.diff(xs, axis=1), 0)
    assert np.all(np.diff(ys, axis=1) > 0) and np.allclose(np.diff(ys, axis=0), 0)
    assert g.pixel(5).position[0] == pytest.approx(g.x[5])


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(M=10)
    with pytest.raises(ValueError):
        Scenario(d_x=-1.0)
    with pytest.raises(ValueError):
        Scenario(ris_center=(0.0, 10.0, 9.0))
    with pytest.raises(ValueError):
        Scenario(pattern="dipole")


def test_default_pitch_and_wavelength():
    s = Scenario()
    assert s.wavelength == SPEED_OF_LIGHT / 2.4e9
    assert s.d_x == s.d_y == s.wavelength / 2


def test_broadside_amplitude():
    s = Scenario(M=1, ap_pos=(0.0, 10.0, 5.0), user_pos=(1.0, 10.0, 5.0))
    g = build_grid(s)
    a = link_amplitude(g, s, "AP")[0]
    assert g.theta_ap[0] == 0.0
    # projected-aperture gain 4 cos(theta): A^2 = dx dy cos(theta) / (pi d^2)
    assert a**2 == pytest.approx(s.d_x * s.d_y / (math.pi * 25.0), rel=1e-12)


def test_amplitude_matches_pattern_formula():
    s = small()
    g = build_grid(s)
    want = np.sqrt(s.d_x * s.d_y * np.cos(g.theta_user) / (math.pi * g.d_user**2))
    np.testing.assert_allclose(link_amplitude(g, s, "User"), want, rtol=1e-12)
    iso = s.with_(pattern="isotropic")
    want_iso = np.sqrt(s.d_x * s.d_y / (2 * math.pi * g.d_user**2))
    np.testing.assert_allclose(link_amplitude(build_grid(iso), iso, "User"), want_iso, rtol=1e-12)


def test_grazing_amplitude_vanishes():
    amps = []
    for z in (1.0, 1e-2, 1e-4, 1e-6):
        s = Scenario(M=1, ap_pos=(30.0, 10.0, z), user_pos=(0.0, 10.0, 5.0))
        amps.append(link_amplitude(build_grid(s), s, "AP")[0])
    assert all(x > y for x, y in zip(amps, amps[1:]))
    assert amps[-1] / amps[0] == pytest.approx(math.sqrt(1e-6), rel=1e-3)


def test_designed_phase_aligns_all_paths():
    s = small()
    g = build_grid(s)
    ch = cascaded_channel(s)
    assert abs(ch.h[0]) == pytest.approx(np.sum(g.amp_ap * g.amp_user), rel=1e-12)
    assert abs(ch.h[0].imag) < 1e-9 * abs(ch.h[0])


def test_random_phases_lose_coherence():
    s = small()
    rng = np.random.default_rng(0)
    h_rand = cascaded_channel(s, phases=rng.uniform(-math.pi, math.pi, s.M)).h[0]
    assert abs(h_rand) < 0.2 * abs(cascaded_channel(s).h[0])


def test_designed_phases_are_wrapped():
    g = build_grid(Scenario(M=2500))
    assert np.all((g.phi >= -math.pi) & (g.phi < math.pi))


def test_noise_degrades_channel():
    s = small()
    clean = cascaded_channel(s, PDA).power[0]
    noisy = cascaded_channel(s, PDA, NOISE, seed=1, realizations=100).power
    assert noisy.mean() < clean


def test_channel_is_deterministic():
    s = small()
    a = cascaded_channel(s, PDA, NOISE, seed=7, realizations=50).h
    b = cascaded_channel(s, PDA, NOISE, seed=7, realizations=50).h
    assert np.array_equal(a, b)


def test_square_law():
    ratios = []
    for M in (100, 400, 1600):
        s = Scenario(M=M, ap_pos=(-200.0, 15.0, 300.0), user_pos=(200.0, 1.5, 300.0))
        ratios.append(cascaded_channel(s).power[0] / M**2)
    assert max(ratios) / min(ratios) < 1.05


def test_reciprocity():
    s = small()
    r = s.with_(ap_pos=s.user_pos, user_pos=s.ap_pos)
    g1, g2 = build_grid(s), build_grid(r)
    assert np.sum(g1.amp_ap * g1.amp_user) == pytest.approx(np.sum(g2.amp_ap * g2.amp_user), rel=1e-12)


def test_beta_squared_histogram_u_shaped():
    ch = cascaded_channel(Scenario(M=2500), PDA)
    counts, _ = np.histogram(ch.beta_sq, bins=10, range=(PDA.b**2, 1.0))
    assert min(counts[0], counts[-1]) > max(counts[4], counts[5])
