import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

import channel
import utils

UM = 1e-6
D = 4.5e-9


def test_cir_is_causal():
    assert channel.cir_value(2.2 * UM, D, 0.0) == 0.0
    assert channel.cir_value(2.2 * UM, D, -1.0) == 0.0
    assert channel.cir_value(2.2 * UM, D, 1e-4) > 0


def test_cir_vectorized_matches_scalar():
    t = np.array([-1e-4, 0.0, 1e-4, 2e-4, 1e-3])
    out = channel.cir_value(2.2 * UM, D, t)
    assert out.shape == t.shape
    for ti, oi in zip(t, out):
        assert oi == pytest.approx(channel.cir_value(2.2 * UM, D, float(ti)))


def test_peak_time_values():
    assert channel.peak_time(2.2 * UM, D) == pytest.approx(1.7926e-4, rel=1e-4)
    assert channel.peak_time(3.5 * UM, D) == pytest.approx(4.5370e-4, rel=1e-4)
    assert channel.peak_time(4.4 * UM, D) == pytest.approx(4 * channel.peak_time(2.2 * UM, D))


def test_peak_value_at_peak_time():
    d = 2.2 * UM
    peak = channel.cir_value(d, D, channel.peak_time(d, D))
    assert peak == pytest.approx(channel.peak_value(d), rel=1e-12)
    assert peak == pytest.approx(6.914e15, rel=1e-3)


@pytest.mark.parametrize("d_um", [2.2, 3.5, 5.0])
def test_numerical_argmax_is_peak_time(d_um):
    d = d_um * UM
    t_peak = channel.peak_time(d, D)
    step = 1e-7
    grid = np.arange(step, 3 * t_peak, step)
    values = channel.cir_value(d, D, grid)
    i = int(np.argmax(values))
    assert abs(grid[i] - t_peak) <= step
    assert values[i] == pytest.approx(channel.peak_value(d), rel=1e-6)


def test_cir_decays_after_peak():
    d = 3.5 * UM
    t = channel.peak_time(d, D) * np.linspace(1.0, 50.0, 200)
    values = channel.cir_value(d, D, t)
    assert np.all(np.diff(values) < 0)


@pytest.mark.parametrize("d, diff", [(-1.0, D), (2.2 * UM, 0.0), (float('nan'), D), (2.2 * UM, float('inf'))])
def test_invalid_parameters(d, diff):
    with pytest.raises(utils.InvalidParameterError):
        channel.cir_value(d, diff, 1e-4)


def test_geometry_requires_transmitter_outside_receiver():
    with pytest.raises(utils.InvalidParameterError):
        channel.LinkGeometry(d=0.3 * UM, rho=0.4 * UM)
    with pytest.raises(utils.InvalidParameterError):
        channel.Medium(D=-1.0)


def test_discrete_taps_table_values():
    geom = channel.LinkGeometry(2.2 * UM, 0.4 * UM)
    taps = channel.discrete_taps(geom, channel.Medium(D), 0.06 / 31, 10, 1000.0)
    assert taps.L == 10
    assert len(taps.taps) == 11
    assert taps.taps[0] == pytest.approx(6.914e18, rel=1e-3)
    assert np.all(np.diff(taps.taps) < 0)
    assert np.all(taps.taps >= 0)


def test_zero_emission_gives_zero_taps():
    geom = channel.LinkGeometry(2.2 * UM, 0.4 * UM)
    taps = channel.discrete_taps(geom, channel.Medium(D), 0.06 / 31, 10, 0.0)
    assert not np.any(taps.taps)


def test_far_peak_follows_cube_law():
    medium = channel.Medium(D)
    near = channel.discrete_taps(channel.LinkGeometry(2.2 * UM, 0.4 * UM), medium, 1e-3, 3, 500.0)
    far = channel.discrete_taps(channel.LinkGeometry(3.5 * UM, 0.4 * UM), medium, 1e-3, 3, 500.0)
    assert far.taps[0] / near.taps[0] == pytest.approx((2.2 / 3.5) ** 3, rel=1e-9)
    assert (2.2 / 3.5) ** 3 == pytest.approx(0.2484, abs=1e-4)


@given(alpha=st.floats(min_value=1e-3, max_value=1e3),
       qc=st.floats(min_value=1.0, max_value=1e5),
       d_um=st.floats(min_value=0.5, max_value=10.0))
def test_taps_linear_in_qc(alpha, qc, d_um):
    geom = channel.LinkGeometry(d_um * UM, 0.4 * UM)
    medium = channel.Medium(D)
    base = channel.discrete_taps(geom, medium, 2e-3, 6, qc)
    scaled = channel.discrete_taps(geom, medium, 2e-3, 6, alpha * qc)
    np.testing.assert_allclose(scaled.taps, alpha * base.taps, rtol=1e-12, atol=0)


def test_truncated_taps():
    geom = channel.LinkGeometry(2.2 * UM, 0.4 * UM)
    taps = channel.discrete_taps(geom, channel.Medium(D), 0.03 / 31, 10, 100.0)
    short = taps.truncated(6)
    assert short.L == 6
    np.testing.assert_array_equal(short.taps, taps.taps[:7])


def test_detection_volume():
    assert channel.detection_volume(0.4 * UM) == pytest.approx(2.68083e-19, rel=1e-5)
    assert channel.detection_volume(0.8 * UM) == pytest.approx(8 * channel.detection_volume(0.4 * UM))
    assert channel.PEAK_CONSTANT == pytest.approx((3 / (2 * math.pi * math.e)) ** 1.5)
