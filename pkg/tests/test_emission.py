import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

import emission
import utils
from config import EmissionStrategy

from conftest import make_link, scenario

UM = 1e-6
D = 4.5e-9
TABLE_DISTANCES = [d * UM for d in (2.2, 2.4, 2.6, 2.8, 3.3, 3.5)]


def test_uniform_chip_budget():
    assert emission.chip_budget(EmissionStrategy.UNIFORM, 31000, 31, 2.2 * UM, 3.5 * UM) == pytest.approx(1000)


def test_channel_inverse_chip_budget():
    qc = emission.chip_budget(EmissionStrategy.CHANNEL_INVERSE, 31000, 31, 2.2 * UM, 3.5 * UM)
    assert qc == pytest.approx(1000 * (2.2 / 3.5) ** 3)
    assert qc == pytest.approx(248.38, rel=1e-3)
    assert emission.chip_budget(EmissionStrategy.CHANNEL_INVERSE, 31000, 31, 3.5 * UM, 3.5 * UM) == 1000


def test_ordering_error():
    with pytest.raises(utils.OrderingError):
        emission.chip_budget(EmissionStrategy.UNIFORM, 100, 31, 4.0 * UM, 3.5 * UM)
    with pytest.raises(utils.OrderingError):
        emission.time_offset(4.0 * UM, 3.5 * UM, D)


@pytest.mark.parametrize("bad_D", [0.0, -4.5e-9, float("nan"), float("inf")])
def test_time_offset_rejects_bad_diffusion(bad_D):
    with pytest.raises(utils.InvalidParameterError):
        emission.time_offset(2.2 * UM, 3.5 * UM, bad_D)
    with pytest.raises(utils.InvalidParameterError):
        emission.time_offset(3.5 * UM, 3.5 * UM, bad_D)


def test_time_offset_values():
    assert emission.time_offset(2.2 * UM, 3.5 * UM, D) == pytest.approx(2.7444e-4, rel=1e-4)
    assert emission.time_offset(3.5 * UM, 3.5 * UM, D) == 0.0
    offsets = [emission.time_offset(d, 3.5 * UM, D) for d in TABLE_DISTANCES]
    assert all(a > b for a, b in zip(offsets, offsets[1:]))


@given(q=st.floats(min_value=0, max_value=1e8), n=st.integers(min_value=1, max_value=128))
def test_channel_inverse_never_exceeds_uniform(q, n):
    for d in TABLE_DISTANCES:
        ci = emission.chip_budget(EmissionStrategy.CHANNEL_INVERSE, q, n, d, TABLE_DISTANCES[-1])
        assert ci <= emission.chip_budget(EmissionStrategy.UNIFORM, q, n, d, TABLE_DISTANCES[-1]) * (1 + 1e-12)


def test_peak_concentration_equalized_by_channel_inverse():
    cfg = scenario(emission={'strategy': 'channel_inverse'})
    _, plan, taps, _ = make_link(cfg, 31000)
    peaks = emission.peak_concentration(plan, taps)
    assert peaks.max() / peaks.min() == pytest.approx(1.0, abs=1e-9)


def test_peak_concentration_uniform_near_far_ratio():
    cfg = scenario(nms=[2.2, 3.5])
    _, plan, taps, _ = make_link(cfg, 31000)
    peaks = emission.peak_concentration(plan, taps)
    assert peaks[0] / peaks[1] == pytest.approx((3.5 / 2.2) ** 3, rel=1e-9)
    assert peaks[0] / peaks[1] == pytest.approx(4.026, rel=1e-3)


def test_peak_concentration_shape_check():
    cfg = scenario(nms=[2.2, 3.5])
    _, plan, taps, _ = make_link(cfg, 31000)
    with pytest.raises(utils.ShapeError):
        emission.peak_concentration(plan, taps[:1])


def test_savings_fraction_matches_plan():
    plan = emission.make_plan(EmissionStrategy.CHANNEL_INVERSE, 31000, 31, TABLE_DISTANCES, D)
    emitted = sum(plan.molecules_per_bit)
    assert emission.savings_fraction(TABLE_DISTANCES) == pytest.approx(1 - emitted / (6 * 31000))
    assert emission.savings_fraction([3.0 * UM]) == pytest.approx(0.0)


def test_emission_summary_rows():
    rows = emission.emission_summary(EmissionStrategy.CHANNEL_INVERSE, [31000.0], 31, TABLE_DISTANCES, D)
    assert len(rows) == 6
    assert rows[0]['molecules_per_bit'] == pytest.approx(7699.7, rel=1e-3)
    assert rows[-1]['molecules_per_bit'] == pytest.approx(31000)
    uniform = emission.emission_summary(EmissionStrategy.UNIFORM, [31000.0], 31, TABLE_DISTANCES, D)
    assert all(r['molecules_per_bit'] == pytest.approx(31000) for r in uniform)


def test_plan_offsets_anchor_on_farthest():
    plan = emission.make_plan(EmissionStrategy.UNIFORM, 1e4, 31, TABLE_DISTANCES, D)
    assert plan.To[-1] == 0.0
    assert np.all(np.array(plan.To) >= 0)
