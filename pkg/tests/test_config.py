import json
from pathlib import Path

import pytest

import config
import utils
from config import CodeFamily, DetectorScheme, EmissionStrategy

from conftest import scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def _problem_fields(excinfo):
    return [field for field, _ in excinfo.value.problems]


def test_defaults(default_cfg):
    assert default_cfg.K == 6
    assert default_cfg.timing.N == 31
    assert default_cfg.timing.Tc == pytest.approx(0.06 / 31)
    assert default_cfg.L == 10
    assert default_cfg.distances[0] == pytest.approx(2.2e-6)
    assert default_cfg.receiver.rho == pytest.approx(0.4e-6)
    assert default_cfg.codes.family == CodeFamily.MLS
    assert default_cfg.detector.scheme == DetectorScheme.ZF
    assert default_cfg.emission == EmissionStrategy.UNIFORM


def test_default_sweep_is_log_spaced(default_cfg):
    values = default_cfg.sweep.values()
    assert len(values) == 8
    assert values[0] == pytest.approx(1.0e4)
    assert values[-1] == pytest.approx(3.0e6)
    ratios = [b / a for a, b in zip(values, values[1:])]
    assert max(ratios) == pytest.approx(min(ratios))


def test_linear_and_single_step_sweeps():
    linear = scenario(sweep={'min': 1.0, 'max': 5.0, 'steps': 5, 'scale': 'linear'})
    assert linear.sweep.values() == pytest.approx([1.0, 2.0, 3.0, 4.0, 5.0])
    single = scenario(sweep={'min': 7.0, 'max': 7.0, 'steps': 1})
    assert single.sweep.values() == [7.0]


def test_distances_sorted_ascending():
    cfg = scenario(nms=[3.5, 2.2, 2.8])
    assert cfg.distances == pytest.approx((2.2e-6, 2.8e-6, 3.5e-6))


def test_receiver_depth_cannot_exceed_channel_depth():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(detector={'L_Rx': 12})
    assert 'detector.L_Rx' in _problem_fields(excinfo)


def test_isi_depth_must_fit_in_a_bit():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(channel={'L': 31}, detector={'L_Rx': 3})
    assert 'channel.L' in _problem_fields(excinfo)


def test_unknown_keys_rejected():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(timing={'Tb': 0.06, 'N': 31, 'Tx': 1})
    assert 'timing.Tx' in _problem_fields(excinfo)
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(colour='blue')
    assert 'colour' in _problem_fields(excinfo)


def test_every_problem_is_reported():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(medium={'D': -1.0}, receiver={'rho': 0}, nms=[2.2, -1.0])
    fields = _problem_fields(excinfo)
    assert {'medium.D', 'receiver.rho', 'nms[1]'} <= set(fields)


def test_family_length_checks():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(codes={'family': 'walsh', 'assignment': 'btc'})
    assert 'timing.N' in _problem_fields(excinfo)
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(timing={'Tb': 0.06, 'N': 32})
    assert 'timing.N' in _problem_fields(excinfo)


def test_code_params_checked_per_family():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(codes={'family': 'mls', 'assignment': 'by_index', 'params': {'indices': [1]}})
    assert 'codes.params.indices' in _problem_fields(excinfo)


def test_nm_inside_receiver_rejected():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(nms=[0.3, 2.2])
    assert _problem_fields(excinfo) == ['nms[0]']
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(nms=[2.2], receiver={'rho': 2.2})
    assert 'nms[0]' in _problem_fields(excinfo)


def test_more_nms_than_codes_rejected():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(timing={'Tb': 0.06, 'N': 4}, channel={'L': 2}, detector={'scheme': 'zf', 'L_Rx': 2},
                 codes={'family': 'walsh', 'assignment': 'btc', 'params': {}})
    assert _problem_fields(excinfo) == ['nms']
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(nms=[2.2, 2.4, 2.6, 2.8, 3.0, 3.2, 3.3, 3.5], timing={'Tb': 0.06, 'N': 7},
                 channel={'L': 2}, detector={'scheme': 'zf', 'L_Rx': 2})
    assert _problem_fields(excinfo) == ['nms']
    cfg = scenario(nms=[2.2, 2.4, 2.6], timing={'Tb': 0.06, 'N': 4}, channel={'L': 2},
                   detector={'scheme': 'zf', 'L_Rx': 2},
                   codes={'family': 'walsh', 'assignment': 'btc', 'params': {}})
    assert cfg.K == 3


@pytest.mark.parametrize("family, key, values, message", [
    ('mls', 'shifts', [0, 5], 'one entry per NM'),
    ('mls', 'shifts', [0, 3, 3, 9, 12, 15], 'distinct'),
    ('mls', 'shifts', [0, 3, 6, 9, 12, 31], 'in [0, 30]'),
    ('gold', 'indices', [0, 1, 2, 3, 4, 33], 'in [0, 32]'),
    ('gold', 'indices', [0, 1.5, 2, 3, 4, 5], 'list of integers'),
])
def test_code_lists_must_cover_every_nm(family, key, values, message):
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(codes={'family': family, 'assignment': 'by_index', 'params': {key: values}})
    problems = dict(excinfo.value.problems)
    assert message in problems[f'codes.params.{key}']


def test_json_syntax_error_reports_line():
    text = '{\n  "name": "broken",\n  "nms": [2.2, 3.5,]\n}'
    with pytest.raises(utils.ConfigError) as excinfo:
        utils.ScenarioFile.parse(text)
    assert excinfo.value.line == 3
    record = excinfo.value.to_record()
    assert record['error'] == 'config'
    assert record['line'] == 3


def test_top_level_must_be_object():
    with pytest.raises(utils.ConfigError):
        utils.ScenarioFile.parse('[1, 2]')


def test_document_round_trip(default_cfg):
    assert utils.validate_document(utils.to_document(default_cfg)) == default_cfg
    cfg = scenario(nms=[2.25, 3.1], sweep={'Q': [1.0e4, 5.0e4]},
                   codes={'family': 'gold', 'assignment': 'by_index', 'params': {'indices': [4, 9]}})
    assert utils.validate_document(utils.to_document(cfg)) == cfg


def test_save_and_load(tmp_path, default_cfg):
    path = tmp_path / "scenario.json"
    assert utils.ScenarioFile.save(str(path), default_cfg)
    assert utils.load_config(str(path)) == default_cfg
    doc = json.loads(path.read_text(encoding='utf-8'))
    assert doc['nms'] == [2.2, 2.4, 2.6, 2.8, 3.3, 3.5]


def test_digest_ignores_workers_only(default_cfg):
    digest = utils.config_digest(default_cfg)
    assert len(digest) == 16
    assert utils.config_digest(utils.with_overrides(default_cfg, {'run': {'workers': 8}})) == digest
    assert utils.config_digest(utils.with_overrides(default_cfg, {'run': {'seed': 2}})) != digest
    assert utils.config_digest(utils.with_overrides(default_cfg, {'detector': {'L_Rx': 9}})) != digest


def test_params_are_replaced_not_merged():
    cfg = scenario(codes={'family': 'gold', 'assignment': 'by_index', 'params': {'indices': [1, 2, 3, 4, 5, 6]}})
    changed = utils.with_overrides(cfg, {'codes': {'params': {'pair': [[5, 2, 0], [5, 4, 3, 2, 0]]}}})
    assert 'indices' not in changed.codes.params


def test_expand_variants():
    cfg = scenario(variants=[
        {'name': 'zf', 'detector': {'scheme': 'zf'}},
        {'name': 'mmse_ci', 'detector': {'scheme': 'mmse_joint'}, 'emission': {'strategy': 'channel_inverse'}},
    ])
    expanded = utils.expand_variants(cfg)
    assert [v.name for v in expanded] == ['zf', 'mmse_ci']
    assert expanded[1].detector.scheme == DetectorScheme.MMSE_JOINT
    assert expanded[1].emission == EmissionStrategy.CHANNEL_INVERSE
    assert all(v.variants == () for v in expanded)
    assert utils.expand_variants(scenario()) == [scenario()]


def test_variant_needs_a_name():
    with pytest.raises(utils.ConfigError) as excinfo:
        scenario(variants=[{'detector': {'scheme': 'zf'}}])
    assert 'variants[0]' in _problem_fields(excinfo)


def test_integral_floats_accepted_as_integers():
    cfg = scenario(timing={'Tb': 0.06, 'N': 31.0}, run={'seed': 4.0})
    assert cfg.timing.N == 31 and isinstance(cfg.timing.N, int)
    assert cfg.run.seed == 4


def test_bundled_ber_bands_cover_unit_interval():
    uppers = [upper for upper, _ in config.BER_BANDS]
    assert uppers == sorted(uppers)
    assert uppers[-1] > 1.0


def test_safe_name():
    assert utils.FileHelper.safe_name("zf / uniform") == "zf___uniform"
    assert utils.FileHelper.safe_name("") == "run"


@pytest.mark.parametrize("name", ["receiver_memory.json", "spreading_length.json"])
def test_bundled_studies_cover_both_emissions(name):
    variants = utils.expand_variants(utils.load_config(str(SCENARIO_DIR / name)))
    settings = {
        strategy: {(v.detector.scheme, v.detector.L_Rx, v.timing.N) for v in variants if v.emission == strategy}
        for strategy in EmissionStrategy
    }
    assert settings[EmissionStrategy.UNIFORM]
    assert settings[EmissionStrategy.UNIFORM] == settings[EmissionStrategy.CHANNEL_INVERSE]
