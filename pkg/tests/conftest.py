import json
import os

import hypothesis
import numpy as np
import pytest

import channel
import codes
import emission
import signal_model
import utils

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

UM = 1e-6


def scenario(**sections):
    """Scenario config from partial JSON sections merged over the defaults"""
    return utils.ScenarioFile.parse(json.dumps(sections))


def small_scenario(**extra):
    """Two NMs, 7-chip MLS, short ISI: cheap enough for end-to-end runs"""
    doc = {
        'name': 'small',
        'nms': [2.2, 3.5],
        'timing': {'Tb': 0.03, 'N': 7},
        'channel': {'L': 2},
        'detector': {'scheme': 'zf', 'L_Rx': 2},
        'sweep': {'Q': [2.0e4, 2.0e5]},
        'run': {'seed': 3, 'bits': 200, 'max_bits': 400, 'min_errors': 5,
                'frame_bits': 21, 'batch_frames': 4, 'workers': 1, 'noise_scale': 1.0},
    }
    doc.update(extra)
    return utils.ScenarioFile.parse(json.dumps(doc))


def make_link(cfg, Q):
    """(assignment, plan, taps, LinkMatrices) at budget Q with the true ISI depth"""
    assignment = codes.build_family(cfg)
    plan = emission.make_plan(cfg.emission, Q, cfg.timing.N, cfg.distances, cfg.medium.D)
    medium = channel.Medium(D=cfg.medium.D)
    taps = [channel.discrete_taps(channel.LinkGeometry(d, cfg.receiver.rho), medium,
                                  cfg.timing.Tc, cfg.L, plan.Qc[k])
            for k, d in enumerate(cfg.distances)]
    link = signal_model.build_link_matrices(assignment, taps, cfg.receiver.rho)
    return assignment, plan, taps, link


def rel_dev(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b))))


@pytest.fixture
def default_cfg():
    return utils.ScenarioFile.parse("")


@pytest.fixture
def default_link(default_cfg):
    return make_link(default_cfg, 1.0e5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
