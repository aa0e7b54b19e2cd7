"""
Utility functions for the MoCDMA link simulator.
Includes logging, the error hierarchy, scenario validation and the
scenario file manager.
"""
import os
import json
import copy
import hashlib
import logging
from datetime import date
from typing import Optional, Dict, Any, List, Tuple

import config

logger = logging.getLogger(__name__)


def setup_logging(log_dir: str = config.LOG_DIR, level: int = logging.INFO) -> None:
    """Configure file + console logging once for the CLI process"""
    os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join(log_dir, f'mocdma_{date.today()}.log')),
            logging.StreamHandler()
        ],
        force=True,
    )


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance"""
    return logging.getLogger(name)


# ─────────────────────────────────────────────────────────────────────────────
# Errors
# ─────────────────────────────────────────────────────────────────────────────

class SimulationError(Exception):
    """Base class for every error raised by the simulator"""


class InvalidParameterError(SimulationError, ValueError):
    """Non-finite, negative or otherwise out-of-domain physical parameter"""


class OrderingError(SimulationError, ValueError):
    """An NM distance exceeds the anchor (farthest) distance"""


class CodeGenerationError(SimulationError):
    """LFSR polynomial does not produce a maximum-length sequence"""


class CodeRangeError(SimulationError, IndexError):
    """Code index outside its family"""


class CapacityError(SimulationError):
    """More NMs than codes available"""


class UnsupportedConfigurationError(SimulationError):
    """Parameters outside what the banded signal model supports (L >= N)"""


class ShapeError(SimulationError, ValueError):
    """Array shapes do not line up"""


class RankError(SimulationError):
    """Signature matrix lacks full column rank"""


class NumericalError(SimulationError):
    """Singular or indefinite matrix where a solve was required"""


class ConfigError(SimulationError):
    """Scenario file could not be parsed or validated"""

    def __init__(self, problems: List[Tuple[str, str]], line: Optional[int] = None):
        self.problems = problems
        self.line = line
        text = "; ".join(f"{path}: {msg}" for path, msg in problems)
        if line is not None:
            text = f"line {line}: {text}"
        super().__init__(text)

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable form for the CLI error record"""
        return {
            'error': 'config',
            'line': self.line,
            'problems': [{'field': p, 'message': m} for p, m in self.problems],
        }


# ─────────────────────────────────────────────────────────────────────────────
# Validation
# ─────────────────────────────────────────────────────────────────────────────

class Validator:
    """Scenario document validation; collects every problem with its field path"""

    def __init__(self):
        self.problems: List[Tuple[str, str]] = []

    def fail(self, path: str, message: str):
        self.problems.append((path, message))

    def check_keys(self, doc: Dict[str, Any], allowed: List[str], prefix: str = ''):
        """Reject unknown keys"""
        for key in doc:
            if key not in allowed:
                self.fail(f"{prefix}{key}", "unknown key")

    def positive_number(self, value: Any, path: str) -> bool:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
            return False
        if not value > 0 or value != value or value == float('inf'):
            self.fail(path, f"must be finite and > 0, got {value!r}")
            return False
        return True

    def integer(self, value: Any, path: str, minimum: int = 0) -> bool:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
            return False
        if value < minimum:
            self.fail(path, f"must be >= {minimum}, got {value}")
            return False
        return True

    def index_list(self, values: Any, path: str, count: int, upper: int) -> bool:
        """Distinct integers in [0, upper], at least `count` of them"""
        if not isinstance(values, list) or any(isinstance(x, bool) or not isinstance(x, int) for x in values):
            self.fail(path, f"expected a list of integers, got {values!r}")
            return False
        ok = True
        out_of_range = [x for x in values if not 0 <= x <= upper]
        if out_of_range:
            self.fail(path, f"entries must be in [0, {upper}], got {out_of_range}")
            ok = False
        if len(set(values)) != len(values):
            self.fail(path, "entries must be distinct")
            ok = False
        if len(values) < count:
            self.fail(path, f"needs one entry per NM ({count}), got {len(values)}")
            ok = False
        return ok

    def choice(self, value: Any, enum_cls, path: str) -> bool:
        allowed = [e.value for e in enum_cls]
        if value not in allowed:
            self.fail(path, f"must be one of {allowed}, got {value!r}")
            return False
        return True

    def raise_if_failed(self):
        if self.problems:
            raise ConfigError(self.problems)


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != 'params':
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def validate_document(doc: Dict[str, Any]) -> config.ScenarioConfig:
    """Validate a merged scenario document and build the typed config"""
    v = Validator()
    v.check_keys(doc, list(config.SCENARIO_KEYS))
    for section, keys in config.SCENARIO_KEYS.items():
        if keys is not None and isinstance(doc.get(section), dict):
            v.check_keys(doc[section], keys, prefix=f"{section}.")
        elif keys is not None and section in doc:
            v.fail(section, "expected an object")
    v.raise_if_failed()

    v.positive_number(doc['medium']['D'], 'medium.D')
    v.positive_number(doc['receiver']['rho'], 'receiver.rho')
    v.positive_number(doc['timing']['Tb'], 'timing.Tb')
    v.integer(doc['timing']['N'], 'timing.N', minimum=1)
    v.integer(doc['channel']['L'], 'channel.L', minimum=0)
    v.integer(doc['detector']['L_Rx'], 'detector.L_Rx', minimum=0)
    v.integer(doc['detector']['training_bits'], 'detector.training_bits', minimum=1)

    nms = doc['nms']
    if not isinstance(nms, list) or not nms:
        v.fail('nms', "expected a non-empty list of distances (µm)")
        nms = []
    for i, d in enumerate(nms):
        v.positive_number(d, f"nms[{i}]")

    family_ok = v.choice(doc['codes']['family'], config.CodeFamily, 'codes.family')
    v.choice(doc['codes']['assignment'], config.AssignmentStrategy, 'codes.assignment')
    v.choice(doc['emission']['strategy'], config.EmissionStrategy, 'emission.strategy')
    v.choice(doc['detector']['scheme'], config.DetectorScheme, 'detector.scheme')
    v.choice(doc['detector']['correlation'], config.CorrelationSource, 'detector.correlation')

    params = doc['codes']['params']
    if not isinstance(params, dict):
        v.fail('codes.params', "expected an object")
    elif family_ok:
        v.check_keys(params, config.CODE_PARAM_KEYS[doc['codes']['family']], prefix='codes.params.')

    run = doc['run']
    v.integer(run['seed'], 'run.seed', minimum=0)
    v.integer(run['bits'], 'run.bits', minimum=1)
    v.integer(run['max_bits'], 'run.max_bits', minimum=1)
    v.integer(run['min_errors'], 'run.min_errors', minimum=0)
    v.integer(run['frame_bits'], 'run.frame_bits', minimum=2)
    v.integer(run['batch_frames'], 'run.batch_frames', minimum=1)
    v.integer(run['workers'], 'run.workers', minimum=1)
    if isinstance(run['noise_scale'], bool) or not isinstance(run['noise_scale'], (int, float)) \
            or run['noise_scale'] < 0:
        v.fail('run.noise_scale', f"must be a number >= 0, got {run['noise_scale']!r}")

    sweep = doc['sweep']
    if sweep.get('Q') is not None:
        if not isinstance(sweep['Q'], list) or not sweep['Q']:
            v.fail('sweep.Q', "expected a non-empty list")
        else:
            for i, q in enumerate(sweep['Q']):
                if isinstance(q, bool) or not isinstance(q, (int, float)) or q < 0:
                    v.fail(f"sweep.Q[{i}]", f"must be a number >= 0, got {q!r}")
    else:
        v.positive_number(sweep['min'], 'sweep.min')
        v.positive_number(sweep['max'], 'sweep.max')
        v.integer(sweep['steps'], 'sweep.steps', minimum=1)
        v.choice(sweep['scale'], config.SweepScale, 'sweep.scale')
    v.raise_if_failed()

    N = int(doc['timing']['N'])
    L = int(doc['channel']['L'])
    if L > N - 1:
        v.fail('channel.L', f"must be <= N - 1 = {N - 1}, got {L}")
    if doc['detector']['L_Rx'] > L:
        v.fail('detector.L_Rx', f"must be <= channel.L = {L}, got {doc['detector']['L_Rx']}")
    if run['max_bits'] < run['bits']:
        v.fail('run.max_bits', "must be >= run.bits")
    if sweep.get('Q') is None and sweep['max'] < sweep['min']:
        v.fail('sweep.max', "must be >= sweep.min")

    family = doc['codes']['family']
    length_ok = True
    if family in ('mls', 'gold'):
        m = N.bit_length()
        if (1 << m) - 1 != N:
            v.fail('timing.N', f"{family} codes need N = 2^m - 1, got {N}")
            length_ok = False
    elif family == 'walsh' and not _is_power_of_two(N):
        v.fail('timing.N', f"walsh codes need N a power of two, got {N}")
        length_ok = False

    rho = doc['receiver']['rho']
    for i, d in enumerate(nms):
        if d <= rho:
            v.fail(f"nms[{i}]", f"must lie outside the receiver (rho = {rho} µm), got {d}")

    # one code per NM
    K = len(nms)
    if length_ok and family == 'walsh' and K > N - 1:
        v.fail('nms', f"{K} NMs but {N}-chip walsh codes serve at most {N - 1}")
    elif length_ok and family == 'mls':
        if params.get('shifts'):
            v.index_list(params['shifts'], 'codes.params.shifts', K, N - 1)
        elif K > N:
            v.fail('nms', f"{K} NMs cannot share {N}-chip MLS shifts")
    elif length_ok and family == 'gold':
        if params.get('indices'):
            v.index_list(params['indices'], 'codes.params.indices', K, N + 1)
        elif K > N + 2:
            v.fail('nms', f"{K} NMs but the {N}-chip gold family has {N + 2} codes")

    variants = doc['variants']
    if not isinstance(variants, list):
        v.fail('variants', "expected a list")
    else:
        for i, variant in enumerate(variants):
            if not isinstance(variant, dict) or not variant.get('name'):
                v.fail(f"variants[{i}]", "each variant needs a 'name'")
    v.raise_if_failed()

    distances = tuple(sorted(d * config.MICROMETRE for d in nms))
    if len(set(distances)) != len(distances):
        logger.warning("Two NMs share the same distance")

    sweep_cfg = config.SweepConfig(
        Q=tuple(float(q) for q in sweep['Q']) if sweep.get('Q') is not None else None,
        min=sweep.get('min'),
        max=sweep.get('max'),
        steps=int(sweep['steps']) if sweep.get('steps') is not None else None,
        scale=config.SweepScale(sweep.get('scale', 'log')),
    )

    return config.ScenarioConfig(
        medium=config.MediumConfig(D=float(doc['medium']['D'])),
        receiver=config.ReceiverConfig(rho=float(doc['receiver']['rho']) * config.MICROMETRE),
        distances=distances,
        timing=config.TimingConfig(Tb=float(doc['timing']['Tb']), N=N),
        L=L,
        codes=config.CodesConfig(
            family=config.CodeFamily(family),
            assignment=config.AssignmentStrategy(doc['codes']['assignment']),
            params=copy.deepcopy(params),
        ),
        emission=config.EmissionStrategy(doc['emission']['strategy']),
        sweep=sweep_cfg,
        detector=config.DetectorConfig(
            scheme=config.DetectorScheme(doc['detector']['scheme']),
            L_Rx=int(doc['detector']['L_Rx']),
            correlation=config.CorrelationSource(doc['detector']['correlation']),
            training_bits=int(doc['detector']['training_bits']),
        ),
        run=config.RunConfig(
            seed=int(run['seed']),
            bits=int(run['bits']),
            max_bits=int(run['max_bits']),
            min_errors=int(run['min_errors']),
            frame_bits=int(run['frame_bits']),
            batch_frames=int(run['batch_frames']),
            workers=int(run['workers']),
            noise_scale=float(run['noise_scale']),
        ),
        name=str(doc['name']),
        variants=tuple(copy.deepcopy(variants)),
    )


def to_document(cfg: config.ScenarioConfig) -> Dict[str, Any]:
    """Inverse of validate_document: typed config back to file units"""
    sweep = cfg.sweep
    return {
        'name': cfg.name,
        'medium': {'D': cfg.medium.D},
        'receiver': {'rho': round(cfg.receiver.rho / config.MICROMETRE, 12)},
        'nms': [round(d / config.MICROMETRE, 12) for d in cfg.distances],
        'timing': {'Tb': cfg.timing.Tb, 'N': cfg.timing.N},
        'channel': {'L': cfg.L},
        'codes': {
            'family': cfg.codes.family.value,
            'assignment': cfg.codes.assignment.value,
            'params': copy.deepcopy(cfg.codes.params),
        },
        'emission': {'strategy': cfg.emission.value},
        'sweep': {
            'Q': list(sweep.Q) if sweep.Q is not None else None,
            'min': sweep.min,
            'max': sweep.max,
            'steps': sweep.steps,
            'scale': sweep.scale.value,
        },
        'detector': {
            'scheme': cfg.detector.scheme.value,
            'L_Rx': cfg.detector.L_Rx,
            'correlation': cfg.detector.correlation.value,
            'training_bits': cfg.detector.training_bits,
        },
        'run': {
            'seed': cfg.run.seed,
            'bits': cfg.run.bits,
            'max_bits': cfg.run.max_bits,
            'min_errors': cfg.run.min_errors,
            'frame_bits': cfg.run.frame_bits,
            'batch_frames': cfg.run.batch_frames,
            'workers': cfg.run.workers,
            'noise_scale': cfg.run.noise_scale,
        },
        'variants': copy.deepcopy(list(cfg.variants)),
    }


def config_digest(cfg: config.ScenarioConfig) -> str:
    """Stable hash of a scenario (worker count excluded, it never changes results)"""
    doc = to_document(cfg)
    doc['run'].pop('workers')
    canonical = json.dumps(doc, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


def with_overrides(cfg: config.ScenarioConfig, overrides: Dict[str, Any]) -> config.ScenarioConfig:
    """Apply partial document overrides (a variant, CLI flags) and revalidate"""
    doc = deep_merge(to_document(cfg), overrides)
    return validate_document(doc)


def expand_variants(cfg: config.ScenarioConfig) -> List[config.ScenarioConfig]:
    """One config per study variant, or the scenario itself when it has none"""
    if not cfg.variants:
        return [cfg]
    expanded = []
    for variant in cfg.variants:
        overrides = {k: v for k, v in variant.items()}
        overrides['variants'] = []
        expanded.append(with_overrides(cfg, overrides))
    return expanded


class ScenarioFile:
    """Scenario file manager (JSON on disk, merged over the defaults)"""

    @classmethod
    def parse(cls, text: str) -> config.ScenarioConfig:
        """Parse and validate scenario text; empty text yields the defaults"""
        if not text.strip():
            user_doc: Dict[str, Any] = {}
        else:
            try:
                user_doc = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError([('<document>', f"{e.msg} (column {e.colno})")], line=e.lineno)
            if not isinstance(user_doc, dict):
                raise ConfigError([('<document>', "top level must be an object")], line=1)
        doc = deep_merge(config.DEFAULT_SCENARIO, user_doc)
        return validate_document(doc)

    @classmethod
    def load(cls, path: str) -> config.ScenarioConfig:
        """Load scenario from file"""
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        cfg = cls.parse(text)
        logger.info(f"Scenario loaded from {path}: K={cfg.K}, N={cfg.timing.N}, "
                    f"L={cfg.L}, scheme={cfg.detector.scheme.value}")
        return cfg

    @classmethod
    def save(cls, path: str, cfg: config.ScenarioConfig) -> bool:
        """Save scenario to file"""
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(to_document(cfg), f, indent=4, ensure_ascii=False)
            logger.info(f"Scenario saved to {path}")
            return True
        except OSError as e:
            logger.error(f"Error saving scenario: {e}")
            return False


def load_config(path: str) -> config.ScenarioConfig:
    """Load and validate a scenario file"""
    return ScenarioFile.load(path)


class FileHelper:
    """File operations helper"""

    @staticmethod
    def ensure_dir(directory: str):
        """Ensure directory exists"""
        os.makedirs(directory, exist_ok=True)

    @staticmethod
    def safe_name(name: str) -> str:
        """File-system friendly variant name"""
        return "".join(c if c.isalnum() or c in '-_.' else '_' for c in name) or 'run'
