"""
Configuration module for the MoCDMA link simulator.
Contains physical constants, enumerations, scenario dataclasses and the
default scenario document.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Any
from enum import Enum

import numpy as np

# Application Info
APP_NAME = "mocdma-sim"
APP_VERSION = "1.0.0"
RESULT_SCHEMA_VERSION = 1

# Output
DB_NAME = "mocdma_runs.db"
DEFAULT_OUT_DIR = "results"
LOG_DIR = "logs"

# Units
MICROMETRE = 1e-6

# Numerics
SINGULAR_VALUE_CUTOFF = 1e-12
WILSON_CONFIDENCE = 0.95


class CodeFamily(Enum):
    """Spreading sequence families"""
    MLS = "mls"
    GOLD = "gold"
    WALSH = "walsh"


class AssignmentStrategy(Enum):
    """How codes are mapped to NMs"""
    BTC = "btc"
    BTF = "btf"
    BY_INDEX = "by_index"


class EmissionStrategy(Enum):
    """Molecule budget allocation across NMs"""
    UNIFORM = "uniform"
    CHANNEL_INVERSE = "channel_inverse"


class DetectorScheme(Enum):
    """Linear detector family"""
    MRC = "mrc"
    EGC = "egc"
    MAX_SINR = "max_sinr"
    ZF = "zf"
    MMSE_PER_NM = "mmse_per_nm"
    MMSE_JOINT = "mmse_joint"


class CorrelationSource(Enum):
    """Where the MMSE detector takes R_z from"""
    MODEL = "model"
    SAMPLE = "sample"


class SweepScale(Enum):
    LINEAR = "linear"
    LOG = "log"


@dataclass(frozen=True)
class MediumConfig:
    D: float  # m^2/s


@dataclass(frozen=True)
class ReceiverConfig:
    rho: float  # m


@dataclass(frozen=True)
class TimingConfig:
    Tb: float  # s
    N: int

    @property
    def Tc(self) -> float:
        """Chip duration"""
        return self.Tb / self.N


@dataclass(frozen=True)
class CodesConfig:
    family: CodeFamily
    assignment: AssignmentStrategy
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SweepConfig:
    """Either an explicit Q list or a (min, max, steps, scale) range"""
    Q: Optional[Tuple[float, ...]] = None
    min: Optional[float] = None
    max: Optional[float] = None
    steps: Optional[int] = None
    scale: SweepScale = SweepScale.LOG

    def values(self) -> List[float]:
        """Expand the sweep into the list of per-bit budgets"""
        if self.Q is not None:
            return [float(q) for q in self.Q]
        if self.steps == 1:
            return [float(self.min)]
        if self.scale == SweepScale.LOG:
            grid = np.logspace(np.log10(self.min), np.log10(self.max), self.steps)
        else:
            grid = np.linspace(self.min, self.max, self.steps)
        return [float(q) for q in grid]


@dataclass(frozen=True)
class DetectorConfig:
    scheme: DetectorScheme
    L_Rx: int
    correlation: CorrelationSource = CorrelationSource.MODEL
    training_bits: int = 5000


@dataclass(frozen=True)
class RunConfig:
    seed: int
    bits: int
    max_bits: int
    min_errors: int
    frame_bits: int
    batch_frames: int
    workers: int
    noise_scale: float


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; all lengths in metres, times in seconds"""
    medium: MediumConfig
    receiver: ReceiverConfig
    distances: Tuple[float, ...]
    timing: TimingConfig
    L: int
    codes: CodesConfig
    emission: EmissionStrategy
    sweep: SweepConfig
    detector: DetectorConfig
    run: RunConfig
    name: str = "default"
    variants: Tuple[Dict[str, Any], ...] = ()

    @property
    def K(self) -> int:
        return len(self.distances)


# Preferred pair for 31-chip Gold codes: x^5+x^2+1, x^5+x^4+x^3+x^2+1
GOLD_PREFERRED_PAIRS = {
    5: ([5, 2, 0], [5, 4, 3, 2, 0]),
    6: ([6, 1, 0], [6, 5, 2, 1, 0]),
    7: ([7, 3, 0], [7, 3, 2, 1, 0]),
}

# Primitive polynomials (exponent lists) used when no taps are configured
DEFAULT_MLS_TAPS = {
    3: [3, 1, 0],
    4: [4, 1, 0],
    5: [5, 2, 0],
    6: [6, 1, 0],
    7: [7, 3, 0],
    8: [8, 4, 3, 2, 0],
    9: [9, 4, 0],
    10: [10, 3, 0],
}

# Default scenario document, in file units (distances and rho in µm)
DEFAULT_SCENARIO: Dict[str, Any] = {
    'name': 'default',
    'medium': {'D': 4.5e-9},
    'receiver': {'rho': 0.4},
    'nms': [2.2, 2.4, 2.6, 2.8, 3.3, 3.5],
    'timing': {'Tb': 0.06, 'N': 31},
    'channel': {'L': 10},
    'codes': {'family': 'mls', 'assignment': 'by_index', 'params': {}},
    'emission': {'strategy': 'uniform'},
    'sweep': {'Q': None, 'min': 1.0e4, 'max': 3.0e6, 'steps': 8, 'scale': 'log'},
    'detector': {'scheme': 'zf', 'L_Rx': 10, 'correlation': 'model', 'training_bits': 5000},
    'run': {
        'seed': 1,
        'bits': 10000,
        'max_bits': 1000000,
        'min_errors': 100,
        'frame_bits': 101,
        'batch_frames': 64,
        'workers': 1,
        'noise_scale': 1.0,
    },
    'variants': [],
}

# Allowed keys per section; anything else is rejected on load
SCENARIO_KEYS: Dict[str, Optional[List[str]]] = {
    'name': None,
    'medium': ['D'],
    'receiver': ['rho'],
    'nms': None,
    'timing': ['Tb', 'N'],
    'channel': ['L'],
    'codes': ['family', 'assignment', 'params'],
    'emission': ['strategy'],
    'sweep': ['Q', 'min', 'max', 'steps', 'scale'],
    'detector': ['scheme', 'L_Rx', 'correlation', 'training_bits'],
    'run': ['seed', 'bits', 'max_bits', 'min_errors', 'frame_bits',
            'batch_frames', 'workers', 'noise_scale'],
    'variants': None,
}

CODE_PARAM_KEYS = {
    'mls': ['taps', 'shifts'],
    'gold': ['pair', 'indices'],
    'walsh': [],
}

# BER colour bands for the Excel export (upper bound, fill colour)
BER_BANDS = [
    (1e-4, "C8E6C9"),
    (1e-2, "FFF9C4"),
    (1e-1, "FFE082"),
    (1.01, "FFCDD2"),
]
