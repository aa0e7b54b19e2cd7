"""
Diffusive channel module.
Evaluates the free-space 3-D diffusion impulse response and samples it on the
receiver's chip grid, starting at each NM's CIR peak.
"""
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

import utils

logger = utils.get_logger(__name__)

# (3 / (2*pi*e))^(3/2): peak of the CIR times d^3
PEAK_CONSTANT = (3.0 / (2.0 * math.pi * math.e)) ** 1.5


@dataclass(frozen=True)
class Medium:
    D: float  # diffusion coefficient, m^2/s

    def __post_init__(self):
        _check_positive(self.D, 'D')


@dataclass(frozen=True)
class LinkGeometry:
    d: float    # transmitter-receiver distance, m
    rho: float  # receiver radius, m

    def __post_init__(self):
        _check_positive(self.d, 'd')
        _check_positive(self.rho, 'rho')
        if not self.d > self.rho:
            raise utils.InvalidParameterError(
                f"transmitter must lie outside the receiver: d={self.d} <= rho={self.rho}")


@dataclass(frozen=True, eq=False)
class TapVector:
    """Expected concentration (m^-3) at chip lags 0..L for one emitted chip pulse"""
    taps: np.ndarray
    Qc: float
    d: float

    @property
    def L(self) -> int:
        return len(self.taps) - 1

    def truncated(self, L_rx: int) -> "TapVector":
        """The first L_rx + 1 taps, as seen by a detector exploiting less ISI"""
        return TapVector(taps=self.taps[:L_rx + 1].copy(), Qc=self.Qc, d=self.d)


def _check_positive(value: float, name: str):
    if not np.isfinite(value) or value <= 0:
        raise utils.InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")


def cir_value(d: float, D: float, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Per-molecule concentration at distance d, time t after emission; zero for t <= 0"""
    _check_positive(d, 'd')
    _check_positive(D, 'D')
    t_arr = np.asarray(t, dtype=float)
    out = np.zeros_like(t_arr)
    live = t_arr > 0
    tl = t_arr[live]
    out[live] = (4.0 * math.pi * D * tl) ** -1.5 * np.exp(-d * d / (4.0 * D * tl))
    if out.ndim == 0:
        return float(out)
    return out


def peak_time(d: float, D: float) -> float:
    """Time after emission at which the CIR peaks: d^2 / 6D"""
    _check_positive(d, 'd')
    _check_positive(D, 'D')
    return d * d / (6.0 * D)


def peak_value(d: float) -> float:
    """Per-molecule CIR peak, (3/(2 pi e))^(3/2) / d^3"""
    _check_positive(d, 'd')
    return PEAK_CONSTANT / d ** 3


def discrete_taps(geom: LinkGeometry, medium: Medium, Tc: float, L: int, Qc: float) -> TapVector:
    """Sample Qc * CIR at i*Tc + t_d for i = 0..L (tap 0 on the peak)"""
    _check_positive(Tc, 'Tc')
    if L < 0:
        raise utils.InvalidParameterError(f"L must be >= 0, got {L}")
    if not np.isfinite(Qc) or Qc < 0:
        raise utils.InvalidParameterError(f"Qc must be finite and >= 0, got {Qc!r}")
    t_peak = peak_time(geom.d, medium.D)
    elapsed = np.arange(L + 1) * Tc + t_peak
    taps = Qc * cir_value(geom.d, medium.D, elapsed)
    # Tap 0 is pinned to the closed-form peak
    taps[0] = Qc * peak_value(geom.d)
    return TapVector(taps=taps, Qc=float(Qc), d=geom.d)


def detection_volume(rho: float) -> float:
    """Volume of the spherical receiver, 4/3 pi rho^3"""
    _check_positive(rho, 'rho')
    return 4.0 / 3.0 * math.pi * rho ** 3
