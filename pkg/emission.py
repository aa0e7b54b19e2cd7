"""
Emission control module.
Per-NM molecule budgets (uniform or channel-inverse) and the emission delays
that line every NM's CIR peak up at the receiver.
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

import channel
import utils
from config import EmissionStrategy

logger = utils.get_logger(__name__)


@dataclass(frozen=True)
class EmissionPlan:
    strategy: EmissionStrategy
    Q: float                  # molecules per bit budget
    N: int                    # chips per bit
    Qc: Tuple[float, ...]     # molecules per chip, per NM
    To: Tuple[float, ...]     # emission delay, s, per NM

    @property
    def molecules_per_bit(self) -> List[float]:
        """Molecules actually emitted per bit by each NM"""
        return [self.N * q for q in self.Qc]


def _check_order(d_k: float, d_K: float):
    if d_k <= 0 or d_K <= 0:
        raise utils.InvalidParameterError(f"distances must be > 0, got {d_k}, {d_K}")
    if d_k > d_K:
        raise utils.OrderingError(f"d_k={d_k} exceeds the farthest distance d_K={d_K}")


def _check_diffusion(D: float):
    if not np.isfinite(D) or D <= 0:
        raise utils.InvalidParameterError(f"D must be finite and > 0, got {D!r}")


def chip_budget(strategy: EmissionStrategy, Q: float, N: int, d_k: float, d_K: float) -> float:
    """Molecules per chip for NM k"""
    if Q < 0:
        raise utils.InvalidParameterError(f"Q must be >= 0, got {Q}")
    if N < 1:
        raise utils.InvalidParameterError(f"N must be >= 1, got {N}")
    _check_order(d_k, d_K)
    if strategy == EmissionStrategy.UNIFORM:
        return Q / N
    return Q / N * (d_k / d_K) ** 3


def time_offset(d_k: float, d_K: float, D: float) -> float:
    """Emission delay t_d(d_K) - t_d(d_k), so all peaks arrive together"""
    _check_order(d_k, d_K)
    _check_diffusion(D)
    return (d_K * d_K - d_k * d_k) / (6.0 * D) if d_k != d_K else 0.0


def make_plan(strategy: EmissionStrategy, Q: float, N: int, distances: Sequence[float],
              D: float) -> EmissionPlan:
    """Budgets and delays for every NM, anchored on the farthest one"""
    _check_diffusion(D)
    d_K = max(distances)
    return EmissionPlan(
        strategy=strategy,
        Q=float(Q),
        N=N,
        Qc=tuple(chip_budget(strategy, Q, N, d, d_K) for d in distances),
        To=tuple(time_offset(d, d_K, D) for d in distances),
    )


def peak_concentration(plan: EmissionPlan, taps: Sequence[channel.TapVector]) -> np.ndarray:
    """Expected peak concentration of each NM at the receiver"""
    if len(taps) != len(plan.Qc):
        raise utils.ShapeError(f"{len(taps)} tap vectors for {len(plan.Qc)} NMs")
    return np.array([t.taps[0] for t in taps])


def savings_fraction(distances: Sequence[float]) -> float:
    """Share of the uniform budget the channel-inverse plan does not emit"""
    d = np.asarray(distances, dtype=float)
    return float(1.0 - np.mean((d / d.max()) ** 3))


def emission_summary(strategy: EmissionStrategy, sweep: Sequence[float], N: int,
                     distances: Sequence[float], D: float) -> List[dict]:
    """Rows of (Q, nm_index, molecules_per_bit) for every sweep point"""
    rows = []
    for Q in sweep:
        plan = make_plan(strategy, Q, N, distances, D)
        for k, mpb in enumerate(plan.molecules_per_bit):
            rows.append({'Q': Q, 'nm_index': k + 1, 'distance_um': distances[k] * 1e6,
                         'molecules_per_bit': mpb, 'To_s': plan.To[k]})
    return rows
