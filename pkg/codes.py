"""
Spreading code module.
Generates maximum-length, Gold and Walsh sequences as antipodal chip vectors
and assigns them to NMs by distance-aware strategies.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Any

import numpy as np
from scipy.linalg import hadamard

import config
import utils
from config import AssignmentStrategy, CodeFamily

logger = utils.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class SpreadingCode:
    chips: np.ndarray
    family: CodeFamily
    label: Dict[str, Any] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.chips)

    def __post_init__(self):
        if not np.all(np.isin(self.chips, (-1, 1))):
            raise utils.CodeGenerationError("chips must be +1 or -1")

    def describe(self) -> str:
        return f"{self.family.value}{self.label}"


@dataclass(frozen=True, eq=False)
class CodeAssignment:
    """codes[k] spreads NM k (NMs ordered by ascending distance)"""
    codes: Tuple[SpreadingCode, ...]
    strategy: AssignmentStrategy

    @property
    def K(self) -> int:
        return len(self.codes)

    def matrix(self) -> np.ndarray:
        """N x K matrix of chips"""
        return np.column_stack([c.chips for c in self.codes]).astype(float)


def _lfsr_bits(degree: int, taps: Sequence[int], length: int) -> np.ndarray:
    """Fibonacci LFSR output for the polynomial with exponents `taps`, seeded all-ones"""
    feedback = sorted(t for t in taps if t != degree)
    state = [1] * degree
    out = np.empty(length, dtype=np.int8)
    for n in range(length):
        out[n] = state[0]
        new_bit = 0
        for t in feedback:
            new_bit ^= state[t]
        state = state[1:] + [new_bit]
    return out


def _validate_polynomial(degree: int, taps: Sequence[int]):
    taps = list(taps)
    if degree < 2:
        raise utils.CodeGenerationError(f"degree must be >= 2, got {degree}")
    if max(taps) != degree or 0 not in taps:
        raise utils.CodeGenerationError(
            f"polynomial {taps} must contain x^{degree} and the constant term")
    if any(t < 0 or t > degree for t in taps):
        raise utils.CodeGenerationError(f"polynomial exponents out of range: {taps}")


def _period(bits: np.ndarray, degree: int) -> int:
    """Smallest p with the register state repeating after p steps"""
    seed = bits[:degree]
    for p in range(1, len(bits) - degree + 1):
        if np.array_equal(bits[p:p + degree], seed):
            return p
    return len(bits)


def m_sequence_bits(degree: int, taps: Sequence[int]) -> np.ndarray:
    """One full period of the binary m-sequence; raises if the polynomial is not primitive"""
    _validate_polynomial(degree, taps)
    n = (1 << degree) - 1
    bits = _lfsr_bits(degree, taps, 2 * n + degree)
    period = _period(bits, degree)
    if period != n:
        raise utils.CodeGenerationError(
            f"polynomial {list(taps)} is not primitive: period {period} != {n}")
    return bits[:n]


def to_antipodal(bits: np.ndarray) -> np.ndarray:
    """0 -> +1, 1 -> -1"""
    return (1 - 2 * bits.astype(np.int64)).astype(np.int64)


def gen_mls(degree: int, taps: Sequence[int], shift: int = 0) -> SpreadingCode:
    """Antipodal m-sequence rotated left by `shift` chips"""
    n = (1 << degree) - 1
    if not 0 <= shift < n:
        raise utils.CodeRangeError(f"shift must be in [0, {n}), got {shift}")
    chips = np.roll(to_antipodal(m_sequence_bits(degree, taps)), -shift)
    return SpreadingCode(chips=chips, family=CodeFamily.MLS,
                         label={'taps': list(taps), 'shift': shift})


def gen_gold(degree: int, preferred_pair: Tuple[Sequence[int], Sequence[int]], index: int) -> SpreadingCode:
    """Gold family member: 0 and 1 are the base sequences, 2.. are m1 xor shifted m2"""
    n = (1 << degree) - 1
    if not 0 <= index <= n + 1:
        raise utils.CodeRangeError(f"gold index must be in [0, {n + 1}], got {index}")
    first, second = preferred_pair
    m1 = m_sequence_bits(degree, first)
    m2 = m_sequence_bits(degree, second)
    if index == 0:
        bits = m1
    elif index == 1:
        bits = m2
    else:
        bits = m1 ^ np.roll(m2, -(index - 2))
    return SpreadingCode(chips=to_antipodal(bits), family=CodeFamily.GOLD,
                         label={'pair': [list(first), list(second)], 'index': index})


def gen_walsh(order: int, row: int) -> SpreadingCode:
    """Row `row` of the Sylvester Hadamard matrix of the given order"""
    if order < 1 or order & (order - 1):
        raise utils.InvalidParameterError(f"walsh order must be a power of two, got {order}")
    if not 0 <= row < order:
        raise utils.CodeRangeError(f"walsh row must be in [0, {order}), got {row}")
    chips = hadamard(order, dtype=np.int64)[row]
    return SpreadingCode(chips=chips, family=CodeFamily.WALSH, label={'row': row})


def count_transitions(code: SpreadingCode) -> int:
    """Number of adjacent sign changes along the chip sequence"""
    return int(np.count_nonzero(np.diff(code.chips)))


def rank_walsh_quality(codes: Sequence[SpreadingCode]) -> List[SpreadingCode]:
    """Fewest transitions first; all-ones rows dropped; ties by lower row index"""
    lengths = {c.N for c in codes}
    if len(lengths) > 1:
        raise utils.ShapeError(f"codes have different lengths: {sorted(lengths)}")
    usable = [c for c in codes if count_transitions(c) > 0]
    return sorted(usable, key=lambda c: (count_transitions(c), c.label.get('row', 0)))


def assign_codes(ranked: Sequence[SpreadingCode], distances: Sequence[float],
                 strategy: AssignmentStrategy) -> CodeAssignment:
    """Map ranked codes to NMs; output is ordered by NM index (ascending distance)"""
    K = len(distances)
    if K > len(ranked):
        raise utils.CapacityError(f"{K} NMs but only {len(ranked)} codes available")
    # Stable order: closest first
    by_distance = sorted(range(K), key=lambda k: (distances[k], k))
    slots: List[Optional[SpreadingCode]] = [None] * K
    if strategy == AssignmentStrategy.BTC:
        for rank, nm in enumerate(by_distance):
            slots[nm] = ranked[rank]
    elif strategy == AssignmentStrategy.BTF:
        for rank, nm in enumerate(reversed(by_distance)):
            slots[nm] = ranked[rank]
    else:
        for nm in range(K):
            slots[nm] = ranked[nm]
    assignment = CodeAssignment(codes=tuple(slots), strategy=strategy)
    chips = [tuple(c.chips) for c in assignment.codes]
    if len(set(chips)) != K:
        raise utils.CapacityError("assignment produced duplicate codes")
    return assignment


def mls_shifts(N: int, K: int) -> List[int]:
    """Evenly spaced cyclic shifts, floor(N/K) apart"""
    step = N // K
    if step == 0:
        raise utils.CapacityError(f"{K} NMs cannot share {N}-chip MLS shifts")
    return [k * step for k in range(K)]


def periodic_correlation(a: SpreadingCode, b: SpreadingCode) -> np.ndarray:
    """Periodic correlation sum_n a[n] b[(n + lag) % N] for every lag"""
    if a.N != b.N:
        raise utils.ShapeError("codes must have equal length")
    x = a.chips.astype(np.int64)
    y = b.chips.astype(np.int64)
    return np.array([int(np.dot(x, np.roll(y, -lag))) for lag in range(a.N)])


def build_family(cfg: config.ScenarioConfig) -> CodeAssignment:
    """Generate and assign the configured code family for every NM in the scenario"""
    N = cfg.timing.N
    K = cfg.K
    params = cfg.codes.params
    family = cfg.codes.family
    strategy = cfg.codes.assignment

    if family == CodeFamily.WALSH:
        rows = [gen_walsh(N, r) for r in range(N)]
        ranked = rank_walsh_quality(rows)
        if strategy == AssignmentStrategy.BY_INDEX:
            ranked = [c for c in rows if count_transitions(c) > 0]
    elif family == CodeFamily.MLS:
        degree = N.bit_length()
        taps = params.get('taps') or config.DEFAULT_MLS_TAPS.get(degree)
        if taps is None:
            raise utils.UnsupportedConfigurationError(f"no default MLS polynomial for degree {degree}")
        shifts = params.get('shifts') or mls_shifts(N, K)
        ranked = [gen_mls(degree, taps, s) for s in shifts]
    else:
        degree = N.bit_length()
        pair = params.get('pair') or config.GOLD_PREFERRED_PAIRS.get(degree)
        if pair is None:
            raise utils.UnsupportedConfigurationError(f"no default Gold pair for degree {degree}")
        indices = params.get('indices') or list(range(K))
        ranked = [gen_gold(degree, pair, i) for i in indices]

    assignment = assign_codes(ranked, cfg.distances, strategy)
    logger.info(f"Assigned {family.value} codes ({strategy.value}): "
                + ", ".join(c.describe() for c in assignment.codes))
    return assignment
