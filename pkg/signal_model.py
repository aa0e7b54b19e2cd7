"""
Signal model module.
Structured code/tap matrices, the compact observation model used by the fast
simulation path, and a chip-by-chip time-domain oracle for cross-checks.
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

import channel
import emission
import utils

logger = utils.get_logger(__name__)


def _chips(code) -> np.ndarray:
    """Accept a SpreadingCode or a raw chip vector"""
    chips = getattr(code, 'chips', code)
    return np.asarray(chips, dtype=float)


def _check_band(N: int, L: int):
    if L < 0:
        raise utils.InvalidParameterError(f"L must be >= 0, got {L}")
    if L >= N:
        raise utils.UnsupportedConfigurationError(
            f"ISI depth L={L} needs L <= N - 1 = {N - 1} for the banded model")


def build_S0(code, L: int) -> np.ndarray:
    """N x (L+1) lower-banded matrix, entry (n, i) = s[n - i] for i <= n"""
    s = _chips(code)
    N = len(s)
    _check_band(N, L)
    S0 = np.zeros((N, L + 1))
    for i in range(L + 1):
        S0[i:, i] = s[:N - i]
    return S0


def build_Sm1(code, L: int) -> np.ndarray:
    """N x (L+1) previous-bit matrix, entry (n, i) = s[N + n - i] for i > n"""
    s = _chips(code)
    N = len(s)
    _check_band(N, L)
    Sm1 = np.zeros((N, L + 1))
    for i in range(1, L + 1):
        Sm1[:i, i] = s[N - i:]
    return Sm1


def build_stackedC(taps: Sequence) -> np.ndarray:
    """K(L+1) x K matrix; column k carries NM k's taps in its own row block"""
    vectors = [np.asarray(getattr(t, 'taps', t), dtype=float) for t in taps]
    if not vectors:
        raise utils.ShapeError("at least one tap vector is required")
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise utils.ShapeError(f"tap vectors must share one length, got {sorted(lengths)}")
    width = lengths.pop()
    K = len(vectors)
    C = np.zeros((K * width, K))
    for k, v in enumerate(vectors):
        C[k * width:(k + 1) * width, k] = v
    return C


def build_Ck2(taps, N: int) -> np.ndarray:
    """N x 2N two-bit window matrix: row n holds the reversed taps ending at column N + n"""
    c = np.asarray(getattr(taps, 'taps', taps), dtype=float)
    L = len(c) - 1
    _check_band(N, L)
    C2 = np.zeros((N, 2 * N))
    for n in range(N):
        for i in range(L + 1):
            C2[n, N + n - i] = c[i]
    return C2


def split_Ck2(C2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(C_{k,-1}, C_{k,0}): previous-bit and current-bit halves"""
    N = C2.shape[0]
    if C2.shape != (N, 2 * N):
        raise utils.ShapeError(f"expected an N x 2N window matrix, got {C2.shape}")
    return C2[:, :N], C2[:, N:]


def noise_sigma2(taps: Sequence, rho: float) -> float:
    """Steady-state counting-noise variance: sum of every tap over the receiver volume"""
    total = sum(float(np.sum(getattr(t, 'taps', t))) for t in taps)
    return total / channel.detection_volume(rho)


@dataclass(frozen=True, eq=False)
class LinkMatrices:
    """Stacked model of one link: z_u = A b_u + B b_{u-1} + n_u"""
    S0_blocks: Tuple[np.ndarray, ...]
    Sm1_blocks: Tuple[np.ndarray, ...]
    taps: Tuple[np.ndarray, ...]
    S0: np.ndarray      # N x K(L+1)
    Sm1: np.ndarray     # N x K(L+1)
    C: np.ndarray       # K(L+1) x K
    sigma2: float

    @property
    def N(self) -> int:
        return self.S0.shape[0]

    @property
    def K(self) -> int:
        return self.C.shape[1]

    @property
    def L(self) -> int:
        return len(self.taps[0]) - 1

    @property
    def A(self) -> np.ndarray:
        """Current-bit signatures, N x K"""
        return self.S0 @ self.C

    @property
    def B(self) -> np.ndarray:
        """Previous-bit (ISI) signatures, N x K"""
        return self.Sm1 @ self.C

    def observe(self, bits: np.ndarray, rng: np.random.Generator, noise_scale: float = 1.0) -> np.ndarray:
        """Observations for u = 0..M-1 from bits of shape K x (M+1) (column 0 is u = -1)"""
        _check_rng(rng)
        bits = np.asarray(bits, dtype=float)
        if bits.ndim != 2 or bits.shape[0] != self.K or bits.shape[1] < 2:
            raise utils.ShapeError(f"bits must be {self.K} x (M+1) with M >= 1, got {bits.shape}")
        M = bits.shape[1] - 1
        z = (self.A @ bits[:, 1:]).T + (self.B @ bits[:, :-1]).T
        noise = rng.standard_normal((M, self.N))
        return z + np.sqrt(self.sigma2 * noise_scale) * noise


def _check_rng(rng):
    if not isinstance(rng, np.random.Generator):
        raise utils.InvalidParameterError("a seeded numpy Generator is required")


def build_link_matrices(codes, taps: Sequence, rho: float) -> LinkMatrices:
    """Assemble per-NM and stacked matrices for codes[k] paired with taps[k]"""
    code_list = list(getattr(codes, 'codes', codes))
    if len(code_list) != len(taps):
        raise utils.ShapeError(f"{len(code_list)} codes for {len(taps)} tap vectors")
    tap_arrays = tuple(np.asarray(getattr(t, 'taps', t), dtype=float) for t in taps)
    C = build_stackedC(tap_arrays)
    L = len(tap_arrays[0]) - 1
    S0_blocks = tuple(build_S0(c, L) for c in code_list)
    Sm1_blocks = tuple(build_Sm1(c, L) for c in code_list)
    if len({b.shape[0] for b in S0_blocks}) != 1:
        raise utils.ShapeError("codes must share one length")
    return LinkMatrices(
        S0_blocks=S0_blocks,
        Sm1_blocks=Sm1_blocks,
        taps=tap_arrays,
        S0=np.hstack(S0_blocks),
        Sm1=np.hstack(Sm1_blocks),
        C=C,
        sigma2=noise_sigma2(tap_arrays, rho),
    )


def synthesize_frame(bits: np.ndarray, codes, taps: Sequence, rho: float,
                     rng: np.random.Generator, noise_scale: float = 1.0) -> np.ndarray:
    """Compact-model observations, one row per bit u = 0..M-1"""
    _check_rng(rng)
    _check_bits(bits)
    return build_link_matrices(codes, taps, rho).observe(bits, rng, noise_scale)


def _check_bits(bits: np.ndarray):
    if not np.all(np.isin(bits, (-1, 1))):
        raise utils.InvalidParameterError("bits must be +1 or -1")


def oracle_observation(bits: np.ndarray, codes, distances: Sequence[float], D: float,
                       Tc: float, L: int, Qc: Sequence[float], rho: float,
                       rng: np.random.Generator, noise_scale: float = 1.0) -> np.ndarray:
    """
    Direct chip-sum evaluation of the received samples.

    bits[k, j] is NM k's bit j counted from absolute time zero; the result has
    one row per absolute bit. Row u + 1 corresponds to the compact model's
    bit u (the compact model's b_{-1} is absolute bit 0).

    Every contributing chip carries its own Gaussian counting term with
    variance c_k(lag) / V, so the total per-sample variance in steady state is
    the noise_sigma2 value.
    """
    _check_rng(rng)
    _check_bits(bits)
    code_list = list(getattr(codes, 'codes', codes))
    chips = np.array([_chips(c) for c in code_list])
    K, N = chips.shape
    _check_band(N, L)
    if bits.shape[0] != K or len(distances) != K or len(Qc) != K:
        raise utils.ShapeError("bits, distances and Qc must have one entry per code")
    n_bits = bits.shape[1]
    T = n_bits * N
    t = np.arange(T)
    volume = channel.detection_volume(rho)
    d_far = max(distances)
    sample_time = channel.peak_time(d_far, D)

    Z = np.zeros(T)
    noise = rng.standard_normal((K, T, L + 1))
    for k in range(K):
        delay = emission.time_offset(distances[k], d_far, D)
        # chip j sent at j*Tc + delay, sampled at t*Tc + sample_time
        for lag in range(L + 1):
            c = Qc[k] * channel.cir_value(distances[k], D, lag * Tc + sample_time - delay)
            j = t - lag
            live = j >= 0
            jl = j[live]
            sign = bits[k, jl // N] * chips[k, jl % N]
            term = c + np.sqrt(c / volume * noise_scale) * noise[k, live, lag]
            Z[live] += sign * term
    return Z.reshape(n_bits, N)
