"""
Linear detector module.
Weight design for matched-filter (MRC/EGC), max-SINR, ZF and MMSE detection,
the interference/observation correlation models behind them, and the sign
decision rule.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

import config
import utils
from config import DetectorScheme
from signal_model import LinkMatrices

logger = utils.get_logger(__name__)


class MmseForm(Enum):
    """Algebraic form used for the joint MMSE weight matrix"""
    DIRECT = "direct"   # (A A^T + R_I)^-1 A
    LEMMA = "lemma"     # R_I^-1 A (A^T R_I^-1 A + I)^-1


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray
    nm: int
    scheme: DetectorScheme

    def __post_init__(self):
        if not np.all(np.isfinite(self.w)):
            raise utils.NumericalError(f"non-finite weights for NM {self.nm}")


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    W: np.ndarray  # N x K, column k detects NM k
    scheme: DetectorScheme

    def __post_init__(self):
        if not np.all(np.isfinite(self.W)):
            raise utils.NumericalError(f"non-finite {self.scheme.value} weight matrix")

    def column(self, k: int) -> WeightVector:
        return WeightVector(w=self.W[:, k].copy(), nm=k, scheme=self.scheme)

    @classmethod
    def from_vectors(cls, vectors: Sequence[WeightVector], scheme: DetectorScheme) -> "WeightMatrix":
        return cls(W=np.column_stack([v.w for v in vectors]), scheme=scheme)


@dataclass(frozen=True, eq=False)
class InterferenceModel:
    """Interference-plus-noise autocorrelation seen by a detector"""
    R_I: np.ndarray
    sigma2: float

    def __post_init__(self):
        R = self.R_I
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise utils.ShapeError(f"R_I must be square, got {R.shape}")
        scale = max(float(np.max(np.abs(R))), np.finfo(float).tiny)
        if np.max(np.abs(R - R.T)) > 1e-12 * scale:
            raise utils.NumericalError("R_I is not symmetric")


# ─────────────────────────────────────────────────────────────────────────────
# Linear solves
# ─────────────────────────────────────────────────────────────────────────────

def spd_solve(M: np.ndarray, rhs: np.ndarray, what: str = "matrix") -> np.ndarray:
    """
    Solve M x = rhs for symmetric positive-definite M.

    Cholesky first; if the factorization fails, fall back to the
    pseudo-inverse at the configured relative singular-value cutoff, but only
    while M is still numerically full rank. Otherwise raise NumericalError.
    """
    try:
        factor = linalg.cho_factor(M, lower=True, check_finite=True)
        return linalg.cho_solve(factor, rhs)
    except linalg.LinAlgError:
        pass
    s = linalg.svdvals(M)
    cutoff = config.SINGULAR_VALUE_CUTOFF
    if s.size == 0 or s[0] == 0 or s[-1] <= cutoff * s[0]:
        raise utils.NumericalError(
            f"{what} is singular (condition estimate "
            f"{np.inf if s.size == 0 or s[-1] == 0 else s[0] / s[-1]:.3e})")
    logger.warning(f"Cholesky failed on {what}; using pseudo-inverse (cond {s[0] / s[-1]:.3e})")
    return linalg.pinv(M, rtol=cutoff) @ rhs


def _check_pair(S0_k: np.ndarray, c_k: np.ndarray):
    if S0_k.ndim != 2 or c_k.ndim != 1 or S0_k.shape[1] != len(c_k):
        raise utils.ShapeError(f"S0 {S0_k.shape} does not match taps of length {len(c_k)}")


# ─────────────────────────────────────────────────────────────────────────────
# Matched filters and max-SINR
# ─────────────────────────────────────────────────────────────────────────────

def mrc_weights(S0_k: np.ndarray, c_k, nm: int = 0) -> WeightVector:
    """w = S0_k c_k"""
    c_k = np.asarray(c_k, dtype=float)
    _check_pair(S0_k, c_k)
    return WeightVector(w=S0_k @ c_k, nm=nm, scheme=DetectorScheme.MRC)


def egc_weights(S0_k: np.ndarray, L: Optional[int] = None, nm: int = 0) -> WeightVector:
    """w = S0_k 1; needs no channel knowledge"""
    if L is not None and S0_k.shape[1] != L + 1:
        raise utils.ShapeError(f"S0 has {S0_k.shape[1]} columns, expected L + 1 = {L + 1}")
    return WeightVector(w=S0_k @ np.ones(S0_k.shape[1]), nm=nm, scheme=DetectorScheme.EGC)


def max_sinr_weights(S0_k: np.ndarray, c_k, R_I: Union[InterferenceModel, np.ndarray],
                     nm: int = 0) -> WeightVector:
    """w solves R_I w = S0_k c_k"""
    c_k = np.asarray(c_k, dtype=float)
    _check_pair(S0_k, c_k)
    R = R_I.R_I if isinstance(R_I, InterferenceModel) else np.asarray(R_I, dtype=float)
    if R.shape != (S0_k.shape[0], S0_k.shape[0]):
        raise utils.ShapeError(f"R_I {R.shape} does not match N = {S0_k.shape[0]}")
    w = spd_solve(R, S0_k @ c_k, what="interference correlation")
    return WeightVector(w=w, nm=nm, scheme=DetectorScheme.MAX_SINR)


def interference_model(link: LinkMatrices, target: Optional[int] = None) -> InterferenceModel:
    """
    Interference-plus-noise correlation.

    target=None: ISI of every NM plus noise (the joint-detector R_I).
    target=k: additionally the current-bit MAI of every other NM.
    """
    B = link.B
    R = B @ B.T + link.sigma2 * np.eye(link.N)
    if target is not None:
        if not 0 <= target < link.K:
            raise utils.ShapeError(f"target NM {target} outside 0..{link.K - 1}")
        A = link.A
        others = [l for l in range(link.K) if l != target]
        R = R + A[:, others] @ A[:, others].T
    return InterferenceModel(R_I=(R + R.T) / 2, sigma2=link.sigma2)


def post_sinr(w: np.ndarray, a: np.ndarray, R_I: Union[InterferenceModel, np.ndarray]) -> float:
    """Output SINR (w^T a)^2 / (w^T R_I w) of a linear detector"""
    R = R_I.R_I if isinstance(R_I, InterferenceModel) else R_I
    w = getattr(w, 'w', w)
    denom = float(w @ R @ w)
    if denom <= 0:
        return 0.0
    return float((w @ a) ** 2 / denom)


# ─────────────────────────────────────────────────────────────────────────────
# Zero forcing
# ─────────────────────────────────────────────────────────────────────────────

def zf_weights(S0: np.ndarray, C: np.ndarray) -> WeightMatrix:
    """W = A (A^T A)^-1 with A = S0 C, so W^T A = I"""
    if S0.shape[1] != C.shape[0]:
        raise utils.ShapeError(f"S0 {S0.shape} and C {C.shape} do not chain")
    A = S0 @ C
    K = A.shape[1]
    s = linalg.svdvals(A)
    if K > A.shape[0] or s[-1] <= config.SINGULAR_VALUE_CUTOFF * max(s[0], np.finfo(float).tiny):
        raise utils.RankError(_rank_diagnostic(A, s))
    gram = A.T @ A
    W_t = spd_solve((gram + gram.T) / 2, A.T, what="ZF Gram matrix")
    return WeightMatrix(W=W_t.T, scheme=DetectorScheme.ZF)


def _rank_diagnostic(A: np.ndarray, s: np.ndarray) -> str:
    rank = int(np.sum(s > config.SINGULAR_VALUE_CUTOFF * max(s[0], np.finfo(float).tiny)))
    norms = np.linalg.norm(A, axis=0)
    parts = [f"signature matrix has rank {rank} < K = {A.shape[1]}"]
    silent = [k + 1 for k in range(A.shape[1]) if norms[k] == 0]
    if silent:
        parts.append(f"zero signature for NM {silent}")
    for k in range(A.shape[1]):
        for l in range(k + 1, A.shape[1]):
            if norms[k] and norms[l]:
                cos = abs(A[:, k] @ A[:, l]) / (norms[k] * norms[l])
                if cos > 1 - 1e-9:
                    parts.append(f"NM {k + 1} and NM {l + 1} have parallel signatures (duplicate codes?)")
    return "; ".join(parts)


# ─────────────────────────────────────────────────────────────────────────────
# MMSE
# ─────────────────────────────────────────────────────────────────────────────

def correlation_per_nm(S0_all: Sequence[np.ndarray], Sm1_all: Sequence[np.ndarray],
                       taps_all: Sequence, sigma2: float) -> np.ndarray:
    """R_z summed NM by NM: sum_l (a_l a_l^T + p_l p_l^T) + sigma2 I"""
    N = S0_all[0].shape[0]
    R = sigma2 * np.eye(N)
    for S0_l, Sm1_l, c_l in zip(S0_all, Sm1_all, taps_all):
        c_l = np.asarray(getattr(c_l, 'taps', c_l), dtype=float)
        a = S0_l @ c_l
        p = Sm1_l @ c_l
        R += np.outer(a, a) + np.outer(p, p)
    return (R + R.T) / 2


def correlation_joint(S0: np.ndarray, Sm1: np.ndarray, C: np.ndarray, sigma2: float) -> np.ndarray:
    """R_z in stacked form: A A^T + B B^T + sigma2 I"""
    A = S0 @ C
    B = Sm1 @ C
    R = A @ A.T + B @ B.T + sigma2 * np.eye(S0.shape[0])
    return (R + R.T) / 2


def mmse_weights_per_nm(S0_all: Sequence[np.ndarray], Sm1_all: Sequence[np.ndarray],
                        taps_all: Sequence, sigma2: float, k: int,
                        R_z: Optional[np.ndarray] = None) -> WeightVector:
    """w solves R_z w = S0_k c_k; R_z is the model correlation unless one is supplied"""
    if R_z is None:
        R_z = correlation_per_nm(S0_all, Sm1_all, taps_all, sigma2)
    c_k = np.asarray(getattr(taps_all[k], 'taps', taps_all[k]), dtype=float)
    _check_pair(S0_all[k], c_k)
    w = spd_solve(R_z, S0_all[k] @ c_k, what="observation correlation")
    return WeightVector(w=w, nm=k, scheme=DetectorScheme.MMSE_PER_NM)


def mmse_weight_matrix(S0: np.ndarray, Sm1: np.ndarray, C: np.ndarray, sigma2: float,
                       form: MmseForm = MmseForm.DIRECT,
                       R_z: Optional[np.ndarray] = None) -> WeightMatrix:
    """Joint MMSE weights for all NMs at once"""
    A = S0 @ C
    N = A.shape[0]
    if R_z is not None:
        return WeightMatrix(W=spd_solve(R_z, A, what="sample correlation"),
                            scheme=DetectorScheme.MMSE_JOINT)

    B = Sm1 @ C
    if form == MmseForm.DIRECT and not np.any(B):
        # no ISI: (A A^T + sigma2 I)^-1 A == A (A^T A + sigma2 I)^-1
        gram = A.T @ A + sigma2 * np.eye(A.shape[1])
        W_t = spd_solve((gram + gram.T) / 2, A.T, what="regularized Gram matrix")
        return WeightMatrix(W=W_t.T, scheme=DetectorScheme.MMSE_JOINT)

    R_I = B @ B.T + sigma2 * np.eye(N)
    R_I = (R_I + R_I.T) / 2
    if form == MmseForm.DIRECT:
        R = A @ A.T + R_I
        W = spd_solve((R + R.T) / 2, A, what="observation correlation")
    else:
        RinvA = spd_solve(R_I, A, what="interference correlation")
        inner = A.T @ RinvA + np.eye(A.shape[1])
        W = spd_solve((inner + inner.T) / 2, RinvA.T, what="inner MMSE matrix").T
    return WeightMatrix(W=W, scheme=DetectorScheme.MMSE_JOINT)


def mmse_cost(w: np.ndarray, a: np.ndarray, R_z: np.ndarray) -> float:
    """Mean squared error E[(b - w^T z)^2] = 1 - 2 w^T a + w^T R_z w"""
    w = getattr(w, 'w', w)
    return float(1.0 - 2.0 * (w @ a) + w @ R_z @ w)


def sample_correlation(Z: np.ndarray) -> np.ndarray:
    """Sample autocorrelation (1/M) sum_u z_u z_u^T of M observations (rows of Z)"""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] == 0:
        raise utils.ShapeError("no observations to estimate a correlation from")
    R = Z.T @ Z / Z.shape[0]
    return (R + R.T) / 2


# ─────────────────────────────────────────────────────────────────────────────
# Decisions
# ─────────────────────────────────────────────────────────────────────────────

def _as_matrix(weights) -> np.ndarray:
    if isinstance(weights, WeightMatrix):
        return weights.W
    if isinstance(weights, WeightVector):
        return weights.w[:, None]
    W = np.asarray(weights, dtype=float)
    return W[:, None] if W.ndim == 1 else W


def decide(z: np.ndarray, weights) -> np.ndarray:
    """+1 where w^T z > 0, else -1; z is one observation (N,) or a stack (M, N)"""
    eps = np.asarray(z, dtype=float) @ _as_matrix(weights)
    return np.where(eps > 0, 1, -1).astype(np.int8)


def design_weights(scheme: DetectorScheme, link: LinkMatrices,
                   R_z: Optional[np.ndarray] = None) -> WeightMatrix:
    """N x K weights for every NM under the given scheme, from the detector-side model"""
    K = link.K
    if scheme == DetectorScheme.MRC:
        vectors = [mrc_weights(link.S0_blocks[k], link.taps[k], nm=k) for k in range(K)]
    elif scheme == DetectorScheme.EGC:
        vectors = [egc_weights(link.S0_blocks[k], link.L, nm=k) for k in range(K)]
    elif scheme == DetectorScheme.MAX_SINR:
        vectors = [max_sinr_weights(link.S0_blocks[k], link.taps[k],
                                    interference_model(link, target=k), nm=k)
                   for k in range(K)]
    elif scheme == DetectorScheme.ZF:
        return zf_weights(link.S0, link.C)
    elif scheme == DetectorScheme.MMSE_PER_NM:
        if R_z is None:
            R_z = correlation_per_nm(link.S0_blocks, link.Sm1_blocks, link.taps, link.sigma2)
        vectors = [mmse_weights_per_nm(link.S0_blocks, link.Sm1_blocks, link.taps,
                                       link.sigma2, k, R_z=R_z)
                   for k in range(K)]
    else:
        return mmse_weight_matrix(link.S0, link.Sm1, link.C, link.sigma2, R_z=R_z)
    return WeightMatrix.from_vectors(vectors, scheme)
