"""
Monte Carlo BER harness.
Sweeps the per-bit molecule budget, simulates frames through the compact
model, counts detection errors per NM and reports Wilson intervals. Also
hosts the built-in matrix identity self-test.
"""
import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

import channel
import codes
import config
import detectors
import emission
import signal_model
import utils
from config import CorrelationSource, DetectorScheme, ScenarioConfig

logger = utils.get_logger(__name__)

# Third rng key of the detector training frame; frame indices never reach it
TRAINING_STREAM = 2 ** 32 - 1


@dataclass(frozen=True)
class SweepPoint:
    Q: float
    ber: Tuple[float, ...]
    errors: Tuple[int, ...]
    bits: int
    ci_low: Tuple[float, ...]
    ci_high: Tuple[float, ...]
    sinr: Tuple[float, ...] = ()

    def __post_init__(self):
        for e in self.errors:
            if e > self.bits:
                raise utils.SimulationError(f"{e} errors counted over {self.bits} bits")
        for b, lo, hi in zip(self.ber, self.ci_low, self.ci_high):
            if not lo <= b <= hi:
                raise utils.SimulationError(f"interval [{lo}, {hi}] does not contain BER {b}")


@dataclass(frozen=True)
class BerReport:
    name: str
    digest: str
    seed: int
    scheme: DetectorScheme
    points: Tuple[SweepPoint, ...]
    wall_time: float

    def rows(self) -> List[Dict[str, object]]:
        """One row per (Q, NM), sorted by Q then NM"""
        out = []
        for p in sorted(self.points, key=lambda p: p.Q):
            for k in range(len(p.ber)):
                out.append({
                    'Q': p.Q,
                    'nm_index': k + 1,
                    'ber': p.ber[k],
                    'ci_low': p.ci_low[k],
                    'ci_high': p.ci_high[k],
                    'bits': p.bits,
                    'errors': p.errors[k],
                })
        return out


@dataclass(frozen=True, eq=False)
class LinkSetup:
    """Everything a worker needs to simulate frames at one sweep point"""
    plan: emission.EmissionPlan
    truth: signal_model.LinkMatrices
    receiver: signal_model.LinkMatrices
    W: np.ndarray
    sinr: Tuple[float, ...] = field(default=())


def wilson_interval(errors: int, n: int, confidence: float = config.WILSON_CONFIDENCE) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion"""
    if n <= 0:
        return 0.0, 1.0
    z = float(norm.ppf(0.5 + confidence / 2))
    p = errors / n
    den = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    if errors == 0:
        return 0.0, min(1.0, center + half)
    if errors == n:
        return max(0.0, center - half), 1.0
    return min(p, max(0.0, center - half)), max(p, min(1.0, center + half))


def _tap_vectors(cfg: ScenarioConfig, plan: emission.EmissionPlan) -> List[channel.TapVector]:
    medium = channel.Medium(D=cfg.medium.D)
    return [
        channel.discrete_taps(channel.LinkGeometry(d=d, rho=cfg.receiver.rho), medium,
                              cfg.timing.Tc, cfg.L, plan.Qc[k])
        for k, d in enumerate(cfg.distances)
    ]


def _random_bits(rng: np.random.Generator, K: int, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=(K, n), dtype=np.int8) * 2 - 1


def build_setup(cfg: ScenarioConfig, Q: float, assignment: codes.CodeAssignment,
                q_index: int = 0, seed: Optional[int] = None,
                noise_scale: Optional[float] = None) -> LinkSetup:
    """Truth model at depth L, detector model at depth L_Rx, and the detector weights"""
    seed = cfg.run.seed if seed is None else seed
    noise_scale = cfg.run.noise_scale if noise_scale is None else noise_scale
    plan = emission.make_plan(cfg.emission, Q, cfg.timing.N, cfg.distances, cfg.medium.D)
    taps = _tap_vectors(cfg, plan)
    truth = signal_model.build_link_matrices(assignment, taps, cfg.receiver.rho)
    rx_taps = [t.truncated(cfg.detector.L_Rx) for t in taps]
    receiver = signal_model.build_link_matrices(assignment, rx_taps, cfg.receiver.rho)

    scheme = cfg.detector.scheme
    if not np.any(receiver.A):
        logger.warning(f"Q={Q:g}: no signal reaches the receiver, all decisions default to -1")
        return LinkSetup(plan=plan, truth=truth, receiver=receiver,
                         W=np.zeros((truth.N, truth.K)), sinr=(0.0,) * truth.K)

    R_z = None
    if cfg.detector.correlation == CorrelationSource.SAMPLE and \
            scheme in (DetectorScheme.MMSE_PER_NM, DetectorScheme.MMSE_JOINT):
        rng = np.random.default_rng([seed, q_index, TRAINING_STREAM])
        training = _random_bits(rng, truth.K, cfg.detector.training_bits + 1)
        R_z = detectors.sample_correlation(truth.observe(training, rng, noise_scale))
        logger.debug(f"Q={Q:g}: sample correlation from {cfg.detector.training_bits} bits")

    weights = detectors.design_weights(scheme, receiver, R_z=R_z)
    A = receiver.A
    sinr = tuple(
        detectors.post_sinr(weights.W[:, k], A[:, k], detectors.interference_model(receiver, target=k))
        for k in range(receiver.K)
    )
    return LinkSetup(plan=plan, truth=truth, receiver=receiver, W=weights.W, sinr=sinr)


def run_frames(setup: LinkSetup, seed: int, q_index: int, first: int, count: int,
               frame_bits: int, noise_scale: float) -> Tuple[np.ndarray, int]:
    """Simulate frames first..first+count-1; returns (errors per NM, bits counted per NM)"""
    K = setup.truth.K
    errors = np.zeros(K, dtype=np.int64)
    counted = 0
    for t in range(first, first + count):
        rng = np.random.default_rng([seed, q_index, t])
        # bits u = -1..M-1
        bits = _random_bits(rng, K, frame_bits + 1)
        Z = setup.truth.observe(bits, rng, noise_scale)
        decisions = detectors.decide(Z[1:], setup.W)
        # u = 0 is warm-up
        errors += np.count_nonzero(decisions.T != bits[:, 2:], axis=1)
        counted += frame_bits - 1
    return errors, counted


def _chunks(first: int, count: int, parts: int) -> List[Tuple[int, int]]:
    size = -(-count // parts)
    return [(s, min(size, first + count - s)) for s in range(first, first + count, size)]


def run_point(cfg: ScenarioConfig, setup: LinkSetup, q_index: int, seed: int,
              noise_scale: float, executor: Optional[ProcessPoolExecutor] = None,
              workers: int = 1) -> SweepPoint:
    """Batch frames until the stopping rule is met"""
    run = cfg.run
    K = setup.truth.K
    errors = np.zeros(K, dtype=np.int64)
    bits = 0
    frame = 0
    while True:
        if executor is not None and workers > 1:
            futures = [executor.submit(run_frames, setup, seed, q_index, start, n,
                                       run.frame_bits, noise_scale)
                       for start, n in _chunks(frame, run.batch_frames, workers)]
            results = [f.result() for f in futures]
        else:
            results = [run_frames(setup, seed, q_index, frame, run.batch_frames,
                                  run.frame_bits, noise_scale)]
        for e, n in results:
            errors += e
            bits += n
        frame += run.batch_frames
        logger.debug(f"Q={setup.plan.Q:g}: {bits} bits, errors {errors.tolist()}")
        if bits >= run.max_bits:
            break
        if bits >= run.bits and int(errors.min()) >= run.min_errors:
            break

    intervals = [wilson_interval(int(e), bits) for e in errors]
    return SweepPoint(
        Q=setup.plan.Q,
        ber=tuple(float(e) / bits for e in errors),
        errors=tuple(int(e) for e in errors),
        bits=bits,
        ci_low=tuple(lo for lo, _ in intervals),
        ci_high=tuple(hi for _, hi in intervals),
        sinr=setup.sinr,
    )


def run_ber(cfg: ScenarioConfig, seed: Optional[int] = None,
            noise_scale: Optional[float] = None, workers: Optional[int] = None) -> BerReport:
    """Run the full sweep; identical (cfg, seed) give identical error counts for any worker count"""
    seed = cfg.run.seed if seed is None else seed
    noise_scale = cfg.run.noise_scale if noise_scale is None else noise_scale
    workers = cfg.run.workers if workers is None else workers
    started = time.perf_counter()
    assignment = codes.build_family(cfg)
    sweep = cfg.sweep.values()
    logger.info(f"Running '{cfg.name}': {cfg.detector.scheme.value}, {cfg.emission.value}, "
                f"K={cfg.K}, N={cfg.timing.N}, L={cfg.L}, L_Rx={cfg.detector.L_Rx}, "
                f"{len(sweep)} sweep points, seed={seed}, workers={workers}")

    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    points = []
    try:
        for q_index, Q in enumerate(sweep):
            setup = build_setup(cfg, Q, assignment, q_index, seed, noise_scale)
            point = run_point(cfg, setup, q_index, seed, noise_scale, executor, workers)
            logger.info(f"Q={Q:g}: BER " + ", ".join(f"{b:.3e}" for b in point.ber)
                        + f" over {point.bits} bits")
            points.append(point)
    finally:
        if executor is not None:
            executor.shutdown()

    return BerReport(
        name=cfg.name,
        digest=utils.config_digest(cfg),
        seed=seed,
        scheme=cfg.detector.scheme,
        points=tuple(points),
        wall_time=time.perf_counter() - started,
    )


# ─────────────────────────────────────────────────────────────────────────────
# Self-test
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SelftestCheck:
    name: str
    deviation: float
    passed: bool


@dataclass(frozen=True)
class SelftestReport:
    checks: Tuple[SelftestCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def by_name(self) -> Dict[str, SelftestCheck]:
        return {c.name: c for c in self.checks}


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(b))), float(np.max(np.abs(a))), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b))) / scale


def run_matrix_selftest(cfg: Optional[ScenarioConfig] = None, corrupt_sm1: bool = False,
                        seed: int = 0, tolerance: float = 1e-8, frame_bits: int = 4) -> SelftestReport:
    """
    Cross-check the model representations and detector identities.

    Failures are reported per check, never raised. corrupt_sm1 flips the sign
    of the stacked previous-bit matrix used by the compact model.
    """
    if cfg is None:
        cfg = utils.ScenarioFile.parse("")
    Q = max(cfg.sweep.values())
    assignment = codes.build_family(cfg)
    plan = emission.make_plan(cfg.emission, Q, cfg.timing.N, cfg.distances, cfg.medium.D)
    taps = _tap_vectors(cfg, plan)
    link = signal_model.build_link_matrices(assignment, taps, cfg.receiver.rho)
    if corrupt_sm1:
        link = dataclasses.replace(link, Sm1=-link.Sm1)
    rng = np.random.default_rng(seed)
    K, N = link.K, link.N
    checks = []

    def record(name: str, deviation: float):
        passed = bool(np.isfinite(deviation) and deviation <= tolerance)
        checks.append(SelftestCheck(name=name, deviation=deviation, passed=passed))
        logger.info(f"selftest {name}: {deviation:.3e} {'ok' if passed else 'FAIL'}")

    bits = _random_bits(rng, K, frame_bits + 1)
    compact = link.observe(bits, rng, noise_scale=0.0)
    oracle = signal_model.oracle_observation(
        bits, assignment, cfg.distances, cfg.medium.D, cfg.timing.Tc, cfg.L,
        plan.Qc, cfg.receiver.rho, rng, noise_scale=0.0)
    record('oracle_vs_compact', _relative(compact, oracle[1:]))

    worst = 0.0
    for k in range(K):
        s = assignment.codes[k].chips.astype(float)
        C_prev, C_cur = signal_model.split_Ck2(signal_model.build_Ck2(taps[k], N))
        for b_cur in (-1, 1):
            for b_prev in (-1, 1):
                window = C_cur @ s * b_cur + C_prev @ s * b_prev
                banded = (link.S0_blocks[k] @ link.taps[k] * b_cur
                          + link.Sm1_blocks[k] @ link.taps[k] * b_prev)
                worst = max(worst, _relative(window, banded))
    record('window_vs_banded', worst)

    R_per_nm = detectors.correlation_per_nm(link.S0_blocks, link.Sm1_blocks, link.taps, link.sigma2)
    R_joint = detectors.correlation_joint(link.S0, link.Sm1, link.C, link.sigma2)
    record('correlation_forms', _relative(R_per_nm, R_joint))

    try:
        direct = detectors.mmse_weight_matrix(link.S0, link.Sm1, link.C, link.sigma2,
                                              form=detectors.MmseForm.DIRECT)
        lemma = detectors.mmse_weight_matrix(link.S0, link.Sm1, link.C, link.sigma2,
                                             form=detectors.MmseForm.LEMMA)
        record('mmse_forms', _relative(direct.W, lemma.W))
        per_nm = np.column_stack([
            detectors.mmse_weights_per_nm(link.S0_blocks, link.Sm1_blocks, link.taps,
                                          link.sigma2, k).w
            for k in range(K)
        ])
        record('mmse_per_nm_vs_joint', _relative(per_nm, direct.W))
    except utils.SimulationError as e:
        logger.error(f"selftest MMSE checks could not run: {e}")
        done = {c.name for c in checks}
        for name in ('mmse_forms', 'mmse_per_nm_vs_joint'):
            if name not in done:
                record(name, float('inf'))

    try:
        W = detectors.zf_weights(link.S0, link.C).W
        record('zf_identity', float(np.max(np.abs(W.T @ link.A - np.eye(K)))))
    except utils.SimulationError as e:
        logger.error(f"selftest ZF check could not run: {e}")
        record('zf_identity', float('inf'))

    return SelftestReport(checks=tuple(checks))
