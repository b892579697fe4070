"""Finite-dimensional Monte Carlo of the mod-sum secrecy scheme.

Per trial: each of the K-1 interfering users folds a uniformly drawn
codeword with a fresh dither and scales its transmit power so that all
interference arrives at receiver K with the common power P = min a_i*P_i
(signal-space alignment); user K transmits its own dithered codeword at
power P_K.  Receiver K decodes in three stages: MMSE-scaled mod-sum
decoding of the interference, subtraction of the decoded mod-sum, then
decoding of user K's codeword from the residual.  Receivers 1..K-1 see
interference-free direct links.

Error events are classified conditionally, in order: e1 (wrong mod-sum),
e2 (no e1, but the residual wrapped around the coarse cell), e3 (no e1
or e2, wrong user-K codeword).  The decoding-threshold formulas hold
only asymptotically in the dimension; campaigns report empirical rates
against them and never assert achievability at desk scale.

Reproducibility: per-trial seeds are SHA-256 hashes of
``"{master_seed}:{trial_index}"`` (first 8 big-endian digest bytes).
``run_trial`` is the single-trial reference implementation;
``run_campaign`` runs a vectorized engine that replicates the reference
draw sequence and arithmetic trial for trial, so reports are identical
across worker counts and bit-identical to folding ``run_trial``.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolationError
from .lattices import (
    BOUNDARY_TOL,
    LatticePoint,
    NestedPair,
    codebook,
    in_voronoi,
    mod_lattice,
    quantize,
    sample_dither,
    second_moment,
)
from .rates import SystemConfig, mmse_coefficients

_WILSON_Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class Scheme:
    """Immutable bundle of configuration, lattice pairs and derived constants.

    The first K-1 users share ``interferer_pair``; user K has its own
    ``user_k_pair``.  Both coarse lattices are unit-second-moment
    normalized, which is what makes the power accounting exact.
    """

    config: SystemConfig
    interferer_pair: NestedPair
    user_k_pair: NestedPair
    aligned_power: float
    gamma: float
    alpha_mod_sum: float
    alpha_user_k: float
    effective_noise_var: float
    interferer_amplitudes: tuple[float, ...]
    interferer_points: tuple[LatticePoint, ...]
    user_k_points: tuple[LatticePoint, ...]
    interferer_coord_set: frozenset
    user_k_coord_set: frozenset

    @classmethod
    def for_config(cls, cfg: SystemConfig, interferer_pair: NestedPair,
                   user_k_pair: NestedPair | None = None) -> "Scheme":
        if user_k_pair is None:
            user_k_pair = interferer_pair
        if interferer_pair.dimension != user_k_pair.dimension:
            raise ValueError("lattice pairs must share one dimension")
        for pair in (interferer_pair, user_k_pair):
            if abs(second_moment(pair.coarse) - 1.0) > 1e-9:
                raise ValueError(
                    "coarse lattices must be normalized to unit second moment")
        p = cfg.p_aligned
        mmse = mmse_coefficients(cfg)
        points = tuple(codebook(interferer_pair))
        points_k = tuple(codebook(user_k_pair))
        return cls(
            config=cfg,
            interferer_pair=interferer_pair,
            user_k_pair=user_k_pair,
            aligned_power=p,
            gamma=mmse.gamma,
            alpha_mod_sum=mmse.alpha,
            alpha_user_k=cfg.p_k / (cfg.p_k + 1.0),
            effective_noise_var=mmse.effective_noise_var,
            interferer_amplitudes=tuple(math.sqrt(p / g) for g in cfg.a),
            interferer_points=points,
            user_k_points=points_k,
            interferer_coord_set=frozenset(pt.coords for pt in points),
            user_k_coord_set=frozenset(pt.coords for pt in points_k))

    @property
    def dimension(self) -> int:
        return self.interferer_pair.dimension


@dataclass(frozen=True)
class TrialOutcome:
    """Flags and diagnostics for one simulated channel use block.

    The event flags are conditional by construction: e2 implies no e1,
    e3 implies neither e1 nor e2.  Violations are rejected at creation.
    """

    direct_errors: tuple[bool, ...]
    e1: bool
    e2: bool
    e3: bool
    effective_noise_power: float
    residual_power: float

    def __post_init__(self):
        if self.e2 and self.e1:
            raise InvariantViolationError("e2 set together with e1")
        if self.e3 and (self.e1 or self.e2):
            raise InvariantViolationError("e3 set together with e1 or e2")


@dataclass(frozen=True)
class CampaignReport:
    """Aggregated Monte Carlo statistics for one configuration."""

    trials: int
    master_seed: int
    e1_count: int
    e2_count: int
    e3_count: int
    direct_error_counts: tuple[int, ...]
    mean_effective_noise_power: float
    mean_residual_power: float
    config_echo: str = ""

    def __post_init__(self):
        for c in (self.e1_count, self.e2_count, self.e3_count,
                  *self.direct_error_counts):
            if not 0 <= c <= self.trials:
                raise InvariantViolationError("event count exceeds trials")

    @property
    def e1_rate(self) -> float:
        return self.e1_count / self.trials

    @property
    def e2_rate(self) -> float:
        return self.e2_count / self.trials

    @property
    def e3_rate(self) -> float:
        return self.e3_count / self.trials

    @property
    def direct_error_rates(self) -> tuple[float, ...]:
        return tuple(c / self.trials for c in self.direct_error_counts)

    @property
    def direct_error_rate_pooled(self) -> float:
        return sum(self.direct_error_counts) / (
            self.trials * len(self.direct_error_counts))

    @property
    def e1_interval(self) -> tuple[float, float]:
        return wilson_interval(self.e1_count, self.trials)

    @property
    def e2_interval(self) -> tuple[float, float]:
        return wilson_interval(self.e2_count, self.trials)

    @property
    def e3_interval(self) -> tuple[float, float]:
        return wilson_interval(self.e3_count, self.trials)

    @property
    def direct_error_intervals(self) -> tuple[tuple[float, float], ...]:
        return tuple(wilson_interval(c, self.trials)
                     for c in self.direct_error_counts)


def wilson_interval(count: int, trials: int,
                    z: float = _WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    p = count / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials
                         + z * z / (4 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def encode_interferer(scheme: Scheme, user: int, point: LatticePoint,
                      dither: np.ndarray) -> np.ndarray:
    """Transmit signal of interfering user ``user`` (1-based).

    Folds codeword plus dither over the coarse cell, then scales by
    sqrt(P/a_user) so the signal arrives at receiver K with power P.
    The transmit power P/a_user never exceeds the user's constraint.
    """
    cfg = scheme.config
    if not 1 <= user <= cfg.K - 1:
        raise ValueError("interferer index out of range")
    if point.coords not in scheme.interferer_coord_set:
        raise ValueError("codeword is not in the interferer codebook")
    coarse = scheme.interferer_pair.coarse
    folded = mod_lattice(coarse, point.embed() + dither)
    return scheme.interferer_amplitudes[user - 1] * folded


def encode_user_k(scheme: Scheme, point: LatticePoint,
                  dither: np.ndarray) -> np.ndarray:
    """Transmit signal of user K: dithered fold scaled to power P_K."""
    if point.coords not in scheme.user_k_coord_set:
        raise ValueError("codeword is not in user K's codebook")
    coarse = scheme.user_k_pair.coarse
    folded = mod_lattice(coarse, point.embed() + dither)
    return math.sqrt(scheme.config.p_k) * folded


def _received_interference(scheme: Scheme, interferer_signals):
    """Cross-gain-weighted interference sum at receiver K.

    Explicit left-to-right accumulation; the batch engine mirrors this
    order so the two paths agree bit for bit.
    """
    acc = np.zeros(scheme.dimension)
    for g, x in zip(scheme.config.a, interferer_signals):
        acc = acc + math.sqrt(g) * x
    return acc


def apply_channel(scheme: Scheme, interferer_signals, user_k_signal,
                  rng: np.random.Generator, noiseless: bool = False):
    """One block through the many-to-one channel.

    Returns ``(direct_outputs, y_k)``: receivers 1..K-1 each see only
    their own sender plus unit-variance noise; receiver K sees the
    cross-gain-weighted sum of everything plus its own noise.  Noise is
    drawn in user order (direct links first, receiver K last); with
    ``noiseless`` no noise is drawn at all.
    """
    n = scheme.dimension
    direct = []
    for x in interferer_signals:
        z = np.zeros(n) if noiseless else rng.standard_normal(n)
        direct.append(x + z)
    z_k = np.zeros(n) if noiseless else rng.standard_normal(n)
    y_k = _received_interference(scheme, interferer_signals) \
        + user_k_signal + z_k
    return direct, y_k


def decode_direct(scheme: Scheme, user: int, y: np.ndarray,
                  dither: np.ndarray) -> LatticePoint:
    """MMSE lattice decoding on the interference-free direct link.

    Physical SNR is S = P/a_user (the power actually transmitted);
    scale by alpha = S/(S+1), remove the dither, fold, quantize to the
    fine lattice and reduce to a coset leader.
    """
    pair = scheme.interferer_pair
    snr = scheme.interferer_amplitudes[user - 1] ** 2
    alpha = snr / (snr + 1.0)
    folded = mod_lattice(pair.coarse,
                         alpha * y / math.sqrt(snr) - dither)
    return pair.reduce(quantize(pair.fine, folded))


def decode_mod_sum(scheme: Scheme, y_k: np.ndarray,
                   dithers) -> LatticePoint:
    """Stage one at receiver K: decode the mod-sum of the interference.

    Normalizes by sqrt(P), applies the variance-minimizing alpha,
    strips all interferer dithers, folds, and quantizes.
    """
    pair = scheme.interferer_pair
    scaled = scheme.alpha_mod_sum * y_k / math.sqrt(scheme.aligned_power)
    folded = mod_lattice(pair.coarse, scaled - np.sum(dithers, axis=0))
    return pair.reduce(quantize(pair.fine, folded))


def subtract_interference(scheme: Scheme, y_k: np.ndarray, s_hat: LatticePoint,
                          dithers) -> np.ndarray:
    """Stage two: remove the decoded mod-sum from the normalized output.

    When ``s_hat`` is correct the result equals gamma*U_K + Z' modulo
    the coarse cell, with Z' the receiver noise scaled by 1/sqrt(P).
    """
    coarse = scheme.interferer_pair.coarse
    normalized = y_k / math.sqrt(scheme.aligned_power)
    return mod_lattice(coarse,
                       normalized - s_hat.embed() - np.sum(dithers, axis=0))


def decode_user_k(scheme: Scheme, residual: np.ndarray,
                  dither: np.ndarray) -> LatticePoint:
    """Stage three: decode user K's codeword from the residual.

    The residual carries gamma*U_K at noise variance 1/P, an effective
    SNR of P_K; rescale by 1/gamma, apply alpha = P_K/(P_K+1), strip
    user K's dither and quantize on user K's pair.
    """
    pair = scheme.user_k_pair
    scaled = scheme.alpha_user_k * residual / scheme.gamma
    folded = mod_lattice(pair.coarse, scaled - dither)
    return pair.reduce(quantize(pair.fine, folded))


def classify_events(mod_sum_correct: bool, residual_unwrapped: bool,
                    user_k_correct: bool) -> tuple[bool, bool, bool]:
    """Conditional event flags (e1, e2, e3) from raw stage outcomes."""
    e1 = not mod_sum_correct
    e2 = (not e1) and (not residual_unwrapped)
    e3 = (not e1) and (not e2) and (not user_k_correct)
    return e1, e2, e3


def derive_trial_seed(master_seed: int, index: int) -> int:
    """Stable per-trial seed: SHA-256 of "master:index", first 8 bytes."""
    digest = hashlib.sha256(f"{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def run_trial(scheme: Scheme, trial_seed: int,
              noiseless: bool = False) -> TrialOutcome:
    """Simulate one block: draw, encode, transmit, decode, classify.

    Draw order (fixed contract): interferer codeword indices, user K
    codeword index, interferer dithers in user order, user K dither,
    then channel noise inside ``apply_channel``.
    """
    rng = np.random.default_rng(trial_seed)
    cfg = scheme.config
    pair = scheme.interferer_pair
    n = scheme.dimension

    idx = rng.integers(0, len(scheme.interferer_points), size=cfg.K - 1)
    points = [scheme.interferer_points[i] for i in idx]
    point_k = scheme.user_k_points[rng.integers(0, len(scheme.user_k_points))]
    dithers = [sample_dither(pair.coarse, rng) for _ in range(cfg.K - 1)]
    dither_k = sample_dither(scheme.user_k_pair.coarse, rng)

    signals = [encode_interferer(scheme, i + 1, t, d)
               for i, (t, d) in enumerate(zip(points, dithers))]
    signal_k = encode_user_k(scheme, point_k, dither_k)
    direct_outputs, y_k = apply_channel(scheme, signals, signal_k, rng,
                                        noiseless=noiseless)

    direct_errors = tuple(
        decode_direct(scheme, i + 1, y, d).coords != t.coords
        for i, (y, d, t) in enumerate(zip(direct_outputs, dithers, points)))

    s_hat = decode_mod_sum(scheme, y_k, dithers)
    total = points[0]
    for t in points[1:]:
        total = total + t
    s_true = pair.reduce(total)
    mod_sum_correct = s_hat.coords == s_true.coords

    # Reconstruct the exact unwrapped residual from simulator-side truth:
    # gamma*U_K + Z'; the wrap event is its escape from the coarse cell.
    u_k = mod_lattice(scheme.user_k_pair.coarse, point_k.embed() + dither_k)
    z_k = y_k - _received_interference(scheme, signals) - signal_k
    z_prime = z_k / math.sqrt(scheme.aligned_power)
    unwrapped = scheme.gamma * u_k + z_prime
    residual_unwrapped = in_voronoi(pair.coarse, unwrapped)

    residual = subtract_interference(scheme, y_k, s_hat, dithers)
    t_k_hat = decode_user_k(scheme, residual, dither_k)
    user_k_correct = t_k_hat.coords == point_k.coords

    e1, e2, e3 = classify_events(mod_sum_correct, residual_unwrapped,
                                 user_k_correct)

    u_sum = np.sum([mod_lattice(pair.coarse, t.embed() + d)
                    for t, d in zip(points, dithers)], axis=0)
    z_eff = (scheme.alpha_mod_sum - 1.0) * u_sum \
        + scheme.alpha_mod_sum * unwrapped
    return TrialOutcome(
        direct_errors=direct_errors,
        e1=e1, e2=e2, e3=e3,
        effective_noise_power=float(np.sum(z_eff * z_eff)) / n,
        residual_power=float(np.sum(residual * residual)) / n)


def _batch_trial_arrays(scheme: Scheme, seeds, noiseless: bool) -> dict:
    """Vectorized engine: all trials for ``seeds`` as flat arrays.

    Replays run_trial's per-trial rng call sequence, then performs the
    same arithmetic, in the same order, on (trials, ...) arrays; every
    per-trial value is bit-identical to the reference implementation.
    """
    cfg = scheme.config
    pair = scheme.interferer_pair
    n = scheme.dimension
    k1 = cfg.K - 1
    t_count = len(seeds)
    m = len(scheme.interferer_points)
    m_k = len(scheme.user_k_points)
    s_coarse = pair.coarse.scale
    s_coarse_k = scheme.user_k_pair.coarse.scale

    leaders = np.array([p.coords for p in scheme.interferer_points],
                       dtype=np.int64)
    leaders_emb = leaders * pair.fine.scale
    leaders_k = np.array([p.coords for p in scheme.user_k_points],
                         dtype=np.int64)
    leaders_k_emb = leaders_k * scheme.user_k_pair.fine.scale

    idx = np.empty((t_count, k1), dtype=np.int64)
    idx_k = np.empty(t_count, dtype=np.int64)
    dither_box = np.empty((t_count, k1, n))
    dither_k_box = np.empty((t_count, n))
    noise = np.zeros((t_count, k1, n))
    noise_k = np.zeros((t_count, n))
    for i, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        idx[i] = rng.integers(0, m, size=k1)
        idx_k[i] = rng.integers(0, m_k)
        for j in range(k1):
            dither_box[i, j] = s_coarse * rng.random(n)
        dither_k_box[i] = s_coarse_k * rng.random(n)
        if not noiseless:
            for j in range(k1):
                noise[i, j] = rng.standard_normal(n)
            noise_k[i] = rng.standard_normal(n)

    def fold(x, s):
        return x - s * np.ceil(x / s - 0.5)

    def quantize_reduce(x, fine_scale, q):
        v = np.ceil(x / fine_scale - 0.5).astype(np.int64)
        r = np.mod(v, q)
        return np.where(2 * r > q, r - q, r)

    dithers = fold(dither_box, s_coarse)
    dither_k = fold(dither_k_box, s_coarse_k)

    t_emb = leaders_emb[idx]
    u = fold(t_emb + dithers, s_coarse)
    amps = np.asarray(scheme.interferer_amplitudes)
    signals = amps[None, :, None] * u
    u_k = fold(leaders_k_emb[idx_k] + dither_k, s_coarse_k)
    signal_k = math.sqrt(cfg.p_k) * u_k

    direct_y = signals + noise
    received = np.zeros((t_count, n))
    for j in range(k1):
        received = received + math.sqrt(cfg.a[j]) * signals[:, j, :]
    y_k = received + signal_k + noise_k

    q = pair.q
    fine_scale = pair.fine.scale
    direct_errors = np.empty((t_count, k1), dtype=bool)
    for j in range(k1):
        snr = scheme.interferer_amplitudes[j] ** 2
        alpha = snr / (snr + 1.0)
        folded = fold(alpha * direct_y[:, j, :] / math.sqrt(snr)
                      - dithers[:, j, :], s_coarse)
        decoded = quantize_reduce(folded, fine_scale, q)
        direct_errors[:, j] = np.any(decoded != leaders[idx[:, j]], axis=1)

    dither_sum = np.sum(dithers, axis=1)
    scaled = scheme.alpha_mod_sum * y_k / math.sqrt(scheme.aligned_power)
    folded = fold(scaled - dither_sum, s_coarse)
    s_hat = quantize_reduce(folded, fine_scale, q)
    true_sums = np.sum(leaders[idx], axis=1)
    r = np.mod(true_sums, q)
    s_true = np.where(2 * r > q, r - q, r)
    e1 = np.any(s_hat != s_true, axis=1)

    z_k = y_k - received - signal_k
    z_prime = z_k / math.sqrt(scheme.aligned_power)
    unwrapped = scheme.gamma * u_k + z_prime
    u_cell = unwrapped / s_coarse
    wrapped = ~np.all((u_cell <= 0.5 + BOUNDARY_TOL) & (u_cell > -0.5),
                      axis=1)
    e2 = ~e1 & wrapped

    normalized = y_k / math.sqrt(scheme.aligned_power)
    residual = fold(normalized - s_hat * fine_scale - dither_sum, s_coarse)
    scaled_k = scheme.alpha_user_k * residual / scheme.gamma
    folded_k = fold(scaled_k - dither_k, s_coarse_k)
    t_k_hat = quantize_reduce(folded_k, scheme.user_k_pair.fine.scale,
                              scheme.user_k_pair.q)
    e3 = ~e1 & ~e2 & np.any(t_k_hat != leaders_k[idx_k], axis=1)

    u_sum = np.sum(u, axis=1)
    z_eff = (scheme.alpha_mod_sum - 1.0) * u_sum \
        + scheme.alpha_mod_sum * unwrapped
    return {
        "direct_errors": direct_errors,
        "e1": e1,
        "e2": e2,
        "e3": e3,
        "eff_power": np.sum(z_eff * z_eff, axis=1) / n,
        "residual_power": np.sum(residual * residual, axis=1) / n,
    }


def run_campaign(scheme: Scheme, trials: int, master_seed: int,
                 jobs: int = 1, noiseless: bool = False,
                 config_echo: str = "") -> CampaignReport:
    """Run ``trials`` independent trials and fold the outcomes.

    Trials are independent given their derived seeds, so any number of
    worker threads produces the identical report: workers own contiguous
    index chunks and results are concatenated in index order before the
    single final aggregation.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    seeds = [derive_trial_seed(master_seed, i) for i in range(trials)]
    if (scheme.interferer_pair.fine.family != "cubic"
            or scheme.user_k_pair.fine.family != "cubic"):
        # Coded fine lattices need the coset-search quantizer; run the
        # reference implementation trial by trial.
        outcomes = [run_trial(scheme, s, noiseless=noiseless) for s in seeds]
        parts = [{
            "direct_errors": np.array([o.direct_errors for o in outcomes]),
            "e1": np.array([o.e1 for o in outcomes]),
            "e2": np.array([o.e2 for o in outcomes]),
            "e3": np.array([o.e3 for o in outcomes]),
            "eff_power": np.array([o.effective_noise_power for o in outcomes]),
            "residual_power": np.array([o.residual_power for o in outcomes]),
        }]
    elif jobs == 1:
        parts = [_batch_trial_arrays(scheme, seeds, noiseless)]
    else:
        bounds = np.linspace(0, trials, jobs + 1).astype(int)
        chunks = [seeds[bounds[i]:bounds[i + 1]] for i in range(jobs)
                  if bounds[i] < bounds[i + 1]]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(
                lambda c: _batch_trial_arrays(scheme, c, noiseless), chunks))
    merged = {key: np.concatenate([p[key] for p in parts])
              for key in parts[0]}
    direct_counts = tuple(
        int(np.sum(merged["direct_errors"][:, j]))
        for j in range(scheme.config.K - 1))
    return CampaignReport(
        trials=trials,
        master_seed=master_seed,
        e1_count=int(np.sum(merged["e1"])),
        e2_count=int(np.sum(merged["e2"])),
        e3_count=int(np.sum(merged["e3"])),
        direct_error_counts=direct_counts,
        mean_effective_noise_power=float(np.mean(merged["eff_power"])),
        mean_residual_power=float(np.mean(merged["residual_power"])),
        config_echo=config_echo)
