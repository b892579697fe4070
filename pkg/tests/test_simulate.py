"""Monte Carlo pipeline: encoding, channel, three-stage decoding, events."""

import math

import numpy as np
import pytest

from lsl.errors import InvariantViolationError
from lsl.lattices import (
    in_voronoi,
    make_construction_a_pair,
    make_cubic_pair,
    mod_lattice,
    sample_dither,
)
from lsl.rates import SystemConfig, mmse_coefficients
from lsl.simulate import (
    Scheme,
    TrialOutcome,
    apply_channel,
    classify_events,
    decode_direct,
    decode_mod_sum,
    decode_user_k,
    derive_trial_seed,
    encode_interferer,
    encode_user_k,
    run_campaign,
    run_trial,
    subtract_interference,
    wilson_interval,
)


def default_scheme(q=2, dim=2):
    cfg = SystemConfig(K=3, P=(10, 10, 10), a=(12, 12))
    return Scheme.for_config(cfg, make_cubic_pair(q, dim))


class TestEncoding:
    def test_zero_codeword_zero_dither(self):
        scheme = default_scheme()
        origin = scheme.interferer_pair.fine.point((0, 0))
        x = encode_interferer(scheme, 1, origin, np.zeros(2))
        assert np.all(x == 0.0)
        assert np.all(encode_user_k(scheme, origin, np.zeros(2)) == 0.0)

    def test_power_compliance(self):
        scheme = default_scheme()
        rng = np.random.default_rng(42)
        point = scheme.interferer_points[3]
        n = scheme.dimension
        for user in (1, 2):
            target = scheme.aligned_power / scheme.config.a[user - 1]
            powers = [
                float(np.sum(encode_interferer(
                    scheme, user, point,
                    sample_dither(scheme.interferer_pair.coarse, rng)) ** 2)) / n
                for _ in range(20_000)]
            assert np.mean(powers) == pytest.approx(target, rel=0.01)
            assert target <= scheme.config.P[user - 1] + 1e-12
        point_k = scheme.user_k_points[1]
        powers_k = [
            float(np.sum(encode_user_k(
                scheme, point_k,
                sample_dither(scheme.user_k_pair.coarse, rng)) ** 2)) / n
            for _ in range(20_000)]
        assert np.mean(powers_k) == pytest.approx(scheme.config.p_k, rel=0.01)

    def test_alignment_exact_algebra(self):
        # every interferer arrives at receiver K with amplitude sqrt(P)
        scheme = default_scheme()
        rng = np.random.default_rng(7)
        for user in (1, 2):
            point = scheme.interferer_points[2]
            d = sample_dither(scheme.interferer_pair.coarse, rng)
            x = encode_interferer(scheme, user, point, d)
            u = mod_lattice(scheme.interferer_pair.coarse, point.embed() + d)
            arrived = math.sqrt(scheme.config.a[user - 1]) * x
            assert np.allclose(
                arrived, math.sqrt(scheme.aligned_power) * u, rtol=1e-12)

    def test_rejects_foreign_codeword(self):
        scheme = default_scheme()
        alien = scheme.interferer_pair.fine.point((7, 7))
        with pytest.raises(ValueError):
            encode_interferer(scheme, 1, alien, np.zeros(2))
        with pytest.raises(ValueError):
            encode_interferer(scheme, 5, scheme.interferer_points[0],
                              np.zeros(2))

    def test_rejects_unnormalized_pair(self):
        from lsl.lattices import Lattice, NestedPair
        fine = Lattice(dimension=1, family="cubic", scale_sq=1.0)
        coarse = Lattice(dimension=1, family="cubic", scale_sq=4.0)
        pair = NestedPair(fine=fine, coarse=coarse, q=2,
                          nesting_ratio=2, rate_per_dim=1.0)
        cfg = SystemConfig(K=3, P=(10, 10, 10), a=(12, 12))
        with pytest.raises(ValueError):
            Scheme.for_config(cfg, pair)


class TestChannel:
    def test_noiseless_identity(self):
        scheme = default_scheme()
        rng = np.random.default_rng(3)
        points = [scheme.interferer_points[i] for i in (1, 3)]
        dithers = [sample_dither(scheme.interferer_pair.coarse, rng)
                   for _ in range(2)]
        signals = [encode_interferer(scheme, i + 1, t, d)
                   for i, (t, d) in enumerate(zip(points, dithers))]
        d_k = sample_dither(scheme.user_k_pair.coarse, rng)
        signal_k = encode_user_k(scheme, scheme.user_k_points[2], d_k)
        direct, y_k = apply_channel(scheme, signals, signal_k, rng,
                                    noiseless=True)
        for x, y in zip(signals, direct):
            assert np.array_equal(x, y)
        us = [mod_lattice(scheme.interferer_pair.coarse, t.embed() + d)
              for t, d in zip(points, dithers)]
        u_k = mod_lattice(scheme.user_k_pair.coarse,
                          scheme.user_k_points[2].embed() + d_k)
        expected = math.sqrt(scheme.aligned_power) * (us[0] + us[1]) \
            + math.sqrt(scheme.config.p_k) * u_k
        assert np.allclose(y_k, expected, rtol=1e-12)

    def test_direct_links_are_interference_free(self):
        scheme = default_scheme()
        signals = [np.array([1.0, 2.0]), np.array([-3.0, 0.5])]
        direct_a, _ = apply_channel(scheme, signals, np.zeros(2),
                                    np.random.default_rng(0), noiseless=True)
        other = [signals[0], np.array([100.0, -50.0])]
        direct_b, _ = apply_channel(scheme, other, np.ones(2),
                                    np.random.default_rng(0), noiseless=True)
        assert np.array_equal(direct_a[0], direct_b[0])

    def test_noise_variance(self):
        scheme = default_scheme()
        rng = np.random.default_rng(11)
        zero = [np.zeros(2), np.zeros(2)]
        samples = []
        for _ in range(60_000):
            direct, y_k = apply_channel(scheme, zero, np.zeros(2), rng)
            samples.extend([direct[0], direct[1], y_k])
        flat = np.concatenate(samples)
        assert np.var(flat) == pytest.approx(1.0, rel=0.01)


class TestDecoding:
    def test_noiseless_round_trip_exhaustive(self):
        # zero channel noise: every stage recovers every codeword combo
        scheme = default_scheme(q=2, dim=1)
        rng = np.random.default_rng(5)
        pair = scheme.interferer_pair
        for t1 in scheme.interferer_points:
            for t2 in scheme.interferer_points:
                for tk in scheme.user_k_points:
                    dithers = [sample_dither(pair.coarse, rng)
                               for _ in range(2)]
                    d_k = sample_dither(scheme.user_k_pair.coarse, rng)
                    signals = [encode_interferer(scheme, 1, t1, dithers[0]),
                               encode_interferer(scheme, 2, t2, dithers[1])]
                    signal_k = encode_user_k(scheme, tk, d_k)
                    direct, y_k = apply_channel(scheme, signals, signal_k,
                                                rng, noiseless=True)
                    assert decode_direct(scheme, 1, direct[0],
                                         dithers[0]).coords == t1.coords
                    assert decode_direct(scheme, 2, direct[1],
                                         dithers[1]).coords == t2.coords
                    s_hat = decode_mod_sum(scheme, y_k, dithers)
                    assert s_hat.coords == pair.reduce(t1 + t2).coords
                    residual = subtract_interference(scheme, y_k, s_hat,
                                                     dithers)
                    assert decode_user_k(scheme, residual,
                                         d_k).coords == tk.coords

    def test_mod_sum_collapse_with_unit_alpha(self):
        # zero dither, zero noise, silent user K: folding y_K/sqrt(P)
        # directly (alpha = 1) returns the folded codeword sum exactly
        scheme = default_scheme(q=2, dim=2)
        pair = scheme.interferer_pair
        zero = np.zeros(2)
        for t1 in scheme.interferer_points[:2]:
            for t2 in scheme.interferer_points[2:]:
                signals = [encode_interferer(scheme, 1, t1, zero),
                           encode_interferer(scheme, 2, t2, zero)]
                silent_k = np.zeros(2)
                _, y_k = apply_channel(scheme, signals, silent_k,
                                       np.random.default_rng(0),
                                       noiseless=True)
                folded = mod_lattice(pair.coarse,
                                     y_k / math.sqrt(scheme.aligned_power))
                expected = pair.reduce(t1 + t2).embed()
                assert np.allclose(folded, expected, atol=1e-9)

    def test_residual_equals_unwrapped_value(self):
        scheme = default_scheme(q=2, dim=2)
        pair = scheme.interferer_pair
        rng = np.random.default_rng(8)
        hits = 0
        for _ in range(200):
            points = [scheme.interferer_points[i]
                      for i in rng.integers(0, 4, size=2)]
            t_k = scheme.user_k_points[rng.integers(0, 4)]
            dithers = [sample_dither(pair.coarse, rng) for _ in range(2)]
            d_k = sample_dither(scheme.user_k_pair.coarse, rng)
            signals = [encode_interferer(scheme, i + 1, t, d)
                       for i, (t, d) in enumerate(zip(points, dithers))]
            signal_k = encode_user_k(scheme, t_k, d_k)
            _, y_k = apply_channel(scheme, signals, signal_k, rng)
            s_hat = decode_mod_sum(scheme, y_k, dithers)
            if s_hat.coords != pair.reduce(points[0] + points[1]).coords:
                continue
            u_k = mod_lattice(scheme.user_k_pair.coarse, t_k.embed() + d_k)
            z_k = y_k - math.sqrt(scheme.config.a[0]) * signals[0] \
                - math.sqrt(scheme.config.a[1]) * signals[1] - signal_k
            unwrapped = scheme.gamma * u_k \
                + z_k / math.sqrt(scheme.aligned_power)
            residual = subtract_interference(scheme, y_k, s_hat, dithers)
            if in_voronoi(pair.coarse, unwrapped):
                assert np.allclose(residual, unwrapped, atol=1e-9)
                hits += 1
        assert hits > 100

    def test_direct_error_monotone_in_snr(self):
        pair = make_cubic_pair(3, 2)
        rates = []
        for snr in (5.0, 10.0, 20.0):
            cfg = SystemConfig(K=3, P=(snr, snr, 0.5), a=(1, 1))
            rep = run_campaign(Scheme.for_config(cfg, pair), 4000, 314)
            rates.append(rep.direct_error_rate_pooled)
        assert rates[0] > rates[1] > rates[2] > 0

    def test_direct_error_tiny_at_high_snr(self):
        # q=2, N=1 at physical SNR 100; per-coordinate error is bounded
        # by 2Q(d) with d = (fine half cell)/(post-MMSE noise std)
        cfg = SystemConfig(K=3, P=(100, 100, 2), a=(1, 1))
        scheme = Scheme.for_config(cfg, make_cubic_pair(2, 1))
        rep = run_campaign(scheme, 10_000, 271)
        rate = rep.direct_error_rate_pooled
        half_cell = scheme.interferer_pair.fine.scale / 2
        post_mmse_std = math.sqrt(1.0 / 101.0)
        q_bound = math.erfc(half_cell / post_mmse_std / math.sqrt(2))
        assert q_bound < 1e-3
        assert rate <= max(q_bound * 10, 1e-3)

    def test_mod_sum_error_decreases_with_aligned_power(self):
        pair = make_cubic_pair(2, 2)
        counts = []
        for gain in (0.35, 0.7, 1.4):
            cfg = SystemConfig(K=3, P=(10, 10, 0.5), a=(gain, gain))
            rep = run_campaign(Scheme.for_config(cfg, pair), 4000, 161)
            counts.append(rep.e1_count)
        assert counts[0] > counts[1] > counts[2]


class TestEvents:
    def test_classification_table(self):
        assert classify_events(True, True, True) == (False, False, False)
        assert classify_events(False, True, True) == (True, False, False)
        # forced wrong mod-sum excludes the trial from e2/e3 accounting
        assert classify_events(False, False, False) == (True, False, False)
        assert classify_events(True, False, False) == (False, True, False)
        assert classify_events(True, True, False) == (False, False, True)

    def test_outcome_rejects_inconsistent_flags(self):
        with pytest.raises(InvariantViolationError):
            TrialOutcome(direct_errors=(False,), e1=True, e2=True, e3=False,
                         effective_noise_power=0.0, residual_power=0.0)
        with pytest.raises(InvariantViolationError):
            TrialOutcome(direct_errors=(False,), e1=True, e2=False, e3=True,
                         effective_noise_power=0.0, residual_power=0.0)

    def test_consistency_across_noisy_trials(self):
        # a low-power config where all three events actually fire
        cfg = SystemConfig(K=3, P=(10, 10, 1.5), a=(0.3, 0.3))
        scheme = Scheme.for_config(cfg, make_cubic_pair(2, 2))
        flags = [run_trial(scheme, derive_trial_seed(55, i))
                 for i in range(2000)]
        assert any(o.e1 for o in flags)
        assert any(o.e3 for o in flags)
        for o in flags:
            assert not (o.e1 and o.e2)
            assert not (o.e3 and (o.e1 or o.e2))

    def test_e2_rate_monotone_in_mu(self):
        pair = make_construction_a_pair(2, 3, [(1, 1, 1)])
        counts = []
        for p_aligned, p_k in ((3.0, 1.5), (4.5, 0.125), (12.0, 0.2)):
            gain = p_aligned / 10.0
            cfg = SystemConfig(K=3, P=(10, 10, p_k), a=(gain, gain))
            rep = run_campaign(Scheme.for_config(cfg, pair), 3000, 2026)
            counts.append(rep.e2_count)
        assert counts[0] > counts[1] > counts[2]


class TestEffectiveNoise:
    def test_matches_mmse_formula(self):
        scheme = default_scheme()
        rep = run_campaign(scheme, 30_000, 1001)
        predicted = mmse_coefficients(scheme.config).effective_noise_var
        assert rep.mean_effective_noise_power == pytest.approx(predicted,
                                                               rel=0.05)


class TestReproducibility:
    def test_seed_derivation_is_sha256(self):
        import hashlib
        digest = hashlib.sha256(b"77:3").digest()
        assert derive_trial_seed(77, 3) == int.from_bytes(digest[:8], "big")
        seeds = {derive_trial_seed(1, i) for i in range(1000)}
        assert len(seeds) == 1000

    def test_same_master_seed_same_report(self):
        scheme = default_scheme()
        a = run_campaign(scheme, 800, 5)
        b = run_campaign(scheme, 800, 5)
        assert a == b

    def test_thread_count_invariance(self):
        scheme = default_scheme()
        a = run_campaign(scheme, 1000, 9, jobs=1)
        b = run_campaign(scheme, 1000, 9, jobs=4)
        c = run_campaign(scheme, 1000, 9, jobs=7)
        assert a == b == c

    def test_campaign_matches_reference_trials(self):
        # the vectorized engine must reproduce run_trial bit for bit
        for scheme in (default_scheme(q=2, dim=2), default_scheme(q=3, dim=3)):
            seeds = [derive_trial_seed(31, i) for i in range(400)]
            outcomes = [run_trial(scheme, s) for s in seeds]
            rep = run_campaign(scheme, 400, 31)
            assert rep.e1_count == sum(o.e1 for o in outcomes)
            assert rep.e2_count == sum(o.e2 for o in outcomes)
            assert rep.e3_count == sum(o.e3 for o in outcomes)
            assert rep.direct_error_counts == tuple(
                sum(o.direct_errors[j] for o in outcomes) for j in range(2))
            assert rep.mean_effective_noise_power == float(
                np.mean([o.effective_noise_power for o in outcomes]))
            assert rep.mean_residual_power == float(
                np.mean([o.residual_power for o in outcomes]))

    def test_noiseless_campaign_all_clean(self):
        scheme = default_scheme()
        rep = run_campaign(scheme, 300, 77, noiseless=True)
        assert rep.e1_count == rep.e2_count == rep.e3_count == 0
        assert rep.direct_error_counts == (0, 0)

    def test_trials_must_be_positive(self):
        with pytest.raises(ValueError):
            run_campaign(default_scheme(), 0, 1)

    def test_default_campaign_wall_time(self):
        import time
        scheme = default_scheme()
        start = time.perf_counter()
        run_campaign(scheme, 10_000, 1)
        assert time.perf_counter() - start < 10.0


class TestWilson:
    def test_basic_properties(self):
        lo, hi = wilson_interval(50, 100)
        assert 0.4 < lo < 0.5 < hi < 0.6
        lo0, hi0 = wilson_interval(0, 100)
        assert lo0 == pytest.approx(0.0, abs=1e-12)
        assert 0 < hi0 < 0.05
        lo1, hi1 = wilson_interval(100, 100)
        assert hi1 == pytest.approx(1.0, abs=1e-12)

    def test_contains_truth_mostly(self):
        rng = np.random.default_rng(13)
        p = 0.2
        cover = 0
        for _ in range(400):
            count = rng.binomial(500, p)
            lo, hi = wilson_interval(count, 500)
            cover += lo <= p <= hi
        assert cover / 400 > 0.9
