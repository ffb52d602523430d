"""Synthetic environment: generation protocol, censoring, determinism."""

import io
import math

import numpy as np
import pytest

from pbmrank.core import ContextualizedAction
from pbmrank.env import (
    EnvConfig,
    HiddenModel,
    ReplayEnv,
    SyntheticEnv,
    contextualize_batch,
    export_dataset,
    gen_vectors,
    latent_reward,
    position_bias_true,
    simulate_feedback,
    sparsify,
)
from pbmrank.core import contextualize, ActionVector, ContextVector


def _cfg(**kw):
    base = dict(K=25, L=5, d_a=5, d_c=10, seed=3)
    base.update(kw)
    return EnvConfig(**base)


class TestSparsify:
    def test_below_cutoff_zeroed(self):
        out = sparsify(np.array([0.05, 0.0999, 0.2]))
        np.testing.assert_array_equal(out, [0.0, 0.0, 0.2])

    def test_boundary_kept(self):
        # strictly-below rule: exactly 0.1 survives
        out = sparsify(np.array([0.1]))
        assert out[0] == 0.1

    def test_sparsity_fraction(self):
        rng = np.random.default_rng(0)
        values = sparsify(rng.random(100_000))
        frac = np.mean(values == 0.0)
        assert 0.095 <= frac <= 0.105

    def test_gen_vectors_shapes_and_range(self):
        cfg = _cfg()
        actions, context = gen_vectors(cfg, np.random.default_rng(1))
        assert actions.shape == (25, 5) and context.shape == (10,)
        for arr in (actions, context):
            assert np.all((arr == 0.0) | (arr >= 0.1))
            assert np.all(arr < 1.0)


class TestContextualizeBatch:
    def test_matches_single_vector_transform(self):
        rng = np.random.default_rng(2)
        actions, context = gen_vectors(_cfg(), rng)
        batch = contextualize_batch(actions, context)
        for k in range(actions.shape[0]):
            single = contextualize(
                ActionVector(id="x", features=actions[k]),
                ContextVector(features=context),
            )
            np.testing.assert_array_equal(batch[k], single.features)


class TestLatentReward:
    def test_ceiling_clamp(self):
        model = HiddenModel(w=np.array([1.0, 0.0]))
        a = ContextualizedAction(id="x", features=np.array([1.05, 0.0]))
        cfg = _cfg(d_a=1, d_c=1, noise_halfwidth=0.0)
        # inner product 1.05, no noise: clamped to 1
        assert latent_reward(model, a, cfg, np.random.default_rng(0)) == 1.0

    def test_binary_threshold_boundary_inclusive(self):
        model = HiddenModel(w=np.array([1.0, 0.0]))
        a = ContextualizedAction(id="x", features=np.array([0.5, 0.0]))
        cfg = _cfg(d_a=1, d_c=1, reward_kind="binary", binarize_threshold=0.5,
                   noise_halfwidth=0.0)
        assert latent_reward(model, a, cfg, np.random.default_rng(0)) == 1.0

    def test_noise_is_mean_zero(self):
        model = HiddenModel(w=np.array([1.0, 0.0]))
        a = ContextualizedAction(id="x", features=np.array([0.5, 0.0]))
        cfg = _cfg(d_a=1, d_c=1)
        rng = np.random.default_rng(5)
        draws = [latent_reward(model, a, cfg, rng) for _ in range(10_000)]
        assert abs(np.mean(draws) - 0.5) < 0.005


class TestPositionBiasTrue:
    def test_zero_based_exponential(self):
        q = position_bias_true(_cfg(L=3)).q
        np.testing.assert_allclose(q, [1.0, math.exp(-1), math.exp(-2)])

    def test_one_based_exponential(self):
        q = position_bias_true(_cfg(L=2, position_indexing="one_based")).q
        np.testing.assert_allclose(q, [math.exp(-1), math.exp(-2)])

    def test_eps_schedule_scales_top_position(self):
        cfg = _cfg(L=3, bias_schedule="eps_exp_decay", bias_epsilon=0.5)
        q = position_bias_true(cfg).q
        assert q[0] == pytest.approx(0.5)
        np.testing.assert_allclose(q, 0.5 * np.exp(-np.arange(3)))

    def test_zero_eps_reduces_to_plain_decay(self):
        cfg = _cfg(L=4, bias_schedule="eps_exp_decay", bias_epsilon=0.0)
        np.testing.assert_array_equal(
            position_bias_true(cfg).q, position_bias_true(_cfg(L=4)).q
        )


class TestSimulateFeedback:
    def test_top_position_passthrough(self):
        cfg = _cfg(L=2)
        z = simulate_feedback(
            np.array([0.8, 0.6]), np.array([1.0, 0.5]), cfg, np.random.default_rng(0)
        )
        assert z[0] == pytest.approx(0.8)

    def test_attenuation_values(self):
        cfg = _cfg(L=3)
        q = position_bias_true(cfg).q
        z = simulate_feedback(np.array([1.0, 1.0, 1.0]), q, cfg, np.random.default_rng(0))
        np.testing.assert_allclose(z, q)
        assert z[2] == pytest.approx(math.exp(-2))

    def test_bernoulli_mode_concentration(self):
        cfg = _cfg(L=1, censoring="bernoulli")
        rng = np.random.default_rng(8)
        draws = [
            simulate_feedback(np.array([1.0]), np.array([0.5]), cfg, rng)[0]
            for _ in range(10_000)
        ]
        assert 0.48 <= np.mean(draws) <= 0.52

    def test_expected_censored_value_factorizes(self):
        # E[Z | A] = q * E[reward] in both censoring modes (2% tolerance)
        for mode in ("attenuation", "bernoulli"):
            cfg = _cfg(L=3, censoring=mode, seed=11)
            env = SyntheticEnv(cfg)
            sel = np.array([0, 1, 2])
            tot_z = np.zeros(3)
            n = 4000
            for _ in range(n):
                rd = env.new_round()
                z, _ = env.feedback(rd, sel)
                tot_z += z
            # compare against q * mean expected reward of the selected items
            env2 = SyntheticEnv(cfg)
            exp_rewards = np.zeros(3)
            for _ in range(n):
                rd = env2.new_round()
                exp_rewards += rd.expected_rewards[sel]
            expected = env.true_bias() * exp_rewards / n
            np.testing.assert_allclose(tot_z / n, expected, rtol=0.02, atol=0.002)


class TestSyntheticEnv:
    def test_same_seed_bit_identical_streams(self):
        cfg = _cfg(seed=21)
        env1, env2 = SyntheticEnv(cfg), SyntheticEnv(cfg)
        for _ in range(30):
            r1, r2 = env1.new_round(), env2.new_round()
            np.testing.assert_array_equal(r1.features, r2.features)
            sel = np.arange(cfg.L)
            z1, rew1 = env1.feedback(r1, sel)
            z2, rew2 = env2.feedback(r2, sel)
            np.testing.assert_array_equal(z1, z2)
            np.testing.assert_array_equal(rew1, rew2)

    def test_noise_seed_changes_feedback_not_dataset(self):
        cfg = _cfg(seed=22)
        env1 = SyntheticEnv(cfg, noise_seed=1)
        env2 = SyntheticEnv(cfg, noise_seed=2)
        r1, r2 = env1.new_round(), env2.new_round()
        np.testing.assert_array_equal(r1.features, r2.features)
        np.testing.assert_array_equal(r1.mu, r2.mu)
        sel = np.arange(cfg.L)
        z1, _ = env1.feedback(r1, sel)
        z2, _ = env2.feedback(r2, sel)
        assert not np.array_equal(z1, z2)

    def test_hidden_vector_unit_norm(self):
        for sign in ("positive", "signed"):
            env = SyntheticEnv(_cfg(hidden_sign=sign))
            assert np.linalg.norm(env.model.w) == pytest.approx(1.0)
            if sign == "positive":
                assert np.all(env.model.w >= 0.0)

    def test_oracle_value_dominates_any_slate(self):
        env = SyntheticEnv(_cfg(seed=5))
        rng = np.random.default_rng(0)
        for _ in range(20):
            rd = env.new_round()
            oracle = env.oracle_value(rd)
            for _ in range(10):
                sel = rng.permutation(env.cfg.K)[: env.cfg.L]
                assert oracle >= env.expected_slate_value(rd, sel) - 1e-12

    def test_expected_rewards_in_unit_interval(self):
        for kind in ("real", "binary"):
            env = SyntheticEnv(_cfg(reward_kind=kind, binarize_threshold=0.2))
            for _ in range(10):
                rd = env.new_round()
                assert np.all((rd.expected_rewards >= 0.0) & (rd.expected_rewards <= 1.0))

    def test_expected_reward_matches_monte_carlo(self):
        cfg = _cfg(seed=6)
        env = SyntheticEnv(cfg)
        rd = env.new_round()
        rng = np.random.default_rng(1)
        k = int(np.argmax(rd.mu))
        draws = np.clip(
            rd.mu[k] + rng.uniform(-cfg.noise_halfwidth, cfg.noise_halfwidth, 200_000),
            0.0, 1.0,
        )
        assert abs(draws.mean() - rd.expected_rewards[k]) < 1e-3

    def test_clicks_from_feedback_binary_and_calibrated(self):
        env = SyntheticEnv(_cfg(seed=9, L=2))
        clicks = np.array([env.clicks_from_feedback(np.array([0.3, 1.0])) for _ in range(5000)])
        assert set(np.unique(clicks)) <= {0, 1}
        assert abs(clicks[:, 0].mean() - 0.3) < 0.02
        assert np.all(clicks[:, 1] == 1)

    def test_candidate_ids_sort_like_indices(self):
        env = SyntheticEnv(_cfg())
        rd = env.new_round()
        assert list(rd.action_ids) == sorted(rd.action_ids)


class TestDatasetExport:
    def test_round_trip_replay_matches_original(self):
        cfg = _cfg(seed=31, L=3)
        env = SyntheticEnv(cfg, noise_seed=77)
        buf = io.StringIO()
        export_dataset(SyntheticEnv(cfg), 20, buf)
        buf.seek(0)
        replay = ReplayEnv(buf, noise_seed=77)
        assert replay.horizon == 20
        assert replay.cfg == cfg
        sel = np.arange(3)
        for _ in range(20):
            r1, r2 = env.new_round(), replay.new_round()
            np.testing.assert_array_equal(r1.features, r2.features)
            np.testing.assert_array_equal(r1.mu, r2.mu)
            z1, _ = env.feedback(r1, sel)
            z2, _ = replay.feedback(r2, sel)
            np.testing.assert_array_equal(z1, z2)

    def test_header_carries_config(self):
        buf = io.StringIO()
        export_dataset(SyntheticEnv(_cfg(seed=1)), 2, buf)
        text = buf.getvalue()
        assert text.startswith("#pbmrank-dataset\t1\n")
        assert '"seed": 1' in text.splitlines()[1]

    def test_rejects_foreign_files(self):
        with pytest.raises(ValueError):
            ReplayEnv(io.StringIO("not a dataset\n"))


class TestConfigValidation:
    def test_slate_larger_than_catalog_rejected(self):
        with pytest.raises(ValueError):
            _cfg(K=3, L=5)

    @pytest.mark.parametrize(
        "field,value",
        [
            ("reward_kind", "other"),
            ("bias_schedule", "linear"),
            ("position_indexing", "two_based"),
            ("censoring", "drop"),
            ("bias_epsilon", 1.0),
            ("binarize_threshold", 0.0),
        ],
    )
    def test_bad_enum_values_rejected(self, field, value):
        with pytest.raises(ValueError):
            _cfg(**{field: value})
