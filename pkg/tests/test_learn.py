"""Policy optimization and distillation: gradients, advantages, determinism."""

import numpy as np
import pytest

from balancelab.distill import DaggerConfig, dagger_loss, distill_student
from balancelab.envs import BalanceEnv, standing_clip
from balancelab.nets import (AdamState, MlpParams, RunningNorm, clip_grad_norm,
                             gaussian_entropy, gaussian_logp, init_mlp,
                             init_policy, init_value, load_checkpoint,
                             mlp_forward, params_to_vec, policy_forward,
                             save_checkpoint, value_forward, vec_to_params)
from balancelab.observation import observation_layout
from balancelab.ppo import (PpoConfig, RolloutBuffer, TrainingDiverged,
                            _minibatch_loss_and_grads, gae_advantages,
                            ppo_update, train_teacher)
from balancelab.rewards import RewardConfig
from balancelab.simulator import nominal_sim_config
from balancelab.skeleton import desk_biped

J = 8


@pytest.fixture(scope="module")
def skel():
    return desk_biped()


@pytest.fixture(scope="module")
def hold_clip(skel):
    return standing_clip(skel, seconds=2.0)


def desk_reward():
    cfg = RewardConfig()
    cfg.close_feet_weight = 0.0
    return cfg


def tiny_cfg(**kw):
    kw.setdefault("hidden", (16, 8))
    kw.setdefault("horizon", 8)
    kw.setdefault("num_envs", 4)
    kw.setdefault("batch_size", 32)
    kw.setdefault("total_steps", 8 * 4 * 2)
    return PpoConfig(**kw)


def make_env_factory(skel, clip, **kw):
    kw.setdefault("sim_cfg", nominal_sim_config())
    kw.setdefault("reward_cfg", desk_reward())
    kw.setdefault("batch", 4)

    def factory(seed):
        return BalanceEnv(skel, clip, master_seed=seed, **kw)
    return factory


class TestPolicyForward:
    def test_zero_weights_give_zero_mean(self):
        policy = init_policy(np.random.default_rng(0), 6, 3, hidden=(8,))
        for w in policy.net.weights:
            w[:] = 0.0
        for b in policy.net.biases:
            b[:] = 0.0
        mean, _ = policy_forward(policy, np.ones((5, 6)))
        assert np.all(mean == 0.0)

    def test_fresh_rl_policy_has_unit_std(self):
        policy = init_policy(np.random.default_rng(0), 6, 3)
        _, std = policy_forward(policy, np.zeros((1, 6)))
        np.testing.assert_allclose(std, 1.0)

    def test_fresh_student_has_milli_std(self):
        student = init_policy(np.random.default_rng(0), 6, 3,
                              init_noise_std=0.001)
        _, std = policy_forward(student, np.zeros((1, 6)))
        np.testing.assert_allclose(std, 0.001)

    def test_nonfinite_obs_rejected(self):
        policy = init_policy(np.random.default_rng(0), 4, 2)
        bad = np.zeros((1, 4))
        bad[0, 1] = np.nan
        with pytest.raises(ValueError):
            policy_forward(policy, bad)

    def test_wrong_width_rejected(self):
        policy = init_policy(np.random.default_rng(0), 4, 2)
        with pytest.raises(ValueError):
            policy_forward(policy, np.zeros((1, 5)))


class TestAdvantages:
    def test_gamma_zero_is_one_step(self):
        rng = np.random.default_rng(1)
        T, B = 7, 3
        r = rng.normal(size=(T, B))
        v = rng.normal(size=(T + 1, B))
        dones = rng.random((T, B)) < 0.3
        adv, ret = gae_advantages(r, v, dones, gamma=0.0, lam=0.95)
        np.testing.assert_allclose(adv, r - v[:-1], atol=1e-12)
        np.testing.assert_allclose(ret, adv + v[:-1], atol=1e-12)

    def test_lambda_one_no_dones_matches_brute_force(self):
        rng = np.random.default_rng(2)
        T, B, gamma = 9, 2, 0.9
        r = rng.normal(size=(T, B))
        v = rng.normal(size=(T + 1, B))
        dones = np.zeros((T, B), dtype=bool)
        _, ret = gae_advantages(r, v, dones, gamma=gamma, lam=1.0)
        for t in range(T):
            brute = sum(gamma ** (k - t) * r[k] for k in range(t, T))
            brute = brute + gamma ** (T - t) * v[T]
            np.testing.assert_allclose(ret[t], brute, atol=1e-10)

    def test_all_zero_inputs_give_zero(self):
        T, B = 5, 4
        adv, ret = gae_advantages(np.zeros((T, B)), np.zeros((T + 1, B)),
                                  np.zeros((T, B), bool), 0.99, 0.95)
        assert np.all(adv == 0.0) and np.all(ret == 0.0)

    def test_done_blocks_bootstrap(self):
        T, B = 3, 1
        r = np.array([[1.0], [1.0], [1.0]])
        v = np.full((T + 1, B), 10.0)
        dones = np.array([[False], [True], [False]])
        adv, _ = gae_advantages(r, v, dones, gamma=0.5, lam=1.0)
        # step 1 ends the episode: its target is just r, no tail value
        assert adv[1, 0] == pytest.approx(1.0 - 10.0)

    def test_truncation_bootstraps_final_obs_value(self):
        T, B = 2, 1
        r = np.ones((T, B))
        v = np.full((T + 1, B), 3.0)
        dones = np.array([[True], [False]])
        trunc = np.array([[True], [False]])
        boot = np.full((T, B), 7.0)
        adv, _ = gae_advantages(np.ones((T, B)), v, dones, 0.5, 1.0,
                                truncated=trunc, boot_values=boot)
        # truncated step bootstraps the pre-reset observation's value
        assert adv[0, 0] == pytest.approx(1.0 + 0.5 * 7.0 - 3.0)


def _frozen_batch(seed=3, n=16, obs_dim=5, act_dim=3):
    rng = np.random.default_rng(seed)
    policy = init_policy(rng, obs_dim, act_dim, hidden=(8, 6),
                         init_noise_std=0.7)
    value = init_value(rng, obs_dim, hidden=(8, 6))
    obs = rng.normal(size=(n, obs_dim))
    actions = rng.normal(size=(n, act_dim))
    stale = init_policy(np.random.default_rng(9), obs_dim, act_dim,
                        hidden=(8, 6), init_noise_std=0.8)
    m_old, _ = policy_forward(stale, obs)
    logp_old = gaussian_logp(m_old, stale.log_std, actions)
    adv = rng.normal(size=n)
    returns = rng.normal(size=n)
    return policy, value, obs, actions, logp_old, adv, returns


def _surrogate(vec, template, obs, actions, logp_old, adv, returns, cfg):
    policy = init_policy(np.random.default_rng(0), obs.shape[1],
                         actions.shape[1], hidden=template)
    value = init_value(np.random.default_rng(0), obs.shape[1],
                       hidden=template)
    vec_to_params(vec, policy, value)
    mean, _ = policy_forward(policy, obs)
    logp = gaussian_logp(mean, policy.log_std, actions)
    ratio = np.exp(logp - logp_old)
    a_hat = (adv - adv.mean()) / (adv.std() + 1e-8)
    clipped = np.clip(ratio, 1 - cfg.clip_ratio, 1 + cfg.clip_ratio)
    pol = -np.minimum(ratio * a_hat, clipped * a_hat).mean()
    val = value_forward(value, obs)
    return (pol - cfg.entropy_coef * gaussian_entropy(policy.log_std)
            + cfg.value_coef * float(np.mean((val - returns) ** 2)))


class TestPpoGradients:
    CFG = dict(hidden=(8, 6), horizon=4, num_envs=4, batch_size=16,
               total_steps=16)

    def test_matches_central_differences(self):
        cfg = PpoConfig(**self.CFG)
        policy, value, obs, actions, logp_old, adv, returns = _frozen_batch()
        _, grad, _ = _minibatch_loss_and_grads(policy, value, obs, actions,
                                               logp_old, adv, returns, cfg)
        vec = params_to_vec(policy, value)
        eps = 1e-6
        fd = np.zeros_like(vec)
        for i in range(len(vec)):
            up, down = vec.copy(), vec.copy()
            up[i] += eps
            down[i] -= eps
            fd[i] = (_surrogate(up, (8, 6), obs, actions, logp_old, adv,
                                returns, cfg)
                     - _surrogate(down, (8, 6), obs, actions, logp_old, adv,
                                  returns, cfg)) / (2 * eps)
        meaningful = np.abs(fd) > 1e-6
        rel = np.abs(grad[meaningful] - fd[meaningful]) / np.abs(fd[meaningful])
        assert rel.max() < 1e-4

    def test_ratio_one_matches_unclipped_gradient(self):
        cfg = PpoConfig(**self.CFG)
        policy, value, obs, actions, _, adv, returns = _frozen_batch()
        mean, _ = policy_forward(policy, obs)
        logp_now = gaussian_logp(mean, policy.log_std, actions)
        _, grad, _ = _minibatch_loss_and_grads(
            policy, value, obs, actions, logp_now, adv, returns, cfg)
        wide = PpoConfig(**{**self.CFG, "clip_ratio": 1e6})
        _, unclipped, _ = _minibatch_loss_and_grads(
            policy, value, obs, actions, logp_now, adv, returns, wide)
        np.testing.assert_allclose(grad, unclipped, atol=1e-12)

    def test_grad_norm_clipping(self):
        g = np.full(25, 2.0)
        clipped, pre = clip_grad_norm(g, 0.2)
        assert pre == pytest.approx(10.0)
        assert np.linalg.norm(clipped) == pytest.approx(0.2)
        small = np.full(4, 0.01)
        kept, pre2 = clip_grad_norm(small, 0.2)
        np.testing.assert_array_equal(kept, small)
        assert pre2 == pytest.approx(np.linalg.norm(small))

    def test_entropy_coefficient_never_shrinks_std(self):
        cfg_lo = PpoConfig(**{**self.CFG, "entropy_coef": 0.0})
        cfg_hi = PpoConfig(**{**self.CFG, "entropy_coef": 0.05})
        stds = []
        for cfg in (cfg_lo, cfg_hi):
            policy, value, obs, actions, logp_old, adv, returns = \
                _frozen_batch()
            T, B = cfg.horizon, cfg.num_envs
            buf = RolloutBuffer(
                obs=obs.reshape(T, B, -1), actions=actions.reshape(T, B, -1),
                logp=logp_old.reshape(T, B), rewards=returns.reshape(T, B),
                dones=np.ones((T, B), bool), truncated=np.zeros((T, B), bool),
                values=np.zeros((T + 1, B)), boot_values=np.zeros((T, B)),
                stats={})
            adam = AdamState.fresh(params_to_vec(policy, value).size,
                                   lr=cfg.learning_rate,
                                   betas=cfg.adam_betas)
            ppo_update(policy, value, adam, buf, cfg,
                       np.random.default_rng(0))
            stds.append(np.exp(policy.log_std).mean())
        assert stds[1] >= stds[0]

    def test_bandit_improves_toward_target(self):
        rng = np.random.default_rng(0)
        policy = init_policy(rng, 1, 1, hidden=(8,), init_noise_std=1.0)
        value = init_value(rng, 1, hidden=(8,))
        cfg = PpoConfig(hidden=(8,), horizon=16, num_envs=16, batch_size=64,
                        total_steps=16 * 16, learning_rate=1e-2,
                        entropy_coef=0.0)
        vec = params_to_vec(policy, value)
        adam = AdamState.fresh(vec.size, lr=cfg.learning_rate,
                               betas=cfg.adam_betas)
        target = 0.7
        for _ in range(60):
            T, B = cfg.horizon, cfg.num_envs
            obs = np.ones((T * B, 1))
            mean, std = policy_forward(policy, obs)
            acts = mean + std * rng.normal(size=mean.shape)
            logp = gaussian_logp(mean, policy.log_std, acts)
            rew = -(acts[:, 0] - target) ** 2
            vals = value_forward(value, obs).reshape(T, B)
            buf = RolloutBuffer(
                obs=obs.reshape(T, B, 1), actions=acts.reshape(T, B, 1),
                logp=logp.reshape(T, B), rewards=rew.reshape(T, B),
                dones=np.ones((T, B), bool),
                truncated=np.zeros((T, B), bool),
                values=np.concatenate([vals, np.zeros((1, B))]),
                boot_values=np.zeros((T, B)), stats={})
            ppo_update(policy, value, adam, buf, cfg, rng)
        final_mean, _ = policy_forward(policy, np.ones((1, 1)))
        assert abs(final_mean[0, 0] - target) < 0.1

    def test_nonfinite_loss_aborts_with_diagnostics(self):
        cfg = PpoConfig(**self.CFG)
        policy, value, obs, actions, logp_old, adv, returns = _frozen_batch()
        T, B = cfg.horizon, cfg.num_envs
        buf = RolloutBuffer(
            obs=obs.reshape(T, B, -1), actions=actions.reshape(T, B, -1),
            logp=logp_old.reshape(T, B),
            rewards=np.full((T, B), np.inf),
            dones=np.zeros((T, B), bool), truncated=np.zeros((T, B), bool),
            values=np.zeros((T + 1, B)), boot_values=np.zeros((T, B)),
            stats={})
        adam = AdamState.fresh(params_to_vec(policy, value).size,
                               lr=1e-3, betas=(0.9, 0.999))
        with pytest.raises(TrainingDiverged) as info:
            ppo_update(policy, value, adam, buf, cfg,
                       np.random.default_rng(0))
        assert info.value.diagnostics


class TestConfigValidation:
    def test_gamma_bounds(self):
        with pytest.raises(ValueError):
            tiny_cfg(gamma=0.0)
        with pytest.raises(ValueError):
            tiny_cfg(gamma=1.5)

    def test_clip_positive(self):
        with pytest.raises(ValueError):
            tiny_cfg(clip_ratio=0.0)

    def test_batch_divides_buffer(self):
        with pytest.raises(ValueError):
            tiny_cfg(horizon=5, num_envs=3, batch_size=4)


class TestTrainTeacher:
    def test_same_seed_identical_parameters(self, skel, hold_clip):
        cfg = tiny_cfg()
        factory = make_env_factory(skel, hold_clip)
        out1, log1 = train_teacher(factory, cfg, seed=5)
        out2, log2 = train_teacher(factory, cfg, seed=5)
        np.testing.assert_array_equal(
            params_to_vec(out1["policy"], out1["value"]),
            params_to_vec(out2["policy"], out2["value"]))
        assert log1.rows == log2.rows

    def test_different_seed_differs(self, skel, hold_clip):
        cfg = tiny_cfg()
        factory = make_env_factory(skel, hold_clip)
        out1, _ = train_teacher(factory, cfg, seed=5)
        out2, _ = train_teacher(factory, cfg, seed=6)
        assert not np.array_equal(
            params_to_vec(out1["policy"], out1["value"]),
            params_to_vec(out2["policy"], out2["value"]))

    def test_log_has_reward_terms_and_csv(self, skel, hold_clip, tmp_path):
        cfg = tiny_cfg()
        factory = make_env_factory(skel, hold_clip)
        _, log = train_teacher(factory, cfg, seed=0)
        assert len(log.rows) == cfg.iterations
        assert any(k.startswith("rew_") for k in log.rows[0])
        assert "action_std" in log.rows[0]
        path = tmp_path / "log.csv"
        log.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert "mean_return" in header and "iteration" in header

    def test_checkpoint_roundtrip(self, skel, hold_clip, tmp_path):
        cfg = tiny_cfg()
        out, _ = train_teacher(make_env_factory(skel, hold_clip), cfg, seed=1)
        path = tmp_path / "teacher.npz"
        save_checkpoint(path, out["policy"], out["norm"],
                        value=out["value"], config_hash="h1",
                        layout_hash="l1")
        back = load_checkpoint(path, expect_layout_hash="l1")
        np.testing.assert_array_equal(
            params_to_vec(out["policy"], out["value"]),
            params_to_vec(back["policy"], back["value"]))
        assert back["config_hash"] == "h1"
        with pytest.raises(ValueError):
            load_checkpoint(path, expect_layout_hash="other")


class TestDistillation:
    def test_self_distillation_loss_vanishes(self):
        """A student with the teacher's architecture and inputs can match it
        exactly, so the regression loss must collapse toward zero."""
        rng = np.random.default_rng(0)
        obs_dim, act_dim = 6, 4
        teacher = init_policy(rng, obs_dim, act_dim, hidden=(8,))
        student = init_policy(np.random.default_rng(1), obs_dim, act_dim,
                              hidden=(8,), init_noise_std=0.001)
        norm = RunningNorm(obs_dim)
        norm.frozen = True
        from balancelab.distill import _regression_pass
        dcfg = DaggerConfig(hidden=(8,), batch_size=32, iterations=1)
        adam = AdamState.fresh(params_to_vec(student).size,
                               lr=dcfg.learning_rate, betas=dcfg.adam_betas)
        obs = rng.normal(size=(256, obs_dim))
        labels, _ = policy_forward(teacher, obs)
        losses = [dagger_loss(student, norm, obs, labels)]
        for _ in range(300):
            _regression_pass(student, norm, adam, obs, labels, dcfg,
                             np.random.default_rng(2))
            losses.append(dagger_loss(student, norm, obs, labels))
        assert losses[-1] < 1e-6
        assert losses[-1] < losses[0] * 1e-3

    def test_holdout_gap_shrinks(self, skel, hold_clip):
        teacher_out, _ = train_teacher(make_env_factory(skel, hold_clip),
                                       tiny_cfg(), seed=0)
        dcfg = DaggerConfig(iterations=4, horizon=8, hidden=(16, 8),
                            batch_size=32)
        student_factory = make_env_factory(skel, hold_clip, mode="student")
        _, log = distill_student(teacher_out, student_factory, dcfg, seed=0)
        assert log.rows[-1]["holdout_gap"] < log.rows[0]["holdout_gap_before"]

    def test_student_std_stays_at_init(self, skel, hold_clip):
        teacher_out, _ = train_teacher(make_env_factory(skel, hold_clip),
                                       tiny_cfg(), seed=0)
        dcfg = DaggerConfig(iterations=2, horizon=8, hidden=(16, 8),
                            batch_size=32, init_noise_std=0.001)
        student_factory = make_env_factory(skel, hold_clip, mode="student")
        out, _ = distill_student(teacher_out, student_factory, dcfg, seed=0)
        _, std = policy_forward(out["policy"],
                                np.zeros((1, out["norm"].mean.size)))
        np.testing.assert_allclose(std, 0.001)

    def test_loss_invariant_to_ou_seed_at_zero_sigma(self, skel, hold_clip):
        """With the noise amplitude at zero the sensor-noise stream must not
        touch anything the regression sees."""
        teacher_out, _ = train_teacher(make_env_factory(skel, hold_clip),
                                       tiny_cfg(), seed=0)
        dcfg = DaggerConfig(iterations=2, horizon=8, hidden=(16, 8),
                            batch_size=32)

        def run(master_seed):
            def factory(seed):
                return BalanceEnv(skel, hold_clip,
                                  sim_cfg=nominal_sim_config(),
                                  reward_cfg=desk_reward(), batch=4,
                                  mode="student", ou_sigma=0.0,
                                  master_seed=seed)
            # same dynamics seed for the env, different master seed only
            # shifts the noise streams, which sigma=0 silences
            out, log = distill_student(teacher_out, factory, dcfg,
                                       seed=master_seed)
            return log

        # identical env seeds, OU generators differ per reset call count
        log_a = run(0)
        log_b = run(0)
        assert [r["loss"] for r in log_a.rows] == \
            [r["loss"] for r in log_b.rows]

    def test_student_layout_sees_no_global_reference_root(self, skel):
        layout = observation_layout(skel)
        names = {b["name"] for b in layout["student"]}
        assert not any("root_pos" in n or "global" in n for n in names)
        # every positional block is either localized or a difference
        positional = [n for n in names if "pos" in n and n != "dof_pos"]
        assert positional
        for name in positional:
            assert "local" in name or "diff" in name


class TestRunningNorm:
    def test_tracks_mean_and_var(self):
        rng = np.random.default_rng(0)
        norm = RunningNorm(3)
        data = rng.normal(2.0, 1.5, size=(1000, 3))
        for chunk in np.split(data, 10):
            norm.update(chunk)
        np.testing.assert_allclose(norm.mean, data.mean(axis=0), atol=1e-9)
        np.testing.assert_allclose(norm.var, data.var(axis=0), atol=1e-9)

    def test_frozen_stops_updates(self):
        norm = RunningNorm(2)
        norm.update(np.ones((4, 2)))
        norm.frozen = True
        before = norm.mean.copy()
        norm.update(np.full((4, 2), 100.0))
        np.testing.assert_array_equal(norm.mean, before)

    def test_clips_extremes(self):
        norm = RunningNorm(1, clip=10.0)
        norm.update(np.random.default_rng(0).normal(size=(100, 1)))
        out = norm(np.array([[1e9]]))
        assert abs(out[0, 0]) <= 10.0
