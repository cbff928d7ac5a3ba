"""Reward engine vs. an independent straight-line oracle plus spot values."""
import math

import numpy as np
import pytest

from balancelab.rewards import (ContactLabels, RewardBreakdown, RewardConfig,
                                compute_reward, contact_labels,
                                mass_scaled_contact_force_threshold)

from helpers import J, K, make_body, make_info
from oracles import oracle_contact_labels, oracle_reward


def make_labels(B: int, rng: np.random.Generator | None = None,
                robot=(True, False), ref=(True, False)) -> ContactLabels:
    if rng is None:
        return ContactLabels(
            robot=np.tile(np.array(robot), (B, 1)),
            reference=np.tile(np.array(ref), (B, 1)))
    reference = rng.integers(0, 2, (B, 2)).astype(bool)
    reference[~reference.any(axis=1), 0] = True
    return ContactLabels(robot=rng.random((B, 2)) < 0.5, reference=reference)


def run(body, labels=None, info=None, cfg=None, action=None,
        prev_action=None, air=None, terminated=None):
    B = body.com.shape[0]
    return compute_reward(
        body, body, labels if labels is not None else make_labels(B),
        action if action is not None else np.zeros((B, J)),
        prev_action if prev_action is not None else np.zeros((B, J)),
        air if air is not None else np.zeros((B, 2)),
        info if info is not None else make_info(B),
        cfg if cfg is not None else RewardConfig(), terminated)


class TestContactLabels:
    def test_grounded_and_lower_foot(self):
        cfg = RewardConfig()
        lab = contact_labels(np.array([[50.0, 0.0]]), np.array([[0.0, 0.3]]),
                             cfg)
        assert lab.robot.tolist() == [[True, False]]
        assert lab.reference.tolist() == [[True, False]]

    def test_double_support_height_rule(self):
        lab = contact_labels(np.array([[5.0, 5.0]]), np.array([[0.0, 0.04]]),
                             RewardConfig())
        assert lab.reference.tolist() == [[True, True]]

    def test_force_threshold(self):
        lab = contact_labels(np.array([[0.5, 0.5]]), np.array([[0.0, 0.0]]),
                             RewardConfig())
        assert lab.robot.tolist() == [[False, False]]

    def test_negative_force_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            contact_labels(np.array([[-1.0, 0.0]]), np.array([[0.0, 0.0]]),
                           RewardConfig())

    def test_reference_always_supported(self):
        rng = np.random.default_rng(3)
        heights = rng.uniform(-0.5, 0.5, (500, 2))
        lab = contact_labels(np.zeros((500, 2)), heights, RewardConfig())
        assert lab.reference.any(axis=1).all()

    def test_matches_oracle(self):
        rng = np.random.default_rng(4)
        cfg = RewardConfig()
        forces = rng.uniform(0, 3, (300, 2))
        heights = rng.uniform(-0.2, 0.2, (300, 2))
        lab = contact_labels(forces, heights, cfg)
        robot, reference = oracle_contact_labels(forces, heights, cfg)
        assert np.array_equal(lab.robot, robot)
        assert np.array_equal(lab.reference, reference)


class TestConfig:
    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError, match="com_sigma"):
            RewardConfig(com_sigma=0.0)

    def test_threshold_must_be_non_negative(self):
        with pytest.raises(ValueError, match="close_feet_threshold"):
            RewardConfig(close_feet_threshold=-0.1)

    def test_aggregate_mode_checked(self):
        with pytest.raises(ValueError, match="tracking_aggregate"):
            RewardConfig(tracking_aggregate="median")

    def test_mass_scaled_threshold(self):
        assert mass_scaled_contact_force_threshold(117.72) == 40.0 * 117.72


class TestSpotValues:
    def test_com_on_support_foot_is_full_weight(self):
        body = make_body(1)
        body.foot_pos[:] = [[[0.0, 0.0], [0.3, 0.2]]]
        body.com[:] = [[0.0, 0.5]]
        res = run(body, make_labels(1, ref=(True, False)))
        assert res.com[0] == 160.0

    def test_com_at_sigma_distance(self):
        body = make_body(1)
        body.foot_pos[:] = [[[0.0, 0.0], [0.3, 0.2]]]
        body.com[:] = [[0.1, 0.5]]
        res = run(body, make_labels(1, ref=(True, False)))
        np.testing.assert_allclose(res.com[0], 160.0 * math.exp(-1.0),
                                   rtol=1e-12)

    def test_com_gate_closed_in_double_support(self):
        body = make_body(1)
        body.com[:] = [[0.0, 0.5]]
        res = run(body, make_labels(1, ref=(True, True)))
        assert res.com[0] == 0.0

    def test_com_ignores_vertical_position(self):
        body = make_body(1)
        body.foot_pos[:] = [[[0.0, 0.0], [0.3, 0.2]]]
        body.com[:] = [[0.07, 0.5]]
        lo = run(body, make_labels(1, ref=(True, False))).com[0]
        body.com[:] = [[0.07, 1.7]]
        hi = run(body, make_labels(1, ref=(True, False))).com[0]
        assert lo == hi

    def test_contact_mismatch_levels(self):
        body = make_body(3)
        body.foot_pos[:, 1, 0] = 0.3
        labels = ContactLabels(
            robot=np.array([[True, True], [True, False], [False, True]]),
            reference=np.array([[True, True], [True, True], [True, False]]))
        res = run(body, labels)
        assert res.contact_mismatch.tolist() == [0.0, -250.0, -500.0]

    def test_close_feet_at_ten_centimeters(self):
        body = make_body(1)
        body.foot_pos[:] = [[[0.0, 0.0], [0.10, 0.0]]]
        res = run(body)
        np.testing.assert_allclose(res.close_feet[0], -60.0, atol=1e-12)

    def test_close_feet_inactive_beyond_threshold(self):
        body = make_body(1)
        body.foot_pos[:] = [[[0.0, 0.0], [0.20, 0.0]]]
        assert run(body).close_feet[0] == 0.0

    def test_zero_error_tracking_at_full_weight(self):
        res = run(make_body(1))
        assert res.track_pos[0] == 30.0
        assert res.track_rot[0] == 20.0
        assert res.track_vel[0] == 8.0
        assert res.track_angvel[0] == 8.0
        assert res.track_dof_pos[0] == 32.0
        assert res.track_dof_vel[0] == 16.0

    def test_position_term_at_sigma_squared_error(self):
        body = make_body(1)
        ref = make_body(1)
        ref.keypoint_pos += 0.6     # mean squared error = sigma_pos^2
        res = compute_reward(body, ref, make_labels(1), np.zeros((1, J)),
                             np.zeros((1, J)), np.zeros((1, 2)), make_info(1),
                             RewardConfig())
        np.testing.assert_allclose(res.track_pos[0], 30.0 * math.exp(-1.0),
                                   rtol=1e-12)

    def test_air_time_credit_on_touchdown(self):
        body = make_body(1)
        res = run(body, make_labels(1, robot=(True, False)),
                  air=np.array([[0.4, 0.0]]))
        np.testing.assert_allclose(res.feet_air_time[0], 250.0 * 0.15,
                                   rtol=1e-12)

    def test_no_air_credit_while_airborne_or_grounded(self):
        body = make_body(1)
        still_up = run(body, make_labels(1, robot=(False, False)),
                       air=np.array([[0.4, 0.4]]))
        assert still_up.feet_air_time[0] == 0.0
        stayed_down = run(body, make_labels(1, robot=(True, True)),
                          air=np.zeros((1, 2)))
        assert stayed_down.feet_air_time[0] == 0.0

    def test_in_air_penalty(self):
        res = run(make_body(1), make_labels(1, robot=(False, False)))
        assert res.in_air[0] == -50.0

    def test_termination_penalty(self):
        res = run(make_body(1), terminated=np.array([True]))
        assert res.termination[0] == -60.0

    def test_limit_penalties_follow_flags(self):
        info = make_info(1)
        info.torque_clamped[0, 3] = True
        info.dof_pos_violation[0] = True
        info.dof_vel_violation[0] = True
        res = run(make_body(1), info=info)
        assert res.torque_limit[0] == -0.5
        assert res.dof_pos_limit[0] == -30.0
        assert res.dof_vel_limit[0] == -12.0

    def test_stumble_needs_tangential_dominance(self):
        body = make_body(1)
        body.foot_force[:] = [[[100.0, 501.0], [100.0, 499.0]]]
        res = run(body)
        assert res.stumble[0] == -3e-4

    def test_slippage_gated_by_contact(self):
        body = make_body(1)
        body.foot_vel[:] = [[[0.3, 0.0], [0.3, 0.0]]]
        res = run(body, make_labels(1, robot=(True, False)))
        np.testing.assert_allclose(res.slippage[0], -30.0 * 0.09, rtol=1e-12)

    def test_feet_orientation_gated_by_height(self):
        body = make_body(1)
        body.foot_pitch[:] = [[0.3, 0.3]]
        body.foot_pos[:, :, 1] = [[0.0, 0.2]]
        res = run(body)
        np.testing.assert_allclose(res.feet_orientation[0],
                                   -62.5 * abs(math.sin(0.3)), rtol=1e-12)

    def test_contact_force_over_threshold(self):
        body = make_body(1)
        body.foot_force[:] = [[[600.0, 0.0], [100.0, 0.0]]]
        res = run(body)
        np.testing.assert_allclose(res.contact_force[0], -0.2 * 100.0,
                                   rtol=1e-12)

    def test_action_rate_zero_when_repeated(self):
        a = np.full((1, J), 0.7)
        res = run(make_body(1), action=a, prev_action=a.copy())
        assert res.action_rate[0] == 0.0


class TestProperties:
    def test_total_is_sum_of_terms(self):
        rng = np.random.default_rng(11)
        body = make_body(64, rng)
        res = compute_reward(body, make_body(64, rng), make_labels(64, rng),
                             rng.uniform(-1, 1, (64, J)),
                             rng.uniform(-1, 1, (64, J)),
                             np.where(rng.random((64, 2)) < 0.5, 0.0,
                                      rng.uniform(0, 1, (64, 2))),
                             make_info(64, rng), RewardConfig(),
                             rng.random(64) < 0.2)
        total = sum(getattr(res, n) for n in RewardBreakdown.term_names())
        np.testing.assert_allclose(res.total, total, rtol=1e-12, atol=1e-12)

    def test_tracking_terms_bounded_by_weight(self):
        rng = np.random.default_rng(12)
        res = compute_reward(make_body(128, rng), make_body(128, rng),
                             make_labels(128, rng), np.zeros((128, J)),
                             np.zeros((128, J)), np.zeros((128, 2)),
                             make_info(128), RewardConfig())
        for name, w in (("track_pos", 30), ("track_rot", 20),
                        ("track_vel", 8), ("track_angvel", 8),
                        ("track_dof_pos", 32), ("track_dof_vel", 16)):
            v = getattr(res, name)
            assert np.all(v > 0) and np.all(v <= w)

    def test_tighter_sigma_strictly_lowers_value(self):
        body = make_body(1)
        ref = make_body(1)
        ref.keypoint_pos += 0.1
        args = (make_labels(1), np.zeros((1, J)), np.zeros((1, J)),
                np.zeros((1, 2)), make_info(1))
        wide = compute_reward(body, ref, *args, RewardConfig())
        tight = compute_reward(body, ref, *args,
                               RewardConfig(track_pos_sigma=0.15))
        assert tight.track_pos[0] < wide.track_pos[0]

    def test_sum_aggregate_switch(self):
        body = make_body(1)
        ref = make_body(1)
        ref.keypoint_pos += 0.2
        args = (make_labels(1), np.zeros((1, J)), np.zeros((1, J)),
                np.zeros((1, 2)), make_info(1))
        res = compute_reward(body, ref, *args,
                             RewardConfig(tracking_aggregate="sum"))
        expected = 30.0 * math.exp(-(2 * K * 0.04) / 0.36)
        np.testing.assert_allclose(res.track_pos[0], expected, rtol=1e-12)

    def test_non_finite_input_names_the_term(self):
        body = make_body(1)
        body.keypoint_pos[0, 2, 0] = np.nan
        with pytest.raises(ValueError, match="track_pos"):
            run(body)
        body = make_body(1)
        body.com[0, 0] = np.inf
        with pytest.raises(ValueError, match="com"):
            run(body)

    def test_fuzz_matches_oracle(self):
        rng = np.random.default_rng(2024)
        cfgs = [RewardConfig(), RewardConfig(tracking_aggregate="sum")]
        for trial in range(8):
            cfg = cfgs[trial % 2]
            B = 256
            body = make_body(B, rng)
            ref = make_body(B, rng)
            labels = make_labels(B, rng)
            action = rng.uniform(-1, 1, (B, J))
            prev = rng.uniform(-1, 1, (B, J))
            air = np.where(rng.random((B, 2)) < 0.5, 0.0,
                           rng.uniform(0.0, 1.0, (B, 2)))
            info = make_info(B, rng)
            terminated = rng.random(B) < 0.2
            res = compute_reward(body, ref, labels, action, prev, air, info,
                                 cfg, terminated)
            want = oracle_reward(body, ref, labels, action, prev, air, info,
                                 cfg, terminated)
            for name, arr in res.as_dict().items():
                np.testing.assert_allclose(
                    arr, want[name], rtol=1e-12, atol=1e-12,
                    err_msg=f"term {name} disagrees with oracle")
