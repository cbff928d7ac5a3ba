"""Independent straight-line re-implementations used to check the library.

Everything here is written with explicit per-environment loops and scalar
math on purpose: no code is shared with the package beyond the input types,
so agreement is evidence rather than tautology.
"""
from __future__ import annotations

import math

import numpy as np


def oracle_contact_labels(foot_forces, ref_foot_heights, cfg):
    forces = np.asarray(foot_forces, dtype=float)
    heights = np.asarray(ref_foot_heights, dtype=float)
    B = forces.shape[0]
    robot = np.zeros((B, 2), dtype=bool)
    reference = np.zeros((B, 2), dtype=bool)
    for b in range(B):
        for f in range(2):
            robot[b, f] = forces[b, f] >= cfg.contact_force_min
        zl, zr = heights[b, 0], heights[b, 1]
        if abs(zl - zr) < cfg.single_support_height_gap:
            reference[b, 0] = reference[b, 1] = True
        elif zl <= zr:
            reference[b, 0] = True
        else:
            reference[b, 1] = True
    return robot, reference


def _wrap_scalar(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _exp_term(entries, weight, sigma, aggregate):
    sq = [e * e for e in entries]
    err = sum(sq)
    if aggregate == "mean":
        err /= len(sq)
    return weight * math.exp(-err / (sigma * sigma))


def oracle_reward(body, ref, labels, action, prev_action, air_timers,
                  step_info, cfg, terminated=None):
    """Per-term reward values as a dict of (B,) arrays, Table rows inline."""
    B = body.com.shape[0]
    agg = cfg.tracking_aggregate
    out: dict[str, list[float]] = {}
    names = ["com", "contact_mismatch", "close_feet", "track_pos",
             "track_rot", "track_vel", "track_angvel", "track_dof_pos",
             "track_dof_vel", "torque_limit", "dof_pos_limit",
             "dof_vel_limit", "termination", "torque", "dof_vel", "dof_acc",
             "action_rate", "feet_air_time", "contact_force", "stumble",
             "slippage", "feet_orientation", "in_air", "total"]
    for n in names:
        out[n] = []
    for b in range(B):
        rob = [bool(labels.robot[b, 0]), bool(labels.robot[b, 1])]
        refc = [bool(labels.reference[b, 0]), bool(labels.reference[b, 1])]

        single = refc[0] != refc[1]
        zl = body.foot_pos[b, 0, 1]
        zr = body.foot_pos[b, 1, 1]
        lower = 0 if zl <= zr else 1
        d = body.com[b, 0] - body.foot_pos[b, lower, 0]
        com = cfg.com_weight * math.exp(-(d * d) / cfg.com_sigma ** 2)
        out["com"].append(com if single else 0.0)

        n_mismatch = int(rob[0] != refc[0]) + int(rob[1] != refc[1])
        out["contact_mismatch"].append(cfg.contact_mismatch_weight
                                       * n_mismatch)

        dx = body.foot_pos[b, 0, 0] - body.foot_pos[b, 1, 0]
        dz = body.foot_pos[b, 0, 1] - body.foot_pos[b, 1, 1]
        dist = math.sqrt(dx * dx + dz * dz)
        out["close_feet"].append(
            cfg.close_feet_weight
            * max(cfg.close_feet_threshold - dist, 0.0))

        pos_entries = []
        vel_entries = []
        for k in range(body.keypoint_pos.shape[1]):
            for c in range(2):
                pos_entries.append(body.keypoint_pos[b, k, c]
                                   - ref.keypoint_pos[b, k, c])
                vel_entries.append(body.keypoint_vel[b, k, c]
                                   - ref.keypoint_vel[b, k, c])
        rot_entries = [_wrap_scalar(body.link_rot[b, l] - ref.link_rot[b, l])
                       for l in range(body.link_rot.shape[1])]
        angvel_entries = [body.link_angvel[b, l] - ref.link_angvel[b, l]
                          for l in range(body.link_angvel.shape[1])]
        dpos_entries = [body.dof_pos[b, j] - ref.dof_pos[b, j]
                        for j in range(body.dof_pos.shape[1])]
        dvel_entries = [body.dof_vel[b, j] - ref.dof_vel[b, j]
                        for j in range(body.dof_vel.shape[1])]
        out["track_pos"].append(_exp_term(
            pos_entries, cfg.track_pos_weight, cfg.track_pos_sigma, agg))
        out["track_rot"].append(_exp_term(
            rot_entries, cfg.track_rot_weight, cfg.track_rot_sigma, agg))
        out["track_vel"].append(_exp_term(
            vel_entries, cfg.track_vel_weight, cfg.track_vel_sigma, agg))
        out["track_angvel"].append(_exp_term(
            angvel_entries, cfg.track_angvel_weight, cfg.track_angvel_sigma,
            agg))
        out["track_dof_pos"].append(_exp_term(
            dpos_entries, cfg.track_dof_pos_weight, cfg.track_dof_pos_sigma,
            agg))
        out["track_dof_vel"].append(_exp_term(
            dvel_entries, cfg.track_dof_vel_weight, cfg.track_dof_vel_sigma,
            agg))

        out["torque_limit"].append(
            cfg.torque_limit_weight
            if any(step_info.torque_clamped[b]) else 0.0)
        out["dof_pos_limit"].append(
            cfg.dof_pos_limit_weight
            if step_info.dof_pos_violation[b] else 0.0)
        out["dof_vel_limit"].append(
            cfg.dof_vel_limit_weight
            if step_info.dof_vel_violation[b] else 0.0)
        term = bool(terminated[b]) if terminated is not None else False
        out["termination"].append(cfg.termination_weight if term else 0.0)

        out["torque"].append(
            cfg.torque_weight
            * math.sqrt(sum(x * x for x in step_info.applied_torque[b])))
        out["dof_vel"].append(
            cfg.dof_vel_weight * sum(x * x for x in body.dof_vel[b]))
        out["dof_acc"].append(
            cfg.dof_acc_weight
            * math.sqrt(sum(x * x for x in step_info.dof_acc[b])))
        out["action_rate"].append(
            cfg.action_rate_weight
            * sum((action[b, j] - prev_action[b, j]) ** 2
                  for j in range(action.shape[1])))

        air = 0.0
        for f in range(2):
            if air_timers[b, f] > 0.0 and rob[f]:
                air += air_timers[b, f] - cfg.air_time_baseline
        out["feet_air_time"].append(cfg.feet_air_time_weight * air)

        cforce = 0.0
        stumble = 0
        slip = 0.0
        orient = 0.0
        for f in range(2):
            fn = body.foot_force[b, f, 0]
            ft = body.foot_force[b, f, 1]
            cforce += max(math.sqrt(fn * fn + ft * ft)
                          - cfg.contact_force_threshold, 0.0)
            if abs(ft) > cfg.stumble_ratio * fn:
                stumble += 1
            if rob[f]:
                slip += (body.foot_vel[b, f, 0] ** 2
                         + body.foot_vel[b, f, 1] ** 2)
            if body.foot_pos[b, f, 1] < cfg.feet_height_gate:
                orient += abs(math.sin(body.foot_pitch[b, f]))
        out["contact_force"].append(cfg.contact_force_weight * cforce)
        out["stumble"].append(cfg.stumble_weight * stumble)
        out["slippage"].append(cfg.slippage_weight * slip)
        out["feet_orientation"].append(cfg.feet_orientation_weight * orient)
        out["in_air"].append(
            cfg.in_air_weight if not (rob[0] or rob[1]) else 0.0)

        out["total"].append(sum(out[n][b] for n in names if n != "total"))
    return {n: np.array(v) for n, v in out.items()}
