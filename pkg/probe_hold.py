"""Criterion-8-shaped probe: desk preset, standing hold, teacher PPO.

Trains with the full desk preset budget, then scores the mean action on
nominal dynamics: mean per-step tracking reward (the six kernel terms only)
vs the 114 ceiling. Prints a curve as it goes.
"""
import time

import numpy as np

from balancelab.config import desk_preset
from balancelab.envs import BalanceEnv, standing_clip
from balancelab.nets import policy_forward
from balancelab.ppo import train_teacher
from balancelab.simulator import nominal_sim_config
from balancelab.skeleton import desk_biped

TRACK_TERMS = ("track_pos", "track_rot", "track_vel", "track_angvel",
               "track_dof_pos", "track_dof_vel")


def tracking_score(policy, norm, skel, clip, episodes=4):
    env = BalanceEnv(skel, clip, sim_cfg=nominal_sim_config(),
                     reward_cfg=cfg.reward, mode="teacher", batch=episodes,
                     reward_scale=1.0, master_seed=123)
    obs = env.reset_envs(np.arange(episodes))
    done = np.zeros(episodes, bool)
    tot = np.zeros(episodes)
    steps = np.zeros(episodes)
    while not done.all():
        mean, _ = policy_forward(policy, norm(obs))
        step = env.step(mean)
        live = ~done
        track = sum(getattr(step.breakdown, t) for t in TRACK_TERMS)
        tot[live] += track[live]
        steps[live] += 1
        done |= step.terminated | step.truncated
        obs = step.obs
    return tot / steps, steps


cfg = desk_preset()
skel = desk_biped()
clip = standing_clip(skel, seconds=4.0)


def make_env(seed):
    return BalanceEnv(skel, clip, sim_cfg=cfg.sim, reward_cfg=cfg.reward,
                      mode="teacher", batch=cfg.ppo.num_envs,
                      reward_scale=cfg.reward_scale, master_seed=seed)


t0 = time.time()


def report(msg):
    print(f"[{time.time()-t0:7.1f}s] {msg}", flush=True)


out, log = train_teacher(make_env, cfg.ppo, seed=0, progress=report)
t_train = time.time() - t0
per_step, lengths = tracking_score(out["policy"], out["norm"], skel, clip)
print(f"train {t_train:.0f}s | eval lengths {lengths} | "
      f"tracking/step {per_step} | mean {per_step.mean():.2f} "
      f"(need >= {0.9 * 114:.1f})", flush=True)
