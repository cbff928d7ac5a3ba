"""Desk-scale planar biped balance lab.

Reference-motion refinement, balance-aware reward shaping, robustness
training in a small rigid-body simulator, teacher-student policy learning,
and an evaluation/ablation harness, all on an 11-DOF sagittal biped.
"""

__version__ = "0.1.0"

from .skeleton import (  # noqa: F401
    SkeletonSpec, LinkSpec, JointSpec, FootSpec, KeypointSpec,
    Pose, MotionClip, SupportPhase,
    forward_kinematics, compute_com, total_mass, finite_difference_derivatives,
    load_skeleton, save_skeleton, load_clip, save_clip,
    desk_biped, default_skeleton_path,
)
