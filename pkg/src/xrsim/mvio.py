"""Motion-driven localization frontend controller.

Before each localization job the controller scores the current motion
against the profiled reference, then trades retained image area (p) and
feature-pyramid level (l) against pose error so the job stays inside its
execution-time budget.  After the job it bounds the published pose to the
maximum displacement physically reachable since the previous raw pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class MvioProfile:
    budget_us: int            # B: target localization time (profiled)
    v_ref: float              # reference speed where the budget is met at p=1
    w_ref: float              # reference rotation rate
    s_max: float              # max motion score observed during profiling
    e_req_m: float            # user-tolerated position error
    p_min: float              # crop floor: f(e_req, l_min) from calibration
    l_min: int = 1
    l_max: int = 4

    def __post_init__(self):
        if not (0.0 < self.p_min <= 1.0):
            raise ValueError(f"p_min={self.p_min} outside (0, 1]")
        if self.l_min > self.l_max:
            raise ValueError("l_min must not exceed l_max")
        if self.s_max <= 0 or self.v_ref <= 0 or self.w_ref <= 0:
            raise ValueError("s_max, v_ref and w_ref must be positive")


@dataclass
class MvioDecision:
    score: float
    p: float
    l: int
    crop_direction: np.ndarray   # unit 2-vector in the image plane, or zeros


def motion_score(v: float, w: float, profile: MvioProfile) -> float:
    """Deviation of the current motion from the profiled reference:
    S = (v - v_ref)/v_ref + (w - w_ref)/w_ref."""
    return (v - profile.v_ref) / profile.v_ref + \
        (w - profile.w_ref) / profile.w_ref


def crop_fraction(score: float, profile: MvioProfile) -> float:
    """Retained image fraction p = max(p_min, p_min ** (S / S_max)).

    Exponential in the score: p -> 1 as S -> 0+, p = p_min at S = S_max,
    and the floor keeps abnormally large scores at p_min.
    """
    exponent = score / profile.s_max
    return max(profile.p_min, profile.p_min ** exponent)


def pyramid_level(score: float, profile: MvioProfile) -> int:
    """Step-wise level: (0, S_max] is split into (l_max - l_min + 1) equal
    segments; the i-th segment (from low scores) maps to l_max - (i - 1),
    and scores above S_max clamp to l_min."""
    n_seg = profile.l_max - profile.l_min + 1
    if score > profile.s_max:
        return profile.l_min
    seg = min(n_seg, max(1, math.ceil(score * n_seg / profile.s_max)))
    return profile.l_max - (seg - 1)


def decide(v: float, w: float, accel, profile: MvioProfile) -> MvioDecision:
    """Compose score, crop and level; non-positive scores keep the full
    image and the maximum pyramid level."""
    s = motion_score(v, w, profile)
    if s <= 0:
        p, l = 1.0, profile.l_max
    else:
        p = crop_fraction(s, profile)
        l = pyramid_level(s, profile)
    return MvioDecision(score=s, p=p, l=l,
                        crop_direction=_image_direction(accel))


def _image_direction(accel) -> np.ndarray:
    """Project the acceleration onto the image plane (x, y) and normalize;
    zero acceleration yields the zero vector (no preferred direction)."""
    a = np.asarray(accel, dtype=float)
    planar = a[:2] if a.shape[-1] >= 2 else a
    norm = float(np.linalg.norm(planar))
    if norm < 1e-12:
        return np.zeros(2)
    return planar / norm


def crop_image(p: float, accel) -> dict:
    """Crop descriptor for retained fraction p.

    New features emerge from the direction of motion, so the discarded
    band faces the dominant acceleration axis and the retained region
    anchors on the opposite side.  With no acceleration the retained
    region is a centered square of area p.  p = 1 is the identity.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"crop fraction p={p} outside (0, 1]")
    if p == 1.0:
        return {"x0": 0.0, "y0": 0.0, "x1": 1.0, "y1": 1.0, "area": 1.0}
    d = _image_direction(accel)
    if not d.any():
        side = math.sqrt(p)
        lo = 0.5 - side / 2
        hi = 0.5 + side / 2
        return {"x0": lo, "y0": lo, "x1": hi, "y1": hi, "area": side * side}
    # Remove a band along the dominant axis, on the side the motion points to.
    if abs(d[0]) >= abs(d[1]):
        if d[0] > 0:
            box = {"x0": 0.0, "y0": 0.0, "x1": p, "y1": 1.0}
        else:
            box = {"x0": 1.0 - p, "y0": 0.0, "x1": 1.0, "y1": 1.0}
    else:
        if d[1] > 0:
            box = {"x0": 0.0, "y0": 0.0, "x1": 1.0, "y1": p}
        else:
            box = {"x0": 0.0, "y0": 1.0 - p, "x1": 1.0, "y1": 1.0}
    box["area"] = (box["x1"] - box["x0"]) * (box["y1"] - box["y0"])
    return box


def error_bound(pose: np.ndarray, prev_raw_pose, v_vec, a_vec,
                t_vio_us: int) -> np.ndarray:
    """Clamp the new pose to the reachable sphere around the previous raw
    pose: radius r = |v + a * t| * t with t the actual localization time.

    When the pose lies outside, it is replaced by the intersection of the
    segment (prev -> pose) with the sphere, so the corrected displacement
    equals r exactly.  The first job (no previous pose) passes through.
    """
    if prev_raw_pose is None:
        return pose
    t_s = t_vio_us * 1e-6
    v_avg = np.asarray(v_vec, dtype=float) + np.asarray(a_vec, dtype=float) * t_s
    r = float(np.linalg.norm(v_avg)) * t_s
    delta = pose - prev_raw_pose
    dist = float(np.linalg.norm(delta))
    if dist <= r:
        return pose
    if dist == 0.0:
        return prev_raw_pose.copy()
    scale = r / dist
    corrected = prev_raw_pose + delta * scale
    # Floating-point guard: enforce |corrected - prev| <= r exactly.
    while float(np.linalg.norm(corrected - prev_raw_pose)) > r:
        scale = math.nextafter(scale, 0.0)
        corrected = prev_raw_pose + delta * scale
    return corrected
