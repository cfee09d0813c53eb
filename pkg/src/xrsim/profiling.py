"""Platform calibration: recover controller constants from the models.

Mirrors an offline setup pass that collects task execution times on a
target platform: reference-motion localization timing, a crop sweep at
the minimum pyramid level to invert the error tolerance into a crop
floor, an object-count sweep for the render slope and budget-equivalent
count, and a foveation-scale sweep for the time and quality slopes.
Everything here treats the workload models as black boxes so that a
swapped-in model with different constants is recovered the same way.
"""

from __future__ import annotations

import json

import numpy as np

from .config import PlatformProfile
from .mvio import MvioProfile, motion_score
from .sfr import SfrProfile
from .workload import DEFAULT_CLASS_MIX, generate_motion

CAL_SCENE_OBJECTS = 32          # standard calibration scene size
CAL_TRACE_SEED = 12345
CAL_TRACE_DURATION_US = 30_000_000


class CalibrationError(Exception):
    """Sweep data violated the expected shape (e.g. non-monotone)."""


def _check_monotone(values, direction, what):
    diffs = np.diff(values)
    if direction == "nonincreasing" and (diffs > 1e-12).any():
        raise CalibrationError(f"{what} sweep is not monotone non-increasing")
    if direction == "nondecreasing" and (diffs < -1e-12).any():
        raise CalibrationError(f"{what} sweep is not monotone non-decreasing")


def invert_crop_for_error(model, e_req_m: float, p_floor: float = 0.02) -> float:
    """p_min = f(e_req, l_min): sweep the error model over p at the minimum
    pyramid level and invert by monotone interpolation, then nudge up so
    the tolerance holds at the returned crop exactly."""
    grid = np.linspace(p_floor, 1.0, 393)
    errs = np.array([model.vio_error_m(p, model.l_min) for p in grid])
    _check_monotone(errs, "nonincreasing", "error-vs-crop")
    if e_req_m < errs[-1]:
        raise CalibrationError(
            f"error tolerance {e_req_m} m is below the model floor "
            f"{errs[-1]:.4f} m at full image and minimum pyramid level")
    if e_req_m >= errs[0]:
        p_min = float(grid[0])
    else:
        # errs decreases with p: interpolate on the reversed axis.
        p_min = float(np.interp(e_req_m, errs[::-1], grid[::-1]))
    while model.vio_error_m(p_min, model.l_min) > e_req_m and p_min < 1.0:
        p_min = min(1.0, p_min + 1e-6)
    return p_min


def observe_s_max(model, rot_ratio: float = 0.6) -> float:
    """Maximum motion score over the calibration trace (default mix)."""
    trace = generate_motion(CAL_TRACE_DURATION_US, DEFAULT_CLASS_MIX,
                            seed=CAL_TRACE_SEED, rot_ratio=rot_ratio)
    scores = (trace.speed - model.v_ref) / model.v_ref + \
             (trace.rot - model.w_ref) / model.w_ref
    s_max = float(scores.max())
    if s_max <= 0:
        raise CalibrationError("calibration trace never exceeded the "
                               "reference motion; s_max would be non-positive")
    return s_max


def sweep_render_slope(model) -> tuple:
    """Object-count sweep at gamma=1: returns (k_obj, n_budget, budget_us).

    The budget is the unfoveated render time of the calibration scene;
    n_budget is the count whose render time equals that budget.
    """
    budget_us = model.render_time_us(CAL_SCENE_OBJECTS, 1.0)
    ns = np.arange(1, 4097, 64)
    times = np.array([model.render_time_us(int(n), 1.0) for n in ns],
                     dtype=float)
    _check_monotone(times, "nondecreasing", "render-vs-objects")
    slope = (times[-1] - times[0]) / (ns[-1] - ns[0])   # us per object
    if slope <= 0:
        raise CalibrationError("render time does not grow with object count")
    k_obj = 1.0 / slope
    n_budget = int(round(ns[0] + (budget_us - times[0]) * k_obj))
    return float(k_obj), n_budget, budget_us


def sweep_gamma(model, n_budget: int) -> tuple:
    """Foveation-scale sweep at the budget count: (c_time_us, m_quality)."""
    gammas = np.linspace(0.1, 1.0, 19)
    times = np.array([model.render_time_us(n_budget, g) for g in gammas],
                     dtype=float)
    quals = np.array([model.quality(g) for g in gammas])
    _check_monotone(times, "nondecreasing", "render-vs-gamma")
    _check_monotone(quals, "nondecreasing", "quality-vs-gamma")
    c_time = float(times[-1])                       # render time at gamma=1
    m_quality = float((quals[-1] - quals[0]) / (gammas[-1] - gammas[0]))
    if m_quality <= 0:
        raise CalibrationError("quality does not grow with gamma")
    return c_time, m_quality


def profile_platform(model, e_req_m: float, rot_ratio: float = 0.6) -> PlatformProfile:
    """Full calibration pass against the configured models."""
    t_vio = model.vio_time_us(model.v_ref, model.w_ref, 1.0, model.l_max)
    k_obj, n_budget, budget_us = sweep_render_slope(model)
    c_time, m_quality = sweep_gamma(model, n_budget)
    return PlatformProfile(
        t_vio_us=t_vio,
        t_imui_us=model.task_time_us("IMUi"),
        t_sr_us=model.task_time_us("SR"),
        t_srr_us=int(budget_us),
        t_atw_us=model.task_time_us("ATW"),
        t_atwr_us=model.task_time_us("ATWR"),
        v_ref=model.v_ref,
        w_ref=model.w_ref,
        s_max=observe_s_max(model, rot_ratio),
        p_min=invert_crop_for_error(model, e_req_m),
        k_obj=k_obj,
        m_quality=m_quality,
        c_time_us=c_time,
        n_ref=n_budget,
    )


def make_mvio_profile(profile: PlatformProfile, e_req_m: float,
                      l_min: int, l_max: int, budget_us: int = 0) -> MvioProfile:
    return MvioProfile(
        budget_us=budget_us if budget_us > 0 else profile.t_vio_us,
        v_ref=profile.v_ref, w_ref=profile.w_ref, s_max=profile.s_max,
        e_req_m=e_req_m, p_min=profile.p_min, l_min=l_min, l_max=l_max)


def make_sfr_profile(profile: PlatformProfile, offset: float,
                     gamma_floor: float, zone_formula: str,
                     r_max: float = 0.0) -> SfrProfile:
    return SfrProfile(
        budget_us=float(profile.t_srr_us), c_time=profile.c_time_us,
        k_obj=profile.k_obj, m_quality=profile.m_quality,
        n_ref=profile.n_ref, r_max=r_max if r_max > 0 else None,
        offset=offset, gamma_floor=gamma_floor, zone_formula=zone_formula)


def save_profile(profile: PlatformProfile, path):
    with open(path, "w") as fp:
        json.dump(profile.to_dict(), fp, sort_keys=True, indent=2)
        fp.write("\n")


def load_profile(path) -> PlatformProfile:
    with open(path) as fp:
        return PlatformProfile.from_dict(json.load(fp))
