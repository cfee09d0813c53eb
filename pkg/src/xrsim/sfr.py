"""Scene-dependent foveated rendering controller.

Scales the full-resolution foveation region with the number of visible
objects so the projected render time stays inside its budget, splits the
viewport into inner / middle / outer resolution zones, and centers the
foveation on the centroid of the visible objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class SfrProfile:
    budget_us: float          # B: render-time budget (= profiled render time)
    c_time: float             # C: render time at gamma=1 with n_ref objects
    k_obj: float              # K: objects per microsecond of render time
    m_quality: float          # M: quality slope per unit gamma (normalized)
    n_ref: int                # n_B: object count that exactly meets the budget
    r_max: float = None       # optional cap on the inner-box half-diagonal
    offset: float = 0.1       # middle-zone margin, normalized viewport units
    gamma_floor: float = 0.05
    zone_formula: str = "consistent"   # or "literal"

    def __post_init__(self):
        if min(self.c_time, self.k_obj, self.m_quality, self.n_ref) <= 0:
            raise ValueError("K, M, C and n_ref must all be positive")
        if self.budget_us <= 0:
            raise ValueError("render budget must be positive")


@dataclass
class SfrDecision:
    gamma: float
    alpha: float
    inner_area: float
    middle_area: float
    outer_area: float
    centroid: tuple
    budget_unmet: bool = False


def gamma_value(alpha: float, n: int, profile: SfrProfile) -> float:
    """Foveation scaling factor:
    gamma = 1 - (1 - alpha) * M / (alpha * C) - (n - n_ref) / (alpha * K * C)

    M/C is treated as a pre-normalized unitless ratio (quality slope over
    time slope, both over the gamma range).  The result is clamped to
    [gamma_floor, 1] since negative area fractions are meaningless.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive here; the loop guards 0")
    quality_term = (1.0 - alpha) * profile.m_quality / alpha
    object_term = (n - profile.n_ref) / (alpha * profile.k_obj * profile.c_time)
    g = 1.0 - quality_term - object_term
    return min(1.0, max(profile.gamma_floor, g))


def optimize(n: int, profile: SfrProfile) -> tuple:
    """Pick (gamma, alpha, budget_unmet) for the current object count.

    Counts at or below n_ref need no foveation.  Otherwise start from
    alpha = 1 and, while the projected render time C * gamma exceeds the
    budget, concede quality by lowering alpha in 0.1 steps; terminating at
    alpha = 0 without meeting the budget sets the budget-unmet flag.
    """
    if n <= profile.n_ref:
        return 1.0, 1.0, False
    alpha = 1.0
    g = gamma_value(alpha, n, profile)
    while profile.c_time * g > profile.budget_us:
        if alpha <= 0:
            return g, 0.0, True
        alpha = round(alpha - 0.1, 10)
        if alpha <= 0:
            return g, 0.0, True
        g = gamma_value(alpha, n, profile)
    return g, alpha, False


def zones(gamma: float, offset: float, formula: str = "consistent") -> tuple:
    """Normalized (inner, middle, outer) areas on the unit viewport.

    consistent: the inner box has area gamma (side sqrt(gamma) per axis)
    and the middle box pads each side by `offset`.
    literal: gamma multiplies the viewport area for the inner zone but the
    side lengths for the middle box, with negative results clamped to 0.
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma={gamma} outside (0, 1]")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    inner = gamma
    if formula == "consistent":
        side = min(1.0, math.sqrt(gamma) + offset)
        middle = max(0.0, side * side - inner)
    elif formula == "literal":
        side = min(1.0, gamma + offset)
        middle = max(0.0, side * side - inner)
    else:
        raise ValueError(f"unknown zone formula {formula!r}")
    if inner + middle > 1.0:
        middle = 1.0 - inner
    outer = max(0.0, 1.0 - middle - inner)
    return inner, middle, outer


def centroid(vp_objects) -> tuple:
    """Mean of the object centers; an empty scene falls back to the
    viewport center."""
    pts = list(vp_objects)
    if len(pts) == 0:
        return (0.5, 0.5)
    sx = sum(p[0] for p in pts)
    sy = sum(p[1] for p in pts)
    return (sx / len(pts), sy / len(pts))


def clamp_center(center: tuple, gamma: float) -> tuple:
    """Shift (not shrink) the inner box so it stays inside the viewport."""
    half = math.sqrt(gamma) / 2.0
    x = min(1.0 - half, max(half, center[0]))
    y = min(1.0 - half, max(half, center[1]))
    return (x, y)


def quality(gamma: float, m_quality: float, q_max: float = 1.0) -> float:
    """Linear quality model q = q_max - M * (1 - gamma), clamped to [0, 1]."""
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma={gamma} outside [0, 1]")
    return min(1.0, max(0.0, q_max - m_quality * (1.0 - gamma)))


def decide(n: int, vp_objects, profile: SfrProfile) -> SfrDecision:
    """Full per-frame decision: optimize gamma, derive zones, center the
    foveation on the dynamic-objects centroid."""
    g, alpha, unmet = optimize(n, profile)
    inner, middle, outer = zones(g, profile.offset, profile.zone_formula)
    c = clamp_center(centroid(vp_objects), g)
    if profile.r_max is not None:
        half_diag = math.sqrt(2.0 * g) / 2.0
        if half_diag > profile.r_max:
            g_cap = 2.0 * profile.r_max * profile.r_max
            g = max(profile.gamma_floor, min(g, g_cap))
            inner, middle, outer = zones(g, profile.offset, profile.zone_formula)
    return SfrDecision(gamma=g, alpha=alpha, inner_area=inner,
                       middle_area=middle, outer_area=outer, centroid=c,
                       budget_unmet=unmet)
