"""Synthetic workload generation and the parametric ground-truth models.

Motion traces are sampled at the IMU period and are kinematically exact:
acceleration is piecewise constant per sample, velocity integrates
acceleration, position integrates velocity. Scene traces evolve a visible
object count (bounded random walk around an application preset) plus
drifting object centers in the unit viewport.

The cost/error/quality models encode the measured execution-time
characteristics: localization time grows with motion speed and rotation,
shrinks with image crop (power law in retained fraction p) and with lower
feature-pyramid levels; render time is linear in visible objects and in
the foveation scale; estimation error grows as p shrinks and as the
pyramid level drops; frame quality is linear in the foveation scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

US_PER_S = 1_000_000

# Motion classes: speed band [lo, hi) in m/s and default occupancy fractions.
MOTION_CLASS_NAMES = ("no", "small", "medium", "large")
MOTION_CLASS_BOUNDS = ((0.0, 0.1), (0.1, 1.0), (1.0, 2.0), (2.0, math.inf))
DEFAULT_CLASS_MIX = (0.1062, 0.6675, 0.2030, 0.0233)

# Per-class target speeds used by the generator (jittered per segment).
_CLASS_TARGET_SPEED = ((0.03, 0.07), (0.40, 0.68), (1.25, 1.65), (2.30, 2.50))

SWAP_OBJECT_COUNT = 2048


def classify_speed(v: float) -> int:
    if v < 0.1:
        return 0
    if v < 1.0:
        return 1
    if v < 2.0:
        return 2
    return 3


@dataclass(frozen=True)
class MotionClass:
    name: str
    lo: float
    hi: float
    occupancy: float


def default_motion_classes():
    return [
        MotionClass(MOTION_CLASS_NAMES[i], MOTION_CLASS_BOUNDS[i][0],
                    MOTION_CLASS_BOUNDS[i][1], DEFAULT_CLASS_MIX[i])
        for i in range(4)
    ]


@dataclass
class MotionTrace:
    """Timestamped kinematics at fixed IMU-period spacing.

    Arrays are aligned: sample k is at t[k] = k * dt_us.  `accel` and `vel`
    are 3-vectors; `speed` is |vel|; `rot` is the scalar rotation rate.
    """

    dt_us: int
    t: np.ndarray        # (N,) int64 microseconds
    accel: np.ndarray    # (N, 3) m/s^2, zero-order-hold between samples
    vel: np.ndarray      # (N, 3) m/s
    speed: np.ndarray    # (N,) m/s
    rot: np.ndarray      # (N,) rad/s
    pos: np.ndarray      # (N, 3) m

    @property
    def duration_us(self) -> int:
        return int(self.t[-1]) if len(self.t) else 0

    def index_at(self, t_us: int) -> int:
        i = t_us // self.dt_us
        return min(int(i), len(self.t) - 1)

    def sample_ts(self, t_us: int) -> int:
        """Timestamp of the latest sample at or before t_us."""
        return self.index_at(t_us) * self.dt_us

    def accel_at(self, t_us: int) -> np.ndarray:
        return self.accel[self.index_at(t_us)]

    def vel_at(self, t_us: int) -> np.ndarray:
        i = self.index_at(t_us)
        tau = (t_us - i * self.dt_us) * 1e-6
        return self.vel[i] + self.accel[i] * tau

    def speed_sample(self, t_us: int) -> float:
        return float(self.speed[self.index_at(t_us)])

    def rot_sample(self, t_us: int) -> float:
        return float(self.rot[self.index_at(t_us)])

    def pos_at(self, t_us: int) -> np.ndarray:
        i = self.index_at(t_us)
        tau = (t_us - i * self.dt_us) * 1e-6
        return self.pos[i] + self.vel[i] * tau + 0.5 * self.accel[i] * tau * tau

    def class_at(self, t_us: int) -> int:
        return classify_speed(self.speed_sample(t_us))

    def class_occupancy(self) -> np.ndarray:
        counts = np.zeros(4, dtype=np.int64)
        for v in self.speed:
            counts[classify_speed(v)] += 1
        return counts / max(1, len(self.speed))


def _integrate(accel: np.ndarray, dt_s: float, v0=None, p0=None):
    """Exact integration of piecewise-constant acceleration."""
    n = len(accel)
    vel = np.zeros((n, 3))
    pos = np.zeros((n, 3))
    if v0 is not None:
        vel[0] = v0
    if p0 is not None:
        pos[0] = p0
    if n > 1:
        vel[1:] = vel[0] + np.cumsum(accel[:-1], axis=0) * dt_s
        steps = vel[:-1] * dt_s + 0.5 * accel[:-1] * dt_s * dt_s
        pos[1:] = pos[0] + np.cumsum(steps, axis=0)
    return vel, pos


def generate_motion(duration_us: int, class_mix=DEFAULT_CLASS_MIX, seed: int = 0,
                    imu_period_us: int = 5000, rot_ratio: float = 0.6,
                    accel_limit: float = 8.0) -> MotionTrace:
    """Generate a class-mix-matching motion trace.

    Segments are laid out by a deficit-greedy scheduler: at every segment
    boundary the class with the largest shortfall versus its requested
    dwell-time fraction is selected, which keeps realized occupancy within
    a fraction of one segment length of the target over a one-minute trace.
    """
    if duration_us < 0:
        raise ValueError("duration must be non-negative")
    mix = np.asarray(class_mix, dtype=float)
    if abs(mix.sum() - 1.0) > 1e-9:
        raise ValueError(f"class occupancies must sum to 1, got {mix.sum()}")

    rng = np.random.default_rng([int(seed), 11])
    dt_s = imu_period_us * 1e-6
    n = duration_us // imu_period_us + 1
    accel = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    speed = np.zeros(n)
    pos = np.zeros((n, 3))

    realized = np.zeros(4)
    v_vec = np.zeros(3)
    p_vec = np.zeros(3)
    k = 0
    # Start in the dominant class so the first ramp is short.
    while k < n:
        emitted = max(1, k)
        deficits = mix - realized / emitted
        cls = int(np.argmax(deficits))
        lo, hi = _CLASS_TARGET_SPEED[cls]
        target_speed = lo + (hi - lo) * rng.random()
        heading = rng.normal(size=3)
        heading /= np.linalg.norm(heading)
        target_vec = heading * target_speed
        dwell = int((0.6 + 0.8 * rng.random()) * US_PER_S / imu_period_us)

        dv = target_vec - v_vec
        dv_norm = float(np.linalg.norm(dv))
        ramp = max(1, int(math.ceil(dv_norm / (accel_limit * dt_s))))
        a_ramp = dv / (ramp * dt_s)
        for j in range(dwell):
            if k >= n:
                break
            a = a_ramp if j < ramp else np.zeros(3)
            accel[k] = a
            vel[k] = v_vec
            pos[k] = p_vec
            s = float(np.linalg.norm(v_vec))
            speed[k] = s
            realized[classify_speed(s)] += 1
            p_vec = p_vec + v_vec * dt_s + 0.5 * a * dt_s * dt_s
            v_vec = v_vec + a * dt_s
            k += 1

    t = np.arange(n, dtype=np.int64) * imu_period_us
    rot = rot_ratio * speed
    return MotionTrace(dt_us=imu_period_us, t=t, accel=accel, vel=vel,
                       speed=speed, rot=rot, pos=pos)


def inject_motion_spike(trace: MotionTrace, at_us: int, magnitude: float = 15.0,
                        spike_us: int = 200_000) -> MotionTrace:
    """Overlay a sudden-acceleration pulse at `at_us`.

    The pulse applies `magnitude` m/s^2 along the current direction of
    travel for `spike_us`, then the opposite acceleration for the same
    span so the trace returns to its planned velocity.  Pulses extending
    past the trace end are truncated.  magnitude == 0 is the identity.
    """
    if at_us < 0 or at_us > trace.duration_us:
        raise ValueError(f"spike at {at_us} outside trace [0, {trace.duration_us}]")
    if magnitude == 0:
        return trace

    accel = trace.accel.copy()
    i0 = trace.index_at(at_us)
    width = max(1, spike_us // trace.dt_us)
    n = len(accel)
    v0 = trace.vel[i0]
    s0 = float(np.linalg.norm(v0))
    direction = v0 / s0 if s0 > 1e-9 else np.array([1.0, 0.0, 0.0])

    up_end = min(n, i0 + width)
    down_end = min(n, i0 + 2 * width)
    accel[i0:up_end] += direction * magnitude
    accel[up_end:down_end] -= direction * magnitude

    dt_s = trace.dt_us * 1e-6
    vel_tail, pos_tail = _integrate(accel[i0:], dt_s, v0=trace.vel[i0], p0=trace.pos[i0])
    vel = trace.vel.copy()
    pos = trace.pos.copy()
    vel[i0:] = vel_tail
    pos[i0:] = pos_tail
    speed = trace.speed.copy()
    speed[i0:] = np.linalg.norm(vel_tail, axis=1)
    rot = trace.rot.copy()
    ratio = _rot_ratio_of(trace)
    rot[i0:] = ratio * speed[i0:]
    return MotionTrace(dt_us=trace.dt_us, t=trace.t, accel=accel, vel=vel,
                       speed=speed, rot=rot, pos=pos)


def _rot_ratio_of(trace: MotionTrace) -> float:
    nz = trace.speed > 1e-9
    if not nz.any():
        return 0.6
    return float(trace.rot[nz][0] / trace.speed[nz][0])


# ---------------------------------------------------------------------------
# Scene traces
# ---------------------------------------------------------------------------

APP_OBJECT_COUNTS = {"sponza": 32, "materials": 81, "gldemo": 7, "platformer": 3014}

_POOL_BLOCK = 256


@dataclass
class SceneTrace:
    """Object-count timeline plus drifting object centers.

    Centers are closed-form: object i starts at pool_p0[i] and drifts at
    pool_vel[i] per second, reflecting off the unit-viewport walls, so the
    trace stays compact even for thousands of objects.  Imported traces
    instead carry explicit per-sample centers.
    """

    dt_us: int
    counts: np.ndarray                 # (M,) visible objects per sample
    seed: int
    swap_windows: list = field(default_factory=list)   # [(start, end, n)]
    pool_p0: np.ndarray = None
    pool_vel: np.ndarray = None
    explicit_centers: list = None      # list of (K,2) arrays, or None

    def __post_init__(self):
        if self.pool_p0 is None:
            self.pool_p0 = np.zeros((0, 2))
            self.pool_vel = np.zeros((0, 2))

    @property
    def duration_us(self) -> int:
        return (len(self.counts) - 1) * self.dt_us if len(self.counts) else 0

    def _ensure_pool(self, n: int):
        while len(self.pool_p0) < n:
            block = len(self.pool_p0) // _POOL_BLOCK
            rng = np.random.default_rng([int(self.seed), 90210, block])
            p0 = rng.random((_POOL_BLOCK, 2))
            vel = (rng.random((_POOL_BLOCK, 2)) - 0.5) * 0.1
            self.pool_p0 = np.vstack([self.pool_p0, p0])
            self.pool_vel = np.vstack([self.pool_vel, vel])

    def index_at(self, t_us: int) -> int:
        i = t_us // self.dt_us
        return min(int(i), len(self.counts) - 1)

    def count_at(self, t_us: int) -> int:
        for start, end, n_swap in self.swap_windows:
            if start <= t_us < end:
                return n_swap
        return int(self.counts[self.index_at(t_us)])

    def centers_at(self, t_us: int) -> np.ndarray:
        n = self.count_at(t_us)
        if self.explicit_centers is not None:
            pts = self.explicit_centers[self.index_at(t_us)]
            return pts[:n] if len(pts) >= n else pts
        if n == 0:
            return np.zeros((0, 2))
        self._ensure_pool(n)
        raw = self.pool_p0[:n] + self.pool_vel[:n] * (t_us * 1e-6)
        folded = np.mod(raw, 2.0)
        return np.where(folded > 1.0, 2.0 - folded, folded)

    def centroid_at(self, t_us: int):
        pts = self.centers_at(t_us)
        if len(pts) == 0:
            return (0.5, 0.5)
        c = pts.mean(axis=0)
        return (float(c[0]), float(c[1]))


def generate_scene(app_preset: str, duration_us: int, seed: int = 0,
                   scene_dt_us: int = 50_000, custom_n: int = None) -> SceneTrace:
    """Scene trace for one of the application presets (or `custom`).

    The visible-object count does a bounded, reflecting random walk around
    the preset's base count; walk amplitude is 15% of the base.
    """
    if app_preset == "custom":
        if custom_n is None or custom_n < 0:
            raise ValueError("custom scene requires a non-negative object count")
        base = custom_n
    elif app_preset in APP_OBJECT_COUNTS:
        base = APP_OBJECT_COUNTS[app_preset]
    else:
        raise ValueError(f"unknown app preset {app_preset!r}")

    m = duration_us // scene_dt_us + 1
    rng = np.random.default_rng([int(seed), 77])
    counts = np.full(m, base, dtype=np.int64)
    if base > 0 and m > 1:
        bound = max(1, int(round(0.15 * base)))
        step = max(1, base // 100)
        lo, hi = base - bound, base + bound
        level = base
        for k in range(1, m):
            move = int(rng.integers(-1, 2)) * step
            level = min(hi, max(lo, level + move))
            counts[k] = level
    return SceneTrace(dt_us=scene_dt_us, counts=counts, seed=seed)


def inject_scene_swap(trace: SceneTrace, at_us: int, swap_n: int = SWAP_OBJECT_COUNT,
                      frames: int = 10, frame_period_us: int = 11_111) -> SceneTrace:
    """Force `swap_n` visible objects for the span of `frames` rendered
    frames starting at `at_us`; overlapping swap windows coalesce."""
    if at_us < 0 or at_us > trace.duration_us:
        raise ValueError(f"swap at {at_us} outside trace [0, {trace.duration_us}]")
    start, end = at_us, at_us + frames * frame_period_us
    windows = list(trace.swap_windows)
    merged = [start, end]
    kept = []
    for w in windows:
        if w[0] <= merged[1] and merged[0] <= w[1]:
            merged[0] = min(merged[0], w[0])
            merged[1] = max(merged[1], w[1])
        else:
            kept.append(w)
    kept.append((merged[0], merged[1], swap_n))
    kept.sort()
    return replace(trace, swap_windows=kept)


# ---------------------------------------------------------------------------
# Cost / error / quality models
# ---------------------------------------------------------------------------

@dataclass
class CostErrorModel:
    """Parametric task-cost, pose-error and frame-quality models.

    Localization:  t_vio(v, w, p, l) = (c0 + c_v*v + c_w*w) * p**eta * (h0 + h1*l)
    normalized so that t_vio(v_ref, w_ref, 1, l_max) == vio_base_us exactly.
    Error:         e(p, l) = e0 * exp(kp * (1 - p)) + kl * (l_max - l)
    Render:        R(n, gamma) = gamma * (srr_base_us + (n - n_ref) / k_obj)
    Quality:       q(gamma) = q_max - m_quality * (1 - gamma)
    Reprojection and the small CPU tasks are profiled constants.
    """

    vio_base_us: float = 40_000.0
    v_ref: float = 0.5
    w_ref: float = 0.3
    motion_slope: float = 0.25     # fraction of base time per unit motion score
    crop_exponent: float = 3.0     # eta
    level_h0: float = 0.4
    level_h1: float = 0.15
    err_e0: float = 0.01           # meters at p=1, l=l_max
    err_kp: float = 3.0
    err_kl: float = 0.005          # meters per pyramid level below l_max
    l_min: int = 1
    l_max: int = 4
    imui_us: float = 200.0
    sr_us: float = 500.0
    srr_base_us: float = 5_000.0   # C: render time at gamma=1, n=n_ref
    k_obj: float = 0.2             # K: objects per microsecond of render time
    n_ref: int = 32                # n_B
    atw_us: float = 1_500.0
    atwr_us: float = 2_000.0
    q_max: float = 1.0
    m_quality: float = 0.1

    def scaled(self, factor: float) -> "CostErrorModel":
        """Platform preset: multiply all task costs by `factor` (per-object
        render cost scales too, so k_obj divides)."""
        return replace(self, vio_base_us=self.vio_base_us * factor,
                       imui_us=self.imui_us * factor, sr_us=self.sr_us * factor,
                       srr_base_us=self.srr_base_us * factor,
                       atw_us=self.atw_us * factor, atwr_us=self.atwr_us * factor,
                       k_obj=self.k_obj / factor)

    # -- derived raw constants (c0, c_v, c_w of the formula) ----------------
    @property
    def c_v(self) -> float:
        return self.vio_base_us * self.motion_slope / self.v_ref

    @property
    def c_w(self) -> float:
        return self.vio_base_us * self.motion_slope / self.w_ref

    @property
    def c0(self) -> float:
        return self.vio_base_us * (1.0 - 2.0 * self.motion_slope)

    def _check_pl(self, p: float, l: int):
        if not (0.0 < p <= 1.0):
            raise ValueError(f"crop fraction p={p} outside (0, 1]")
        if not (self.l_min <= l <= self.l_max):
            raise ValueError(f"pyramid level l={l} outside [{self.l_min}, {self.l_max}]")

    def vio_time_us(self, v: float, w: float, p: float = 1.0, l: int = None) -> int:
        if l is None:
            l = self.l_max
        self._check_pl(p, l)
        base = self.c0 + self.c_v * v + self.c_w * w
        ref = self.c0 + self.c_v * self.v_ref + self.c_w * self.w_ref
        level = (self.level_h0 + self.level_h1 * l) / \
                (self.level_h0 + self.level_h1 * self.l_max)
        t = self.vio_base_us * (base / ref) * (p ** self.crop_exponent) * level
        return max(1, int(round(t)))

    def vio_error_m(self, p: float, l: int) -> float:
        self._check_pl(p, l)
        return self.err_e0 * math.exp(self.err_kp * (1.0 - p)) + \
            self.err_kl * (self.l_max - l)

    def render_time_us(self, n: int, gamma: float = 1.0) -> int:
        t = gamma * (self.srr_base_us + (n - self.n_ref) / self.k_obj)
        return max(1, int(round(t)))

    def quality(self, gamma: float) -> float:
        q = self.q_max - self.m_quality * (1.0 - gamma)
        return min(1.0, max(0.0, q))

    def task_time_us(self, task: str, **ctx) -> int:
        """Dispatcher used by the pipeline: VIO needs (v, w, p, l); SRR
        needs (n, gamma); the remaining tasks are profiled constants."""
        if task == "VIO":
            return self.vio_time_us(ctx["v"], ctx["w"], ctx.get("p", 1.0),
                                    ctx.get("l", self.l_max))
        if task == "SRR":
            return self.render_time_us(ctx["n"], ctx.get("gamma", 1.0))
        if task == "IMUi":
            return max(1, int(round(self.imui_us)))
        if task == "SR":
            return max(1, int(round(self.sr_us)))
        if task == "ATW":
            return max(1, int(round(self.atw_us)))
        if task == "ATWR":
            return max(1, int(round(self.atwr_us)))
        raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# Trace file I/O (generic line-oriented CSV; ingestion path for converted
# external datasets)
# ---------------------------------------------------------------------------

def save_motion_csv(trace: MotionTrace, path):
    with open(path, "w") as fp:
        fp.write("t_us,ax,ay,az,v,w,px,py,pz\n")
        for k in range(len(trace.t)):
            a, p = trace.accel[k], trace.pos[k]
            fp.write(f"{trace.t[k]},{a[0]!r},{a[1]!r},{a[2]!r},"
                     f"{trace.speed[k]!r},{trace.rot[k]!r},"
                     f"{p[0]!r},{p[1]!r},{p[2]!r}\n")


def load_motion_csv(path) -> MotionTrace:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = rows[:, 0].astype(np.int64)
    if len(t) < 2:
        raise ValueError("motion trace needs at least two samples")
    dt = int(t[1] - t[0])
    if not np.all(np.diff(t) == dt):
        raise ValueError("motion trace samples must be evenly spaced")
    accel = rows[:, 1:4]
    speed = rows[:, 4]
    rot = rows[:, 5]
    pos = rows[:, 6:9]
    # Velocity vectors are implied by the exact piecewise-constant
    # acceleration integration: p[k+1] = p[k] + v[k] dt + a[k] dt^2 / 2.
    dt_s = dt * 1e-6
    vel = np.zeros_like(pos)
    vel[:-1] = (pos[1:] - pos[:-1]) / dt_s - 0.5 * accel[:-1] * dt_s
    if len(t) > 1:
        vel[-1] = vel[-2] + accel[-2] * dt_s
    return MotionTrace(dt_us=dt, t=t, accel=accel, vel=vel, speed=speed,
                       rot=rot, pos=pos)


def save_scene_csv(trace: SceneTrace, path):
    with open(path, "w") as fp:
        fp.write("t_us,n,centers\n")
        for k in range(len(trace.counts)):
            t = k * trace.dt_us
            pts = trace.centers_at(t)
            flat = ",".join(f"{c!r}" for xy in pts for c in xy)
            n = trace.count_at(t)
            fp.write(f"{t},{n}" + ("," + flat if flat else "") + "\n")


def load_scene_csv(path) -> SceneTrace:
    times, counts, centers = [], [], []
    with open(path) as fp:
        next(fp)
        for line in fp:
            parts = line.strip().split(",")
            if not parts or parts[0] == "":
                continue
            times.append(int(parts[0]))
            n = int(parts[1])
            counts.append(n)
            vals = [float(x) for x in parts[2:]]
            centers.append(np.array(vals, dtype=float).reshape(-1, 2))
    if len(times) < 1:
        raise ValueError("empty scene trace")
    dt = int(times[1] - times[0]) if len(times) > 1 else 50_000
    return SceneTrace(dt_us=dt, counts=np.array(counts, dtype=np.int64),
                      seed=0, explicit_centers=centers)
