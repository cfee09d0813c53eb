"""Scheduling policies over the pipeline.

Three strategies are implemented as pluggable drivers:

* baseline publisher-subscriber (`illixr`): IMUi fires per inertia sample;
  SR and ATW free-run at their own periods (releases stay on the period
  grid; a release finding its task still busy is skipped), SRR follows SR,
  ATWR follows ATW, and the GPU stream arbitrates FIFO.
* period-tuned baseline (`illixr-op`): identical structure with user- or
  harness-tuned SR/ATW periods.
* contention-preventive scheduling (`boxr-s`, and `boxr` when the runtime
  adaptation controllers are attached): each camera-localization finish
  anchors m synchronous chains, spaced T_SR apart, that run
  IMUi-SR-SRR then IMUi-ATW-ATWR back to back, with IMUi executed
  on demand at the beginning of each SR and ATW job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import EV_JOB_RELEASE

POLICY_NAMES = ("illixr", "illixr-op", "boxr-s", "boxr")


class SchedulingError(Exception):
    """Raised when a period configuration is infeasible on the platform."""


@dataclass
class PeriodConfig:
    t_cam_us: int
    t_imu_us: int
    t_atw_us: int
    sr_period_us: int = None    # baselines; defaults to t_atw_us
    m: int = None               # contention-preventive chain count
    t_sr_us: int = None         # contention-preventive chain spacing

    def __post_init__(self):
        if self.sr_period_us is None:
            self.sr_period_us = self.t_atw_us
        if min(self.t_cam_us, self.t_imu_us, self.t_atw_us,
               self.sr_period_us) <= 0:
            raise SchedulingError("periods must be positive")
        if not (self.t_cam_us > self.t_atw_us):
            raise SchedulingError(
                f"T_CAM={self.t_cam_us} must exceed T_ATW={self.t_atw_us}")
        # T_ATW >> T_IMU is an assumption of the chain schedule; the
        # baselines may run tighter ATW periods (e.g. the 8 ms default).
        if self.m is not None and not (self.t_atw_us >= 2 * self.t_imu_us):
            raise SchedulingError(
                f"T_ATW={self.t_atw_us} must be at least 2*T_IMU="
                f"{2 * self.t_imu_us} for the chain schedule")

    @property
    def t_vio_us(self) -> int:
        return self.t_cam_us   # the localization period equals the camera's


def chain_lower_bound_us(model) -> int:
    """Minimum chain spacing that leaves reprojection room between two
    renders: t_IMUi + t_SRR + t_ATW + t_ATWR (profiled constants)."""
    return (model.task_time_us("IMUi") + model.task_time_us("SRR", n=model.n_ref)
            + model.task_time_us("ATW") + model.task_time_us("ATWR"))


def compute_boxr_periods(t_vio_us: int, t_atw_us: int, model) -> tuple:
    """Chain count and spacing for the contention-preventive schedule.

    m = ceil(T_VIO / T_ATW) chains tile T_VIO with spacing T_SR = T_VIO/m
    (floored to whole microseconds; the remainder lands on the last
    chain).  If T_SR falls below the lower bound it is raised to it and m
    recomputed as floor(T_VIO / T_SR); a bound exceeding T_VIO means the
    platform cannot fit even one chain per localization period.
    """
    if t_vio_us <= 0 or t_atw_us <= 0:
        raise SchedulingError("periods must be positive")
    m = -(-t_vio_us // t_atw_us)
    t_sr = t_vio_us // m
    bound = chain_lower_bound_us(model)
    if t_sr < bound:
        if bound > t_vio_us:
            raise SchedulingError(
                f"budget infeasible on this platform: chain lower bound "
                f"{bound} us exceeds T_VIO {t_vio_us} us")
        t_sr = bound
        m = t_vio_us // t_sr
    return m, t_sr


def chain_release_times(vio_finish_us: int, m: int, t_sr_us: int) -> list:
    """First-epoch SR release instants: vio_finish + k*T_SR, k = 0..m-1."""
    return [vio_finish_us + k * t_sr_us for k in range(m)]


class BaselinePolicy:
    """Free-running periodic schedule (`illixr` / `illixr-op`).

    SR releases carry a half-period phase offset relative to ATW so the
    two loops do not start aligned (asynchronous threads in the modeled
    system have no common phase).  Releases stay on their period grid;
    when a task's previous job chain is still in flight the release is
    skipped to the next grid point.
    """

    def __init__(self, runtime, periods: PeriodConfig, duration_us: int):
        self.rt = runtime
        self.periods = periods
        self.duration_us = duration_us
        self._sr_busy_until = 0

    def install(self):
        rt, eng = self.rt, self.rt.engine
        # Sensor timeline first: equal-time sensor samples must be visible
        # to job releases at the same instant (insertion-order tie-break).
        t_cam, t_imu = self.periods.t_cam_us, self.periods.t_imu_us
        for t in range(0, self.duration_us + 1, t_cam):
            eng.schedule(t, rt.on_cam, t)
        for t in range(0, self.duration_us + 1, t_imu):
            eng.schedule(t, rt.on_imu, t)
        sr0 = self.periods.sr_period_us // 2
        if sr0 <= self.duration_us:
            eng.schedule(sr0, self._sr_tick, None)
        eng.schedule(0, self._atw_tick, None)

    def _sr_tick(self, _):
        eng = self.rt.engine
        now = eng.now
        if now >= self._sr_busy_until:
            eng.log(EV_JOB_RELEASE, task="SR")
            if self.rt.run_sr():
                self._sr_busy_until = now + self.rt.model.task_time_us("SR")
        nxt = now + self.periods.sr_period_us
        if nxt <= self.duration_us:
            eng.schedule(nxt, self._sr_tick, None)

    def _atw_tick(self, _):
        eng = self.rt.engine
        now = eng.now
        if not self.rt.atw_busy:
            eng.log(EV_JOB_RELEASE, task="ATW")
            self.rt.run_atw()
        nxt = now + self.periods.t_atw_us
        if nxt <= self.duration_us:
            eng.schedule(nxt, self._atw_tick, None)


class BoxrPolicy:
    """Contention-preventive chains with on-demand IMUi.

    Chains release at T_SR cadence anchored to the most recent
    localization finish.  The pending release is rebuilt whenever a new
    localization finishes; the first release of a new epoch never comes
    earlier than T_SR after the previous release, so in-flight chains keep
    their reprojection slot even when localization overruns its period.
    """

    def __init__(self, runtime, periods: PeriodConfig, duration_us: int):
        if periods.m is None or periods.t_sr_us is None:
            raise SchedulingError("chain parameters (m, T_SR) are required")
        self.rt = runtime
        self.periods = periods
        self.duration_us = duration_us
        self._next_release = None    # EventHandle
        self._last_release = None
        self._chain_seq = 0
        runtime.srr_fifo = True
        runtime.on_vio_finish = self._on_vio_finish
        runtime.on_srr_finish = self._on_srr_finish

    def install(self):
        rt, eng = self.rt, self.rt.engine
        for t in range(0, self.duration_us + 1, self.periods.t_cam_us):
            eng.schedule(t, rt.on_cam, t)

    # -- chain release bookkeeping --------------------------------------
    def _on_vio_finish(self, job):
        now = self.rt.engine.now
        if self._next_release is not None:
            self._next_release.cancel()
            self._next_release = None
        first = now
        if self._last_release is not None:
            first = max(first, self._last_release + self.periods.t_sr_us)
        if first <= self.duration_us:
            self._next_release = self.rt.engine.schedule(
                first, self._release_chain, None)

    def _schedule_next_release(self):
        nxt = self._last_release + self.periods.t_sr_us
        if nxt <= self.duration_us:
            self._next_release = self.rt.engine.schedule(
                nxt, self._release_chain, None)
        else:
            self._next_release = None

    def _release_chain(self, _):
        rt, eng = self.rt, self.rt.engine
        self._last_release = eng.now
        self._chain_seq += 1
        chain = self._chain_seq
        eng.log(EV_JOB_RELEASE, task="SR", job_id=str(chain), detail="chain")
        rt.run_ondemand_imui(lambda fused, c=chain: self._sr_side(fused, c))
        self._schedule_next_release()

    def _sr_side(self, fused, chain):
        if fused is None:
            return   # startup: no raw pose yet, chain aborts
        self.rt.run_sr(fused=fused, chain=chain)

    def _on_srr_finish(self, srr_job):
        if srr_job.chain < 0:
            return
        self.rt.run_ondemand_imui(
            lambda fused, c=srr_job.chain: self._atw_side(fused, c))

    def _atw_side(self, fused, chain):
        if fused is None:
            return
        self.rt.engine.log(EV_JOB_RELEASE, task="ATW", job_id=str(chain),
                           detail="chain")
        self.rt.run_atw(fused=fused, chain=chain)
