"""The XR task pipeline: VIO, IMUi, SR, SRR, ATW, ATWR.

Dataflow (publisher-subscriber): camera frames feed VIO which publishes a
raw pose; IMUi extrapolates the raw pose to the latest inertia sample and
publishes a fused pose; SR computes a viewport from the fused pose and its
completion activates SRR, which renders a 2D frame on the GPU stream; ATW
builds a view matrix from the up-to-date fused pose and ATWR reprojects
the latest 2D frame on the same GPU stream, emitting one displayed frame.

Every payload carries the source-sensor timestamps it derives from, so
each displayed frame knows the inertia instant behind its view matrix
(motion-to-display age) and the camera instant behind its 2D content
(camera-to-display age).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (CPU, EV_JOB_FINISH, EV_JOB_START, EV_SENSOR_SAMPLE,
                     GPU_STREAM, CpuWorker, GpuStream, Topic)
from . import mvio as mvio_mod
from . import sfr as sfr_mod
from .workload import MOTION_CLASS_NAMES

TASKS = ("VIO", "IMUi", "SR", "SRR", "ATW", "ATWR")
TASK_RESOURCE = {"VIO": CPU, "IMUi": CPU, "SR": CPU, "ATW": CPU,
                 "SRR": GPU_STREAM, "ATWR": GPU_STREAM}


@dataclass(slots=True)
class PoseSample:
    position: np.ndarray
    imu_ts: int        # latest inertia incorporated
    cam_ts: int        # camera frame the raw pose derives from
    kind: str          # "raw" | "fused"
    p: float
    l: int
    pose_id: int


@dataclass(slots=True)
class Frame2D:
    cam_ts: int
    imu_ts: int
    p: float
    l: int
    gamma: float
    alpha: float
    budget_unmet: bool
    quality: float
    render_ts: int
    chain: int


@dataclass(slots=True)
class FrameRecord:
    frame_id: int
    output_ts: int     # reprojection finish on the GPU stream
    imu_ts: int        # carried by the view matrix
    cam_ts: int        # carried by the 2D frame
    quality: float
    gamma: float
    alpha: float
    budget_unmet: bool
    p: float
    l: int
    motion_class: str
    gpu_wait: int      # ATWR queue wait on the GPU stream
    blocker: str       # task the ATWR waited behind ("" if none)
    chain: int
    atwr_submit_ts: int

    @property
    def m2d_us(self) -> int:
        return self.output_ts - self.imu_ts

    @property
    def c2d_us(self) -> int:
        return self.output_ts - self.cam_ts


@dataclass(slots=True)
class VioJob:
    release: int
    start: int
    finish: int
    cam_ts: int
    score: float
    p: float
    l: int
    duration_us: int
    err_m: float
    bounded: bool


@dataclass(slots=True)
class SrrJob:
    submit: int
    start: int
    finish: int
    duration_us: int
    n: int
    gamma: float
    alpha: float
    gpu_wait: int
    blocker: str
    chain: int
    budget_unmet: bool


class PipelineRuntime:
    """Shared task machinery; a scheduling policy decides when jobs release.

    Camera input is depth-1 with supersession: a frame arriving while VIO
    runs is processed next, and an older unprocessed frame is dropped
    (counted).  SRR activations coalesce latest-wins under the baseline
    policies (topics cannot buffer stale viewports without unbounded
    staleness); the contention-preventive policy queues its chain renders
    FIFO instead, since its release cadence already paces them.
    """

    def __init__(self, engine, motion, scene, model, seed=0,
                 mvio_profile=None, sfr_profile=None, srr_fifo=False):
        self.engine = engine
        self.motion = motion
        self.scene = scene
        self.model = model
        self.mvio_profile = mvio_profile
        self.sfr_profile = sfr_profile
        self.srr_fifo = srr_fifo

        self.raw_pose = Topic("raw_pose")
        self.fused_pose = Topic("fused_pose")
        self.frame_2d = Topic("frame_2d")

        self.gpu = GpuStream()
        self.imui_worker = CpuWorker()

        self.vio_busy = False
        self.vio_pending = None
        self.srr_busy = False
        self.srr_pending = []
        self.atw_busy = False

        self.frames = []
        self.vio_jobs = []
        self.srr_jobs = []
        self.cam_drops = 0
        self.imui_count = 0
        self.sr_count = 0
        self.atw_count = 0
        self.fused_published = 0
        self.fused_consumed = set()
        self.mvio_budget_violations = 0

        # Policy hooks.
        self.on_vio_finish = None
        self.on_srr_finish = None
        self.on_atwr_finish = None

        self._pose_seq = 0
        self._frame_seq = 0
        self._err_rng = np.random.default_rng([int(seed), 13])

    # ------------------------------------------------------------------
    # Sensors
    # ------------------------------------------------------------------
    def on_cam(self, cam_ts):
        self.engine.log(EV_SENSOR_SAMPLE, task="CAM", detail=f"cam_ts={cam_ts}")
        if self.vio_busy:
            if self.vio_pending is not None:
                self.cam_drops += 1
            self.vio_pending = cam_ts
        else:
            self._start_vio(cam_ts)

    def on_imu(self, sample_ts):
        """Baseline policies: every inertia sample triggers an IMUi job."""
        self.engine.log(EV_SENSOR_SAMPLE, task="IMU", detail=f"t={sample_ts}")
        now = self.engine.now
        start, finish = self.imui_worker.submit(now, self.model.task_time_us("IMUi"))
        raw = self.raw_pose.read_latest()
        self.engine.schedule(finish, self._finish_periodic_imui, (raw, sample_ts))

    def _finish_periodic_imui(self, arg):
        raw, sample_ts = arg
        if raw is None:
            return   # startup transient: nothing to extrapolate yet
        self._publish_fused(raw, sample_ts)

    # ------------------------------------------------------------------
    # VIO
    # ------------------------------------------------------------------
    def _start_vio(self, cam_ts):
        now = self.engine.now
        v = self.motion.speed_sample(now)
        w = self.motion.rot_sample(now)
        if self.mvio_profile is not None:
            decision = mvio_mod.decide(v, w, self.motion.accel_at(now),
                                       self.mvio_profile)
            score, p, l = decision.score, decision.p, decision.l
        else:
            score, p, l = 0.0, 1.0, self.model.l_max
        duration = self.model.vio_time_us(v, w, p, l)
        job = VioJob(release=now, start=now, finish=now + duration,
                     cam_ts=cam_ts, score=score, p=p, l=l,
                     duration_us=duration, err_m=0.0, bounded=False)
        self.vio_busy = True
        self.engine.log(EV_JOB_START, task="VIO", resource=CPU,
                        detail=f"cam_ts={cam_ts} p={p:.3f} l={l} dur={duration}")
        if self.mvio_profile is not None and score <= self.mvio_profile.s_max \
                and duration > self.mvio_profile.budget_us * 1.05:
            self.mvio_budget_violations += 1
        self.engine.schedule(job.finish, self._finish_vio, job)

    def _finish_vio(self, job):
        now = self.engine.now
        gt = self.motion.pos_at(job.cam_ts)
        err_mag = self.model.vio_error_m(job.p, job.l)
        direction = self._err_rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pose = gt + direction * err_mag
        if self.mvio_profile is not None:
            prev = self.raw_pose.read_latest()
            if prev is not None:
                bounded = mvio_mod.error_bound(
                    pose, prev.position, self.motion.vel_at(job.start),
                    self.motion.accel_at(job.start), job.duration_us)
                job.bounded = bounded is not pose
                pose = bounded
        job.err_m = float(np.linalg.norm(pose - gt))
        self._pose_seq += 1
        sample = PoseSample(position=pose,
                            imu_ts=self.motion.sample_ts(job.cam_ts),
                            cam_ts=job.cam_ts, kind="raw", p=job.p, l=job.l,
                            pose_id=self._pose_seq)
        self.raw_pose.publish(now, sample)
        self.vio_jobs.append(job)
        self.engine.log(EV_JOB_FINISH, task="VIO", resource=CPU,
                        detail=f"cam_ts={job.cam_ts} err={job.err_m:.4f}")
        self.vio_busy = False
        if self.on_vio_finish is not None:
            self.on_vio_finish(job)
        if self.vio_pending is not None:
            pending, self.vio_pending = self.vio_pending, None
            self._start_vio(pending)

    # ------------------------------------------------------------------
    # Fused pose
    # ------------------------------------------------------------------
    def _publish_fused(self, raw, sample_ts):
        dt = (sample_ts - raw.cam_ts) * 1e-6
        vel = self.motion.vel_at(raw.cam_ts)
        acc = self.motion.accel_at(raw.cam_ts)
        pos = raw.position + vel * dt + 0.5 * acc * dt * dt
        self._pose_seq += 1
        fused = PoseSample(position=pos, imu_ts=sample_ts, cam_ts=raw.cam_ts,
                           kind="fused", p=raw.p, l=raw.l,
                           pose_id=self._pose_seq)
        self.fused_pose.publish(self.engine.now, fused)
        self.fused_published += 1
        self.imui_count += 1
        return fused

    def run_ondemand_imui(self, done_fn):
        """Contention-preventive policy: sample the inertia reading and
        fuse at the beginning of an SR or ATW job; `done_fn(fused)` resumes
        the chain at the IMUi finish instant (fused poses produced this way
        are consumed by the requesting job by construction)."""
        now = self.engine.now
        raw = self.raw_pose.read_latest()
        finish = now + self.model.task_time_us("IMUi")
        sample_ts = self.motion.sample_ts(now)
        self.engine.schedule(finish, self._finish_ondemand_imui,
                             (raw, sample_ts, done_fn))

    def _finish_ondemand_imui(self, arg):
        raw, sample_ts, done_fn = arg
        if raw is None:
            done_fn(None)
            return
        fused = self._publish_fused(raw, sample_ts)
        self.fused_consumed.add(fused.pose_id)
        done_fn(fused)

    # ------------------------------------------------------------------
    # SR -> SRR
    # ------------------------------------------------------------------
    def run_sr(self, fused=None, chain=-1):
        """One viewport-computation job; on completion the render job
        activates with the pose snapshot this SR consumed.  Returns False
        when no fused pose exists yet (startup transient)."""
        now = self.engine.now
        if fused is None:
            fused = self.fused_pose.read_latest()
            if fused is None:
                return False
            self.fused_consumed.add(fused.pose_id)
        self.sr_count += 1
        self.engine.log(EV_JOB_START, task="SR", resource=CPU,
                        detail=f"pose={fused.pose_id}")
        finish = now + self.model.task_time_us("SR")
        self.engine.schedule(finish, self._finish_sr, (fused, chain))
        return True

    def _finish_sr(self, arg):
        fused, chain = arg
        self.engine.log(EV_JOB_FINISH, task="SR", resource=CPU)
        if self.srr_busy:
            if self.srr_fifo:
                self.srr_pending.append(arg)
            else:
                self.srr_pending = [arg]   # latest wins
        else:
            self._start_srr(arg)

    def _start_srr(self, payload):
        fused, chain = payload
        now = self.engine.now
        n = self.scene.count_at(now)
        if self.sfr_profile is not None:
            decision = sfr_mod.decide(n, self.scene.centers_at(now),
                                      self.sfr_profile)
            gamma, alpha, unmet = (decision.gamma, decision.alpha,
                                   decision.budget_unmet)
        else:
            gamma, alpha, unmet = 1.0, 1.0, False
        duration = self.model.render_time_us(n, gamma)
        start, finish, wait, blocker = self.gpu.submit(now, duration, "SRR")
        job = SrrJob(submit=now, start=start, finish=finish,
                     duration_us=duration, n=n, gamma=gamma, alpha=alpha,
                     gpu_wait=wait, blocker=blocker, chain=chain,
                     budget_unmet=unmet)
        self.srr_busy = True
        self.engine.log(EV_JOB_START, task="SRR", resource=GPU_STREAM,
                        detail=f"n={n} gamma={gamma:.3f} wait={wait}")
        self.engine.schedule(finish, self._finish_srr, (job, fused))

    def _finish_srr(self, arg):
        job, fused = arg
        now = self.engine.now
        frame = Frame2D(cam_ts=fused.cam_ts, imu_ts=fused.imu_ts, p=fused.p,
                        l=fused.l, gamma=job.gamma, alpha=job.alpha,
                        budget_unmet=job.budget_unmet,
                        quality=self.model.quality(job.gamma),
                        render_ts=now, chain=job.chain)
        self.frame_2d.publish(now, frame)
        self.srr_jobs.append(job)
        self.engine.log(EV_JOB_FINISH, task="SRR", resource=GPU_STREAM,
                        detail=f"cam_ts={frame.cam_ts}")
        self.srr_busy = False
        if self.on_srr_finish is not None:
            self.on_srr_finish(job)
        if self.srr_pending:
            self._start_srr(self.srr_pending.pop(0))

    # ------------------------------------------------------------------
    # ATW -> ATWR
    # ------------------------------------------------------------------
    def run_atw(self, fused=None, chain=-1):
        """One reprojection chain; reads the up-to-date fused pose and the
        latest 2D frame at the start of the view-matrix computation.
        Returns False during startup transients (no frame or pose yet)."""
        now = self.engine.now
        frame2d = self.frame_2d.read_latest()
        if frame2d is None:
            return False
        if fused is None:
            fused = self.fused_pose.read_latest()
            if fused is None:
                return False
            self.fused_consumed.add(fused.pose_id)
        self.atw_count += 1
        self.atw_busy = True
        self.engine.log(EV_JOB_START, task="ATW", resource=CPU,
                        detail=f"pose={fused.pose_id} cam_ts={frame2d.cam_ts}")
        finish = now + self.model.task_time_us("ATW")
        self.engine.schedule(finish, self._finish_atw, (fused, frame2d, chain))
        return True

    def _finish_atw(self, arg):
        fused, frame2d, chain = arg
        now = self.engine.now
        duration = self.model.task_time_us("ATWR")
        start, finish, wait, blocker = self.gpu.submit(now, duration, "ATWR")
        self.engine.log(EV_JOB_START, task="ATWR", resource=GPU_STREAM,
                        detail=f"wait={wait} blocker={blocker}")
        self.engine.schedule(finish, self._finish_atwr,
                             (fused, frame2d, chain, now, wait, blocker))

    def _finish_atwr(self, arg):
        fused, frame2d, chain, submit_ts, wait, blocker = arg
        now = self.engine.now
        self._frame_seq += 1
        rec = FrameRecord(
            frame_id=self._frame_seq, output_ts=now, imu_ts=fused.imu_ts,
            cam_ts=frame2d.cam_ts, quality=frame2d.quality,
            gamma=frame2d.gamma, alpha=frame2d.alpha,
            budget_unmet=frame2d.budget_unmet, p=frame2d.p, l=frame2d.l,
            motion_class=MOTION_CLASS_NAMES[self.motion.class_at(frame2d.cam_ts)],
            gpu_wait=wait, blocker=blocker, chain=chain,
            atwr_submit_ts=submit_ts)
        self.frames.append(rec)
        self.engine.log(EV_JOB_FINISH, task="ATWR", resource=GPU_STREAM,
                        detail=f"m2d={rec.m2d_us} c2d={rec.c2d_us}")
        self.atw_busy = False
        if self.on_atwr_finish is not None:
            self.on_atwr_finish(rec)

    # ------------------------------------------------------------------
    def dropped_imu_pct(self) -> float:
        """Share of published fused poses never read by any SR or ATW job."""
        if self.fused_published == 0:
            return 0.0
        unread = self.fused_published - len(self.fused_consumed)
        return 100.0 * unread / self.fused_published
