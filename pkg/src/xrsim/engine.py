"""Deterministic discrete-event engine.

Time base is integer microseconds. The engine owns a future-event list
(a heap ordered by (time, insertion sequence)), a single FIFO GPU stream,
per-task CPU workers with unlimited cross-task concurrency, and
publish-subscribe topics that carry timestamped payloads.

Determinism contract: with identical inputs the event pop order, and
therefore every downstream artifact, is bit-identical across runs.
Equal-time events fire in insertion order, so setup code that wants
sensor samples visible to same-instant job releases must insert the
sensor events first (the pipeline pre-inserts the whole sensor timeline).
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

# Event action kinds used in the event log.
EV_JOB_RELEASE = "job-release"
EV_JOB_START = "job-start"
EV_JOB_FINISH = "job-finish"
EV_SENSOR_SAMPLE = "sensor-sample"
EV_SCENE_CHANGE = "scene-change"
EV_CONTROLLER_HOOK = "controller-hook"

CPU = "CPU"
GPU_STREAM = "GPU_STREAM"


class SimulationError(Exception):
    """Engine-level contract violation (e.g. scheduling into the past)."""


class EventHandle:
    """Permits cancellation of a scheduled event before it fires."""

    __slots__ = ("time", "seq", "cancelled", "fn", "arg")

    def __init__(self, time, seq, fn, arg):
        self.time = time
        self.seq = seq
        self.cancelled = False
        self.fn = fn
        self.arg = arg

    def cancel(self):
        self.cancelled = True


class Engine:
    """Future-event list plus simulation clock.

    Events are callbacks `fn(arg)` invoked with the clock set to their
    timestamp. `schedule` rejects times in the past; scheduling at the
    current instant is allowed and fires after all earlier-inserted
    events at that instant.
    """

    def __init__(self, log_events=False):
        self.now = 0
        self.log_events = log_events
        self.event_log = []
        self._heap = []
        self._seq = 0

    def schedule(self, time, fn, arg=None) -> EventHandle:
        if time < self.now:
            raise SimulationError(
                f"cannot schedule event at t={time} before now={self.now}")
        handle = EventHandle(time, self._seq, fn, arg)
        heapq.heappush(self._heap, (time, self._seq, handle))
        self._seq += 1
        return handle

    def run(self, until):
        """Process all events with time <= until, then set the clock to until."""
        heap = self._heap
        while heap and heap[0][0] <= until:
            time, _, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = time
            handle.fn(handle.arg)
        self.now = until

    def log(self, kind, task="", job_id="", resource="", detail=""):
        if self.log_events:
            self.event_log.append((self.now, kind, task, job_id, resource, detail))

    def dump_event_log(self, fp):
        for rec in self.event_log:
            fp.write("\t".join(str(x) for x in rec) + "\n")


class Topic:
    """Latest-wins topic with a bounded history log for analysis.

    Payloads carry their source-sensor timestamps unmodified; reads
    return the most recently published payload or None if nothing was
    published yet ("no data" signal).
    """

    __slots__ = ("name", "latest", "latest_pub_time", "history", "publish_count")

    def __init__(self, name, history_depth=1024):
        self.name = name
        self.latest = None
        self.latest_pub_time = -1
        self.history = deque(maxlen=history_depth)
        self.publish_count = 0

    def publish(self, now, payload):
        if now < self.latest_pub_time:
            raise SimulationError(
                f"non-monotone publish on topic {self.name}: "
                f"{now} < {self.latest_pub_time}")
        self.latest = payload
        self.latest_pub_time = now
        self.history.append((now, payload))
        self.publish_count += 1

    def read_latest(self):
        """Most recent payload, or None if the topic never received one."""
        return self.latest


class GpuStream:
    """Single non-preemptive FIFO GPU stream.

    Jobs start at max(submission instant, previous job finish); because
    the engine is sequential, submission order equals event order, which
    makes the stream first-in-first-out by construction.
    """

    __slots__ = ("available_at", "last_task", "last_finish", "busy_time")

    def __init__(self):
        self.available_at = 0
        self.last_task = ""
        self.last_finish = 0
        self.busy_time = 0

    def submit(self, now, exec_us, task=""):
        """Reserve the stream; returns (start, finish, queue_wait, blocker).

        `blocker` is the task name of the job that the new one had to wait
        behind, or "" when the stream was idle at submission.
        """
        start = max(now, self.available_at)
        wait = start - now
        blocker = self.last_task if wait > 0 else ""
        finish = start + exec_us
        self.available_at = finish
        self.last_task = task
        self.last_finish = finish
        self.busy_time += exec_us
        return start, finish, wait, blocker


class CpuWorker:
    """One worker per pipeline task: same-task jobs serialize, distinct
    tasks run concurrently (the engine imposes no cross-task limit)."""

    __slots__ = ("busy_until",)

    def __init__(self):
        self.busy_until = 0

    def submit(self, now, exec_us):
        start = max(now, self.busy_until)
        finish = start + exec_us
        self.busy_until = finish
        return start, finish

    def idle_at(self, now):
        return now >= self.busy_until
