"""xrsim: deterministic discrete-event simulator of a standalone XR task
pipeline, comparing scheduling policies and runtime-adaptation controllers
by their per-frame motion-to-display and camera-to-display latencies."""

__version__ = "0.1.0"

from .engine import Engine, GpuStream, Topic
from .workload import (CostErrorModel, MotionTrace, SceneTrace,
                       generate_motion, generate_scene, inject_motion_spike,
                       inject_scene_swap)
from .sched import PeriodConfig, SchedulingError, compute_boxr_periods
from .config import ConfigError, ExperimentConfig, PlatformProfile
from .runner import execute_run, run_sweep

__all__ = [
    "Engine", "GpuStream", "Topic", "CostErrorModel", "MotionTrace",
    "SceneTrace", "generate_motion", "generate_scene", "inject_motion_spike",
    "inject_scene_swap", "PeriodConfig", "SchedulingError",
    "compute_boxr_periods", "ConfigError", "ExperimentConfig",
    "PlatformProfile", "execute_run", "run_sweep", "__version__",
]
