"""Per-run statistics and cross-run comparison.

The frame-derived statistics are computed from plain arrays so that
re-reading the persisted per-frame CSV reproduces them bit-exactly; the
extended fields (dropped inertia work, pose error, contention time) come
from the job logs.
"""

from __future__ import annotations

import json

import numpy as np

M2D_REQUIREMENT_US = 20_000
C2D_REQUIREMENT_US = 80_000

FRAME_CSV_HEADER = ("frame_id,output_us,imu_ts_us,cam_ts_us,m2d_us,c2d_us,"
                    "quality,p,l,gamma,alpha,budget_unmet,motion_class")

_CLASS_ORDER = ("no", "small", "medium", "large")


def frames_to_arrays(frames) -> dict:
    """Column arrays for a FrameRecord list (dtypes match the CSV reader)."""
    n = len(frames)
    return {
        "frame_id": np.array([f.frame_id for f in frames], dtype=np.int64),
        "output_us": np.array([f.output_ts for f in frames], dtype=np.int64),
        "imu_ts_us": np.array([f.imu_ts for f in frames], dtype=np.int64),
        "cam_ts_us": np.array([f.cam_ts for f in frames], dtype=np.int64),
        "m2d_us": np.array([f.m2d_us for f in frames], dtype=np.int64),
        "c2d_us": np.array([f.c2d_us for f in frames], dtype=np.int64),
        "quality": np.array([f.quality for f in frames], dtype=np.float64),
        "p": np.array([f.p for f in frames], dtype=np.float64),
        "l": np.array([f.l for f in frames], dtype=np.int64),
        "gamma": np.array([f.gamma for f in frames], dtype=np.float64),
        "alpha": np.array([f.alpha for f in frames], dtype=np.float64),
        "budget_unmet": np.array([int(f.budget_unmet) for f in frames],
                                 dtype=np.int64),
        "motion_class": np.array([f.motion_class for f in frames], dtype=object)
        if n else np.array([], dtype=object),
    }


def write_frames_csv(arrays: dict, fp):
    fp.write(FRAME_CSV_HEADER + "\n")
    n = len(arrays["frame_id"])
    for i in range(n):
        fp.write(
            f"{arrays['frame_id'][i]},{arrays['output_us'][i]},"
            f"{arrays['imu_ts_us'][i]},{arrays['cam_ts_us'][i]},"
            f"{arrays['m2d_us'][i]},{arrays['c2d_us'][i]},"
            f"{arrays['quality'][i]!r},{arrays['p'][i]!r},{arrays['l'][i]},"
            f"{arrays['gamma'][i]!r},{arrays['alpha'][i]!r},"
            f"{arrays['budget_unmet'][i]},{arrays['motion_class'][i]}\n")


def read_frames_csv(path) -> dict:
    cols = {k: [] for k in ("frame_id", "output_us", "imu_ts_us", "cam_ts_us",
                            "m2d_us", "c2d_us", "quality", "p", "l", "gamma",
                            "alpha", "budget_unmet", "motion_class")}
    with open(path) as fp:
        header = fp.readline().strip()
        if header != FRAME_CSV_HEADER:
            raise ValueError(f"unexpected frame CSV header: {header}")
        for line in fp:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 13:
                continue
            for key, idx, cast in (
                    ("frame_id", 0, int), ("output_us", 1, int),
                    ("imu_ts_us", 2, int), ("cam_ts_us", 3, int),
                    ("m2d_us", 4, int), ("c2d_us", 5, int),
                    ("quality", 6, float), ("p", 7, float), ("l", 8, int),
                    ("gamma", 9, float), ("alpha", 10, float),
                    ("budget_unmet", 11, int), ("motion_class", 12, str)):
                cols[key].append(cast(parts[idx]))
    out = {}
    for k, vals in cols.items():
        if k in ("quality", "p", "gamma", "alpha"):
            out[k] = np.array(vals, dtype=np.float64)
        elif k == "motion_class":
            out[k] = np.array(vals, dtype=object)
        else:
            out[k] = np.array(vals, dtype=np.int64)
    return out


def _series_stats(x: np.ndarray) -> dict:
    xf = x.astype(np.float64)
    return {
        "mean": float(xf.mean()),
        "std": float(xf.std()),            # population std
        "min": int(x.min()),
        "max": int(x.max()),
        "p50": float(np.percentile(xf, 50)),
        "p95": float(np.percentile(xf, 95)),
        "p99": float(np.percentile(xf, 99)),
    }


def frame_stats(arrays: dict, span_us: int) -> dict:
    """Statistics derivable from the per-frame table alone."""
    n = len(arrays["frame_id"])
    if n == 0:
        return {"empty": True, "frame_count": 0, "span_us": int(span_us)}
    m2d, c2d = arrays["m2d_us"], arrays["c2d_us"]
    by_class = {}
    for name in _CLASS_ORDER:
        mask = arrays["motion_class"] == name
        count = int(mask.sum())
        entry = {"count": count}
        if count:
            entry["m2d_mean"] = float(m2d[mask].astype(np.float64).mean())
            entry["c2d_mean"] = float(c2d[mask].astype(np.float64).mean())
        by_class[name] = entry
    return {
        "empty": False,
        "frame_count": n,
        "span_us": int(span_us),
        "fps": n * 1e6 / span_us if span_us > 0 else 0.0,
        "m2d": _series_stats(m2d),
        "c2d": _series_stats(c2d),
        "m2d_miss_pct": 100.0 * float((m2d > M2D_REQUIREMENT_US).sum()) / n,
        "c2d_miss_pct": 100.0 * float((c2d > C2D_REQUIREMENT_US).sum()) / n,
        "mean_quality": float(arrays["quality"].mean()),
        "by_class": by_class,
    }


def dropped_imu_pct(published: int, consumed: int) -> float:
    """Share of published fused poses never read downstream (0/0 -> 0)."""
    if published <= 0:
        return 0.0
    return 100.0 * (published - consumed) / published


def summarize(runtime, warmup_us: int, duration_us: int, meta=None) -> dict:
    """Full run summary: frame statistics over [warmup, duration) plus the
    job-log aggregates."""
    span = max(0, duration_us - warmup_us)
    frames = [f for f in runtime.frames
              if warmup_us <= f.output_ts < duration_us]
    summary = frame_stats(frames_to_arrays(frames), span)
    block = sum(f.gpu_wait for f in frames if f.blocker == "SRR")
    vio_jobs = [j for j in runtime.vio_jobs if j.finish >= warmup_us]
    summary.update({
        "dropped_imu_pct": runtime.dropped_imu_pct(),
        "contention_block_us": int(block),
        "cam_drops": runtime.cam_drops,
        "imui_jobs": runtime.imui_count,
        "sr_jobs": runtime.sr_count,
        "atw_jobs": runtime.atw_count,
        "mvio_budget_violations": runtime.mvio_budget_violations,
        "mean_pos_err_m": float(np.mean([j.err_m for j in vio_jobs]))
        if vio_jobs else 0.0,
        "max_pos_err_m": float(np.max([j.err_m for j in vio_jobs]))
        if vio_jobs else 0.0,
    })
    if meta:
        summary["meta"] = dict(meta)
    return summary


COMPARED_METRICS = (
    ("m2d_mean", ("m2d", "mean"), "lower"),
    ("m2d_std", ("m2d", "std"), "lower"),
    ("c2d_mean", ("c2d", "mean"), "lower"),
    ("c2d_std", ("c2d", "std"), "lower"),
    ("fps", ("fps",), "higher"),
    ("m2d_miss_pct", ("m2d_miss_pct",), "lower"),
    ("c2d_miss_pct", ("c2d_miss_pct",), "lower"),
    ("dropped_imu_pct", ("dropped_imu_pct",), "lower"),
    ("mean_quality", ("mean_quality",), "higher"),
)


def _lookup(summary, path):
    cur = summary
    for key in path:
        if cur is None or key not in cur:
            return None
        cur = cur[key]
    return cur


def compare(named_summaries: list, baseline: str = None) -> dict:
    """Per-metric percentage deltas of every run against the baseline run
    (the first one unless named).  Negative deltas are improvements for
    latency-like metrics; `direction` records which sign is better.
    """
    if not named_summaries:
        raise ValueError("nothing to compare")
    names = [n for n, _ in named_summaries]
    if baseline is None:
        baseline = names[0]
    base = dict(named_summaries)[baseline]
    warnings = []
    seeds = {n: _lookup(s, ("meta", "seed")) for n, s in named_summaries}
    if len({v for v in seeds.values() if v is not None}) > 1:
        warnings.append(f"seed mismatch across runs: {seeds}")
    durs = {n: _lookup(s, ("meta", "duration_us")) for n, s in named_summaries}
    if len({v for v in durs.values() if v is not None}) > 1:
        warnings.append(f"duration mismatch across runs: {durs}")

    rows = []
    for metric, path, direction in COMPARED_METRICS:
        base_val = _lookup(base, path)
        row = {"metric": metric, "direction": direction, "baseline": base_val,
               "runs": {}}
        for name, summary in named_summaries:
            val = _lookup(summary, path)
            entry = {"value": val}
            if name != baseline and val is not None and base_val:
                entry["delta_pct"] = 100.0 * (val - base_val) / base_val
            row["runs"][name] = entry
        rows.append(row)
    return {"baseline": baseline, "order": names, "metrics": rows,
            "warnings": warnings}


def render_comparison(report: dict) -> str:
    """Aligned plain-text table for a comparison report."""
    names = report["order"]
    base = report["baseline"]
    header = ["metric"] + [n if n != base else f"{n}*" for n in names]
    widths = [max(18, len(h)) for h in header]
    lines = []

    def fmt_row(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths))

    lines.append(fmt_row(header))
    lines.append(fmt_row(["-" * w for w in widths]))
    for row in report["metrics"]:
        cells = [row["metric"]]
        for name in names:
            entry = row["runs"][name]
            val = entry.get("value")
            txt = "n/a" if val is None else f"{val:.3f}"
            if "delta_pct" in entry:
                txt += f" ({entry['delta_pct']:+.1f}%)"
            cells.append(txt)
        lines.append(fmt_row(cells))
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def dump_summary_json(summary: dict, fp):
    json.dump(summary, fp, sort_keys=True, indent=2)
    fp.write("\n")
