import json
import threading
import time
from collections import defaultdict, deque
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any


@dataclass
class MetricsSnapshot:
    """Snapshot of run metrics at a point in time"""

    timestamp: float
    total_solves: int
    failed_solves: int
    avg_solve_time_ms: float
    max_residual: float
    largest_system: int
    memory_usage_mb: float
    peak_memory_mb: float
    stages_performance: dict[str, dict[str, float]]


class RunMetrics:
    """Thread-safe collection of stage timings, system sizes and solver residuals"""

    def __init__(self, window_size: int = 1000):
        self._lock = threading.RLock()
        self.window_size = window_size

        self.total_solves = 0
        self.failed_solves = 0

        # Sliding windows
        self.solve_times: deque = deque(maxlen=window_size)
        self.residuals: deque = deque(maxlen=window_size)
        self.system_sizes: deque = deque(maxlen=window_size)

        self.stage_metrics: defaultdict = defaultdict(lambda: {"count": 0, "total_time": 0.0, "max_time": 0.0})

        self.peak_memory_mb = 0.0
        self.error_count = 0
        self.last_errors: deque = deque(maxlen=100)

    def record_stage(self, stage: str, elapsed_ms: float) -> None:
        """Record the wall time of one pipeline stage"""
        with self._lock:
            metrics = self.stage_metrics[stage]
            metrics["count"] += 1
            metrics["total_time"] += elapsed_ms
            metrics["max_time"] = max(metrics["max_time"], elapsed_ms)
            self.peak_memory_mb = max(self.peak_memory_mb, self.get_memory_usage())

    def record_solve(self, full_size: int, condensed_size: int, residual: float, elapsed_ms: float) -> None:
        with self._lock:
            self.total_solves += 1
            self.solve_times.append(elapsed_ms)
            self.residuals.append(residual)
            self.system_sizes.append((full_size, condensed_size))
            self.peak_memory_mb = max(self.peak_memory_mb, self.get_memory_usage())

    def record_error(self, error: str, context: dict[str, Any] | None = None) -> None:
        """Record a failed solve or self-check"""
        with self._lock:
            self.failed_solves += 1
            self.error_count += 1
            self.last_errors.append({"timestamp": time.time(), "error": error, "context": context or {}})

    @property
    def avg_solve_time(self) -> float:
        with self._lock:
            if not self.solve_times:
                return 0.0
            return float(sum(self.solve_times) / len(self.solve_times))

    @property
    def max_residual(self) -> float:
        with self._lock:
            return float(max(self.residuals, default=0.0))

    def get_memory_usage(self) -> float:
        """Get current memory usage in MB"""
        try:
            import psutil

            process = psutil.Process()
            return float(process.memory_info().rss / 1024 / 1024)
        except ImportError:
            return 0.0

    def get_snapshot(self) -> MetricsSnapshot:
        with self._lock:
            stages_perf = {}
            for stage_name, metrics in self.stage_metrics.items():
                avg_time = metrics["total_time"] / metrics["count"] if metrics["count"] else 0.0
                stages_perf[stage_name] = {
                    "avg_time_ms": avg_time,
                    "max_time_ms": metrics["max_time"],
                    "total_time_ms": metrics["total_time"],
                    "count": metrics["count"],
                }

            return MetricsSnapshot(
                timestamp=time.time(),
                total_solves=self.total_solves,
                failed_solves=self.failed_solves,
                avg_solve_time_ms=self.avg_solve_time,
                max_residual=self.max_residual,
                largest_system=max((full for full, _ in self.system_sizes), default=0),
                memory_usage_mb=self.get_memory_usage(),
                peak_memory_mb=self.peak_memory_mb,
                stages_performance=stages_perf,
            )

    def export_metrics(self) -> dict[str, Any]:
        """Export all metrics for embedding in JSON outputs"""
        with self._lock:
            snapshot = self.get_snapshot()

            return {
                "snapshot": asdict(snapshot),
                "system_sizes": [list(sizes) for sizes in self.system_sizes],
                "residuals": list(self.residuals),
                "error_count": self.error_count,
                "last_errors": list(self.last_errors),
            }

    def save_metrics(self, filepath: Path) -> None:
        metrics_data = self.export_metrics()

        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w") as f:
            json.dump(metrics_data, f, indent=2, default=str)

    def reset(self) -> None:
        with self._lock:
            self.total_solves = 0
            self.failed_solves = 0
            self.solve_times.clear()
            self.residuals.clear()
            self.system_sizes.clear()
            self.stage_metrics.clear()
            self.peak_memory_mb = 0.0
            self.error_count = 0
            self.last_errors.clear()


class StageTimer:
    """Context manager that reports elapsed wall time of a block to RunMetrics"""

    def __init__(self, metrics: RunMetrics | None, stage: str):
        self.metrics = metrics
        self.stage = stage
        self.elapsed_ms = 0.0
        self._start = 0.0

    def __enter__(self) -> "StageTimer":
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc: object) -> None:
        self.elapsed_ms = (time.perf_counter() - self._start) * 1000
        if self.metrics is not None:
            self.metrics.record_stage(self.stage, self.elapsed_ms)
