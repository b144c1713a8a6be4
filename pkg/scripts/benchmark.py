"""
hystokes - Diagnostic Benchmark
Measures the wall time of each solve stage per method to identify bottlenecks.
Compares condensed and full solves on the same meshes.
"""

import logging
import os
import time
from pathlib import Path
from statistics import mean

import psutil

from hystokes.mesh.generators import build_mesh
from hystokes.scheme.pipeline import HyStokesPipeline

# Configure logging
logging.getLogger("hystokes").setLevel(logging.WARNING)
logging.basicConfig(level=logging.INFO, format="%(message)s")
logger = logging.getLogger("benchmark")

STAGES = ("local_operators", "assembly", "condensation", "factorization", "errors")

# (method, mesh) pairs covering every mesh class
CASES = [
    ("botti_massa", "tri:8"),
    ("rhebergen_wells", "tri:8"),
    ("rtn_new", "tri:8"),
    ("bdfm_new", "cart:8"),
    ("polytopal", "cart:16"),
    ("polytopal", "hexa:8"),
]
DEGREES = (0, 1, 2)
REPEATS = 2


def get_memory_mb() -> float:
    process = psutil.Process(os.getpid())
    return process.memory_info().rss / 1024 / 1024


def run_case(pipeline: HyStokesPipeline, method: str, spec: str, k: int, condense: bool) -> dict[str, list[float]]:
    """Solve one case ``REPEATS`` times and collect per-stage timings."""
    stats: dict[str, list[float]] = {stage: [] for stage in (*STAGES, "total")}
    mesh = build_mesh(spec)
    config = pipeline.configure(method, k, mesh)
    for _ in range(REPEATS):
        t0 = time.time()
        result = pipeline.run(mesh, config, condense_system=condense)
        stats["total"].append((time.time() - t0) * 1000)
        for stage in STAGES:
            stats[stage].append(result.timings_ms.get(stage, 0.0))
    return stats


def print_row(label: str, size: int, stats: dict[str, list[float]]) -> None:
    cells = " | ".join(f"{mean(stats[stage]):8.1f}" for stage in (*STAGES, "total"))
    print(f"{label:<28} | {size:>6} | {cells}")


def run_benchmark() -> None:
    logger.info("=" * 110)
    logger.info("🚀 hystokes Diagnostic Benchmark")
    logger.info("=" * 110)

    logger.info(f"💾 Initial Memory: {get_memory_mb():.2f} MB")
    config_dir = Path("config")
    pipeline = HyStokesPipeline(config_dir=config_dir if config_dir.is_dir() else None)
    logger.info(f"🧵 Threads: {pipeline.threads}")

    # Warm-up
    pipeline.run(build_mesh("cart:2"), pipeline.configure("polytopal", 0))

    header = " | ".join(f"{stage[:8]:>8}" for stage in (*STAGES, "total"))
    logger.info(f"\n{'case':<28} | {'size':>6} | {header}")
    logger.info("-" * 110)
    for method, spec in CASES:
        for k in DEGREES:
            if k < pipeline.registry.get_spec(method).min_k:
                continue
            for condense in (True, False):
                stats = run_case(pipeline, method, spec, k, condense)
                mesh = build_mesh(spec)
                config = pipeline.configure(method, k, mesh)
                size = pipeline.run(mesh, config, condense_system=condense, compute_errors=False).solution.solved_size
                label = f"{method} k={k} {spec}{'' if condense else ' full'}"
                print_row(label, size, stats)

    snapshot = pipeline.metrics.get_snapshot()
    logger.info("\n" + "=" * 110)
    logger.info("📊 STAGE TOTALS")
    logger.info("=" * 110)
    for stage, perf in snapshot.stages_performance.items():
        logger.info(f"   {stage:<16} avg {perf['avg_time_ms']:8.2f} ms  max {perf['max_time_ms']:8.2f} ms")
    logger.info(f"   largest system: {snapshot.largest_system}, max residual: {snapshot.max_residual:.2e}")
    logger.info(f"\n💾 Peak Memory Usage: {snapshot.peak_memory_mb:.2f} MB")
    logger.info("=" * 110)


if __name__ == "__main__":
    run_benchmark()
