from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..analysis.norms import ErrorReport, error_report
from ..analysis.problems import ProblemSpec, manufactured
from ..mesh.mesh import Mesh
from ..utils.analytics import ResultsArchive
from ..utils.config import ConfigManager, HyStokesConfig
from ..utils.logger import get_logger
from ..utils.metrics import RunMetrics, StageTimer
from .assembly import GlobalSystem, assemble
from .element import LocalElement, build_elements
from .methods import MethodConfig, MethodRegistry, make_config
from .solver import HybridSolution, condense, solve

logger = get_logger(__name__)


@dataclass
class RunResult:
    """Everything produced by one solve: configuration, system, solution and errors."""

    mesh: Mesh
    config: MethodConfig
    problem: ProblemSpec
    system: GlobalSystem
    solution: HybridSolution
    report: ErrorReport | None
    elements: list[LocalElement] = field(repr=False)
    timings_ms: dict[str, float] = field(default_factory=dict)

    def row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "method": self.config.name,
            "mesh": self.mesh.name,
            "nu": self.problem.nu,
            "k": self.config.k,
        }
        if self.report is not None:
            row.update(self.report.to_row())
        return row


class HyStokesPipeline:
    """
    Configured solve pipeline: method registry, run-level settings, metrics and (optionally) the
    DuckDB results archive.
    """

    settings: HyStokesConfig
    registry: MethodRegistry
    metrics: RunMetrics
    archive: ResultsArchive | None

    def __init__(self, settings: HyStokesConfig | None = None, config_dir: Path | None = None):
        """
        Args:
            settings: Run-level configuration. If None, ``hystokes.yaml`` is loaded from
                      ``config_dir`` (or from a ``config`` directory in the CWD) when present.
            config_dir: Directory holding ``hystokes.yaml`` and ``methods.yaml``.
        """
        if config_dir is None:
            cwd_config = Path("config")
            if cwd_config.is_dir():
                config_dir = cwd_config
                logger.debug(f"Auto-detected config directory: {config_dir.absolute()}")

        if settings is None:
            settings = ConfigManager(config_dir / "hystokes.yaml" if config_dir else None).config
        self.settings = settings

        methods_path = settings.methods_config_path
        if methods_path is None and config_dir is not None:
            methods_path = config_dir / "methods.yaml"
        self.registry = MethodRegistry(methods_path)

        self.metrics = RunMetrics()
        self.archive = ResultsArchive(settings.results_db_path) if settings.results_db_path else None
        logger.debug(f"hystokes pipeline initialized (threads={self.threads}, condense={settings.condense})")

    @property
    def threads(self) -> int:
        return self.settings.resolved_threads()

    def configure(self, method: str, k: int, mesh: Mesh | None = None, **overrides: Any) -> MethodConfig:
        """Method configuration at degree k; run-level defaults apply where no override is given."""
        merged: dict[str, Any] = {"sigma": self.settings.sigma, "quad_bump": self.settings.quad_bump}
        if self.settings.eta is not None:
            merged["eta"] = self.settings.eta
        merged.update({key: value for key, value in overrides.items() if value is not None})
        return make_config(method, k, merged, registry=self.registry, mesh=mesh)

    def build(self, mesh: Mesh, config: MethodConfig, nu: float) -> list[LocalElement]:
        with StageTimer(self.metrics, "local_operators"):
            return build_elements(mesh, config, nu, self.threads)

    def run(
        self,
        mesh: Mesh,
        config: MethodConfig,
        problem: ProblemSpec | None = None,
        nu: float = 1.0,
        condense_system: bool | None = None,
        compute_errors: bool = True,
        elements: list[LocalElement] | None = None,
    ) -> RunResult:
        """Assemble, (optionally) condense, solve and measure errors for one mesh/method pair."""
        problem = problem if problem is not None else manufactured(nu)
        condense_system = self.settings.condense if condense_system is None else condense_system
        timings: dict[str, float] = {}

        try:
            if elements is None:
                with StageTimer(self.metrics, "local_operators") as timer:
                    elements = build_elements(mesh, config, problem.nu, self.threads)
                timings["local_operators"] = timer.elapsed_ms

            with StageTimer(self.metrics, "assembly") as timer:
                system = assemble(
                    mesh, config, problem.nu, problem.f, self.settings.forcing_extra, self.threads, elements
                )
            timings["assembly"] = timer.elapsed_ms

            solved_system = system
            if condense_system:
                with StageTimer(self.metrics, "condensation") as timer:
                    solved_system = condense(system)
                timings["condensation"] = timer.elapsed_ms

            with StageTimer(self.metrics, "factorization") as timer:
                solution = solve(
                    solved_system, self.settings.residual_tolerance, self.settings.dense_fallback_limit
                )
            timings["factorization"] = timer.elapsed_ms
            self.metrics.record_solve(
                system.full_size, system.dofmap.condensed_size(), solution.residual, timer.elapsed_ms
            )

            report = None
            if compute_errors:
                with StageTimer(self.metrics, "errors") as timer:
                    report = error_report(
                        solution, elements, problem, config.delta, mesh.h, self.settings.error_degree
                    )
                timings["errors"] = timer.elapsed_ms
        except Exception as e:
            self.metrics.record_error(str(e), {"method": config.label(), "mesh": mesh.name})
            raise

        logger.info(
            f"{config.label()} on {mesh.name}: size {solution.solved_size} (full {system.full_size}), "
            f"residual {solution.residual:.2e}"
        )
        return RunResult(mesh, config, problem, system, solution, report, elements, timings)

    def archive_rows(self, rows: list[dict[str, Any]], manifest: dict[str, Any]) -> None:
        if self.archive is not None:
            self.archive.log_study_rows(rows, manifest)

    def archive_suite(self, entries: list[dict[str, Any]], manifest: dict[str, Any]) -> None:
        if self.archive is not None:
            self.archive.log_suite_entries(entries, manifest)

    def close(self) -> None:
        if self.archive is not None:
            self.archive.close()
