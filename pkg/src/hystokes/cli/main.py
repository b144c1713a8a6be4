import argparse
import json
import sys
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from datetime import datetime
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import pandas as pd

from ..analysis.probes import ProbeSizeError, stability_probes
from ..analysis.properties import SUITES, property_suites
from ..analysis.studies import FLOAT_FORMAT, StudyResult, convergence_study, robustness_sweep
from ..core.forms import StabilizationError
from ..mesh.generators import MESH_FAMILIES, build_mesh
from ..mesh.mesh import MeshError, validate
from ..scheme.methods import MeshCompatibilityError, MethodConfigurationError
from ..scheme.pipeline import HyStokesPipeline
from ..utils.config import ConfigManager
from ..utils.logger import get_logger, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

USAGE_ERRORS = (MeshError, MethodConfigurationError, MeshCompatibilityError, StabilizationError, ProbeSizeError)


@dataclass
class RunManifest:
    """Reproducibility header embedded in every JSON artifact."""

    command: str
    method: str | None = None
    k: list[int] = field(default_factory=list)
    mesh: str | None = None
    nu: list[float] = field(default_factory=list)
    quad_bump: int = 0
    sigma: str = "matrix"
    eta: float | None = None
    stabilization: str | None = None
    condense: bool = True
    seed: int = 42
    outputs: list[str] = field(default_factory=list)
    version: str = ""
    created_at: str = ""

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _package_version() -> str:
    try:
        return version("hystokes")
    except PackageNotFoundError:
        return "unknown"


# Argument types


def int_list(text: str) -> list[int]:
    """``"0,1,2"``, ``"0-2"`` or ``"1"``."""
    values: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-", 1)
                values.extend(range(int(lo), int(hi) + 1))
            elif part:
                values.append(int(part))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid integer list '{text}'") from e
    if not values:
        raise argparse.ArgumentTypeError(f"empty integer list '{text}'")
    return values


def float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid number list '{text}'") from e
    if not values:
        raise argparse.ArgumentTypeError(f"empty number list '{text}'")
    if any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError(f"viscosities must be positive, got '{text}'")
    return values


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid integer '{text}'") from e
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


# Shared setup


def _config_dir(args: argparse.Namespace) -> Path | None:
    if args.config is not None:
        return Path(args.config)
    cwd_config = Path("config")
    return cwd_config if cwd_config.is_dir() else None


def make_pipeline(args: argparse.Namespace) -> HyStokesPipeline:
    """Settings from the config directory, overridden by the command-line flags."""
    config_dir = _config_dir(args)
    manager = ConfigManager(config_dir / "hystokes.yaml" if config_dir else None)
    manager.update_config(
        threads=getattr(args, "threads", None),
        quad_bump=getattr(args, "quad_bump", None),
        sigma=getattr(args, "sigma", None),
        eta=getattr(args, "eta", None),
        condense=getattr(args, "condense", None),
        seed=getattr(args, "seed", None),
    )
    settings = manager.config
    setup_logging(level=settings.log_level, log_file=settings.log_file, verbose=args.verbose)
    return HyStokesPipeline(settings=settings, config_dir=config_dir)


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    if getattr(args, "stabilization", None):
        overrides["stabilization"] = args.stabilization
    return overrides


def _manifest(args: argparse.Namespace, pipeline: HyStokesPipeline, **extra: Any) -> RunManifest:
    settings = pipeline.settings
    manifest = RunManifest(
        command=args.command,
        method=getattr(args, "method", None),
        quad_bump=settings.quad_bump,
        sigma=settings.sigma,
        eta=settings.eta,
        stabilization=getattr(args, "stabilization", None),
        condense=settings.condense,
        seed=settings.seed,
        version=_package_version(),
        created_at=datetime.now().isoformat(timespec="seconds"),
    )
    for key, value in extra.items():
        setattr(manifest, key, value)
    return manifest


def _emit(text: str, out: Path | None, filename: str, manifest: RunManifest) -> None:
    """Write ``text`` to ``out/filename`` or print it."""
    if out is None:
        print(text, end="" if text.endswith("\n") else "\n")
        return
    path = out / filename
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    manifest.outputs.append(str(path))
    logger.info(f"Wrote {path}")


def _study_text(study: StudyResult, as_json: bool) -> str:
    return study.to_json() if as_json else study.to_csv()


# Commands


def cmd_solve(args: argparse.Namespace) -> int:
    pipeline = make_pipeline(args)
    try:
        mesh = build_mesh(args.mesh)
        k = args.k[0]
        nu = args.nu[0]
        manifest = _manifest(args, pipeline, k=[k], mesh=args.mesh, nu=[nu])
        config = pipeline.configure(args.method, k, mesh, **_overrides(args))
        result = pipeline.run(mesh, config, nu=nu)

        study = StudyResult.from_rows(config.name, nu, mesh.name, [result.row()], manifest.to_dict())
        if args.out is not None:
            solution_path = args.out / "solution.json"
            manifest.outputs.append(str(solution_path))
            result.solution.save(solution_path, {**manifest.to_dict(), "metrics": pipeline.metrics.export_metrics()})
        _emit(_study_text(study, args.json), args.out, "errors.json" if args.json else "errors.csv", manifest)
        pipeline.archive_rows(study.rows, manifest.to_dict())
    finally:
        pipeline.close()
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    pipeline = make_pipeline(args)
    try:
        nu = args.nu[0]
        manifest = _manifest(args, pipeline, k=args.k, mesh=args.mesh_family, nu=[nu])
        study = convergence_study(
            pipeline, args.method, args.k, args.mesh_family, args.levels, nu, _overrides(args), manifest.to_dict()
        )
        name = f"convergence_{study.method}.{'json' if args.json else 'csv'}"
        _emit(_study_text(study, args.json), args.out, name, manifest)
    finally:
        pipeline.close()
    return EXIT_OK


def cmd_robustness(args: argparse.Namespace) -> int:
    pipeline = make_pipeline(args)
    try:
        k = args.k[0]
        manifest = _manifest(args, pipeline, k=[k], mesh=args.mesh_family, nu=args.nu)
        report = robustness_sweep(
            pipeline, args.method, k, args.mesh_family, args.levels, args.nu, _overrides(args), manifest.to_dict()
        )
        if args.json:
            payload = {
                "manifest": manifest.to_dict(),
                "robust": report.robust(),
                "summary": report.summary().to_dict(orient="records"),
                "studies": [study.to_dict() for study in report.studies],
            }
            text = json.dumps(payload, indent=1, default=str)
        else:
            tables = [study.table.assign(nu=study.nu) for study in report.studies]
            combined = pd.concat(tables, ignore_index=True)
            combined = combined[["nu"] + [c for c in combined.columns if c != "nu"]]
            text = combined.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="")
        _emit(text, args.out, f"robustness_{report.method}.{'json' if args.json else 'csv'}", manifest)
        print(report.summary().to_string(index=False))
        if report.flagged:
            logger.warning(f"Flagged viscosities (roundoff regime): {report.flagged}")
    finally:
        pipeline.close()
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    pipeline = make_pipeline(args)
    try:
        suites = None if "all" in args.suite else args.suite
        methods = [args.method] if args.method else None
        manifest = _manifest(args, pipeline, k=args.k or [])
        report = property_suites(
            methods, pipeline.settings.seed, suites, args.k, pipeline.registry, _overrides(args) or None
        )
        frame = report.to_frame()
        if args.json:
            text = json.dumps(
                {"manifest": manifest.to_dict(), "passed": report.passed, "entries": frame.to_dict(orient="records")},
                indent=1,
                default=str,
            )
        else:
            text = frame.to_csv(index=False, float_format=FLOAT_FORMAT)
        _emit(text, args.out, f"check.{'json' if args.json else 'csv'}", manifest)
        pipeline.archive_suite([entry.to_dict() for entry in report.entries], manifest.to_dict())
        print(report.summary())
    finally:
        pipeline.close()
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_probe(args: argparse.Namespace) -> int:
    pipeline = make_pipeline(args)
    try:
        k = args.k[0]
        nu = args.nu[0]
        manifest = _manifest(args, pipeline, k=[k], mesh=args.mesh_family, nu=[nu])
        report = stability_probes(
            pipeline, args.method, k, args.mesh_family, args.levels, nu, pipeline.settings.seed, _overrides(args)
        )
        _emit(report.to_csv(), args.out, f"probes_{report.method}.csv", manifest)
        print(f"bounded: {report.bounded()}, inf-sup positive: {report.inf_sup_positive()}")
    finally:
        pipeline.close()
    return EXIT_OK


def cmd_mesh_info(args: argparse.Namespace) -> int:
    setup_logging(verbose=args.verbose)
    mesh = build_mesh(args.mesh)
    problems = validate(mesh)
    print(f"Mesh: {mesh.name}")
    print(f"Type: {mesh.tag}")
    print(f"Cells: {mesh.n_cells}")
    print(f"Faces: {mesh.n_faces} ({len(mesh.internal_faces)} internal, {mesh.n_boundary_faces} boundary)")
    print(f"h: {mesh.h:.6e}")
    print(f"Valid: {not problems}")
    for problem in problems:
        print(f"  {problem}")
    return EXIT_OK if not problems else EXIT_FAILURE


# Parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", type=Path, help="Configuration directory")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    parser.add_argument("--threads", type=positive_int, help="Worker threads for local operators")


def _add_method(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--method", "-m", required=required, help="Method name or alias (e.g. botti-massa, rw, rtn)")
    parser.add_argument("-k", type=int_list, default=None if not required else [0], help="Degree(s): 1 | 0,1,2 | 0-2")
    parser.add_argument("--eta", type=float, help="Rhebergen-Wells penalty (default 6 (k+1)^2)")
    parser.add_argument("--sigma", choices=["matrix", "gradient"], help="Space for the velocity gradient")
    parser.add_argument("--quad-bump", type=int, help="Extra quadrature degree for local operators")
    parser.add_argument("--stabilization", choices=["hho_classical", "hho_boxed", "rhebergen_wells"])
    parser.add_argument(
        "--condense", action=argparse.BooleanOptionalAction, default=None, help="Static condensation (default on)"
    )


def _add_output(parser: argparse.ArgumentParser) -> None:
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--csv", dest="json", action="store_false", help="CSV output (default)")
    fmt.add_argument("--json", dest="json", action="store_true", help="JSON output with the run manifest")
    parser.set_defaults(json=False)
    parser.add_argument("--out", "-o", type=Path, help="Output directory (default: stdout)")


def _add_family(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mesh-family",
        default="cart",
        help=f"Refinement family, optionally family:base ({', '.join(MESH_FAMILIES)})",
    )
    parser.add_argument("--levels", type=positive_int, default=3, help="Number of refinement levels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hystokes", description="hystokes: hybrid Stokes discretizations")
    sub = parser.add_subparsers(dest="command", required=True)

    commands: list[tuple[str, str, Callable[[argparse.Namespace], int]]] = [
        ("solve", "Solve the manufactured problem on one mesh", cmd_solve),
        ("convergence", "Convergence study over a mesh family", cmd_convergence),
        ("robustness", "Pressure-robustness sweep over viscosities", cmd_robustness),
        ("check", "Run the operator property suites", cmd_check),
        ("probe", "Stability probes over a mesh family", cmd_probe),
    ]
    for name, help_text, handler in commands:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        _add_method(p, required=name != "check")
        _add_output(p)
        p.add_argument("--nu", type=float_list, default=[1.0], help="Viscosity (list for robustness)")
        p.add_argument("--seed", type=int, help="Seed for random fields")
        if name == "solve":
            p.add_argument("--mesh", required=True, help="family:n or file:path")
        elif name != "check":
            _add_family(p)
        else:
            p.add_argument("--suite", nargs="+", choices=["all", *SUITES], default=["all"], help="Suites to run")
        p.set_defaults(handler=handler)

    info = sub.add_parser("mesh-info", help="Print mesh counts, h and validation status")
    info.add_argument("--mesh", required=True, help="family:n or file:path")
    info.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    info.set_defaults(handler=cmd_mesh_info)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.handler(args))
    except USAGE_ERRORS as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.exception("Command failed")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
