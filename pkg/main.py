"""DelaySlide command-line entry point.

Subcommands
- ``run``: simulate one scenario and write its artifacts
- ``compare``: run several controllers on one realized signal path
- ``verify-gains``: check the LMI certificate of a gains file
- ``iss-constants``: gamma search and ISS constants for a gains file
- ``synthesize``: search gains passing the LMIs and save them
- ``paper-demo``: the three-integrator study with the embedded gains

Exit codes: 0 success, 2 malformed config or usage, 3 certificate failure,
4 diverged simulation, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from app.api.analysis import decrease_monitor, metric_bundle
from app.api.controllers import ControllerKind
from app.api.gains import (
    DEFAULT_EIG_TOL,
    GainSet,
    InfeasibleError,
    LmiReport,
    StructuralError,
    SynthesisError,
    find_gammas,
    inflate_gamma2,
    save_gains,
    synthesize_gains,
    verify_lmi,
)
from app.api.ilf_core import DomainError, IlfError, SolverError
from app.api.reporting import (
    ArtifactDir,
    ArtifactError,
    RunManifest,
    build_json_report,
    comparison_frame,
    long_frame,
    render_html_report,
)
from app.api.scenario_ingest import ConfigError, load_gain_file, load_scenario, resolve_gain_set
from app.api.sim import (
    DivergedRunError,
    ScenarioConfig,
    Trajectory,
    check_shared_path,
    paper_scenario,
    paper_signals,
    prng_name,
    realize_signals,
    run_batch,
    with_controller,
)

logger = logging.getLogger("delayslide")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_DIVERGED = 4
EXIT_IO = 5

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _t_start(cfg: ScenarioConfig) -> float:
    return min(5.0, 0.5 * cfg.T)


def _print_certificate(report: LmiReport) -> None:
    for c in report.conditions:
        status = "PASS" if c.passed else "FAIL"
        print(
            f"{status} {c.name}: min_eig={c.min_eig:.6g} max_eig={c.max_eig:.6g} threshold={c.threshold:.3g}"
        )
    if report.level_set_ratio is not None:
        print(f"level_set_ratio={report.level_set_ratio:.6g} rate_certified={report.rate_certified}")


def _check_certificate(cfg: ScenarioConfig, g: GainSet) -> Optional[LmiReport]:
    """Verify the gains; return None when an uncertified run must be refused."""
    report = verify_lmi(g)
    if report.passed:
        return report
    if cfg.require_certificate:
        _print_certificate(report)
        print("gains fail the LMI certificate; set require_certificate=false to run anyway", file=sys.stderr)
        return None
    logger.warning("running %s with uncertified gains", cfg.name)
    return report


def _write_run(
    out: ArtifactDir, prefix: str, traj: Trajectory, t_start: float, monitor: Optional[Dict] = None
) -> Dict[str, float]:
    metrics = metric_bundle(traj, t_start)
    for path in (
        out.write_trajectory(f"{prefix}trajectory.csv", traj),
        out.write_frame(f"{prefix}trajectory_long.csv", long_frame(traj)),
        out.write_json(f"{prefix}metrics.json", build_json_report(metrics, meta=traj.meta, monitor=monitor)),
    ):
        print("Wrote", path)
    return metrics


def _finish(
    out: ArtifactDir,
    cfgs: Sequence[ScenarioConfig],
    trajs: Sequence[Trajectory],
    metrics: Dict[str, Dict[str, float]],
    report: LmiReport,
    started: float,
    config_path: Optional[str],
    monitors: Optional[Dict[str, Dict]] = None,
) -> None:
    cfg = cfgs[0]
    summary = {
        "n": cfg.n,
        "steps": cfg.steps,
        "h": cfg.h,
        "seed": cfg.seed,
        "controllers": [t.meta["controller"] for t in trajs],
    }
    html = render_html_report(summary, metrics, certificate=report.to_dict(), monitors=monitors)
    for path in (
        out.write_json("certificate.json", report.to_dict()),
        out.write_text("report.html", html),
    ):
        print("Wrote", path)
    manifest = RunManifest(
        config_path=config_path,
        output_dir=str(out.root),
        prng=prng_name(),
        scenarios=[c.model_dump(mode="json") for c in cfgs],
        steps={t.meta["controller"]: len(t) for t in trajs},
        signal_digests={t.meta["controller"]: t.meta["signal_digest"] for t in trajs},
        certificate_passed=report.passed,
        wall_clock_seconds=time.perf_counter() - started,
    )
    print("Wrote", out.write_manifest(manifest))


def _cmd_run(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = load_scenario(args.config, seed=args.seed)
    g = resolve_gain_set(cfg)
    report = _check_certificate(cfg, g)
    if report is None:
        return EXIT_CERTIFICATE
    (traj,) = run_batch([cfg])
    out = ArtifactDir(args.out)
    metrics = {traj.meta["controller"]: _write_run(out, "", traj, _t_start(cfg))}
    _finish(out, [cfg], [traj], metrics, report, started, str(args.config))
    return EXIT_OK


def _parse_kinds(text: str) -> List[ControllerKind]:
    kinds = []
    for item in text.split(","):
        try:
            kinds.append(ControllerKind(item.strip()))
        except ValueError as exc:
            choices = ", ".join(k.value for k in ControllerKind)
            raise ConfigError(f"unknown controller {item!r}; choose from {choices}") from exc
    if len(set(kinds)) != len(kinds):
        raise ConfigError("each controller may appear once")
    return kinds


def _compare(
    cfg: ScenarioConfig,
    g: GainSet,
    report: LmiReport,
    kinds: Sequence[ControllerKind],
    out_dir: str,
    workers: int,
    started: float,
    config_path: Optional[str],
) -> int:
    cfgs = [with_controller(cfg, kind) for kind in kinds]
    path = realize_signals(cfg)
    trajs = run_batch(cfgs, workers=workers, signals=path)
    check_shared_path(trajs, path)
    out = ArtifactDir(out_dir)
    metrics: Dict[str, Dict[str, float]] = {}
    monitors: Dict[str, Dict] = {}
    for kind, traj in zip(kinds, trajs):
        monitor = None
        if kind == ControllerKind.finite_time and report.passed:
            monitor = decrease_monitor(traj, g).to_dict()
            monitors[kind.value] = monitor
        metrics[kind.value] = _write_run(out, f"{kind.value}/", traj, _t_start(cfg), monitor)
    print("Wrote", out.write_frame("comparison.csv", comparison_frame(metrics)))
    _finish(out, cfgs, trajs, metrics, report, started, config_path, monitors)
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    kinds = _parse_kinds(args.controllers)
    cfg = load_scenario(args.config, seed=args.seed)
    g = resolve_gain_set(cfg)
    report = _check_certificate(cfg, g)
    if report is None:
        return EXIT_CERTIFICATE
    return _compare(cfg, g, report, kinds, args.out, args.workers, started, str(args.config))


def _cmd_paper_demo(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    seed = 42 if args.seed is None else args.seed
    try:
        cfg = paper_scenario(seed=seed, T=args.T, signals=paper_signals(noise=args.noise))
    except ValidationError as exc:
        raise ConfigError(f"invalid paper-demo options: {exc}") from exc
    g = cfg.gain_set()
    report = verify_lmi(g)
    if not report.passed:
        logger.warning("the printed gains do not pass the LMI certificate; running the study anyway")
    kinds = [ControllerKind.delayed, ControllerKind.finite_time]
    return _compare(cfg, g, report, kinds, args.out, args.workers, started, None)


def _cmd_verify_gains(args: argparse.Namespace) -> int:
    g = load_gain_file(args.gains, Delta=args.delta)
    report = verify_lmi(g, args.eig_tol)
    _print_certificate(report)
    return EXIT_OK if report.passed else EXIT_CERTIFICATE


def _cmd_iss_constants(args: argparse.Namespace) -> int:
    g = load_gain_file(args.gains, Delta=args.delta)
    report = verify_lmi(g)
    if not report.passed:
        _print_certificate(report)
        return EXIT_CERTIFICATE
    gammas = find_gammas(g)
    iss = inflate_gamma2(g, gammas, args.chi)
    print(json.dumps(iss.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_synthesize(args: argparse.Namespace) -> int:
    g = synthesize_gains(args.n, args.rho1, args.rho2, args.delta, method=args.method)
    _print_certificate(verify_lmi(g))
    path = Path(args.out)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_gains(g, path)
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc
    print("Wrote", path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Override the scenario seed (unsigned 64-bit)")
    common.add_argument(
        "--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level"
    )

    parser = argparse.ArgumentParser(prog="delayslide", description="Delayed ILF sliding-mode control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="Simulate one scenario")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("compare", parents=[common], help="Compare controllers on one signal path")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--controllers", default="delayed,finite_time")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("verify-gains", parents=[common], help="Check the LMI certificate")
    p.add_argument("--gains", required=True, help="Gains JSON file or 'paper'")
    p.add_argument("--delta", type=float, default=1.0, help="Disturbance bound when the file has none")
    p.add_argument("--eig-tol", type=float, default=DEFAULT_EIG_TOL)
    p.set_defaults(handler=_cmd_verify_gains)

    p = sub.add_parser("iss-constants", parents=[common], help="Gamma search and ISS constants")
    p.add_argument("--gains", required=True, help="Gains JSON file or 'paper'")
    p.add_argument("--chi", type=float, required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.set_defaults(handler=_cmd_iss_constants)

    p = sub.add_parser("synthesize", parents=[common], help="Search gains passing the LMIs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho1", type=float, default=1.0)
    p.add_argument("--rho2", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--method", choices=["auto", "descent", "seeded"], default="auto")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=_cmd_synthesize)

    p = sub.add_parser("paper-demo", parents=[common], help="Run the three-integrator study")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=_cmd_paper_demo)
    return parser


_ERRORS: Dict[type, int] = {
    SolverError: EXIT_CERTIFICATE,
    ConfigError: EXIT_CONFIG,
    StructuralError: EXIT_CONFIG,
    DomainError: EXIT_CONFIG,
    InfeasibleError: EXIT_CERTIFICATE,
    SynthesisError: EXIT_CERTIFICATE,
    DivergedRunError: EXIT_DIVERGED,
    ArtifactError: EXIT_IO,
    OSError: EXIT_IO,
    IlfError: EXIT_CONFIG,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except tuple(_ERRORS) as exc:
        code = next(c for t, c in _ERRORS.items() if isinstance(exc, t))
        print(f"error: {exc}", file=sys.stderr)
        return code


def main() -> None:
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()


__all__ = ["run_cli", "build_parser", "main"]
