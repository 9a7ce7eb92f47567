"""
Command-line surface
One handler per command; every handler returns the process exit code
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .. import __version__
from ..core.dae_core import DaeTriple, Functional, WeightSpec
from ..core.data_loader import DataLoader
from ..core.errors import InputError, ObserverError
from ..core.heatpde import HeatConfig, run_demo
from ..core.observer import design_finite, design_infinite, run_finite, run_infinite
from ..core.reduction import (
    assoc_invariants,
    assoc_lti,
    detectability_hautus_check,
    impulse_obs_rank_check,
    is_l_detectable,
    is_l_impulse_observable,
    stab_assoc_lti,
)
from ..core.report_writer import ReportWriter
from ..data.artifacts import Artifacts, msg
from .config import NEEDS_FUNCTIONALS, RunConfig

logger = logging.getLogger(__name__)


def _yes(flag: Optional[bool]) -> str:
    if flag is None:
        return "n/a"
    return "yes" if flag else "no"


def _load(cfg: RunConfig):
    loader = DataLoader()
    ok, message = loader.load_directory(cfg.input_dir)
    if not ok:
        raise InputError(message)
    print(message)
    d = loader.get_dae()
    print(msg("dimensions", describe=d.describe()))
    return loader, d


def _writer(cfg: RunConfig) -> ReportWriter:
    writer = ReportWriter(cfg.output_dir)
    writer.write_json(Artifacts.RUN_CONFIG, cfg.to_dict())
    return writer


def _finish(writer: ReportWriter) -> int:
    print(msg("wrote", count=len(writer.written), directory=writer.output_dir))
    return 0


def cmd_reduce(cfg: RunConfig) -> int:
    """Associated LTI system, its stabilizable restriction and both state maps"""
    _, d = _load(cfg)
    tol = cfg.tol
    s = assoc_lti(d, tol)
    g = stab_assoc_lti(s, tol)
    print(msg("reduced", nhat=s.state_dim, k=s.input_dim, l=g.state_dim))

    matrices = {
        "F": d.F, "A": d.A, "H": d.H,
        "Aa": s.A, "Ba": s.B, "Ca": s.C, "Da": s.D, "LMAP": s.M,
        "Ag": g.A, "Bg": g.B, "Cg": g.C, "Dg": g.D, "LMAPg": g.M,
    }
    writer = _writer(cfg)
    writer.write_matrices({name: matrices[name] for name in Artifacts.REDUCE_OUTPUTS})
    writer.write_json(
        "reduce.json",
        {
            "dimensions": {"m": d.m, "n": d.n, "p": d.p, "nhat": s.state_dim, "k": s.input_dim, "l": g.state_dim},
            "svd_rank_F": s.svd_rank_F,
            "invariants": assoc_invariants(d, s, tol),
        },
    )
    return _finish(writer)


def _check(cfg: RunConfig, detectability: bool) -> int:
    _, d = _load(cfg)
    tol = cfg.tol
    ells = cfg.functionals(d.m)
    s = assoc_lti(d, tol)
    g = stab_assoc_lti(s, tol)

    rows = []
    for ell in ells:
        observable = is_l_impulse_observable(d, ell, tol, s)
        detectable = observable and is_l_detectable(d, ell, tol, s, g)
        rows.append({"functional": ell.name, "impulse_observable": observable, "detectable": detectable})
        print(msg("check_line", name=ell.name, observable=_yes(observable), detectable=_yes(detectable)))

    report: Dict[str, object] = {"functionals": rows}
    if detectability:
        verdict = detectability_hautus_check(d, tol, cfg.seed)
        report["hautus_check"] = verdict
        print(msg("hautus_check", verdict=_yes(verdict)))
    else:
        verdict = impulse_obs_rank_check(d, tol)
        report["rank_check"] = verdict
        print(msg("rank_check", verdict=_yes(verdict)))

    writer = _writer(cfg)
    writer.write_json(Artifacts.CHECK_REPORT, report)
    return _finish(writer)


def cmd_check_observability(cfg: RunConfig) -> int:
    return _check(cfg, detectability=False)


def cmd_check_detectability(cfg: RunConfig) -> int:
    return _check(cfg, detectability=True)


def _sigma_table(ells: List[Functional], sigma) -> pd.DataFrame:
    for ell, value in zip(ells, sigma):
        print(msg("sigma_line", name=ell.name, sigma=float(value)))
    return pd.DataFrame({"functional": [ell.name for ell in ells], "sigma": np.asarray(sigma, dtype=float)})


def _finite(cfg: RunConfig, d: DaeTriple, W: WeightSpec, writer: ReportWriter, y=None) -> None:
    tol = cfg.tol
    ells = cfg.functionals(d.m)
    s = assoc_lti(d, tol)
    observers = [design_finite(d, W, ell, cfg.horizon, cfg.steps, tol, s) for ell in ells]
    writer.write_table(Artifacts.SIGMA_TABLE, _sigma_table(ells, [obs.sigma for obs in observers]))

    dre = observers[0].dre
    k, l = dre.K.shape[1], dre.K.shape[2]
    schedule = pd.DataFrame(dre.K.reshape(dre.count, k * l), columns=[f"K_{i + 1}_{j + 1}" for i in range(k) for j in range(l)])
    schedule.insert(0, "time", dre.times)
    writer.write_table(Artifacts.GAIN_SCHEDULE, schedule)
    writer.write_matrices({"P": dre.P_final, "K": dre.K[-1]})

    if y is not None:
        row = {"time": cfg.horizon}
        row.update({obs.ell.name: run_finite(obs, y) for obs in observers})
        writer.write_table(Artifacts.ESTIMATES, pd.DataFrame([row]))


def _infinite(cfg: RunConfig, d: DaeTriple, W: WeightSpec, writer: ReportWriter, y=None) -> None:
    ells = cfg.functionals(d.m)
    obs = design_infinite(d, W, ells, cfg.tol)
    writer.write_table(Artifacts.SIGMA_TABLE, _sigma_table(ells, obs.sigma))
    matrices = {"P": obs.care.P, "K": obs.care.K, "Ao": obs.Ao, "Bo": obs.Bo, "Co": obs.Co}
    writer.write_matrices({name: matrices[name] for name in Artifacts.OBSERVER_OUTPUTS})
    writer.write_json(
        "observer.json",
        {"state_dim": obs.Ao.shape[0], "care_residual": obs.care.residual, "abscissa": obs.care.abscissa},
    )
    if y is not None:
        estimates = run_infinite(obs, y)
        writer.write_table(Artifacts.ESTIMATES, estimates.to_frame(columns=obs.labels))


def cmd_design_finite(cfg: RunConfig) -> int:
    loader, d = _load(cfg)
    W = loader.get_weights(d)
    y = loader.get_signal(cfg.signal, d.p) if cfg.signal else None
    writer = _writer(cfg)
    _finite(cfg, d, W, writer, y)
    return _finish(writer)


def cmd_design_infinite(cfg: RunConfig) -> int:
    loader, d = _load(cfg)
    W = loader.get_weights(d)
    y = loader.get_signal(cfg.signal, d.p) if cfg.signal else None
    writer = _writer(cfg)
    _infinite(cfg, d, W, writer, y)
    return _finish(writer)


def cmd_estimate(cfg: RunConfig) -> int:
    """Design and run on a measured output table; --infinite selects the LTI observer"""
    loader, d = _load(cfg)
    W = loader.get_weights(d)
    y = loader.get_signal(cfg.signal, d.p)
    writer = _writer(cfg)
    if cfg.infinite:
        _infinite(cfg, d, W, writer, y)
    else:
        _finite(cfg, d, W, writer, y)
    return _finish(writer)


def cmd_heat_demo(cfg: RunConfig) -> int:
    try:
        heat = HeatConfig(**cfg.heat)
    except TypeError as e:
        raise InputError(f"invalid heat settings: {e}") from e
    writer = _writer(cfg)
    report = run_demo(heat, cfg.tol, output_dir=writer.output_dir)
    for name, flag in report.detectable.items():
        print(msg("detect_line", name=name, detectable=_yes(flag)))
    for name, value in report.sigma.items():
        print(msg("sigma_line", name=name, sigma=value))
    for name, value in report.tracking_errors.items():
        print(msg("tracking_line", name=name, error=value))
    written = sorted(path for path in writer.output_dir.iterdir() if path.is_file())
    print(msg("wrote", count=len(written), directory=writer.output_dir))
    return 0


HANDLERS: Dict[str, Callable[[RunConfig], int]] = {
    "reduce": cmd_reduce,
    "check-observability": cmd_check_observability,
    "check-detectability": cmd_check_detectability,
    "design-finite": cmd_design_finite,
    "design-infinite": cmd_design_infinite,
    "estimate": cmd_estimate,
    "heat-demo": cmd_heat_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minimax-observer",
        description="Minimax observers for linear differential-algebraic equations",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--input-dir", dest="input_dir")
        cmd.add_argument("--output-dir", dest="output_dir")
        cmd.add_argument("--config", dest="config")
        cmd.add_argument("--rank-rtol", dest="rank_rtol", type=float)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--verbose", action="store_true", default=None)
        if name in NEEDS_FUNCTIONALS:
            cmd.add_argument("--ell", help="comma separated 1-based indices, or @file of row vectors")
            cmd.add_argument("--horizon", type=float)
            cmd.add_argument("--steps", type=int)
            cmd.add_argument("--signal", help="CSV with a time column and one column per output")
        if name == "heat-demo":
            cmd.add_argument("--horizon", dest="heat_horizon", type=float, help="simulated time span of the demo")
        if name == "estimate":
            cmd.add_argument("--infinite", action="store_true", default=None)
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Parse, assemble the run configuration, dispatch; ObserverError maps to its exit code"""
    args = build_parser().parse_args(argv)
    flags = {key: value for key, value in vars(args).items() if key not in ("command", "config")}
    try:
        cfg = RunConfig.assemble(args.command, flags, args.config)
        configure_logging(cfg.verbose)
        return HANDLERS[cfg.command](cfg)
    except ObserverError as e:
        print(msg("failed", message=e), file=sys.stderr)
        logger.debug("failure details", exc_info=True)
        return e.exit_code
