"""
Subcommand handlers. Each takes a config path and an output path and returns an exit code.
"""
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import pandas as pd

from src.coneweyl.cli.schemas import (BracketConfig, CountConfig, CurvatureConfig, Robin1DConfig, StudyConfig,
                                      parse_config)
from src.coneweyl.errors import ConeWeylError, ConfigError, FileError, NoBoundStateError
from src.coneweyl.metrics import track_error
from src.coneweyl.services.bracketing import bracket_counts
from src.coneweyl.services.eigcount import count_below
from src.coneweyl.services.geometry import weyl_constant, write_profile_csv
from src.coneweyl.services.modelop import ModelConstants, Side, export_coordinate_text, make_model_coefficients
from src.coneweyl.services.report import ReportFormat, write_report
from src.coneweyl.services.robin1d import BoundaryCondition, DeltaLaw, solve_transversal
from src.coneweyl.services.study import build_operator, build_profiles, default_partition, weyl_study

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def load_json(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise FileError(f"Config file not found: {path}")
    except OSError as e:
        raise FileError(f"Could not read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}", field="<root>")


def _run(handler: Callable[[], None]) -> int:
    """Run a handler and map errors to exit codes."""
    try:
        handler()
        return 0
    except ConeWeylError as e:
        track_error(type(e).__name__)
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except Exception as e:
        track_error(type(e).__name__)
        logger.exception("Unexpected failure: %s", e)
        return 1


def _default_out(config_path: PathLike, suffix: str) -> Path:
    path = Path(config_path)
    return path.with_name(f"{path.stem}_{suffix}")


def run_config(path: PathLike, out: Optional[PathLike] = None) -> int:
    """Run a Weyl-law study from a JSON config and write the CSV (and optional JSON) report."""
    def handler():
        config = parse_config(StudyConfig, load_json(path))
        report = weyl_study(config)
        csv_path = Path(out) if out else Path(config.outputs.csv) if config.outputs.csv else _default_out(path, "report.csv")
        write_report(report, ReportFormat.CSV, csv_path)
        json_path = config.outputs.json_path or (csv_path.with_suffix(".json") if out else None)
        if json_path:
            write_report(report, ReportFormat.JSON, json_path)
    return _run(handler)


def run_curvature(path: PathLike, out: Optional[PathLike] = None) -> int:
    def handler():
        config = parse_config(CurvatureConfig, load_json(path))
        loops = build_profiles(config.geometry)
        target = Path(out) if out else _default_out(path, "curvature.csv")
        for index, (_, profile) in enumerate(loops):
            loop_path = target if len(loops) == 1 else target.with_name(f"{target.stem}_loop{index}{target.suffix}")
            write_profile_csv(profile, loop_path)
        constant = weyl_constant([p for _, p in loops], config.alpha)
        logger.info("Weyl constant alpha^2/(8 pi) * sum int kappa_+^2 = %.10g", constant)
    return _run(handler)


def run_robin1d(path: PathLike, out: Optional[PathLike] = None) -> int:
    def handler():
        config = parse_config(Robin1DConfig, load_json(path))
        law = DeltaLaw(c=config.law.c, rho=config.law.rho) if config.law else None
        rows = []
        for r in config.r:
            deltas = [law.delta_at(r)] if law else config.delta
            for delta in deltas:
                for bc in config.bc:
                    try:
                        sol = solve_transversal(r, delta, BoundaryCondition(bc), law)
                    except NoBoundStateError as e:
                        logger.warning("Skipping r=%g delta=%g %s: %s", r, delta, bc, e)
                        continue
                    rows.append({"r": sol.r, "delta": sol.delta, "bc": sol.bc.value, "k": sol.k, "E1": sol.E1,
                                 "psi0_sq": sol.psi0_sq, "psidelta_sq": sol.psidelta_sq,
                                 "dr_norm_sq": sol.dr_norm_sq})
        target = Path(out) if out else _default_out(path, "robin1d.csv")
        columns = ["r", "delta", "bc", "k", "E1", "psi0_sq", "psidelta_sq", "dr_norm_sq"]
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame(rows, columns=columns).to_csv(target, index=False, float_format="%.17g")
        except OSError as e:
            raise FileError(f"Could not write {target}: {e}")
    return _run(handler)


def run_count(path: PathLike, out: Optional[PathLike] = None) -> int:
    def handler():
        config = parse_config(CountConfig, load_json(path))
        loops = build_profiles(config.geometry)
        side = Side(config.side)
        constants = ModelConstants(**config.constants.model_dump())
        alpha_sq = config.alpha ** 2
        lambda_min = min(config.lambdas) / alpha_sq
        results = []
        for index, (_, profile) in enumerate(loops):
            _, op = build_operator(profile, side, config.R, lambda_min, config.grid, constants, config.r_max,
                                   config.r_max_factor)
            if config.export_matrix:
                export_coordinate_text(op, Path(config.export_matrix).with_suffix(f".loop{index}.txt"))
            for lam in config.lambdas:
                try:
                    result = count_below(op, -lam / alpha_sq, strategy=config.strategy)
                except ConeWeylError as e:
                    raise e.with_context(**{"lambda": lam, "side": side.value, "loop": index})
                record = result.to_dict()
                record.update({"lambda": lam, "side": side.value, "loop": index})
                results.append(record)
        target = Path(out) if out else _default_out(path, "counts.json")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(json.dumps(results, indent=2))
        except OSError as e:
            raise FileError(f"Could not write {target}: {e}")
    return _run(handler)


def run_bracket(path: PathLike, out: Optional[PathLike] = None) -> int:
    def handler():
        config = parse_config(BracketConfig, load_json(path))
        loops = build_profiles(config.geometry)
        side = Side(config.side)
        constants = ModelConstants(**config.constants.model_dump())
        lam = config.lam / config.alpha ** 2
        target = Path(out) if out else _default_out(path, "bracket.json")
        records = []
        for index, (_, profile) in enumerate(loops):
            coeffs = make_model_coefficients(profile, side, config.R, constants)
            m, n, M = default_partition(coeffs, lam, config.m, config.n, config.M)
            try:
                result = bracket_counts(coeffs, lam, m, n, M)
            except ConeWeylError as e:
                raise e.with_context(**{"lambda": config.lam, "side": side.value, "loop": index})
            result.write_cells_csv(target.with_name(f"{target.stem}_cells_loop{index}.csv"))
            record = result.to_dict()
            record.update({"side": side.value, "loop": index})
            records.append(record)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(json.dumps(records, indent=2))
        except OSError as e:
            raise FileError(f"Could not write {target}: {e}")
    return _run(handler)


COMMANDS = {
    "curvature": run_curvature,
    "robin1d": run_robin1d,
    "count": run_count,
    "bracket": run_bracket,
    "weyl-study": run_config,
}
