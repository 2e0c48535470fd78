#!/usr/bin/env python3
"""Experiment runner: medium -> spaces -> stability -> schemes -> errors and energies on disk."""

import argparse
import copy
import csv
import json
import logging
import math
import sys
import numpy as np
from pathlib import Path
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional

from config import (Config, ExperimentConfig, Scheme, StabilityMode, SweepAxis, load_experiment,
                    parse_experiment, steps_for)
from errors import EXIT_OK, ConfigurationError, InstabilityError, WaveSolverError
from grid import build_mesh, TwoLevelMesh
from assembly import assemble_mass, assemble_stiffness
from media import CoefficientField, SourceConfig, case_field, load_field, load_geometry, synth_channels
from spaces import SpacePair, build_lumped_pair, build_space_pair, orthogonalize
from integrators import SPLIT_SCHEMES, RunResult, SchemeConfig, WaveSystem, run
from stability import StabilityConstants, certify, compute_alpha
from diagnostics import Snapshot, compare, continuous_energy, export_csv, export_pgm, nodal_grid

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def setup_logging(verbose: bool = False, log_file: Optional[Path] = None):
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT,
                        handlers=handlers, force=True)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def _resolve(name: str, base: Optional[Path]) -> Path:
    p = Path(name)
    if p.is_absolute():
        return p
    for root in ([base] if base else []) + [Config.DATA_DIR, Path.cwd()]:
        if (root / p).exists():
            return root / p
    return (base or Config.DATA_DIR) / p


def build_medium(cfg: ExperimentConfig, mesh: TwoLevelMesh, base: Optional[Path] = None) -> CoefficientField:
    m = cfg.medium
    if m.field_file:
        kappa = load_field(_resolve(m.field_file, base))
    elif m.geometry_file:
        geo = load_geometry(_resolve(m.geometry_file, base))
        kappa = synth_channels(geo.entries, m.background, m.contrast, mesh.nx_fine, mesh.ny_fine)
    elif m.case:
        kappa = case_field(m.case, mesh.nx_fine, m.contrast, m.background)
    else:
        kappa = CoefficientField(np.full((mesh.ny_fine, mesh.nx_fine), m.background))
    kappa.check_mesh(mesh)
    logger.info(f"[Medium] {m.case or m.geometry_file or m.field_file or 'homogeneous'}: contrast {kappa.contrast:.3g}")
    return kappa


@dataclass
class Problem:
    cfg: ExperimentConfig
    mesh: TwoLevelMesh
    kappa: np.ndarray = field(repr=False)
    M: Any = field(repr=False)
    A: Any = field(repr=False)
    source: Optional[SourceConfig] = None
    load: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def envelope(self):
        return self.source.envelope if self.source else None

    def fine_system(self) -> WaveSystem:
        return WaveSystem(self.M, self.A, self.load, self.envelope, name="fine grid")


def build_problem(cfg: ExperimentConfig, base: Optional[Path] = None) -> Problem:
    Config.solver.eig_seed = cfg.seed
    logger.debug(f"[Runner] Eigensolver start vectors seeded with {cfg.seed}")
    mesh = build_mesh(cfg.mesh.nx_fine, cfg.mesh.nx_coarse)
    kappa = build_medium(cfg, mesh, base).flat()
    M = assemble_mass(mesh)
    A = assemble_stiffness(mesh, kappa)
    source, load = None, None
    if cfg.source.enabled:
        s = cfg.source
        source = SourceConfig(s.f0, tuple(s.center), s.width, s.amplitude)
        load = source.spatial_load(mesh)
        if not np.any(load):
            logger.warning(f"[Source] Amplitude vanishes for f0={s.f0}; set source.amplitude to drive the problem")
    return Problem(cfg, mesh, kappa, M, A, source, load)


@dataclass
class SchemeSetup:
    settings: Any
    system: WaveSystem
    pair: Optional[SpacePair] = None


def build_systems(problem: Problem) -> List[SchemeSetup]:
    """Coarse system for every configured scheme; pairs are built once and shared."""
    cfg, mesh, M, A = problem.cfg, problem.mesh, problem.M, problem.A
    kinds = {s.scheme for s in cfg.schemes}
    pair = pair_orth = lumped = None
    if kinds - {Scheme.SPLIT_LUMPED}:
        pair = build_space_pair(mesh, problem.kappa, cfg.spaces, A, M, cfg.workers)
    if Scheme.SPLIT_OMEGA0 in kinds:
        pair_orth = pair if pair.orthogonalized else orthogonalize(pair, M)
    if Scheme.SPLIT_LUMPED in kinds:
        sp_cfg = cfg.spaces
        lumped = build_lumped_pair(mesh, problem.kappa, sp_cfg.lumping_threshold, sp_cfg.lumped_v2_count,
                                   sp_cfg.layers, A, cfg.workers)

    out = []
    for s in cfg.schemes:
        if s.scheme == Scheme.IMPLICIT_CEM:
            system = WaveSystem.coarse(pair.basis1.columns, M, A, problem.load, problem.envelope, name="V_H1")
            use = pair
        elif s.scheme == Scheme.SPLIT_LUMPED:
            system = WaveSystem.coarse(lumped.prolongation(), M, A, problem.load, problem.envelope, n1=lumped.n1,
                                       mass_override=lumped.mass_surrogate, name="lumped V_H1+V_H2")
            use = lumped
        elif s.scheme == Scheme.SPLIT_OMEGA0:
            system = WaveSystem.coarse(pair_orth.prolongation(), M, A, problem.load, problem.envelope,
                                       n1=pair_orth.n1, name="orthogonal V_H1+V_H2")
            use = pair_orth
        elif s.scheme == Scheme.SPLIT_OMEGA1:
            system = WaveSystem.coarse(pair.prolongation(), M, A, problem.load, problem.envelope, n1=pair.n1,
                                       name="V_H1+V_H2")
            use = pair
        else:
            system = WaveSystem.coarse(pair.prolongation(), M, A, problem.load, problem.envelope, name="V_H1+V_H2")
            use = pair
        out.append(SchemeSetup(s, system, use))
    return out


def certify_setup(setup: SchemeSetup) -> Dict[str, Any]:
    s, system = setup.settings, setup.system
    if s.scheme in SPLIT_SCHEMES:
        constants = StabilityConstants.from_blocks(system.blocks)
        ortho = system.blocks.is_orthogonal() or system.blocks.lumped
        mode = StabilityMode.ORTHO if ortho else StabilityMode.NONORTHO
        report = certify(s.tau, constants, mode)
    else:
        constants = StabilityConstants(alpha_full=compute_alpha(system.A, system.M))
        if s.scheme == Scheme.EXPLICIT:
            report = certify(s.tau, constants, StabilityMode.CFL)
        else:
            sigma = s.sigma if s.scheme == Scheme.WEIGHTED else 0.25
            report = certify(s.tau, constants, StabilityMode.WEIGHTED, sigma=sigma)
    return report.to_dict()


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    out_dir: Path
    stability: Dict[str, Any]
    rows: List[Dict[str, Any]]


def _scheme_tag(k: int, s) -> str:
    return f"{k:02d}_{s.scheme.value}"


def _reference_times(cfg: ExperimentConfig) -> List[float]:
    steps = set()
    ref_tau = cfg.reference.tau
    for s in cfg.schemes:
        ratio = int(round(s.tau / ref_tau))
        for n in range(steps_for(cfg.T, s.tau) + 1):
            steps.add(n * ratio)
    N_ref = steps_for(cfg.T, ref_tau)
    for t in cfg.snapshot_times:
        steps.add(int(round(t / ref_tau)))
    return [k * ref_tau for k in sorted(steps) if k <= N_ref]


def run_reference(problem: Problem, alpha_fine: float) -> RunResult:
    cfg = problem.cfg
    tau = cfg.reference.tau
    scheme = Scheme.EXPLICIT
    if alpha_fine > 0 and tau > 2.0 / alpha_fine:
        logger.warning(f"[Reference] tau={tau:g} violates the fine-grid CFL bound {2.0 / alpha_fine:.3g}; "
                       f"using the implicit scheme for the reference")
        scheme = Scheme.IMPLICIT
    return run(SchemeConfig(scheme, tau, cfg.T), problem.fine_system(), _reference_times(cfg))


def _write_snapshots(problem: Problem, out: Path, tag: str, times, fine_states, snapshot_times):
    for t in snapshot_times:
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > 1e-9 * max(1.0, t):
            continue
        snap = Snapshot(float(times[k]), nodal_grid(problem.mesh, fine_states[k]))
        export_csv(snap, out / "snapshots" / f"{tag}_t{t:g}.csv")
        export_pgm(snap, out / "snapshots" / f"{tag}_t{t:g}.pgm", heatmap=True)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None, base: Optional[Path] = None) -> ExperimentResult:
    out = Path(out_dir) if out_dir else (Path(cfg.output_dir) if cfg.output_dir else Config.output_root() / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    logger.info(f"[Runner] Experiment '{cfg.name}' -> {out}")

    problem = build_problem(cfg, base)
    setups = build_systems(problem)

    alpha_fine = compute_alpha(problem.A, problem.M)
    stability = {
        "alpha_fine": alpha_fine,
        "tau_max_fine_explicit": (2.0 / alpha_fine) if alpha_fine > 0 else None,
        "schemes": {},
    }
    for k, st in enumerate(setups):
        stability["schemes"][_scheme_tag(k, st.settings)] = certify_setup(st)
    with open(out / "stability.json", "w") as f:
        json.dump(_jsonable(stability), f, indent=2, sort_keys=True)

    reference = None
    if cfg.reference.enabled:
        reference = run_reference(problem, alpha_fine)
        _write_snapshots(problem, out, "reference", reference.times, reference.states, cfg.snapshot_times)

    rows = []
    for k, st in enumerate(setups):
        s = st.settings
        tag = _scheme_tag(k, s)
        result = run(SchemeConfig(s.scheme, s.tau, cfg.T, sigma=s.sigma, omega=s.omega), st.system)
        export_csv(result.energy, out / "energy" / f"{tag}.csv")
        fine_states = st.system.to_fine(result.states)
        _write_snapshots(problem, out, tag, result.times, fine_states, cfg.snapshot_times)
        cont = continuous_energy(result.times, result.states, st.system.M, st.system.A)
        np.savetxt(out / "energy" / f"{tag}_continuous.csv", np.column_stack([result.times, cont]),
                   delimiter=",", fmt=Config.CSV_FLOAT_FORMAT, header="time,energy", comments="")

        row = {
            "scheme": tag,
            "tau": s.tau,
            "dim_v1": st.pair.n1,
            "dim_total": st.system.dim,
            "max_energy_drift": result.energy.max_relative_drift(),
            "energy_growth": result.energy.growth(),
            "stable_certified": stability["schemes"][tag]["passed"],
            "tau_max": stability["schemes"][tag]["tau_max"],
            "final_l2": math.nan, "final_energy": math.nan,
            "window_max_l2": math.nan, "window_max_energy": math.nan,
        }
        if reference is not None:
            series = compare(result.times, fine_states, reference.times, reference.states,
                             problem.M, problem.A, label=tag)
            export_csv(series, out / "errors" / f"{tag}.csv")
            windowed = series.window(*cfg.error_window)
            export_csv(windowed, out / "errors" / f"{tag}_window.csv")
            row["final_l2"], row["final_energy"] = series.final()
            if len(windowed):
                row["window_max_l2"] = float(np.max(windowed.l2))
                row["window_max_energy"] = float(np.max(windowed.energy))
        rows.append(row)

    _write_rows(out / "summary.csv", rows)
    with open(out / "summary.json", "w") as f:
        json.dump(_jsonable({"name": cfg.name, "alpha_fine": alpha_fine, "schemes": rows}), f, indent=2, sort_keys=True)
    logger.info(f"[Runner] Experiment '{cfg.name}' finished: {len(rows)} scheme(s)")
    return ExperimentResult(out, stability, rows)


def _jsonable(obj):
    """NaN and inf become null."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_rows(path: Path, rows: List[Dict[str, Any]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: List[str] = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _with_axis(cfg: ExperimentConfig, axis: SweepAxis, value: float) -> ExperimentConfig:
    data = copy.deepcopy(cfg.model_dump(mode="json"))
    if axis == SweepAxis.CONTRAST:
        data["medium"]["contrast"] = value
    elif axis == SweepAxis.TAU:
        for s in data["schemes"]:
            s["tau"] = value
    elif axis == SweepAxis.J:
        data["spaces"]["v2_count"] = int(value)
        data["spaces"]["lumped_v2_count"] = int(value)
    elif axis == SweepAxis.LAYERS:
        data["spaces"]["layers"] = int(value)
    data["name"] = f"{cfg.name}_{axis.value}_{value:g}"
    return parse_experiment(data)


def sweep(cfg: ExperimentConfig, axis: SweepAxis, values: List[float], out_dir: Optional[Path] = None,
          base: Optional[Path] = None) -> Path:
    """One experiment per value; one summary row per value for the first scheme."""
    root = Path(out_dir) if out_dir else Config.output_root() / f"{cfg.name}_sweep_{axis.value}"
    root.mkdir(parents=True, exist_ok=True)
    points = [_with_axis(cfg, axis, v) for v in values]

    def one(item):
        value, point = item
        row: Dict[str, Any] = {"axis": axis.value, "value": value}
        try:
            res = run_experiment(point, root / f"{axis.value}={value:g}", base)
            first = next(iter(res.stability["schemes"].values()))
            row.update({
                "alpha": first["alpha"], "alpha_full": first["alpha_full"],
                "gamma": first["gamma"], "gamma_a": first["gamma_a"],
                "tau_max_split": first["tau_max_split"], "tau_max": first["tau_max"],
                "alpha_fine": res.stability["alpha_fine"], "passed": first["passed"],
                "max_energy_drift": res.rows[0]["max_energy_drift"], "energy_growth": res.rows[0]["energy_growth"],
                "final_l2": res.rows[0]["final_l2"], "final_energy": res.rows[0]["final_energy"],
                "status": "ok",
            })
        except InstabilityError as e:
            logger.warning(f"[Sweep] {axis.value}={value:g}: {e}")
            row.update({"status": "unstable", "step": e.step})
        return row

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        rows = list(pool.map(one, list(zip(values, points))))
    path = root / f"sweep_{axis.value}.csv"
    _write_rows(path, rows)
    logger.info(f"[Sweep] {len(rows)} point(s) -> {path}")
    return path


def certify_only(cfg: ExperimentConfig, out_dir: Optional[Path] = None, base: Optional[Path] = None) -> Dict[str, Any]:
    out = Path(out_dir) if out_dir else Config.output_root() / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg, base)
    reports = {_scheme_tag(k, st.settings): certify_setup(st) for k, st in enumerate(build_systems(problem))}
    with open(out / "stability.json", "w") as f:
        json.dump(_jsonable({"schemes": reports}), f, indent=2, sort_keys=True)
    return reports


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _values(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--values expects a comma-separated list of numbers, got '{text}'",
                                 fields=["--values"])


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Partially explicit multiscale wave solver")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--output", type=Path, default=None, help="output directory (overrides the config)")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run every scheme of an experiment config")
    p.add_argument("config", type=Path)

    p = sub.add_parser("sweep", help="repeat an experiment along one parameter axis")
    p.add_argument("config", type=Path)
    p.add_argument("--axis", required=True, choices=[a.value for a in SweepAxis])
    p.add_argument("--values", required=True, help="comma-separated, e.g. 1e2,1e4,1e6")

    p = sub.add_parser("certify", help="only compute stability constants and certify the time steps")
    p.add_argument("config", type=Path)

    args = parser.parse_args(argv)
    Config.ensure_dirs()
    setup_logging(args.verbose, Config.LOGS_DIR / "cemwave.log")

    try:
        cfg = load_experiment(args.config)
        base = args.config.resolve().parent
        if args.cmd == "run":
            res = run_experiment(cfg, args.output, base)
            logger.info(f"[Runner] Artifacts in {res.out_dir}")
        elif args.cmd == "sweep":
            path = sweep(cfg, SweepAxis(args.axis), _values(args.values), args.output, base)
            logger.info(f"[Runner] Sweep summary {path}")
        else:
            reports = certify_only(cfg, args.output, base)
            for tag, r in reports.items():
                logger.info(f"[Runner] {tag}: {'pass' if r['passed'] else 'FAIL'} (tau_max={r['tau_max']})")
    except WaveSolverError as e:
        logger.error(f"[Runner] {type(e).__name__}: {e}")
        return e.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
