"""Command-line entry point: simulate, track, eval, and mc subcommands.

Per-step records travel as JSON Lines (one step per line), metric curves
as CSV. Every output is a pure function of (config, seed, tool version);
only the timing fields in the campaign summary and the manifest vary
between invocations.
"""

import argparse
import json
import os
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError, EllipTrackError, MalformedRecord, \
    StepMisalignment
from .measurements import MeasurementSet, SourceDistribution
from .metrics import EllipseParams, gwd_squared, orientation_error
from .sequential import StepDiagnostics
from .simulation import FILTER_KINDS, ScenarioConfig, TrajectorySpec, \
    builtin_scenarios, run_scenario, sample_run_data, step_function
from .state import (AxisState, DecoupledEstimate, KinematicState, MotionModel,
                    OrientationState)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MALFORMED = 4
EXIT_MISALIGNED = 5

SIM_SCHEMA = "elliptrack.sim-steps/1"
ESTIMATE_SCHEMA = "elliptrack.estimates/1"
ERRORS_SCHEMA = "elliptrack.step-errors/1"
SUMMARY_SCHEMA = "elliptrack.mc-summary/1"
MANIFEST_SCHEMA = "elliptrack.manifest/1"


# ---------------------------------------------------------------------------
# config (de)serialization

def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "lambda": cfg.lam,
        "R": cfg.R.tolist(),
        "prior": {
            "kinematics": {"mean": cfg.prior.kin.mean.tolist(),
                           "cov": cfg.prior.kin.cov.tolist()},
            "axis": {"mean": cfg.prior.axis.mean.tolist(),
                     "cov": cfg.prior.axis.cov.tolist()},
            "orientation": {"mean": cfg.prior.orient.mean,
                            "var": cfg.prior.orient.var},
        },
        "motion": {
            "F_kin": cfg.motion.F_kin.tolist(),
            "Q_kin": cfg.motion.Q_kin.tolist(),
            "Q_axis": cfg.motion.Q_axis.tolist(),
            "Q_theta": cfg.motion.Q_theta,
        },
        "trajectory": {
            "segments": [list(seg) for seg in cfg.trajectory.segments],
            "nominal_speed": cfg.trajectory.nominal_speed,
            "start_position": cfg.trajectory.start_position.tolist(),
            "start_heading": cfg.trajectory.start_heading,
            "true_axes": cfg.trajectory.true_axes.tolist(),
            "position_jitter": cfg.trajectory.position_jitter,
            "velocity_jitter": cfg.trajectory.velocity_jitter,
        },
        "runs": cfg.runs,
        "seed": cfg.seed,
        "source_dist": cfg.source_dist.value,
        "psi": cfg.psi,
        "fixed_count": cfg.fixed_count,
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    try:
        prior = DecoupledEstimate(
            kin=KinematicState(data["prior"]["kinematics"]["mean"],
                               data["prior"]["kinematics"]["cov"]),
            axis=AxisState(data["prior"]["axis"]["mean"],
                           data["prior"]["axis"]["cov"]),
            orient=OrientationState(data["prior"]["orientation"]["mean"],
                                    data["prior"]["orientation"]["var"]),
        )
        motion = MotionModel(F_kin=data["motion"]["F_kin"],
                             Q_kin=data["motion"]["Q_kin"],
                             Q_axis=data["motion"]["Q_axis"],
                             Q_theta=data["motion"]["Q_theta"])
        traj = data["trajectory"]
        trajectory = TrajectorySpec(
            segments=tuple((seg[0], seg[1]) for seg in traj["segments"]),
            nominal_speed=traj["nominal_speed"],
            start_position=traj["start_position"],
            start_heading=traj["start_heading"],
            true_axes=traj["true_axes"],
            position_jitter=traj.get("position_jitter", 0.0),
            velocity_jitter=traj.get("velocity_jitter", 0.0),
        )
        return ScenarioConfig(
            name=data["name"],
            lam=data["lambda"],
            R=data["R"],
            prior=prior,
            motion=motion,
            trajectory=trajectory,
            runs=data["runs"],
            seed=data["seed"],
            source_dist=SourceDistribution(data["source_dist"]),
            psi=data.get("psi"),
            fixed_count=data.get("fixed_count"),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"invalid scenario config: {exc}") from exc


def resolve_scenario(name_or_path: str, seed: Optional[int] = None,
                     runs: Optional[int] = None) -> ScenarioConfig:
    """Load a builtin scenario by name or a JSON config by path."""
    builtins = builtin_scenarios()
    if name_or_path in builtins:
        cfg = builtins[name_or_path]
    else:
        if not os.path.exists(name_or_path):
            raise ConfigError(f"{name_or_path!r} is neither a builtin scenario "
                              f"({', '.join(sorted(builtins))}) nor a config file")
        with open(name_or_path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        cfg = scenario_from_dict(data)
    replacements = {}
    if seed is not None:
        replacements["seed"] = seed
    if runs is not None:
        replacements["runs"] = runs
    if replacements:
        fields = scenario_to_dict(cfg)
        fields.update(replacements)
        cfg = scenario_from_dict(fields)
    return cfg


# ---------------------------------------------------------------------------
# per-step record (de)serialization

def truth_to_dict(t: int, truth) -> dict:
    return {"t": t,
            "truth": {"center": truth.center.tolist(),
                      "theta": truth.theta,
                      "axes": truth.axes.tolist(),
                      "velocity": truth.velocity.tolist()}}


def estimate_to_dict(t: int, est: DecoupledEstimate) -> dict:
    # Covariances are flattened row-major with explicit dimensions.
    return {"t": t,
            "kinematics": {"dim": 4,
                           "mean": est.kin.mean.tolist(),
                           "cov": est.kin.cov.flatten().tolist()},
            "axis": {"dim": 2,
                     "mean": est.axis.mean.tolist(),
                     "cov": est.axis.cov.flatten().tolist()},
            "orientation": {"mean": est.orient.mean,
                            "var": est.orient.var}}


def estimate_from_dict(data: dict) -> DecoupledEstimate:
    kin_dim = data["kinematics"]["dim"]
    axis_dim = data["axis"]["dim"]
    return DecoupledEstimate(
        kin=KinematicState(data["kinematics"]["mean"],
                           np.array(data["kinematics"]["cov"]).reshape(kin_dim, kin_dim)),
        axis=AxisState(data["axis"]["mean"],
                       np.array(data["axis"]["cov"]).reshape(axis_dim, axis_dim)),
        orient=OrientationState(data["orientation"]["mean"],
                                data["orientation"]["var"]),
    )


def _read_jsonl(path: str) -> list:
    """Parse a JSON Lines file, reporting the failing line number."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_number, str(exc)) from exc
    return rows


def _write_atomic(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(content)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    cfg = resolve_scenario(args.scenario or args.config, seed=args.seed)
    truths, measurement_sets = sample_run_data(cfg, 0)
    lines = []
    for idx, (truth, meas) in enumerate(zip(truths, measurement_sets)):
        row = truth_to_dict(idx + 1, truth)
        row["measurements"] = meas.points.tolist()
        lines.append(json.dumps(row))
    _write_atomic(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_track(args) -> int:
    cfg = resolve_scenario(args.scenario or args.config)
    step = step_function(args.filter)
    fcfg = cfg.filter_config()
    rows = _read_jsonl(args.measurements)
    est = cfg.prior
    diagnostics = StepDiagnostics()
    lines = []
    for line_number, row in enumerate(rows, start=1):
        try:
            t = int(row["t"])
            meas = MeasurementSet(np.array(row["measurements"], dtype=float).reshape(-1, 2))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_number, str(exc)) from exc
        est = step(est, meas, cfg.motion, fcfg, diagnostics=diagnostics)
        lines.append(json.dumps(estimate_to_dict(t, est)))
    _write_atomic(args.out, "\n".join(lines) + "\n")
    return 0


def _ellipse_from_row(row: dict, line_number: int, kind: str) -> EllipseParams:
    try:
        if kind == "truth":
            body = row["truth"]
            return EllipseParams(body["center"], body["theta"], body["axes"])
        est = estimate_from_dict(row)
        return EllipseParams(est.kin.center, est.orient.mean, est.axis.mean)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(line_number, str(exc)) from exc


def cmd_eval(args) -> int:
    est_rows = _read_jsonl(args.estimates)
    truth_rows = _read_jsonl(args.truth)
    if len(est_rows) != len(truth_rows):
        raise StepMisalignment(f"{len(est_rows)} estimate steps vs "
                               f"{len(truth_rows)} truth steps")
    records = []
    for idx, (est_row, truth_row) in enumerate(zip(est_rows, truth_rows)):
        line_number = idx + 1
        if est_row.get("t") != truth_row.get("t"):
            raise StepMisalignment(f"step index mismatch at line {line_number}: "
                                   f"{est_row.get('t')} vs {truth_row.get('t')}")
        est_ellipse = _ellipse_from_row(est_row, line_number, "estimate")
        truth_ellipse = _ellipse_from_row(truth_row, line_number, "truth")
        records.append((est_row["t"],
                        gwd_squared(est_ellipse, truth_ellipse),
                        orientation_error(est_ellipse.theta, truth_ellipse.theta)))
    out = ["t,gwd_sq,orient_err"]
    out.extend(f"{t},{g!r},{o!r}" for t, g, o in records)
    _write_atomic(args.out, "\n".join(out) + "\n")
    summary = {
        "schema": SUMMARY_SCHEMA,
        "steps": len(records),
        "mean_gwd_sq": float(np.mean([g for _, g, _ in records])),
        "mean_orient_err": float(np.mean([o for _, _, o in records])),
    }
    summary_path = args.summary_out or _default_summary_path(args.out)
    _write_atomic(summary_path, json.dumps(summary, indent=2) + "\n")
    return 0


def _default_summary_path(csv_path: str) -> str:
    base, _ = os.path.splitext(csv_path)
    return base + ".summary.json"


def cmd_mc(args) -> int:
    started = time.perf_counter()
    cfg = resolve_scenario(args.scenario, seed=args.seed, runs=args.runs)
    summary, _ = run_scenario(cfg, args.filter, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "per_step_errors.csv")
    summary_path = os.path.join(args.out, "summary.json")
    manifest_path = os.path.join(args.out, "manifest.json")

    rows = ["t,mean_gwd_sq,mean_orient_err"]
    rows.extend(f"{t + 1},{float(summary.per_step_mean_gwd_sq[t])!r},"
                f"{float(summary.per_step_mean_orient_err[t])!r}"
                for t in range(summary.steps))
    _write_atomic(csv_path, "\n".join(rows) + "\n")

    summary_doc = {
        "schema": SUMMARY_SCHEMA,
        "scenario": summary.scenario,
        "filter": summary.filter_kind,
        "runs": summary.runs,
        "steps": summary.steps,
        "results": {
            "overall_mean_gwd_sq": summary.overall_mean_gwd_sq,
            "overall_mean_orient_err": summary.overall_mean_orient_err,
            "diagnostics": summary.diagnostics,
        },
        "timing": {
            "mean_step_runtime_seconds": summary.mean_step_runtime,
        },
    }
    _write_atomic(summary_path, json.dumps(summary_doc, indent=2) + "\n")

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "tool_version": __version__,
        "command": "mc",
        "scenario": args.scenario,
        "config": scenario_to_dict(cfg),
        "filter": args.filter,
        "seed": cfg.seed,
        "runs": cfg.runs,
        "outputs": {
            "per_step_errors": {"path": csv_path, "schema": ERRORS_SCHEMA},
            "summary": {"path": summary_path, "schema": SUMMARY_SCHEMA},
        },
        "formats": {
            "sim_steps": SIM_SCHEMA,
            "estimates": ESTIMATE_SCHEMA,
            "step_errors": ERRORS_SCHEMA,
            "summary": SUMMARY_SCHEMA,
        },
        "wall_clock_seconds": time.perf_counter() - started,
    }
    _write_atomic(manifest_path, json.dumps(manifest, indent=2) + "\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elliptrack",
        description="Elliptical extended object tracking experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_opts(p, require=True):
        group = p.add_mutually_exclusive_group(required=require)
        group.add_argument("--scenario", help="builtin scenario name")
        group.add_argument("--config", help="path to a JSON scenario config")

    p_sim = sub.add_parser("simulate", help="write one run of truth and measurements")
    add_scenario_opts(p_sim)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_track = sub.add_parser("track", help="run a filter over a measurement file")
    p_track.add_argument("measurements", help="JSON Lines file from simulate")
    add_scenario_opts(p_track)
    p_track.add_argument("--filter", choices=FILTER_KINDS, default="sequential")
    p_track.add_argument("--out", required=True)
    p_track.set_defaults(func=cmd_track)

    p_eval = sub.add_parser("eval", help="score estimates against the truth")
    p_eval.add_argument("estimates")
    p_eval.add_argument("truth")
    p_eval.add_argument("--out", required=True, help="per-step error CSV")
    p_eval.add_argument("--summary-out", default=None,
                        help="summary JSON path (default: alongside the CSV)")
    p_eval.set_defaults(func=cmd_eval)

    p_mc = sub.add_parser("mc", help="run a Monte-Carlo campaign")
    p_mc.add_argument("scenario", help="builtin name or config path")
    p_mc.add_argument("--filter", choices=FILTER_KINDS, default="sequential")
    p_mc.add_argument("--runs", type=int, default=None)
    p_mc.add_argument("--seed", type=int, default=None)
    p_mc.add_argument("--jobs", type=int, default=1)
    p_mc.add_argument("--out", required=True, help="output directory")
    p_mc.set_defaults(func=cmd_mc)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MalformedRecord as exc:
        print(f"malformed record: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except StepMisalignment as exc:
        print(f"step misalignment: {exc}", file=sys.stderr)
        return EXIT_MISALIGNED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EllipTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
