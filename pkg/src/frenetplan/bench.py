"""Benchmark harness: scenario suite generation, runs, and report tables.

Subcommands:

  gen     write seeded scenario JSON files plus a manifest
  run     run one sampler configuration over a scenario suite -> CSV + summary
  report  aggregate result CSVs into comparison tables
  serve   run episodes with an external proposer attached to this process's
          stdio (the training/evaluation surface for learned proposers)

Planning failures are benchmark data, not errors: `run` exits 0 even when
every episode fails; nonzero exit codes signal harness problems only.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import environment as env
from .environment import (OutcomeStatus, Scenario, ScenarioParams, SimConfig,
                          UniformSampling, generate_scenario, run_episode)
from .errors import (PlanningError, ProposerProtocolError, ProposerTimeout,
                     SchemaMismatch)
from .planner import (DEFAULT_NEIGHBORHOODS, CostWeights, FeasibilityLimits,
                      NeighborhoodLevel, NeighborhoodSpec)
from .proposers import (DEFAULT_ACT_TIMEOUT_MS, DEFAULT_HANDSHAKE_TIMEOUT_MS,
                        ExternalProposer, OracleProposer, RandomProposer)
from .trajectory import Status

RESULTS_HEADER = "# frenetplan results v1"
CSV_COLUMNS = ["scenario_id", "sampler", "samples_per_cycle", "outcome",
               "steps", "min_obstacle_distance_m", "feasible_fraction",
               "collision_fraction", "infeasible_fraction", "mean_cycle_us",
               "p95_cycle_us"]

SAMPLERS = {
    "B800": ("uniform", (40, 20)),
    "B125": ("uniform", (25, 5)),
    "RL": ("oracle", NeighborhoodLevel.NONE),
    "RL1": ("oracle", NeighborhoodLevel.N1),
    "RL2": ("oracle", NeighborhoodLevel.N2),
    "RL3": ("oracle", NeighborhoodLevel.N3),
    "Random1": ("random", NeighborhoodLevel.NONE),
}

ABORT_OUTCOMES = ("ProposerTimeout", "ProposerProtocolError")


# ---------------------------------------------------------------------------
# configuration


def default_config():
    """Every numeric default of the toolkit, as the config JSON schema."""
    return {
        "limits": {"a_max": 8.0, "kappa_max": 0.2, "kappa_dot_max": 0.4,
                   "psi_dot_max": 1.0},
        "weights": {"lat_jerk": 0.002, "lon_jerk": 0.002, "deviation": 1.0,
                    "velocity": 1.0, "obstacle": 2.0, "obstacle_eps": 0.1},
        "neighborhoods": {
            level.value: {"d_half_width": spec.d_half_width,
                          "s_dot_half_width": spec.s_dot_half_width,
                          "d_count": spec.d_count,
                          "s_dot_count": spec.s_dot_count}
            for level, spec in DEFAULT_NEIGHBORHOODS.items()
            if level != NeighborhoodLevel.NONE
        },
        "dt": 0.1,
        "replan_dt": 0.1,
        "timeout_cycles": 300,
        "ego": {"length": 4.5, "width": 2.0},
        "d_norm": 5.0,
        "reward_abs_deviation": False,
        "resample_step": 0.5,
        "curvature_margin": 0.1,
        "d_dom_margin": 1.0,
        "oracle_grid": [40, 20],
        "act_timeout_ms": DEFAULT_ACT_TIMEOUT_MS,
        "handshake_timeout_ms": DEFAULT_HANDSHAKE_TIMEOUT_MS,
        "scenario": {"obstacle_count": [1, 3], "path_length": [150.0, 250.0],
                     "lane_count": 2, "lane_width": 3.5,
                     "start_speed": [8.0, 12.0],
                     "v_desired_range": [8.0, 12.0], "max_curvature": 0.04,
                     "goal_band_length": 15.0},
    }


def _merge(base, override):
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None):
    cfg = default_config()
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = _merge(cfg, json.load(fh))
    return cfg


def sim_config_from(cfg) -> SimConfig:
    neighborhoods = dict(DEFAULT_NEIGHBORHOODS)
    for name, spec in cfg["neighborhoods"].items():
        level = NeighborhoodLevel(name)
        neighborhoods[level] = NeighborhoodSpec(level, spec["d_half_width"],
                                                spec["s_dot_half_width"],
                                                spec["d_count"],
                                                spec["s_dot_count"])
    return SimConfig(
        limits=FeasibilityLimits(**cfg["limits"]),
        weights=CostWeights(**cfg["weights"]),
        neighborhoods=neighborhoods,
        dt=cfg["dt"], replan_dt=cfg["replan_dt"],
        timeout_cycles=cfg["timeout_cycles"],
        ego_length=cfg["ego"]["length"], ego_width=cfg["ego"]["width"],
        d_norm=cfg["d_norm"], reward_abs_deviation=cfg["reward_abs_deviation"],
        resample_step=cfg["resample_step"],
        curvature_margin=cfg["curvature_margin"],
        d_dom_margin=cfg["d_dom_margin"],
        oracle_grid=tuple(cfg["oracle_grid"]))


def scenario_params_from(cfg) -> ScenarioParams:
    sc = cfg["scenario"]
    return ScenarioParams(
        obstacle_count=tuple(sc["obstacle_count"]),
        path_length=tuple(sc["path_length"]), lane_count=sc["lane_count"],
        lane_width=sc["lane_width"], start_speed=tuple(sc["start_speed"]),
        v_desired_range=tuple(sc["v_desired_range"]),
        max_curvature=sc["max_curvature"],
        goal_band_length=sc["goal_band_length"])


# ---------------------------------------------------------------------------
# gen


def cmd_gen(seed_start, count, out_dir, params: ScenarioParams):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids, seeds = [], []
    for seed in range(seed_start, seed_start + count):
        scenario = generate_scenario(seed, params)
        scenario.save(out / f"{scenario.id}.json")
        ids.append(scenario.id)
        seeds.append(seed)
    manifest = {"format": 1, "seed_start": seed_start, "count": count,
                "ids": ids, "seeds": seeds}
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8")
    return ids


def load_suite(scenario_dir):
    root = Path(scenario_dir)
    manifest = root / "manifest.json"
    if manifest.exists():
        ids = json.loads(manifest.read_text(encoding="utf-8"))["ids"]
        files = [root / f"{sid}.json" for sid in ids]
    else:
        files = sorted(root.glob("scn-*.json"))
    if not files:
        raise PlanningError(f"no scenarios found in {scenario_dir}")
    return [Scenario.load(f) for f in files]


# ---------------------------------------------------------------------------
# run


def make_proposer(sampler, oracle_grid, proposer_cmd=None,
                  act_timeout_ms=DEFAULT_ACT_TIMEOUT_MS,
                  handshake_timeout_ms=DEFAULT_HANDSHAKE_TIMEOUT_MS):
    kind, _ = SAMPLERS[sampler]
    if proposer_cmd and kind != "oracle":
        raise PlanningError("--proposer-cmd only replaces the oracle in the "
                            "RL/RL1-RL3 modes")
    if kind == "uniform":
        return None
    if kind == "random":
        return RandomProposer()
    if proposer_cmd:
        proposer = ExternalProposer.spawn(proposer_cmd,
                                          act_timeout_ms=act_timeout_ms,
                                          handshake_timeout_ms=handshake_timeout_ms)
        proposer.handshake()
        return proposer
    return OracleProposer(oracle_grid)


@dataclass
class EpisodeRow:
    scenario_id: str
    sampler: str
    samples_per_cycle: float
    outcome: str
    steps: int
    min_obstacle_distance: float
    feasible_fraction: float
    collision_fraction: float
    infeasible_fraction: float
    invalid_fraction: float
    mean_cycle_us: float
    p95_cycle_us: float
    generated_total: int
    class_totals: dict
    inclusion_violations: int
    clamp_count: int
    cumulative_reward: float
    phase_means: dict
    cycles: list  # (executed_s, drivable_fraction) pairs


def _episode_row(scenario, sampler, outcome, timing=True) -> EpisodeRow:
    totals = {status.name: 0 for status in Status}
    generated = 0
    violations = 0
    cycle_totals = []
    phase_sums = {"generation": 0.0, "validity": 0.0, "feasibility": 0.0,
                  "collision": 0.0, "cost": 0.0}
    cycles = []
    for rec in outcome.per_cycle:
        counts = rec.status_counts
        generated += rec.samples_generated
        for name, n in counts.items():
            totals[name] += n
        drivable = counts.get("DRIVABLE", 0)
        feasible = drivable + counts.get("COLLIDING", 0)
        valid = feasible + counts.get("INFEASIBLE", 0)
        if not (drivable <= feasible <= valid <= rec.samples_generated):
            violations += 1
        cycle_totals.append(rec.cycle_time_us["total"])
        for phase in phase_sums:
            phase_sums[phase] += rec.cycle_time_us[phase]
        cycles.append((rec.executed_s,
                       drivable / rec.samples_generated if rec.samples_generated else 0.0))
    n_cycles = max(len(outcome.per_cycle), 1)
    mean_us = float(np.mean(cycle_totals)) if cycle_totals else 0.0
    p95_us = float(np.percentile(cycle_totals, 95)) if cycle_totals else 0.0
    if not timing:
        mean_us = p95_us = 0.0
        phase_sums = {k: 0.0 for k in phase_sums}
    frac = lambda name: totals[name] / generated if generated else 0.0
    return EpisodeRow(
        scenario_id=scenario.id, sampler=sampler,
        samples_per_cycle=generated / n_cycles, outcome=outcome.status.value,
        steps=outcome.steps,
        min_obstacle_distance=outcome.min_obstacle_distance,
        feasible_fraction=frac("DRIVABLE"),
        collision_fraction=frac("COLLIDING"),
        infeasible_fraction=frac("INFEASIBLE"),
        invalid_fraction=frac("INVALID"),
        mean_cycle_us=mean_us, p95_cycle_us=p95_us, generated_total=generated,
        class_totals=totals, inclusion_violations=violations,
        clamp_count=outcome.clamp_count,
        cumulative_reward=outcome.cumulative_reward,
        phase_means={k: v / n_cycles for k, v in phase_sums.items()},
        cycles=cycles)


def _aborted_row(scenario, sampler, error) -> EpisodeRow:
    return EpisodeRow(scenario_id=scenario.id, sampler=sampler,
                      samples_per_cycle=0.0, outcome=type(error).__name__,
                      steps=0, min_obstacle_distance=float("inf"),
                      feasible_fraction=0.0, collision_fraction=0.0,
                      infeasible_fraction=0.0, invalid_fraction=0.0,
                      mean_cycle_us=0.0, p95_cycle_us=0.0, generated_total=0,
                      class_totals={s.name: 0 for s in Status},
                      inclusion_violations=0, clamp_count=0,
                      cumulative_reward=0.0,
                      phase_means={}, cycles=[])


def run_suite(scenarios, sampler, sim_cfg: SimConfig, proposer=None,
              timing=True, episode_cap=None):
    """Run every scenario under one sampler configuration; returns rows."""
    kind, detail = SAMPLERS[sampler]
    rows = []
    for index, scenario in enumerate(scenarios):
        if episode_cap is not None and index >= episode_cap:
            break
        if kind == "uniform":
            action = UniformSampling(*detail)
            outcome = run_episode(scenario, action, sim_cfg,
                                  episode_index=index)
            rows.append(_episode_row(scenario, sampler, outcome, timing))
            continue
        try:
            outcome = run_episode(scenario, detail, sim_cfg, proposer=proposer,
                                  episode_index=index)
            rows.append(_episode_row(scenario, sampler, outcome, timing))
        except (ProposerTimeout, ProposerProtocolError) as exc:
            rows.append(_aborted_row(scenario, sampler, exc))
    return rows


def _fmt(value):
    if isinstance(value, float):
        if not np.isfinite(value):
            return ""
        return f"{value:.6f}"
    return str(value)


def write_results_csv(rows, out_path):
    buf = io.StringIO()
    buf.write(RESULTS_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.scenario_id, r.sampler, _fmt(r.samples_per_cycle),
                         r.outcome, r.steps, _fmt(r.min_obstacle_distance),
                         _fmt(r.feasible_fraction), _fmt(r.collision_fraction),
                         _fmt(r.infeasible_fraction), _fmt(r.mean_cycle_us),
                         _fmt(r.p95_cycle_us)])
    Path(out_path).write_text(buf.getvalue(), encoding="utf-8")


def summarize_rows(rows, detail_scenario=None):
    """Aggregate episode rows into the machine-readable run summary."""
    valid = [r for r in rows if r.outcome not in ABORT_OUTCOMES]
    aborted = len(rows) - len(valid)
    n = len(valid)
    generated = sum(r.generated_total for r in valid)
    class_totals = {s.name: sum(r.class_totals[s.name] for r in valid)
                    for s in Status}
    outcomes = {s.value: sum(1 for r in valid if r.outcome == s.value)
                for s in OutcomeStatus}
    finite_dists = [r.min_obstacle_distance for r in valid
                    if np.isfinite(r.min_obstacle_distance)]
    dist_stats = None
    if finite_dists:
        q = np.percentile(finite_dists, [0, 25, 50, 75, 100])
        dist_stats = {"min": q[0], "p25": q[1], "median": q[2], "p75": q[3],
                      "max": q[4]}
    detail = None
    if detail_scenario is not None:
        match = [r for r in valid if r.scenario_id == detail_scenario]
        if match:
            detail = {"scenario_id": detail_scenario,
                      "s": [c[0] for c in match[0].cycles],
                      "drivable_fraction": [c[1] for c in match[0].cycles]}
    phase_means = {}
    if valid and valid[0].phase_means:
        for phase in valid[0].phase_means:
            phase_means[phase] = float(np.mean([r.phase_means.get(phase, 0.0)
                                                for r in valid]))
    return {
        "format": 1,
        "sampler": rows[0].sampler if rows else None,
        "episodes": n,
        "aborted": aborted,
        "success_rate": outcomes["Success"] / n if n else 0.0,
        "failure_breakdown": {k: v / n if n else 0.0
                              for k, v in outcomes.items() if k != "Success"},
        "candidate_fractions": {
            "drivable": class_totals["DRIVABLE"] / generated if generated else 0.0,
            "colliding": class_totals["COLLIDING"] / generated if generated else 0.0,
            "infeasible": class_totals["INFEASIBLE"] / generated if generated else 0.0,
            "invalid": class_totals["INVALID"] / generated if generated else 0.0,
        },
        "conservation": {"generated_total": generated,
                         "classified_total": sum(class_totals.values())},
        "inclusion_violations": sum(r.inclusion_violations for r in valid),
        "samples_per_cycle_mean": float(np.mean([r.samples_per_cycle
                                                 for r in valid])) if valid else 0.0,
        "min_obstacle_distance": dist_stats,
        "cycle_time_us": {
            "mean": float(np.mean([r.mean_cycle_us for r in valid])) if valid else 0.0,
            "p95": float(np.mean([r.p95_cycle_us for r in valid])) if valid else 0.0,
            "phases": phase_means,
        },
        "clamped_proposals": sum(r.clamp_count for r in valid),
        "drivable_by_s": detail,
    }


def cmd_run(args):
    cfg = load_config(args.config)
    sim_cfg = sim_config_from(cfg)
    scenarios = load_suite(args.scenarios)
    if args.sampler not in SAMPLERS:
        raise PlanningError(f"unknown sampler {args.sampler!r}")
    proposer = make_proposer(args.sampler, tuple(cfg["oracle_grid"]),
                             args.proposer_cmd, cfg["act_timeout_ms"],
                             cfg["handshake_timeout_ms"])
    try:
        rows = run_suite(scenarios, args.sampler, sim_cfg, proposer,
                         timing=args.timing, episode_cap=args.episodes)
    finally:
        if proposer is not None:
            proposer.close()

    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    write_results_csv(rows, out_csv)
    detail_id = args.detail_scenario or (scenarios[0].id if scenarios else None)
    summary = summarize_rows(rows, detail_id)
    summary_path = out_csv.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n",
                            encoding="utf-8")
    print(f"wrote {out_csv} ({len(rows)} episodes, "
          f"success {summary['success_rate']:.2%})")
    return 0


# ---------------------------------------------------------------------------
# report


def read_results_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames != CSV_COLUMNS:
        unknown = set(reader.fieldnames or []) - set(CSV_COLUMNS)
        raise SchemaMismatch(f"unexpected columns in {path}: {sorted(unknown)}")
    return list(reader)


def _aggregate(rows):
    valid = [r for r in rows if r["outcome"] not in ABORT_OUTCOMES]
    n = len(valid)
    if n == 0:
        return {"episodes": 0}
    mean = lambda key: float(np.mean([float(r[key]) for r in valid if r[key] != ""]))
    return {
        "episodes": n,
        "aborted": len(rows) - n,
        "success_rate": sum(r["outcome"] == "Success" for r in valid) / n,
        "failure_breakdown": {
            status.value: sum(r["outcome"] == status.value for r in valid) / n
            for status in OutcomeStatus if status != OutcomeStatus.SUCCESS},
        "samples_per_cycle": mean("samples_per_cycle"),
        "feasible_fraction": mean("feasible_fraction"),
        "collision_fraction": mean("collision_fraction"),
        "infeasible_fraction": mean("infeasible_fraction"),
        "mean_cycle_us": mean("mean_cycle_us"),
        "p95_cycle_us": mean("p95_cycle_us"),
        "min_obstacle_distance_median": float(np.median(
            [float(r["min_obstacle_distance_m"]) for r in valid
             if r["min_obstacle_distance_m"] != ""])) if any(
                 r["min_obstacle_distance_m"] != "" for r in valid) else None,
    }


def cmd_report(args):
    rows = []
    summaries = []
    for path in args.results:
        rows.extend(read_results_csv(path))
        sibling = Path(path).with_suffix(".summary.json")
        if sibling.exists():
            summaries.append(json.loads(sibling.read_text(encoding="utf-8")))

    by_sampler = {}
    for row in rows:
        by_sampler.setdefault(row["sampler"], []).append(row)
    aggregates = {name: _aggregate(sampler_rows)
                  for name, sampler_rows in by_sampler.items()}

    deltas = {}
    base = aggregates.get("B800")
    for name, agg in aggregates.items():
        if name == "B800" or not base or agg["episodes"] == 0:
            continue
        deltas[name] = {
            "sample_reduction_pct":
                100.0 * (1.0 - agg["samples_per_cycle"] / base["samples_per_cycle"]),
            "runtime_ratio": (agg["mean_cycle_us"] / base["mean_cycle_us"]
                              if base["mean_cycle_us"] else None),
            "success_delta": agg["success_rate"] - base["success_rate"],
            "feasible_fraction_delta":
                agg["feasible_fraction"] - base["feasible_fraction"],
        }

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comparison = {"format": 1, "aggregates": aggregates, "deltas": deltas}
    (out / "comparison.json").write_text(
        json.dumps(comparison, sort_keys=True, indent=1) + "\n", encoding="utf-8")

    with open(out / "aggregates.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sampler", "episodes", "success_rate",
                         "samples_per_cycle", "feasible_fraction",
                         "collision_fraction", "infeasible_fraction",
                         "mean_cycle_us", "p95_cycle_us"])
        for name in sorted(aggregates):
            agg = aggregates[name]
            if agg["episodes"] == 0:
                continue
            writer.writerow([name, agg["episodes"],
                             f"{agg['success_rate']:.6f}",
                             f"{agg['samples_per_cycle']:.6f}",
                             f"{agg['feasible_fraction']:.6f}",
                             f"{agg['collision_fraction']:.6f}",
                             f"{agg['infeasible_fraction']:.6f}",
                             f"{agg['mean_cycle_us']:.3f}",
                             f"{agg['p95_cycle_us']:.3f}"])

    with open(out / "deltas.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sampler", "sample_reduction_pct", "runtime_ratio",
                         "success_delta", "feasible_fraction_delta"])
        for name in sorted(deltas):
            d = deltas[name]
            writer.writerow([name, f"{d['sample_reduction_pct']:.3f}",
                             "" if d["runtime_ratio"] is None
                             else f"{d['runtime_ratio']:.6f}",
                             f"{d['success_delta']:.6f}",
                             f"{d['feasible_fraction_delta']:.6f}"])

    with open(out / "drivable_by_s.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sampler", "scenario_id", "s", "drivable_fraction"])
        for summary in summaries:
            detail = summary.get("drivable_by_s")
            if not detail:
                continue
            for s, fr in zip(detail["s"], detail["drivable_fraction"]):
                writer.writerow([summary["sampler"], detail["scenario_id"],
                                 f"{s:.3f}", f"{fr:.6f}"])
    print(f"wrote report to {out}")
    return 0


# ---------------------------------------------------------------------------
# serve (external-proposer episode server on stdio)


def cmd_serve(args):
    cfg = load_config(args.config)
    sim_cfg = sim_config_from(cfg)
    params = scenario_params_from(cfg)
    level = NeighborhoodLevel(args.level)

    scenarios = load_suite(args.scenarios) if args.scenarios else None
    proposer = ExternalProposer(sys.stdin, sys.stdout,
                                act_timeout_ms=args.act_timeout_ms,
                                handshake_timeout_ms=cfg["handshake_timeout_ms"])
    name = proposer.handshake()
    print(f"serving {args.episodes} episodes to proposer {name!r}",
          file=sys.stderr)

    log_rows = []
    code = 0
    try:
        for index in range(args.episodes):
            if scenarios is not None:
                scenario = scenarios[index % len(scenarios)]
            else:
                scenario = generate_scenario(args.seed_start + index, params)
            outcome = run_episode(scenario, level, sim_cfg, proposer=proposer,
                                  episode_index=index, collect_cycles=False)
            log_rows.append((index, scenario.seed, outcome.status.value,
                             outcome.steps, outcome.cumulative_reward))
    except (ProposerTimeout, ProposerProtocolError) as exc:
        print(f"proposer error: {exc}", file=sys.stderr)
        code = 3
    finally:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["episode", "seed", "outcome", "steps", "return"])
                for row in log_rows:
                    writer.writerow([row[0], row[1], row[2], row[3],
                                     f"{row[4]:.6f}"])
        try:
            sys.stdout.close()
        except OSError:
            pass
    return code


# ---------------------------------------------------------------------------
# CLI


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frenetplan",
        description="Guided sampling-based motion planning benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a seeded scenario suite")
    p_gen.add_argument("--seed", type=int, default=1000,
                       help="first seed of the suite")
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--config", default=None, help="config JSON path")

    p_run = sub.add_parser("run", help="run one sampler over a suite")
    p_run.add_argument("--scenarios", required=True)
    p_run.add_argument("--sampler", required=True, choices=sorted(SAMPLERS))
    p_run.add_argument("--proposer-cmd", default=None,
                       help="external proposer command (RL modes only)")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--jobs", type=int, default=1,
                       help="accepted for compatibility; runs are sequential")
    p_run.add_argument("--out", required=True, help="results CSV path")
    p_run.add_argument("--episodes", type=int, default=None,
                       help="cap on the number of episodes")
    p_run.add_argument("--detail-scenario", default=None,
                       help="scenario id for the drivable-by-s table")
    timing = p_run.add_mutually_exclusive_group()
    timing.add_argument("--timing", dest="timing", action="store_true",
                        default=True)
    timing.add_argument("--no-timing", dest="timing", action="store_false",
                        help="zero timing columns for byte-stable output")

    p_rep = sub.add_parser("report", help="aggregate result CSVs")
    p_rep.add_argument("results", nargs="+")
    p_rep.add_argument("--out", required=True, help="output directory")

    p_srv = sub.add_parser("serve", help="serve episodes to a proposer on stdio")
    p_srv.add_argument("--episodes", type=int, required=True)
    p_srv.add_argument("--seed-start", type=int, default=50000)
    p_srv.add_argument("--level", default="None",
                       choices=[l.value for l in NeighborhoodLevel])
    p_srv.add_argument("--scenarios", default=None,
                       help="cycle a fixed suite instead of fresh seeds")
    p_srv.add_argument("--config", default=None)
    p_srv.add_argument("--out", default=None, help="episode log CSV")
    p_srv.add_argument("--act-timeout-ms", type=int, default=1000,
                       help="per-act deadline (training updates need slack)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            cfg = load_config(args.config)
            ids = cmd_gen(args.seed, args.count, args.out,
                          scenario_params_from(cfg))
            print(f"wrote {len(ids)} scenarios to {args.out}")
            return 0
        if args.command == "run":
            return cmd_run(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "serve":
            return cmd_serve(args)
    except PlanningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
