"""Command-line front end.

Subcommands: run (full pipeline into a run directory), metrics
(recompute front quality from a table), distance (structural distance
between two archived policies), synth-check (closed-form extrapolation
error harness), front-export (rebuild a front table from a policy
archive). Exit codes: 0 success, 1 usage or configuration error,
2 numerical failure.

Configs are flat INI files; every field has a default, so a minimal
config only names the environment and an output directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .archive import ArchiveRecord, load_archive, save_archive
from .distance import hungarian_distance
from .envs import make_env
from .extension import LleConfig, PipelineResult, run_pipeline
from .pareto import (
    ParetoArchive,
    expected_utility,
    hypervolume,
    load_front_table,
    save_front_table,
    sparsity,
)
from .ppo import DivergenceError, PpoConfig
from .quadratic import preset_error_curve
from .seeding import derive_seed
from .svgplot import render_front_svg

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2

EU_DEFAULT_SAMPLES = 10_000

CURVED_SLOPE_WINDOW = (1.7, 2.3)
FLAT_MAX_DIST = 1e-4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config files


def load_run_config(path: str | Path) -> dict:
    """Parse an INI run config, applying defaults for anything omitted."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")

    run = dict(parser["run"]) if parser.has_section("run") else {}
    lle = dict(parser["lle"]) if parser.has_section("lle") else {}
    ppo = dict(parser["ppo"]) if parser.has_section("ppo") else {}

    known_run = {"env", "seed", "total_budget", "output_dir"}
    if unknown := set(run) - known_run:
        raise ConfigError(f"unknown [run] keys: {sorted(unknown)}")

    seed = int(run.get("seed", 0))
    lle_kwargs = {"seed": seed}
    lle_fields = {f.name.lower(): f.name for f in fields(LleConfig)}
    for key, text in lle.items():
        if key not in lle_fields:
            raise ConfigError(f"unknown [lle] key: {key}")
        name = lle_fields[key]
        if name in ("K", "T_init", "T_dir", "T_ref", "eval_episodes", "final_eval_episodes", "seed"):
            lle_kwargs[name] = int(text)
        else:
            lle_kwargs[name] = float(text)

    ppo_kwargs = {}
    ppo_fields = {f.name for f in fields(PpoConfig)}
    for key, text in ppo.items():
        if key not in ppo_fields:
            raise ConfigError(f"unknown [ppo] key: {key}")
        ppo_kwargs[key] = int(text) if key in ("steps_per_batch", "minibatches", "epochs") else float(text)

    try:
        lle_cfg = LleConfig(**lle_kwargs)
        ppo_cfg = PpoConfig(**ppo_kwargs)
    except ValueError as err:
        raise ConfigError(str(err)) from err

    return {
        "env": run.get("env", "dual_goal"),
        "seed": seed,
        "total_budget": int(float(run.get("total_budget", 150_000))),
        "output_dir": run.get("output_dir"),
        "lle": lle_cfg,
        "ppo": ppo_cfg,
    }


def write_config_snapshot(path: Path, config: dict) -> None:
    """Persist the fully resolved configuration; replaying it reproduces the run."""
    parser = configparser.ConfigParser()
    parser["run"] = {
        "env": config["env"],
        "seed": str(config["seed"]),
        "total_budget": str(config["total_budget"]),
        "output_dir": str(config["output_dir"]),
    }
    def fmt(value) -> str:
        return repr(value) if isinstance(value, float) else str(value)

    parser["lle"] = {
        f.name.lower(): fmt(getattr(config["lle"], f.name))
        for f in fields(LleConfig)
        if getattr(config["lle"], f.name) is not None
    }
    parser["ppo"] = {f.name: fmt(getattr(config["ppo"], f.name)) for f in fields(PpoConfig)}
    with open(path, "w") as fh:
        parser.write(fh)


# ---------------------------------------------------------------------------
# run


def _candidate_records(cands, final_values) -> list[ArchiveRecord]:
    records = []
    for c in cands:
        meta = {
            "policy_id": c.policy_id,
            "stage": c.stage,
            "base_index": c.base_index,
            "alphas": list(c.alphas),
            "matched_w": c.matched_w.tolist(),
            "raw_w": c.raw_w.tolist(),
            "returns": c.returns.values.tolist() if c.returns is not None else None,
        }
        if c.policy_id in final_values:
            meta["final_returns"] = final_values[c.policy_id].tolist()
        records.append(ArchiveRecord(theta=c.theta, meta=meta))
    return records


def _write_run_artifacts(out_dir: Path, config: dict, result: PipelineResult, wall_seconds: float) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config_snapshot(out_dir / "config.ini", config)

    policies_dir = out_dir / "policies"
    save_archive(policies_dir / "bases.jsonl", _candidate_records(result.bases, result.final_values))
    save_archive(policies_dir / "selected.jsonl", _candidate_records(result.selected, result.final_values))
    save_archive(
        policies_dir / "fine_tuned.jsonl", _candidate_records(result.fine_tuned, result.final_values)
    )
    direction_records = []
    for k, dirs in enumerate(result.directions):
        for i, (theta, dw) in enumerate(zip(dirs.retrained_thetas, dirs.weight_deltas)):
            direction_records.append(
                ArchiveRecord(
                    theta=theta,
                    meta={
                        "base_index": k,
                        "direction_index": i + 1,
                        "weight_delta": dw.tolist(),
                        "mutually_non_dominated": bool(dirs.mutual_non_dominated[i]),
                        "degenerate_set": bool(dirs.degenerate),
                    },
                )
            )
    save_archive(policies_dir / "directions.jsonl", direction_records)
    final_members = [result.policies_by_id[p.policy_id] for p in result.archive.points]
    save_archive(policies_dir / "final.jsonl", _candidate_records(final_members, result.final_values))

    with open(out_dir / "candidates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        d = result.archive.d
        writer.writerow(
            ["policy_id", "base_index", "alphas", "matched_w", "raw_w"]
            + [f"obj_{i + 1}" for i in range(d)]
            + ["stage", "selected"]
        )
        selected_ids = {c.policy_id for c in result.selected}
        for c in result.bases + result.candidates + result.fine_tuned:
            writer.writerow(
                [
                    c.policy_id,
                    c.base_index,
                    ";".join(repr(a) for a in c.alphas),
                    ";".join(repr(x) for x in c.matched_w.tolist()),
                    ";".join(repr(x) for x in c.raw_w.tolist()),
                ]
                + [repr(float(v)) for v in c.returns.values]
                + [c.stage, int(c.policy_id in selected_ids)]
            )

    save_front_table(out_dir / "front.csv", result.archive)

    metrics = compute_metrics(
        result.archive,
        ref_point=result.ref_point,
        eu_samples=EU_DEFAULT_SAMPLES,
        eu_seed=derive_seed(config["seed"], "eu"),
    )
    metrics["budget"] = result.ledger.as_dict()
    metrics["wall_clock_seconds"] = wall_seconds
    metrics["stage_hv"] = {
        "bases": hypervolume(result.base_archive, result.ref_point),
        "after_selection": hypervolume(result.selection_archive, result.ref_point),
        "final": hypervolume(result.archive, result.ref_point),
    }
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2)

    render_front_svg(
        out_dir / "front.svg",
        result.archive.matrix(),
        [p.stage for p in result.archive.points],
        [result.policies_by_id[p.policy_id].is_base for p in result.archive.points],
        title=f"{config['env']} front (seed {config['seed']})",
    )
    return metrics


def compute_metrics(
    archive: ParetoArchive, ref_point: np.ndarray, eu_samples: int, eu_seed: int
) -> dict:
    return {
        "hv": hypervolume(archive, ref_point),
        "eu": expected_utility(archive, eu_samples, seed=eu_seed),
        "sp": sparsity(archive),
        "sp_defined": len(archive) >= 2,
        "ref_point": [float(v) for v in np.asarray(ref_point)],
        "n_weights": eu_samples,
        "eu_seed": int(eu_seed),
        "archive_size": len(archive),
    }


def cmd_run(args) -> int:
    config = load_run_config(args.config)
    if args.output_dir is not None:
        config["output_dir"] = args.output_dir
    if config["output_dir"] is None:
        raise ConfigError("no output_dir in [run] section and no --output-dir given")
    out_dir = Path(config["output_dir"])
    env = make_env(config["env"])
    start = time.monotonic()
    result = run_pipeline(
        env, config["lle"], config["ppo"], config["total_budget"], log_dir=out_dir / "train_logs"
    )
    metrics = _write_run_artifacts(out_dir, config, result, time.monotonic() - start)
    print(f"run complete: {len(result.archive)} front points -> {out_dir}")
    print(f"hv={metrics['hv']:.6g} eu={metrics['eu']:.6g} sp={metrics['sp']:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics(args) -> int:
    archive = load_front_table(args.front_table)
    if args.ref_point is not None:
        ref = np.array([float(v) for v in args.ref_point.split(",")])
        if ref.shape[0] != archive.d:
            raise ConfigError(f"reference point has {ref.shape[0]} entries, front has {archive.d}")
    else:
        ref = archive.matrix().min(axis=0) - 1.0
    metrics = compute_metrics(archive, ref, args.eu_samples, args.eu_seed)
    print(json.dumps(metrics, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# distance


def cmd_distance(args) -> int:
    records_a = load_archive(args.archive_a)
    records_b = load_archive(args.archive_b)
    try:
        rec_a = records_a[args.entry_a]
        rec_b = records_b[args.entry_b]
    except IndexError as err:
        raise ConfigError(f"archive entry out of range: {err}") from err
    total, breakdown = hungarian_distance(rec_a.theta, rec_b.theta)
    for layer, value in breakdown.items():
        print(f"{layer}: {value:.6g}")
    print(f"combined (log stds excluded): {total:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth-check


def cmd_synth_check(args) -> int:
    if args.preset not in ("flat", "curved"):
        raise ConfigError(f"unknown preset {args.preset!r}; choose flat or curved")
    curve = preset_error_curve(args.preset)
    if args.output is not None:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha_norm", "distance"])
            for a, dist in zip(curve.alpha_norms, curve.distances):
                writer.writerow([repr(float(a)), repr(float(dist))])
        print(f"curve table -> {out}")
    print(f"preset={args.preset} max_distance={curve.distances.max():.3e} "
          f"fitted_slope={curve.fitted_slope:.4f} window={curve.fit_window}")
    if args.preset == "flat":
        if curve.distances.max() > FLAT_MAX_DIST:
            print(f"FAIL: flat preset distance exceeds {FLAT_MAX_DIST}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"PASS: extrapolation stays on the front (<= {FLAT_MAX_DIST})")
    else:
        lo, hi = CURVED_SLOPE_WINDOW
        if not lo <= curve.fitted_slope <= hi:
            print(f"FAIL: slope {curve.fitted_slope:.3f} outside [{lo}, {hi}]", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"PASS: second-order error growth (slope in [{lo}, {hi}])")
    return EXIT_OK


# ---------------------------------------------------------------------------
# front-export


def cmd_front_export(args) -> int:
    records = load_archive(args.policies)
    from .pareto import FrontPoint

    points = []
    for rec in records:
        values = rec.meta.get("final_returns") or rec.meta.get("returns")
        if values is None:
            raise ConfigError(f"{args.policies}: record without return metadata")
        points.append(
            FrontPoint(np.array(values), rec.meta.get("policy_id", len(points)), rec.meta.get("stage", ""))
        )
    from .pareto import non_dominated_filter

    archive = non_dominated_filter(points)
    save_front_table(args.output, archive)
    print(f"{len(archive)} non-dominated rows -> {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morlext",
        description="Scalarized PPO training with training-free Pareto front extension",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the full pipeline from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output-dir", default=None, help="override [run] output_dir")
    p_run.set_defaults(func=cmd_run)

    p_metrics = sub.add_parser("metrics", help="recompute hv/eu/sp from a front table")
    p_metrics.add_argument("front_table")
    p_metrics.add_argument("--ref-point", default=None, help="comma-separated override")
    p_metrics.add_argument("--eu-samples", type=int, default=EU_DEFAULT_SAMPLES)
    p_metrics.add_argument("--eu-seed", type=int, default=0)
    p_metrics.set_defaults(func=cmd_metrics)

    p_dist = sub.add_parser("distance", help="matching distance between two archived policies")
    p_dist.add_argument("archive_a")
    p_dist.add_argument("archive_b")
    p_dist.add_argument("--entry-a", type=int, default=0)
    p_dist.add_argument("--entry-b", type=int, default=0)
    p_dist.set_defaults(func=cmd_distance)

    p_synth = sub.add_parser("synth-check", help="closed-form extrapolation error harness")
    p_synth.add_argument("preset", help="flat or curved")
    p_synth.add_argument("--output", default=None, help="write the curve table here")
    p_synth.set_defaults(func=cmd_synth_check)

    p_export = sub.add_parser("front-export", help="front table from an archived policy set")
    p_export.add_argument("policies", help="policy archive (.jsonl) with return metadata")
    p_export.add_argument("-o", "--output", required=True)
    p_export.set_defaults(func=cmd_front_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
