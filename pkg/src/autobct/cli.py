"""Command-line surface: build maps, run the optimizer, inspect artifacts.

Commands: build-map, run, otf, inspect, simulate, protocol.  Every command is
deterministic given its config document and seed; --seed (or AUTOBCT_SEED)
is the only entropy source.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfg
from .controller import run_exact, run_otf, run_relaxed
from .errors import AutoBCTError
from .oracle import GOLDEN_TRANSCRIPT
from .valuemap import build_cloud, build_value_map, load_map, save_map


def _output_dir(doc, args) -> Path:
    out = Path(args.output or doc.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_effective_config(doc, seed, out_dir: Path):
    with open(out_dir / "effective_config.json", "w") as fh:
        json.dump(cfg.effective_config(doc, seed), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_build_map(args) -> int:
    doc = cfg.load_config_document(args.config)
    seed = cfg.resolve_seed(doc, args.seed)
    spec = cfg.build_problem(doc)
    sampling = cfg.build_sampling(doc, spec.basis.dim_control)
    cloud_config = cfg.build_cloud_config(doc, spec)
    qfit, vfit = cfg.build_fit_specs(doc, spec.basis.dim_control)
    depth = int(doc.get("map_build", {}).get("depth", 3))
    out_dir = _output_dir(doc, args)

    started = time.monotonic()
    cloud = build_cloud(cloud_config, spec.basis, spec.noise, seed)
    vmap = build_value_map(
        cloud, depth, spec.gamma, sampling.build_plan(spec.basis.dim_control, seed),
        spec.basis, spec.noise, qfit, vfit,
        argmax_resolution=sampling.argmax_resolution, threads=args.threads,
    )
    elapsed = time.monotonic() - started

    map_path = out_dir / (doc.get("map_name", "value_map") + ".npz")
    save_map(vmap, map_path)
    report = {
        "map_path": str(map_path),
        "cloud_size": len(cloud.states),
        "truth_count": cloud.truth_count,
        "depth": depth,
        "wall_time_s": round(elapsed, 3),
        "levels": [
            {
                "level": diag["level"],
                "target_mean": float(np.mean(diag["targets"])),
                "target_min": float(np.min(diag["targets"])),
                "target_max": float(np.max(diag["targets"])),
                "mc_se_mean": float(np.mean(diag["point_se"])),
            }
            for diag in vmap.diagnostics
        ],
    }
    with open(out_dir / "build_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    _dump_effective_config(doc, seed, out_dir)
    print(f"map written to {map_path} ({len(cloud.states)} states, depth {depth}, {elapsed:.1f}s)")
    return 0


def _load_run_pieces(args, *, need_map: bool):
    doc = cfg.load_config_document(args.config)
    seed = cfg.resolve_seed(doc, args.seed)
    spec = cfg.build_problem(doc)
    sampling = cfg.build_sampling(doc, spec.basis.dim_control)
    has_map = "map" in doc and doc["map"].get("path")
    has_otf = "otf" in doc
    if need_map and has_map == has_otf:
        raise cfg.ConfigError("run configs need exactly one of map.path or otf settings")
    vmap = None
    if has_map:
        vmap = load_map(
            doc["map"]["path"], gamma=spec.gamma, basis=spec.basis,
            allow_gamma_mismatch=bool(doc["map"].get("allow_gamma_mismatch", False)),
        )
    return doc, seed, spec, sampling, vmap


def _finish_run(doc, args, seed, spec, outcome, label):
    out_dir = _output_dir(doc, args)
    trace_path = out_dir / f"{label}_trace.csv"
    with open(trace_path, "w", newline="") as fh:
        outcome.trace.write_csv(fh, outcome.stop_reason)
    summary = outcome.trace.summary(outcome.stop_reason)
    summary["params_star"] = spec.map_controls(outcome.trace.u_star)
    with open(out_dir / f"{label}_report.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    _dump_effective_config(doc, seed, out_dir)
    u_txt = ", ".join(f"{v:.3f}" for v in outcome.trace.u_star)
    print(
        f"u*=({u_txt}) h*={outcome.trace.h_star:.4f} T*={outcome.trace.t_total:.4f} "
        f"epochs={len(outcome.trace.rows)} stop={outcome.stop_reason}"
    )
    return 0


def cmd_run(args) -> int:
    doc, seed, spec, sampling, vmap = _load_run_pieces(args, need_map=not args.exact)
    qfit, _ = cfg.build_fit_specs(doc, spec.basis.dim_control)
    plan = sampling.run_plan(spec.basis.dim_control, seed)
    trainer = cfg.build_trainer(doc, spec)
    try:
        if args.exact:
            if vmap is None:
                raise cfg.ConfigError("--exact requires map.path in the config")
            outcome = run_exact(spec, vmap, trainer, plan, qfit,
                                argmax_resolution=sampling.argmax_resolution)
        else:
            outcome = run_relaxed(spec, vmap, trainer, plan, qfit,
                                  budget_guard=args.budget_guard,
                                  argmax_resolution=sampling.argmax_resolution)
    finally:
        trainer.close()
    return _finish_run(doc, args, seed, spec, outcome, "run")


def cmd_otf(args) -> int:
    doc = cfg.load_config_document(args.config)
    if doc.get("map", {}).get("path") and "otf" in doc:
        raise cfg.ConfigError("run configs need exactly one of map.path or otf settings")
    seed = cfg.resolve_seed(doc, args.seed)
    spec = cfg.build_problem(doc)
    sampling = cfg.build_sampling(doc, spec.basis.dim_control)
    otf_doc = doc.get("otf", {})
    depth = int(args.depth or otf_doc.get("depth", 2))
    plan = sampling.run_plan(spec.basis.dim_control, seed)
    first_doc = otf_doc.get("first", {})
    if first_doc:
        from .qvalue import SamplingPlan, uniform_grid

        plan_first = SamplingPlan(
            uniform_grid(spec.basis.dim_control, int(first_doc.get("grid_points", sampling.run_grid_points))),
            int(first_doc.get("n_samples", sampling.run_n_samples)),
            seed,
        )
    else:
        plan_first = None
    qfit, _ = cfg.build_fit_specs(doc, spec.basis.dim_control)
    trainer = cfg.build_trainer(doc, spec)
    try:
        outcome = run_otf(spec, depth, trainer, plan, plan_first, qfit,
                          budget_guard=args.budget_guard,
                          argmax_resolution=sampling.argmax_resolution)
    finally:
        trainer.close()
    return _finish_run(doc, args, seed, spec, outcome, "otf")


def cmd_inspect(args) -> int:
    vmap = load_map(args.map_path)
    meta = vmap.metadata
    print(f"value map: depth {meta['depth']}, {meta['dim_control']}D controls")
    print(f"  gamma={meta['gamma']} sigma_h={meta['sigma_h']} sigma_t={meta['sigma_t']}")
    print(f"  grid {len(meta['grid'])} points, n_samples {meta['n_samples']}, seed {meta['seed']}")
    print(f"  qfit {meta['qfit']['kind']}, vfit {meta['vfit']['kind']}")
    prov = meta.get("provenance", {})
    print(f"  cloud: size {prov.get('size')}, truths {prov.get('truth_count')}, "
          f"enriched {prov.get('enriched')}, seed {prov.get('seed')}")
    for i, level in enumerate(vmap.levels):
        stats = (float(level.ys.min()), float(level.ys.mean()), float(level.ys.max()))
        print(f"  level {i + 1}: targets min/mean/max = {stats[0]:.4f}/{stats[1]:.4f}/{stats[2]:.4f}")

    if args.config:
        # diagnostic Q-curve at the configured prior, against the top level
        from .qvalue import lambda_estimate

        doc = cfg.load_config_document(args.config)
        seed = cfg.resolve_seed(doc, args.seed)
        spec = cfg.build_problem(doc)
        check = load_map(args.map_path, gamma=spec.gamma, basis=spec.basis)
        sampling = cfg.build_sampling(doc, spec.basis.dim_control)
        qfit, _ = cfg.build_fit_specs(doc, spec.basis.dim_control)
        curve = lambda_estimate(
            spec.prior, check.level_function(-1, damping=spec.epsilon), spec.gamma,
            sampling.run_plan(spec.basis.dim_control, seed), spec.basis, spec.noise, qfit,
        )
        out_dir = _output_dir(doc, args)
        path = out_dir / "qcurve.csv"
        with open(path, "w", newline="") as fh:
            curve.write_csv(fh)
        print(f"  q-curve at the configured prior written to {path}")
    return 0


def cmd_simulate(args) -> int:
    doc, seed, spec, sampling, vmap = _load_run_pieces(args, need_map=True)
    qfit, _ = cfg.build_fit_specs(doc, spec.basis.dim_control)
    episodes = []
    for episode in range(args.runs):
        episode_seed = seed + episode
        plan = sampling.run_plan(spec.basis.dim_control, episode_seed)
        trainer = cfg.build_trainer(doc, spec)
        try:
            outcome = run_relaxed(spec, vmap, trainer, plan, qfit,
                                  budget_guard=args.budget_guard,
                                  argmax_resolution=sampling.argmax_resolution)
        finally:
            trainer.close()
        episodes.append({
            "seed": episode_seed,
            "epochs": len(outcome.trace.rows),
            "h_star": outcome.trace.h_star,
            "total_cost": outcome.trace.t_total,
            "u_star": outcome.trace.u_star.tolist(),
            "stop_reason": outcome.stop_reason,
        })
    epochs = np.array([e["epochs"] for e in episodes], dtype=float)
    scores = np.array([e["h_star"] for e in episodes])
    costs = np.array([e["total_cost"] for e in episodes])
    controls = np.array([e["u_star"] for e in episodes])
    report = {
        "runs": args.runs,
        "epochs_mean": float(epochs.mean()), "epochs_std": float(epochs.std(ddof=1) if len(epochs) > 1 else 0.0),
        "h_star_mean": float(scores.mean()), "h_star_std": float(scores.std(ddof=1) if len(scores) > 1 else 0.0),
        "cost_mean": float(costs.mean()), "cost_std": float(costs.std(ddof=1) if len(costs) > 1 else 0.0),
        "u_star_mean": controls.mean(axis=0).tolist(),
        "u_star_std": (controls.std(axis=0, ddof=1) if len(episodes) > 1 else np.zeros(controls.shape[1])).tolist(),
        "episodes": episodes,
    }
    out_dir = _output_dir(doc, args)
    with open(out_dir / "simulate_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    _dump_effective_config(doc, seed, out_dir)
    print(f"runs={args.runs} epochs={report['epochs_mean']:.2f}({report['epochs_std']:.2f}) "
          f"h*={report['h_star_mean']:.3f}({report['h_star_std']:.3f}) "
          f"cost={report['cost_mean']:.3f}({report['cost_std']:.3f}) "
          f"u*={np.round(report['u_star_mean'], 3).tolist()}")
    return 0


def cmd_protocol(args) -> int:
    print("newline-delimited JSON over the trainer's stdin/stdout; one reply per id")
    print(GOLDEN_TRANSCRIPT, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autobct", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="path to the JSON config document")
        p.add_argument("--seed", type=int, default=None, help="overrides AUTOBCT_SEED and the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
        p.add_argument("--output", default=None, help="output directory")

    p_build = sub.add_parser("build-map", help="precompute a value-function map")
    add_common(p_build)
    p_build.set_defaults(func=cmd_build_map)

    p_run = sub.add_parser("run", help="run the optimizer against a trainer")
    add_common(p_run)
    p_run.add_argument("--exact", action="store_true", help="finite-horizon variant (at most depth epochs)")
    p_run.add_argument("--budget-guard", type=int, default=None, help="hard cap on trainer calls")
    p_run.set_defaults(func=cmd_run)

    p_otf = sub.add_parser("otf", help="run map-free with nested Monte Carlo")
    add_common(p_otf)
    p_otf.add_argument("--depth", type=int, default=None)
    p_otf.add_argument("--budget-guard", type=int, default=None)
    p_otf.set_defaults(func=cmd_otf)

    p_inspect = sub.add_parser("inspect", help="print value-map metadata and level statistics")
    p_inspect.add_argument("map_path")
    p_inspect.add_argument("--config", default=None,
                           help="also dump the q-curve at this config's prior as CSV")
    p_inspect.add_argument("--seed", type=int, default=None)
    p_inspect.add_argument("--output", default=None)
    p_inspect.set_defaults(func=cmd_inspect)

    p_sim = sub.add_parser("simulate", help="seeded episodes against the configured trainer")
    add_common(p_sim)
    p_sim.add_argument("--runs", type=int, default=20)
    p_sim.add_argument("--budget-guard", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_proto = sub.add_parser("protocol", help="print the trainer wire-protocol transcript")
    p_proto.set_defaults(func=cmd_protocol)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AutoBCTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
