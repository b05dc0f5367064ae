"""Command-line driver: runs simulations and analyses and writes artifacts.

Every artifact is a deterministic function of (config, seed): floats are
written with repr, JSON keys are sorted and nothing time-dependent is
recorded, so reruns overwrite files byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from .analysis import convergence_report, detect_jumps, verify_physical_jump
from .cascade import SpikeState, cascade_size_inf, resolve_cascade
from .config import ExperimentSpec, load_config
from .delayed import delayed_to_limit_compare, run_delayed
from .errors import ConfigError, DomainError, SimulationError
from .particles import run_particle_system
from .paths import write_path_csv

log = logging.getLogger("spikecascade")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

SUBCOMMANDS = {
    "simulate-particles": "particles",
    "simulate-delayed": "delayed",
    "sweep": "sweep",
    "compare": "compare",
    "cascade-check": "cascade-check",
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_path(p, path):
    with open(path, "w", newline="") as fh:
        write_path_csv(p, fh)


def _write_jumps(jumps, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "size", "criterion_pass"])
        for j in jumps:
            passed = "" if j.criterion_pass is None else str(bool(j.criterion_pass)).lower()
            w.writerow([repr(float(j.time)), repr(float(j.size)), passed])


def _write_events(events, path):
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(_jsonable(ev.to_json()), sort_keys=True) + "\n")


def _particle_artifacts(out, cfg, spec: ExperimentSpec, outdir):
    os.makedirs(outdir, exist_ok=True)
    _write_path(out.ebar, os.path.join(outdir, "ebar.csv"))
    _write_events(out.events, os.path.join(outdir, "events.jsonl"))
    jumps = detect_jumps(out.ebar, spec.jump_threshold, out.events)
    checks = [verify_physical_jump(j, cfg.alpha) for j in jumps]
    for j, c in zip(jumps, checks):
        j.criterion_pass = c.passed if c.verifiable else j.criterion_pass
    _write_jumps(jumps, os.path.join(outdir, "jumps.csv"))
    for j, zp in enumerate(out.z_paths or []):
        _write_path(zp, os.path.join(outdir, f"particle_{j}.csv"))
    report = {
        "kind": "particles",
        "config": asdict(cfg),
        "moments": out.moments,
        "events": len(out.events),
        "max_cascade_fraction": out.max_cascade_fraction(),
        "ebar_final": float(out.ebar.values[-1]),
        "jumps": [{"t": j.time, "size": j.size, "verifiable": c.verifiable,
                   "physical": c.passed, "recomputed": c.recomputed} for j, c in zip(jumps, checks)],
    }
    _dump_json(report, os.path.join(outdir, "report.json"))
    return report


def _delayed_artifacts(out, cfg, spec: ExperimentSpec, outdir):
    os.makedirs(outdir, exist_ok=True)
    _write_path(out.e_delta, os.path.join(outdir, "e_delta.csv"))
    _write_path(out.m_mean, os.path.join(outdir, "m_mean.csv"))
    jumps = detect_jumps(out.e_delta, spec.jump_threshold)
    _write_jumps(jumps, os.path.join(outdir, "jumps.csv"))
    for j, mp in enumerate(out.sample_m_paths or []):
        _write_path(mp, os.path.join(outdir, f"replica_{j}_m.csv"))
    report = {
        "kind": "delayed",
        "config": asdict(cfg),
        "e_delta_final": float(out.e_delta.values[-1]),
        "e_delta_final_se": float(out.e_delta_se()[-1]),
        "jumps": [{"t": j.time, "size": j.size} for j in jumps],
    }
    _dump_json(report, os.path.join(outdir, "report.json"))
    return report


def _run_particles(cfg, spec, outdir, threads):
    out = run_particle_system(cfg, threads=threads)
    _particle_artifacts(out, cfg, spec, outdir)
    return out


def _run_delayed(cfg, spec, outdir, threads):
    out = run_delayed(cfg, threads=threads)
    _delayed_artifacts(out, cfg, spec, outdir)
    return out


def _seed_dir(base, seed):
    return os.path.join(base, f"seed_{seed}")


def _cascade_check(spec: ExperimentSpec):
    state = SpikeState(np.array(spec.potentials), float(spec.raw["alpha"]))
    res = resolve_cascade(state)
    summary = {
        "gamma": sorted(int(i) for i in res.gamma),
        "rounds": [[int(i) for i in r] for r in res.rounds],
        "jump_fraction": res.jump_fraction,
        "inf_formula": cascade_size_inf(state),
        "post_potentials": res.post_potentials,
    }
    print(f"gamma: {summary['gamma']}")
    print(f"rounds: {summary['rounds']}")
    print(f"inf-formula value: {summary['inf_formula']}")
    print(f"jump fraction: {res.jump_fraction!r}")
    os.makedirs(spec.out_dir, exist_ok=True)
    _dump_json(summary, os.path.join(spec.out_dir, "cascade.json"))


def _sweep(spec: ExperimentSpec, threads):
    runs, labels = [], []
    for value in spec.sweep:
        label = f"{spec.sweep_axis}_{value}"
        batch = []
        for seed in spec.seeds:
            cfg = spec.config_for(value, seed)
            outdir = _seed_dir(os.path.join(spec.out_dir, label), seed)
            runner = _run_delayed if spec.sweep_axis == "delta" else _run_particles
            batch.append(runner(cfg, spec, outdir, threads))
        runs.append(batch)
        labels.append(label)
    if len(runs) < 2:
        log.info("single sweep entry: no convergence report")
        return
    # reference: largest population or smallest delay
    key = (lambda v: -v) if spec.sweep_axis == "n" else (lambda v: v)
    ref = min(range(len(runs)), key=lambda i: key(spec.sweep[i]))
    rep = convergence_report(runs, runs[ref], labels=labels, bandwidth=spec.bandwidth,
                             threshold=spec.jump_threshold, resolution=spec.m1_resolution)
    body = rep.to_json()
    body["reference"] = labels[ref]
    _dump_json(body, os.path.join(spec.out_dir, "report.json"))


def _compare(spec: ExperimentSpec, threads):
    ref_batch = [_run_particles(spec.particle.with_seed(s), spec,
                                _seed_dir(os.path.join(spec.out_dir, "reference"), s), threads)
                 for s in spec.seeds]
    outputs = []
    for delta in spec.sweep:
        outputs.append([
            _run_delayed(spec.config_for(delta, s), spec,
                         _seed_dir(os.path.join(spec.out_dir, f"delta_{delta}"), s), threads)
            for s in spec.seeds])
    cmp = delayed_to_limit_compare(outputs, ref_batch, bandwidth=spec.bandwidth,
                                   threshold=spec.jump_threshold,
                                   resolution=spec.m1_resolution)
    body = cmp.to_json()
    body["reference_n"] = spec.reference_n
    body["seeds"] = spec.seeds
    _dump_json(body, os.path.join(spec.out_dir, "report.json"))


def dry_run_summary(spec: ExperimentSpec) -> dict:
    """Effective config plus grid size and a rough peak-memory estimate."""
    out = {"mode": spec.mode, "seeds": spec.seeds, "out_dir": spec.out_dir,
           "sweep_axis": spec.sweep_axis, "sweep": spec.sweep,
           "jump_threshold": spec.jump_threshold, "bandwidth": spec.bandwidth,
           "m1_resolution": spec.m1_resolution}
    if spec.mode == "cascade-check":
        out["alpha"] = spec.raw["alpha"]
        out["state_size"] = len(spec.potentials)
        return out
    cfgs = []
    if spec.mode in ("sweep", "compare"):
        cfgs = [spec.config_for(v) for v in spec.sweep]
    if spec.mode == "compare" or spec.mode == "particles":
        cfgs.append(spec.particle)
    if spec.mode == "delayed":
        cfgs.append(spec.delayed)
    derived = []
    for cfg in cfgs:
        size = getattr(cfg, "n", None) or cfg.replicas
        steps = cfg.steps
        # noise block + state vectors + per-step curves + recorded paths
        mem = 8 * (256 * size * 2 + 6 * size + 3 * (steps + 1))
        rec = getattr(cfg, "record_count", 0)
        if getattr(cfg, "record_trajectories", True):
            mem += 8 * 3 * (steps + 1) * min(rec, size)
        d = {"config": asdict(cfg), "grid_points": steps + 1, "memory_bytes": mem}
        if hasattr(cfg, "lag"):
            d["windows"] = cfg.windows
        derived.append(d)
    out["runs"] = derived
    return out


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> int:
    """Execute ``spec`` and write its artifacts; returns the exit status."""
    try:
        if spec.mode == "cascade-check":
            _cascade_check(spec)
        elif spec.mode == "particles":
            for s in spec.seeds:
                _run_particles(spec.particle.with_seed(s), spec,
                               _seed_dir(spec.out_dir, s), threads)
        elif spec.mode == "delayed":
            for s in spec.seeds:
                _run_delayed(spec.delayed.with_seed(s), spec, _seed_dir(spec.out_dir, s), threads)
        elif spec.mode == "sweep":
            _sweep(spec, threads)
        else:
            _compare(spec, threads)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"runtime error at step {exc.step} (t={exc.time}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DomainError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _report_config_error(exc: ConfigError):
    where = f" [{exc.field}]" if exc.field else ""
    print(f"config error{where}: {exc}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikecascade",
                                     description="Mean-field integrate-and-fire simulations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat JSON config file")
        p.add_argument("--out-dir", default="out")
        p.add_argument("--seeds", help="comma-separated seeds, overrides the config")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--dry-run", action="store_true",
                       help="print the effective config and exit")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _parse_seeds(text):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}", field="--seeds") from None
    if not seeds or any(s < 0 for s in seeds):
        raise ConfigError("seeds must be a non-empty list of non-negative integers",
                          field="--seeds")
    return seeds


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("threads must be >= 1", field="--threads")
        spec = load_config(args.config, SUBCOMMANDS[args.command], args.out_dir)
        if args.seeds is not None:
            spec.seeds = _parse_seeds(args.seeds)
            if spec.particle is not None:
                spec.particle = replace(spec.particle, seed=spec.seeds[0])
            if spec.delayed is not None:
                spec.delayed = replace(spec.delayed, seed=spec.seeds[0])
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    if args.dry_run:
        print(json.dumps(_jsonable(dry_run_summary(spec)), sort_keys=True, indent=2))
        return EXIT_OK
    return run_experiment(spec, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
