"""Command-line entry points.

Output layout under ``--out``: ``dataset/``, ``checkpoints/``, ``logs/``, ``reports/``.
Exit codes: 0 success, 1 I/O, parse or stage failure, 2 validation failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import eval as ev
from .decision.io import load_checkpoint, load_dataset, save_checkpoint, save_dataset
from .decision.net import BASELINE_KINDS, build_baseline
from .decision.synthetic import dataset_loss, make_mode_task
from .decision.train import DemoDataset, TrainConfig, tbptt_train
from .dlm import DLM
from .experiments import SIM_CAMERA, SIM_NET, SIM_TRAIN, SYNTH_NET, SYNTH_TRAIN
from .intention import build_intention_plan, render_lpe, save_png, transition_intention
from .mapsys import (ExitNode, MapError, MapPosition, ParseError, binarize_floorplan, build_bundle,
                     load_bundle, load_raster, load_road_export, save_bundle, validate_bundle)
from .planner import GridPath, NoPath, Planner, PlanningError, Unreachable
from .sim import (CameraConfig, ExpertPolicy, NetPolicy, PathTrackerPolicy, TrajectoryLog,
                  builtin_scenario, collect_demonstrations, load_scenario, make_planner, run_episode)

log = logging.getLogger("intentnav")


class StageError(Exception):
    """A pipeline stage failed; reported with exit code 1."""


class ValidationFailed(Exception):
    """Input parsed but violates invariants; reported with exit code 2."""


# --------------------------------------------------------------------------
# helpers

def _position(text: str) -> MapPosition | str:
    """``FLOOR:X:Y`` in meters, or a bare exit id."""
    parts = text.split(":")
    if len(parts) == 3:
        try:
            return MapPosition(parts[0], float(parts[1]), float(parts[2]))
        except ValueError:
            pass
    return text


def _seeds(text) -> list[int]:
    """``0-9``, ``1,4,7`` or a list from a config file."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    out: list[int] = []
    for part in str(text).split(","):
        if "-" in part.strip()[1:]:
            a, b = part.split("-", 1)
            out += list(range(int(a), int(b) + 1))
        elif part.strip():
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def _scenario(name: str, seeds=None):
    if Path(name).suffix == ".json" or Path(name).exists():
        sc = load_scenario(name)
        return sc if seeds is None else dataclasses.replace(sc, seeds=tuple(seeds))
    try:
        return builtin_scenario(name, seeds)
    except KeyError as exc:
        raise StageError(str(exc.args[0])) from exc


def _dirs(out: str | Path) -> dict[str, Path]:
    root = Path(out)
    return {k: root / k for k in ("dataset", "checkpoints", "logs", "reports")}


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# map

def cmd_map_build(args) -> int:
    spec_path = Path(args.spec)
    try:
        spec = json.loads(spec_path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{spec_path}:{exc.lineno}:{exc.colno}") from exc
    base = spec_path.parent
    try:
        fps = [binarize_floorplan(load_raster(base / f["image"]), float(f["resolution"]), fid=str(f["id"]),
                                  origin=tuple(f.get("origin", (0.0, 0.0))))
               for f in spec["floorplans"]]
        exits = [ExitNode.from_json(e) for e in spec.get("exits", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{type(exc).__name__}: {exc}", str(spec_path)) from exc
    roads = load_road_export(base / spec["roads"]) if spec.get("roads") else None
    bundle = build_bundle(fps, exits, roads, provenance={"spec": spec_path.name})
    problems = validate_bundle(bundle)
    if problems:
        for v in problems:
            print(v)
        raise ValidationFailed(f"{len(problems)} violation(s); bundle not written")
    save_bundle(bundle, args.out)
    kinds: dict[str, int] = {}
    for e in bundle.edges:
        kinds[e.kind.value] = kinds.get(e.kind.value, 0) + 1
    print(json.dumps({"bundle": str(args.out), "floorplans": len(bundle.floorplans),
                      "exits": len(bundle.exits), "edges": kinds}, sort_keys=True))
    return 0


def cmd_map_validate(args) -> int:
    _, problems = load_bundle(args.bundle)
    for v in problems:
        print(v)
    if problems:
        raise ValidationFailed(f"{len(problems)} violation(s)")
    print("ok")
    return 0


# --------------------------------------------------------------------------
# planning and intentions

def _load_valid_bundle(path):
    bundle, problems = load_bundle(path)
    if problems:
        for v in problems:
            print(v)
        raise ValidationFailed(f"{len(problems)} violation(s) in {path}")
    return bundle


def cmd_plan(args) -> int:
    bundle = _load_valid_bundle(args.bundle)
    planner = Planner(bundle, inflation=args.inflation)
    try:
        route = planner.plan(_position(args.start), _position(args.goal))
    except PlanningError as exc:
        kind = "unreachable" if isinstance(exc, (Unreachable, NoPath)) else "failed"
        raise StageError(f"{kind}: {type(exc).__name__}: {exc}") from exc
    doc = route.to_json()
    doc["segments"] = len(route.segments)
    print(json.dumps(doc, sort_keys=True) if args.json else _route_text(route))
    return 0


def _route_text(route) -> str:
    lines = [f"exits: {' -> '.join(n for n in route.to_json()['exits']) or '(none)'}",
             f"weight: {route.topo.weight:.3f} m"]
    for leg in route.legs:
        if isinstance(leg, GridPath):
            lines.append(f"  path on {leg.floorplan_id}: {len(leg.cells)} cells, {leg.cost:.3f} m")
        else:
            lines.append(f"  {leg.kind} {leg.from_id} -> {leg.to_id}")
    return "\n".join(lines)


def cmd_intent(args) -> int:
    bundle = _load_valid_bundle(args.bundle)
    planner = Planner(bundle, inflation=args.inflation)
    try:
        route = planner.plan(_position(args.start), _position(args.goal))
    except PlanningError as exc:
        raise StageError(f"{type(exc).__name__}: {exc}") from exc
    legs = []
    for k, leg in enumerate(route.legs):
        if isinstance(leg, GridPath):
            last = k == len(route.legs) - 1
            plan = build_intention_plan(leg.polyline, resolution=leg.resolution,
                                        terminal=DLM.STOP if last else DLM.GO_FORWARD)
            legs.append({"floorplan": leg.floorplan_id, **plan.to_json()})
        else:
            edge_kind = "layer" if leg.kind == "road" else leg.kind
            legs.append({"transition": leg.kind, "from": leg.from_id, "to": leg.to_id,
                         "dlm": transition_intention(edge_kind, leg.exit_type).value})
    print(json.dumps({"legs": legs}, sort_keys=True))
    if args.lpe:
        first = route.segments[0]
        pts = first.polyline
        d = pts[min(1, len(pts) - 1)] - pts[0]
        heading = float(np.arctan2(d[1], d[0])) if np.hypot(*d) > 0 else 0.0
        img = render_lpe(bundle.floorplan_map[first.floorplan_id], pts[:1], pts,
                         (pts[0][0], pts[0][1], heading))
        save_png(img, args.lpe)
    return 0


# --------------------------------------------------------------------------
# data and training

def _collect_one(job):
    name, seed, episodes, ticks, noise, side, range_m = job
    sc = _scenario(name)
    camera = CameraConfig(side=side, range_m=range_m)
    return collect_demonstrations([sc], ExpertPolicy(noise=noise), episodes=episodes, ticks=ticks,
                                  camera=camera, seed0=seed)


def _pmap(fn, jobs, n: int):
    if n <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, jobs))     # results kept in submission order


def cmd_collect(args) -> int:
    jobs = [(name, args.seed0 + k, 1, args.ticks, args.noise, args.camera_side, args.camera_range)
            for name in args.scenario for k in range(args.episodes)]
    results = _pmap(_collect_one, jobs, args.jobs)
    notes = [n for _, ns in results for n in ns]
    parts = [d for d, _ in results if d is not None]
    if not parts:
        raise StageError("no demonstrations recorded")
    ds = DemoDataset.concat(parts)
    out = _dirs(args.out)["dataset"]
    save_dataset(ds, out)
    freq = {m.value: round(f, 6) for m, f in ds.mode_frequencies(ignore=()).items()}
    _write_json(out / "collect.json", {"scenarios": args.scenario, "episodes": args.episodes,
                                       "seed0": args.seed0, "records": len(ds),
                                       "sequences": len(ds.sequences), "modes": freq, "skipped": notes})
    print(json.dumps({"dataset": str(out), "records": len(ds), "modes": freq}, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    dirs = _dirs(args.out)
    if args.synthetic:
        net_cfg, base = SYNTH_NET, SYNTH_TRAIN
        ds = make_mode_task(24, 20, net_cfg.input_side, np.random.default_rng(args.seed + 1))
    else:
        net_cfg, base = SIM_NET, SIM_TRAIN
        src = Path(args.dataset) if args.dataset else dirs["dataset"]
        ds = load_dataset(src)
        side = ds.observations.shape[-1]
        net_cfg = dataclasses.replace(net_cfg, input_side=side)
    cfg = dataclasses.replace(base, max_iters=args.iters, seed=args.seed,
                              **({"base_lr": args.lr / (base.batch_size * base.k2)} if args.lr else {}))
    net = build_baseline(args.kind, dataclasses.replace(net_cfg, seed=args.seed))
    before = dataset_loss(net, ds) if args.synthetic else None
    res = tbptt_train(net, ds, cfg, np.random.default_rng(args.seed))
    ckpt = dirs["checkpoints"] / f"{args.kind}.ckpt"
    save_checkpoint(net, ckpt, extra={"train": dataclasses.asdict(cfg), "iterations": res.iterations})
    curve = dirs["reports"] / f"loss_{args.kind}.csv"
    curve.parent.mkdir(parents=True, exist_ok=True)
    curve.write_text("iteration,loss\n" + "".join(f"{i + 1},{l:.8f}\n" for i, l in enumerate(res.losses)))
    doc = {"checkpoint": str(ckpt), "iterations": res.iterations,
           "first_loss": res.losses[0] if res.losses else None,
           "last_loss": res.losses[-1] if res.losses else None}
    if before is not None:
        doc.update(dataset_loss_before=before, dataset_loss_after=dataset_loss(net, ds))
    print(json.dumps(doc, sort_keys=True))
    return 0


# --------------------------------------------------------------------------
# evaluation

def _policy(spec: str, checkpoint: str | None):
    if spec == "expert":
        return ExpertPolicy(), None
    if spec == "path_tracker":
        return PathTrackerPolicy(), None
    if spec == "net":
        if not checkpoint:
            raise StageError("--policy net needs --checkpoint")
        net = load_checkpoint(checkpoint)
        return NetPolicy(net), CameraConfig(side=net.config.input_side, range_m=SIM_CAMERA.range_m)
    raise StageError(f"unknown policy {spec!r}")


def _eval_one(job):
    name, seed, policy_spec, checkpoint, anchoring = job
    sc = _scenario(name)
    policy, camera = _policy(policy_spec, checkpoint)
    logf = run_episode(policy, sc, seed, camera=camera, anchoring=anchoring)
    return logf, policy.forward_calls, policy.forward_seconds


def cmd_eval(args) -> int:
    dirs = _dirs(args.out)
    scenarios = args.scenario
    runs: dict[str, dict[str, list[TrajectoryLog]]] = {}
    timing: dict[str, dict] = {}
    for spec in args.policy:
        jobs = []
        for name in scenarios:
            seeds = args.seeds if args.seeds is not None else list(_scenario(name).seeds)
            jobs += [(name, s, spec, args.checkpoint, not args.no_anchoring) for s in seeds]
        results = _pmap(_eval_one, jobs, args.jobs)
        calls = sum(r[1] for r in results)
        secs = sum(r[2] for r in results)
        for logf, _, _ in results:
            logf.write(dirs["logs"])
            runs.setdefault(logf.policy, {}).setdefault(logf.scenario, []).append(logf)
        pname = results[0][0].policy if results else spec
        timing[pname] = {"forward_calls": calls,
                         "calls_per_second": (calls / secs) if secs > 0 else None}
    table = ev.task_report(runs)
    table.write(dirs["reports"] / "task_report")
    tables = {"task_report": table}
    if args.ablation:
        tp = {k: v["calls_per_second"] for k, v in timing.items()}
        ab = ev.ablation_report(runs, tp)
        # deterministic copy without the wall-clock column
        det = ev.Table(ab.header[:-1], [r[:-1] for r in ab.rows])
        det.write(dirs["reports"] / "ablation_report")
        ab.write(dirs["reports"] / "ablation_throughput")
        tables["ablation_report"] = det
    config = {"scenarios": scenarios, "policies": args.policy, "checkpoint": args.checkpoint,
              "seeds": args.seeds, "anchoring": not args.no_anchoring}
    seeds = sorted({l.seed for per in runs.values() for ls in per.values() for l in ls})
    _write_json(dirs["reports"] / "summary.json", ev.experiment_summary(config, seeds, tables))
    _write_json(dirs["reports"] / "timing.json", timing)
    print(table.text(), end="")
    return 0


def cmd_report(args) -> int:
    dirs = _dirs(args.out)
    csvs = sorted(dirs["logs"].glob("*.csv"))
    if not csvs:
        raise StageError(f"no logs under {dirs['logs']}")
    runs: dict[str, dict[str, list[TrajectoryLog]]] = {}
    for p in csvs:
        logf = TrajectoryLog.read(p)
        runs.setdefault(logf.policy, {}).setdefault(logf.scenario, []).append(logf)
    for per in runs.values():
        for ls in per.values():
            ls.sort(key=lambda l: l.seed)
    tasks = sorted({t for per in runs.values() for t in per})
    for per in runs.values():
        for t in tasks:
            per.setdefault(t, None)
    table = ev.ablation_report(runs) if args.ablation else ev.task_report(runs)
    stem = "ablation_report" if args.ablation else "task_report"
    table.write(dirs["reports"] / stem)
    print(table.text(), end="")
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    p = argparse.ArgumentParser(prog="intentnav", description="Intention-guided navigation pipeline.")
    p.add_argument("--config", help="JSON file of flag defaults; command-line flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    m = sub.add_parser("map", help="build or validate a map bundle")
    msub = m.add_subparsers(dest="map_command", required=True)
    b = msub.add_parser("build", help="floorplan rasters + exit annotations (+ roads) -> bundle")
    b.add_argument("spec", help="map spec JSON: floorplans (id, image, resolution), exits, roads")
    b.add_argument("--out", required=True, help="bundle JSON to write")
    b.set_defaults(func=cmd_map_build)
    v = msub.add_parser("validate", help="list invariant violations of a bundle")
    v.add_argument("bundle")
    v.set_defaults(func=cmd_map_validate)
    subs["map build"], subs["map validate"] = b, v

    for name, func, hlp in (("plan", cmd_plan, "exit sequence and per-floorplan paths"),
                            ("intent", cmd_intent, "intention control points along a route")):
        c = sub.add_parser(name, help=hlp)
        c.add_argument("--bundle", required=True)
        c.add_argument("--start", required=True, help="FLOOR:X:Y in meters, or an exit id")
        c.add_argument("--goal", required=True, help="FLOOR:X:Y in meters, or an exit id")
        c.add_argument("--inflation", type=float, default=1.0, help="obstacle inflation, cells")
        if name == "plan":
            c.add_argument("--json", action="store_true")
        else:
            c.add_argument("--lpe", help="write the first leg's LPE image to this PNG")
        c.set_defaults(func=func)
        subs[name] = c

    c = sub.add_parser("collect", help="record expert demonstrations")
    c.add_argument("--scenario", nargs="+", default=["blind_spot"], help="built-in name or scenario JSON")
    c.add_argument("--episodes", type=int, default=10)
    c.add_argument("--ticks", type=int, default=None, help="cap on ticks per episode")
    c.add_argument("--seed0", type=int, default=0)
    c.add_argument("--noise", type=float, default=0.0, help="turn-rate perturbation of executed commands")
    c.add_argument("--camera-side", type=int, default=SIM_CAMERA.side)
    c.add_argument("--camera-range", type=float, default=SIM_CAMERA.range_m)
    c.add_argument("--out", default="runs")
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_collect)
    subs["collect"] = c

    t = sub.add_parser("train", help="TBPTT training of a controller")
    t.add_argument("--kind", default="decision", choices=sorted(BASELINE_KINDS))
    t.add_argument("--dataset", help="dataset directory (default OUT/dataset)")
    t.add_argument("--synthetic", action="store_true", help="train on the mode-conditioned toy task")
    t.add_argument("--iters", type=int, default=200)
    t.add_argument("--lr", type=float, default=None, help="effective learning rate")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="runs")
    t.set_defaults(func=cmd_train)
    subs["train"] = t

    e = sub.add_parser("eval", help="closed-loop seeded episodes, logs and reports")
    e.add_argument("--scenario", nargs="+", default=[f"task_{k}" for k in "ABCDE"])
    e.add_argument("--policy", nargs="+", default=["expert"], help="expert | path_tracker | net")
    e.add_argument("--checkpoint")
    e.add_argument("--seeds", type=_seeds, default=None, help="e.g. 0-9 or 1,4,7 (default: scenario's)")
    e.add_argument("--no-anchoring", action="store_true")
    e.add_argument("--ablation", action="store_true", help="also write the SR / Avg.Int. table")
    e.add_argument("--out", default="runs")
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_eval)
    subs["eval"] = e

    r = sub.add_parser("report", help="rebuild report tables from logs")
    r.add_argument("--out", default="runs")
    r.add_argument("--ablation", action="store_true")
    r.set_defaults(func=cmd_report)
    subs["report"] = r
    return p, subs


def _apply_config(argv, parser, subs):
    """Re-parse with defaults from ``--config``: top-level keys apply to every
    command, a key named after the command holds command-specific ones."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{args.config}:{exc.lineno}:{exc.colno}") from exc
    key = args.command if args.command != "map" else f"map {args.map_command}"
    sp = subs[key]
    known = {a.dest for a in sp._actions}
    flat = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
    flat.update({k.replace("-", "_"): v for k, v in cfg.get(key, {}).items()})
    unknown = sorted(k for k in cfg.get(key, {}) if k.replace("-", "_") not in known)
    if unknown:
        raise ParseError(f"unknown keys {unknown}", str(args.config))
    if "seeds" in flat:
        flat["seeds"] = _seeds(flat["seeds"])
    sp.set_defaults(**{k: v for k, v in flat.items() if k in known})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = _apply_config(argv, parser, subs)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationFailed as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return 2
    except (OSError, MapError, StageError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
