"""Command-line front ends.

`hiaer` drives the interaction pipeline: live runs, deterministic replays,
latency measurement, the operator HTTP server, and the scenario evaluation.
`retarget` is the standalone motion-to-robot tool: train weights, convert
clips, and rebalance datasets over the reachable workspace.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import evalharness as ev
from .affect import Vocabulary
from .config import AppConfig, ConfigError, default_config, load_config
from .intent import IntentEngine
from .intent.clients import ScriptedInferenceClient
from .motion import MotionClip, read_clip, read_clip_json
from .pipeline import (
    EventLog,
    LivePipeline,
    PipelineError,
    ScenarioError,
    ScriptedFeed,
    load_scenario,
    measure_latency,
    run_replay,
)
from .retarget import (
    RetargetError,
    RobotDescriptor,
    TrainingPair,
    WorkspaceGrid,
    load_reference_network,
    load_weights,
    reference_pose_map,
    resample_balanced,
    retarget_clip,
    save_weights,
    train,
)


def _fail(message: str) -> "int":
    print(f"error: {message}", file=sys.stderr)
    return 2


def _app_config(args) -> AppConfig:
    cfg = load_config(args.config) if args.config else default_config()
    backends = cfg.pipeline.backends
    if getattr(args, "mock_inference", None):
        backends = dataclasses.replace(
            backends, inference="scripted", script_path=str(args.mock_inference)
        )
    if getattr(args, "backend", None):
        backends = dataclasses.replace(backends, motion=args.backend)
    if backends is not cfg.pipeline.backends:
        cfg = dataclasses.replace(
            cfg, pipeline=dataclasses.replace(cfg.pipeline, backends=backends)
        )
    return cfg


def _add_backend_opts(parser) -> None:
    parser.add_argument(
        "--mock-inference",
        metavar="SCRIPT",
        help="scripted inference replies (JSON with a 'replies' list) instead of the HTTP client",
    )
    parser.add_argument(
        "--backend",
        choices=("procedural", "remote"),
        help="motion generator backend",
    )


def _print_run_summary(result) -> None:
    summary = result.metrics.summary()
    switches = [
        {"t": r.timestamp, "from": r.payload["from"], "to": r.payload["to"]}
        for r in result.events("primitive_switch")
    ]
    print(json.dumps({"metrics": summary, "switches": switches}, indent=2))


def _make_pipeline(cfg: AppConfig, feed: ScriptedFeed, jsonl, **inject) -> LivePipeline:
    vocabulary = Vocabulary.from_file(cfg.vocabulary_path) if cfg.vocabulary_path else None
    return LivePipeline(
        cfg.pipeline,
        feed,
        vocabulary=vocabulary,
        affect_cfg=cfg.affect,
        engine_cfg=cfg.engine,
        gains=cfg.gains,
        sim_cfg=cfg.sim,
        event_log=EventLog(jsonl),
        **inject,
    )


def _cmd_run(args) -> int:
    cfg = _app_config(args)
    inject = {}
    if args.scenario:
        spec = load_scenario(args.scenario)
        feed = ScriptedFeed(spec.inputs)
        duration = args.duration if args.duration is not None else spec.duration_for(cfg.pipeline)
        if cfg.pipeline.backends.inference == "scripted" and not cfg.pipeline.backends.script_path:
            if not 0 <= args.trial < spec.trial_count:
                return _fail(f"scenario {spec.id} has {spec.trial_count} trials, not {args.trial + 1}")
            inject["inference_client"] = ScriptedInferenceClient(
                spec.trials[args.trial], exhausted="repeat_last"
            )
    else:
        if args.duration is None:
            return _fail("run without a scenario needs --duration")
        feed = ScriptedFeed([])
        duration = args.duration
    pipe = _make_pipeline(cfg, feed, args.jsonl, **inject)
    pipe.start()
    result = pipe.run_for(duration)
    _print_run_summary(result)
    return 0


def _cmd_replay(args) -> int:
    cfg = _app_config(args)
    spec = load_scenario(args.scenario)
    result = run_replay(spec, cfg.pipeline, trial=args.trial, jsonl_path=args.jsonl)
    _print_run_summary(result)
    return 0


def _cmd_latency(args) -> int:
    cfg = _app_config(args)
    report = measure_latency(
        cfg.pipeline, trials=args.trials, concurrency=args.concurrency, rng_seed=args.seed
    )
    print(report.render())
    return 0


def _cmd_serve(args) -> int:
    from . import server

    cfg = _app_config(args)
    host, port = None, None
    if args.addr:
        host, _, port_text = args.addr.rpartition(":")
        if not host or not port_text.isdigit():
            return _fail(f"--addr must look like host:port, got {args.addr!r}")
        port = int(port_text)
    server.serve(cfg, host=host, port=port, console_dir=args.console_dir)
    return 0


def _cmd_eval(args) -> int:
    ids = None if args.scenarios == "all" else tuple(args.scenarios.split(","))
    scenarios = ev.load_bundled_scenarios(ids)
    results = ev.run_scenarios(scenarios, rng_seed=args.seed, workers=args.workers)
    report = ev.build_report(results, scenarios)
    reference = ev.load_reference_tables()
    out = Path(args.out)
    written = []
    for fmt in ("text", "structured", "plots"):
        written += ev.emit_report(report, fmt, out, reference=reference)
    print(ev.render_report(report, reference))
    if args.modes:
        modes = tuple(args.modes.split(","))
        engine = IntentEngine(ev.make_ablation_client(scenarios, rng_seed=args.seed))
        ablation = ev.run_ablation(engine, scenarios, modes=modes, rng_seed=args.seed)
        text = ev.render_ablation(ablation, reference)
        (out / "ablation.txt").write_text(text)
        written.append(out / "ablation.txt")
        print(text)
    print("wrote:", ", ".join(str(p) for p in written))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hiaer", description=__doc__.splitlines()[0])
    parser.add_argument("--config", metavar="PATH", help="config file (JSON)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the pipeline on the wall clock")
    p.add_argument("scenario", nargs="?", help="scenario file supplying inputs")
    p.add_argument("--duration", type=float, help="seconds to run")
    p.add_argument("--trial", type=int, default=0, help="scenario trial for scripted replies")
    p.add_argument("--jsonl", metavar="PATH", help="write the event transcript here")
    _add_backend_opts(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="deterministic replay on a virtual clock")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--jsonl", metavar="PATH", help="write the event transcript here")
    _add_backend_opts(p)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("latency", help="latency probe per stage (real sleeps; takes a while)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--concurrency", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    _add_backend_opts(p)
    p.set_defaults(func=_cmd_latency)

    p = sub.add_parser("serve", help="operator HTTP API")
    p.add_argument("--addr", metavar="HOST:PORT")
    p.add_argument("--console-dir", metavar="DIR", help="static console bundle to mount at /app")
    _add_backend_opts(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("eval", help="scenario evaluation against the reference tables")
    p.add_argument("--scenarios", default="all", help="'all' or comma-separated ids")
    p.add_argument("--modes", default="", help="comma-separated modality ablation modes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="report", help="output directory")
    _add_backend_opts(p)
    p.set_defaults(func=_cmd_eval)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PipelineError, ScenarioError, ev.HarnessError, OSError) as exc:
        return _fail(str(exc))


# ---------------------------------------------------------------------------
# retarget


def _read_any_clip(path: Path) -> MotionClip:
    if path.suffix == ".json":
        return read_clip_json(path)
    return read_clip(path)


def _descriptor(args) -> RobotDescriptor:
    if args.descriptor:
        return RobotDescriptor.from_file(args.descriptor)
    return RobotDescriptor.default()


def _retarget_train(args) -> int:
    desc = _descriptor(args)
    pairs = []
    for clip_path in args.clips:
        clip = _read_any_clip(Path(clip_path))
        for i in range(len(clip)):
            frame = clip.frames[i]
            pairs.append(TrainingPair(frame, reference_pose_map(clip.frame(i), desc)))
    net, losses = train(pairs, epochs=args.epochs, learning_rate=args.lr, rng_seed=args.seed)
    save_weights(args.weights, net)
    print(f"trained on {len(pairs)} frames, mse {losses[0]:.6f} -> {losses[-1]:.6f}")
    print(f"wrote {args.weights}")
    return 0


def _retarget_run(args) -> int:
    desc = _descriptor(args)
    net = load_weights(args.weights) if args.weights else load_reference_network()
    clip = _read_any_clip(Path(args.clip))
    traj = retarget_clip(net, clip, desc)
    doc = {"fps": traj.fps, "angles": traj.angles.tolist()}
    Path(args.out).write_text(json.dumps(doc) + "\n")
    print(f"wrote {args.out} ({traj.angles.shape[0]} frames x {traj.angles.shape[1]} joints)")
    return 0


def _retarget_resample(args) -> int:
    desc = _descriptor(args)
    net = load_weights(args.weights) if args.weights else load_reference_network()
    trajectories = [retarget_clip(net, _read_any_clip(Path(p)), desc) for p in args.clips]
    grid = WorkspaceGrid(resolution=args.grid_res)
    report = resample_balanced(trajectories, grid, args.target_size, rng_seed=args.seed)
    np.save(args.out, report.frames)
    print(
        f"occupied cells {len(report.before_counts)} -> {len(report.after_counts)}, "
        f"cv {report.cv_before:.3f} -> {report.cv_after:.3f}"
        + (" (degenerate: single cell)" if report.degenerate else "")
    )
    print(f"wrote {args.out}")
    return 0


def retarget_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="retarget", description="motion-to-robot tooling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit weights on clips against the scripted reference poses")
    p.add_argument("clips", nargs="+", help="motion clip files")
    p.add_argument("--weights", required=True, help="output weights file")
    p.add_argument("--descriptor", metavar="PATH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.set_defaults(func=_retarget_train)

    p = sub.add_parser("run", help="retarget one clip to joint angles")
    p.add_argument("clip", help="motion clip file")
    p.add_argument("--weights", metavar="PATH", help="weights file (bundled set by default)")
    p.add_argument("--descriptor", metavar="PATH")
    p.add_argument("--out", default="trajectory.json")
    p.set_defaults(func=_retarget_run)

    p = sub.add_parser("resample", help="rebalance retargeted frames over the workspace")
    p.add_argument("clips", nargs="+", help="motion clip files")
    p.add_argument("--weights", metavar="PATH")
    p.add_argument("--descriptor", metavar="PATH")
    p.add_argument("--grid-res", type=int, default=8)
    p.add_argument("--target-size", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="resampled.npy")
    p.set_defaults(func=_retarget_resample)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RetargetError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
