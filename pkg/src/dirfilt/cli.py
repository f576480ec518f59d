"""Command-line entry points.

Subcommands: patterns, simulate, train, eval, filter, serve. Every run with a
fixed seed writes byte-identical numeric artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import pipeline
from .config import ExperimentConfig, desk_config, load_config, save_config
from .errors import IngestionError, NumericalError, ValidationError
from .metrics import export_pattern_estimate_csv, sdr
from .nn.checkpoint import load_checkpoint, save_checkpoint, save_loss_history
from .nn.model import ARCH_NAMES
from .nn.train import train
from .patterns import (
    DEFAULT_FLOOR_DB,
    DEFAULT_L,
    AnalyticPattern,
    RecipeConfig,
    export_pattern_csv,
    save_pattern_json,
)
from .scene import SceneSamplingConfig, build_default_array, render_mics, render_target, scene_from_json
from .stft import StftConfig, stft
from .wavio import write_wav

_RECIPE_CHOICES = ("a", "b-", "b", "b+")


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------------------
# patterns


def _cmd_patterns(args) -> int:
    cfg = RecipeConfig(
        recipe=args.recipe,
        max_components=args.max_components,
        floor_db=args.floor_db,
        rng_seed=args.seed,
    )
    count = args.count if args.count is not None else (60 if args.recipe == "a" else 10)
    vectors = pipeline.recipe_vectors(cfg, count, args.l)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, vec in enumerate(vectors):
        stem = out / f"pattern_{i:03d}"
        if args.export in ("csv", "both"):
            export_pattern_csv(vec, stem.with_suffix(".csv"))
        if args.export in ("json", "both"):
            save_pattern_json(vec, stem.with_suffix(".json"))
    print(f"wrote {len(vectors)} recipe-{args.recipe} patterns to {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args) -> int:
    geom = build_default_array()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sampling = SceneSamplingConfig(
        duration_s=args.duration,
        source_kind=args.source_kind,
        noise_snr_db=args.snr,
        test_num_sources=args.num_sources,
    )
    scenes = []
    if args.scene_json:
        doc = json.loads(Path(args.scene_json).read_text())
        scenes.append(render_mics(scene_from_json(doc), geom))
    else:
        rng = np.random.default_rng(args.seed)
        for _ in range(args.scenes):
            spec = pipeline.sample_scene(args.split, rng, sampling)
            scenes.append(render_mics(spec, geom))
    manifest = []
    for i, rendered in enumerate(scenes):
        scene_dir = out / f"scene_{i:03d}"
        pipeline.save_scene_dir(rendered, scene_dir)
        manifest.append(
            {
                "dir": scene_dir.name,
                "doas_deg": [float(np.degrees(d)) for d in rendered.doas],
                "num_sources": rendered.num_sources,
                "num_samples": rendered.num_samples,
            }
        )
    _write_json(out / "manifest.json", {"split": args.split, "seed": args.seed, "scenes": manifest})
    print(f"rendered {len(scenes)} scene(s) to {out}")
    return 0


# ---------------------------------------------------------------------------
# train


def _load_experiment(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config)
    return desk_config(arch=args.arch)


def _cmd_train(args) -> int:
    cfg = _load_experiment(args)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.train.rng_seed)
    scenes = pipeline.render_split("train", cfg.splits.train, rng, cfg.sampling)
    vectors = pipeline.conditioning_vectors(
        cfg.recipe, cfg.conditioning, cfg.patterns_per_scene, cfg.arch.l
    )
    batches = pipeline.training_batches(scenes, vectors, cfg.stft, cfg.train.batch_size)
    steps = args.steps
    total = steps or cfg.train.max_steps or cfg.train.epochs * len(batches)
    tick = max(1, total // 10)

    def progress(step, loss):
        done = step + 1
        if done % tick == 0 or done == total:
            print(f"step {done}/{total} loss {loss:.6f}")

    result = train(cfg.arch, cfg.train, batches, max_steps=steps, callback=progress)
    meta = {"stft": asdict(cfg.stft), "sampling": asdict(cfg.sampling)}
    save_checkpoint(out / "model.npz", result.params, cfg.arch, meta)
    save_loss_history(out / "loss.csv", result.step_losses, result.epoch_losses)
    save_config(cfg, out / "config.json")
    print(f"final loss {result.step_losses[-1]:.6f}; checkpoint at {out / 'model.npz'}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _load_model(path):
    params, arch_cfg, meta = load_checkpoint(path)
    stft_cfg = StftConfig(**meta["stft"]) if "stft" in meta else None
    sampling = SceneSamplingConfig(**meta["sampling"]) if "sampling" in meta else None
    return params, arch_cfg, stft_cfg, sampling


def _cmd_eval(args) -> int:
    params = arch_cfg = None
    stft_cfg = StftConfig()
    sampling = SceneSamplingConfig(duration_s=args.duration)
    if args.config:
        cfg = load_config(args.config)
        stft_cfg, sampling = cfg.stft, cfg.sampling
    if args.method != "parametric-oracle":
        if not args.checkpoint:
            raise ValidationError(f"method {args.method!r} needs --checkpoint")
        params, arch_cfg, ckpt_stft, ckpt_sampling = _load_model(args.checkpoint)
        stft_cfg = ckpt_stft or stft_cfg
        sampling = ckpt_sampling or sampling
    pattern = pipeline.load_any_pattern(args.pattern, arch_cfg.l if arch_cfg else DEFAULT_L)

    estimate = pipeline.pattern_ratio_sweep(
        pattern,
        stft_cfg,
        method=args.method,
        params=params,
        arch_cfg=arch_cfg,
        split=args.split,
        duration_s=min(args.duration, sampling.duration_s),
        source_kind=sampling.source_kind,
        rng_seed=args.seed,
        max_directions=args.directions,
        narrowband=args.narrowband,
    )
    per_direction = [
        {
            "angle_deg": float(np.degrees(a)),
            "ratio": float(r),
            "ratio_db": float(10.0 * np.log10(r)) if r > 0 else None,
        }
        for a, r in zip(estimate.angles, estimate.ratios)
    ]

    rng = np.random.default_rng(args.seed)
    scenes = pipeline.render_split(args.split, args.scenes, rng, sampling)
    rows = pipeline.evaluate_method(scenes, [pattern], stft_cfg, args.method, params, arch_cfg)
    doc = {
        "method": args.method,
        "pattern": str(args.pattern),
        "split": args.split,
        "per_direction_ratio": per_direction,
        "scene_rows": rows,
        "summary": pipeline.summarize_rows(rows),
    }
    if args.out:
        _write_json(args.out, doc)
        print(f"wrote metrics to {args.out}")
    else:
        print(json.dumps(doc, indent=2))
    if args.sweep_csv:
        export_pattern_estimate_csv(estimate, args.sweep_csv)
        print(f"wrote per-direction estimate to {args.sweep_csv}")
    return 0


# ---------------------------------------------------------------------------
# filter


def _load_scene_any(path):
    p = Path(path)
    if p.is_dir():
        return pipeline.load_scene_dir(p)
    doc = json.loads(p.read_text())
    return render_mics(scene_from_json(doc), build_default_array())


def _timeline_entries(doc, l: int) -> list:
    if "entries" not in doc or not isinstance(doc["entries"], list):
        raise ValidationError("timeline document needs an 'entries' list")
    entries = []
    for i, e in enumerate(doc["entries"]):
        if "start_frame" not in e:
            raise ValidationError(f"timeline entry {i} is missing start_frame")
        if "pattern_path" in e:
            vec = pipeline.load_any_pattern(e["pattern_path"], l)
        elif "pattern" in e:
            vec = pipeline.pattern_from_doc(e["pattern"], l)
        elif "gains" in e:
            vec = pipeline.pattern_from_doc({"gains": e["gains"]}, l)
        else:
            raise ValidationError(f"timeline entry {i} needs gains, pattern, or pattern_path")
        entries.append((int(e["start_frame"]), vec))
    return entries


def _cmd_filter(args) -> int:
    params = arch_cfg = None
    stft_cfg = StftConfig()
    if args.config:
        stft_cfg = load_config(args.config).stft
    if args.method != "parametric-oracle":
        if not args.checkpoint:
            raise ValidationError(f"method {args.method!r} needs --checkpoint")
        params, arch_cfg, ckpt_stft, _ = _load_model(args.checkpoint)
        stft_cfg = ckpt_stft or stft_cfg
    rendered = _load_scene_any(args.scene)
    timeline_doc = json.loads(Path(args.timeline).read_text())
    l = arch_cfg.l if arch_cfg else DEFAULT_L
    entries = _timeline_entries(timeline_doc, l)
    n_frames = stft(rendered.reference_signal, stft_cfg).n_frames
    per_frame = pipeline.expand_timeline(entries, n_frames)
    vectors = [entries[0][1]] if len(entries) == 1 else per_frame
    res = pipeline.process_scene(rendered, stft_cfg, vectors, args.method, params, arch_cfg)
    write_wav(args.out, res.signal, rendered.sample_rate)
    target = render_target(rendered, vectors, stft_cfg)
    print(f"wrote {args.out} ({res.signal.size} samples, {n_frames} frames)")
    print(f"sdr vs target: {sdr(target, res.signal):.2f} dB (unprocessed {sdr(target, res.unprocessed):.2f} dB)")
    if args.gains_csv:
        gains = np.stack([v.gains for v in per_frame])
        with open(args.gains_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame"] + [f"g{i}" for i in range(gains.shape[1])])
            for t in range(gains.shape[0]):
                writer.writerow([t] + [f"{g:.9g}" for g in gains[t]])
        print(f"wrote applied gains to {args.gains_csv}")
    return 0


# ---------------------------------------------------------------------------
# serve


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    models = {}
    for path in args.checkpoint or []:
        params, arch_cfg, stft_cfg, _ = _load_model(path)
        models[arch_cfg.arch] = (params, arch_cfg, stft_cfg or StftConfig())
    app = create_app(models=models)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirfilt", description="Directional pattern filtering pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("patterns", help="enumerate or export pattern recipes")
    p.add_argument("--recipe", choices=_RECIPE_CHOICES, default="a")
    p.add_argument("--count", type=int, default=None, help="patterns to draw (default: full recipe a, else 10)")
    p.add_argument("--export", choices=("csv", "json", "both"), default="csv")
    p.add_argument("--out", default="patterns_out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--floor-db", type=float, default=DEFAULT_FLOOR_DB)
    p.add_argument("--max-components", type=int, default=4)
    p.add_argument("--l", type=int, default=DEFAULT_L)
    p.set_defaults(func=_cmd_patterns)

    p = sub.add_parser("simulate", help="render scenes to WAV and JSON")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--scene-json", default=None, help="render this scene spec instead of sampling")
    p.add_argument("--duration", type=float, default=4.0)
    p.add_argument("--source-kind", default="speech-noise")
    p.add_argument("--snr", type=float, default=None)
    p.add_argument("--num-sources", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="scenes_out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train a mask filter")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--arch", choices=ARCH_NAMES, default="film-jnf")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a filter: per-direction ratios and SDR")
    p.add_argument("--method", choices=pipeline.METHOD_NAMES, default="parametric-oracle")
    p.add_argument("--pattern", required=True, help="pattern JSON (gains or analytic spec)")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--scenes", type=int, default=3)
    p.add_argument("--duration", type=float, default=0.5)
    p.add_argument("--directions", type=int, default=None, help="cap the DOA sweep size")
    p.add_argument("--narrowband", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="metrics JSON path (default: stdout)")
    p.add_argument("--sweep-csv", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("filter", help="apply a pattern timeline to a scene")
    p.add_argument("--scene", required=True, help="scene JSON spec or a simulate output directory")
    p.add_argument("--timeline", required=True, help="timeline JSON")
    p.add_argument("--method", choices=pipeline.METHOD_NAMES, default="parametric-oracle")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="filtered.wav")
    p.add_argument("--gains-csv", default=None)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("serve", help="run the HTTP filtering service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--checkpoint", action="append", default=None, help="repeatable; enables neural methods")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, IngestionError, NumericalError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
