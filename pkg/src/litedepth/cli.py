"""Command-line entry point (``litedepth <subcommand>``).

Every subcommand prints one JSON report on stdout; diagnostics go to
stderr. Exit status is 0 on success, 1 on a handled error, 2 on bad usage.
"""

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import augment as aug
from . import data_io, metrics, ops
from .graph import (GraphError, LdwError, LiteDepthConfig, build_litedepth, fold_normalization,
                    load_model, run, save_model)
from .losses import (CameraIntrinsics, LossError, LossWeights, RobustParams, SilogParams, VnlSamplerConfig,
                     depth_loss, fit_toy, toy_problem)

logger = logging.getLogger("litedepth")

# anchor colours for the false-colour preview, near (blue) to far (yellow)
PREVIEW_COLORMAP = np.array([
    [48, 18, 59],
    [40, 110, 230],
    [30, 200, 160],
    [170, 230, 50],
    [250, 220, 30],
], dtype=np.float64)


class CliError(Exception):
    pass


def _threads():
    raw = os.environ.get("LITEDEPTH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise CliError(f"LITEDEPTH_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def _map_files(fn, items):
    """Apply ``fn`` over items (possibly in parallel); results keep input order."""
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _parse_pairs(text, name):
    try:
        out = []
        for item in text.split(","):
            h, w = item.lower().split("x")
            out.append((int(h), int(w)))
        return out
    except ValueError as exc:
        raise CliError(f"{name} must look like 240x384,480x640, got {text!r}") from exc


def _parse_floats(text, n, name):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise CliError(f"{name} must be {n} comma-separated numbers, got {text!r}") from exc
    if len(vals) != n:
        raise CliError(f"{name} needs exactly {n} values, got {len(vals)}")
    return tuple(vals)


def _weights(args):
    w = _parse_floats(args.weights, 4, "--weights") if args.weights else LossWeights().w
    return LossWeights(w=w, dynamic=args.dynamic)


def _loss_params(args, shape):
    """Keyword arguments for depth_loss / fit_toy from the shared loss flags."""
    return dict(silog=SilogParams(args.silog_alpha, args.silog_lambda),
                robust=RobustParams(args.robust_alpha, args.robust_c),
                intr=CameraIntrinsics.default_for(*shape, focal=args.focal),
                vnl_config=VnlSamplerConfig(num_samples=args.vnl_samples,
                                            min_pixel_distance=args.vnl_min_distance))


def _emit(report, args):
    text = json.dumps(report, indent=2, sort_keys=True)
    if getattr(args, "report", None):
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)


def _resolved(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}


def _expand_inputs(paths):
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.png")))
        elif p.exists():
            files.append(p)
        else:
            raise CliError(f"input not found: {p}")
    return sorted(files)


def _load(path):
    try:
        return load_model(path)
    except FileNotFoundError as exc:
        raise CliError(f"model not found: {path}") from exc


def depth_to_raw(depth):
    return np.rint(np.clip(depth, 0.0, data_io.MAX_DEPTH) * data_io.DEPTH_SCALE).astype(np.uint16)


def false_color(depth):
    d = np.asarray(depth, dtype=np.float64)
    t = d / max(float(d.max()), 1e-6) * (len(PREVIEW_COLORMAP) - 1)
    i0 = np.clip(np.floor(t).astype(int), 0, len(PREVIEW_COLORMAP) - 2)
    frac = (t - i0)[..., None]
    rgb = PREVIEW_COLORMAP[i0] * (1 - frac) + PREVIEW_COLORMAP[i0 + 1] * frac
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def cmd_build(args):
    cfg = LiteDepthConfig(width_mult=args.width_mult, seed=args.seed,
                          decoder_channels=tuple(int(v) for v in _parse_floats(
                              args.decoder_channels, 4, "--decoder-channels")))
    model = build_litedepth(cfg)
    save_model(model, args.output)
    return {"output": args.output, "parameters": model.parameter_count(),
            "parameter_bytes": model.parameter_bytes(), "file_bytes": os.path.getsize(args.output)}


def cmd_infer(args):
    model = _load(args.model)
    files = _expand_inputs(args.input)
    if not files:
        raise CliError("no input images")
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    h, w = model.input_resolution

    def one(path):
        rgb = data_io.read_rgb(path)
        if rgb.shape[:2] != (h, w):
            raise CliError(f"{path}: resolution {rgb.shape[0]}x{rgb.shape[1]} != model input {h}x{w}")
        depth = run(model, data_io.image_to_tensor(rgb))[0, 0]
        raw = depth_to_raw(depth)
        target = out_dir / f"{path.stem}.png"
        data_io.write_depth_raw(target, raw)
        entry = {"input": str(path), "output": str(target), "min_m": float(depth.min()),
                 "max_m": float(depth.max()), "mean_m": float(depth.mean())}
        if args.preview:
            prev = out_dir / f"{path.stem}_preview.png"
            data_io.write_rgb(prev, false_color(depth))
            entry["preview"] = str(prev)
        return entry

    return {"images": _map_files(one, files)}


def cmd_fold(args):
    model = _load(args.model)
    if model.normalization is None:
        raise CliError(f"{args.model} has no normalization record; nothing to fold")
    folded = fold_normalization(model)
    save_model(folded, args.output)
    return {"input": args.model, "output": args.output,
            "parameters_before": model.parameter_count(),
            "parameters_after": folded.parameter_count(),
            "file_bytes_before": os.path.getsize(args.model),
            "file_bytes_after": os.path.getsize(args.output)}


def cmd_verify_fold(args):
    a, b = _load(args.reference), _load(args.candidate)
    if a.input_resolution != b.input_resolution:
        raise CliError("models have different input resolutions")
    h, w = a.input_resolution
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    per_trial = []
    for _ in range(args.trials):
        img = rng.uniform(0.0, 255.0, size=(1, 3, h, w)).astype(np.float32)
        diff = float(np.max(np.abs(run(a, img, accumulate=args.accumulate)
                                   - run(b, img, accumulate=args.accumulate))))
        per_trial.append(diff)
        worst = max(worst, diff)
    report = {"reference": args.reference, "candidate": args.candidate, "trials": args.trials,
              "max_abs_diff": worst, "tolerance": args.tolerance, "pass": worst <= args.tolerance,
              "per_trial_max_abs_diff": per_trial}
    if worst > args.tolerance:
        _emit(report, args)
        raise CliError(f"max abs diff {worst:.3g} exceeds tolerance {args.tolerance:g}")
    return report


def cmd_eval(args):
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    ids = sorted({p.stem for p in pred_dir.glob("*.png")} & {p.stem for p in gt_dir.glob("*.png")})
    if not ids:
        raise CliError(f"no matching <id>.png files in {pred_dir} and {gt_dir}")

    def one(i):
        pred, _ = data_io.decode_depth(data_io.read_depth_raw(pred_dir / f"{i}.png"))
        gt, valid = data_io.decode_depth(data_io.read_depth_raw(gt_dir / f"{i}.png"))
        if pred.shape != gt.shape:
            raise CliError(f"{i}: prediction {pred.shape} and ground truth {gt.shape} differ")
        return pred, gt, valid

    triples = _map_files(one, ids)
    per_image, mean, pooled = metrics.evaluate_many(triples)
    return {"images": [{"id": i, **r.to_dict()} for i, r in zip(ids, per_image)],
            "mean_over_images": mean.to_dict(), "pooled_pixels": pooled.to_dict()}


def cmd_score(args):
    params = metrics.ScoreParams(C=args.C, runtime=args.runtime_ms, unit="ms")
    return {"si_rmse": args.si_rmse, "runtime_ms": args.runtime_ms, "C": args.C,
            "score": metrics.challenge_score(args.si_rmse, params)}


def cmd_losses(args):
    pred, _ = data_io.decode_depth(data_io.read_depth_raw(args.pred))
    gt, valid = data_io.decode_depth(data_io.read_depth_raw(args.gt))
    if pred.shape != gt.shape:
        raise CliError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    report = depth_loss(pred, gt, valid, weights=_weights(args), rng=args.seed,
                        **_loss_params(args, pred.shape))
    return report.to_dict()


def cmd_augment(args):
    pair = data_io.load_pair(args.rgb, args.depth)
    sizes = _parse_pairs(args.sizes, "--sizes") if args.sizes else aug.DEFAULT_CROP_SIZES
    cfg = aug.AugmentConfig(rotation_deg=args.rotation, flip_prob=args.flip_prob,
                            brightness=args.brightness, contrast=args.contrast,
                            crop_sizes=tuple(sizes))
    aug.check_crop_sizes(sizes, *pair.depth.shape)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    log = []
    for k in range(args.count):
        s = aug.augment(pair.rgb, pair.depth, pair.valid, cfg, rng)
        data_io.write_rgb(out / f"rgb_{k:04d}.png", s.image)
        data_io.save_depth(out / f"depth_{k:04d}.png", s.depth, s.valid)
        log.append({"index": k, "transforms": s.transforms})
    (out / "transforms.json").write_text(json.dumps(log, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return {"count": args.count, "output": str(out), "samples": log}


def cmd_fit_toy(args):
    h, w = _parse_pairs(args.size, "--size")[0]
    target, clean, valid, init = toy_problem(args.scene, h, w, args.noise, args.init_noise,
                                             args.invalid_fraction, args.seed)
    trace = fit_toy(target, valid, init, steps=args.steps, lr=args.lr, weights=_weights(args),
                    seed=args.seed, reference=clean, **_loss_params(args, (h, w)))
    every = max(1, args.record_every)
    return {"initial_si_rmse": trace.initial_si_rmse, "final_si_rmse": trace.final_si_rmse,
            "final_log_vars": list(trace.final_log_vars),
            "trace": [s.to_dict() for s in trace.steps if s.step % every == 0 or s.step == args.steps]}


def cmd_bench(args):
    model = _load(args.model) if args.model else build_litedepth()
    h, w = model.input_resolution
    img = np.random.default_rng(args.seed).uniform(0, 255, (1, 3, h, w)).astype(np.float32)
    backends = ops.available_backends() if args.backend == "all" else [args.backend]
    results = {}
    for name in backends:
        run(model, img, backend=name)
        times = []
        for _ in range(args.trials):
            t0 = time.perf_counter()
            run(model, img, backend=name)
            times.append((time.perf_counter() - t0) * 1000.0)
        results[name] = {"mean_ms": float(np.mean(times)), "std_ms": float(np.std(times)),
                         "trials": args.trials}
    return {"model": args.model or "<default>", "backends": results}


def cmd_split(args):
    ids = data_io.list_pairs(args.root)
    train, val = data_io.split(ids, args.n_val, args.seed)
    data_io.write_split_manifest(args.output, train, val)
    return {"total": len(ids), "train": len(train), "val": len(val), "manifest": args.output}


def cmd_synth(args):
    h, w = _parse_pairs(args.size, "--size")[0]
    root = Path(args.output)
    (root / "rgb").mkdir(parents=True, exist_ok=True)
    (root / "depth").mkdir(parents=True, exist_ok=True)
    written = []
    for k in range(args.count):
        s = data_io.synth_scene(args.kind, h, w, noise=args.noise,
                                invalid_fraction=args.invalid_fraction, seed=args.seed + k)
        name = f"{k:05d}"
        data_io.write_rgb(root / "rgb" / f"{name}.png", s.rgb)
        data_io.save_depth(root / "depth" / f"{name}.png", s.depth, s.valid)
        written.append(name)
    return {"output": str(root), "ids": written}


def build_parser():
    p = argparse.ArgumentParser(prog="litedepth", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--report", help="also write the JSON report to this file")
        return sp

    sp = add("build", cmd_build, "write a randomly initialised model")
    sp.add_argument("--output", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--width-mult", type=float, default=LiteDepthConfig.width_mult)
    sp.add_argument("--decoder-channels", default=",".join(map(str, LiteDepthConfig.decoder_channels)))

    sp = add("infer", cmd_infer, "predict 16-bit depth PNGs")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", nargs="+", required=True, help="RGB PNG files or directories")
    sp.add_argument("--output", required=True, help="output directory")
    sp.add_argument("--preview", action="store_true", help="also write false-colour previews")

    sp = add("fold", cmd_fold, "merge input normalization into the first conv")
    sp.add_argument("--model", required=True)
    sp.add_argument("--output", required=True)

    sp = add("verify-fold", cmd_verify_fold, "compare two models on random images")
    sp.add_argument("reference")
    sp.add_argument("candidate")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--accumulate", choices=("float32", "float64"), default="float32")

    sp = add("eval", cmd_eval, "metrics over a directory of predictions")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)

    sp = add("score", cmd_score, "challenge score from si-RMSE and runtime")
    sp.add_argument("--si-rmse", type=float, required=True)
    sp.add_argument("--runtime-ms", "--runtime", dest="runtime_ms", type=float, required=True,
                    help="runtime in milliseconds")
    sp.add_argument("--C", type=float, default=0.01)

    def loss_flags(sp):
        sp.add_argument("--weights", help="w1,w2,w3,w4 (default 1,0.25,2.5,0.6)")
        sp.add_argument("--dynamic", action="store_true", help="learnable log-variance weighting")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--silog-alpha", type=float, default=SilogParams.alpha)
        sp.add_argument("--silog-lambda", type=float, default=SilogParams.lam)
        sp.add_argument("--robust-alpha", type=float, default=RobustParams.alpha)
        sp.add_argument("--robust-c", type=float, default=RobustParams.c)
        sp.add_argument("--focal", type=float, default=500.0, help="focal length in pixels for VNL")
        sp.add_argument("--vnl-samples", type=int, help="candidate triplets (default min(5000, N/3))")
        sp.add_argument("--vnl-min-distance", type=float, default=VnlSamplerConfig.min_pixel_distance)

    sp = add("losses", cmd_losses, "evaluate the depth loss suite on a PNG pair")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    loss_flags(sp)

    sp = add("augment", cmd_augment, "write augmented copies of an RGB/depth pair")
    sp.add_argument("--rgb", required=True)
    sp.add_argument("--depth", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--count", type=int, default=8)
    sp.add_argument("--sizes", help="crop sizes, e.g. 240x384,384x512,480x640")
    sp.add_argument("--rotation", type=float, default=aug.AugmentConfig.rotation_deg)
    sp.add_argument("--flip-prob", type=float, default=aug.AugmentConfig.flip_prob)
    sp.add_argument("--brightness", type=float, default=aug.AugmentConfig.brightness)
    sp.add_argument("--contrast", type=float, default=aug.AugmentConfig.contrast)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("fit-toy", cmd_fit_toy, "descend a free depth map on a synthetic scene")
    sp.add_argument("--scene", choices=data_io.SCENE_KINDS, default="slanted")
    sp.add_argument("--size", default="32x32")
    sp.add_argument("--steps", type=int, default=500)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--noise", type=float, default=0.05, help="sensor noise on the target (m)")
    sp.add_argument("--init-noise", type=float, default=0.2, help="log-normal init noise")
    sp.add_argument("--invalid-fraction", type=float, default=0.1)
    sp.add_argument("--record-every", type=int, default=10)
    loss_flags(sp)

    sp = add("bench", cmd_bench, "wall-clock inference timing on this CPU")
    sp.add_argument("--model")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--backend", choices=("all", "compiled", "python"), default="all")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("split", cmd_split, "train/val split manifest for an rgb/ + depth/ tree")
    sp.add_argument("--root", required=True)
    sp.add_argument("--n-val", type=int, default=data_io.DEFAULT_N_VAL)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", required=True)

    sp = add("synth", cmd_synth, "write a synthetic rgb/ + depth/ dataset")
    sp.add_argument("--kind", choices=data_io.SCENE_KINDS, default="slanted")
    sp.add_argument("--size", default="480x640")
    sp.add_argument("--count", type=int, default=4)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--invalid-fraction", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", required=True)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    # own handler on the package logger so diagnostics reach stderr even when embedded
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    saved = logger.level, logger.propagate
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    logger.propagate = False
    try:
        logger.info("config %s", json.dumps(_resolved(args), sort_keys=True, default=str))
        report = args.func(args)
    except (CliError, GraphError, LdwError, LossError, data_io.DataFormatError,
            metrics.MetricError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        logger.removeHandler(handler)
        logger.setLevel(saved[0])
        logger.propagate = saved[1]
    report = {"command": args.command, "config": _resolved(args), **report}
    _emit(report, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
