"""Command-line front end: encode, distill, train-head, infer, eval-*,
bench, viz. Every command writes its outputs, the resolved configuration,
and a manifest with input hashes into the output directory.

Exit codes: 0 success, 1 validation, 2 runtime, 3 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from evalign.config import RunConfig, parse_window_flag
from evalign.errors import RuntimeFailure, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage problems are validation errors
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evalign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    encode = sub.add_parser("encode", help="events file -> voxel-grid windows")
    encode.add_argument("events", help="REVT or CSV event file")
    encode.add_argument("--window", default=None, help="count:N or time:MS")
    encode.add_argument("--stride", type=int, default=None)
    encode.add_argument("--config", default=None)
    encode.add_argument("--out", required=True)

    distill = sub.add_parser("distill", help="run the alignment training loop")
    distill.add_argument("--config", default=None)
    distill.add_argument("--out", required=True)

    head = sub.add_parser("train-head", help="train a depth or seg head")
    head.add_argument("--kind", choices=("depth", "seg"), required=True)
    head.add_argument("--config", default=None)
    head.add_argument("--ckpt", default=None, help="distillation checkpoint (teacher source)")
    head.add_argument("--out", required=True)

    infer = sub.add_parser("infer", help="run a head over event windows")
    infer.add_argument("--task", choices=("depth", "seg"), required=True)
    infer.add_argument("--config", default=None)
    infer.add_argument("--ckpt", required=True)
    infer.add_argument("--head", required=True, help="head checkpoint")
    infer.add_argument("--events", required=True)
    infer.add_argument("--window", default=None)
    infer.add_argument("--stride", type=int, default=None)
    infer.add_argument("--tiling", choices=("corner4", "none"), default="corner4")
    infer.add_argument("--pad", choices=("symmetric", "none"), default="symmetric")
    infer.add_argument("--hold", choices=("on", "off"), default=None)
    infer.add_argument("--out", required=True)

    eval_seg = sub.add_parser("eval-seg", help="segmentation metrics")
    eval_seg.add_argument("--pred", required=True, help="directory of label rasters")
    eval_seg.add_argument("--gt", required=True)
    eval_seg.add_argument("--classes", type=int, default=None)
    eval_seg.add_argument("--config", default=None)
    eval_seg.add_argument("--out", required=True)

    eval_depth = sub.add_parser("eval-depth", help="depth error metrics")
    eval_depth.add_argument("--pred", required=True, help="directory of .npy rasters")
    eval_depth.add_argument("--gt", required=True)
    eval_depth.add_argument("--config", default=None)
    eval_depth.add_argument("--out", required=True)

    eval_match = sub.add_parser("eval-match", help="pose metrics on the synthetic fixture")
    eval_match.add_argument("--config", default=None)
    eval_match.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="latency harness")
    bench.add_argument("--config", default=None)
    bench.add_argument("--what", choices=("pipeline", "kernels"), default="pipeline")
    bench.add_argument("--out", required=True)

    viz = sub.add_parser("viz", help="principal-component feature images")
    viz.add_argument("--config", default=None)
    viz.add_argument("--ckpt", required=True)
    viz.add_argument("--events", required=True)
    viz.add_argument("--window", default=None)
    viz.add_argument("--stride", type=int, default=None)
    viz.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = {
            "encode": cmd_encode,
            "distill": cmd_distill,
            "train-head": cmd_train_head,
            "infer": cmd_infer,
            "eval-seg": cmd_eval_seg,
            "eval-depth": cmd_eval_depth,
            "eval-match": cmd_eval_match,
            "bench": cmd_bench,
            "viz": cmd_viz,
        }[args.command]
        return handler(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeFailure as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


# --- shared plumbing --------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _finish(out_dir: Path, command: str, config: RunConfig,
            inputs: list[str | Path], outputs: list[str], extra: dict | None = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved").write_text(config.resolved_text(), encoding="utf-8")
    manifest = {
        "command": command,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _window_spec(config: RunConfig, args):
    flag = args.window if getattr(args, "window", None) else config["window.mode"]
    stride = args.stride if getattr(args, "stride", None) else config["window.stride"]
    return parse_window_flag(flag, stride)


def _seed_everything(config: RunConfig):
    import torch

    torch.manual_seed(config["seed"])


def _write_png(path: Path, array: np.ndarray):
    from PIL import Image

    Image.fromarray(array).save(path)


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    return np.asarray(Image.open(path))


# --- encode ------------------------------------------------------------------


def cmd_encode(args) -> int:
    from evalign.events.io import parse_events
    from evalign.masking import patch_activity_mask
    from evalign.representation import occupancy, write_voxel_grid, encode_voxel_grid

    config = RunConfig.from_file(args.config)
    model = config.model_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    stream = parse_events(Path(args.events).read_bytes())
    windows = _window_spec(config, args).apply(stream)

    outputs = []
    summary = ["window,t_start,t_end,events,active_pixels,active_tokens"]
    for i, window in enumerate(windows):
        grid = encode_voxel_grid(
            window, model.bins, stream.sensor_height, stream.sensor_width
        )
        name = f"window_{i:05d}.rvxg"
        (out_dir / name).write_bytes(write_voxel_grid(grid))
        occ = occupancy(window, stream.sensor_height, stream.sensor_width)
        mask = patch_activity_mask(occ, model.patch)
        summary.append(
            f"{i},{window.t_start},{window.t_end},{len(window)},"
            f"{int(occ.values.sum())},{mask.active_count()}"
        )
        outputs.append(name)
    (out_dir / "occupancy_summary.csv").write_text(
        "\n".join(summary) + "\n", encoding="utf-8"
    )
    outputs.append("occupancy_summary.csv")
    if not windows:
        print("warning: no windows emitted (empty stream)", file=sys.stderr)
    _finish(out_dir, "encode", config, [args.events], outputs,
            {"windows": len(windows)})
    print(f"encoded {len(windows)} windows -> {out_dir}")
    return EXIT_OK


# --- distill -----------------------------------------------------------------


def cmd_distill(args) -> int:
    from evalign.distill import rows_to_csv, run_distillation, synth_paired_dataset
    from evalign.model.checkpoint import save_tensors, student_sections, teacher_sections

    config = RunConfig.from_file(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    data = synth_paired_dataset(config["seed"], config["data.samples"], config.scene_spec())
    state, rows = run_distillation(
        config.model_config(), config.train_config(), data,
        weights=config.loss_weights(), schedule=config.mask_schedule(),
        dropout=config.dropout_spec(),
        model_seed=config["seed"], teacher_seed=config["seed"] + 1,
    )
    (out_dir / "loss.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    sections = student_sections(state.model)
    sections.update(teacher_sections(state.teacher))
    save_tensors(out_dir / "model.ckpt", sections)
    _finish(out_dir, "distill", config, [args.config] if args.config else [],
            ["loss.csv", "model.ckpt"], {"steps": len(rows)})
    final = rows[-1]["loss_total"] if rows else float("nan")
    print(f"distilled {len(rows)} steps, final loss {final:.4f} -> {out_dir}")
    return EXIT_OK


# --- train-head --------------------------------------------------------------


def _load_teacher(config: RunConfig, ckpt: str | None):
    from evalign.model.checkpoint import load_teacher
    from evalign.model.student import Teacher

    teacher = Teacher(config.model_config(), seed=config["seed"] + 1)
    if ckpt:
        load_teacher(teacher, ckpt)
    return teacher.eval()


def cmd_train_head(args) -> int:
    from evalign.distill import synth_paired_dataset
    from evalign.heads.train import train_head
    from evalign.model.checkpoint import head_sections, save_tensors

    config = RunConfig.from_file(args.config)
    _seed_everything(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    teacher = _load_teacher(config, args.ckpt)
    data = [
        s for s in synth_paired_dataset(
            config["seed"], config["data.samples"], config.scene_spec()
        )
        if not s.skippable
    ]
    head, rows = train_head(teacher, data, config.head_config(args.kind))
    save_tensors(out_dir / f"head_{args.kind}.ckpt", head_sections(head))
    csv = "step,epoch,loss\n" + "\n".join(
        f"{r['step']},{r['epoch']},{r['loss']!r}" for r in rows
    ) + "\n"
    (out_dir / "head_loss.csv").write_text(csv, encoding="utf-8")
    inputs = [p for p in (args.config, args.ckpt) if p]
    _finish(out_dir, f"train-head:{args.kind}", config, inputs,
            [f"head_{args.kind}.ckpt", "head_loss.csv"], {"steps": len(rows)})
    final = rows[-1]["loss"] if rows else float("nan")
    print(f"trained {args.kind} head, final loss {final:.4f} -> {out_dir}")
    return EXIT_OK


# --- infer -------------------------------------------------------------------


def _predictor(task, model, teacher, head, tile):
    """Tile of voxel values -> raw logit volume (C, tile, tile)."""
    import torch

    from evalign.heads.segmentation import seg_forward
    from evalign.representation import VoxelGrid, normalize_voxel_grid

    def predict(values: np.ndarray) -> np.ndarray:
        bins = values.shape[0]
        grid = normalize_voxel_grid(VoxelGrid(bins, tile, tile, np.ascontiguousarray(values)))
        voxels = torch.from_numpy(grid.values.astype(np.float32))[None]
        with torch.no_grad():
            feats = model(voxels)
            if task == "depth":
                logits = head.bin_logits(feats, out_size=tile)
            else:
                logits = seg_forward(feats, teacher.projector, head, tile)
        return logits[0].double().numpy()

    return predict


def _raster_from_logits(task, logits: np.ndarray, depth_bins):
    import torch

    from evalign.heads.depth import expected_depth

    if task == "depth":
        depth = expected_depth(torch.from_numpy(logits)[None], depth_bins)[0]
        return depth.clamp(depth_bins.d_min, depth_bins.d_max).numpy().astype(np.float32)
    return logits.argmax(axis=0).astype(np.uint8)


def cmd_infer(args) -> int:
    import torch

    from evalign.events.io import parse_events
    from evalign.heads.depth import DepthHead
    from evalign.heads.segmentation import SegHead
    from evalign.inference import (
        NO_OUTPUT_YET,
        TilePlan,
        memory_hold,
        pad_symmetric,
        tile_inference,
        unpad,
    )
    from evalign.model.checkpoint import load_head, load_student
    from evalign.model.student import StudentModel
    from evalign.representation import encode_voxel_grid

    config = RunConfig.from_file(args.config)
    _seed_everything(config)
    model_cfg = config.model_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = StudentModel(model_cfg, seed=config["seed"]).eval()
    load_student(model, args.ckpt)
    teacher = _load_teacher(config, args.ckpt)
    if args.task == "depth":
        head = DepthHead(model_cfg.d, config.depth_bins())
    else:
        head = SegHead(model_cfg.d_proj, config["data.classes"])
    load_head(head, args.head)
    head.eval()

    stream = parse_events(Path(args.events).read_bytes())
    windows = _window_spec(config, args).apply(stream)
    hold_on = config["infer.hold"] if args.hold is None else args.hold == "on"

    tile = config.tile_size()
    h, w = stream.sensor_height, stream.sensor_width
    predict_tile = _predictor(args.task, model, teacher, head, tile)

    def predict_window(window):
        grid = encode_voxel_grid(window, model_cfg.bins, h, w)
        if h == tile and w == tile:
            logits = predict_tile(grid.values)
        elif h <= tile and w <= tile:
            if args.pad == "none":
                raise ValidationError(f"{h}x{w} input needs --pad symmetric")
            padded, spec = pad_symmetric(grid.values, tile)
            logits = unpad(predict_tile(padded), spec)
        elif h >= tile and w >= tile:
            if args.tiling == "none":
                raise ValidationError(f"{h}x{w} input needs --tiling corner4")
            plan = TilePlan(height=h, width=w, tile=tile)
            logits = tile_inference(grid.values, predict_tile, plan)
        else:
            raise ValidationError(
                f"{h}x{w} input mixes pad and tile regimes for tile {tile}"
            )
        return _raster_from_logits(args.task, logits, config.depth_bins())

    if not hold_on:
        results = [
            (predict_window(win), False) if len(win) else (NO_OUTPUT_YET, True)
            for win in windows
        ]
    else:
        results = memory_hold(windows, predict_window)

    outputs, held_flags = [], []
    for i, (raster, held) in enumerate(results):
        held_flags.append(bool(held))
        if raster is NO_OUTPUT_YET:
            continue
        if args.task == "depth":
            name = f"depth_{i:05d}.npy"
            np.save(out_dir / name, raster)
        else:
            name = f"seg_{i:05d}.png"
            _write_png(out_dir / name, raster)
        outputs.append(name)

    inputs = [p for p in (args.config, args.ckpt, args.head, args.events) if p]
    _finish(out_dir, f"infer:{args.task}", config, inputs, outputs,
            {"held": held_flags, "windows": len(windows)})
    print(f"inferred {len(outputs)} rasters ({sum(held_flags)} held) -> {out_dir}")
    return EXIT_OK


# --- eval --------------------------------------------------------------------


def cmd_eval_seg(args) -> int:
    from evalign.metrics import ConfusionMatrix, miou_and_accuracy

    config = RunConfig.from_file(args.config)
    classes = args.classes or config["data.classes"]
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    names = sorted(p.name for p in gt_dir.glob("*.png"))
    if not names:
        raise ValidationError(f"no ground-truth rasters in {gt_dir}")
    total = ConfusionMatrix(np.zeros((classes, classes), np.int64))
    inputs = []
    for name in names:
        gt = _read_png(gt_dir / name)
        pred = _read_png(pred_dir / name)
        total = total + ConfusionMatrix.from_labels(gt, pred, classes)
        inputs += [gt_dir / name, pred_dir / name]
    result = miou_and_accuracy(total)

    csv_lines = ["class,iou"] + [
        f"{c},{result['iou'][c]!r}" for c in range(classes)
    ] + [f"miou,{result['miou']!r}", f"accuracy,{result['accuracy']!r}"]
    (out_dir / "seg_metrics.csv").write_text("\n".join(csv_lines) + "\n")
    table = (
        f"{'class':<8}{'IoU':>10}\n"
        + "".join(f"{c:<8}{result['iou'][c]:>10.4f}\n" for c in range(classes))
        + f"{'mIoU':<8}{result['miou']:>10.4f}\n"
        + f"{'acc':<8}{result['accuracy']:>10.4f}\n"
    )
    (out_dir / "seg_metrics.txt").write_text(table)
    print(table, end="")
    _finish(out_dir, "eval-seg", config, inputs,
            ["seg_metrics.csv", "seg_metrics.txt"])
    return EXIT_OK


def cmd_eval_depth(args) -> int:
    from evalign.metrics import abs_depth_error_at_cutoff

    config = RunConfig.from_file(args.config)
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    names = sorted(p.name for p in gt_dir.glob("*.npy"))
    if not names:
        raise ValidationError(f"no ground-truth rasters in {gt_dir}")
    preds = np.concatenate([np.load(pred_dir / n).reshape(-1) for n in names])
    gts = np.concatenate([np.load(gt_dir / n).reshape(-1) for n in names])

    lines = ["cutoff_m,abs_error_m"]
    table = [f"{'cutoff':>8} {'abs err':>10}"]
    for cutoff in config.cutoffs():
        err = abs_depth_error_at_cutoff(preds, gts, cutoff)
        lines.append(f"{cutoff!r},{err!r}")
        table.append(f"{cutoff:>8.1f} {err:>10.4f}")
    (out_dir / "depth_metrics.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "depth_metrics.txt").write_text("\n".join(table) + "\n")
    print("\n".join(table))
    inputs = [gt_dir / n for n in names] + [pred_dir / n for n in names]
    _finish(out_dir, "eval-depth", config, inputs,
            ["depth_metrics.csv", "depth_metrics.txt"])
    return EXIT_OK


def cmd_eval_match(args) -> int:
    from evalign.matching import (
        estimate_essential_ransac,
        rotation_angular_error,
        synthetic_pose_scene,
    )
    from evalign.metrics import angular_bin_report, median_error, pose_auc

    config = RunConfig.from_file(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(config["seed"])
    pairs = config["match.pairs"]
    rows = ["pair,baseline_deg,error_deg,inliers,correspondences,iterations"]
    baselines, errors = [], []
    for i in range(pairs):
        baseline = float(
            rng.uniform(config["match.rotation_min"], config["match.rotation_max"])
        )
        corrs, k, r_gt, _ = synthetic_pose_scene(
            seed=config["seed"] + i,
            n_points=config["match.points"],
            rotation_deg=baseline,
            noise_px=config["match.noise_px"],
            intrinsics=config.intrinsics(),
        )
        try:
            pose = estimate_essential_ransac(
                corrs, k, k,
                iters=config["match.iters"],
                threshold_px=config["match.threshold_px"],
                seed=config["seed"] + i,
            )
            error = rotation_angular_error(pose.rotation, r_gt)
            inliers = int(pose.inliers.sum())
            iterations = pose.iterations
        except RuntimeFailure:
            error, inliers, iterations = float("inf"), 0, config["match.iters"]
        baselines.append(baseline)
        errors.append(error)
        rows.append(f"{i},{baseline!r},{error!r},{inliers},{len(corrs)},{iterations}")

    aucs = pose_auc(errors)
    med = median_error(errors)
    report = angular_bin_report(baselines, errors)
    (out_dir / "pairs.csv").write_text("\n".join(rows) + "\n")
    lines = [
        f"pairs {pairs}",
        f"median_error_deg {med!r}",
    ] + [f"auc@{int(t)} {aucs[t]!r}" for t in sorted(aucs)] + [
        f"bin[{label}] {value if value is not None else 'absent'}"
        for label, value in report.bins.items()
    ]
    (out_dir / "pose_metrics.txt").write_text("\n".join(lines) + "\n")
    csv = ["metric,value", f"median_error_deg,{med!r}"] + [
        f"auc@{int(t)},{aucs[t]!r}" for t in sorted(aucs)
    ]
    (out_dir / "pose_metrics.csv").write_text("\n".join(csv) + "\n")
    print("\n".join(lines))
    _finish(out_dir, "eval-match", config,
            [args.config] if args.config else [],
            ["pairs.csv", "pose_metrics.csv", "pose_metrics.txt"])
    return EXIT_OK


# --- bench -------------------------------------------------------------------


def cmd_bench(args) -> int:
    config = RunConfig.from_file(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.what == "pipeline":
        text = _bench_pipeline(config)
    else:
        text = _bench_kernels(config)
    (out_dir / f"bench_{args.what}.txt").write_text(text)
    print(text, end="")
    _finish(out_dir, f"bench:{args.what}", config,
            [args.config] if args.config else [], [f"bench_{args.what}.txt"])
    return EXIT_OK


def _bench_pipeline(config: RunConfig) -> str:
    import torch

    from evalign.errors import RuntimeFailure as _RF
    from evalign.matching import estimate_essential_ransac, mutual_nn_match
    from evalign.metrics import bench_harness, bench_report_text
    from evalign.model.student import StudentModel

    _seed_everything(config)
    model_cfg = config.model_config()
    model = StudentModel(model_cfg, seed=config["seed"]).eval()
    size = model_cfg.input_size
    k = config.intrinsics()

    def input_factory(i):
        g = torch.Generator().manual_seed(config["seed"] * 1000 + i)
        return (
            torch.randn(1, model_cfg.bins, size, size, generator=g),
            torch.randn(1, model_cfg.bins, size, size, generator=g),
        )

    def extract(pair):
        with torch.no_grad():
            fa = model(pair[0])
            fb = model(pair[1])
        return fa.patches[0].numpy(), fb.patches[0].numpy()

    def match(descs):
        corrs = mutual_nn_match(
            descs[0], descs[1], model_cfg.grid,
            min_sim=config["match.min_sim"], patch=model_cfg.patch,
        )
        if len(corrs) >= 8:
            try:
                estimate_essential_ransac(
                    corrs, k, k, iters=config["match.iters"],
                    threshold_px=config["match.threshold_px"], seed=config["seed"],
                )
            except _RF:
                pass
        return corrs

    report = bench_harness(
        [("extract", extract), ("match", match)], input_factory,
        warmup=config["bench.warmup"], iters=config["bench.iters"],
    )
    return bench_report_text(report)


def _bench_kernels(config: RunConfig) -> str:
    from evalign import _kernels
    from evalign.metrics import bench_harness, bench_report_text

    rng = np.random.default_rng(config["seed"])
    n = 200_000
    t = np.sort(rng.integers(0, 1_000_000, n).astype(np.uint64))
    x = rng.integers(0, 640, n).astype(np.uint16)
    y = rng.integers(0, 480, n).astype(np.uint16)
    p = rng.choice([-1, 1], n).astype(np.int8)

    chunks = []
    grids = {}
    for name, impl in _kernels.implementations().items():
        def run(_ignored, impl=impl):
            return impl.accumulate_bilinear(t, x, y, p, int(t[0]), int(t[-1]), 5, 480, 640)

        report = bench_harness(
            [(name, run)], lambda i: None,
            warmup=config["bench.warmup"], iters=config["bench.iters"],
        )
        grids[name] = run(None)
        chunks.append(bench_report_text(report))
    names = list(grids)
    if len(names) == 2:
        identical = bool(np.array_equal(grids[names[0]], grids[names[1]]))
        chunks.append(f"backends bit-identical: {identical}\n")
    chunks.append(f"events per grid: {n}\n")
    return "".join(chunks)


# --- viz ---------------------------------------------------------------------


def cmd_viz(args) -> int:
    import torch

    from evalign.events.io import parse_events
    from evalign.inference import pad_symmetric, pca_feature_image
    from evalign.model.checkpoint import load_student
    from evalign.model.student import StudentModel
    from evalign.representation import VoxelGrid, encode_voxel_grid, normalize_voxel_grid

    config = RunConfig.from_file(args.config)
    _seed_everything(config)
    model_cfg = config.model_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = StudentModel(model_cfg, seed=config["seed"]).eval()
    load_student(model, args.ckpt)

    stream = parse_events(Path(args.events).read_bytes())
    windows = _window_spec(config, args).apply(stream)
    tile = config.tile_size()

    outputs = []
    for i, window in enumerate(windows):
        if len(window) == 0:
            continue
        grid = encode_voxel_grid(
            window, model_cfg.bins, stream.sensor_height, stream.sensor_width
        )
        values = grid.values
        if values.shape[-2:] != (tile, tile):
            values, _ = pad_symmetric(values, tile)
        norm = normalize_voxel_grid(VoxelGrid(model_cfg.bins, tile, tile, values))
        voxels = torch.from_numpy(norm.values.astype(np.float32))[None]
        with torch.no_grad():
            feats = model(voxels)
        image = pca_feature_image(feats.patches[0].numpy())
        scaled = np.repeat(np.repeat(image, model_cfg.patch, 0), model_cfg.patch, 1)
        name = f"pca_{i:05d}.png"
        _write_png(out_dir / name, (scaled * 255).round().astype(np.uint8))
        outputs.append(name)

    inputs = [p for p in (args.config, args.ckpt, args.events) if p]
    _finish(out_dir, "viz", config, inputs, outputs, {"windows": len(windows)})
    print(f"wrote {len(outputs)} feature images -> {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
