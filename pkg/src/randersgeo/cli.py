"""Command line interface: segmentation runs, distance maps, evaluation,
benchmarks and synthetic fixtures.

Exit codes: 0 converged, 2 stopped at the iteration cap, 3 invalid
input/usage, 4 runtime solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import fixtures
from .errors import RandersGeoError
from .evolve import (
    LandmarkSet,
    SegmentationConfig,
    evolve_landmarks,
    jaccard,
    sample_landmarks,
)
from .grid import (
    BinaryMask,
    Grid2D,
    Image,
    Polyline,
    contour_from_json,
    contour_to_json,
    load_image,
    mask_to_pgm_bytes,
    write_pgm,
    write_rsf1,
)

EXIT_OK = 0
EXIT_MAX_ITERS = 2
EXIT_USAGE = 3
EXIT_RUNTIME = 4


def _parse_points(text):
    pts = []
    for part in text.split(";"):
        x, y = part.split(",")
        pts.append([float(x), float(y)])
    return np.asarray(pts)


def _load_config(args):
    cfg = SegmentationConfig()
    if getattr(args, "config", None):
        with open(args.config) as f:
            cfg = SegmentationConfig.from_dict(json.load(f))
    overrides = {}
    for kv in getattr(args, "set", None) or []:
        key, val = kv.split("=", 1)
        field = SegmentationConfig.__dataclass_fields__.get(key)
        if field is None:
            raise ValueError(f"unknown config key {key!r}")
        if field.type in ("int", int):
            overrides[key] = int(val)
        elif field.type in ("float", float):
            overrides[key] = float(val)
        elif field.type in ("bool", bool):
            overrides[key] = val.lower() in ("1", "true", "yes")
        else:
            overrides[key] = val
    d = cfg.to_dict()
    d.update(overrides)
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    return SegmentationConfig.from_dict(d)


def energy_csv_bytes(history):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "psi", "length", "energy", "area_delta"])
    for row in history:
        w.writerow([row["iteration"], f"{row['psi']:.9g}",
                    f"{row['length']:.9g}", f"{row['energy']:.9g}",
                    f"{row['area_delta']:.9g}"])
    return buf.getvalue().encode()


def run_segmentation(img, landmarks, cfg, out_dir, initial_contour=None,
                     gt_mask=None):
    """Shared segmentation runner; writes the documented artifact layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = evolve_landmarks(img, landmarks, cfg,
                             initial_contour=initial_contour)
    for i, contour in enumerate(state.contours, start=1):
        (out / f"iter{i:03d}.contour.json").write_text(
            contour_to_json(contour))
    (out / "final.contour.json").write_text(contour_to_json(state.contour))
    (out / "final.mask.pgm").write_bytes(mask_to_pgm_bytes(state.mask))
    (out / "energy.csv").write_bytes(energy_csv_bytes(state.history))
    report = {
        "v": 1,
        "converged": state.converged,
        "iterations": state.iteration,
        "energy": state.energy,
        "config": cfg.to_dict(),
        "landmarks": [list(map(float, p)) for p in landmarks.points],
    }
    if gt_mask is not None:
        report["jaccard"] = jaccard(state.mask, gt_mask)
    (out / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2))
    return state


def cmd_segment(args):
    cfg = _load_config(args)
    img = load_image(args.image, target_channels=args.channels)
    initial = None
    if args.contour:
        initial = contour_from_json(Path(args.contour).read_text())
    if args.landmarks:
        lm = LandmarkSet(_parse_points(args.landmarks))
    elif args.landmarks_file:
        pts = json.loads(Path(args.landmarks_file).read_text())
        lm = LandmarkSet(np.asarray(pts))
    elif initial is not None:
        lm = LandmarkSet(initial.points[:1])
    else:
        print("segment: need --landmarks, --landmarks-file or --contour",
              file=sys.stderr)
        return EXIT_USAGE
    gt = None
    if args.gt:
        gt_img = load_image(args.gt, target_channels=1)
        gt = BinaryMask(gt_img.grid, gt_img.samples > 0.5)
    state = run_segmentation(img, lm, cfg, args.out, initial_contour=initial,
                             gt_mask=gt)
    return EXIT_OK if state.converged else EXIT_MAX_ITERS


def _rotational_metric(grid, a1, a2):
    from .eikonal import MetricField
    from .grid import TensorField2, VectorField2

    X, Y = grid.cell_centers()
    cx = (grid.width - 1) / 2 * grid.spacing
    cy = (grid.height - 1) / 2 * grid.spacing
    dx = X - cx
    dy = Y - cy
    r = np.hypot(dx, dy)
    r = np.where(r > 1e-9, r, np.inf)
    vx = dy / r   # varpi = -(p - c)^perp / |p - c|
    vy = -dx / r
    m11 = 1.0 - a1 * a1 * vx * vx
    m12 = -a1 * a1 * vx * vy
    m22 = 1.0 - a1 * a1 * vy * vy
    tensor = TensorField2(grid, m11, m12, m22)
    drift = VectorField2(grid, np.stack([a2 * vx, a2 * vy], axis=-1))
    varpi = np.stack([vx, vy], axis=-1)
    return MetricField(grid, tensor, drift,
                       BinaryMask(grid, np.ones(grid.shape, bool))), varpi


def cmd_distance(args):
    from .eikonal import MetricField, backtrack, fmm_solve

    grid = Grid2D(args.size, args.size)
    if args.rotational:
        metric, _ = _rotational_metric(grid, args.a1, args.a2)
    elif args.metric == "isotropic":
        metric = MetricField.isotropic(grid, args.cost)
    elif args.metric == "riemannian":
        from .grid import TensorField2

        ones = np.ones(grid.shape)
        tensor = TensorField2(grid, args.m11 * ones, args.m12 * ones,
                              args.m22 * ones)
        metric = MetricField.riemannian(grid, tensor)
    elif args.metric == "randers":
        metric = MetricField.constant(
            grid, np.array([[args.m11, args.m12], [args.m12, args.m22]]),
            (args.wx, args.wy))
    else:
        print(f"distance: invalid metric kind {args.metric!r}",
              file=sys.stderr)
        return EXIT_USAGE
    metric.validate()
    src = tuple(int(v) for v in args.source.split(","))
    dmap = fmm_solve(metric, [src])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rsf1(out / "distance.rsf1", dmap.distances)
    _write_levelset_png(out / "levels.png", dmap.distances.values)
    if args.target:
        tgt = np.asarray([float(v) for v in args.target.split(",")])
        path = backtrack(dmap, tgt)
        (out / "geodesic.json").write_text(
            contour_to_json(Polyline(path.points[::-1], False)))
    return EXIT_OK


def _write_levelset_png(path, values, n_levels=24):
    from PIL import Image as PILImage

    finite = np.isfinite(values)
    vmax = values[finite].max() if finite.any() else 1.0
    step = vmax / n_levels if vmax > 0 else 1.0
    bands = np.floor(np.where(finite, values, 0.0) / step).astype(int)
    edge = np.zeros(values.shape, dtype=bool)
    edge[:, 1:] |= bands[:, 1:] != bands[:, :-1]
    edge[1:, :] |= bands[1:, :] != bands[:-1, :]
    base = np.where(finite, values / vmax, 1.0)
    rgb = np.stack([np.where(edge, 0.8, 0.1 + 0.8 * base)] * 3, axis=-1)
    rgb[:, :, 0] = np.where(edge, 0.9, rgb[:, :, 0])
    PILImage.fromarray((rgb * 255).astype(np.uint8)).save(path)


def cmd_eval(args):
    a = load_image(args.mask_a, target_channels=1)
    b = load_image(args.mask_b, target_channels=1)
    if a.grid.shape != b.grid.shape:
        print("eval: mask dimensions differ", file=sys.stderr)
        return EXIT_USAGE
    j = jaccard(BinaryMask(a.grid, a.samples > 0.5),
                BinaryMask(b.grid, b.samples > 0.5))
    print(f"{j:.6f}")
    return EXIT_OK


def cmd_bench(args):
    cfg = _load_config(args)
    img, gt_mask, gt_contour = fixtures.make_fixture(args.fixture,
                                                     seed=args.fixture_seed)
    scores = []
    for run in range(args.runs):
        seed = args.seed + run
        lm = sample_landmarks(gt_contour, args.m, seed=seed)
        run_cfg = SegmentationConfig.from_dict(
            {**cfg.to_dict(), "seed": seed})
        try:
            state = evolve_landmarks(img, lm, run_cfg)
            scores.append(jaccard(state.mask, gt_mask))
        except RandersGeoError as e:
            print(f"run {run} failed: {e}", file=sys.stderr)
            scores.append(0.0)
    arr = np.asarray(scores)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["Mean", "Max", "Min", "Std"])
        w.writerow([f"{arr.mean():.6f}", f"{arr.max():.6f}",
                    f"{arr.min():.6f}", f"{arr.std():.6f}"])
    print(f"mean={arr.mean():.4f} max={arr.max():.4f} "
          f"min={arr.min():.4f} std={arr.std():.4f}")
    return EXIT_OK


def cmd_make_fixture(args):
    img, gt_mask, gt_contour = fixtures.make_fixture(args.kind,
                                                     seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pgm(out / f"{args.kind}.pgm", img.luminance())
    write_pgm(out / f"{args.kind}.gt.pgm", gt_mask.bits)
    (out / f"{args.kind}.gt.contour.json").write_text(
        contour_to_json(gt_contour))
    return EXIT_OK


def cmd_dump_config(args):
    print(json.dumps(SegmentationConfig().to_dict(), sort_keys=True,
                     indent=2))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="randersgeo",
        description="Region-based Randers geodesic segmentation")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("segment", help="run a segmentation")
    ps.add_argument("--image", required=True)
    ps.add_argument("--channels", type=int, default=1, choices=(1, 3))
    ps.add_argument("--landmarks", help="x,y;x,y;... landmark list")
    ps.add_argument("--landmarks-file", help="JSON [[x,y],...] file")
    ps.add_argument("--contour", help="initial contour JSON file")
    ps.add_argument("--gt", help="ground-truth mask (adds Jaccard to report)")
    ps.add_argument("--out", required=True)
    ps.add_argument("--config", help="JSON config file")
    ps.add_argument("--set", action="append", metavar="KEY=VALUE")
    ps.add_argument("--seed", type=int)
    ps.set_defaults(func=cmd_segment)

    pd = sub.add_parser("distance", help="compute a geodesic distance map")
    pd.add_argument("--metric", default="isotropic",
                    choices=("isotropic", "riemannian", "randers"))
    pd.add_argument("--rotational", action="store_true",
                    help="rotational-field benchmark metric "
                         "(tensor Id - a1^2 t t^T, drift a2 t for the "
                         "circular unit field t around the grid center)")
    pd.add_argument("--a1", type=float, default=0.0)
    pd.add_argument("--a2", type=float, default=0.0)
    pd.add_argument("--cost", type=float, default=1.0)
    pd.add_argument("--m11", type=float, default=1.0)
    pd.add_argument("--m12", type=float, default=0.0)
    pd.add_argument("--m22", type=float, default=1.0)
    pd.add_argument("--wx", type=float, default=0.0)
    pd.add_argument("--wy", type=float, default=0.0)
    pd.add_argument("--size", type=int, default=201)
    pd.add_argument("--source", default="100,100")
    pd.add_argument("--target")
    pd.add_argument("--out", required=True)
    pd.set_defaults(func=cmd_distance)

    pe = sub.add_parser("eval", help="Jaccard index of two masks")
    pe.add_argument("mask_a")
    pe.add_argument("mask_b")
    pe.set_defaults(func=cmd_eval)

    pb = sub.add_parser("bench", help="repeated random-landmark runs")
    pb.add_argument("--fixture", default="disk",
                    choices=sorted(fixtures.FIXTURES))
    pb.add_argument("--fixture-seed", type=int, default=0)
    pb.add_argument("--runs", type=int, default=30)
    pb.add_argument("--m", type=int, default=3)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--out", required=True)
    pb.add_argument("--config")
    pb.add_argument("--set", action="append", metavar="KEY=VALUE")
    pb.set_defaults(func=cmd_bench)

    pf = sub.add_parser("make-fixture", help="generate a synthetic fixture")
    pf.add_argument("kind", choices=sorted(fixtures.FIXTURES))
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=cmd_make_fixture)

    pc = sub.add_parser("dump-config", help="print the default config")
    pc.set_defaults(func=cmd_dump_config)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import FormatError

    try:
        return args.func(args)
    except (OSError, ValueError, json.JSONDecodeError, FormatError) as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RandersGeoError as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
