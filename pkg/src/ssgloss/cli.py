"""Command-line surface.

JSON and CSV go to stdout, binary payloads to files, diagnostics to stderr.
Exit codes: 0 ok, 2 I/O or decode failure, 3 shape/config mismatch,
4 invalid center.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import edge_mask, image_io, synth
from .errors import (
    ConfigMismatch,
    DimensionError,
    FormatError,
    GraphMismatch,
    InvalidCenter,
    IoError,
    ShapeMismatch,
)
from .fast_kernel import KernelPlan, bench, compute_ssg_fast, rows_to_csv, ssl_backward_fast
from .image_io import ImageU8, from_unit, to_unit
from .loss import ssl_backward, toy_optimize
from .ssg import SsgConfig, compute_ssg_oracle

EXIT_OK = 0
EXIT_IO = 2
EXIT_MISMATCH = 3
EXIT_BAD_CENTER = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("graph configuration")
    g.add_argument("--Ks", type=int, default=None, help="search area side (odd)")
    g.add_argument("--Kw", type=int, default=None, help="sliding window side (odd)")
    g.add_argument("--h", type=float, default=None, help="similarity scale")
    g.add_argument("--stride", type=int, default=None, help="search sampling step")
    g.add_argument("--t", type=float, default=None, help="edge mask threshold (8-bit)")
    g.add_argument("--alpha", type=float, default=None, help="L1 weight inside SSL")
    g.add_argument("--beta", type=float, default=None, help="SSL weight in composites")
    g.add_argument("--gamma", type=float, default=None, help="pixel-L1 weight")
    g.add_argument("--mode", choices=["GAN", "DM"], default="GAN",
                   help="composite weighting convention")
    g.add_argument("--workers", type=int,
                   default=int(os.environ.get("SSGLOSS_WORKERS", "0")),
                   help="kernel parallelism (0 = all cores; env SSGLOSS_WORKERS)")
    g.add_argument("--seed", type=int, default=0, help="seed for synthetic noise")
    g.add_argument("--oracle", action="store_true",
                   help="force the single-threaded reference backend")


def build_config(args) -> SsgConfig:
    cfg = SsgConfig()
    if args.mode == "DM":
        cfg = cfg.dm_mode()
    overrides = {}
    for field, attr in [("ks", "Ks"), ("kw", "Kw"), ("h", "h"), ("stride", "stride"),
                        ("t", "t"), ("alpha", "alpha"), ("beta", "beta"),
                        ("gamma", "gamma")]:
        value = getattr(args, attr)
        if value is not None:
            overrides[field] = value
    return replace(cfg, **overrides) if overrides else cfg


def _plan(args) -> KernelPlan:
    return KernelPlan(n_workers=max(0, args.workers))


def _load_u8(path) -> ImageU8:
    return image_io.load_image(path)


def _mask_for(hr_u8: ImageU8, cfg: SsgConfig, mask_path):
    if mask_path:
        return edge_mask.load_mask(mask_path)
    return edge_mask.compute_edge_mask(hr_u8, cfg)


def cmd_mask(args) -> int:
    cfg = build_config(args)
    img = _load_u8(args.input)
    mask = edge_mask.compute_edge_mask(img, cfg)
    image_io.write_field(args.output, mask)
    print(json.dumps({"edge_fraction": mask.edge_fraction}))
    return EXIT_OK


def cmd_loss(args) -> int:
    cfg = build_config(args)
    hr_u8 = _load_u8(args.hr)
    sr_u8 = _load_u8(args.sr)
    hr = to_unit(hr_u8)
    sr = to_unit(sr_u8)
    mask = _mask_for(hr_u8, cfg, args.mask)
    if args.oracle:
        report, grad = ssl_backward(hr, sr, mask, cfg)
    else:
        report, grad = ssl_backward_fast(hr, sr, mask, cfg, _plan(args))
    if args.grad_out:
        image_io.write_field(args.grad_out, grad)
    print(report.to_json())
    return EXIT_OK


def cmd_grad(args) -> int:
    cfg = build_config(args)
    hr_u8 = _load_u8(args.hr)
    sr_u8 = _load_u8(args.sr)
    hr = to_unit(hr_u8)
    sr = to_unit(sr_u8)
    mask = _mask_for(hr_u8, cfg, args.mask)
    if args.oracle:
        report, grad = ssl_backward(hr, sr, mask, cfg)
    else:
        report, grad = ssl_backward_fast(hr, sr, mask, cfg, _plan(args))
    image_io.write_field(args.output, grad)
    print(report.to_json())
    return EXIT_OK


def cmd_ssg_dump(args) -> int:
    cfg = build_config(args)
    img_u8 = _load_u8(args.input)
    img = to_unit(img_u8)
    mask = _mask_for(img_u8, cfg, args.mask)
    if args.oracle:
        graph = compute_ssg_oracle(img, mask, cfg)
    else:
        graph = compute_ssg_fast(img, mask, cfg, _plan(args))
    image_io.write_field(args.output, graph)
    print(json.dumps({"n_centers": graph.n_centers, "n_offsets": graph.n_offsets}))
    return EXIT_OK


def cmd_heatmap(args) -> int:
    cfg = build_config(args)
    img_u8 = _load_u8(args.input)
    img = to_unit(img_u8)
    mask = _mask_for(img_u8, cfg, args.mask)
    try:
        row_s, col_s = args.center.split(",")
        center = (int(row_s), int(col_s))
    except ValueError:
        raise InvalidCenter(f"--center must be 'row,col', got {args.center!r}") from None
    hits = np.nonzero(
        (mask.centers[:, 0] == center[0]) & (mask.centers[:, 1] == center[1])
    )[0]
    if hits.size == 0:
        raise InvalidCenter(
            f"{center} is not an admissible center (edge pixel with full footprint)"
        )
    if args.oracle:
        graph = compute_ssg_oracle(img, mask, cfg)
    else:
        graph = compute_ssg_fast(img, mask, cfg, _plan(args))
    weights = graph.weights[int(hits[0])]
    rs = (cfg.ks - 1) // 2
    grid = np.zeros((cfg.ks, cfg.ks), dtype=np.float64)
    for (dr, dc), w in zip(graph.offsets, weights):
        grid[dr + rs, dc + rs] = w
    top = grid.max()
    # ceiling keeps every sampled cell visible: weights are positive, so the
    # sampled grid is exactly the nonzero set of the rendering
    scaled = np.ceil(grid / top * 255.0).astype(np.uint8) if top > 0 else grid.astype(np.uint8)
    image_io.save_image(args.output, image_io.image_u8_from_array(scaled))
    if args.fig:
        from . import viz

        viz.save_heatmap_figure(grid, args.fig)
    print(json.dumps({"center": list(center), "max_weight": float(top)}))
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = build_config(args)
    hr_u8 = _load_u8(args.hr)
    hr = to_unit(hr_u8)
    mask = _mask_for(hr_u8, cfg, args.mask)
    noisy = synth.add_uniform_noise(hr, args.noise, seed=args.seed)
    if args.oracle:
        backward = ssl_backward
    else:
        plan = _plan(args)

        def backward(ihr, isr, m, c):
            return ssl_backward_fast(ihr, isr, m, c, plan)

    final, trace = toy_optimize(noisy, hr, mask, cfg, args.steps, args.lr,
                                backward=backward)
    image_io.save_image(args.output, from_unit(final))
    print("step,loss")
    for i, value in enumerate(trace):
        print(f"{i},{value!r}")
    if args.fig and trace:
        from . import viz

        viz.save_trace_figure(trace, args.fig)
    return EXIT_OK


def _parse_sizes(text: str) -> list[tuple[int, int]]:
    sizes = []
    for chunk in text.split(","):
        h_s, w_s = chunk.lower().split("x")
        sizes.append((int(h_s), int(w_s)))
    return sizes


def cmd_bench(args) -> int:
    base = build_config(args)
    sizes = _parse_sizes(args.sizes)
    cfgs = []
    for ks in [int(x) for x in args.ks_list.split(",")]:
        for kw in [int(x) for x in args.kw_list.split(",")]:
            cfgs.append(replace(base, ks=ks, kw=kw))
    plan = KernelPlan(n_workers=max(0, args.workers), mode="direct")
    rows = bench(sizes, cfgs, plan, trials=args.trials, seed=args.seed)
    csv = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    sys.stdout.write(csv)
    if args.fig:
        from . import viz

        viz.save_bench_figure(rows, args.fig)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssgloss",
        description="Edge-masked self-similarity graphs, the similarity loss "
        "between image pairs, analytic gradients, and a toy optimizer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask", help="compute and store an edge mask")
    p.add_argument("input")
    p.add_argument("output")
    _add_common(p)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("loss", help="SSL between a ground truth and a reconstruction")
    p.add_argument("hr")
    p.add_argument("sr")
    p.add_argument("--mask", default=None, help="precomputed mask file (default: from HR)")
    p.add_argument("--grad-out", default=None, help="also write the gradient field here")
    _add_common(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("grad", help="gradient field of the SSL w.r.t. the reconstruction")
    p.add_argument("hr")
    p.add_argument("sr")
    p.add_argument("output")
    p.add_argument("--mask", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_grad)

    p = sub.add_parser("ssg-dump", help="compute and store a self-similarity graph")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--mask", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ssg_dump)

    p = sub.add_parser("heatmap", help="render one center's weights as an image")
    p.add_argument("input")
    p.add_argument("output", help="PGM heatmap path")
    p.add_argument("--center", required=True, help="row,col of an admissible center")
    p.add_argument("--mask", default=None)
    p.add_argument("--fig", default=None, help="optional matplotlib rendering")
    _add_common(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("optimize", help="toy gradient descent toward a target image")
    p.add_argument("hr")
    p.add_argument("output")
    p.add_argument("--noise", type=float, default=0.1, help="uniform noise amplitude")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--mask", default=None)
    p.add_argument("--fig", default=None, help="optional loss-trace figure")
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench", help="time the kernel against its cost estimate")
    p.add_argument("--sizes", default="128x128", help="HxW[,HxW...]")
    p.add_argument("--ks-list", default="25")
    p.add_argument("--kw-list", default="9")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--out", default=None, help="also write the CSV here")
    p.add_argument("--fig", default=None, help="optional scaling figure")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IoError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ShapeMismatch, ConfigMismatch, GraphMismatch, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except InvalidCenter as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CENTER


if __name__ == "__main__":
    sys.exit(main())
