"""Command-line front-end: single-image enhancement, ablation sweeps, serving.

Exit codes: 0 success, 1 usage/config/I-O error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .gpr import KernelConfig, weight_map_images
from .imaging import Image, ImagingError, load_image, resize_exact, save_image
from .orchestrator import (
    EnhanceConfig,
    EnhanceSession,
    oracle_adjust,
    trace_to_csv,
)
from .quality import nr_score, psnr
from .selection import STRATEGY_KINDS, SelectionStrategy

SCATTER_MAX_ROWS = 10000


class CliError(Exception):
    """Usage, configuration, or I/O problem (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="localenhance", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    enh = sub.add_parser("enhance", help="enhance one image with the quality oracle")
    enh.add_argument("--input", required=True)
    enh.add_argument("--output", required=True)
    enh.add_argument("--oracle", default="nr", help="nr or psnr:<reference image>")
    enh.add_argument("--L", type=int, default=4, dest="key_pixels")
    enh.add_argument("--S", type=int, default=4, dest="sliders")
    enh.add_argument("--strategy", default="emoc", choices=STRATEGY_KINDS)
    enh.add_argument("--seed", type=int, default=0)
    enh.add_argument("--trace", default=None)
    enh.add_argument("--dump-weights", default=None)
    enh.add_argument("--dump-scatter", default=None)

    abl = sub.add_parser("ablate", help="oracle-score sweeps over configurations")
    abl.add_argument("--inputs", required=True)
    abl.add_argument("--L-list", default="4", dest="key_pixel_list")
    abl.add_argument("--strategies", default="emoc")
    abl.add_argument("--no-illumination", action="store_true")
    abl.add_argument("--S", type=int, default=4, dest="sliders")
    abl.add_argument("--seed", type=int, default=0)
    abl.add_argument("--out", required=True)

    srv = sub.add_parser("serve", help="run the crowd session service")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--data-dir", default="./sessions")
    srv.add_argument("--check-range", default="0.25,0.75")
    srv.add_argument("--bundle-size", type=int, default=5)
    srv.add_argument("--static", default=None, help="directory of UI assets")
    return parser


def _make_quality(spec: str):
    if spec == "nr":
        return nr_score
    if spec.startswith("psnr:"):
        ref_path = spec[len("psnr:") :]
        if not os.path.isfile(ref_path):
            raise CliError(f"reference image not found: {ref_path}")
        reference = load_image(ref_path)
        cache: dict[tuple, Image] = {}

        def quality(img: Image) -> float:
            dims = (img.width, img.height)
            if dims not in cache:
                cache[dims] = resize_exact(reference, *dims)
            return psnr(img, cache[dims])

        return quality
    raise CliError(f"unknown oracle {spec!r} (expected nr or psnr:<path>)")


def _build_config(args, use_illumination: bool = True) -> EnhanceConfig:
    try:
        return EnhanceConfig(
            n_key_pixels=args.key_pixels,
            n_sliders=args.sliders,
            strategy=SelectionStrategy(args.strategy, seed=args.seed),
            kernel=KernelConfig(),
            seed=args.seed,
            use_illumination=use_illumination,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _run_session(image: Image, cfg: EnhanceConfig, quality):
    session = EnhanceSession(image, cfg)
    while not session.done:
        task = session.current_task()
        alpha = oracle_adjust(task.render, quality)
        session.submit(alpha, score=float(quality(task.render(alpha))))
    return session


def cmd_enhance(args) -> int:
    if not os.path.isfile(args.input):
        raise CliError(f"input image not found: {args.input}")
    try:
        image = load_image(args.input)
    except ImagingError as exc:
        raise CliError(str(exc)) from exc

    cfg = _build_config(args)
    quality = _make_quality(args.oracle)
    session = _run_session(image, cfg, quality)
    out, pmap = session.result()

    try:
        save_image(out, args.output)
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}") from exc

    if args.trace:
        trace_to_csv(session.trace, args.trace)
    if args.dump_weights:
        dump_dir = Path(args.dump_weights)
        dump_dir.mkdir(parents=True, exist_ok=True)
        maps = weight_map_images(session.weights, out.width, out.height)
        for i, wmap in enumerate(maps, start=1):
            save_image(wmap, dump_dir / f"weight_{i:02d}.png")
    if args.dump_scatter:
        write_scatter_csv(
            args.dump_scatter, session.illumination.t, pmap, cfg.seed
        )
    return 0


def write_scatter_csv(path, t: np.ndarray, pmap: np.ndarray, seed: int) -> None:
    """Illumination vs brightness-parameter scatter, subsampled and seeded."""
    n = t.shape[0]
    idx = np.arange(n)
    if n > SCATTER_MAX_ROWS:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n, SCATTER_MAX_ROWS, replace=False))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_255", "p_brightness"])
        for i in idx:
            writer.writerow([repr(float(255.0 * t[i])), repr(float(pmap[i, 0]))])


def cmd_ablate(args) -> int:
    inputs_dir = Path(args.inputs)
    if not inputs_dir.is_dir():
        raise CliError(f"inputs directory not found: {args.inputs}")
    images = sorted(
        p for p in inputs_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not images:
        raise CliError(f"no images in {args.inputs}")

    try:
        key_pixel_counts = [int(v) for v in args.key_pixel_list.split(",") if v]
    except ValueError as exc:
        raise CliError(f"bad --L-list: {args.key_pixel_list}") from exc
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    for s in strategies:
        if s not in STRATEGY_KINDS:
            raise CliError(f"unknown strategy {s!r}")
    illumination_variants = [True, False] if args.no_illumination else [True]

    rows = []
    for path in images:
        try:
            image = load_image(path)
        except ImagingError as exc:
            raise CliError(str(exc)) from exc
        for n_keys in key_pixel_counts:
            for strategy in strategies:
                for use_illum in illumination_variants:
                    cfg = EnhanceConfig(
                        n_key_pixels=n_keys,
                        n_sliders=args.sliders,
                        strategy=SelectionStrategy(strategy, seed=args.seed),
                        seed=args.seed,
                        use_illumination=use_illum,
                    )
                    session = _run_session(image, cfg, nr_score)
                    for rec in session.trace:
                        rows.append(
                            [
                                path.name,
                                n_keys,
                                strategy,
                                use_illum,
                                rec.step,
                                repr(rec.score),
                            ]
                        )

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image", "L", "strategy", "use_illumination", "iteration", "score"])
        writer.writerows(rows)
    return 0


def cmd_serve(args) -> int:
    try:
        lo, hi = (float(v) for v in args.check_range.split(","))
    except ValueError as exc:
        raise CliError(f"bad --check-range: {args.check_range}") from exc
    import uvicorn

    from .service import ServiceConfig, create_app

    app = create_app(
        ServiceConfig(
            data_dir=args.data_dir,
            check_range=(lo, hi),
            bundle_size=args.bundle_size,
            static_dir=args.static,
        )
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "enhance":
            return cmd_enhance(args)
        if args.command == "ablate":
            return cmd_ablate(args)
        return cmd_serve(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
