"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 processing error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .errors import SalshiftError
from .fileio import load_image, load_mask, save_image
from .imaging import MaskLayer, RasterImage, render_edit
from .metrics import compute_report, reports_to_csv, reports_to_json
from .optimizer import ObjectiveConfig, OptimizerConfig, multi_style, optimize
from .recipes import load_recipes, save_recipes
from .saliency import compute_proxy_saliency
from .video import FrameSequence, video_apply

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_pair(image_path: str, mask_path: str, resize_mask: bool) -> tuple[RasterImage, MaskLayer]:
    image = load_image(image_path)
    mask = load_mask(mask_path, match=(image.height, image.width), allow_resize=resize_mask)
    return image, mask


def _saliency_source(spec: str | None):
    if spec is None:
        return None
    from .providers import parse_provider_spec

    parse_provider_spec(spec)  # fail fast on malformed specs
    return spec


def _cmd_optimize(args) -> int:
    image, mask = _load_pair(args.image, args.mask, args.resize_mask)
    obj_cfg = ObjectiveConfig(mode=args.mode)
    opt_cfg = OptimizerConfig(iterations=args.iters, seed=args.seed, workers=args.workers)
    source = _saliency_source(args.saliency_provider)
    if args.styles > 1:
        recipes = multi_style(image, mask, args.styles, args.seed, obj_cfg, opt_cfg, source)
        best = recipes[0]
        save_recipes(recipes, args.params_out)
    else:
        best = optimize(image, mask, obj_cfg, opt_cfg, source)
        save_recipes(best, args.params_out)
    save_image(render_edit(image, mask, best), args.out)
    return 0


def _cmd_apply(args) -> int:
    image, mask = _load_pair(args.image, args.mask, args.resize_mask)
    recipe = load_recipes(args.params)[0]
    save_image(render_edit(image, mask, recipe, args.alpha), args.out)
    return 0


def _cmd_metrics(args) -> int:
    original = load_image(args.original)
    edited = load_image(args.edited)
    mask = load_mask(args.mask, match=(original.height, original.width), allow_resize=args.resize_mask)
    if args.saliency_provider:
        from .providers import query_provider

        spec = args.saliency_provider
        s_before = query_provider(spec, original)
        s_after = query_provider(spec, edited)
    else:
        s_before = compute_proxy_saliency(original)
        s_after = compute_proxy_saliency(edited)
    report = compute_report(original, edited, mask, s_before, s_after)
    if args.format == "json":
        print(reports_to_json([report]))
    else:
        print(reports_to_csv([report]), end="")
    return 0


def _cmd_video(args) -> int:
    recipe = load_recipes(args.params)[0]
    frames = FrameSequence.from_directories(args.frames, args.masks)
    count = video_apply(frames, recipe, args.out)
    print(f"wrote {count} frames to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    app = create_app(
        ServiceConfig(
            static_dir=args.static,
            upload_limit=args.upload_limit,
            session_ttl=args.session_ttl,
            persist_dir=args.persist,
            optimizer_workers=args.workers,
        )
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="salshift", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="search for an attention-shifting recipe")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True, help="edited image output path")
    p.add_argument("--params-out", required=True, help="recipe JSON output path")
    p.add_argument("--mode", choices=("increase", "decrease"), default="increase")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--styles", type=int, default=1, help="write an array of N diverse recipes")
    p.add_argument("--saliency-provider", help="exec:<command> or http:<url>")
    p.add_argument("--workers", type=int, default=1, help="parallel finite-difference workers")
    p.add_argument("--resize-mask", action="store_true")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("apply", help="apply a saved recipe at native resolution")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--alpha", type=float, default=1.0, help="edit strength in [0, 1.5]")
    p.add_argument("--out", required=True)
    p.add_argument("--resize-mask", action="store_true")
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("metrics", help="saliency-shift and fidelity report")
    p.add_argument("--original", required=True)
    p.add_argument("--edited", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--saliency-provider")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--resize-mask", action="store_true")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("video", help="apply a recipe across a frame directory")
    p.add_argument("--frames", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_video)

    p = sub.add_parser("serve", help="run the interactive editing service")
    p.add_argument("--port", type=int, default=int(os.environ.get("SALSHIFT_PORT", 8000)))
    p.add_argument("--host", default=os.environ.get("SALSHIFT_HOST", "127.0.0.1"))
    p.add_argument("--static", default=os.environ.get("SALSHIFT_STATIC"),
                   help="directory of UI assets to serve at /")
    p.add_argument("--upload-limit", type=int,
                   default=int(os.environ.get("SALSHIFT_UPLOAD_LIMIT", 32 * 1024 * 1024)))
    p.add_argument("--session-ttl", type=float,
                   default=float(os.environ.get("SALSHIFT_SESSION_TTL", 3600)))
    p.add_argument("--persist", default=os.environ.get("SALSHIFT_PERSIST"),
                   help="directory for session persistence across restarts")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel finite-difference workers for optimize jobs")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SalshiftError as exc:
        print(f"salshift {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"salshift {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
