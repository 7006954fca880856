"""Batch renderer: ``b2bplots render --input <csv> --kind violin|marginal``."""

from __future__ import annotations

import argparse
import sys

from .render import RATE_METRICS, FigureSpec, RenderError, render_marginal, render_violins


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="b2bplots",
                                     description="Render figures from b2bvalue result CSVs")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one or more figures")
    p.add_argument("--input", required=True, help="per-scenario CSV (violin) or marginal CSV")
    p.add_argument("--kind", required=True, choices=["violin", "marginal"])
    p.add_argument("--metric", default="all",
                   help="metric column for violins: r_ec, r_ees, r_pes, r_deep or 'all'")
    p.add_argument("--system", type=int, default=1, choices=[1, 2])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", default="png", choices=["png", "svg"])
    p.set_defaults(func=cmd_render)
    return parser


def cmd_render(args) -> int:
    metrics = RATE_METRICS if args.metric == "all" else (args.metric,)
    spec = FigureSpec(out_dir=args.out, metrics=metrics, image_format=args.format,
                      system=args.system)
    if args.kind == "violin":
        rendered = render_violins(args.input, spec)
    else:
        rendered = render_marginal(args.input, spec)
    for key, figure in rendered.items():
        print(f"{key}: {figure.path}")
    if not rendered:
        print("nothing rendered", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RenderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
