"""CLI: figures --spec <json> --out <path>."""

import argparse
import json
import sys

from . import io
from .render import FigureSpec, render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="figures", description="Render figures from experiment output directories."
    )
    parser.add_argument("--spec", required=True, help="figure spec JSON file")
    parser.add_argument("--out", default=None, help="output image path (overrides spec)")
    args = parser.parse_args(argv)
    try:
        with open(args.spec, encoding="utf-8") as fh:
            data = json.load(fh)
        spec = FigureSpec.from_dict(data, output_override=args.out)
        path = render(spec)
    except (io.SchemaError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    print(str(path))
    return 0


if __name__ == "__main__":
    sys.exit(main())
