"""Script entry point: render --in PATH --kind K --out PATH."""

import argparse
import json
import sys

from .errors import SchemaMismatch
from .figures import KINDS, FigureJob, render

__all__ = ["main"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vessfig",
        description="Render one planner CSV into a figure image.")
    parser.add_argument("--in", dest="input_path", required=True,
                        help="input CSV from the planner")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", dest="output_path", required=True,
                        help="output image path (format from extension)")
    parser.add_argument("--title", default=None)
    parser.add_argument("--log-x", action="store_true",
                        help="logarithmic x axis")
    parser.add_argument("--log-y", action="store_true",
                        help="logarithmic y axis")
    args = parser.parse_args(argv)
    job = FigureJob(args.input_path, args.kind, args.output_path,
                    title=args.title, log_x=args.log_x, log_y=args.log_y)
    try:
        render(job)
    except SchemaMismatch as exc:
        print(json.dumps({"error": "schema", "column": exc.column,
                          "message": str(exc)}, sort_keys=True),
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
