"""Console entry point: pta-extract {anchors,stream,all} --manifest job.json.

Exit codes mirror the engine CLI: 0 success, 1 bad manifest or model
configuration, 2 unusable dataset or I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import DatasetError, ManifestError, ModelLoadError
from .extract import extract_anchors, extract_stream
from .manifest import ExtractionManifest


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; bad arguments are
    # configuration failures here, so force exit code 1.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    parser = _Parser(
        prog="pta-extract",
        description="encode a labeled dataset into PTAE anchor and stream files",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("anchors", "encode class prompts into an anchors file"),
        ("stream", "encode dataset samples into a labeled stream file"),
        ("all", "anchors, then stream"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True, help="extraction manifest (JSON)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        manifest = ExtractionManifest.from_json(args.manifest)
        written = []
        if args.command in ("anchors", "all"):
            written.append(extract_anchors(manifest))
        if args.command in ("stream", "all"):
            written.append(extract_stream(manifest))
    except (ManifestError, ModelLoadError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (DatasetError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
