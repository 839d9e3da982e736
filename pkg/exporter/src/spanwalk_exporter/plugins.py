"""Line-protocol plug-in filters: one request line in, one answer line out.

Run as `python3 -m spanwalk_exporter.plugins infill` or `... qg`.  Both
are deterministic stand-ins so pipelines can be wired and tested without
a generation model.
"""

from __future__ import annotations

import argparse
import sys

MASK = "<mask>"


def infill_line(line: str) -> str:
    """Join span texts with a fixed connective, preserving every span."""
    return line.replace(MASK, "and")


def qg_line(line: str, separator: str = " | ") -> str:
    answer = line.split(separator, 1)[0]
    head = " ".join(answer.split()[:8])
    return f"What connects {head}?" if head else "What is described here?"


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="spanwalk-export-plugin")
    ap.add_argument("mode", choices=["infill", "qg"])
    ap.add_argument("--separator", default=" | ")
    args = ap.parse_args(argv)
    handle = infill_line if args.mode == "infill" else (
        lambda line: qg_line(line, args.separator)
    )
    for line in sys.stdin:
        print(handle(line.rstrip("\n")), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
