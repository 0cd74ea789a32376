#!/usr/bin/env python3
"""Write a synthetic tracking scenario (frames, dates, truth, prompts) to disk.

Example:
    python scripts/make_synthetic_scenario.py --out /tmp/scenario --kind growing
"""

import argparse
import json

from scartrack.synthetic import write_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="target directory")
    parser.add_argument("--kind", choices=("growing", "two_patch"), default="growing")
    parser.add_argument("--frames", type=int, default=24)
    parser.add_argument("--size", type=int, default=256)
    args = parser.parse_args()

    kwargs = {"n_frames": args.frames, "size": args.size}
    summary = write_scenario(args.out, kind=args.kind, **kwargs)
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
