"""Reference consumer for the match protocol, runnable as a module.

    python -m sargram.echo_matcher <queue_dir>              zero flow, confidence 1
    python -m sargram.echo_matcher --flow f.srgr <queue>    replay a fixed flow file

The echo mode answers every request with an all-zero displacement field at
full confidence; the replay mode answers with the given flow grid (dims
must match the requests).  Used by tests and smoke runs as a protocol
conformance fixture; real matchers follow the same loop.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import bridge
from .poc import FlowGrid
from .raster import read_raster


def _answer(directory, fixed_flow):
    with open(os.path.join(directory, "request.json"), "r", encoding="utf-8") as fh:
        request = json.load(fh)
    rows = int(request["ref"]["rows"])
    cols = int(request["ref"]["cols"])
    ref = read_raster(os.path.join(directory, request["ref"]["path"]))
    if (ref.rows, ref.cols) != (rows, cols):
        bridge.write_error_response(
            directory,
            f"patch dims {ref.rows}x{ref.cols} do not match sidecar {rows}x{cols}",
        )
        return
    if fixed_flow is not None:
        if (fixed_flow.rows, fixed_flow.cols) != (rows, cols):
            bridge.write_error_response(
                directory,
                f"replay flow dims {fixed_flow.rows}x{fixed_flow.cols} do not "
                f"match request {rows}x{cols}",
            )
            return
        bridge.write_response(directory, fixed_flow)
        return
    flow = FlowGrid(
        displacement=np.zeros((rows, cols, 2), dtype=np.float32),
        confidence=np.ones((rows, cols), dtype=np.float32),
    )
    bridge.write_response(directory, flow)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("queue_dir")
    parser.add_argument("--flow", help="answer every request with this .srgr flow file")
    parser.add_argument("--once", action="store_true",
                        help="exit after one scan instead of waiting for shutdown")
    parser.add_argument("--poll", type=float, default=0.05)
    args = parser.parse_args(argv)

    fixed_flow = None
    if args.flow:
        fixed_flow = FlowGrid.from_raster(read_raster(args.flow))

    queue = args.queue_dir
    while True:
        served = False
        if os.path.isdir(queue):
            for name in sorted(os.listdir(queue)):
                directory = os.path.join(queue, name)
                if not os.path.isdir(directory):
                    continue
                if not os.path.exists(os.path.join(directory, bridge.REQUEST_MARKER)):
                    continue
                if os.path.exists(os.path.join(directory, bridge.RESPONSE_MARKER)):
                    continue
                try:
                    _answer(directory, fixed_flow)
                except Exception as exc:  # never crash on one bad request
                    bridge.write_error_response(directory, f"{type(exc).__name__}: {exc}")
                served = True
        if args.once:
            return 0
        if os.path.exists(os.path.join(queue, bridge.SHUTDOWN_MARKER)):
            return 0
        if not served:
            time.sleep(args.poll)


if __name__ == "__main__":
    sys.exit(main())
