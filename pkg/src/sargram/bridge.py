"""File-based protocol for serving flow fields from an external matcher.

One directory per request:

    <queue>/req_00042/
        ref.srgr          reference patch (1 channel)
        src.srgr          source patch (1 channel)
        request.json      origins, dims, image ids, request id
        request.ready     empty marker, written last

The consumer answers in the same directory:

    flow.srgr             3 channels: d_row, d_col, confidence in [0, 1]
    response.json         {request_id, flow}
    response.error.json   {request_id, error}   (instead of flow, on failure)
    response.ready        empty marker, written last

Write order is the atomicity rule: a directory without its marker is
ignored.  The producer writes ``shutdown.ready`` in the queue root when all
requests are answered; long-running consumers exit on seeing it.  Matcher
exit codes are ignored except to detect processes that die without ever
producing a response.
"""

from __future__ import annotations

import json
import os
import subprocess
import time as _time
from dataclasses import dataclass

import numpy as np

from .errors import IoFailure, MalformedResponse, SpawnFailure, Timeout
from .poc import FlowGrid
from .raster import Raster, read_raster, write_raster
from .tiling import PatchPair

REQUEST_MARKER = "request.ready"
RESPONSE_MARKER = "response.ready"
SHUTDOWN_MARKER = "shutdown.ready"


@dataclass
class MatchRequest:
    request_id: str
    directory: str
    ref_patch: str
    src_patch: str
    sidecar: str


@dataclass
class MatchResponse:
    request_id: str
    flow: str


def _touch(path) -> None:
    with open(path, "wb"):
        pass


def write_request(pair: PatchPair, directory) -> MatchRequest:
    """Materialize one request directory; the ready marker is written last."""
    try:
        os.makedirs(directory, exist_ok=True)
        ref_path = os.path.join(directory, "ref.srgr")
        src_path = os.path.join(directory, "src.srgr")
        sidecar_path = os.path.join(directory, "request.json")
        write_raster(pair.ref_pixels, ref_path)
        write_raster(pair.src_pixels, src_path)
        request_id = os.path.basename(os.path.normpath(directory))
        sidecar = {
            "request_id": request_id,
            "ref": {
                "path": "ref.srgr",
                "origin": list(pair.spec.ref_origin),
                "rows": pair.spec.height,
                "cols": pair.spec.width,
                "image_id": pair.ref_id,
            },
            "src": {
                "path": "src.srgr",
                "origin": list(pair.src_origin),
                "rows": pair.spec.height,
                "cols": pair.spec.width,
                "image_id": pair.src_id,
            },
            "src_col_reversed": pair.src_col_reversed,
        }
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _touch(os.path.join(directory, REQUEST_MARKER))
    except OSError as exc:
        raise IoFailure(f"cannot write request into {directory}: {exc}") from exc
    return MatchRequest(
        request_id=request_id, directory=str(directory),
        ref_patch=ref_path, src_patch=src_path, sidecar=sidecar_path,
    )


def _validate_flow(raster_obj: Raster, expected_rows: int, expected_cols: int) -> FlowGrid:
    if raster_obj.channels != 3:
        raise MalformedResponse(f"flow must have 3 channels, found {raster_obj.channels}")
    if (raster_obj.rows, raster_obj.cols) != (expected_rows, expected_cols):
        raise MalformedResponse(
            f"flow dims {raster_obj.rows}x{raster_obj.cols} do not match "
            f"reference patch {expected_rows}x{expected_cols}"
        )
    conf = raster_obj.values[:, :, 2]
    if np.any(np.isnan(conf)) or float(conf.min()) < 0.0 or float(conf.max()) > 1.0:
        raise MalformedResponse("confidence out of range [0, 1]")
    disp = raster_obj.values[:, :, 0:2]
    matched = conf > 0
    if matched.any() and not np.all(np.isfinite(disp[matched])):
        raise MalformedResponse("displacement not finite where confidence > 0")
    return FlowGrid(displacement=disp.copy(), confidence=conf.copy())


def read_response(directory, timeout: float = 60.0, poll: float = 0.05) -> FlowGrid:
    """Poll for the response marker, then validate and load the flow grid."""
    marker = os.path.join(directory, RESPONSE_MARKER)
    deadline = _time.monotonic() + timeout
    while not os.path.exists(marker):
        if _time.monotonic() > deadline:
            raise Timeout(f"no response in {directory} within {timeout:.1f}s")
        _time.sleep(poll)
    error_path = os.path.join(directory, "response.error.json")
    if os.path.exists(error_path):
        with open(error_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        raise MalformedResponse(str(doc.get("error", "matcher reported an error")))
    response_path = os.path.join(directory, "response.json")
    if not os.path.exists(response_path):
        raise MalformedResponse("response marker present but response.json missing")
    with open(response_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    flow_path = os.path.join(directory, doc.get("flow", "flow.srgr"))
    with open(os.path.join(directory, "request.json"), "r", encoding="utf-8") as fh:
        request = json.load(fh)
    expected = (request["ref"]["rows"], request["ref"]["cols"])
    return _validate_flow(read_raster(flow_path), *expected)


def write_response(directory, flow: FlowGrid) -> MatchResponse:
    """Consumer-side helper: answer a request directory with a flow grid."""
    flow_path = os.path.join(directory, "flow.srgr")
    write_raster(flow.to_raster(), flow_path)
    request_id = os.path.basename(os.path.normpath(directory))
    with open(os.path.join(directory, "response.json"), "w", encoding="utf-8") as fh:
        json.dump({"request_id": request_id, "flow": "flow.srgr"}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _touch(os.path.join(directory, RESPONSE_MARKER))
    return MatchResponse(request_id=request_id, flow=flow_path)


def write_error_response(directory, message: str) -> None:
    request_id = os.path.basename(os.path.normpath(directory))
    with open(os.path.join(directory, "response.error.json"), "w", encoding="utf-8") as fh:
        json.dump({"request_id": request_id, "error": message}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _touch(os.path.join(directory, RESPONSE_MARKER))


@dataclass
class BatchMatchResult:
    """Per-pair outcomes in input order; failures never abort the batch."""

    flows: list            # FlowGrid or None per input pair
    failures: list         # (index, error message) tuples

    @property
    def ok(self) -> bool:
        return not self.failures


def run_external_matcher(command: str, pairs, queue_dir, parallelism: int = 2,
                         timeout: float = 120.0, poll: float = 0.05) -> BatchMatchResult:
    """Serve ``pairs`` to an external matcher process through the protocol.

    The command is launched once with the queue directory appended as its
    final argument; at most ``parallelism`` requests are outstanding at any
    time.  Results come back in input order.  A process that exits without
    ever answering anything raises SpawnFailure; later per-pair problems
    (timeouts, malformed responses) are collected, not raised.
    """
    pairs = list(pairs)
    os.makedirs(queue_dir, exist_ok=True)
    try:
        proc = subprocess.Popen(
            f"{command} {queue_dir}",
            shell=True,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
    except OSError as exc:
        raise SpawnFailure(f"cannot launch matcher command {command!r}: {exc}") from exc

    flows = [None] * len(pairs)
    failures = []
    answered = 0
    try:
        next_to_write = 0
        pending = []  # (index, directory, deadline)
        while answered < len(pairs):
            while next_to_write < len(pairs) and len(pending) < parallelism:
                directory = os.path.join(queue_dir, f"req_{next_to_write:05d}")
                write_request(pairs[next_to_write], directory)
                pending.append([next_to_write, directory, _time.monotonic() + timeout])
                next_to_write += 1

            progressed = False
            for entry in list(pending):
                index, directory, deadline = entry
                if os.path.exists(os.path.join(directory, RESPONSE_MARKER)):
                    try:
                        flows[index] = read_response(directory, timeout=0.1, poll=poll)
                    except (MalformedResponse, Timeout) as exc:
                        failures.append((index, f"{type(exc).__name__}: {exc}"))
                    pending.remove(entry)
                    answered += 1
                    progressed = True
                elif _time.monotonic() > deadline:
                    failures.append((index, f"Timeout: no response within {timeout:.1f}s"))
                    pending.remove(entry)
                    answered += 1
                    progressed = True

            if progressed:
                continue
            if proc.poll() is not None:
                # the matcher died; give stragglers one grace interval
                _time.sleep(10 * poll)
                alive = any(
                    os.path.exists(os.path.join(d, RESPONSE_MARKER)) for _, d, _ in pending
                )
                if not alive:
                    if all(f is None for f in flows) and not failures:
                        raise SpawnFailure(
                            f"matcher command {command!r} exited with code "
                            f"{proc.returncode} without answering any request"
                        )
                    for index, directory, _ in pending:
                        failures.append((index, "Timeout: matcher exited early"))
                        answered += 1
                    pending.clear()
                    continue
            _time.sleep(poll)
    finally:
        _touch(os.path.join(queue_dir, SHUTDOWN_MARKER))
        if proc.poll() is None:
            try:
                proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    failures.sort(key=lambda item: item[0])
    return BatchMatchResult(flows=flows, failures=failures)
