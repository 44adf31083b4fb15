"""Real-time teleoperation bridge.

Hosts three things on one port: the `/bridge` socket endpoint speaking the
state/control frame protocol, a static mount for the browser UI bundle, and
a read-only `/runs/{id}/curve` metrics endpoint. The training loop runs in
its own thread and is authoritative over all learning state; the network
side only exchanges messages with it through two single-direction channels
(override inbound, state frames outbound), so a slow or absent client can
never block a control tick.
"""

import asyncio
import http
import json
import logging
import mimetypes
import os
import threading
import time

from websockets.asyncio.server import serve as ws_serve
from websockets.datastructures import Headers
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Response

from . import runio
from .config import RunConfig
from .driver import OnlineTrainer
from .errors import HildriveError
from .expert import OverrideChannel, OverrideMessage

log = logging.getLogger("hildrive.service")

CLOSE_UNKNOWN_TYPE = 4000
CLOSE_SINGLE_OPERATOR = 4001

DEFAULT_UI_DIR = os.path.join(os.path.dirname(os.path.dirname(
    os.path.dirname(os.path.abspath(__file__)))), "frontend", "dist")

PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>hildrive</title></head>
<body><h1>hildrive bridge</h1>
<p>No UI bundle found. Build the frontend (frontend/README.md) or connect a
client directly to <code>/bridge</code>.</p></body></html>
"""


class BridgeServer:
    """One training run plus its network face."""

    def __init__(self, rc: RunConfig, run_dir: str, ui_dir: str | None = None,
                 trainer: OnlineTrainer | None = None):
        self.rc = rc
        self.run_dir = run_dir
        self.run_id = os.path.basename(os.path.normpath(run_dir))
        self.ui_dir = ui_dir if ui_dir is not None else DEFAULT_UI_DIR
        self.channel = OverrideChannel()
        self.trainer = trainer or OnlineTrainer(
            rc, run_dir, channel=self.channel, frame_sink=self.push_frame)
        if trainer is not None:
            self.channel = trainer.channel or self.channel
            trainer.frame_sink = self.push_frame
        self.loop: asyncio.AbstractEventLoop | None = None
        self.frames: asyncio.Queue | None = None
        self.operator = None
        self.train_error: BaseException | None = None

    # -- frames from the training thread --------------------------------------

    def push_frame(self, frame: dict) -> None:
        """Called by the trainer thread once per tick; never blocks it."""
        loop = self.loop
        if loop is None or self.frames is None:
            return
        loop.call_soon_threadsafe(self._offer_frame, frame)

    def _offer_frame(self, frame: dict) -> None:
        # latest-frame mailbox: a slow client sees fresh state, not a backlog
        assert self.frames is not None
        while self.frames.full():
            try:
                self.frames.get_nowait()
            except asyncio.QueueEmpty:
                break
        self.frames.put_nowait(frame)

    # -- bridge protocol -------------------------------------------------------

    async def handle_client(self, ws) -> None:
        if self.operator is not None:
            await ws.close(CLOSE_SINGLE_OPERATOR, "single-operator")
            return
        self.operator = ws
        log.info("operator connected from %s", ws.remote_address)
        sender = asyncio.create_task(self._send_frames(ws))
        try:
            async for raw in ws:
                if not await self._handle_message(ws, raw):
                    break
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            self.operator = None
            # a vanished operator must not leave a stale takeover engaged
            self.channel.clear()
            log.info("operator disconnected")

    async def _handle_message(self, ws, raw) -> bool:
        try:
            msg = json.loads(raw)
            kind = msg.get("type")
        except (json.JSONDecodeError, AttributeError):
            await ws.close(CLOSE_UNKNOWN_TYPE, "malformed frame")
            return False
        if kind == "control":
            try:
                override = OverrideMessage(
                    takeover=bool(msg["takeover"]),
                    steer=float(msg.get("steer", 0.0)),
                    accel=float(msg.get("accel", 0.0)),
                    client_time_ms=int(msg.get("client_time_ms", 0)))
            except (KeyError, TypeError, ValueError):
                await ws.close(CLOSE_UNKNOWN_TYPE, "bad control frame")
                return False
            self.channel.push(override, stamp=time.monotonic())
            return True
        if kind == "ping":
            await ws.send(json.dumps({"type": "pong",
                                      "t": msg.get("t"),
                                      "server_time_ms": int(time.time() * 1e3)}))
            return True
        if kind == "pong":
            return True
        await ws.close(CLOSE_UNKNOWN_TYPE, f"unknown frame type {kind!r}")
        return False

    async def _send_frames(self, ws) -> None:
        assert self.frames is not None
        while True:
            frame = await self.frames.get()
            try:
                await ws.send(json.dumps(frame))
            except ConnectionClosed:
                return

    # -- plain HTTP ------------------------------------------------------------

    @staticmethod
    def _response(status: http.HTTPStatus, ctype: str, body: bytes) -> Response:
        # built by hand: Headers is multi-valued, so patching the headers of
        # connection.respond() appends duplicates instead of replacing
        headers = Headers([("Content-Type", ctype),
                           ("Content-Length", str(len(body)))])
        return Response(status.value, status.phrase, headers, body)

    def process_request(self, connection, request):
        path = request.path.split("?", 1)[0]
        if path == "/bridge":
            return None  # continue the socket handshake
        if path.startswith("/runs/"):
            return self._serve_curve(connection, path)
        return self._serve_static(connection, path)

    def _serve_curve(self, connection, path: str):
        parts = [p for p in path.split("/") if p]
        if len(parts) != 3 or parts[2] != "curve":
            return self._response(http.HTTPStatus.NOT_FOUND, "text/plain",
                                  b"not found\n")
        if parts[1] != self.run_id:
            return self._response(http.HTTPStatus.NOT_FOUND, "text/plain",
                                  f"unknown run {parts[1]!r}\n".encode())
        reports = runio.read_eval_reports(self.run_dir)
        lines = [runio.CURVE_HEADER]
        for r in reports:
            lines.append(",".join([
                str(r.checkpoint_step), str(r.n_episodes),
                repr(r.success_rate), repr(r.out_rate), repr(r.timeout_rate),
                repr(r.crash_rate), repr(r.mean_cost), repr(r.mean_reward),
                repr(r.mean_completion), repr(r.mean_interventions)]))
        body = ("\n".join(lines) + "\n").encode()
        return self._response(http.HTTPStatus.OK, "text/csv", body)

    def _serve_static(self, connection, path: str):
        if path in ("", "/"):
            path = "/index.html"
        rel = os.path.normpath(path.lstrip("/"))
        if rel.startswith(".."):
            return self._response(http.HTTPStatus.FORBIDDEN, "text/plain",
                                  b"forbidden\n")
        full = os.path.join(self.ui_dir, rel)
        if not os.path.isfile(full):
            if path == "/index.html":
                return self._response(http.HTTPStatus.OK,
                                      "text/html; charset=utf-8",
                                      PLACEHOLDER_PAGE.encode())
            return self._response(http.HTTPStatus.NOT_FOUND, "text/plain",
                                  b"not found\n")
        with open(full, "rb") as fh:
            body = fh.read()
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        return self._response(http.HTTPStatus.OK, ctype, body)

    # -- lifecycle ---------------------------------------------------------------

    async def run(self, host: str, port: int, ready: threading.Event | None = None,
                  steps: int | None = None) -> None:
        self.loop = asyncio.get_running_loop()
        self.frames = asyncio.Queue(maxsize=4)

        def train():
            try:
                self.trainer.train(steps)
            except BaseException as e:  # surfaced after the server stops
                self.train_error = e
                log.exception("training loop failed")

        worker = threading.Thread(target=train, name="train-loop", daemon=True)
        async with ws_serve(self.handle_client, host, port,
                            process_request=self.process_request) as server:
            log.info("bridge listening on ws://%s:%d/bridge", host, port)
            worker.start()
            if ready is not None:
                ready.set()
            try:
                await asyncio.get_running_loop().run_in_executor(
                    None, worker.join)
            finally:
                # unblock the executor thread stuck in join(), or the event
                # loop can never shut down after a cancellation / Ctrl-C
                self.trainer.request_stop()
                server.close()
        worker.join()
        if self.train_error is not None:
            raise self.train_error


def serve(rc: RunConfig, host: str = "127.0.0.1", port: int = 8700) -> int:
    """CLI entry: host the bridge and run the configured training loop."""
    if not rc.run.run_dir:
        raise HildriveError("no run directory: pass --out or set run.run_dir")
    server = BridgeServer(rc, rc.run.run_dir)
    try:
        asyncio.run(server.run(host, port))
    except KeyboardInterrupt:
        log.info("interrupted; shutting down")
        return 0
    except OSError as e:
        raise HildriveError(f"cannot bind {host}:{port}: {e}") from e
    return 0
