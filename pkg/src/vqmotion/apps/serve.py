"""Realtime steering endpoint: newline-delimited JSON over a websocket.

One stepper thread owns the simulation and paces frames against absolute
wall-clock deadlines. Connection handlers never touch the simulation;
they drop parsed commands into a latest-wins mailbox and receive
broadcast frame lines through per-client bounded queues (slow readers
lose old frames, never stall the stepper).

Client messages: {"type":"input","heading":[x,y],"speed":v} |
{"type":"reset"} | {"type":"pause"}. Non-unit headings are normalized
here; a command older than the staleness window stops influencing the
blend, leaving the policy's own prediction in charge. "pause" toggles
stepping; any input or reset resumes it.
"""

import asyncio
import json
import logging
import threading
import time
from dataclasses import dataclass

import numpy as np

from ..sim import SimDivergence
from ..steering import Mailbox, SteeringRuntime, user_input_to_target

log = logging.getLogger(__name__)

FRAME_HZ = 20.0
STALE_AFTER = 1.0


@dataclass(frozen=True)
class Command:
    """A validated, normalized user steering command."""

    heading: tuple[float, float]
    speed: float
    stamp: float


def parse_client_line(line: str):
    """One NDJSON client line -> ("input", heading, speed) | ("reset",) | ("pause",).

    Raises ValueError with a human-readable reason on anything malformed.
    """
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad json: {exc.msg}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise ValueError("message must be an object with a type field")
    kind = msg["type"]
    if kind == "reset":
        return ("reset",)
    if kind == "pause":
        return ("pause",)
    if kind != "input":
        raise ValueError(f"unknown message type {kind!r}")
    try:
        heading = np.asarray(msg["heading"], dtype=np.float64)
        speed = float(msg["speed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError("input needs numeric heading [x, y] and speed") from exc
    if heading.shape != (2,) or not np.isfinite(heading).all():
        raise ValueError("heading must be two finite numbers")
    if not np.isfinite(speed) or speed < 0.0:
        raise ValueError("speed must be finite and nonnegative")
    norm = float(np.linalg.norm(heading))
    if norm > 0.0:
        heading = heading / norm
    return ("input", heading, speed)


def frame_line(t: float, state, engine, indices, target: dict) -> str:
    """Assemble one frame broadcast line (with trailing newline)."""
    pos, ang, _, _ = engine.body_world(state)
    bodies = [[float(x), float(y), float(a)]
              for (x, y), a in zip(pos[0], ang[0])]
    payload = {
        "type": "frame",
        "t": float(t),
        "bodies": bodies,
        "target": target,
        "indices": [int(i) for i in np.atleast_1d(indices)],
    }
    return json.dumps(payload) + "\n"


def error_line(msg: str) -> str:
    return json.dumps({"type": "error", "msg": msg}) + "\n"


class Stepper(threading.Thread):
    """Simulation thread: ticks the runtime, paces and emits frame lines."""

    def __init__(self, make_runtime, broadcast, hz: float = FRAME_HZ,
                 stale_after: float = STALE_AFTER):
        super().__init__(daemon=True, name="steering-stepper")
        self._make_runtime = make_runtime
        self._broadcast = broadcast
        self._frame_dt = 1.0 / hz
        self._stale_after = stale_after
        self.inbox = Mailbox()
        self._halt = threading.Event()
        self._running = threading.Event()
        self._running.set()
        self._reset = threading.Event()

    def submit(self, heading, speed) -> None:
        self.inbox.put(Command(tuple(float(h) for h in heading), float(speed),
                               time.monotonic()))
        self._running.set()

    def request_reset(self) -> None:
        self._reset.set()
        self._running.set()

    def toggle_pause(self) -> None:
        if self._running.is_set():
            self._running.clear()
        else:
            self._running.set()

    def stop(self) -> None:
        self._halt.set()
        self._running.set()

    def _fresh_command(self) -> Command | None:
        cmd = self.inbox.peek()
        if cmd is None or time.monotonic() - cmd.stamp > self._stale_after:
            return None
        return cmd

    def _target_echo(self, runtime) -> dict:
        cmd = self._fresh_command()
        if cmd is not None:
            return {"heading": [cmd.heading[0], cmd.heading[1]], "speed": cmd.speed}
        theta = float(runtime.state.root_angle[0])
        return {"heading": [float(np.cos(theta)), float(np.sin(theta))], "speed": 0.0}

    def run(self) -> None:
        runtime = self._make_runtime()
        deadline = time.monotonic()
        while not self._halt.is_set():
            if not self._running.wait(timeout=0.5):
                deadline = time.monotonic()
                continue
            if self._halt.is_set():
                break
            if self._reset.is_set():
                self._reset.clear()
                runtime = self._make_runtime()
                deadline = time.monotonic()
            cmd = self._fresh_command()
            g_user = None
            if cmd is not None:
                g_user = user_input_to_target(
                    np.array(cmd.heading), cmd.speed, runtime.state, runtime.cfg)
            try:
                out = runtime.tick(g_user)
            except SimDivergence:
                log.warning("simulation diverged; resetting the character")
                self._broadcast(error_line("simulation diverged; resetting"))
                runtime = self._make_runtime()
                deadline = time.monotonic()
                continue
            t0 = runtime.t - len(out["states"]) * runtime.frame_dt
            for i, state in enumerate(out["states"]):
                deadline += self._frame_dt
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    deadline = time.monotonic()  # never race to catch up
                self._broadcast(frame_line(
                    t0 + (i + 1) * runtime.frame_dt, state, runtime.engine,
                    out["indices"], self._target_echo(runtime)))


class SteeringServer:
    """Websocket front of one Stepper; start()/stop() manage a loop thread."""

    def __init__(self, make_runtime, host: str = "127.0.0.1", port: int = 0,
                 hz: float = FRAME_HZ, stale_after: float = STALE_AFTER,
                 queue_limit: int = 16):
        self._host = host
        self._port = port
        self._queue_limit = queue_limit
        self._clients: set[asyncio.Queue] = set()
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._server = None
        self.stepper = Stepper(make_runtime, self._broadcast_threadsafe,
                               hz=hz, stale_after=stale_after)

    # -- broadcast plumbing ---------------------------------------------------

    def _broadcast_threadsafe(self, line: str) -> None:
        loop = self._loop
        if loop is not None and not loop.is_closed():
            loop.call_soon_threadsafe(self._fanout, line)

    def _fanout(self, line: str) -> None:
        for q in self._clients:
            if q.full():
                q.get_nowait()  # latest frames win over a slow reader
            q.put_nowait(line)

    # -- connection handling --------------------------------------------------

    async def _handle(self, ws) -> None:
        q: asyncio.Queue = asyncio.Queue(maxsize=self._queue_limit)
        self._clients.add(q)
        sender = asyncio.create_task(self._send_loop(ws, q))

        def enqueue(line: str) -> None:
            if q.full():
                q.get_nowait()
            q.put_nowait(line)

        try:
            async for raw in ws:
                text = raw.decode() if isinstance(raw, bytes) else raw
                for line in text.splitlines():
                    if not line.strip():
                        continue
                    try:
                        cmd = parse_client_line(line)
                    except ValueError as exc:
                        enqueue(error_line(str(exc)))
                        continue
                    if cmd[0] == "input":
                        self.stepper.submit(cmd[1], cmd[2])
                    elif cmd[0] == "reset":
                        self.stepper.request_reset()
                    else:
                        self.stepper.toggle_pause()
        finally:
            self._clients.discard(q)
            sender.cancel()

    async def _send_loop(self, ws, q: asyncio.Queue) -> None:
        while True:
            line = await q.get()
            await ws.send(line)

    # -- lifecycle --------------------------------------------------------------

    async def _start_async(self) -> None:
        from websockets.asyncio.server import serve

        self._server = await serve(self._handle, self._host, self._port)

    def start(self) -> tuple[str, int]:
        """Bind, launch the loop thread and stepper; returns (host, port)."""
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._loop.run_forever,
                                        daemon=True, name="steering-server")
        self._thread.start()
        asyncio.run_coroutine_threadsafe(self._start_async(), self._loop).result(10)
        sock = next(iter(self._server.sockets))
        self.stepper.start()
        host, port = sock.getsockname()[:2]
        log.info("steering endpoint on ws://%s:%d", host, port)
        return host, port

    def stop(self) -> None:
        self.stepper.stop()
        self.stepper.join(timeout=5)
        if self._loop is None:
            return

        async def _close():
            self._server.close()
            await self._server.wait_closed()

        asyncio.run_coroutine_threadsafe(_close(), self._loop).result(10)
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=5)
        self._loop.close()
        self._loop = None


def serve_forever(make_runtime, host: str = "127.0.0.1", port: int = 8765,
                  hz: float = FRAME_HZ) -> None:
    """Blocking entry point used by the command line."""
    server = SteeringServer(make_runtime, host=host, port=port, hz=hz)
    server.start()
    try:
        while True:
            time.sleep(1.0)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
