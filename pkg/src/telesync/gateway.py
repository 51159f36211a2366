"""Streaming network gateway: telemetry out, operator/policy commands in.

One JSON message schema, two framings on one listening port:

- length-delimited text for stream-socket clients: ASCII decimal byte
  length, a newline, then the JSON payload;
- WebSocket text frames for the browser cockpit (the server sniffs the
  first bytes: an HTTP GET upgrades to WebSocket).

Message types: state, leader_cmd, pedal, policy_action, mode_changed,
episode_event, error — plus `hello`, the role declaration a client sends
after connecting ({"type": "hello", "role": "policy"|"operator"|"observer"}).
Clients that never say hello are observers (read-only).

Concurrency: every client connection runs its own reader and sender tasks;
all mutation funnels into the control loop's event queue and is applied by
the single realtime runner task. Telemetry fan-out happens in the sender
tasks, never blocking the loop: each client has a bounded outbox (oldest
`state` messages are dropped first; a client whose outbox fills with
undroppable messages is disconnected).
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .episodes import (
    EpisodeRecorder,
    Outcome,
    Scenario,
    Step,
    episode_filename,
    write_episode,
)
from .errors import InputError
from .harness.tasks import SUCCESS_LOGIT, reward_logit
from .kinematics import JointVector
from .loop import ControlLoop, LeaderCommand
from .sync import PedalEvent

ROLES = ("policy", "operator", "observer")
SERVER_TYPES = ("state", "mode_changed", "episode_event", "error")
CLIENT_TYPES = ("hello", "leader_cmd", "pedal", "policy_action", "episode_event")
OUTBOX_LIMIT = 64

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


# --- length-delimited text framing -----------------------------------------


def encode_frame(payload: str) -> bytes:
    data = payload.encode("utf-8")
    return str(len(data)).encode("ascii") + b"\n" + data


class FrameReader:
    """Incremental reader for the length-delimited framing."""

    def __init__(self, limit: int = 1 << 20):
        self._buf = bytearray()
        self._limit = limit

    def feed(self, chunk: bytes) -> list[str]:
        self._buf += chunk
        out = []
        while True:
            nl = self._buf.find(b"\n")
            if nl < 0:
                if len(self._buf) > 32:
                    raise InputError("frame header too long")
                return out
            header = bytes(self._buf[:nl])
            try:
                length = int(header)
            except ValueError:
                raise InputError(f"bad frame length {header!r}") from None
            if length < 0 or length > self._limit:
                raise InputError(f"frame length {length} out of bounds")
            if len(self._buf) < nl + 1 + length:
                return out
            payload = bytes(self._buf[nl + 1 : nl + 1 + length])
            del self._buf[: nl + 1 + length]
            out.append(payload.decode("utf-8"))


# --- WebSocket server-side framing ------------------------------------------


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode_text(payload: str) -> bytes:
    data = payload.encode("utf-8")
    header = bytearray([0x81])  # FIN + text
    n = len(data)
    if n < 126:
        header.append(n)
    elif n < 1 << 16:
        header.append(126)
        header += n.to_bytes(2, "big")
    else:
        header.append(127)
        header += n.to_bytes(8, "big")
    return bytes(header) + data


def ws_encode_close(code: int = 1000) -> bytes:
    payload = code.to_bytes(2, "big")
    return bytes([0x88, len(payload)]) + payload


def ws_encode_pong(payload: bytes = b"") -> bytes:
    return bytes([0x8A, len(payload)]) + payload


class WSFrameReader:
    """Incremental parser for client-to-server (masked) WebSocket frames.

    Yields ("text", str), ("ping", bytes) and ("close", bytes) events;
    fragmented text messages are reassembled.
    """

    def __init__(self, limit: int = 1 << 20):
        self._buf = bytearray()
        self._fragments: list[bytes] = []
        self._limit = limit

    def feed(self, chunk: bytes) -> list[tuple[str, object]]:
        self._buf += chunk
        events: list[tuple[str, object]] = []
        while True:
            frame = self._try_parse()
            if frame is None:
                return events
            fin, opcode, payload = frame
            if opcode in (1, 2, 0):  # text / binary / continuation
                self._fragments.append(payload)
                if fin:
                    whole = b"".join(self._fragments)
                    self._fragments = []
                    events.append(("text", whole.decode("utf-8")))
            elif opcode == 8:
                events.append(("close", payload))
            elif opcode == 9:
                events.append(("ping", payload))
            # pong (10) is ignored

    def _try_parse(self):
        buf = self._buf
        if len(buf) < 2:
            return None
        fin = bool(buf[0] & 0x80)
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        pos = 2
        if length == 126:
            if len(buf) < pos + 2:
                return None
            length = int.from_bytes(buf[pos : pos + 2], "big")
            pos += 2
        elif length == 127:
            if len(buf) < pos + 8:
                return None
            length = int.from_bytes(buf[pos : pos + 8], "big")
            pos += 8
        if length > self._limit:
            raise InputError(f"websocket frame of {length} bytes exceeds limit")
        mask = b"\x00\x00\x00\x00"
        if masked:
            if len(buf) < pos + 4:
                return None
            mask = bytes(buf[pos : pos + 4])
            pos += 4
        if len(buf) < pos + length:
            return None
        raw = bytes(buf[pos : pos + length])
        del self._buf[: pos + length]
        if masked:
            raw = bytes(b ^ mask[i % 4] for i, b in enumerate(raw))
        return fin, opcode, raw


async def ws_handshake(reader: asyncio.StreamReader, writer: asyncio.StreamWriter, first: bytes) -> bool:
    """Complete the HTTP upgrade; `first` is the already-read request prefix."""
    request = bytearray(first)
    while b"\r\n\r\n" not in request:
        chunk = await reader.read(1024)
        if not chunk:
            return False
        request += chunk
        if len(request) > 16384:
            return False
    headers = {}
    for line in bytes(request).split(b"\r\n")[1:]:
        if b":" in line:
            key, _, value = line.partition(b":")
            headers[key.strip().lower()] = value.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None:
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        return False
    accept = ws_accept_key(key.decode("ascii"))
    writer.write(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode("ascii")
    )
    await writer.drain()
    return True


# --- client bookkeeping ------------------------------------------------------


@dataclass
class ClientConn:
    client_id: int
    writer: asyncio.StreamWriter
    websocket: bool
    role: str = "observer"
    seq: int = 0
    outbox: deque = field(default_factory=deque)
    wakeup: asyncio.Event = field(default_factory=asyncio.Event)
    closed: bool = False
    pedal_pressed: bool = False

    def enqueue(self, message: dict) -> None:
        """Stamp a sequence number and queue; never blocks the caller."""
        if self.closed:
            return
        if len(self.outbox) >= OUTBOX_LIMIT:
            dropped = False
            for i, queued in enumerate(self.outbox):
                if queued["type"] == "state":
                    del self.outbox[i]
                    dropped = True
                    break
            if not dropped:
                # Backlog full of undroppable messages: the client is too
                # slow to keep; drop the connection, never stall the loop.
                self.closed = True
                self.wakeup.set()
                return
        self.seq += 1
        message = dict(message)
        message["seq"] = self.seq
        self.outbox.append(message)
        self.wakeup.set()


class GatewayServer:
    """Accepts clients on one port, speaking both framings."""

    _STOP = object()

    def __init__(self, runner: "RealtimeRunner", host: str = "127.0.0.1", port: int = 7447):
        self.runner = runner
        self.host = host
        self.port = port
        self._server: asyncio.AbstractServer | None = None
        self._clients: dict[int, ClientConn] = {}
        self._next_id = 0
        self._publish_queue: asyncio.Queue = asyncio.Queue()
        self._fanout_task: asyncio.Task | None = None
        runner.attach_gateway(self)

    async def start(self) -> None:
        self._server = await asyncio.start_server(self._handle_conn, self.host, self.port)
        self._fanout_task = asyncio.create_task(self._fanout_loop())

    @property
    def bound_port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._fanout_task is not None:
            self._publish_queue.put_nowait(self._STOP)
            await self._fanout_task
            self._fanout_task = None
        for client in list(self._clients.values()):
            client.closed = True
            client.wakeup.set()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    @property
    def client_count(self) -> int:
        return len(self._clients)

    def broadcast(self, message: dict) -> None:
        """O(1) for the caller: the control loop hands the message to the
        fan-out task and returns, so its tick latency does not depend on
        how many clients are connected."""
        self._publish_queue.put_nowait(message)

    async def _fanout_loop(self) -> None:
        while True:
            message = await self._publish_queue.get()
            if message is self._STOP:
                return
            for client in self._clients.values():
                client.enqueue(message)

    async def _handle_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self._next_id += 1
        client = ClientConn(self._next_id, writer, websocket=False)
        # Sniff the framing: browsers open with an HTTP GET immediately;
        # stream-socket clients may silently wait for the first snapshot, so
        # fall back to the raw framing after a short window.
        try:
            first = await asyncio.wait_for(reader.read(4), timeout=0.3)
        except asyncio.TimeoutError:
            first = b""
        except (ConnectionError, asyncio.IncompleteReadError):
            writer.close()
            return
        if first.startswith(b"GET"):
            client.websocket = True
            if not await ws_handshake(reader, writer, first):
                writer.close()
                return
            first = b""
        self._clients[client.client_id] = client
        sender = asyncio.create_task(self._send_loop(client))
        # Contract: the first message a client receives is a state snapshot.
        client.enqueue(self.runner.state_message())
        try:
            await self._read_loop(client, reader, first)
        finally:
            client.closed = True
            client.wakeup.set()
            await sender
            self._clients.pop(client.client_id, None)
            self.runner.on_disconnect(client)
            writer.close()

    async def _read_loop(self, client: ClientConn, reader: asyncio.StreamReader, first: bytes):
        frames = WSFrameReader() if client.websocket else FrameReader()
        pending = first
        while not client.closed:
            if pending:
                chunk, pending = pending, b""
            else:
                try:
                    chunk = await reader.read(4096)
                except (ConnectionError, asyncio.CancelledError):
                    return
                if not chunk:
                    return
            try:
                items = frames.feed(chunk)
            except (InputError, UnicodeDecodeError) as exc:
                client.enqueue(self._error("bad-frame", str(exc)))
                return
            for item in items:
                if client.websocket:
                    kind, payload = item
                    if kind == "close":
                        return
                    if kind == "ping":
                        client.enqueue({"type": "_pong", "payload": payload})
                        continue
                    text = payload
                else:
                    text = item
                self._handle_text(client, text)

    def _handle_text(self, client: ClientConn, text: str) -> None:
        try:
            message = json.loads(text)
            if not isinstance(message, dict):
                raise ValueError("message must be a JSON object")
        except ValueError as exc:
            client.enqueue(self._error("bad-json", str(exc)))
            return
        mtype = message.get("type")
        if mtype == "hello":
            role = message.get("role", "observer")
            if role not in ROLES:
                client.enqueue(self._error("bad-payload", f"unknown role {role!r}"))
                return
            client.role = role
            client.enqueue(self.runner.state_message())
            return
        if mtype in SERVER_TYPES and mtype != "episode_event":
            client.enqueue(self._error("server-type", f"{mtype} is server-generated"))
            return
        if mtype not in CLIENT_TYPES:
            client.enqueue(self._error("unknown-type", f"unknown message type {mtype!r}"))
            return
        error = self.runner.handle_client_message(client, mtype, message)
        if error is not None:
            client.enqueue(self._error(*error))

    @staticmethod
    def _error(code: str, detail: str) -> dict:
        return {"type": "error", "code": code, "detail": detail}

    async def _send_loop(self, client: ClientConn) -> None:
        while True:
            if not client.outbox:
                if client.closed:
                    break
                client.wakeup.clear()
                await client.wakeup.wait()
                continue
            message = client.outbox.popleft()
            try:
                if message.get("type") == "_pong":
                    data = ws_encode_pong(message["payload"])
                else:
                    payload = json.dumps(message, sort_keys=True, separators=(",", ":"))
                    data = ws_encode_text(payload) if client.websocket else encode_frame(payload)
                client.writer.write(data)
                await client.writer.drain()
            except (ConnectionError, RuntimeError):
                client.closed = True
                break
        if client.websocket and not client.writer.is_closing():
            try:
                client.writer.write(ws_encode_close())
                await client.writer.drain()
            except (ConnectionError, RuntimeError):
                pass


# --- the realtime runner ------------------------------------------------------


class RealtimeRunner:
    """Steps the control loop on a wall-clock schedule and speaks telemetry.

    Owns the only reference that mutates the loop. Inbound client messages
    are translated into loop events here; the loop applies them at the top
    of the next tick.
    """

    def __init__(
        self,
        loop: ControlLoop,
        rate_hz: float,
        task=None,
        episodes_dir=None,
        policy=None,
    ):
        if rate_hz <= 0:
            raise InputError("rate_hz must be positive")
        self.loop = loop
        self.period = 1.0 / rate_hz
        self.rate_hz = rate_hz
        self.task = task
        self.episodes_dir = Path(episodes_dir) if episodes_dir else None
        self.policy = policy  # optional in-process policy (else network-driven)
        self.gateway: GatewayServer | None = None
        self._pending_action: JointVector | None = None
        self._recorder: EpisodeRecorder | None = None
        self._episode_count = 0
        self._episode_id: str | None = None
        self._goal = None
        self._last_snapshot = None
        self._running = False
        self.tick_wall_times: list[float] = []
        self.tick_durations: list[float] = []

    def attach_gateway(self, gateway: GatewayServer) -> None:
        self.gateway = gateway

    # -- inbound ---------------------------------------------------------

    def handle_client_message(self, client: ClientConn, mtype: str, message: dict):
        """Translate one client message into loop events.

        Returns None on success or (code, detail) for an error reply.
        """
        now = time.monotonic()
        if mtype == "pedal":
            if client.role != "operator":
                return ("role-violation", f"pedal requires operator role, not {client.role}")
            pressed = message.get("pressed")
            if not isinstance(pressed, bool):
                return ("bad-payload", "pedal.pressed must be a boolean")
            client.pedal_pressed = pressed
            self.loop.post(PedalEvent(pressed, timestamp=now))
            return None
        if mtype == "leader_cmd":
            if client.role != "operator":
                return ("role-violation", f"leader_cmd requires operator role, not {client.role}")
            jv = self._parse_joints(message)
            if jv is None:
                return ("bad-payload", "leader_cmd needs q[] of the arm's joint count")
            self.loop.post(LeaderCommand(jv.q, jv.gripper, timestamp=now))
            return None
        if mtype == "policy_action":
            if client.role != "policy":
                return ("role-violation", f"policy_action requires policy role, not {client.role}")
            jv = self._parse_joints(message)
            if jv is None:
                return ("bad-payload", "policy_action needs q[] of the arm's joint count")
            # Applied only while autonomous; otherwise accepted and unused.
            self._pending_action = jv
            return None
        if mtype == "episode_event":
            if client.role != "operator":
                return ("role-violation", f"episode control requires operator role, not {client.role}")
            event = message.get("event")
            if event == "start":
                return self._start_episode()
            if event == "end":
                return self._end_episode(aborted=True)
            return ("bad-payload", f"episode_event.event must be start|end, not {event!r}")
        return ("unknown-type", f"unhandled type {mtype}")

    def _parse_joints(self, message: dict) -> JointVector | None:
        q = message.get("q")
        joints = self.loop.engine.limits.joint_count
        if not isinstance(q, list) or len(q) != joints:
            return None
        try:
            return JointVector(
                np.asarray(q, dtype=float), float(message.get("gripper", 0.0))
            )
        except (InputError, ValueError, TypeError):
            return None

    def on_disconnect(self, client: ClientConn) -> None:
        # Fail safe: a vanished operator cannot hold the pedal down.
        if client.pedal_pressed:
            self.loop.post(PedalEvent(False, timestamp=time.monotonic()))

    # -- episodes ----------------------------------------------------------

    def _start_episode(self):
        if self.task is None:
            return ("bad-payload", "no task configured; cannot record")
        if self._recorder is not None:
            return ("bad-payload", "an episode is already recording")
        self._episode_count += 1
        self._episode_id = f"{self.task.name}-live-{self._episode_count:04d}"
        self._recorder = EpisodeRecorder(
            self._episode_id,
            self.task.name,
            Scenario.ID,
            self.task.joint_count,
            self.rate_hz,
            self.task.max_steps,
        )
        rng = np.random.default_rng(self._episode_count)
        self._goal = self.task.sample_goal(Scenario.ID, rng)
        self._broadcast({"type": "episode_event", "event": "start", "id": self._episode_id})
        return None

    def _end_episode(self, outcome: Outcome | None = None, aborted: bool = False):
        if self._recorder is None:
            return ("bad-payload", "no episode recording")
        recorder, episode_id = self._recorder, self._episode_id
        self._recorder = None
        final: Outcome | None = None
        try:
            if aborted and outcome is None:
                outcome = Outcome.FAILURE
            record = recorder.finalize(outcome)
            final = record.outcome
            if self.episodes_dir is not None:
                self.episodes_dir.mkdir(parents=True, exist_ok=True)
                write_episode(record, self.episodes_dir / episode_filename(record))
        except InputError:
            pass  # empty or inconsistent recording: discard
        self._broadcast(
            {
                "type": "episode_event",
                "event": "end",
                "id": episode_id,
                "outcome": final.value if final is not None else None,
            }
        )
        return None

    # -- the tick ----------------------------------------------------------

    def _policy_provider(self):
        if self.policy is not None and self.task is not None and self._goal is not None:
            obs = self.task.observe(self.loop.follower.read_positions(), self._goal)
            return self.policy.act(obs)
        action, self._pending_action = self._pending_action, None
        return action

    def tick(self) -> dict:
        """One control period: apply events, step, record, broadcast."""
        started = time.perf_counter()
        snap = self.loop.step(self._policy_provider)
        self._last_snapshot = snap
        for change in snap.mode_changes:
            self._broadcast(
                {
                    "type": "mode_changed",
                    "from": change.from_mode.value,
                    "to": change.to_mode.value,
                    "reason": change.reason,
                }
            )
        if self._recorder is not None and self.task is not None and snap.source is not None:
            obs = self.task.observe(snap.follower_q, self._goal)
            next_obs = self.task.observe(self.loop.follower.read_positions(), self._goal)
            reward = 1 if reward_logit(next_obs, self.task) > SUCCESS_LOGIT else 0
            self._recorder.append_step(
                Step(
                    t=self._recorder.step_count,
                    time=snap.tick * self.period,
                    observation=obs,
                    action=snap.follower_target,
                    source=snap.source,
                    mode=snap.mode,
                    reward=reward,
                )
            )
            if reward == 1:
                self._end_episode(Outcome.SUCCESS)
            elif self._recorder.step_count >= self.task.max_steps:
                self._end_episode(Outcome.TRUNCATED)
        state = self.state_message()
        self._broadcast(state)
        self.tick_durations.append(time.perf_counter() - started)
        self.tick_wall_times.append(time.monotonic())
        return state

    def _broadcast(self, message: dict) -> None:
        if self.gateway is not None:
            self.gateway.broadcast(message)

    def state_message(self) -> dict:
        snap = self._last_snapshot
        if snap is None:
            follower_q = self.loop.follower.read_positions()
            leader_q = self.loop.engine.leader_to_follower(self.loop.leader.read_ticks())
            mode = self.loop.engine.mode
            target = follower_q
            tick = self.loop.tick_index
        else:
            follower_q, leader_q = snap.follower_q, snap.leader_q
            mode, target, tick = snap.mode, snap.follower_target, snap.tick
        return {
            "type": "state",
            "t": tick,
            "mode": mode.value,
            "leader_q": [float(x) for x in leader_q.q],
            "follower_q": [float(x) for x in follower_q.q],
            "follower_target": [float(x) for x in target.q],
            "gripper": float(follower_q.gripper),
            "task": self.task.name if self.task is not None else None,
            "episode_id": self._episode_id if self._recorder is not None else None,
        }

    # -- scheduling ----------------------------------------------------------

    async def run(self, duration: float | None = None) -> None:
        """Drift-corrected fixed-rate loop; runs until stopped or `duration`."""
        self._running = True
        aio = asyncio.get_running_loop()
        deadline = aio.time() + self.period
        end_time = None if duration is None else aio.time() + duration
        while self._running:
            delay = deadline - aio.time()
            if delay > 0:
                await asyncio.sleep(delay)
            self.tick()
            deadline += self.period
            if deadline < aio.time() - 5 * self.period:
                # Fell far behind (suspended process); resynchronize.
                deadline = aio.time() + self.period
            if end_time is not None and aio.time() >= end_time:
                break
        self._running = False

    def stop(self) -> None:
        self._running = False
