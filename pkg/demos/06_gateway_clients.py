"""Gateway walkthrough: a scripted operator and observer drive the live loop.

Run:  python3 demos/06_gateway_clients.py
"""

import asyncio
import json

from telesync.gateway import FrameReader, GatewayServer, RealtimeRunner, encode_frame
from telesync.harness import planar_reach_task
from telesync.harness.runner import build_loop


class Client:
    def __init__(self, name):
        self.name = name
        self.frames = FrameReader()

    async def connect(self, port, role):
        self.reader, self.writer = await asyncio.open_connection("127.0.0.1", port)
        await self.send({"type": "hello", "role": role})

    async def send(self, obj):
        self.writer.write(encode_frame(json.dumps(obj)))
        await self.writer.drain()

    async def recv(self, want=None):
        while True:
            chunk = await self.reader.read(4096)
            for text in self.frames.feed(chunk):
                msg = json.loads(text)
                if want is None or msg["type"] == want:
                    return msg


async def main():
    task = planar_reach_task()
    runner = RealtimeRunner(build_loop(task), rate_hz=20.0, task=task)
    gateway = GatewayServer(runner, "127.0.0.1", 0)
    await gateway.start()
    loop_task = asyncio.create_task(runner.run())
    port = gateway.bound_port
    print(f"gateway listening on 127.0.0.1:{port}")

    operator = Client("operator")
    await operator.connect(port, "operator")
    snapshot = await operator.recv("state")
    print("first message on connect:", snapshot["type"], "| mode:", snapshot["mode"])

    # The pedal engages intervention (the leader mirrors the follower while
    # autonomous, so the handover guard passes).
    await operator.send({"type": "pedal", "pressed": True})
    changed = await operator.recv("mode_changed")
    print(f"mode change broadcast: {changed['from']} -> {changed['to']}")

    # Moving the leader now drives the follower.
    await operator.send({"type": "leader_cmd", "q": [0.5, 1.2], "gripper": 0.3})
    for _ in range(30):
        state = await operator.recv("state")
        if abs(state["follower_q"][0] - 0.5) < 0.02:
            break
    print("follower chased the leader to:", [round(x, 3) for x in state["follower_q"]])

    # Releasing the pedal hands control back to the (absent) policy: the
    # follower holds and the loop reports the missing command.
    await operator.send({"type": "pedal", "pressed": False})
    changed = await operator.recv("mode_changed")
    print(f"mode change broadcast: {changed['from']} -> {changed['to']}")

    # Role rules: an observer cannot press the pedal.
    observer = Client("observer")
    await observer.connect(port, "observer")
    await observer.recv("state")
    await observer.send({"type": "pedal", "pressed": True})
    error = await observer.recv("error")
    print("observer pressing the pedal:", error["code"], "-", error["detail"])

    runner.stop()
    await loop_task
    await gateway.stop()
    print(f"loop served {len(runner.tick_wall_times)} ticks")


if __name__ == "__main__":
    asyncio.run(main())
