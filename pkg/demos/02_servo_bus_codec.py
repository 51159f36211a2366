"""Servo-bus codec walkthrough: frames, CRC, stuffing, stream recovery.

Run:  python3 demos/02_servo_bus_codec.py
"""

import numpy as np

from telesync.servobus import (
    BusPacket,
    RawTicks,
    StreamDecoder,
    crc16,
    decode_stream,
    encode_packet,
    parse_sync_read_reply,
    status_packet,
    sync_write_positions,
)

# The classic ping: instruction 0x01 to motor id 1.
ping = encode_packet(BusPacket(1, 0x01))
print("ping frame:", ping.hex(" "))
print("crc16 of empty input:", hex(crc16(b"")))

# Payload bytes that look like a frame header get a stuffing byte so the
# receiver can never lose sync inside a frame.
tricky = BusPacket(2, 0x03, b"\xff\xff\xfd\x01")
print("\nstuffed frame:", encode_packet(tricky).hex(" "))

# The decoder is incremental: it keeps partial frames and recovers from
# garbage and corruption by rescanning for the next header.
frame = encode_packet(BusPacket(5, 0x55, b"\x00\x10\x20"))
corrupted = bytearray(frame)
corrupted[-1] ^= 0xFF
stream = b"\xde\xad\xbe\xef" + bytes(corrupted) + frame
packets, tail, diagnostics = decode_stream(stream)
print("\nfed garbage + corrupt frame + good frame:")
print("  decoded :", packets)
print("  tail    :", tail)
for diag in diagnostics:
    print("  diag    :", diag)

# Feeding one byte at a time through the stateful wrapper.
decoder = StreamDecoder()
got = []
for i in range(len(frame)):
    got.extend(decoder.feed(frame[i : i + 1]))
print("\nbyte-at-a-time feed decoded:", got)

# Whole-arm position I/O uses grouped instructions: one frame commands all
# seven motors (6 joints + gripper), one request reads them all back.
ids = [1, 2, 3, 4, 5, 6, 7]
ticks = RawTicks(np.array([2048, 1024, 3072, 2000, 2100, 2200, 1500]))
group_write = sync_write_positions(ids, ticks)
print("\nsync write params length:", len(group_write.params), "bytes for 7 motors")

replies = [status_packet(i, t) for i, t in zip(ids, ticks.ticks)]
parsed = parse_sync_read_reply(replies, ids)
print("parsed positions:", parsed.ticks)
