"""Bit-exact codec for servo-bus Protocol 2.0 frames.

Frame layout (bytes):

    FF FF FD 00 | id | len_L len_H | instruction | params... | crc_L crc_H

`len` counts instruction + stuffed params + 2 CRC bytes. Any FF FF FD run
inside the instruction/params region gets a stuffing byte FD appended so a
receiver can never mistake payload for a frame header. CRC-16 uses the
polynomial x^16 + x^15 + x^2 + 1 (0x8005, MSB-first), initial value 0,
computed over everything from the header through the stuffed params.

The decoder is incremental: feed it an arbitrary byte buffer, it consumes
complete valid frames and hands back the unconsumed tail. Corrupt frames
are reported as diagnostics and skipped by resynchronizing on the next
header candidate (skip one byte, rescan).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

HEADER = b"\xff\xff\xfd\x00"
BROADCAST_ID = 0xFE
MAX_ID = 252
MAX_PARAMS = 65528  # keeps the 16-bit length field representable

# Instruction bytes used by the grouped position I/O helpers.
INSTR_PING = 0x01
INSTR_READ = 0x02
INSTR_WRITE = 0x03
INSTR_STATUS = 0x55
INSTR_SYNC_READ = 0x82
INSTR_SYNC_WRITE = 0x83

# Control-table address of the 4-byte goal/present position registers on the
# XL330/XL430 family.
GOAL_POSITION_ADDR = 116
PRESENT_POSITION_ADDR = 132
POSITION_BYTES = 4

DEFAULT_RESOLUTION = 4096  # ticks per revolution


def _make_crc_table(poly: int = 0x8005) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _make_crc_table()


def crc16(data: bytes, crc: int = 0) -> int:
    """CRC-16 (poly 0x8005, init 0) over `data`, continuing from `crc`."""
    for byte in data:
        crc = ((crc << 8) ^ _CRC_TABLE[((crc >> 8) ^ byte) & 0xFF]) & 0xFFFF
    return crc


@dataclass(frozen=True)
class BusPacket:
    """A logical (unstuffed) bus frame."""

    id: int
    instruction: int
    params: bytes = b""

    def __post_init__(self):
        if not (0 <= self.id <= MAX_ID or self.id == BROADCAST_ID):
            raise InputError(f"packet id {self.id} outside 0..{MAX_ID} / {BROADCAST_ID}")
        if not 0 <= self.instruction <= 0xFF:
            raise InputError(f"instruction {self.instruction} is not a byte")
        object.__setattr__(self, "params", bytes(self.params))
        if len(self.params) > MAX_PARAMS:
            raise InputError(f"params too long: {len(self.params)} > {MAX_PARAMS}")


@dataclass(frozen=True)
class RawTicks:
    """Raw motor positions, one tick value per motor channel."""

    ticks: np.ndarray
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        arr = np.asarray(self.ticks, dtype=np.int64)
        object.__setattr__(self, "ticks", arr)
        if arr.ndim != 1:
            raise InputError("ticks must be a 1-D array")
        if self.resolution <= 0:
            raise InputError("resolution must be positive")
        if np.any(arr < 0) or np.any(arr >= self.resolution):
            raise InputError(f"tick values must lie in [0, {self.resolution - 1}]")

    def __len__(self) -> int:
        return len(self.ticks)


def _stuff(body: bytes) -> bytes:
    out = bytearray()
    for b in body:
        out.append(b)
        if out[-3:] == b"\xff\xff\xfd":
            out.append(0xFD)
    return bytes(out)


def _unstuff(body: bytes) -> bytes:
    out = bytearray()
    i, n = 0, len(body)
    while i < n:
        out.append(body[i])
        i += 1
        if out[-3:] == b"\xff\xff\xfd" and i < n and body[i] == 0xFD:
            i += 1  # drop the stuffing byte
    return bytes(out)


def encode_packet(pkt: BusPacket) -> bytes:
    """Serialize one packet to wire bytes. Deterministic."""
    body = _stuff(bytes([pkt.instruction]) + pkt.params)
    length = len(body) + 2
    if length > 0xFFFF:
        raise InputError(f"stuffed frame body too long: {length} > 65535")
    frame = bytearray(HEADER)
    frame.append(pkt.id)
    frame += length.to_bytes(2, "little")
    frame += body
    frame += crc16(bytes(frame)).to_bytes(2, "little")
    return bytes(frame)


def decode_stream(buffer: bytes) -> tuple[list[BusPacket], bytes, list[str]]:
    """Incrementally parse `buffer` into packets.

    Returns (packets, remainder, diagnostics). The remainder is the
    unconsumed tail (a partial frame, or a header prefix); prepend it to the
    next chunk of bytes. Malformed data never raises: CRC mismatches and
    junk bytes become diagnostics and the parser rescans from the next byte.
    """
    packets: list[BusPacket] = []
    diags: list[str] = []
    buf = bytes(buffer)
    pos, n = 0, len(buf)
    while True:
        idx = buf.find(HEADER, pos)
        if idx < 0:
            # Keep the longest tail that could still begin a header.
            keep = 0
            for k in (3, 2, 1):
                if n - pos >= k and buf[n - k : n] == HEADER[:k]:
                    keep = k
                    break
            skipped = n - pos - keep
            if skipped > 0:
                diags.append(f"skipped {skipped} unsynced byte(s)")
            return packets, buf[n - keep :], diags
        if idx > pos:
            diags.append(f"skipped {idx - pos} byte(s) before frame sync")
            pos = idx
        if n - pos < 7:
            return packets, buf[pos:], diags
        pkt_id = buf[pos + 4]
        length = buf[pos + 5] | (buf[pos + 6] << 8)
        if length < 3:
            diags.append(f"invalid length field {length}; resyncing")
            pos += 1
            continue
        total = 7 + length
        if n - pos < total:
            return packets, buf[pos:], diags
        frame = buf[pos : pos + total]
        got = frame[-2] | (frame[-1] << 8)
        want = crc16(frame[:-2])
        if got != want:
            diags.append(f"crc mismatch (got {got:#06x}, want {want:#06x}); resyncing")
            pos += 1
            continue
        if not (0 <= pkt_id <= MAX_ID or pkt_id == BROADCAST_ID):
            diags.append(f"frame with reserved id {pkt_id}; dropped")
            pos += total
            continue
        body = _unstuff(frame[7:-2])
        packets.append(BusPacket(pkt_id, body[0], body[1:]))
        pos += total


class StreamDecoder:
    """Stateful wrapper around decode_stream for feeding a byte stream.

    The remainder is a value owned by one connection handler; do not share
    one decoder across connections.
    """

    def __init__(self):
        self._tail = b""
        self.diagnostics: list[str] = []

    def feed(self, chunk: bytes) -> list[BusPacket]:
        packets, self._tail, diags = decode_stream(self._tail + bytes(chunk))
        self.diagnostics.extend(diags)
        return packets

    @property
    def pending(self) -> bytes:
        return self._tail


def sync_write_positions(
    ids, ticks: RawTicks, address: int = GOAL_POSITION_ADDR
) -> BusPacket:
    """Build the grouped write that commands every motor's position at once."""
    ids = [int(i) for i in ids]
    if not ids:
        raise InputError("sync write needs at least one motor id")
    if len(set(ids)) != len(ids):
        raise InputError(f"duplicate motor ids in {ids}")
    if len(ids) != len(ticks):
        raise InputError(f"{len(ids)} ids but {len(ticks)} tick values")
    params = bytearray()
    params += int(address).to_bytes(2, "little")
    params += POSITION_BYTES.to_bytes(2, "little")
    for motor_id, tick in zip(ids, ticks.ticks):
        if not 0 <= motor_id <= MAX_ID:
            raise InputError(f"motor id {motor_id} outside 0..{MAX_ID}")
        params.append(motor_id)
        params += int(tick).to_bytes(POSITION_BYTES, "little")
    return BusPacket(BROADCAST_ID, INSTR_SYNC_WRITE, bytes(params))


def sync_read_request(ids, address: int = PRESENT_POSITION_ADDR) -> BusPacket:
    """Build the grouped read requesting every motor's present position."""
    ids = [int(i) for i in ids]
    if not ids:
        raise InputError("sync read needs at least one motor id")
    if len(set(ids)) != len(ids):
        raise InputError(f"duplicate motor ids in {ids}")
    params = bytearray()
    params += int(address).to_bytes(2, "little")
    params += POSITION_BYTES.to_bytes(2, "little")
    params += bytes(ids)
    return BusPacket(BROADCAST_ID, INSTR_SYNC_READ, bytes(params))


def status_packet(motor_id: int, position: int, error: int = 0) -> BusPacket:
    """One motor's reply to a sync read: error byte + position, little-endian."""
    return BusPacket(
        motor_id,
        INSTR_STATUS,
        bytes([error]) + int(position).to_bytes(POSITION_BYTES, "little"),
    )


def parse_sync_read_reply(
    packets, ids, resolution: int = DEFAULT_RESOLUTION
) -> RawTicks:
    """Collect per-motor status packets into one tick vector ordered by `ids`."""
    ids = [int(i) for i in ids]
    if len(set(ids)) != len(ids):
        raise InputError(f"duplicate motor ids in {ids}")
    by_id: dict[int, int] = {}
    for pkt in packets:
        if pkt.instruction != INSTR_STATUS:
            raise InputError(f"expected status packets, got instruction {pkt.instruction:#04x}")
        if len(pkt.params) < 1 + POSITION_BYTES:
            raise InputError(f"status packet from id {pkt.id} too short")
        if pkt.params[0] != 0:
            raise InputError(f"motor {pkt.id} reports hardware error {pkt.params[0]:#04x}")
        by_id[pkt.id] = int.from_bytes(pkt.params[1 : 1 + POSITION_BYTES], "little")
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise InputError(f"no status reply from motor id(s) {missing}")
    return RawTicks(np.array([by_id[i] for i in ids], dtype=np.int64), resolution)


def dump_capture(frames, path) -> None:
    """Write frames as a capture file: hex dump, one frame per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(bytes(frame).hex(" ") + "\n")


def load_capture(path) -> list[bytes]:
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                frames.append(bytes.fromhex(line))
    return frames
