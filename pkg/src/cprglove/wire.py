"""Binary UDP frame protocol, plus session replay.

Packet layout (little-endian), 748 bytes with both sides present:

    offset  size  field
    0       4     magic "CPR1"
    4       1     version = 1
    5       1     flags (bit0 palm present, bit1 dorsum present)
    6       4     seq, u32
    10      8     timestamp_us, u64
    18      1     rows = 13
    19      1     cols = 14
    20      364   palm payload, 182 x u16 counts row-major
    384     364   dorsum payload, 182 x u16

The single timestamp field carries the palm timestamp; decoding assigns it
to both sides (the scan model samples both sides on one clock).
"""

from __future__ import annotations

import socket
import struct
import time
from dataclasses import dataclass

import numpy as np

from .core import (ADC_MAX, COLS, ROWS, CprgloveError, DualSample, SessionLog,
                   Side, TactileFrame)

MAGIC = b"CPR1"
VERSION = 1
HEADER = struct.Struct("<4sBBIQBB")
SIDE_BYTES = ROWS * COLS * 2
PACKET_LEN = HEADER.size + 2 * SIDE_BYTES  # 748
DEFAULT_PORT = 47911

FLAG_PALM = 0x01
FLAG_DORSUM = 0x02


class BadMagic(CprgloveError):
    pass


class BadVersion(CprgloveError):
    pass


class Truncated(CprgloveError):
    pass


class CountOutOfRange(CprgloveError):
    pass


class InvalidSample(CprgloveError):
    pass


class SocketError(CprgloveError):
    pass


class UnpairedFrame(CprgloveError):
    pass


def encode_packet(sample: DualSample) -> bytes:
    for frame in (sample.palm, sample.dorsum):
        if frame.counts.shape != (ROWS, COLS):
            raise InvalidSample(f"grid must be {ROWS}x{COLS}")
        if frame.counts.min() < 0 or frame.counts.max() > ADC_MAX:
            raise InvalidSample("counts out of 13-bit range")
    header = HEADER.pack(
        MAGIC, VERSION, FLAG_PALM | FLAG_DORSUM,
        sample.seq & 0xFFFFFFFF, sample.palm.timestamp_us, ROWS, COLS,
    )
    palm = sample.palm.counts.astype("<u2").tobytes()
    dorsum = sample.dorsum.counts.astype("<u2").tobytes()
    return header + palm + dorsum


def decode_packet(data: bytes) -> DualSample:
    if len(data) < HEADER.size:
        raise Truncated(f"packet of {len(data)} bytes is shorter than the header")
    magic, version, flags, seq, t_us, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    if rows != ROWS or cols != COLS:
        raise Truncated(f"unexpected grid dims {rows}x{cols}")
    sides = [s for s, bit in ((Side.PALM, FLAG_PALM), (Side.DORSUM, FLAG_DORSUM))
             if flags & bit]
    expected = HEADER.size + len(sides) * SIDE_BYTES
    if len(data) != expected:
        raise Truncated(f"expected {expected} bytes, got {len(data)}")
    if sides != [Side.PALM, Side.DORSUM]:
        raise InvalidSample("dual-side packets are required")
    frames = {}
    off = HEADER.size
    for side in sides:
        counts = np.frombuffer(data, dtype="<u2", count=ROWS * COLS, offset=off)
        counts = counts.reshape(ROWS, COLS).astype(np.int32)
        if counts.max() > ADC_MAX:
            raise CountOutOfRange(f"count {counts.max()} exceeds {ADC_MAX}")
        frames[side] = TactileFrame(side, counts, t_us)
        off += SIDE_BYTES
    return DualSample(frames[Side.PALM], frames[Side.DORSUM], seq)


@dataclass
class SendStats:
    sent: int = 0
    errors: int = 0


def stream(source, addr, pace: str = "fast") -> SendStats:
    """Send one packet per sample to (host, port).

    pace="realtime" sleeps to honor the inter-frame timestamps;
    pace="fast" sends back-to-back.
    """
    stats = SendStats()
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    prev_t = None
    try:
        for sample in source:
            if pace == "realtime" and prev_t is not None:
                time.sleep(max(0, (sample.timestamp_us - prev_t) / 1e6))
            prev_t = sample.timestamp_us
            try:
                sock.sendto(encode_packet(sample), addr)
                stats.sent += 1
            except OSError as exc:
                stats.errors += 1
                raise SocketError(f"send failed after {stats.sent} packets: {exc}") from exc
    finally:
        sock.close()
    return stats


class Receiver:
    """UDP receiver delivering samples in arrival order, counting seq gaps
    and out-of-order arrivals instead of crashing on them."""

    def __init__(self, port: int = DEFAULT_PORT, host: str = "127.0.0.1"):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self.sock.bind((host, port))
        except OSError as exc:
            raise SocketError(f"cannot bind {host}:{port}: {exc}") from exc
        self.out_of_order = 0
        self.gaps = 0
        self.decode_errors = 0
        self._last_seq = None

    def recv(self, timeout_s: float = 1.0) -> DualSample | None:
        self.sock.settimeout(timeout_s)
        try:
            data, _ = self.sock.recvfrom(2048)
        except socket.timeout:
            return None
        try:
            sample = decode_packet(data)
        except CprgloveError:
            self.decode_errors += 1
            return None
        if self._last_seq is not None:
            if sample.seq < self._last_seq:
                self.out_of_order += 1
            elif sample.seq > self._last_seq + 1:
                self.gaps += sample.seq - self._last_seq - 1
        self._last_seq = max(self._last_seq or 0, sample.seq)
        return sample

    def close(self):
        self.sock.close()


def replay(log: SessionLog, speed: float = float("inf")):
    """Reconstruct the DualSample stream from a session log's frame records.

    Palm and dorsum records pair by nearest timestamp; emission honors the
    original timing divided by `speed` (infinite speed iterates
    immediately).
    """
    palms = log.frames(Side.PALM)
    dorsums = log.frames(Side.DORSUM)
    if not palms or not dorsums:
        raise UnpairedFrame("log contains no pairable frame records")
    dts = np.array([f.timestamp_us for f in dorsums], dtype=np.int64)
    used = set()
    start_wall = time.perf_counter()
    t0 = palms[0].timestamp_us
    for seq, palm in enumerate(palms):
        i = int(np.searchsorted(dts, palm.timestamp_us))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(dts) and j not in used:
                d = abs(int(dts[j]) - palm.timestamp_us)
                if best is None or d < best[0]:
                    best = (d, j)
        if best is None or best[0] > 70_000:
            raise UnpairedFrame(
                f"no dorsum frame within one period of palm t={palm.timestamp_us}"
            )
        used.add(best[1])
        if speed != float("inf"):
            due = (palm.timestamp_us - t0) / 1e6 / speed
            lag = due - (time.perf_counter() - start_wall)
            if lag > 0:
                time.sleep(lag)
        yield DualSample(palm, dorsums[best[1]], seq)
