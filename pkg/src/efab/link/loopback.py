"""PRBS stream loopback through the fabric register stage.

Mirrors the silicon test: the host frames PRBS payloads into 66-bit
words, the words cross a lock-step wire into the device, the device
validates each frame and pushes its payload through the configured
fabric as 32-bit ready/valid beats (with optional receiver stalls),
then re-frames and returns it.  The host parses and compares.

Faults are injected on the host-to-device wire as (frame index, payload
bit offset) flips; a faulted frame fails its CRC at the device and is
dropped, never reaching the fabric - exactly one CRC-failed frame per
corrupted frame.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..simulator import FabricState, IoFrame
from .code64b66b import CrcMismatch, stream_frame, stream_parse
from .prbs import PrbsState, prbs_bytes

__all__ = ["BerReport", "Deadlock", "run_loopback", "parse_fault_schedule"]

DEADLOCK_BUDGET = 10_000


class Deadlock(Exception):
    pass


@dataclass
class BerReport:
    frames_sent: int = 0
    frames_received: int = 0
    frames_ok: int = 0
    crc_failed_frames: int = 0
    payload_bit_errors: int = 0
    cycles: int = 0
    faults_injected: int = 0

    def table(self) -> str:
        lines = ["metric\tvalue"]
        for key in ("frames_sent", "frames_received", "frames_ok",
                    "crc_failed_frames", "payload_bit_errors",
                    "faults_injected", "cycles"):
            lines.append(f"{key}\t{getattr(self, key)}")
        return "\n".join(lines) + "\n"

    @property
    def clean(self) -> bool:
        return (self.payload_bit_errors == 0 and self.crc_failed_frames == 0
                and self.frames_ok == self.frames_sent)


def parse_fault_schedule(text: str) -> list[tuple[int, int]]:
    """Fault file: one `frame_index bit_offset` pair per line, # comments."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        frame_idx, bit = line.split()
        out.append((int(frame_idx), int(bit)))
    return out


def _inject(words: list[int], bit_offset: int) -> None:
    """Flip one payload bit in flight (bit offset within the frame payload)."""
    block = 1 + bit_offset // 64  # skip SOF
    if block >= len(words) - 1:
        raise ValueError(f"fault bit {bit_offset} beyond frame payload")
    words[block] ^= 1 << (bit_offset % 64)


def _through_fabric(fabric: FabricState, io_map: dict, payload: bytes,
                    stall, cycle0: int) -> tuple[bytes, int]:
    """Clock the payload through the register stage as 32-bit beats."""
    n_beats = (len(payload) + 3) // 4
    padded = payload + b"\x00" * (-len(payload) % 4)
    beats = [int.from_bytes(padded[i * 4:(i + 1) * 4], "little")
             for i in range(n_beats)]
    data_bits = [io_map[f"s_data[{i}]"][1] for i in range(32)]
    bit_valid = io_map["s_valid"][1]
    bit_mready = io_map["m_ready"][1]
    bit_mvalid = io_map["m_valid"][1]
    bit_sready = io_map["s_ready"][1]
    mdata_bits = [io_map[f"m_data[{i}]"][1] for i in range(32)]

    got: list[int] = []
    send = 0
    cycle = cycle0
    idle = 0
    while len(got) < n_beats:
        ready = 0 if stall(cycle) else 1
        io = IoFrame()
        io.east_in[bit_mready] = ready
        if send < n_beats:
            io.east_in[bit_valid] = 1
            beat = beats[send]
            for i in range(32):
                io.east_in[data_bits[i]] = (beat >> i) & 1
        out = fabric.step(io)
        progressed = False
        if send < n_beats and out.east_out.get(bit_sready, 0):
            send += 1
            progressed = True
        if ready and out.east_out.get(bit_mvalid, 0):
            got.append(sum(out.east_out.get(mdata_bits[i], 0) << i
                           for i in range(32)))
            progressed = True
        cycle += 1
        idle = 0 if progressed else idle + 1
        if idle > DEADLOCK_BUDGET:
            raise Deadlock(
                f"no beat progress in {DEADLOCK_BUDGET} cycles "
                f"({send}/{n_beats} sent, {len(got)} received)")
    raw = b"".join(b.to_bytes(4, "little") for b in got)
    return raw[:len(payload)], cycle


def run_loopback(fabric: FabricState, io_map: dict, n_frames: int,
                 frame_len: int, faults=None, stall=None,
                 prbs_seed: int = 1) -> BerReport:
    """Drive PRBS frames host -> wire -> fabric -> wire -> host.

    ``io_map`` maps the loopback design's port names to IO frame bits
    (from FlowResult.io_map()).  ``faults`` is a list of (frame index,
    payload bit offset).  ``stall`` may be None, a set of stalled cycle
    indices, or a probability in (0, 1) of deasserting receiver ready.
    """
    faults_by_frame: dict[int, list[int]] = {}
    for frame_idx, bit in faults or ():
        faults_by_frame.setdefault(frame_idx, []).append(bit)

    rng = random.Random(0xBEEF)
    if stall is None:
        stall_fn = lambda cycle: False  # noqa: E731
    elif isinstance(stall, (set, frozenset)):
        stall_fn = lambda cycle: cycle in stall  # noqa: E731
    else:
        stall_fn = lambda cycle: rng.random() < stall  # noqa: E731

    report = BerReport()
    gen = PrbsState(prbs_seed & 0x7FFFFFFF or 1, 31)
    cycle = 0
    for frame_idx in range(n_frames):
        payload, gen = prbs_bytes(gen, frame_len)
        words = stream_frame(payload)
        report.frames_sent += 1
        cycle += len(words)  # outbound wire, one word per cycle
        for bit in faults_by_frame.get(frame_idx, ()):
            _inject(words, bit)
            report.faults_injected += 1
        try:
            rx_payload = stream_parse(words)
        except CrcMismatch:
            report.crc_failed_frames += 1
            continue
        looped, cycle = _through_fabric(fabric, io_map, rx_payload, stall_fn, cycle)
        back = stream_frame(looped)
        cycle += len(back)  # return wire
        received = stream_parse(back)
        report.frames_received += 1
        errors = sum((a ^ b).bit_count() for a, b in zip(received, payload))
        errors += 8 * abs(len(received) - len(payload))
        report.payload_bit_errors += errors
        if errors == 0:
            report.frames_ok += 1
    report.cycles = cycle
    return report
