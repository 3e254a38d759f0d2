"""Packet-based memory-mapped control link and the register crossbar.

Requests are 10 octets (opcode, 32-bit address, 32-bit data, CRC-8) and
replies 6 (status, 32-bit data, CRC-8).  The register map exposes a
version block at 0x0000_0000 and the fabric configuration/status block
at 0x0001_0000: a bitstream staging window, control/status words, four
32-bit user-input buses driving the fabric's east inputs and four
32-bit user-output buses sampling its east outputs.

``ControlLink`` carries these frames over a virtual 8B10B wire, one
symbol per cycle per direction, K28.5-delimited.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .. import __version__
from ..bitstream import BitstreamError, crc32, decode_bitstream
from ..fabric import FabricLayout
from ..netlist import CombinationalLoop
from ..simulator import FabricState, IoFrame
from .code8b10b import K28_5, RD_NEG, decode_8b10b, encode_8b10b

__all__ = [
    "crc8", "ControlFrame", "ReplyFrame", "RegisterMap", "ControlLink",
    "CrcError", "UnmappedAddress", "ConfigCommitFailed",
    "OP_READ", "OP_WRITE", "ST_OK", "ST_CRC", "ST_UNMAPPED", "ST_CONFIG",
    "A_GIT", "A_REV", "A_SCRATCH", "A_CTRL", "A_STATUS", "A_WINDOW",
    "A_USER_IN", "A_USER_OUT", "GIT_HASH_WORD", "REVISION_WORD",
]

OP_READ = 0x01
OP_WRITE = 0x02

ST_OK = 0x00
ST_CRC = 0x01
ST_UNMAPPED = 0x02
ST_CONFIG = 0x03

GIT_HASH_WORD = crc32(f"efab {__version__}".encode())
REVISION_WORD = 0x0001_0000


class CrcError(Exception):
    pass


class UnmappedAddress(Exception):
    pass


class ConfigCommitFailed(Exception):
    def __init__(self, cause: Exception):
        super().__init__(f"bitstream commit failed: {cause}")
        self.cause = cause


def crc8(data: bytes) -> int:
    """CRC-8, polynomial 0x07, init 0x00, no reflection or final xor."""
    crc = 0
    for b in data:
        crc ^= b
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
    return crc


@dataclass
class ControlFrame:
    opcode: int
    address: int
    data: int = 0

    def to_bytes(self) -> bytes:
        body = struct.pack("<BII", self.opcode, self.address, self.data)
        return body + bytes([crc8(body)])

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ControlFrame":
        if len(raw) != 10:
            raise CrcError(f"request frame must be 10 octets, got {len(raw)}")
        if crc8(raw[:9]) != raw[9]:
            raise CrcError("request CRC-8 mismatch")
        op, addr, data = struct.unpack("<BII", raw[:9])
        return cls(op, addr, data)


@dataclass
class ReplyFrame:
    status: int
    data: int = 0

    def to_bytes(self) -> bytes:
        body = struct.pack("<BI", self.status, self.data)
        return body + bytes([crc8(body)])

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ReplyFrame":
        if len(raw) != 6 or crc8(raw[:5]) != raw[5]:
            raise CrcError("reply CRC-8 mismatch")
        status, data = struct.unpack("<BI", raw[:5])
        return cls(status, data)


# register addresses
A_GIT = 0x0000_0000
A_REV = 0x0000_0004
A_SCRATCH = 0x0000_0008
EFPGA = 0x0001_0000
A_CTRL = EFPGA + 0x00       # bit0 fabric reset (pulse), bit1 config commit
A_STATUS = EFPGA + 0x04     # bit0 loaded, bit1 error, error code in 15:8
A_WINDOW = EFPGA + 0x08     # write: append word to staging; read: staged octets
A_USER_IN = tuple(EFPGA + 0x10 + 4 * i for i in range(4))
A_USER_OUT = tuple(EFPGA + 0x20 + 4 * i for i in range(4))


class RegisterMap:
    """Crossbar endpoint state: version block plus the eFPGA block."""

    def __init__(self, layout: FabricLayout | None = None):
        self.layout = layout
        self.scratch = 0
        self.staging = bytearray()
        self.user_in = [0, 0, 0, 0]
        self.fabric: FabricState | None = None
        self.last_out: IoFrame | None = None
        self.error_code = 0

    # -- word access --------------------------------------------------------

    def read(self, addr: int) -> int:
        if addr == A_GIT:
            return GIT_HASH_WORD
        if addr == A_REV:
            return REVISION_WORD
        if addr == A_SCRATCH:
            return self.scratch
        if addr == A_CTRL:
            return 0
        if addr == A_STATUS:
            return ((1 if self.fabric is not None else 0)
                    | (2 if self.error_code else 0)
                    | (self.error_code & 0xFF) << 8)
        if addr == A_WINDOW:
            return len(self.staging)
        if addr in A_USER_IN:
            return self.user_in[A_USER_IN.index(addr)]
        if addr in A_USER_OUT:
            if self.last_out is None:
                return 0
            return self.last_out.out_word("east", 32 * A_USER_OUT.index(addr), 32)
        raise UnmappedAddress(f"read from unmapped address {addr:#010x}")

    def write(self, addr: int, value: int) -> None:
        value &= 0xFFFFFFFF
        if addr in (A_GIT, A_REV, A_STATUS) or addr in A_USER_OUT:
            return  # read-only words ignore writes
        if addr == A_SCRATCH:
            self.scratch = value
            return
        if addr == A_WINDOW:
            self.staging += struct.pack("<I", value)
            return
        if addr == A_CTRL:
            if value & 0b01:
                if self.fabric is not None:
                    self.fabric.reset()
                    self.last_out = None
            if value & 0b10:
                self._commit()
            return
        if addr in A_USER_IN:
            self.user_in[A_USER_IN.index(addr)] = value
            return
        raise UnmappedAddress(f"write to unmapped address {addr:#010x}")

    def _commit(self) -> None:
        if self.layout is None:
            self.error_code = ST_CONFIG
            raise ConfigCommitFailed(ValueError("no layout attached"))
        image = bytes(self.staging)
        try:
            configs = decode_bitstream(image, self.layout)
            self.fabric = FabricState(self.layout, configs)
        except (BitstreamError, CombinationalLoop) as exc:
            self.error_code = ST_CONFIG
            self.fabric = None
            raise ConfigCommitFailed(exc) from exc
        self.staging.clear()
        self.error_code = 0
        self.last_out = None

    # -- fabric clocking ------------------------------------------------------

    def step_fabric(self, cycles: int = 1) -> None:
        """Clock the loaded fabric; user-input buses drive east inputs."""
        if self.fabric is None:
            raise ConfigCommitFailed(ValueError("no bitstream committed"))
        for _ in range(cycles):
            io = IoFrame()
            for w, value in enumerate(self.user_in):
                io.set_in_word("east", 32 * w, 32, value)
            self.last_out = self.fabric.step(io)

    def dump(self) -> str:
        """Register dump as a text table."""
        rows = [("git_hash", A_GIT), ("revision", A_REV), ("scratch", A_SCRATCH),
                ("status", A_STATUS), ("window", A_WINDOW)]
        rows += [(f"user_in{i}", a) for i, a in enumerate(A_USER_IN)]
        rows += [(f"user_out{i}", a) for i, a in enumerate(A_USER_OUT)]
        lines = ["register\taddress\tvalue"]
        for name, addr in rows:
            lines.append(f"{name}\t{addr:#010x}\t{self.read(addr):#010x}")
        return "\n".join(lines) + "\n"


def control_transact(frame: ControlFrame, regs: RegisterMap) -> ReplyFrame:
    """Execute one frame against the map; CRC is assumed already checked
    when the frame was parsed off the wire."""
    if frame.opcode == OP_READ:
        return ReplyFrame(ST_OK, regs.read(frame.address))
    if frame.opcode == OP_WRITE:
        regs.write(frame.address, frame.data)
        return ReplyFrame(ST_OK)
    raise CrcError(f"unknown opcode {frame.opcode:#04x}")


def _execute_raw(raw: bytes, regs: RegisterMap) -> ReplyFrame:
    try:
        frame = ControlFrame.from_bytes(raw)
    except CrcError:
        return ReplyFrame(ST_CRC)
    try:
        return control_transact(frame, regs)
    except UnmappedAddress:
        return ReplyFrame(ST_UNMAPPED)
    except ConfigCommitFailed:
        return ReplyFrame(ST_CONFIG)
    except CrcError:
        return ReplyFrame(ST_CRC)


class ControlLink:
    """Two-endpoint virtual 8B10B link: host requester, device register map.

    One 10-bit symbol crosses per cycle per direction.  Frames are
    delimited by a K28.5 comma; both directions track running disparity
    and any coding error surfaces as an exception.
    """

    REQUEST_LEN = 10
    REPLY_LEN = 6

    def __init__(self, regs: RegisterMap):
        self.regs = regs
        self.cycles = 0
        # each simplex wire keeps its own running disparity at both ends
        self._rd = {"host_tx": RD_NEG, "dev_rx": RD_NEG,
                    "dev_tx": RD_NEG, "host_rx": RD_NEG}

    def _wire(self, payload: bytes, tx: str, rx: str) -> bytes:
        """K28.5-delimited octets across one wire, one symbol per cycle."""
        out = bytearray()
        started = False
        for i, b in enumerate([None] + list(payload)):
            self.cycles += 1
            if b is None:
                sym, self._rd[tx] = encode_8b10b(K28_5, True, self._rd[tx])
            else:
                sym, self._rd[tx] = encode_8b10b(b, False, self._rd[tx])
            byte, is_k, self._rd[rx] = decode_8b10b(sym, self._rd[rx])
            if is_k and byte == K28_5:
                started = True
                out.clear()
            elif started:
                out.append(byte)
        return bytes(out)

    def transact(self, opcode: int, address: int, data: int = 0) -> ReplyFrame:
        """Drive one request through the wire and return the parsed reply."""
        frame = ControlFrame(opcode, address, data)
        rx = self._wire(frame.to_bytes(), "host_tx", "dev_rx")
        if len(rx) != self.REQUEST_LEN:
            raise CrcError(f"device collected {len(rx)} octets, expected 10")
        reply = _execute_raw(rx, self.regs)
        raw = self._wire(reply.to_bytes(), "dev_tx", "host_rx")
        return ReplyFrame.from_bytes(raw)

    def read(self, address: int) -> int:
        reply = self.transact(OP_READ, address)
        self._raise_for_status(reply)
        return reply.data

    def write(self, address: int, data: int) -> None:
        self._raise_for_status(self.transact(OP_WRITE, address, data))

    @staticmethod
    def _raise_for_status(reply: ReplyFrame) -> None:
        if reply.status == ST_UNMAPPED:
            raise UnmappedAddress("device reported unmapped address")
        if reply.status == ST_CRC:
            raise CrcError("device reported CRC error")
        if reply.status == ST_CONFIG:
            raise ConfigCommitFailed(ValueError("device reported commit failure"))
