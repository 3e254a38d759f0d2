"""Simulated digital periphery: serial codecs, control link, streaming."""

from .code8b10b import (DisparityError, InvalidControlCode, InvalidSymbol,
                        RD_NEG, RD_POS, decode_8b10b, encode_8b10b)
from .code64b66b import (CrcMismatch, InvalidSyncHeader, MissingEof,
                         MissingSof, Oversize, decode_64b66b, encode_64b66b,
                         stream_frame, stream_parse)
from .prbs import PrbsChecker, PrbsState, ZeroState, prbs_bytes, prbs_check, prbs_next
from .control import (ConfigCommitFailed, ControlFrame, ControlLink, CrcError,
                      RegisterMap, ReplyFrame, UnmappedAddress, control_transact, crc8)
from .loopback import BerReport, Deadlock, run_loopback

__all__ = [
    "RD_NEG", "RD_POS", "encode_8b10b", "decode_8b10b",
    "InvalidControlCode", "InvalidSymbol", "DisparityError",
    "encode_64b66b", "decode_64b66b", "stream_frame", "stream_parse",
    "InvalidSyncHeader", "CrcMismatch", "MissingSof", "MissingEof", "Oversize",
    "PrbsState", "PrbsChecker", "ZeroState", "prbs_next", "prbs_bytes", "prbs_check",
    "ControlFrame", "ReplyFrame", "RegisterMap", "ControlLink", "crc8",
    "control_transact", "CrcError", "UnmappedAddress", "ConfigCommitFailed",
    "BerReport", "Deadlock", "run_loopback",
]
