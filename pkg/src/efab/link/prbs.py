"""PRBS generation and checking (PRBS31 default, PRBS7 for exhaustive tests).

Fibonacci LFSR: output = state[k-1] ^ state[tap-1], shifted in at the
bottom.  The checker self-synchronises on the incoming stream and
declares lock after k consecutive correctly-predicted bits; once locked
it free-runs, so every corrupted bit is counted exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["TAPS", "ZeroState", "PrbsState", "PrbsChecker",
           "prbs_next", "prbs_bytes", "prbs_check"]

# polynomial x^k + x^tap + 1
TAPS = {7: 6, 9: 5, 11: 9, 15: 14, 23: 18, 31: 28}


class ZeroState(Exception):
    pass


@dataclass
class PrbsState:
    """LFSR register; never all-zero."""

    lfsr: int = 1
    k: int = 31

    def __post_init__(self):
        if self.k not in TAPS:
            raise ValueError(f"no PRBS{self.k} polynomial defined")
        if self.lfsr == 0 or self.lfsr >> self.k:
            raise ZeroState(f"PRBS{self.k} state must be a nonzero {self.k}-bit value")


def _step(lfsr: int, k: int) -> tuple[int, int]:
    bit = ((lfsr >> (k - 1)) ^ (lfsr >> (TAPS[k] - 1))) & 1
    return bit, ((lfsr << 1) | bit) & ((1 << k) - 1)


def prbs_next(state: PrbsState, nbits: int) -> tuple[list[int], PrbsState]:
    """Generate nbits; returns (bits, advanced state)."""
    if state.lfsr == 0:
        raise ZeroState("PRBS generator state is zero")
    lfsr = state.lfsr
    bits = []
    for _ in range(nbits):
        bit, lfsr = _step(lfsr, state.k)
        bits.append(bit)
    return bits, PrbsState(lfsr, state.k)


def prbs_bytes(state: PrbsState, n: int) -> tuple[bytes, PrbsState]:
    """n octets of PRBS data, LSB-first within each octet."""
    bits, state = prbs_next(state, 8 * n)
    out = bytearray(n)
    for i, b in enumerate(bits):
        out[i >> 3] |= b << (i & 7)
    return bytes(out), state


class PrbsChecker:
    """Self-synchronising error counter for a PRBS bit stream."""

    def __init__(self, k: int = 31):
        if k not in TAPS:
            raise ValueError(f"no PRBS{k} polynomial defined")
        self.k = k
        self.shift = 0
        self.filled = 0
        self.clean = 0
        self.locked = False
        self.errors = 0
        self.bits_checked = 0

    def feed(self, bits) -> int:
        """Consume bits; returns errors seen so far (counted after lock)."""
        k = self.k
        mask = (1 << k) - 1
        for rx in bits:
            if self.locked:
                predicted, self.shift = _step(self.shift, k)
                self.bits_checked += 1
                if predicted != (rx & 1):
                    self.errors += 1
                continue
            if self.filled >= k:
                predicted, _ = _step(self.shift, k)
                self.clean = self.clean + 1 if predicted == (rx & 1) else 0
                if self.clean >= k:
                    self.locked = True
            else:
                self.filled += 1
            self.shift = ((self.shift << 1) | (rx & 1)) & mask
        return self.errors


def prbs_check(bits, k: int = 31) -> tuple[int, bool]:
    """One-shot check; returns (error count after lock, locked flag)."""
    chk = PrbsChecker(k)
    chk.feed(bits)
    return chk.errors, chk.locked
