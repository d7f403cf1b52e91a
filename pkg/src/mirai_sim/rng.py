"""SplitMix64 generator and random address selection over a toy IPv4 space."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field

from .errors import EmptyAddressPool

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step. Returns ``(value, new_state)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), state


class SplitMix64:
    """Mutable wrapper around :func:`splitmix64`.

    The whole generator state is the single 64-bit word ``state``; copying
    the object (``SplitMix64(rng.state)``) forks an identical stream.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        # inlined splitmix64; this is the simulator's hottest call
        z = self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        # plain modulo; bias is < n / 2**64 for the ranges used here
        return self.next_u64() % n

    def fork(self) -> "SplitMix64":
        """Independent child stream seeded from the next draw."""
        return SplitMix64(self.next_u64())


def next_random_u64(state: int) -> tuple[int, int]:
    """Functional form: ``(value, new_state)`` for a given state."""
    return splitmix64(state)


def ip_to_int(addr: str | int) -> int:
    if isinstance(addr, int):
        return addr
    return int(ipaddress.IPv4Address(addr))


def int_to_ip(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


@dataclass(frozen=True)
class AddressSpace:
    base: int
    size: int

    @classmethod
    def from_cidr(cls, cidr: str) -> "AddressSpace":
        net = ipaddress.IPv4Network(cidr, strict=False)
        return cls(int(net.network_address), net.num_addresses)

    def __contains__(self, addr: int) -> bool:
        return self.base <= addr < self.base + self.size

    @property
    def cidr(self) -> str:
        prefix = 32 - (self.size.bit_length() - 1)
        return f"{int_to_ip(self.base)}/{prefix}"


@dataclass
class Exclusions:
    """Set of half-open address blocks ``[start, end)``."""

    blocks: list[tuple[int, int]] = field(default_factory=list)

    @classmethod
    def of_addresses(cls, addrs) -> "Exclusions":
        return cls([(a, a + 1) for a in sorted(set(addrs))])

    def __contains__(self, addr: int) -> bool:
        return any(lo <= addr < hi for lo, hi in self.blocks)

    def covered(self, space: AddressSpace) -> int:
        """Number of addresses of ``space`` inside the union of the blocks."""
        lo_s, hi_s = space.base, space.base + space.size
        clipped = sorted(
            (max(lo, lo_s), min(hi, hi_s)) for lo, hi in self.blocks if lo < hi_s and hi > lo_s
        )
        total, cur = 0, lo_s
        for lo, hi in clipped:
            lo = max(lo, cur)
            if hi > lo:
                total += hi - lo
                cur = hi
        return total


def random_public_ipv4(rng: SplitMix64, space: AddressSpace, exclusions: Exclusions | None = None) -> int:
    """Uniform draw over ``space`` minus ``exclusions`` by rejection."""
    if exclusions is None or not exclusions.blocks:
        return space.base + rng.next_u64() % space.size
    if exclusions.covered(space) >= space.size:
        raise EmptyAddressPool(f"exclusions cover all of {space.cidr}")
    while True:
        addr = space.base + rng.next_u64() % space.size
        if addr not in exclusions:
            return addr
