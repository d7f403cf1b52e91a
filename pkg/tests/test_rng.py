import numpy as np
import pytest
from hypothesis import given, strategies as st

from mirai_sim.errors import EmptyAddressPool
from mirai_sim.rng import (AddressSpace, Exclusions, SplitMix64, int_to_ip, ip_to_int, next_random_u64,
                           random_public_ipv4, splitmix64)

# Published SplitMix64 reference outputs for seed 0, cross-checked against
# a numpy uint64 re-implementation (see oracle_stream below).
SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
SEED7_FIRST = 0x63CBE1E459320DD7
# scipy.stats.chi2.ppf(0.999, 255)
CHI2_255_Q999 = 330.5197


def oracle_stream(seed, n):
    out = []
    s = np.uint64(seed)
    with np.errstate(over="ignore"):
        for _ in range(n):
            s = s + np.uint64(0x9E3779B97F4A7C15)
            z = (s ^ (s >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            out.append(int(z ^ (z >> np.uint64(31))))
    return out


def test_reference_vector():
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == SEED0
    assert oracle_stream(0, 3) == SEED0


@given(st.integers(0, 2**64 - 1))
def test_matches_oracle(seed):
    rng = SplitMix64(seed)
    assert [rng.next_u64() for _ in range(4)] == oracle_stream(seed, 4)


@given(st.integers(0, 2**64 - 1))
def test_step_is_pure(seed):
    assert next_random_u64(seed) == next_random_u64(seed)
    value, state = splitmix64(seed)
    assert state == (seed + 0x9E3779B97F4A7C15) % 2**64
    assert 0 <= value < 2**64


def test_high_bit_balance():
    rng = SplitMix64(42)
    n = 10**6
    high = sum(rng.next_u64() >> 63 for _ in range(n))
    assert abs(high / n - 0.5) <= 0.002


def test_first_address_seed7():
    space = AddressSpace.from_cidr("10.0.0.0/16")
    addr = random_public_ipv4(SplitMix64(7), space)
    assert addr == ip_to_int("10.0.0.0") + SEED7_FIRST % 65536
    assert oracle_stream(7, 1)[0] == SEED7_FIRST


def test_single_admissible_address():
    space = AddressSpace.from_cidr("10.0.0.0/24")
    keep = space.base + 77
    excl = Exclusions([(space.base, keep), (keep + 1, space.base + 256)])
    rng = SplitMix64(1)
    assert {random_public_ipv4(rng, space, excl) for _ in range(50)} == {keep}


def test_fully_excluded_space():
    space = AddressSpace.from_cidr("10.0.0.0/30")
    with pytest.raises(EmptyAddressPool):
        random_public_ipv4(SplitMix64(1), space, Exclusions([(space.base, space.base + 4)]))


def chi_square_256(addresses, space):
    counts = np.bincount((np.asarray(addresses) - space.base) >> 8, minlength=256)
    expected = len(addresses) / 256
    return float(((counts - expected) ** 2 / expected).sum())


def test_address_chi_square():
    space = AddressSpace.from_cidr("10.0.0.0/16")
    rng = SplitMix64(2024)
    addrs = [random_public_ipv4(rng, space) for _ in range(10**5)]
    assert chi_square_256(addrs, space) < CHI2_255_Q999


@given(st.integers(0, 2**64 - 1), st.lists(st.tuples(st.integers(0, 255), st.integers(1, 64)), max_size=5))
def test_draws_respect_space_and_exclusions(seed, blocks):
    space = AddressSpace.from_cidr("10.1.0.0/24")
    excl = Exclusions([(space.base + lo, space.base + lo + n) for lo, n in blocks])
    rng = SplitMix64(seed)
    if excl.covered(space) == space.size:
        with pytest.raises(EmptyAddressPool):
            random_public_ipv4(rng, space, excl)
        return
    for _ in range(20):
        a = random_public_ipv4(rng, space, excl)
        assert a in space and a not in excl


@given(st.integers(0, 2**32 - 1))
def test_ip_round_trip(value):
    assert ip_to_int(int_to_ip(value)) == value


def test_fork_is_deterministic():
    a, b = SplitMix64(5), SplitMix64(5)
    assert a.fork().next_u64() == b.fork().next_u64()
