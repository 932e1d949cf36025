import hashlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from avowable.adversary import Basis, EveKind, EveStrategy
from avowable.crypto import (
    BB84_ABORT_QBER,
    Bb84Abort,
    BitString,
    Ciphertext,
    Key,
    KeyExhaustedError,
    KeyReuseError,
    bb84_establish_key,
    bb84_run,
    hash_digest,
    otp_decrypt,
    otp_encrypt,
)

bitlists = st.lists(st.integers(0, 1), max_size=300)


def key_of(s: str) -> Key:
    return Key(BitString.from_str(s), ("Alice", "Charlie"))


def reference_digest(bits: list[int]) -> bytes:
    """Framing rebuilt independently: pad on the left to whole bytes with
    numpy.packbits, then append len mod 256."""
    pad = (-len(bits)) % 8
    packed = np.packbits(np.array([0] * pad + list(bits), dtype=np.uint8)).tobytes()
    return hashlib.sha256(packed + bytes([len(bits) % 256])).digest()


# -- bit strings ---------------------------------------------------------------


@given(bitlists)
def test_bitstring_hex_round_trip(bits):
    b = BitString(tuple(bits))
    assert BitString.from_hex(b.to_hex(), len(b)) == b


def test_bitstring_hex_is_msb_first():
    assert BitString.from_str("10110").to_hex() == "16"
    assert BitString.from_hex("a") == BitString.from_str("1010")
    assert BitString.from_hex("16", 5) == BitString.from_str("10110")
    with pytest.raises(ValueError):
        BitString.from_hex("ff", 5)


# -- one-time pad --------------------------------------------------------------


def test_otp_xor_table():
    c = otp_encrypt(key_of("1010"), BitString.from_str("0110"))
    assert str(c.bits) == "1100"
    assert c.key_offset == 0
    assert str(otp_decrypt(key_of("1010"), Ciphertext(BitString.from_str("1100"), 0))) == "0110"


def test_otp_zero_plaintext_reveals_pad():
    k = key_of("110100111")
    c = otp_encrypt(k, BitString.zeros(9))
    assert c.bits == k.bits


def test_otp_decrypt_zero_round_trip():
    k = key_of("01")
    c = otp_encrypt(k, BitString.from_str("00"))
    assert str(otp_decrypt(k, c)) == "00"


@given(st.data())
def test_otp_round_trip(data):
    n = data.draw(st.integers(0, 200))
    key_bits = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    msg = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    m = BitString(tuple(msg))
    sender = Key(BitString(tuple(key_bits)), ("A", "C"))
    receiver = sender.copy()
    c = otp_encrypt(sender, m)
    assert len(c) == len(m)
    assert otp_decrypt(receiver, c) == m


@given(st.data())
def test_wrong_key_differs_where_keys_differ(data):
    n = data.draw(st.integers(1, 64))
    draw_bits = lambda: BitString(tuple(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))))
    k1, k2, m = draw_bits(), draw_bits(), draw_bits()
    c = otp_encrypt(Key(k1, ("A", "C")), m)
    out = otp_decrypt(Key(k2, ("A", "C")), c)
    assert (out ^ m) == (k1 ^ k2)


def test_otp_consumes_monotonically():
    k = key_of("10101010")
    c1 = otp_encrypt(k, BitString.from_str("111"))
    c2 = otp_encrypt(k, BitString.from_str("000"))
    assert (c1.key_offset, c2.key_offset, k.consumed) == (0, 3, 6)
    with pytest.raises(KeyReuseError):
        otp_encrypt(k, BitString.from_str("1"), offset=2)
    with pytest.raises(KeyExhaustedError):
        otp_encrypt(k, BitString.from_str("111"))
    assert k.consumed == 6


def test_decrypt_offset_out_of_range():
    with pytest.raises(KeyExhaustedError):
        otp_decrypt(key_of("1010"), Ciphertext(BitString.from_str("11"), 3))


def test_uniform_ciphertext_bits():
    rng = np.random.default_rng(1)
    m = BitString.from_str("1101001110010111")
    ones = np.zeros(len(m))
    trials = 10_000
    for _ in range(trials):
        k = Key(BitString.random(rng, len(m)), ("A", "C"))
        ones += np.array(otp_encrypt(k, m).bits)
    assert np.all(np.abs(ones / trials - 0.5) <= 0.02)


# -- hash ----------------------------------------------------------------------


def test_sha256_primitive_fips_vector():
    # FIPS 180-2 appendix B.1 ("abc")
    assert hashlib.sha256(b"abc").hexdigest() == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )


def test_hash_of_empty_bitstring():
    # empty string frames to the single length byte 0x00
    expected = "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d"
    assert hashlib.sha256(b"\x00").hexdigest() == expected
    assert hash_digest(BitString()).hex() == expected


@given(bitlists)
def test_hash_matches_reference_framing(bits):
    d = hash_digest(BitString(tuple(bits)))
    assert d.value == reference_digest(bits)
    assert len(d.bits) == 256
    assert d == hash_digest(BitString(tuple(bits)))


def test_leading_zeros_are_significant():
    assert hash_digest(BitString.from_str("1")) != hash_digest(BitString.from_str("01"))


def test_avalanche():
    rng = np.random.default_rng(7)
    dists = []
    for _ in range(1000):
        bits = rng.integers(0, 2, 64).tolist()
        flipped = list(bits)
        flipped[int(rng.integers(64))] ^= 1
        a = int.from_bytes(reference_digest(bits), "big")
        b = int.from_bytes(reference_digest(flipped), "big")
        assert hash_digest(BitString(tuple(flipped))).value == reference_digest(flipped)
        dists.append(bin(a ^ b).count("1"))
    assert abs(np.mean(dists) - 128) <= 25


# -- BB84 ----------------------------------------------------------------------


def intercept_resend_qber() -> float:
    """Exact error rate on sifted bits when Eve measures every qubit in a random
    basis: enumerate Alice's basis and bit, Eve's basis and outcome, and take
    Born probabilities from explicit overlaps."""
    s = 2**-0.5
    states = {"Z": [np.array([1, 0]), np.array([0, 1])], "X": [np.array([s, s]), np.array([s, -s])]}
    err = 0.0
    for a_basis in "ZX":
        for bit in (0, 1):
            sent = states[a_basis][bit]
            for e_basis in "ZX":
                for e_out in (0, 1):
                    resent = states[e_basis][e_out]
                    p_eve = abs(resent @ sent) ** 2
                    p_wrong = abs(states[a_basis][1 - bit] @ resent) ** 2
                    err += 0.5 * 0.5 * 0.5 * p_eve * p_wrong
    return err


def test_intercept_resend_oracle_is_quarter():
    assert intercept_resend_qber() == pytest.approx(0.25, abs=1e-12)


def test_bb84_no_eve_agrees():
    for seed in range(20):
        run = bb84_run(256, seed)
        assert run.qber == 0
        assert run.alice_sifted == run.bob_sifted
        assert run.alice_key == run.bob_key and len(run.alice_key) == 256


def test_bb84_sifted_fraction():
    fracs = [bb84_run(2500, s).sifted_fraction for s in range(4)]
    assert abs(np.mean(fracs) - 0.5) <= 0.02


def test_bb84_intercept_resend_detected():
    eve = EveStrategy(EveKind.INTERCEPT_RESEND_RANDOM, seed=3)
    run = bb84_run(5000, 11, eve)
    assert abs(run.qber - intercept_resend_qber()) <= 0.02
    with pytest.raises(Bb84Abort) as exc:
        bb84_establish_key(1024, 11, eve)
    assert exc.value.qber > BB84_ABORT_QBER


def test_bb84_fixed_z_attack_still_seen_in_x_rounds():
    # Eve in Z spoils only X-basis rounds: expected qber 1/2 * 1/2
    eve = EveStrategy(EveKind.INTERCEPT_RESEND_FIXED, fixed_basis=Basis.Z, seed=4)
    assert abs(bb84_run(5000, 2, eve).qber - 0.25) <= 0.03


def test_bb84_establish_returns_key():
    key, qber = bb84_establish_key(128, 5)
    assert len(key) == 128 and qber == 0.0


def test_bb84_rejects_empty():
    with pytest.raises(ValueError):
        bb84_run(0, 1)
