"""Classical primitives: bit strings, one-time pads, the agreed hash, BB84 keys."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

HASH_ID = "sha256-bitframe-v1"
DIGEST_BITS = 256

BB84_RAW_MULTIPLIER = 4
BB84_SAMPLE_FRACTION = 0.25
BB84_ABORT_QBER = 0.11


class CryptoError(Exception):
    pass


class KeyExhaustedError(CryptoError):
    pass


class KeyReuseError(CryptoError):
    pass


class Bb84Abort(CryptoError):
    """Estimated error rate too high, or too few bits survived sifting."""

    def __init__(self, message: str, qber: float | None = None):
        super().__init__(message)
        self.qber = qber


@dataclass(frozen=True)
class BitString:
    bits: tuple[int, ...] = ()

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        text = text.strip()
        if text and set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_hex(cls, hexstr: str, nbits: int | None = None) -> "BitString":
        """Parse MSB-first hex; ``nbits`` keeps only the low-order bits of the
        left-zero-padded value (defaults to 4 bits per digit)."""
        hexstr = hexstr.strip().lower().removeprefix("0x")
        width = 4 * len(hexstr)
        nbits = width if nbits is None else nbits
        if nbits > width or nbits < 0:
            raise ValueError(f"{nbits} bits do not fit in {len(hexstr)} hex digits")
        value = int(hexstr, 16) if hexstr else 0
        if value >> nbits:
            raise ValueError(f"hex {hexstr!r} has non-zero padding above {nbits} bits")
        return cls(tuple((value >> (nbits - 1 - k)) & 1 for k in range(nbits)))

    @classmethod
    def random(cls, rng: np.random.Generator, n: int) -> "BitString":
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n)))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls((0,) * n)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return BitString(self.bits[k])
        return self.bits[k]

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(self.bits + other.bits)

    def __xor__(self, other: "BitString") -> "BitString":
        if len(self) != len(other):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")
        return BitString(tuple(a ^ b for a, b in zip(self.bits, other.bits)))

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    def flip(self, k: int) -> "BitString":
        b = list(self.bits)
        b[k] ^= 1
        return BitString(tuple(b))

    def to_int(self) -> int:
        v = 0
        for b in self.bits:
            v = (v << 1) | b
        return v

    def to_hex(self) -> str:
        """MSB-first hex, left-padded with zero bits to whole nibbles."""
        if not self.bits:
            return ""
        return format(self.to_int(), "x").zfill(math.ceil(len(self) / 4))

    def framed_bytes(self) -> bytes:
        """Hash input: value left-padded to whole bytes, then one byte of len mod 256."""
        nbytes = math.ceil(len(self) / 8)
        return self.to_int().to_bytes(nbytes, "big") + bytes([len(self) % 256])


@dataclass(frozen=True)
class Digest:
    value: bytes

    def __post_init__(self):
        if len(self.value) * 8 != DIGEST_BITS:
            raise ValueError(f"digest must be {DIGEST_BITS} bits")

    @property
    def bits(self) -> BitString:
        return BitString.from_hex(self.value.hex())

    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        return cls(bytes.fromhex(text))

    def flip(self, k: int) -> "Digest":
        return Digest(bytes.fromhex(self.bits.flip(k).to_hex()))


def hash_digest(m: BitString) -> Digest:
    return Digest(hashlib.sha256(m.framed_bytes()).digest())


@dataclass(frozen=True)
class Ciphertext:
    bits: BitString
    key_offset: int

    def __len__(self) -> int:
        return len(self.bits)


@dataclass
class Key:
    """One party's copy of a shared pad. ``consumed`` only ever grows."""

    bits: BitString
    owner_pair: tuple[str, str]
    consumed: int = 0
    name: str = ""

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def remaining(self) -> int:
        return len(self.bits) - self.consumed

    def copy(self) -> "Key":
        return Key(self.bits, self.owner_pair, self.consumed, self.name)

    def peek(self, offset: int, count: int) -> BitString:
        if offset < 0 or count < 0 or offset + count > len(self.bits):
            raise KeyExhaustedError(
                f"key bits [{offset}, {offset + count}) out of range for {len(self.bits)}-bit key"
            )
        return self.bits[offset : offset + count]

    def take(self, count: int, offset: int | None = None) -> tuple[int, BitString]:
        """Consume ``count`` fresh bits starting at ``offset`` (default: the cursor)."""
        offset = self.consumed if offset is None else offset
        if offset < self.consumed:
            raise KeyReuseError(
                f"key bits from {offset} already consumed (cursor at {self.consumed})"
            )
        if offset + count > len(self.bits):
            raise KeyExhaustedError(
                f"need {count} key bits at {offset}, key {self.name or ''} has {len(self.bits)}"
            )
        chunk = self.bits[offset : offset + count]
        self.consumed = offset + count
        return offset, chunk

    def mark_used(self, end: int) -> None:
        """Advance the cursor past bits the partner consumed."""
        self.consumed = max(self.consumed, end)


def otp_encrypt(key: Key, plaintext: BitString, offset: int | None = None) -> Ciphertext:
    start, pad = key.take(len(plaintext), offset)
    return Ciphertext(plaintext ^ pad, start)


def otp_decrypt(key: Key, c: Ciphertext) -> BitString:
    """XOR with the key bits at ``c.key_offset``; the receiving copy's cursor
    moves past them so they cannot be reused for sending."""
    pad = key.peek(c.key_offset, len(c.bits))
    key.mark_used(c.key_offset + len(c.bits))
    return c.bits ^ pad


# -- BB84 -----------------------------------------------------------------------


@dataclass
class Bb84Run:
    """Everything one simulated BB84 exchange produced, both ends."""

    raw_pairs: int
    sifted_positions: np.ndarray
    sample_positions: np.ndarray
    alice_sifted: BitString
    bob_sifted: BitString
    qber: float
    alice_key: BitString
    bob_key: BitString
    eve_log: list = field(default_factory=list)

    @property
    def sifted_fraction(self) -> float:
        return len(self.sifted_positions) / self.raw_pairs


def bb84_run(length: int, seed: int, eve=None) -> Bb84Run:
    """Simulate BB84 for a ``length``-bit key without applying the abort rule.

    Qubits are single and unentangled, so they are simulated as a batch of
    two-amplitude states rather than one register each.
    """
    from avowable.adversary import Eavesdropper, attack_batch
    from avowable.seeding import make_rng

    if length < 1:
        raise ValueError("key length must be >= 1")
    raw = BB84_RAW_MULTIPLIER * length
    rng_a = make_rng(seed, "bb84", "alice")
    rng_b = make_rng(seed, "bb84", "bob")
    rng_q = make_rng(seed, "bb84", "channel")

    a_bits = rng_a.integers(0, 2, size=raw)
    a_bases = rng_a.integers(0, 2, size=raw)  # 0 = Z, 1 = X
    states = encode_bb84(a_bits, a_bases)

    eve_log = []
    if eve is not None:
        spy = eve if isinstance(eve, Eavesdropper) else Eavesdropper(eve)
        states, eve_log = attack_batch(spy, states)

    b_bases = rng_b.integers(0, 2, size=raw)
    b_bits = measure_batch(states, b_bases, rng_q)

    sifted = np.flatnonzero(a_bases == b_bases)
    n_sample = math.ceil(BB84_SAMPLE_FRACTION * len(sifted))
    sample = np.sort(rng_a.choice(len(sifted), size=n_sample, replace=False)) if n_sample else np.array([], int)
    errors = int(np.sum(a_bits[sifted][sample] != b_bits[sifted][sample]))
    qber = errors / n_sample if n_sample else 0.0

    keep = np.setdiff1d(np.arange(len(sifted)), sample)
    a_key = a_bits[sifted][keep][:length]
    b_key = b_bits[sifted][keep][:length]
    return Bb84Run(
        raw_pairs=raw,
        sifted_positions=sifted,
        sample_positions=sample,
        alice_sifted=BitString(tuple(a_bits[sifted].tolist())),
        bob_sifted=BitString(tuple(b_bits[sifted].tolist())),
        qber=qber,
        alice_key=BitString(tuple(a_key.tolist())),
        bob_key=BitString(tuple(b_key.tolist())),
        eve_log=eve_log,
    )


def bb84_establish_key(
    length: int,
    seed: int,
    eve=None,
    owner_pair: tuple[str, str] = ("Alice", "Bob"),
    threshold: float = BB84_ABORT_QBER,
) -> tuple[Key, float]:
    run = bb84_run(length, seed, eve)
    if run.qber > threshold:
        raise Bb84Abort(f"qber {run.qber:.4f} exceeds {threshold}", qber=run.qber)
    if len(run.alice_key) < length:
        raise Bb84Abort(
            f"only {len(run.alice_key)} of {length} key bits survived sifting", qber=run.qber
        )
    return Key(run.alice_key, owner_pair), run.qber


def encode_bb84(bits: Sequence[int], bases: Sequence[int]) -> np.ndarray:
    """Rows of (amp0, amp1): Z basis -> |bit>, X basis -> H|bit>."""
    bits = np.asarray(bits)
    bases = np.asarray(bases)
    s = 1 / math.sqrt(2)
    out = np.zeros((len(bits), 2), dtype=complex)
    z = bases == 0
    out[z & (bits == 0), 0] = 1
    out[z & (bits == 1), 1] = 1
    x = ~z
    out[x, 0] = s
    out[x, 1] = np.where(bits[x] == 0, s, -s)
    return out


def measure_batch(states: np.ndarray, bases: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """Born-rule measurement of independent qubits, each in its own basis."""
    bases = np.asarray(bases)
    s = 1 / math.sqrt(2)
    amp0 = np.where(bases == 0, states[:, 0], s * (states[:, 0] + states[:, 1]))
    p0 = np.abs(amp0) ** 2
    return (rng.random(len(states)) >= p0).astype(int)

