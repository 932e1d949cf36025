"""Arbitrated teleportation over swapped EPR channels.

Charlie shares one-time pads K_a with Alice and K_b with Bob. For every input
state Charlie swaps entanglement so that Alice's particle A and Bob's particle B
end up in a known Bell state, tells Alice which one (under K_a), Alice rotates
the pair to phi+, teleports, and sends the Bell outcomes to Charlie as S_a.
Charlie re-encrypts them under K_b as S_c for Bob. Each logged ciphertext is
bound to a personal key, which is what the dispute procedure leans on.

K_a layout per session (bits): application record + tag, tag key, Charlie's
swap outcomes (2n), Alice's S_a (2n). K_b: S_c (2n).
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from avowable.crypto import (
    BitString,
    Ciphertext,
    CryptoError,
    Key,
    otp_decrypt,
    otp_encrypt,
)
from avowable.quantum import (
    BellOutcome,
    QubitId,
    StateVector,
    apply_pauli,
    make_epr_pair,
    measure_bell,
    new_register,
    prepare_single,
    qubit_state,
)
from avowable.seeding import derive_seed, make_rng
from avowable.transcript import (
    Adjudication,
    Channel,
    ChannelMessage,
    Claim,
    EventKind,
    Network,
    PartyId,
    ProtocolError,
    QubitRef,
    Transcript,
    Verdict,
)

PARTY_BITS = 2
N_BITS = 16
NONCE_BITS = 32
APP_RECORD_BITS = 2 * PARTY_BITS + N_BITS + NONCE_BITS
TAG_BITS = 64
TAG_KEY_BITS = 64
APPLICATION_OVERHEAD = APP_RECORD_BITS + TAG_BITS + TAG_KEY_BITS

_PARTY_CODE = {PartyId.ALICE: 0, PartyId.BOB: 1, PartyId.CHARLIE: 2, PartyId.EVE: 3}
_CODE_PARTY = {v: k for k, v in _PARTY_CODE.items()}


class TeleportPhase(str, enum.Enum):
    CREATED = "Created"
    APPLIED = "Applied"
    CHANNEL_BUILT = "ChannelBuilt"
    CORRECTED = "Corrected"
    MEASURED = "Measured"
    RELAYED = "Relayed"
    RECOVERED = "Recovered"
    DONE = "Done"
    ABORTED = "Aborted"


class PhaseError(ProtocolError):
    pass


def ka_bits_needed(n: int) -> int:
    return APPLICATION_OVERHEAD + 4 * n


def kb_bits_needed(n: int) -> int:
    return 2 * n


def encode_outcomes(outcomes: Sequence[BellOutcome]) -> BitString:
    return BitString(tuple(b for o in outcomes for b in o.bits))


def decode_outcomes(bits: BitString) -> list[BellOutcome]:
    if len(bits) % 2:
        raise ValueError(f"outcome record has odd length {len(bits)}")
    return [BellOutcome.from_bits(bits[k], bits[k + 1]) for k in range(0, len(bits), 2)]


def _int_bits(value: int, width: int) -> BitString:
    return BitString(tuple((value >> (width - 1 - k)) & 1 for k in range(width)))


def application_record(sender: PartyId, receiver: PartyId, n: int, nonce: int) -> BitString:
    if not 0 < n < 2**N_BITS:
        raise ValueError(f"n must be in 1..{2**N_BITS - 1}")
    return (
        _int_bits(_PARTY_CODE[sender], PARTY_BITS)
        + _int_bits(_PARTY_CODE[receiver], PARTY_BITS)
        + _int_bits(n, N_BITS)
        + _int_bits(nonce, NONCE_BITS)
    )


def parse_application(record: BitString) -> dict:
    b = record[: 2 * PARTY_BITS + N_BITS]
    return {
        "sender": _CODE_PARTY[b[:PARTY_BITS].to_int()],
        "receiver": _CODE_PARTY[b[PARTY_BITS : 2 * PARTY_BITS].to_int()],
        "n": b[2 * PARTY_BITS :].to_int(),
        "nonce": record[2 * PARTY_BITS + N_BITS :].to_int(),
    }


def application_tag(record: BitString, tag_key: BitString) -> BitString:
    h = hashlib.sha256(b"avowable-app-tag" + record.framed_bytes() + tag_key.framed_bytes())
    return BitString.from_hex(h.hexdigest())[:TAG_BITS]


@dataclass
class TeleportKeys:
    """Each party's copy of the two pads."""

    alice_ka: Key
    charlie_ka: Key
    charlie_kb: Key
    bob_kb: Key

    @classmethod
    def from_bits(cls, ka: BitString, kb: BitString, charlie_ka: BitString | None = None) -> "TeleportKeys":
        return cls(
            Key(ka, ("Alice", "Charlie"), name="K_a"),
            Key(ka if charlie_ka is None else charlie_ka, ("Alice", "Charlie"), name="K_a"),
            Key(kb, ("Bob", "Charlie"), name="K_b"),
            Key(kb, ("Bob", "Charlie"), name="K_b"),
        )


@dataclass
class _Slot:
    """Quantum resources for one teleported index."""

    register: StateVector
    i: QubitId
    c_a: QubitId
    a: QubitId
    c_b: QubitId
    b: QubitId


@dataclass
class TeleportSession:
    n: int
    inputs: list[tuple[complex, complex]]
    seed: int
    keys: TeleportKeys
    transcript: Transcript
    tamper: Callable[[ChannelMessage], object] | None = None
    session_id: int = 0
    phase: TeleportPhase = TeleportPhase.CREATED
    slots: list[_Slot] = field(default_factory=list)
    swap_outcomes: list[BellOutcome] = field(default_factory=list)
    alice_outcomes: list[BellOutcome] = field(default_factory=list)
    recovered: list[StateVector] = field(default_factory=list)

    def __post_init__(self):
        if len(self.inputs) != self.n:
            raise ValueError(f"{len(self.inputs)} input states for n = {self.n}")
        self.net = Network(self._emit, self.tamper)
        self._alice_rng = make_rng(self.seed, "teleport", "alice")

    # -- bookkeeping -----------------------------------------------------

    def _emit(self, actor: PartyId, kind: EventKind, **details):
        return self.transcript.emit(actor, kind, phase=self.phase.value, **details)

    def _require(self, phase: TeleportPhase, step: str, actor: PartyId) -> None:
        if self.phase is not phase:
            self._emit(
                actor,
                EventKind.ABORT,
                step=step,
                fatal=False,
                cause=f"out-of-order: {step} needs phase {phase.value}",
            )
            raise PhaseError(f"{step} requires phase {phase.value}, session is in {self.phase.value}")

    def abort(self, actor: PartyId, step: str, cause: str) -> None:
        self.phase = TeleportPhase.ABORTED
        self._emit(actor, EventKind.ABORT, step=step, fatal=True, cause=cause)

    # -- step 1 ----------------------------------------------------------

    def request_session(self) -> Ciphertext:
        """Alice sends Charlie the application, wrapped and tagged under K_a."""
        self._require(TeleportPhase.CREATED, "application", PartyId.ALICE)
        if self.n < 1:
            raise ValueError("a session needs at least one state")
        key = self.keys.alice_ka
        nonce = int(self._alice_rng.integers(0, 2**NONCE_BITS))
        record = application_record(PartyId.ALICE, PartyId.BOB, self.n, nonce)
        pad_start = key.consumed
        tag_key = key.peek(pad_start + APP_RECORD_BITS + TAG_BITS, TAG_KEY_BITS)
        c = otp_encrypt(key, record + application_tag(record, tag_key))
        key.take(TAG_KEY_BITS)
        self.net.send(PartyId.ALICE, PartyId.CHARLIE, Channel.CLASSICAL_PRIVATE, c, "application")
        return c

    # -- step 2 ----------------------------------------------------------

    def verify_application(self) -> dict:
        """Charlie decrypts the application and checks its tag before opening."""
        self._require(TeleportPhase.CREATED, "verify_application", PartyId.CHARLIE)
        msg = self.net.receive(PartyId.CHARLIE, "application")
        ok, info = check_application(self.keys.charlie_ka, msg.payload)
        if not ok or info.get("n") != self.n:
            self.abort(PartyId.CHARLIE, "verify_application", "identity check failed: application tag mismatch")
            raise ProtocolError("application rejected: Alice's identity not proven")
        self.phase = TeleportPhase.APPLIED
        self._emit(PartyId.CHARLIE, EventKind.VERDICT, step="verify_application", result="accepted", n=self.n)
        return info

    def swap_entanglement(self) -> list[BellOutcome]:
        self._require(TeleportPhase.APPLIED, "swap", PartyId.CHARLIE)
        for k, (alpha, beta) in enumerate(self.inputs):
            reg = new_register(5, derive_seed(self.seed, "teleport", "register", self.session_id, k))
            i = reg.allocate()
            prepare_single(i, alpha, beta)
            c_a, a = make_epr_pair(reg)
            c_b, b = make_epr_pair(reg)
            self.slots.append(_Slot(reg, i, c_a, a, c_b, b))
            label = f"t{self.session_id}.{k}"
            self.net.send(PartyId.CHARLIE, PartyId.ALICE, Channel.QUANTUM, QubitRef(label, a.index), "distribute_a")
            self.net.receive(PartyId.ALICE, "distribute_a")
            self.net.send(PartyId.CHARLIE, PartyId.BOB, Channel.QUANTUM, QubitRef(label, b.index), "distribute_b")
            self.net.receive(PartyId.BOB, "distribute_b")
        for k, slot in enumerate(self.slots):
            self.swap_outcomes.append(measure_bell(slot.c_a, slot.c_b))
            self._emit(PartyId.CHARLIE, EventKind.MEASURE, step="swap", index=k, basis="bell")
        c = otp_encrypt(self.keys.charlie_ka, encode_outcomes(self.swap_outcomes))
        self.phase = TeleportPhase.CHANNEL_BUILT
        self.net.send(PartyId.CHARLIE, PartyId.ALICE, Channel.CLASSICAL_PRIVATE, c, "swap_outcomes")
        return list(self.swap_outcomes)

    # -- step 3 ----------------------------------------------------------

    def alice_receive_outcomes(self) -> list[BellOutcome]:
        self._require(TeleportPhase.CHANNEL_BUILT, "swap_outcomes", PartyId.ALICE)
        msg = self.net.receive(PartyId.ALICE, "swap_outcomes")
        return decode_outcomes(otp_decrypt(self.keys.alice_ka, msg.payload))

    def correct_channel(self, outcomes: Sequence[BellOutcome]) -> None:
        """Rotate every A-B pair to phi+ according to Charlie's outcomes."""
        self._require(TeleportPhase.CHANNEL_BUILT, "correct", PartyId.ALICE)
        if len(outcomes) != self.n:
            self.abort(PartyId.ALICE, "correct", f"{len(outcomes)} outcomes for n = {self.n}")
            raise ProtocolError("outcome count does not match session size")
        for k, (slot, o) in enumerate(zip(self.slots, outcomes)):
            apply_pauli(o.correction, slot.a)
            self._emit(PartyId.ALICE, EventKind.APPLY, step="correct", index=k, op=o.correction.value)
        self.phase = TeleportPhase.CORRECTED

    # -- step 4 ----------------------------------------------------------

    def alice_measure_and_wrap(self) -> Ciphertext:
        self._require(TeleportPhase.CORRECTED, "s_a", PartyId.ALICE)
        for k, slot in enumerate(self.slots):
            self.alice_outcomes.append(measure_bell(slot.i, slot.a))
            self._emit(PartyId.ALICE, EventKind.MEASURE, step="teleport_measure", index=k, basis="bell")
        s_a = otp_encrypt(self.keys.alice_ka, encode_outcomes(self.alice_outcomes))
        self.phase = TeleportPhase.MEASURED
        self.net.send(PartyId.ALICE, PartyId.CHARLIE, Channel.CLASSICAL_PRIVATE, s_a, "s_a")
        return s_a

    # -- step 5 ----------------------------------------------------------

    def relay_reencrypt(self) -> Ciphertext:
        """Charlie opens S_a under K_a and forwards the same record as S_c under K_b."""
        self._require(TeleportPhase.MEASURED, "s_c", PartyId.CHARLIE)
        msg = self.net.receive(PartyId.CHARLIE, "s_a")
        s_a = msg.payload
        if not isinstance(s_a, Ciphertext) or len(s_a) == 0 or len(s_a) != 2 * self.n:
            self.abort(PartyId.CHARLIE, "s_c", f"S_a has {len(s_a)} bits, expected {2 * self.n}")
            raise ProtocolError("S_a length check failed")
        try:
            record = otp_decrypt(self.keys.charlie_ka, s_a)
        except CryptoError as exc:
            self.abort(PartyId.CHARLIE, "s_c", f"cannot decrypt S_a: {exc}")
            raise ProtocolError(str(exc)) from exc
        s_c = otp_encrypt(self.keys.charlie_kb, record)
        self.phase = TeleportPhase.RELAYED
        self.net.send(PartyId.CHARLIE, PartyId.BOB, Channel.CLASSICAL_PRIVATE, s_c, "s_c")
        return s_c

    # -- step 6 ----------------------------------------------------------

    def bob_receive_record(self) -> list[BellOutcome]:
        self._require(TeleportPhase.RELAYED, "s_c", PartyId.BOB)
        msg = self.net.receive(PartyId.BOB, "s_c")
        return decode_outcomes(otp_decrypt(self.keys.bob_kb, msg.payload))

    def bob_recover(self, record: Sequence[BellOutcome]) -> list[StateVector]:
        """Undo the teleportation byproduct on each B (iY stands in for its own
        inverse; they differ by a global sign)."""
        self._require(TeleportPhase.RELAYED, "recover", PartyId.BOB)
        if len(record) != self.n:
            self.abort(PartyId.BOB, "recover", f"record of {len(record)} outcomes for n = {self.n}")
            raise ProtocolError("record length mismatch")
        for k, (slot, o) in enumerate(zip(self.slots, record)):
            apply_pauli(o.correction, slot.b)
            self._emit(PartyId.BOB, EventKind.APPLY, step="recover", index=k, op=o.correction.value)
            self.recovered.append(qubit_state(slot.b))
        self.phase = TeleportPhase.RECOVERED
        return list(self.recovered)

    def finish(self) -> None:
        self._require(TeleportPhase.RECOVERED, "complete", PartyId.BOB)
        self.phase = TeleportPhase.DONE
        self._emit(PartyId.BOB, EventKind.VERDICT, step="complete", result="Done", n=self.n)


def check_application(key: Key, c: Ciphertext) -> tuple[bool, dict]:
    """Decrypt an application with Charlie's copy of K_a and verify its tag."""
    body_len = APP_RECORD_BITS + TAG_BITS
    if not isinstance(c, Ciphertext) or len(c) != body_len:
        return False, {}
    try:
        body = otp_decrypt(key, c)
        tag_key = key.peek(c.key_offset + body_len, TAG_KEY_BITS)
    except CryptoError:
        return False, {}
    key.mark_used(c.key_offset + body_len + TAG_KEY_BITS)
    record, tag = body[:APP_RECORD_BITS], body[APP_RECORD_BITS:]
    if application_tag(record, tag_key) != tag:
        return False, {}
    info = parse_application(record)
    ok = info["sender"] is PartyId.ALICE and info["receiver"] is PartyId.BOB
    return ok, info


# -- disputes -------------------------------------------------------------------

_COMPLETE = {TeleportPhase.DONE.value}


def _decrypt_logged(event, key: Key) -> BitString | None:
    try:
        c = event.payload()
        if not isinstance(c, Ciphertext):
            return None
        return otp_decrypt(key.copy(), c)
    except (CryptoError, KeyError, ValueError):
        return None


def adjudicate_teleport_dispute(
    transcript: Transcript, claim: Claim, charlie_ka: Key, charlie_kb: Key
) -> Adjudication:
    """Re-derive the evidence from the transcript and Charlie's pads.

    S_a is Alice's if it opens under K_a to a record whose length matches the
    swaps Charlie logged and which equals what S_c opens to under K_b.
    """
    from avowable.transcript import payload_hash

    ev: list[str] = []
    if transcript.truncated:
        return Adjudication(Verdict.INCONCLUSIVE, ["transcript is truncated"])
    if transcript.final_phase not in _COMPLETE and not transcript.aborted:
        return Adjudication(Verdict.INCONCLUSIVE, [f"run incomplete (last phase {transcript.final_phase})"])

    n_swaps = len(transcript.find("swap", EventKind.MEASURE, PartyId.CHARLIE))
    sa = transcript.first("s_a", EventKind.SEND, PartyId.ALICE)
    sc = transcript.first("s_c", EventKind.SEND, PartyId.CHARLIE)
    focus, who = (sa, "S_a") if claim is Claim.ALICE_DENIES_SENDING else (sc, "S_c")
    if focus is None:
        return Adjudication(Verdict.NOT_GUILTY, [f"no {who} was ever sent"])
    ev.append(f"{who} logged at seq {focus.seq}")

    for e in (sa, sc):
        if e is not None and payload_hash(e.details["payload"]) != e.details.get("payload_hash"):
            return Adjudication(Verdict.FORGERY, ev + [f"seq {e.seq}: payload does not match its logged hash"])
    if sa is None:
        return Adjudication(Verdict.FORGERY, ev + ["S_c relayed without any S_a from Alice"])

    got = transcript.first("s_a", EventKind.RECEIVE, PartyId.CHARLIE)
    if got is not None and got.details.get("payload_hash") != sa.details.get("payload_hash"):
        return Adjudication(Verdict.FORGERY, ev + ["S_a in Alice's Send differs from what Charlie logged receiving"])

    rec_a = _decrypt_logged(sa, charlie_ka)
    if rec_a is None or len(rec_a) != 2 * n_swaps or n_swaps == 0:
        return Adjudication(
            Verdict.FORGERY, ev + [f"S_a does not open under K_a to a {2 * n_swaps}-bit record"]
        )
    ev.append(f"S_a opens under K_a at offset {sa.payload().key_offset} to {n_swaps} Bell outcomes")

    if sc is not None:
        rec_c = _decrypt_logged(sc, charlie_kb)
        if rec_c != rec_a:
            return Adjudication(Verdict.FORGERY, ev + ["S_c under K_b disagrees with S_a under K_a"])
        ev.append(f"S_c opens under K_b at offset {sc.payload().key_offset} to the same record")
    elif claim is Claim.BOB_DENIES_RECEIVING:
        return Adjudication(Verdict.NOT_GUILTY, ev + ["no S_c was ever sent"])

    if claim is Claim.BOB_DENIES_RECEIVING:
        bob_got = transcript.first("s_c", EventKind.RECEIVE, PartyId.BOB)
        if bob_got is not None:
            ev.append(f"Bob logged receipt at seq {bob_got.seq}")
        return Adjudication(Verdict.GUILTY, ev + ["denial refuted: S_c is bound to K_b"])
    return Adjudication(Verdict.GUILTY, ev + ["denial refuted: S_a is bound to K_a"])


def random_state(rng: np.random.Generator) -> tuple[complex, complex]:
    """Haar-random qubit."""
    v = rng.normal(size=4)
    a, b = complex(v[0], v[1]), complex(v[2], v[3])
    norm = (abs(a) ** 2 + abs(b) ** 2) ** 0.5
    return a / norm, b / norm
