"""Hash-signed quantum secure direct communication over self-tested EPR pairs.

Alice sends B halves of 2n pairs to Bob, half of them are sacrificed to a
random-basis correlation check, and the rest carry the message as I or
sigma_x on Alice's half. Alice announces the Z outcomes and H(M) publicly;
Bob XORs them with the outcomes on the B halves and accepts only if the digest matches.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

from avowable.adversary import Eavesdropper, EveStrategy, attack_in_transit
from avowable.crypto import HASH_ID, BitString, Digest, hash_digest
from avowable.quantum import (
    X_BASIS,
    Z_BASIS,
    PauliOp,
    QubitId,
    StateVector,
    apply_pauli,
    make_epr_pair,
    measure_z,
    new_register,
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


class QsdcPhase(str, enum.Enum):
    CREATED = "Created"
    HASH_AGREED = "HashAgreed"
    PAIRS_SENT = "PairsSent"
    CHANNEL_CHECKED = "ChannelChecked"
    ENCODED = "Encoded"
    ALICE_ANNOUNCED = "AliceAnnounced"
    HASH_SENT = "HashSent"
    DECODED = "Decoded"
    VERIFIED = "Verified"
    REJECTED = "Rejected"
    ABORTED = "Aborted"


class SignatureResult(str, enum.Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


class ChannelCheckAbort(ProtocolError):
    def __init__(self, report: "CheckReport", threshold: int):
        super().__init__(f"channel check failed: {report.mismatches} mismatches > {threshold}")
        self.report = report


@dataclass
class CheckReport:
    positions: list[int]
    bases: list[str]
    alice_bits: BitString
    bob_bits: BitString
    mismatches: int

    @property
    def checked(self) -> int:
        return len(self.positions)


@dataclass
class _Pair:
    register: StateVector
    a: QubitId
    b: QubitId


@dataclass
class QsdcSession:
    message: BitString
    seed: int
    transcript: Transcript
    eve: EveStrategy | None = None
    check_threshold: int = 0
    tamper: Callable[[ChannelMessage], object] | None = None
    session_id: int = 0
    phase: QsdcPhase = QsdcPhase.CREATED
    pairs: list[_Pair] = field(default_factory=list)
    check_positions: list[int] = field(default_factory=list)
    data_positions: list[int] = field(default_factory=list)
    hash_id: str | None = None

    def __post_init__(self):
        self.n = len(self.message)
        self.l = 2 * self.n
        self.net = Network(self._emit, self.tamper)
        self._bob_rng = make_rng(self.seed, "qsdc", "bob", self.session_id)
        self.spy: Eavesdropper | None = self.eve.start() if self.eve is not None else None

    def _emit(self, actor: PartyId, kind: EventKind, **details):
        return self.transcript.emit(actor, kind, phase=self.phase.value, **details)

    def _require(self, phase: QsdcPhase, step: str, actor: PartyId) -> None:
        if self.phase is not phase:
            self._emit(actor, EventKind.ABORT, step=step, fatal=False, cause=f"out-of-order: {step} needs phase {phase.value}")
            raise ProtocolError(f"{step} requires phase {phase.value}, session is in {self.phase.value}")

    def abort(self, actor: PartyId, step: str, cause: str, **extra) -> None:
        self.phase = QsdcPhase.ABORTED
        self._emit(actor, EventKind.ABORT, step=step, fatal=True, cause=cause, **extra)

    # -- step 1 ----------------------------------------------------------

    def agree_hash(self) -> str:
        """Charlie hands both parties the hash identifier; everyone logs it."""
        self._require(QsdcPhase.CREATED, "agree_hash", PartyId.CHARLIE)
        self.phase = QsdcPhase.HASH_AGREED
        for party in (PartyId.ALICE, PartyId.BOB):
            self.net.send(PartyId.CHARLIE, party, Channel.CLASSICAL_PUBLIC, HASH_ID, "agree_hash")
            self.net.receive(party, "agree_hash")
        self.hash_id = HASH_ID
        return HASH_ID

    # -- step 2 ----------------------------------------------------------

    def distribute_pairs(self) -> None:
        self._require(QsdcPhase.HASH_AGREED, "distribute", PartyId.ALICE)
        self.phase = QsdcPhase.PAIRS_SENT
        for j in range(self.l):
            reg = new_register(2, derive_seed(self.seed, "qsdc", "pair", self.session_id, j))
            a, b = make_epr_pair(reg)
            self.pairs.append(_Pair(reg, a, b))
            self.net.send(PartyId.ALICE, PartyId.BOB, Channel.QUANTUM, QubitRef(f"p{self.session_id}.{j}", b.index), "distribute")
            if self.spy is not None:
                attack_in_transit(self.spy, b)
            self.net.receive(PartyId.BOB, "distribute")

    # -- step 3 ----------------------------------------------------------

    def channel_check(self) -> CheckReport:
        self._require(QsdcPhase.PAIRS_SENT, "check", PartyId.BOB)
        c = self.l - self.n
        rng = self._bob_rng
        positions = sorted(int(p) for p in rng.choice(self.l, size=c, replace=False)) if c else []
        bases = [int(x) for x in rng.integers(0, 2, size=c)]
        self.check_positions = positions
        chosen = set(positions)
        self.data_positions = [j for j in range(self.l) if j not in chosen]

        bob_bits = [self.pairs[j].register.project([self.pairs[j].b], _BASES[x]) for j, x in zip(positions, bases)]
        self._emit(PartyId.BOB, EventKind.MEASURE, step="check", count=c)
        mask = BitString(tuple(int(j in chosen) for j in range(self.l)))
        self.net.send(PartyId.BOB, PartyId.ALICE, Channel.CLASSICAL_PUBLIC, mask, "check_positions")
        self.net.send(PartyId.BOB, PartyId.ALICE, Channel.CLASSICAL_PUBLIC, BitString(tuple(bases)), "check_bases")
        self.net.receive(PartyId.ALICE, "check_positions")
        self.net.receive(PartyId.ALICE, "check_bases")

        alice_bits = [self.pairs[j].register.project([self.pairs[j].a], _BASES[x]) for j, x in zip(positions, bases)]
        self._emit(PartyId.ALICE, EventKind.MEASURE, step="check", count=c)
        a_bits, b_bits = BitString(tuple(alice_bits)), BitString(tuple(bob_bits))
        self.net.send(PartyId.ALICE, PartyId.BOB, Channel.CLASSICAL_PUBLIC, a_bits, "check_alice_bits")
        self.net.send(PartyId.BOB, PartyId.ALICE, Channel.CLASSICAL_PUBLIC, b_bits, "check_bob_bits")
        self.net.receive(PartyId.BOB, "check_alice_bits")
        self.net.receive(PartyId.ALICE, "check_bob_bits")

        mismatches = sum(x != y for x, y in zip(alice_bits, bob_bits))
        report = CheckReport(positions, ["Z" if x == 0 else "X" for x in bases], a_bits, b_bits, mismatches)
        if mismatches > self.check_threshold:
            self.abort(PartyId.BOB, "check", "channel check failed", mismatches=mismatches, checked=c)
            raise ChannelCheckAbort(report, self.check_threshold)
        self.phase = QsdcPhase.CHANNEL_CHECKED
        self._emit(PartyId.BOB, EventKind.VERDICT, step="check", result="secure", mismatches=mismatches, checked=c)
        return report

    # -- steps 4-6 -------------------------------------------------------

    def encode_message(self) -> None:
        self._require(QsdcPhase.CHANNEL_CHECKED, "encode", PartyId.ALICE)
        if len(self.message) != len(self.data_positions):
            raise ProtocolError(f"message has {len(self.message)} bits for {len(self.data_positions)} pairs")
        for m, j in zip(self.message, self.data_positions):
            apply_pauli(PauliOp.X if m else PauliOp.I, self.pairs[j].a)
        self.phase = QsdcPhase.ENCODED
        self._emit(PartyId.ALICE, EventKind.APPLY, step="encode", count=self.n)

    def alice_measure_announce(self) -> BitString:
        self._require(QsdcPhase.ENCODED, "announce", PartyId.ALICE)
        bits = BitString(tuple(measure_z(self.pairs[j].a) for j in self.data_positions))
        self.phase = QsdcPhase.ALICE_ANNOUNCED
        self._emit(PartyId.ALICE, EventKind.MEASURE, step="announce", count=self.n, basis="Z")
        self.net.send(PartyId.ALICE, PartyId.BOB, Channel.CLASSICAL_PUBLIC, bits, "announce")
        return bits

    def send_hash(self) -> Digest:
        self._require(QsdcPhase.ALICE_ANNOUNCED, "hash", PartyId.ALICE)
        digest = hash_digest(self.message)
        self.phase = QsdcPhase.HASH_SENT
        self.net.send(PartyId.ALICE, PartyId.BOB, Channel.CLASSICAL_PUBLIC, digest, "hash", hash_id=self.hash_id)
        return digest

    # -- steps 7-8 -------------------------------------------------------

    def bob_receive(self) -> tuple[BitString, Digest]:
        self._require(QsdcPhase.HASH_SENT, "bob_receive", PartyId.BOB)
        announced = self.net.receive(PartyId.BOB, "announce").payload
        digest = self.net.receive(PartyId.BOB, "hash").payload
        return announced, digest

    def bob_decode(self, announced: BitString) -> BitString:
        """m'_k = a_k XOR b_k, with b_k Bob's Z outcome on the data particle."""
        self._require(QsdcPhase.HASH_SENT, "decode", PartyId.BOB)
        if len(announced) != self.n:
            raise ProtocolError(f"announcement has {len(announced)} bits, expected {self.n}")
        b_bits = BitString(tuple(measure_z(self.pairs[j].b) for j in self.data_positions))
        self.phase = QsdcPhase.DECODED
        self._emit(PartyId.BOB, EventKind.MEASURE, step="decode", count=self.n, basis="Z")
        return announced ^ b_bits

    def verify_signature(self, m_prime: BitString, h: Digest) -> SignatureResult:
        self._require(QsdcPhase.DECODED, "verify", PartyId.BOB)
        accepted = hash_digest(m_prime) == h
        result = SignatureResult.ACCEPT if accepted else SignatureResult.REJECT
        self.phase = QsdcPhase.VERIFIED if accepted else QsdcPhase.REJECTED
        details = {"result": result.value, "hash_id": self.hash_id}
        if accepted:
            details["message"] = {"n": len(m_prime), "hex": m_prime.to_hex()}
        self._emit(PartyId.BOB, EventKind.VERDICT, step="verify", **details)
        return result


_BASES = {0: Z_BASIS, 1: X_BASIS}


def adjudicate_qsdc_dispute(transcript: Transcript, claim: Claim) -> Adjudication:
    """Alice cannot disown a message whose published digest matches what Bob accepted."""
    from avowable.transcript import decode_bits

    if transcript.truncated:
        return Adjudication(Verdict.INCONCLUSIVE, ["transcript is truncated"])
    terminal = {QsdcPhase.VERIFIED.value, QsdcPhase.REJECTED.value}
    if transcript.final_phase not in terminal and not transcript.aborted:
        return Adjudication(Verdict.INCONCLUSIVE, [f"run incomplete (last phase {transcript.final_phase})"])
    if claim is not Claim.ALICE_DENIES_SENDING:
        return Adjudication(Verdict.INCONCLUSIVE, [f"claim {claim.value} is not defined for this protocol"])

    published = transcript.first("hash", EventKind.SEND, PartyId.ALICE)
    if published is None:
        return Adjudication(Verdict.NOT_GUILTY, ["Alice never published a digest"])
    ev = [f"Alice published H(M) at seq {published.seq}"]

    verdict = transcript.first("verify", EventKind.VERDICT, PartyId.BOB)
    if verdict is None or verdict.details.get("result") != SignatureResult.ACCEPT.value:
        return Adjudication(Verdict.INCONCLUSIVE, ev + ["Bob accepted no message"])

    ids = {e.payload() for e in transcript.find("agree_hash", EventKind.RECEIVE)}
    ids |= {e.payload() for e in transcript.find("agree_hash", EventKind.SEND, PartyId.CHARLIE)}
    if ids != {HASH_ID} or verdict.details.get("hash_id") != HASH_ID:
        return Adjudication(Verdict.INCONCLUSIVE, ev + [f"hash identifiers disagree: {sorted(ids)}"])
    ev.append(f"arbitrator-logged hash function: {HASH_ID}")

    m_prime = decode_bits(verdict.details["message"])
    if hash_digest(m_prime) != published.payload():
        return Adjudication(Verdict.FORGERY, ev + ["Bob's accepted message does not hash to Alice's digest"])
    return Adjudication(Verdict.GUILTY, ev + [f"H(M') of Bob's {len(m_prime)}-bit message equals the published digest"])
