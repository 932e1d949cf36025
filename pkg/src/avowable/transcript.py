"""Append-only run transcripts, JSON-lines persistence, and the simulated network.

File layout: the first line is a header object (run id, seed, protocol, config
snapshot); every following line is one ``TraceEvent``. Objects are written
with sorted keys and no whitespace so the bytes are canonical. Bit strings are
``{"n": <bits>, "hex": <MSB-first hex>}``.
"""

from __future__ import annotations

import enum
import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from avowable.crypto import BitString, Ciphertext, Digest


class PartyId(str, enum.Enum):
    ALICE = "Alice"
    BOB = "Bob"
    CHARLIE = "Charlie"
    EVE = "Eve"


class Channel(str, enum.Enum):
    CLASSICAL_PRIVATE = "ClassicalPrivate"
    CLASSICAL_PUBLIC = "ClassicalPublic"
    QUANTUM = "Quantum"


class EventKind(str, enum.Enum):
    SEND = "Send"
    RECEIVE = "Receive"
    MEASURE = "Measure"
    APPLY = "Apply"
    ABORT = "Abort"
    VERDICT = "Verdict"


class Protocol(str, enum.Enum):
    TELEPORT = "Teleport"
    QSDC = "Qsdc"


class TranscriptParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ProtocolError(Exception):
    """A protocol step failed or was attempted out of order."""


@dataclass(frozen=True)
class QubitRef:
    register: str
    index: int


Payload = Any  # Ciphertext | BitString | Digest | QubitRef | str


def encode_bits(b: BitString) -> dict:
    return {"n": len(b), "hex": b.to_hex()}


def decode_bits(d: dict) -> BitString:
    return BitString.from_hex(d["hex"], int(d["n"]))


def encode_payload(p: Payload) -> dict:
    if isinstance(p, Ciphertext):
        return {"type": "ciphertext", "bits": encode_bits(p.bits), "key_offset": p.key_offset}
    if isinstance(p, BitString):
        return {"type": "bits", "bits": encode_bits(p)}
    if isinstance(p, Digest):
        return {"type": "digest", "hex": p.hex()}
    if isinstance(p, QubitRef):
        return {"type": "qubit", "register": p.register, "index": p.index}
    if isinstance(p, str):
        return {"type": "label", "text": p}
    raise TypeError(f"unsupported payload {type(p).__name__}")


def decode_payload(d: dict) -> Payload:
    t = d["type"]
    if t == "ciphertext":
        return Ciphertext(decode_bits(d["bits"]), int(d["key_offset"]))
    if t == "bits":
        return decode_bits(d["bits"])
    if t == "digest":
        return Digest.from_hex(d["hex"])
    if t == "qubit":
        return QubitRef(d["register"], int(d["index"]))
    if t == "label":
        return d["text"]
    raise ValueError(f"unknown payload type {t!r}")


def canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def payload_hash(encoded: dict) -> str:
    return hashlib.sha256(canonical(encoded).encode()).hexdigest()


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    timestamp_logical: int
    actor: PartyId
    kind: EventKind
    details: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp_logical": self.timestamp_logical,
            "actor": self.actor.value,
            "kind": self.kind.value,
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(
            int(d["seq"]),
            int(d["timestamp_logical"]),
            PartyId(d["actor"]),
            EventKind(d["kind"]),
            dict(d["details"]),
        )

    @property
    def step(self) -> str | None:
        return self.details.get("step")

    def payload(self) -> Payload:
        return decode_payload(self.details["payload"])


@dataclass
class Transcript:
    run_id: str
    seed: int
    protocol: Protocol
    config: dict
    events: list[TraceEvent] = field(default_factory=list)
    truncated: bool = False

    def emit(self, actor: PartyId, kind: EventKind, **details) -> TraceEvent:
        seq = len(self.events)
        # Round-trip through JSON so in-memory and parsed transcripts compare equal.
        ev = TraceEvent(seq, seq, actor, kind, json.loads(canonical(details)))
        self.events.append(ev)
        return ev

    def find(self, step: str, kind: EventKind | None = None, actor: PartyId | None = None) -> list[TraceEvent]:
        return [
            e
            for e in self.events
            if e.step == step
            and (kind is None or e.kind is kind)
            and (actor is None or e.actor is actor)
        ]

    def first(self, step: str, kind: EventKind | None = None, actor: PartyId | None = None) -> TraceEvent | None:
        hits = self.find(step, kind, actor)
        return hits[0] if hits else None

    @property
    def final_phase(self) -> str | None:
        return self.events[-1].details.get("phase") if self.events else None

    @property
    def aborted(self) -> bool:
        return any(e.kind is EventKind.ABORT and e.details.get("fatal") for e in self.events)

    def header(self) -> dict:
        return {
            "type": "header",
            "run_id": self.run_id,
            "seed": self.seed,
            "protocol": self.protocol.value,
            "config": self.config,
        }

    def event_lines(self) -> list[str]:
        return [canonical(e.to_dict()) for e in self.events]

    def dumps(self) -> str:
        return "\n".join([canonical(self.header())] + self.event_lines()) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        """Parse JSON lines. A malformed *final* line with no newline is taken
        as a cut-off write: it is dropped and the transcript marked truncated."""
        lines = text.split("\n")
        ends_clean = text.endswith("\n")
        if ends_clean:
            lines = lines[:-1]
        header = None
        events: list[TraceEvent] = []
        truncated = False
        for no, line in enumerate(lines, start=1):
            last = no == len(lines)
            try:
                obj = json.loads(line)
                if header is None:
                    if obj.get("type") != "header":
                        raise ValueError("first line must be the transcript header")
                    header = obj
                    Protocol(obj["protocol"])
                    int(obj["seed"])
                    continue
                ev = TraceEvent.from_dict(obj)
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                if last and not ends_clean:
                    truncated = True
                    break
                raise TranscriptParseError(no, str(exc)) from None
            if ev.seq != len(events):
                raise TranscriptParseError(no, f"event seq {ev.seq} out of order (expected {len(events)})")
            events.append(ev)
        if header is None:
            return cls("", 0, Protocol.TELEPORT, {}, [], truncated=True)
        return cls(
            header["run_id"],
            int(header["seed"]),
            Protocol(header["protocol"]),
            header["config"],
            events,
            truncated=truncated or not ends_clean,
        )

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        return cls.loads(Path(path).read_text())


@dataclass
class ChannelMessage:
    seq: int
    sender: PartyId
    receiver: PartyId
    channel: Channel
    payload: Payload
    step: str


class Network:
    """Point-to-point FIFO channels between parties, logging every hop.

    ``tamper`` (optional) sees each message at delivery and may return a
    modified payload; the Receive event records what actually arrived.
    """

    def __init__(
        self,
        emit: Callable[..., TraceEvent],
        tamper: Callable[[ChannelMessage], Payload] | None = None,
    ):
        self._emit = emit
        self._queues: dict[PartyId, deque[ChannelMessage]] = {}
        self._next = 0
        self.tamper = tamper

    def send(self, sender: PartyId, receiver: PartyId, channel: Channel, payload: Payload, step: str, **extra) -> ChannelMessage:
        if channel is Channel.CLASSICAL_PRIVATE and not isinstance(payload, Ciphertext):
            raise ProtocolError("private classical channel only carries one-time-pad ciphertext")
        if channel is Channel.QUANTUM and not isinstance(payload, QubitRef):
            raise ProtocolError("quantum channel only carries qubit references")
        msg = ChannelMessage(self._next, sender, receiver, channel, payload, step)
        self._next += 1
        enc = encode_payload(payload)
        self._emit(
            sender,
            EventKind.SEND,
            step=step,
            channel=channel.value,
            sender=sender.value,
            receiver=receiver.value,
            msg_seq=msg.seq,
            payload=enc,
            payload_hash=payload_hash(enc),
            **extra,
        )
        self._queues.setdefault(receiver, deque()).append(msg)
        return msg

    def pending(self, receiver: PartyId) -> int:
        return len(self._queues.get(receiver, ()))

    def receive(self, receiver: PartyId, step: str, **extra) -> ChannelMessage:
        queue = self._queues.get(receiver)
        if not queue:
            raise ProtocolError(f"{receiver.value} has no message waiting for step {step}")
        msg = queue[0]
        if msg.step != step:
            raise ProtocolError(f"{receiver.value} expected {step}, next message is {msg.step}")
        queue.popleft()
        if self.tamper is not None:
            msg.payload = self.tamper(msg)
        enc = encode_payload(msg.payload)
        self._emit(
            receiver,
            EventKind.RECEIVE,
            step=step,
            channel=msg.channel.value,
            sender=msg.sender.value,
            receiver=receiver.value,
            msg_seq=msg.seq,
            payload=enc,
            payload_hash=payload_hash(enc),
            **extra,
        )
        return msg


class Verdict(str, enum.Enum):
    GUILTY = "Guilty"
    NOT_GUILTY = "NotGuilty"
    FORGERY = "Forgery"
    INCONCLUSIVE = "Inconclusive"


class Claim(str, enum.Enum):
    ALICE_DENIES_SENDING = "alice-denies-sending"
    BOB_DENIES_RECEIVING = "bob-denies-receiving"


@dataclass
class Adjudication:
    verdict: Verdict
    evidence: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        return "\n".join([f"verdict: {self.verdict.value}"] + [f"  - {e}" for e in self.evidence])
