"""Run orchestration: configs, key establishment, full protocol runs, replay."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from avowable.adversary import EveKind, EveStrategy
from avowable.crypto import Bb84Abort, BitString, CryptoError, bb84_establish_key
from avowable.qsdc import ChannelCheckAbort, QsdcPhase, QsdcSession, SignatureResult, adjudicate_qsdc_dispute
from avowable.quantum import fidelity_up_to_phase
from avowable.seeding import derive_seed, make_rng
from avowable.teleport import (
    TeleportKeys,
    TeleportPhase,
    TeleportSession,
    adjudicate_teleport_dispute,
    ka_bits_needed,
    kb_bits_needed,
    random_state,
)
from avowable.transcript import (
    Adjudication,
    Claim,
    EventKind,
    PartyId,
    Protocol,
    ProtocolError,
    Transcript,
    Verdict,
    canonical,
)

BB84_ATTEMPTS = 64
TAMPER_TARGETS = ("announced", "digest", "decoded")


def _encode_state(alpha: complex, beta: complex) -> list[list[float]]:
    return [[alpha.real, alpha.imag], [beta.real, beta.imag]]


def _decode_amp(x: Any) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", "").replace("i", "j"))
    return complex(x)


@dataclass
class TeleportConfig:
    n: int
    seed: int
    states: list[tuple[complex, complex]] | None = None
    forge_charlie_key: bool = False
    tamper_s_a_bit: int | None = None

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.states is not None and len(self.states) != self.n:
            raise ValueError(f"{len(self.states)} states given for n = {self.n}")

    def inputs(self) -> list[tuple[complex, complex]]:
        if self.states is not None:
            return [(complex(a), complex(b)) for a, b in self.states]
        rng = make_rng(self.seed, "teleport", "inputs")
        return [random_state(rng) for _ in range(self.n)]

    def to_dict(self) -> dict:
        return {
            "protocol": "teleport",
            "n": self.n,
            "seed": self.seed,
            "states": None if self.states is None else [_encode_state(a, b) for a, b in self.states],
            "forge_charlie_key": self.forge_charlie_key,
            "tamper_s_a_bit": self.tamper_s_a_bit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TeleportConfig":
        states = d.get("states")
        if states is not None:
            states = [(_decode_amp(a), _decode_amp(b)) for a, b in states]
        n = d.get("n")
        n = len(states) if n is None and states is not None else n
        return cls(
            int(n),
            int(d.get("seed", 0)),
            states,
            bool(d.get("forge_charlie_key", False)),
            d.get("tamper_s_a_bit"),
        )


@dataclass
class QsdcConfig:
    message: BitString
    seed: int
    eve: EveStrategy | None = None
    check_threshold: int = 0
    tamper_target: str | None = None
    tamper_bit: int | None = None

    @property
    def n(self) -> int:
        return len(self.message)

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("message must have at least one bit")
        if self.tamper_target is not None and self.tamper_target not in TAMPER_TARGETS:
            raise ValueError(f"tamper target must be one of {TAMPER_TARGETS}")

    def to_dict(self) -> dict:
        return {
            "protocol": "qsdc",
            "n": self.n,
            "seed": self.seed,
            "message": {"n": self.n, "hex": self.message.to_hex()},
            "eve": None if self.eve is None else self.eve.to_dict(),
            "check_threshold": self.check_threshold,
            "tamper_target": self.tamper_target,
            "tamper_bit": self.tamper_bit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QsdcConfig":
        msg = d["message"]
        if isinstance(msg, dict):
            message = BitString.from_hex(msg["hex"], int(msg["n"]))
        else:
            message = parse_message(str(msg))
        eve = d.get("eve")
        seed = int(d.get("seed", 0))
        if isinstance(eve, dict) and EveKind(eve.get("kind", "none")) is not EveKind.NONE:
            eve = EveStrategy.from_dict({"seed": derive_seed(seed, "eve"), **eve})
        else:
            eve = None
        return cls(
            message,
            seed,
            eve,
            int(d.get("check_threshold", 0)),
            d.get("tamper_target"),
            d.get("tamper_bit"),
        )


def parse_message(text: str) -> BitString:
    """``0b10110`` is a literal bit string; anything else is hex, 4 bits per digit."""
    text = text.strip()
    if text.startswith("0b"):
        return BitString.from_str(text[2:])
    return BitString.from_hex(text)


def load_config(path: str | Path) -> dict:
    """YAML or JSON config; dotted keys like ``eve.kind`` are expanded."""
    raw = yaml.safe_load(Path(path).read_text()) or {}
    out: dict = {}
    for key, value in raw.items():
        parts = str(key).split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        if isinstance(value, dict) and isinstance(node.get(parts[-1]), dict):
            node[parts[-1]].update(value)
        else:
            node[parts[-1]] = value
    return out


def _run_id(protocol: Protocol, config: dict) -> str:
    return hashlib.sha256(canonical({"protocol": protocol.value, "config": config}).encode()).hexdigest()[:16]


def _new_transcript(protocol: Protocol, seed: int, config: dict) -> Transcript:
    return Transcript(_run_id(protocol, config), seed, protocol, config)


def establish_key_bits(length: int, seed: int, name: str) -> tuple[BitString, float]:
    """BB84 with deterministic retries when sifting leaves too few bits."""
    last: Exception | None = None
    for attempt in range(BB84_ATTEMPTS):
        try:
            key, qber = bb84_establish_key(length, derive_seed(seed, "bb84", name, attempt))
            return key.bits, qber
        except Bb84Abort as exc:
            last = exc
    raise CryptoError(f"could not establish {name} in {BB84_ATTEMPTS} attempts: {last}")


def teleport_keys(config: TeleportConfig) -> TeleportKeys:
    """The pads for a run; a pure function of the config, so the arbitrator
    can re-derive the arbitrator's copies when adjudicating."""
    ka, _ = establish_key_bits(ka_bits_needed(config.n), config.seed, "K_a")
    kb, _ = establish_key_bits(kb_bits_needed(config.n), config.seed, "K_b")
    charlie_ka = None
    if config.forge_charlie_key:
        charlie_ka = BitString.random(make_rng(config.seed, "forged", "K_a"), len(ka))
    return TeleportKeys.from_bits(ka, kb, charlie_ka)


@dataclass
class TeleportRun:
    transcript: Transcript
    session: TeleportSession | None
    inputs: list[tuple[complex, complex]]
    fidelities: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.session is not None and self.session.phase is TeleportPhase.DONE


def execute_teleport(config: TeleportConfig) -> TeleportRun:
    config.validate()
    snapshot = config.to_dict()
    t = _new_transcript(Protocol.TELEPORT, config.seed, snapshot)
    keys = teleport_keys(config)
    for name, key in (("K_a", keys.alice_ka), ("K_b", keys.bob_kb)):
        t.emit(PartyId.CHARLIE, EventKind.MEASURE, step="bb84", key=name, length=len(key), phase=TeleportPhase.CREATED.value)
    inputs = config.inputs()

    tamper = None
    if config.tamper_s_a_bit is not None:
        bit = int(config.tamper_s_a_bit)

        def tamper(msg):
            if msg.step != "s_a":
                return msg.payload
            c = msg.payload
            return type(c)(c.bits.flip(bit % len(c.bits)), c.key_offset)

    s = TeleportSession(config.n, inputs, config.seed, keys, t, tamper=tamper)
    run = TeleportRun(t, s, inputs)
    try:
        s.request_session()
        s.verify_application()
        s.swap_entanglement()
        s.correct_channel(s.alice_receive_outcomes())
        s.alice_measure_and_wrap()
        s.relay_reencrypt()
        s.bob_recover(s.bob_receive_record())
        s.finish()
    except (ProtocolError, CryptoError) as exc:
        run.error = str(exc)
        if s.phase is not TeleportPhase.ABORTED:
            s.abort(PartyId.CHARLIE, "run", str(exc))
        return run
    run.fidelities = [fidelity_up_to_phase(r, list(u)) for r, u in zip(s.recovered, inputs)]
    return run


def run_teleport(config: TeleportConfig) -> Transcript:
    return execute_teleport(config).transcript


@dataclass
class QsdcRun:
    transcript: Transcript
    session: QsdcSession
    result: SignatureResult | None = None
    decoded: BitString | None = None
    report: object = None
    error: str | None = None

    @property
    def aborted(self) -> bool:
        return self.session.phase is QsdcPhase.ABORTED

    @property
    def accepted(self) -> bool:
        return self.result is SignatureResult.ACCEPT


def execute_qsdc(config: QsdcConfig, validate: bool = True) -> QsdcRun:
    if validate:
        config.validate()
    t = _new_transcript(Protocol.QSDC, config.seed, config.to_dict())

    tamper = None
    if config.tamper_target in ("announced", "digest"):
        step = "announce" if config.tamper_target == "announced" else "hash"
        bit = int(config.tamper_bit or 0)

        def tamper(msg):
            if msg.step != step:
                return msg.payload
            p = msg.payload
            return p.flip(bit % (len(p) if step == "announce" else 256))

    s = QsdcSession(config.message, config.seed, t, config.eve, config.check_threshold, tamper)
    run = QsdcRun(t, s)
    try:
        s.agree_hash()
        s.distribute_pairs()
        run.report = s.channel_check()
        s.encode_message()
        s.alice_measure_announce()
        s.send_hash()
        announced, digest = s.bob_receive()
        decoded = s.bob_decode(announced)
        if config.tamper_target == "decoded" and len(decoded):
            decoded = decoded.flip(int(config.tamper_bit or 0) % len(decoded))
        run.decoded = decoded
        run.result = s.verify_signature(decoded, digest)
    except ChannelCheckAbort as exc:
        run.report = exc.report
        run.error = str(exc)
    except ProtocolError as exc:
        run.error = str(exc)
        if s.phase is not QsdcPhase.ABORTED:
            s.abort(PartyId.BOB, "run", str(exc))
    return run


def run_qsdc(config: QsdcConfig) -> Transcript:
    return execute_qsdc(config).transcript


def config_from_transcript(t: Transcript) -> TeleportConfig | QsdcConfig:
    if t.protocol is Protocol.TELEPORT:
        return TeleportConfig.from_dict(t.config)
    return QsdcConfig.from_dict(t.config)


def adjudicate_transcript(t: Transcript, claim: Claim) -> Adjudication:
    if t.truncated or not t.events:
        return Adjudication(Verdict.INCONCLUSIVE, ["transcript is truncated or empty"])
    if t.protocol is Protocol.QSDC:
        return adjudicate_qsdc_dispute(t, claim)
    keys = teleport_keys(TeleportConfig.from_dict(t.config))
    return adjudicate_teleport_dispute(t, claim, keys.charlie_ka, keys.charlie_kb)


def adjudicate(transcript_path: str | Path, claim: Claim | str) -> Adjudication:
    """Parse errors propagate (with line numbers); truncation is Inconclusive."""
    claim = Claim(claim) if not isinstance(claim, Claim) else claim
    return adjudicate_transcript(Transcript.load(transcript_path), claim)


def rerun(t: Transcript) -> Transcript:
    config = config_from_transcript(t)
    if isinstance(config, TeleportConfig):
        return run_teleport(config)
    return execute_qsdc(config, validate=False).transcript


def replay(transcript_path: str | Path) -> tuple[bool, str]:
    """Re-execute from the saved (seed, config) and compare bytes."""
    text = Path(transcript_path).read_text()
    t = Transcript.loads(text)
    if t.truncated:
        return False, "transcript is truncated"
    fresh = rerun(t).dumps()
    if fresh == text:
        return True, f"identical: {len(t.events)} events"
    old, new = text.splitlines(), fresh.splitlines()
    for k, (a, b) in enumerate(zip(old, new), start=1):
        if a != b:
            return False, f"first difference at line {k}"
    return False, f"length differs: {len(old)} vs {len(new)} lines"


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
